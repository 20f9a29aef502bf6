"""A small generator/discriminator pair trained on the rooted minimax value.

    V_k = mean_x k * g(x)^{1/k} + mean_z k * (1 - g(f(z)))^{1/k}

The discriminator ``g`` (sigmoid over one network logit) ascends V_k and the
generator ``f`` descends it, alternating. Powers are evaluated in log space
with ``g`` clamped to [eps, 1 - eps].
"""

import csv
from dataclasses import asdict, dataclass, field

import numpy as np

from ._validation import check_root
from .losses import softplus
from .models import MlpParams, _forward_cache, backprop, init_params

EPS = 1e-7


@dataclass(frozen=True)
class GanConfig:
    k: float = 3.0
    latent_dim: int = 1
    gen_hidden: tuple = ()
    disc_hidden: tuple = (16,)
    lr_gen: float = 0.05
    lr_disc: float = 0.05
    disc_steps: int = 1
    gen_steps: int = 1
    rounds: int = 2000
    batch_size: int = 64
    seed: int = 0
    target_mean: tuple = (3.0,)
    target_cov: tuple = ((1.0,),)
    # two-component mixture when set: second component mean, equal weights
    target_mean2: tuple = None
    eval_size: int = 1000
    record_every: int = 10
    loss: str = "rooted"

    def __post_init__(self):
        if self.loss == "rooted":
            check_root(self.k)
        elif self.loss != "log":
            raise ValueError("loss must be 'rooted' or 'log'")
        if self.lr_gen <= 0 or self.lr_disc <= 0:
            raise ValueError("step sizes must be positive")
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")
        if self.rounds < 0:
            raise ValueError("rounds must be nonnegative")
        if not 1 <= len(self.target_mean) <= 2:
            raise ValueError("targets live in one or two dimensions")

    @property
    def data_dim(self):
        return len(self.target_mean)

    def sample_target(self, rng, n):
        mean = np.asarray(self.target_mean, dtype=float)
        chol = np.linalg.cholesky(np.asarray(self.target_cov, dtype=float))
        x = mean + rng.standard_normal((n, self.data_dim)) @ chol.T
        if self.target_mean2 is not None:
            pick = rng.random(n) < 0.5
            x[pick] += np.asarray(self.target_mean2, dtype=float) - mean
        return x

    def target_moments(self):
        mean = np.asarray(self.target_mean, dtype=float)
        cov = np.asarray(self.target_cov, dtype=float)
        if self.target_mean2 is None:
            return mean, cov
        m2 = np.asarray(self.target_mean2, dtype=float)
        delta = (m2 - mean) / 2
        return mean + delta, cov + np.outer(delta, delta)


# -- value and gradients -----------------------------------------------------

def _disc_probs(logits):
    g = np.exp(-softplus(-logits))
    return np.clip(g, EPS, 1 - EPS), (g > EPS) & (g < 1 - EPS)


def _real_term(logits, k, loss):
    """Per-sample value and d/dlogit for the real-data term."""
    g, free = _disc_probs(logits)
    if loss == "log":
        return np.log(g), np.where(free, 1 - g, 0.0)
    val = k * np.exp(np.log(g) / k)
    # d/ds k g^{1/k} = g^{1/k} (1 - g)
    return val, np.where(free, np.exp(np.log(g) / k) * (1 - g), 0.0)


def _fake_term(logits, k, loss):
    g, free = _disc_probs(logits)
    if loss == "log":
        return np.log1p(-g), np.where(free, -g, 0.0)
    val = k * np.exp(np.log1p(-g) / k)
    return val, np.where(free, -g * np.exp(np.log1p(-g) / k), 0.0)


def rooted_value(disc, gen, real, latent, k, loss="rooted"):
    """Two-term batch mean of the minimax value (``loss='log'`` gives the log-GAN value)."""
    real = np.atleast_2d(np.asarray(real, dtype=float))
    latent = np.atleast_2d(np.asarray(latent, dtype=float))
    if real.shape[0] == 0 or latent.shape[0] == 0:
        raise ValueError("empty batch")
    if loss == "rooted":
        check_root(k)
    fake = _forward_cache(gen, latent)[0][-1]
    r, _ = _real_term(_forward_cache(disc, real)[0][-1][:, 0], k, loss)
    f, _ = _fake_term(_forward_cache(disc, fake)[0][-1][:, 0], k, loss)
    return float(np.mean(r) + np.mean(f))


def value_and_grads(disc, gen, real, latent, k, loss="rooted"):
    """V_k plus its gradients with respect to discriminator and generator parameters."""
    real = np.atleast_2d(np.asarray(real, dtype=float))
    latent = np.atleast_2d(np.asarray(latent, dtype=float))
    g_acts, g_pre = _forward_cache(gen, latent)
    fake = g_acts[-1]
    r_acts, r_pre = _forward_cache(disc, real)
    f_acts, f_pre = _forward_cache(disc, fake)
    r_val, r_ds = _real_term(r_acts[-1][:, 0], k, loss)
    f_val, f_ds = _fake_term(f_acts[-1][:, 0], k, loss)
    value = float(np.mean(r_val) + np.mean(f_val))

    d_real, _ = backprop(disc, r_acts, r_pre, (r_ds / real.shape[0])[:, None])
    d_fake, dx_fake = backprop(disc, f_acts, f_pre, (f_ds / fake.shape[0])[:, None])
    d_grad = MlpParams([a + b for a, b in zip(d_real.weights, d_fake.weights)],
                       [a + b for a, b in zip(d_real.biases, d_fake.biases)])
    g_grad, _ = backprop(gen, g_acts, g_pre, dx_fake)
    return value, d_grad, g_grad


# -- training ----------------------------------------------------------------

@dataclass
class GanTrace:
    dim: int
    rounds: list = field(default_factory=list)
    value: list = field(default_factory=list)
    disc_acc_real: list = field(default_factory=list)
    disc_acc_fake: list = field(default_factory=list)
    fake_mean: list = field(default_factory=list)
    fake_cov: list = field(default_factory=list)
    status: str = "ok"

    def __len__(self):
        return len(self.rounds)

    def columns(self):
        cols = ["round", "value", "disc_acc_real", "disc_acc_fake"]
        cols += [f"fake_mean_{i}" for i in range(self.dim)]
        cols += [f"fake_cov_{i}{j}" for i in range(self.dim) for j in range(self.dim)]
        return cols

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns())
            for i in range(len(self.rounds)):
                row = [self.rounds[i], repr(self.value[i]), repr(self.disc_acc_real[i]),
                       repr(self.disc_acc_fake[i])]
                row += [repr(float(v)) for v in np.ravel(self.fake_mean[i])]
                row += [repr(float(v)) for v in np.ravel(self.fake_cov[i])]
                w.writerow(row)


@dataclass
class GanResult:
    disc: MlpParams
    gen: MlpParams
    trace: GanTrace
    config: GanConfig


def _moments(x):
    return x.mean(axis=0), np.atleast_2d(np.cov(x, rowvar=False))


def _evaluate(cfg, disc, gen, real, latent, k):
    fake = _forward_cache(gen, latent)[0][-1]
    value = rooted_value(disc, gen, real, latent, k, cfg.loss)
    acc_real = float(np.mean(_forward_cache(disc, real)[0][-1][:, 0] > 0))
    acc_fake = float(np.mean(_forward_cache(disc, fake)[0][-1][:, 0] <= 0))
    mean, cov = _moments(fake)
    return value, acc_real, acc_fake, mean, cov


def init_networks(cfg):
    rng_seed = np.random.default_rng(cfg.seed).integers(0, 2**63 - 1, size=2)
    gen = init_params([cfg.latent_dim, *cfg.gen_hidden, cfg.data_dim], "uniform", int(rng_seed[0]))
    disc = init_params([cfg.data_dim, *cfg.disc_hidden, 1], "uniform", int(rng_seed[1]))
    return disc, gen


def alternate_train(cfg, disc=None, gen=None, freeze_generator=False, fake_sampler=None):
    """Alternate discriminator ascent and generator descent on V_k.

    ``fake_sampler(rng, n)`` replaces the generator output when given (the
    generator is then implicitly frozen); used to probe a discriminator
    against a fixed fake distribution.
    """
    if disc is None or gen is None:
        d0, g0 = init_networks(cfg)
        disc = d0 if disc is None else disc
        gen = g0 if gen is None else gen
    disc, gen = disc.copy(), gen.copy()
    rng = np.random.default_rng([cfg.seed, 1])
    eval_rng = np.random.default_rng([cfg.seed, 2])
    eval_real = cfg.sample_target(eval_rng, cfg.eval_size)
    eval_latent = eval_rng.standard_normal((cfg.eval_size, cfg.latent_dim))
    trace = GanTrace(cfg.data_dim)
    k = cfg.k

    def probe(r):
        if fake_sampler is None:
            value, ar, af, mean, cov = _evaluate(cfg, disc, gen, eval_real, eval_latent, k)
        else:
            fake = fake_sampler(eval_rng, cfg.eval_size)
            value, ar, af, mean, cov = _evaluate_fixed(cfg, disc, eval_real, fake, k)
        if not np.isfinite(value):
            return False
        trace.rounds.append(r)
        trace.value.append(value)
        trace.disc_acc_real.append(ar)
        trace.disc_acc_fake.append(af)
        trace.fake_mean.append(mean)
        trace.fake_cov.append(cov)
        return True

    if not probe(0):
        trace.status = "diverged"
        return GanResult(disc, gen, trace, cfg)
    for r in range(1, cfg.rounds + 1):
        for _ in range(cfg.disc_steps):
            real = cfg.sample_target(rng, cfg.batch_size)
            if fake_sampler is None:
                latent = rng.standard_normal((cfg.batch_size, cfg.latent_dim))
                _, d_grad, _ = value_and_grads(disc, gen, real, latent, k, cfg.loss)
            else:
                d_grad = _disc_grad_fixed(disc, real, fake_sampler(rng, cfg.batch_size), k, cfg.loss)
            disc = _step(disc, d_grad, +cfg.lr_disc)
        if fake_sampler is None and not freeze_generator:
            for _ in range(cfg.gen_steps):
                latent = rng.standard_normal((cfg.batch_size, cfg.latent_dim))
                real = cfg.sample_target(rng, cfg.batch_size)
                _, _, g_grad = value_and_grads(disc, gen, real, latent, k, cfg.loss)
                gen = _step(gen, g_grad, -cfg.lr_gen)
        if r % cfg.record_every == 0 or r == cfg.rounds:
            if not probe(r):
                trace.status = "diverged"
                break
    return GanResult(disc, gen, trace, cfg)


def _step(params, grad, signed_lr):
    return MlpParams([W + signed_lr * g for W, g in zip(params.weights, grad.weights)],
                     [b + signed_lr * g for b, g in zip(params.biases, grad.biases)],
                     params.activation)


def _disc_grad_fixed(disc, real, fake, k, loss):
    r_acts, r_pre = _forward_cache(disc, real)
    f_acts, f_pre = _forward_cache(disc, fake)
    _, r_ds = _real_term(r_acts[-1][:, 0], k, loss)
    _, f_ds = _fake_term(f_acts[-1][:, 0], k, loss)
    a, _ = backprop(disc, r_acts, r_pre, (r_ds / len(real))[:, None])
    b, _ = backprop(disc, f_acts, f_pre, (f_ds / len(fake))[:, None])
    return MlpParams([x + y for x, y in zip(a.weights, b.weights)],
                     [x + y for x, y in zip(a.biases, b.biases)])


def _evaluate_fixed(cfg, disc, real, fake, k):
    r_logit = _forward_cache(disc, real)[0][-1][:, 0]
    f_logit = _forward_cache(disc, fake)[0][-1][:, 0]
    rv, _ = _real_term(r_logit, k, cfg.loss)
    fv, _ = _fake_term(f_logit, k, cfg.loss)
    mean, cov = _moments(fake)
    return (float(np.mean(rv) + np.mean(fv)), float(np.mean(r_logit > 0)),
            float(np.mean(f_logit <= 0)), mean, cov)


# -- diagnostics -------------------------------------------------------------

def gan_diagnostics(trace, target_mean, target_cov, window=10):
    """Final-window averages of the trace and the fake-sample moment gaps."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    sl = slice(max(0, len(trace) - window), None)
    mean = np.mean(np.asarray(trace.fake_mean[sl], dtype=float), axis=0)
    cov = np.mean(np.asarray(trace.fake_cov[sl], dtype=float), axis=0)
    acc_real = float(np.mean(trace.disc_acc_real[sl]))
    acc_fake = float(np.mean(trace.disc_acc_fake[sl]))
    target_mean = np.asarray(target_mean, dtype=float)
    target_cov = np.atleast_2d(np.asarray(target_cov, dtype=float))
    return {
        "value": float(np.mean(trace.value[sl])),
        "disc_acc_real": acc_real,
        "disc_acc_fake": acc_fake,
        "disc_acc": 0.5 * (acc_real + acc_fake),
        "fake_mean": mean.tolist(),
        "fake_cov": cov.tolist(),
        "mean_gap": float(np.linalg.norm(mean - target_mean)),
        "cov_gap": float(np.linalg.norm(cov - target_cov)),
        "window": len(trace.value[sl]),
        "status": trace.status,
    }


def config_dict(cfg):
    return asdict(cfg)
