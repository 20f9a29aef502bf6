import numpy as np
import pytest

from rootedloss import calculus, gan_toy
from rootedloss.gan_toy import EPS, GanConfig
from rootedloss.models import MlpParams, init_params


def const_disc(logit, dim=1):
    return MlpParams([np.zeros((1, dim))], [np.array([float(logit)])])


def linear_gen(a=1.0, b=0.0):
    return MlpParams([np.array([[a]])], [np.array([b])])


REAL = np.linspace(-1, 1, 8)[:, None]
LATENT = np.linspace(-2, 2, 8)[:, None]


class TestValue:
    def test_constant_half(self):
        v = gan_toy.rooted_value(const_disc(0.0), linear_gen(), REAL, LATENT, 2)
        assert v == pytest.approx(2 * np.sqrt(2), rel=1e-14)

    def test_large_k_limit(self):
        d, g = const_disc(0.0), linear_gen()
        log_value = gan_toy.rooted_value(d, g, REAL, LATENT, None, loss="log")
        assert log_value == pytest.approx(2 * np.log(0.5), rel=1e-14)
        errs = [abs(gan_toy.rooted_value(d, g, REAL, LATENT, k) - 2 * k - log_value) for k in (1e2, 1e3)]
        assert errs[1] < errs[0]
        assert errs[1] <= errs[0] * 1e2 / 1e3 * 1.01

    def test_random_networks_limit(self):
        d = init_params([1, 5, 1], seed=3)
        g = init_params([1, 1], seed=4)
        log_value = gan_toy.rooted_value(d, g, REAL, LATENT, None, loss="log")
        errs = [abs(gan_toy.rooted_value(d, g, REAL, LATENT, k) - 2 * k - log_value) for k in (1e2, 1e3)]
        c = errs[0] * 1e2
        assert errs[1] < errs[0] and errs[1] <= c / 1e3 * 1.01

    def test_perfect_separator_at_clamp(self):
        # real x > 0, fake x < 0, steep discriminator saturates both clamps
        d = MlpParams([np.array([[1e3]])], [np.array([0.0])])
        real = np.full((4, 1), 1.0)
        g = linear_gen(0.0, -1.0)
        v = gan_toy.rooted_value(d, g, real, LATENT[:4], 2)
        expected = 2 * (1 - EPS) ** 0.5 + 2 * (1 - EPS) ** 0.5
        assert v == pytest.approx(expected, rel=1e-12)

    def test_empty_batch(self):
        with pytest.raises(ValueError):
            gan_toy.rooted_value(const_disc(0.0), linear_gen(), np.zeros((0, 1)), LATENT, 3)

    def test_monotone_in_discriminator_output(self):
        logits = np.linspace(-5, 5, 50)
        real_v, real_d = gan_toy._real_term(logits, 3.0, "rooted")
        fake_v, fake_d = gan_toy._fake_term(logits, 3.0, "rooted")
        assert np.all(np.diff(real_v) > 0) and np.all(real_d > 0)
        assert np.all(np.diff(fake_v) < 0) and np.all(fake_d < 0)


class TestGradients:
    @pytest.mark.parametrize("loss, k", [("rooted", 2.0), ("rooted", 5.0), ("log", None)])
    @pytest.mark.parametrize("dim", [1, 2])
    def test_finite_differences(self, loss, k, dim):
        rng = np.random.default_rng(dim)
        d = init_params([dim, 4, 1], seed=1)
        g = init_params([1, 3, dim], seed=2)
        for p in (d, g):
            for b in p.biases:
                b += rng.normal(size=b.shape) * 0.2
        real = rng.normal(size=(6, dim))
        z = rng.normal(size=(6, 1))
        _, dg, gg = gan_toy.value_and_grads(d, g, real, z, k, loss)
        fd_d = calculus.finite_diff_grad(
            lambda t: gan_toy.rooted_value(d.unflatten(t), g, real, z, k, loss), d.flatten(), h=1e-5)
        fd_g = calculus.finite_diff_grad(
            lambda t: gan_toy.rooted_value(d, g.unflatten(t), real, z, k, loss), g.flatten(), h=1e-5)
        assert np.allclose(dg.flatten(), fd_d, rtol=1e-4, atol=1e-8)
        assert np.allclose(gg.flatten(), fd_g, rtol=1e-4, atol=1e-8)


class TestTraining:
    def test_zero_rounds(self):
        cfg = GanConfig(rounds=0)
        d0, g0 = gan_toy.init_networks(cfg)
        res = gan_toy.alternate_train(cfg)
        assert np.array_equal(res.disc.flatten(), d0.flatten())
        assert np.array_equal(res.gen.flatten(), g0.flatten())
        assert len(res.trace) == 1

    def test_deterministic(self):
        cfg = GanConfig(rounds=50, seed=5)
        a, b = gan_toy.alternate_train(cfg), gan_toy.alternate_train(cfg)
        assert np.array_equal(a.gen.flatten(), b.gen.flatten())
        assert a.trace.value == b.trace.value

    def test_indistinguishable_fakes(self):
        cfg = GanConfig(rounds=300, seed=2, record_every=10)
        res = gan_toy.alternate_train(cfg, fake_sampler=lambda rng, n: cfg.sample_target(rng, n))
        diag = gan_toy.gan_diagnostics(res.trace, cfg.target_mean, cfg.target_cov, window=10)
        assert abs(diag["disc_acc"] - 0.5) <= 0.1

    def test_recovers_mean_seed_11(self):
        cfg = GanConfig(seed=11)
        res = gan_toy.alternate_train(cfg)
        diag = gan_toy.gan_diagnostics(res.trace, cfg.target_mean, cfg.target_cov, window=20)
        assert diag["mean_gap"] <= 0.5
        log_cfg = GanConfig(seed=11, loss="log")
        log_diag = gan_toy.gan_diagnostics(gan_toy.alternate_train(log_cfg).trace, cfg.target_mean,
                                           cfg.target_cov, window=20)
        assert log_diag["mean_gap"] <= 0.5

    def test_trace_csv(self, tmp_path):
        res = gan_toy.alternate_train(GanConfig(rounds=20, record_every=10, target_mean=(0.0, 1.0),
                                                target_cov=((1.0, 0.0), (0.0, 1.0))))
        path = tmp_path / "g.csv"
        res.trace.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == ("round,value,disc_acc_real,disc_acc_fake,fake_mean_0,fake_mean_1,"
                            "fake_cov_00,fake_cov_01,fake_cov_10,fake_cov_11")
        assert len(lines) == 4

    def test_mixture_target(self):
        cfg = GanConfig(target_mean=(-2.0,), target_mean2=(2.0,), rounds=0)
        x = cfg.sample_target(np.random.default_rng(0), 20000)
        mean, cov = cfg.target_moments()
        assert abs(x.mean() - mean[0]) < 0.05 and abs(x.var() - cov[0, 0]) < 0.15

    @pytest.mark.parametrize("kw", [{"k": 1.0}, {"lr_gen": 0.0}, {"batch_size": 1}, {"loss": "wasserstein"}])
    def test_config_validation(self, kw):
        with pytest.raises(ValueError):
            GanConfig(**kw)


class TestDiagnostics:
    def make_trace(self, means, value=1.5):
        tr = gan_toy.GanTrace(1)
        for i, m in enumerate(means):
            tr.rounds.append(i)
            tr.value.append(value)
            tr.disc_acc_real.append(0.5)
            tr.disc_acc_fake.append(0.5)
            tr.fake_mean.append(np.array([m]))
            tr.fake_cov.append(np.array([[1.0]]))
        return tr

    def test_perfect_match(self):
        diag = gan_toy.gan_diagnostics(self.make_trace([3.0] * 5), (3.0,), ((1.0,),))
        assert diag["mean_gap"] == 0 and diag["cov_gap"] == 0

    def test_constant_value(self):
        assert gan_toy.gan_diagnostics(self.make_trace([0.0] * 4, 2.25), (0.0,), ((1.0,),))["value"] == 2.25

    def test_untrained_shift(self):
        base = gan_toy.alternate_train(GanConfig(rounds=0)).trace.fake_mean[0][0]
        target = (base + 3.0,)
        res = gan_toy.alternate_train(GanConfig(target_mean=target, rounds=0))
        diag = gan_toy.gan_diagnostics(res.trace, target, ((1.0,),), 1)
        assert diag["mean_gap"] == pytest.approx(3.0, rel=1e-12)
