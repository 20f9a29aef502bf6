"""Fixed-step first-order optimizers with trace recording.

An *objective* is any object exposing ``n_samples`` and
``value_and_grad(params, rows=None) -> (float, ndarray)`` where ``rows``
optionally restricts evaluation to a mini-batch. The update is always

    w <- w - lr * (grad f(w) + l2_lambda * mask * w)

and the recorded objective includes the matching ``l2_lambda / 2 * |mask * w|^2``.
"""

import csv
import io
import json
import time
from dataclasses import dataclass, field

import numpy as np

TRACE_COLUMNS = ("iter", "loss", "train_acc", "test_acc", "grad_norm", "seconds")

CONVERGED = "ok"
DIVERGED = "diverged"


@dataclass(frozen=True)
class OptimizerConfig:
    """Hyperparameters for one optimizer run.

    ``batch_size=None`` means full batch. ``penalty_mask`` selects the
    coordinates the L2 term applies to (``None`` means all of them).
    """

    learning_rate: float = 0.01
    iterations: int = 200
    batch_size: int = None
    l2_lambda: float = 1e-3
    seed: int = 0
    record_every: int = 1
    penalty_mask: tuple = None

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.l2_lambda < 0:
            raise ValueError("l2_lambda must be nonnegative")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")


@dataclass
class TrainTrace:
    iteration: list = field(default_factory=list)
    loss: list = field(default_factory=list)
    train_acc: list = field(default_factory=list)
    test_acc: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    seconds: list = field(default_factory=list)

    def __len__(self):
        return len(self.iteration)

    def append(self, it, loss, train_acc, test_acc, grad_norm, seconds):
        self.iteration.append(int(it))
        self.loss.append(float(loss))
        self.train_acc.append(float(train_acc))
        self.test_acc.append(float(test_acc))
        self.grad_norm.append(float(grad_norm))
        self.seconds.append(float(seconds))

    def records(self):
        return [dict(zip(TRACE_COLUMNS, row)) for row in zip(
            self.iteration, self.loss, self.train_acc, self.test_acc, self.grad_norm, self.seconds)]

    def to_csv(self, path=None, include_seconds=True):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        cols = TRACE_COLUMNS if include_seconds else TRACE_COLUMNS[:-1]
        writer.writerow(cols)
        for rec in self.records():
            writer.writerow([rec["iter"]] + [repr(rec[c]) for c in cols[1:]])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def to_json(self, path=None):
        text = json.dumps(self.records(), allow_nan=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_records(cls, records):
        tr = cls()
        for r in records:
            tr.append(r["iter"], r["loss"], r["train_acc"], r["test_acc"], r["grad_norm"],
                      r.get("seconds", 0.0))
        return tr

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls.from_records([{k: float(v) for k, v in r.items()} for r in rows])


@dataclass
class RunResult:
    params: np.ndarray
    trace: TrainTrace
    status: str = CONVERGED

    @property
    def diverged(self):
        return self.status == DIVERGED


def _penalty(w, cfg):
    if cfg.l2_lambda == 0:
        return 0.0, 0.0
    wm = w if cfg.penalty_mask is None else w * np.asarray(cfg.penalty_mask, dtype=float)
    return 0.5 * cfg.l2_lambda * float(wm @ wm), cfg.l2_lambda * wm


def _record(trace, t, w, value, grad, eval_hook, start):
    train_acc, test_acc = (np.nan, np.nan) if eval_hook is None else eval_hook(w)
    trace.append(t, value, train_acc, test_acc, np.linalg.norm(grad), time.perf_counter() - start)


def _should_record(t, cfg):
    return t % cfg.record_every == 0 or t == cfg.iterations


def _run(objective, w0, cfg, eval_hook, batches):
    # overflow is reported through the divergence sentinel, not as warnings
    with np.errstate(over="ignore", invalid="ignore"):
        return _run_steps(objective, w0, cfg, eval_hook, batches)


def _run_steps(objective, w0, cfg, eval_hook, batches):
    w = np.array(w0, dtype=float).ravel()
    trace = TrainTrace()
    start = time.perf_counter()
    for t in range(cfg.iterations + 1):
        rows = None if t == cfg.iterations else next(batches)
        need_full = _should_record(t, cfg)
        if need_full or rows is None:
            value, grad = objective.value_and_grad(w)
        else:
            value, grad = 0.0, None
        if need_full:
            pen, pen_grad = _penalty(w, cfg)
            value = value + pen
            full_grad = grad + pen_grad
            if not (np.isfinite(value) and np.all(np.isfinite(full_grad))):
                return RunResult(w, trace, DIVERGED)
            _record(trace, t, w, value, full_grad, eval_hook, start)
        if t == cfg.iterations:
            break
        if rows is not None:
            _, grad = objective.value_and_grad(w, rows)
        _, pen_grad = _penalty(w, cfg)
        step = grad + pen_grad
        if not np.all(np.isfinite(step)):
            return RunResult(w, trace, DIVERGED)
        w = w - cfg.learning_rate * step
    return RunResult(w, trace, CONVERGED)


def _full_batches():
    while True:
        yield None


def gd_run(objective, w0, cfg, eval_hook=None):
    """Full-batch gradient descent for exactly ``cfg.iterations`` steps.

    ``eval_hook(w) -> (train_acc, test_acc)`` is called at each recorded
    step. A non-finite objective or gradient stops the run with status
    ``"diverged"``; the trace keeps every finite record taken before it.
    """
    if cfg.batch_size is not None and cfg.batch_size < objective.n_samples:
        raise ValueError("gd_run is full batch; use sgd_run for mini-batches")
    return _run(objective, w0, cfg, eval_hook, _full_batches())


def epoch_batches(n, batch_size, seed):
    """Endless mini-batch index arrays; a fresh PCG64 permutation each epoch."""
    rng = np.random.default_rng(seed)
    while True:
        perm = rng.permutation(n)
        for start in range(0, n, batch_size):
            yield perm[start:start + batch_size]


def sgd_run(objective, w0, cfg, eval_hook=None):
    """Mini-batch SGD; each iteration is one batch, batches reshuffle every epoch."""
    if cfg.batch_size is None:
        raise ValueError("sgd_run needs a finite batch_size")
    if cfg.batch_size > objective.n_samples:
        raise ValueError("batch_size exceeds the number of samples")
    return _run(objective, w0, cfg, eval_hook, epoch_batches(objective.n_samples, cfg.batch_size, cfg.seed))


def run(objective, w0, cfg, eval_hook=None):
    if cfg.batch_size is None or cfg.batch_size >= objective.n_samples:
        return gd_run(objective, w0, cfg, eval_hook)
    return sgd_run(objective, w0, cfg, eval_hook)


# -- trace post-processing ---------------------------------------------------

def normalized_losses(values):
    """(v - min) / (v_0 - min); a constant sequence gives 1 followed by zeros."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("empty trace")
    lo = v.min()
    span = v[0] - lo
    if span <= 0:
        out = np.zeros_like(v)
        out[0] = 1.0
        return out
    return (v - lo) / span


def normalized_trace(trace):
    out = TrainTrace(list(trace.iteration), list(normalized_losses(trace.loss)),
                     list(trace.train_acc), list(trace.test_acc),
                     list(trace.grad_norm), list(trace.seconds))
    return out


def iterations_to_threshold(trace, threshold=0.1):
    """First recorded iteration whose normalized loss is at or below ``threshold``."""
    norm = normalized_losses(trace.loss)
    hits = np.nonzero(norm <= threshold)[0]
    return int(trace.iteration[hits[0]]) if hits.size else None


def mean_trace(traces):
    """Pointwise mean of traces recorded on the same iteration grid.

    A run that stopped early (divergence) shortens the result to the
    iterations every trace recorded.
    """
    if not traces:
        raise ValueError("no traces to average")
    n = min(len(t) for t in traces)
    its = traces[0].iteration[:n]
    if any(t.iteration[:n] != its for t in traces):
        raise ValueError("traces have different iteration grids")
    cols = {}
    for name in ("loss", "train_acc", "test_acc", "grad_norm"):
        cols[name] = list(np.mean([getattr(t, name)[:n] for t in traces], axis=0))
    cols["seconds"] = list(np.sum([t.seconds[:n] for t in traces], axis=0))
    return TrainTrace(list(its), **cols)
