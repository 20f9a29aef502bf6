"""Experiment runners behind the command-line interface.

Each runner turns an :class:`~rootedloss.config.ExperimentConfig` into a
:class:`ResultTable` plus auxiliary files. Grid cells are independent and
may run in a process pool; rows are always assembled in sorted grid-key
order, so output bytes do not depend on scheduling.
"""

import csv
import io
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__, calculus, data as data_mod, gan_toy, models, optim
from .config import ConfigError
from .losses import LossSpec

RESULT_COLUMNS = ("dataset", "loss", "k", "m", "lambda", "depth", "iterations", "fold", "seed",
                  "train_acc", "test_acc", "iters_to_threshold", "status")


@dataclass
class ResultTable:
    columns: tuple = RESULT_COLUMNS
    rows: list = field(default_factory=list)
    traces: dict = field(default_factory=dict)     # run id -> TrainTrace / GanTrace
    seconds: dict = field(default_factory=dict)    # run id -> wall seconds
    extra: dict = field(default_factory=dict)      # file name -> text
    summary: list = field(default_factory=list)
    summary_columns: tuple = ()

    @property
    def any_diverged(self):
        return any(r.get("status") == optim.DIVERGED for r in self.rows)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv_text(columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def emit_results(table, cfg, out=None):
    """Write results.csv/json, summary.csv, timings.csv, traces and manifest.json.

    Only ``timings.csv`` and the manifest's ``created`` field hold wall-clock
    data; every other byte is a function of the configuration.
    """
    out = out or cfg.out
    if not table.rows:
        raise ValueError("no results to emit")
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from None
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {out} is not writable")

    def write(name, text):
        with open(os.path.join(out, name), "w", newline="") as fh:
            fh.write(text)

    write("results.csv", _csv_text(table.columns, table.rows))
    write("results.json", json.dumps([{c: r.get(c) for c in table.columns} for r in table.rows],
                                     indent=1) + "\n")
    if table.summary:
        write("summary.csv", _csv_text(table.summary_columns, table.summary))
    for run_id in sorted(table.traces):
        trace = table.traces[run_id]
        if isinstance(trace, optim.TrainTrace):
            write(f"trace_{run_id}.csv", trace.to_csv(include_seconds=False))
        else:
            trace.to_csv(os.path.join(out, f"trace_{run_id}.csv"))
    for name in sorted(table.extra):
        write(name, table.extra[name])
    if table.seconds:
        write("timings.csv", _csv_text(("run", "seconds"),
                                       [{"run": k, "seconds": v} for k, v in sorted(table.seconds.items())]))
    manifest = {
        "command": cfg.command,
        "library": "rootedloss",
        "version": __version__,
        "numpy": np.__version__,
        "config": cfg.to_dict(),
        "seeds": {"seed": cfg.seed, "seeds": list(cfg.seeds)},
        "runs": sorted(table.traces),
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    write("manifest.json", json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return out


# -- data preparation --------------------------------------------------------

def load_dataset(cfg):
    source = cfg.data
    if source == "spiral":
        return data_mod.make_spiral(cfg.spiral_n, cfg.spiral_noise, cfg.seed)
    if source == "madelon":
        return data_mod.make_madelon(seed=cfg.seed)
    if not os.path.exists(source):
        raise ConfigError(f"data file {source} does not exist")
    stem = os.path.basename(source).split(".")[0].lower()
    schema = data_mod.UCI_SCHEMAS.get(stem, data_mod.Schema())
    schema = data_mod.Schema(
        label_column=schema.label_column if cfg.label_column is None else cfg.label_column,
        delimiter=cfg.delimiter if cfg.delimiter != "," else schema.delimiter,
        header=cfg.header or schema.header,
        positive_label=cfg.positive_label or schema.positive_label,
    )
    try:
        return data_mod.load_delimited(source, schema, cfg.name)
    except data_mod.ParseError as exc:
        raise ConfigError(str(exc)) from None


def dataset_name(cfg, ds):
    return cfg.name or ds.name


def default_iterations(cfg, ds):
    """200 steps, or 1000 for SPECTF-style heart data, unless set explicitly."""
    if cfg.iters is not None:
        return cfg.iters
    return 1000 if "spect" in dataset_name(cfg, ds).lower() else 200


def _binary_tasks(ds, allow_ova=True):
    if ds.kind == data_mod.BINARY:
        return [ds]
    if not allow_ova:
        raise ConfigError(f"{ds.name} is multiclass; pass --one-vs-all")
    if ds.n_classes < 3:
        raise ConfigError(f"{ds.name}: cannot decompose {ds.n_classes} classes")
    return data_mod.one_vs_all(ds)


def _run_map(fn, jobs, cells):
    if jobs <= 1 or len(cells) <= 1:
        return [fn(c) for c in cells]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, cells))


def _id_num(v):
    return f"{v:g}"


# -- regress -----------------------------------------------------------------

def _regress_cell(cell):
    """One (loss, k, lambda, fold) cell: train every binary task, average accuracy."""
    tasks, tr_idx, te_idx, family, k, m, lam, cfg, iters = cell
    start = time.perf_counter()
    spec = LossSpec(family, k=k if family == "rlo" else 3.0, m=m if family == "rlo" else None)
    traces, tr_accs, te_accs, status = [], [], [], optim.CONVERGED
    for task in tasks:
        train, test = task.subset(tr_idx), task.subset(te_idx)
        if cfg.standardize:
            (train, test), _ = data_mod.standardize(train, [test])
        Xtr, Xte = train.X, test.X
        if cfg.fit_intercept:
            Xtr, Xte = models.add_bias_column(Xtr), models.add_bias_column(Xte)
        mask = None
        if cfg.fit_intercept and not cfg.penalize_intercept:
            mask = tuple([1.0] * (Xtr.shape[1] - 1) + [0.0])
        ocfg = optim.OptimizerConfig(cfg.lr, iters, cfg.batch_size, lam, cfg.seed,
                                     cfg.record_every, mask)
        obj = models.linear_objective(Xtr, train.y, spec)

        def hook(w, Xtr=Xtr, Xte=Xte, ytr=train.y, yte=test.y):
            return models.evaluate(w, Xtr, ytr), models.evaluate(w, Xte, yte)
        res = optim.run(obj, np.zeros(Xtr.shape[1]), ocfg, hook)
        traces.append(res.trace)
        if res.diverged:
            status = optim.DIVERGED
        else:
            tr_accs.append(models.evaluate(res.params, Xtr, train.y))
            te_accs.append(models.evaluate(res.params, Xte, test.y))
    if status == optim.DIVERGED:
        trace = traces[-1]
        train_acc = test_acc = itt = None
    else:
        trace = traces[0] if len(traces) == 1 else optim.mean_trace(traces)
        train_acc, test_acc = float(np.mean(tr_accs)), float(np.mean(te_accs))
        itt = optim.iterations_to_threshold(trace, cfg.threshold)
    return trace, train_acc, test_acc, itt, status, time.perf_counter() - start


def regress_grid(cfg):
    """Sorted grid keys: (loss, k, lambda) with the logistic baseline carrying k=None."""
    keys = []
    for family in cfg.losses:
        if family not in ("logistic", "rlo"):
            raise ConfigError(f"regress supports logistic and rlo losses, not {family!r}")
        ks = (None,) if family == "logistic" else tuple(cfg.k)
        for k in ks:
            for lam in cfg.l2_lambda:
                keys.append((family, k, lam))
    return keys


def run_regress(cfg):
    ds = load_dataset(cfg)
    name = dataset_name(cfg, ds)
    tasks = _binary_tasks(ds)
    iters = default_iterations(cfg, ds)
    plan = data_mod.kfold(ds.n, cfg.folds, cfg.seed)
    cells, meta = [], []
    for family, k, lam in regress_grid(cfg):
        m = None if k is None else (k if cfg.m is None else cfg.m)
        for fold in range(cfg.folds):
            cells.append((tasks, plan.train[fold], plan.validation[fold], family, k, m, lam, cfg, iters))
            meta.append((family, k, m, lam, fold))
    outputs = _run_map(_regress_cell, cfg.jobs, cells)
    table = ResultTable()
    for (family, k, m, lam, fold), (trace, tra, tea, itt, status, secs) in zip(meta, outputs):
        run_id = f"{family}" + ("" if k is None else f"_k{_id_num(k)}") + f"_lam{_id_num(lam)}_fold{fold}"
        table.rows.append({"dataset": name, "loss": family, "k": k, "m": m, "lambda": lam,
                           "depth": 1, "iterations": iters, "fold": fold, "seed": cfg.seed,
                           "train_acc": tra, "test_acc": tea, "iters_to_threshold": itt,
                           "status": status})
        table.traces[run_id] = trace
        table.seconds[run_id] = secs
    table.summary_columns, table.summary = summarize(table.rows)
    return table


def summarize(rows, top=3):
    """Mean and std of test accuracy over folds per grid cell; flag the top-k RLO cells."""
    groups = {}
    for r in rows:
        key = (r["dataset"], r["loss"], r["k"], r["m"], r["lambda"])
        groups.setdefault(key, []).append(r)
    out = []
    for key, rs in groups.items():
        accs = [r["test_acc"] for r in rs if r["test_acc"] is not None]
        itts = [r["iters_to_threshold"] for r in rs if r["iters_to_threshold"] is not None]
        out.append({"dataset": key[0], "loss": key[1], "k": key[2], "m": key[3], "lambda": key[4],
                    "folds": len(rs),
                    "mean_test_acc": float(np.mean(accs)) if accs else None,
                    "std_test_acc": float(np.std(accs)) if accs else None,
                    "mean_iters_to_threshold": float(np.mean(itts)) if itts else None,
                    "diverged": sum(r["status"] == optim.DIVERGED for r in rs),
                    "top_k": False})
    for lam in sorted({s["lambda"] for s in out}):
        cand = [s for s in out if s["k"] is not None and s["lambda"] == lam
                and s["mean_test_acc"] is not None]
        cand.sort(key=lambda s: (-s["mean_test_acc"], s["k"]))
        for s in cand[:top]:
            s["top_k"] = True
    cols = ("dataset", "loss", "k", "m", "lambda", "folds", "mean_test_acc", "std_test_acc",
            "mean_iters_to_threshold", "diverged", "top_k")
    return cols, out


# -- train-mlp ---------------------------------------------------------------

def _mlp_cell(cell):
    ds, family, k, m, depth, iters, seed, cfg = cell
    start = time.perf_counter()
    train, test = data_mod.train_test_split(ds, cfg.train_fraction, seed)
    if cfg.standardize:
        (train, test), _ = data_mod.standardize(train, [test])
    ytr, yte = train.class_indices(), test.class_indices()
    spec = LossSpec(family, k=k if k is not None else 3.0, m=m, gamma=cfg.gamma)
    sizes = [ds.d] + [cfg.hidden] * (depth - 1) + [max(ds.n_classes, 2)]
    init = models.init_params(sizes, cfg.init, seed)
    obj = models.MlpObjective(init, train.X, ytr, spec)

    def hook(theta):
        p = init.unflatten(theta)
        return (float(np.mean(models.mlp_predict(p, train.X) == ytr)),
                float(np.mean(models.mlp_predict(p, test.X) == yte)))
    ocfg = optim.OptimizerConfig(cfg.lr, iters, cfg.batch_size, 0.0, seed, cfg.record_every)
    res = optim.run(obj, init.flatten(), ocfg, hook)
    params = init.unflatten(res.params)
    tra, tea = hook(res.params)
    itt = None if res.diverged else optim.iterations_to_threshold(res.trace, cfg.threshold)
    grid = None
    if ds.d == 2 and not res.diverged:
        lo, hi = ds.X.min(axis=0), ds.X.max(axis=0)
        pad = 0.1 * (hi - lo)
        bounds = (lo[0] - pad[0], hi[0] + pad[0], lo[1] - pad[1], hi[1] + pad[1])
        grid = models.decision_grid(params, bounds, cfg.grid_resolution)
    return res.trace, tra, tea, itt, res.status, grid, time.perf_counter() - start


def run_train_mlp(cfg):
    ds = load_dataset(cfg)
    name = dataset_name(cfg, ds)
    if cfg.iters is not None:
        budgets = [(d, cfg.iters) for d in cfg.depths]
    else:
        budgets = list(zip(cfg.depths, cfg.depth_iters))
    for family in cfg.losses:
        if family not in ("ce", "rooted_ce", "focal"):
            raise ConfigError(f"train-mlp supports ce, rooted_ce and focal, not {family!r}")
    cells, meta = [], []
    for depth, iters in sorted(budgets):
        if depth < 1:
            raise ConfigError("depth counts affine layers and must be at least 1")
        for family in cfg.losses:
            ks = tuple(cfg.k) if family == "rooted_ce" else (None,)
            for k in ks:
                m = None if k is None else (k if cfg.m is None else cfg.m)
                for seed in cfg.seeds:
                    cells.append((ds, family, k, m, depth, iters, seed, cfg))
                    meta.append((family, k, m, depth, iters, seed))
    outputs = _run_map(_mlp_cell, cfg.jobs, cells)
    table = ResultTable()
    for (family, k, m, depth, iters, seed), (trace, tra, tea, itt, status, grid, secs) in zip(meta, outputs):
        run_id = f"{family}" + ("" if k is None else f"_k{_id_num(k)}") + f"_depth{depth}_seed{seed}"
        table.rows.append({"dataset": name, "loss": family, "k": k, "m": m, "lambda": 0.0,
                           "depth": depth, "iterations": iters, "fold": None, "seed": seed,
                           "train_acc": tra, "test_acc": tea, "iters_to_threshold": itt,
                           "status": status})
        table.traces[run_id] = trace
        table.seconds[run_id] = secs
        if grid is not None:
            buf = io.StringIO()
            _grid_csv(grid, buf)
            table.extra[f"grid_{run_id}.csv"] = buf.getvalue()
    table.summary_columns, table.summary = _mlp_summary(table.rows)
    return table


def _grid_csv(grid, fh):
    x0, x1, y0, y1 = grid.bounds
    fh.write(f"# bounds={x0!r},{x1!r},{y0!r},{y1!r}\n# resolution={grid.resolution}\nx,y,p1\n")
    for i, yv in enumerate(grid.ys):
        for j, xv in enumerate(grid.xs):
            fh.write(f"{xv!r},{yv!r},{grid.prob[i, j]!r}\n")


def _mlp_summary(rows):
    groups = {}
    for r in rows:
        groups.setdefault((r["dataset"], r["depth"], r["iterations"], r["loss"], r["k"]), []).append(r)
    out = []
    for key, rs in groups.items():
        accs = [r["test_acc"] for r in rs if r["status"] != optim.DIVERGED]
        out.append({"dataset": key[0], "depth": key[1], "iterations": key[2], "loss": key[3],
                    "k": key[4], "seeds": len(rs),
                    "mean_test_acc": float(np.mean(accs)) if accs else None,
                    "std_test_acc": float(np.std(accs)) if accs else None,
                    "median_test_acc": float(np.median(accs)) if accs else None})
    return ("dataset", "depth", "iterations", "loss", "k", "seeds", "mean_test_acc",
            "std_test_acc", "median_test_acc"), out


# -- diagnose ----------------------------------------------------------------

DIAGNOSE_COLUMNS = ("dataset", "task", "k", "lambda", "cond_logistic", "cond_rlo",
                    "frac_ratio_above_one", "frac_sufficient", "status")


def load_weights(path, d):
    if not os.path.exists(path):
        raise ConfigError(f"weights file {path} does not exist")
    if path.endswith(".npy"):
        w = np.load(path)
    else:
        w = np.loadtxt(path, delimiter=",", ndmin=1)
    w = np.asarray(w, dtype=float).ravel()
    if w.size != d:
        raise ConfigError(f"weights have {w.size} entries, the design has {d} columns")
    return w


def run_diagnose(cfg):
    ds = load_dataset(cfg)
    name = dataset_name(cfg, ds)
    tasks = _binary_tasks(ds, allow_ova=cfg.one_vs_all)
    if cfg.standardize:
        tasks = [data_mod.standardize(t)[0][0] for t in tasks]
    table = ResultTable(columns=DIAGNOSE_COLUMNS)
    for ti, task in enumerate(tasks):
        X = models.add_bias_column(task.X) if cfg.fit_intercept else task.X
        w = np.zeros(X.shape[1]) if cfg.weights is None else load_weights(cfg.weights, X.shape[1])
        for lam in cfg.l2_lambda:
            start = time.perf_counter()
            h_lr = calculus.assemble_hessian(w, X, task.y, LossSpec("logistic"), lam)
            cond_lr = calculus.condition_number(h_lr)
            for k in cfg.k:
                m = k if cfg.m is None else cfg.m
                report = calculus.conditioning_report(w, X, task.y, k)
                h = calculus.assemble_hessian(w, X, task.y, LossSpec("rlo", k=k, m=m), lam)
                table.rows.append({"dataset": name, "task": ti, "k": k, "lambda": lam,
                                   "cond_logistic": cond_lr, "cond_rlo": calculus.condition_number(h),
                                   "frac_ratio_above_one": report.fraction_ratio_above_one,
                                   "frac_sufficient": float(np.mean(report.sufficient)),
                                   "status": optim.CONVERGED})
                report_id = f"conditioning_task{ti}_k{_id_num(k)}.csv"
                if report_id not in table.extra:
                    buf = io.StringIO()
                    w_ = csv.writer(buf, lineterminator="\n")
                    w_.writerow(calculus.REPORT_COLUMNS)
                    for i, z, a, b, c, r, s in report.rows():
                        w_.writerow([i, repr(float(z)), repr(float(a)), repr(float(b)),
                                     repr(float(c)), repr(float(r)), "true" if s else "false"])
                    table.extra[report_id] = buf.getvalue()
            table.seconds[f"task{ti}_lam{_id_num(lam)}"] = time.perf_counter() - start
    return table


# -- gan-toy -----------------------------------------------------------------

GAN_COLUMNS = ("loss", "k", "seed", "rounds", "value", "disc_acc_real", "disc_acc_fake",
               "disc_acc", "fake_mean", "fake_cov", "mean_gap", "cov_gap", "status")


def gan_config(cfg, seed, k):
    mean = tuple(float(v) for v in cfg.gan_target_mean)
    std = tuple(float(v) for v in cfg.gan_target_std)
    if len(std) == 1 and len(mean) > 1:
        std = std * len(mean)
    if len(std) != len(mean):
        raise ConfigError("gan_target_std must have one entry or one per dimension")
    cov = tuple(tuple((s * s if i == j else 0.0) for j, s in enumerate(std)) for i in range(len(std)))
    if len(cfg.losses) != 1 or cfg.losses[0] not in ("rooted", "log"):
        raise ConfigError("gan-toy takes a single loss: rooted or log")
    loss = cfg.losses[0]
    try:
        return gan_toy.GanConfig(k=k, disc_hidden=tuple(cfg.gan_disc_hidden),
                                 lr_gen=cfg.gan_lr_gen, lr_disc=cfg.gan_lr_disc,
                                 rounds=cfg.gan_rounds, batch_size=cfg.gan_batch, seed=seed,
                                 target_mean=mean, target_cov=cov, loss=loss)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _gan_cell(cell):
    gcfg, window = cell
    start = time.perf_counter()
    res = gan_toy.alternate_train(gcfg)
    diag = gan_toy.gan_diagnostics(res.trace, gcfg.target_mean, gcfg.target_cov, window)
    return res.trace, diag, time.perf_counter() - start


def run_gan_toy(cfg):
    ks = tuple(cfg.k)
    cells, meta = [], []
    for k in ks:
        for seed in cfg.seeds:
            gcfg = gan_config(cfg, seed, k)
            cells.append((gcfg, cfg.gan_window))
            meta.append((gcfg.loss, k, seed))
    outputs = _run_map(_gan_cell, cfg.jobs, cells)
    table = ResultTable(columns=GAN_COLUMNS)
    for (loss, k, seed), (trace, diag, secs) in zip(meta, outputs):
        run_id = f"gan_{loss}_k{_id_num(k)}_seed{seed}"
        table.rows.append({"loss": loss, "k": k, "seed": seed, "rounds": cfg.gan_rounds,
                           "value": diag["value"], "disc_acc_real": diag["disc_acc_real"],
                           "disc_acc_fake": diag["disc_acc_fake"], "disc_acc": diag["disc_acc"],
                           "fake_mean": " ".join(repr(v) for v in diag["fake_mean"]),
                           "fake_cov": " ".join(repr(v) for row in diag["fake_cov"] for v in row),
                           "mean_gap": diag["mean_gap"], "cov_gap": diag["cov_gap"],
                           "status": diag["status"]})
        table.traces[run_id] = trace
        table.seconds[run_id] = secs
    return table


# -- spiral-gen --------------------------------------------------------------

def run_spiral_gen(cfg):
    ds = data_mod.make_spiral(cfg.spiral_n, cfg.spiral_noise, cfg.seed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for x, lab in zip(ds.X, ds.y):
        w.writerow([repr(float(x[0])), repr(float(x[1])), f"{lab:g}"])
    table = ResultTable(columns=("dataset", "n", "noise", "seed", "n_positive", "n_negative", "status"))
    table.rows.append({"dataset": "spiral", "n": ds.n, "noise": cfg.spiral_noise, "seed": cfg.seed,
                       "n_positive": int(np.sum(ds.y == 1)), "n_negative": int(np.sum(ds.y == -1)),
                       "status": optim.CONVERGED})
    table.extra["spiral.csv"] = buf.getvalue()
    return table


RUNNERS = {
    "regress": run_regress,
    "train-mlp": run_train_mlp,
    "diagnose": run_diagnose,
    "gan-toy": run_gan_toy,
    "spiral-gen": run_spiral_gen,
}


def run_experiment(cfg):
    return RUNNERS[cfg.command](cfg)
