"""Experiment configuration: defaults, ``key = value`` files and flag overrides.

Config files are INI-style; section names only group keys and any key may
appear in any section::

    [data]
    data = data/uci/wine.data

    [grid]
    loss = logistic, rlo
    k = 3-20
    lambda = 0, 1e-3
"""

import configparser
import json
from dataclasses import asdict, dataclass, fields, replace

COMMANDS = ("regress", "train-mlp", "diagnose", "gan-toy", "spiral-gen")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    command: str = "regress"
    # data
    data: str = "spiral"
    name: str = None
    label_column: int = None
    delimiter: str = ","
    header: bool = False
    positive_label: str = None
    standardize: bool = True
    spiral_n: int = 1500
    spiral_noise: float = 0.1
    train_fraction: float = 0.7
    # grid
    loss: tuple = None
    k: tuple = tuple(range(3, 21))
    m: float = None
    gamma: float = 2.0
    l2_lambda: tuple = (0.0, 1e-3)
    # optimizer
    lr: float = 0.01
    iters: int = None
    batch_size: int = None
    fit_intercept: bool = True
    penalize_intercept: bool = False
    record_every: int = 1
    threshold: float = 0.1
    # protocol
    folds: int = 5
    seed: int = 0
    seeds: tuple = (0, 1, 2)
    jobs: int = 1
    out: str = "results"
    # networks
    depths: tuple = (2, 3, 4)
    depth_iters: tuple = (1000, 100, 50)
    hidden: int = 100
    init: str = "uniform"
    grid_resolution: int = 100
    # diagnostics
    weights: str = None
    one_vs_all: bool = False
    # toy GAN
    gan_rounds: int = 2000
    gan_lr_gen: float = 0.05
    gan_lr_disc: float = 0.05
    gan_batch: int = 64
    gan_disc_hidden: tuple = (16,)
    gan_target_mean: tuple = (3.0,)
    gan_target_std: tuple = (1.0,)
    gan_window: int = 20

    def __post_init__(self):
        # canonical element types, so a manifest round trip reproduces the config exactly
        for name, conv in (("k", float), ("l2_lambda", float), ("seeds", int), ("depths", int),
                           ("depth_iters", int), ("gan_disc_hidden", int),
                           ("gan_target_mean", float), ("gan_target_std", float)):
            object.__setattr__(self, name, tuple(conv(v) for v in getattr(self, name)))
        if self.loss is not None:
            object.__setattr__(self, "loss", tuple(self.loss))
        if self.m is not None:
            object.__setattr__(self, "m", float(self.m))
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if not self.k:
            raise ConfigError("k grid is empty")
        if any(k <= 1 for k in self.k):
            raise ConfigError("every k must exceed 1")
        if not self.l2_lambda or any(v < 0 for v in self.l2_lambda):
            raise ConfigError("lambda grid must be nonempty and nonnegative")
        if self.lr <= 0:
            raise ConfigError("learning rate must be positive")
        if self.folds < 2:
            raise ConfigError("need at least two folds")
        if len(self.depths) != len(self.depth_iters):
            raise ConfigError("depths and depth_iters must have equal length")
        if self.iters is not None and self.iters < 0:
            raise ConfigError("iterations must be nonnegative")

    @property
    def losses(self):
        if self.loss is not None:
            return self.loss
        if self.command == "train-mlp":
            return ("ce", "rooted_ce")
        return ("logistic", "rlo")

    def to_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}


# -- value parsing -----------------------------------------------------------

def _parse_bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _parse_number_list(text, conv):
    """Comma list where ``a-b`` expands to an inclusive integer range."""
    if isinstance(text, (list, tuple)):
        return tuple(conv(v) for v in text)
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:] and "e-" not in part.lower():
            lo, hi = part.split("-", 1) if not part.startswith("-") else (part, None)
            if hi is not None:
                out.extend(conv(v) for v in range(int(lo), int(hi) + 1))
                continue
        out.append(conv(part))
    return tuple(out)


def _parse_str_list(text):
    if isinstance(text, (list, tuple)):
        return tuple(str(v) for v in text)
    return tuple(p.strip() for p in str(text).split(",") if p.strip())


def _optional(conv):
    def parse(text):
        if text is None or str(text).strip().lower() in ("", "none", "null"):
            return None
        return conv(text)
    return parse


_PARSERS = {
    "command": str, "data": str, "name": _optional(str), "label_column": _optional(int),
    "delimiter": str, "header": _parse_bool, "positive_label": _optional(str),
    "standardize": _parse_bool, "spiral_n": int, "spiral_noise": float,
    "train_fraction": float, "loss": _optional(_parse_str_list),
    "k": lambda t: _parse_number_list(t, float), "m": _optional(float), "gamma": float,
    "l2_lambda": lambda t: _parse_number_list(t, float), "lr": float,
    "iters": _optional(int), "batch_size": _optional(int), "fit_intercept": _parse_bool,
    "penalize_intercept": _parse_bool, "record_every": int, "threshold": float,
    "folds": int, "seed": int, "seeds": lambda t: _parse_number_list(t, int), "jobs": int,
    "out": str, "depths": lambda t: _parse_number_list(t, int),
    "depth_iters": lambda t: _parse_number_list(t, int), "hidden": int, "init": str,
    "grid_resolution": int, "weights": _optional(str), "one_vs_all": _parse_bool,
    "gan_rounds": int, "gan_lr_gen": float, "gan_lr_disc": float, "gan_batch": int,
    "gan_disc_hidden": lambda t: _parse_number_list(t, int),
    "gan_target_mean": lambda t: _parse_number_list(t, float),
    "gan_target_std": lambda t: _parse_number_list(t, float), "gan_window": int,
}

_ALIASES = {"lambda": "l2_lambda", "iterations": "iters", "learning_rate": "lr"}

FIELD_NAMES = tuple(f.name for f in fields(ExperimentConfig))


def parse_values(raw):
    """Convert a ``{key: text}`` mapping into typed config values."""
    out = {}
    for key, value in raw.items():
        key = _ALIASES.get(key.replace("-", "_"), key.replace("-", "_"))
        if key not in _PARSERS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            out[key] = _PARSERS[key](value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from None
    return out


def read_config_file(path):
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not text.lstrip().startswith("["):
        text = "[experiment]\n" + text
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    raw = {}
    for section in parser.sections():
        raw.update(parser[section])
    return parse_values(raw)


def read_manifest(path):
    try:
        with open(path) as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc}") from None
    if "config" not in manifest:
        raise ConfigError(f"{path} has no config block")
    return parse_values(manifest["config"])


# per-command defaults that differ from the regression protocol
COMMAND_DEFAULTS = {
    "train-mlp": {"k": (3.0,), "record_every": 10, "standardize": False},
    "gan-toy": {"k": (3.0,), "loss": ("rooted",)},
    "diagnose": {"l2_lambda": (0.0, 1.0)},
}


def build_config(command, file_values=None, overrides=None):
    """Layer command defaults, then config-file values, then explicit flags."""
    values = dict(COMMAND_DEFAULTS.get(command, {}))
    values.update(file_values or {})
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    values["command"] = command
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def with_out(cfg, out):
    return replace(cfg, out=out)
