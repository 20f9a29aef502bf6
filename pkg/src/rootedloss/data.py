"""Datasets: spiral synthesis, delimited-file ingestion, standardization and splits.

Every randomized routine draws from ``numpy.random.default_rng(seed)``
(PCG64), so results are pure functions of their inputs and the seed.
"""

import csv
from dataclasses import dataclass, field, replace

import numpy as np

BINARY = "binary"
MULTICLASS = "multiclass"


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus labels.

    Binary datasets carry labels in {+1, -1}; multiclass datasets carry
    class indices 0..c-1 with the original names in ``classes``.
    """

    X: np.ndarray
    y: np.ndarray
    kind: str = BINARY
    name: str = "data"
    classes: tuple = ()
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2 or X.shape[0] < 1:
            raise ValueError(f"features must be an n x d matrix with n >= 1, got {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain NaN or infinite values")
        y = np.asarray(self.y)
        if y.shape != (X.shape[0],):
            raise ValueError(f"{X.shape[0]} rows but labels of shape {y.shape}")
        if self.kind == BINARY:
            y = y.astype(float)
            if not np.all((y == 1) | (y == -1)):
                raise ValueError("binary labels must be +1 or -1")
        elif self.kind == MULTICLASS:
            y = y.astype(np.int64)
            if np.any(y < 0) or (self.classes and np.any(y >= len(self.classes))):
                raise ValueError("class index out of range")
        else:
            raise ValueError(f"unknown label kind {self.kind!r}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    @property
    def n_classes(self):
        if self.kind == BINARY:
            return 2
        return len(self.classes) if self.classes else int(self.y.max()) + 1

    def subset(self, idx, name=None):
        idx = np.asarray(idx, dtype=np.int64)
        return replace(self, X=self.X[idx], y=self.y[idx], name=name or self.name)

    def class_indices(self):
        """Labels as class indices; binary +1 maps to 0 and -1 to 1."""
        if self.kind == BINARY:
            return ((1 - self.y) // 2).astype(np.int64)
        return self.y


@dataclass(frozen=True)
class FoldPlan:
    n_folds: int
    train: tuple
    validation: tuple


# -- synthesis ---------------------------------------------------------------

def make_spiral(n=1500, noise=0.1, seed=0):
    """Two interleaved spiral arms, n/2 points each.

    Arm s at parameter t in [0, 3 pi] sits at r(t) (cos(t + s pi), sin(t + s pi))
    with r(t) = t / (3 pi); isotropic Gaussian noise of scale ``noise`` is added.
    Arm 0 is labelled +1 and arm 1 is labelled -1.
    """
    if n % 2:
        raise ValueError(f"spiral size must be even, got {n}")
    if noise < 0:
        raise ValueError("noise must be nonnegative")
    rng = np.random.default_rng(seed)
    half = n // 2
    arms, labels = [], []
    for s, label in ((0, 1.0), (1, -1.0)):
        t = rng.uniform(0.0, 3.0 * np.pi, size=half)
        r = t / (3.0 * np.pi)
        pts = np.column_stack([r * np.cos(t + s * np.pi), r * np.sin(t + s * np.pi)])
        pts += noise * rng.standard_normal(pts.shape)
        arms.append(pts)
        labels.append(np.full(half, label))
    return Dataset(np.vstack(arms), np.concatenate(labels), BINARY, "spiral",
                   classes=("1", "-1"),
                   provenance={"source": "make_spiral", "n": n, "noise": noise, "seed": seed})


def make_madelon(n=4400, seed=0):
    """Madelon-style data from the generator that originally produced it.

    Five informative features on hypercube-vertex clusters (16 per class),
    fifteen linear combinations of them and 480 noise probes; 1% of labels
    flipped. Used when the UCI Madelon files are unavailable.
    """
    from sklearn.datasets import make_classification

    X, y = make_classification(
        n_samples=n, n_features=500, n_informative=5, n_redundant=15, n_repeated=0,
        n_classes=2, n_clusters_per_class=16, flip_y=0.01, hypercube=True,
        shuffle=True, random_state=seed,
    )
    return Dataset(X, np.where(y == 1, 1.0, -1.0), BINARY, "madelon",
                   classes=("1", "0"),
                   provenance={"source": "sklearn.datasets.make_classification (Madelon generator)",
                               "n": n, "seed": seed})


# -- splitting ---------------------------------------------------------------

def train_test_split(data, train_fraction=0.7, seed=0):
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    n_train = int(np.floor(train_fraction * data.n))
    if n_train == 0 or n_train == data.n:
        raise ValueError(f"fraction {train_fraction} leaves one side empty for n={data.n}")
    perm = np.random.default_rng(seed).permutation(data.n)
    return data.subset(perm[:n_train]), data.subset(perm[n_train:])


def kfold(n, n_folds=5, seed=0):
    """Shuffle 0..n-1 and deal it into folds whose sizes differ by at most one."""
    if n_folds < 2:
        raise ValueError("need at least two folds")
    if n_folds > n:
        raise ValueError(f"cannot make {n_folds} folds from {n} samples")
    perm = np.random.default_rng(seed).permutation(n)
    validation = tuple(np.sort(part) for part in np.array_split(perm, n_folds))
    all_idx = np.arange(n)
    train = tuple(np.setdiff1d(all_idx, v, assume_unique=True) for v in validation)
    return FoldPlan(n_folds, train, validation)


def one_vs_all(data):
    """One binary problem per class: class j becomes +1, the rest -1."""
    if data.kind != MULTICLASS or data.n_classes < 3:
        raise ValueError("one-vs-all needs a multiclass dataset with at least three classes")
    out = []
    for j in range(data.n_classes):
        name = data.classes[j] if data.classes else str(j)
        out.append(Dataset(data.X, np.where(data.y == j, 1.0, -1.0), BINARY,
                           f"{data.name}[{name} vs rest]", classes=(str(name), "rest"),
                           provenance={**data.provenance, "one_vs_all_class": j}))
    return out


# -- standardization ---------------------------------------------------------

@dataclass(frozen=True)
class Standardization:
    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray

    def apply(self, X):
        X = np.asarray(X, dtype=float)
        out = (X - self.mean) / self.std
        out[:, self.constant] = X[:, self.constant]
        return out


def fit_standardization(X):
    X = np.asarray(X, dtype=float)
    if X.shape[0] == 0:
        raise ValueError("cannot standardize an empty training set")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    constant = std == 0
    std = np.where(constant, 1.0, std)
    return Standardization(mean, std, constant)


def standardize(train, others=()):
    """Scale columns with train-only statistics; constant columns pass through.

    Returns ``([train, *others] transformed, Standardization)``.
    """
    stats = fit_standardization(train.X)
    out = [replace(ds, X=stats.apply(ds.X)) for ds in (train, *others)]
    return out, stats


# -- delimited files ---------------------------------------------------------

class ParseError(ValueError):
    pass


@dataclass(frozen=True)
class Schema:
    label_column: int = -1
    delimiter: str = ","
    header: bool = False
    positive_label: str = None


UCI_SCHEMAS = {
    "wine": Schema(label_column=0),
    "ionosphere": Schema(label_column=-1, positive_label="g"),
    "spectf": Schema(label_column=0, positive_label="1"),
    "madelon": Schema(label_column=-1),
}


def load_delimited(path, schema=Schema(), name=None):
    """Read a delimited table; every non-label field must be numeric.

    Class names are mapped to indices in order of first appearance. Two-class
    files become binary datasets with the first-seen (or ``positive_label``)
    class as +1.
    """
    rows, labels = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        width = None
        for lineno, raw in enumerate(reader, start=1):
            if lineno == 1 and schema.header:
                continue
            if not raw or all(not f.strip() for f in raw):
                continue
            if width is None:
                width = len(raw)
                col = schema.label_column % width if -width <= schema.label_column < width else None
                if col is None:
                    raise ParseError(f"{path}: label column {schema.label_column} missing (line {lineno} has {width} fields)")
            elif len(raw) != width:
                raise ParseError(f"{path}: line {lineno} has {len(raw)} fields, expected {width}")
            feats = []
            for j, field_ in enumerate(raw):
                if j == col:
                    continue
                try:
                    feats.append(float(field_))
                except ValueError:
                    raise ParseError(f"{path}: line {lineno}, column {j}: cannot parse {field_!r}") from None
            rows.append(feats)
            labels.append(raw[col].strip())
    if not rows:
        raise ParseError(f"{path}: no data rows")
    order = list(dict.fromkeys(labels))
    if schema.positive_label is not None and len(order) == 2:
        if schema.positive_label not in order:
            raise ParseError(f"{path}: positive label {schema.positive_label!r} not present")
        order.sort(key=lambda c: c != schema.positive_label)
    index = {c: i for i, c in enumerate(order)}
    cls = np.array([index[c] for c in labels])
    prov = {"source": str(path), "label_column": schema.label_column,
            "delimiter": schema.delimiter, "label_map": index}
    X = np.array(rows, dtype=float)
    name = name or str(path).rsplit("/", 1)[-1].split(".")[0]
    if len(order) == 2:
        return Dataset(X, np.where(cls == 0, 1.0, -1.0), BINARY, name, tuple(order), prov)
    return Dataset(X, cls, MULTICLASS, name, tuple(order), prov)


def save_delimited(data, path, delimiter=",", header=False):
    """Write features followed by the label name in the last column."""
    if data.classes:
        names = [data.classes[i] for i in data.class_indices()]
    else:
        names = [f"{v:g}" for v in data.y]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        if header:
            writer.writerow([f"x{j}" for j in range(data.d)] + ["label"])
        for x, lab in zip(data.X, names):
            writer.writerow([repr(float(v)) for v in x] + [lab])
