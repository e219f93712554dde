"""LIBSVM parsing, label binarisation, feature scaling and streams."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DATA_ENV = "MOMENTAUC_DATA"

# name -> (instances, features, imbalance ratio)
KNOWN_DATASETS = {
    "splice": (1000, 60, 1.07),
    "australian": (690, 14, 1.25),
    "heart": (270, 13, 1.25),
    "svmguide1": (7089, 4, 1.29),
    "ionosphere": (351, 34, 1.79),
    "fourclass": (862, 2, 1.81),
    "magic04": (19020, 10, 1.84),
    "diabetes": (768, 8, 1.87),
    "german": (1000, 24, 2.33),
    "vehicle": (846, 18, 2.90),
    "svmguide3": (1284, 21, 3.34),
    "segment": (2310, 19, 6.00),
    "svmguide2": (391, 20, 6.38),
    "satimage": (6435, 36, 9.28),
    "vowel": (990, 10, 10.00),
    "letter": (15000, 16, 26.88),
    "shuttle": (43500, 9, 44.89),
    "poker": (25010, 10, 47.75),
}


class ParseError(ValueError):
    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


@dataclass(frozen=True)
class LabeledInstance:
    x: np.ndarray
    y: int

    def __post_init__(self):
        if self.y not in (1, -1):
            raise ValueError(f"label must be +1 or -1, got {self.y!r}")
        if not np.all(np.isfinite(self.x)):
            raise ValueError("features must be finite")


@dataclass
class RawDataset:
    """Dense features with labels exactly as read."""

    X: np.ndarray
    labels: np.ndarray


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    name: str = ""

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=int)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X must be n x p with one label per row")
        if not np.all(np.isin(self.y, (-1, 1))):
            raise ValueError("labels must be +1 or -1")

    def __len__(self) -> int:
        return self.y.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def n_pos(self) -> int:
        return int(np.count_nonzero(self.y == 1))

    @property
    def n_neg(self) -> int:
        return int(np.count_nonzero(self.y == -1))

    @property
    def imbalance_ratio(self) -> float:
        return self.n_neg / self.n_pos if self.n_pos else math.inf

    def instances(self) -> list[LabeledInstance]:
        return [LabeledInstance(x, int(y)) for x, y in zip(self.X, self.y)]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx], self.name)


def _number(tok: str, lineno: int, what: str) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(lineno, f"non-numeric {what} {tok!r}") from None
    if not math.isfinite(v):
        raise ParseError(lineno, f"non-finite {what} {tok!r}")
    return v


def parse_libsvm(data, dimension_hint: int | None = None) -> RawDataset:
    """Parse ``<label> <index>:<value> ...`` lines into a dense matrix."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    labels, rows = [], []
    width = 0
    for lineno, line in enumerate(data.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        labels.append(_number(toks[0], lineno, "label"))
        feats = {}
        last = 0
        for tok in toks[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise ParseError(lineno, f"expected index:value, got {tok!r}")
            try:
                idx = int(idx_s)
            except ValueError:
                raise ParseError(lineno, f"non-integer index {idx_s!r}") from None
            if idx < 1:
                raise ParseError(lineno, f"index {idx} < 1")
            if idx <= last:
                raise ParseError(lineno, f"index {idx} does not increase")
            last = idx
            feats[idx] = _number(val_s, lineno, "value")
        width = max(width, last)
        rows.append(feats)
    if dimension_hint is not None:
        width = max(width, dimension_hint)
    X = np.zeros((len(rows), width))
    for r, feats in enumerate(rows):
        for idx, v in feats.items():
            X[r, idx - 1] = v
    return RawDataset(X, np.asarray(labels, dtype=np.float64))


def _fmt(v: float) -> str:
    return repr(float(v)) if v != int(v) else str(int(v))


def serialize_libsvm(X, labels) -> str:
    """Sparse LIBSVM text; zero entries are omitted."""
    out = []
    for x, y in zip(np.asarray(X, dtype=np.float64), labels):
        parts = [_fmt(y) if float(y) != 1 else "+1"]
        parts += [f"{j + 1}:{repr(float(v))}" for j, v in enumerate(x) if v != 0]
        out.append(" ".join(parts))
    return "\n".join(out) + ("\n" if out else "")


def binarize(raw: RawDataset, positive="auto", group=None, name: str = "") -> Dataset:
    """Map raw labels to +1/-1.

    ``positive`` is an explicit collection of raw labels, or "auto" for the
    minority side of a binary split. The split is the two labels of a binary
    dataset, or ``group`` against the rest for multiclass data.
    """
    labels = raw.labels
    values, counts = np.unique(labels, return_counts=True)
    if values.size < 2:
        raise ValueError("need at least two distinct labels")
    if isinstance(positive, str):
        if positive != "auto":
            raise ValueError(f"positive must be 'auto' or a label set, got {positive!r}")
        if group is not None:
            side = np.isin(labels, list(group))
            pos = side if side.sum() <= (~side).sum() else ~side
        elif values.size == 2:
            # minority label; ties go to the larger label value
            pos = labels == (values[0] if counts[0] < counts[1] else values[1])
        else:
            raise ValueError("multiclass data needs a configured grouping for auto-minority")
    else:
        pos = np.isin(labels, list(positive))
    y = np.where(pos, 1, -1)
    if pos.all() or not pos.any():
        raise ValueError("binarisation produced a single class")
    return Dataset(raw.X.copy(), y, name)


@dataclass(frozen=True)
class ScaleParams:
    lo: np.ndarray
    hi: np.ndarray

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        span = self.hi - self.lo
        out = np.zeros_like(X)
        ok = span > 0
        out[:, ok] = 2.0 * (X[:, ok] - self.lo[ok]) / span[ok] - 1.0
        return out


def fit_scaling(X) -> ScaleParams:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        raise ValueError("cannot scale an empty dataset")
    return ScaleParams(X.min(axis=0), X.max(axis=0))


def scale_features(d: Dataset, params: ScaleParams | None = None):
    """Affine map of each column to [-1, 1]; constant columns become 0.

    With ``params`` from another split (e.g. training folds) the map is reused
    and values outside that range may leave [-1, 1].
    """
    params = fit_scaling(d.X) if params is None else params
    return Dataset(params.apply(d.X), d.y.copy(), d.name), params


def shuffled_stream(d: Dataset, rng_seed: int) -> Dataset:
    perm = np.random.default_rng(rng_seed).permutation(len(d))
    return d.subset(perm)


@dataclass
class DatasetConfig:
    path: str
    positive: object = "auto"
    group: list | None = None
    dimension_hint: int | None = None
    name: str = ""

    def resolve(self) -> Path:
        p = Path(os.path.expanduser(self.path))
        if not p.is_absolute():
            p = Path(os.environ.get(DATA_ENV, ".")) / p
        return p


def load_dataset(cfg: DatasetConfig, scale: bool = True) -> Dataset:
    raw = parse_libsvm(cfg.resolve().read_bytes(), cfg.dimension_hint)
    ds = binarize(raw, cfg.positive, cfg.group, cfg.name or Path(cfg.path).stem)
    return scale_features(ds)[0] if scale else ds


def find_dataset(name: str, root: str | None = None) -> Path | None:
    """Look for ``name`` (optionally with a LIBSVM-style suffix) under the data root."""
    root = Path(root or os.environ.get(DATA_ENV, "data"))
    for cand in (name, f"{name}.txt", f"{name}.libsvm", f"{name}_scale", f"{name}.scale"):
        p = root / cand
        if p.is_file():
            return p
    return None


# synthetic streams -------------------------------------------------------

def gaussian_stream(T: int, dim: int, rng_seed: int, pos_frac: float = 0.3,
                    shift: float = 0.5) -> Dataset:
    """Two Gaussian classes offset by +-shift/2 along every axis, projected into the unit ball."""
    rng = np.random.default_rng(rng_seed)
    y = np.where(rng.random(T) < pos_frac, 1, -1)
    X = rng.standard_normal((T, dim)) / math.sqrt(dim) + 0.5 * shift * y[:, None]
    X /= np.maximum(1.0, np.linalg.norm(X, axis=1))[:, None]
    return Dataset(X, y, "gaussian")


def moons_stream(T: int, rng_seed: int, noise: float = 0.1, pos_frac: float = 0.5,
                 span: float = 1.25 * math.pi) -> Dataset:
    """Two interleaving arcs with Gaussian jitter, labels +-1.

    ``span`` is the angular length of each arc; values above pi curl the arcs
    into each other so that no direction ranks the classes well.
    """
    rng = np.random.default_rng(rng_seed)
    y = np.where(rng.random(T) < pos_frac, 1, -1)
    theta = rng.uniform(0, span, T) - 0.5 * (span - math.pi)
    X = np.where((y == 1)[:, None],
                 np.c_[np.cos(theta), np.sin(theta)],
                 np.c_[1 - np.cos(theta), 0.5 - np.sin(theta)])
    X = X + noise * rng.standard_normal((T, 2))
    return Dataset(X, y, "moons")
