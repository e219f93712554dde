"""AUC metric, stratified folds, grid search and the repeated-CV protocol."""
from __future__ import annotations

import csv
import itertools
import math
import os
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .data import Dataset, fit_scaling, scale_features, shuffled_stream
from .kernel import GaussianKernel, KernelAUC
from .linear import MomentAUC, PassiveAggressive, Perceptron
from .schedules import ConstantStep, InverseTimeStep

ALGORITHMS = ("oauc-s", "oauc-m", "oauc-m-const", "okauc-s", "okauc-m", "perceptron", "pa1")
# hyperparameters searched per algorithm, in tie-break order
GRID_PARAMS = {
    "oauc-m": ("lam",),
    "oauc-m-const": ("lam", "eta"),
    "oauc-s": ("lam", "eta"),
    "okauc-m": ("lam", "width"),
    "okauc-s": ("lam", "eta", "width"),
    "pa1": ("C",),
    "perceptron": (),
}
TIE_ORDER = ("lam", "eta", "width", "C")
KERNEL_TRAIN_CAP = 10_000


@dataclass(frozen=True)
class AucResult:
    value: float
    positives: int
    negatives: int


def auc(scores, labels, strict_ties: bool = False) -> AucResult:
    """Fraction of (positive, negative) pairs ranked correctly; ties score 1/2.

    ``strict_ties`` counts ties as 0 instead.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be 1-d of equal length")
    pos, neg = s[y == 1], np.sort(s[y == -1])
    if pos.size == 0 or neg.size == 0:
        raise ValueError("AUC needs at least one positive and one negative")
    if pos.size + neg.size != s.size:
        raise ValueError("labels must be +1 or -1")
    below = np.searchsorted(neg, pos, side="left")
    wins = float(below.sum())
    if not strict_ties:
        ties = np.searchsorted(neg, pos, side="right") - below
        wins += 0.5 * float(ties.sum())
    return AucResult(wins / (pos.size * neg.size), int(pos.size), int(neg.size))


def stratified_kfold(y, k: int, rng_seed: int):
    """Per-class shuffled round-robin assignment to k folds."""
    y = np.asarray(y)
    if k < 2:
        raise ValueError("need k >= 2")
    rng = np.random.default_rng(rng_seed)
    fold_of = np.empty(y.shape[0], dtype=int)
    offset = 0
    for c in (1, -1):
        idx = np.flatnonzero(y == c)
        if idx.size < k:
            raise ValueError(f"class {c:+d} has {idx.size} members, fewer than k={k}")
        idx = rng.permutation(idx)
        # rotating the start keeps fold sizes balanced across classes
        fold_of[idx] = (np.arange(idx.size) + offset) % k
        offset = (offset + idx.size) % k
    allidx = np.arange(y.shape[0])
    return [(allidx[fold_of != f], allidx[fold_of == f]) for f in range(k)]


def power_grid(subsample: bool = False, lo: int = -10, hi: int = 10) -> list[float]:
    step = 2 if subsample else 1
    return [2.0 ** e for e in range(lo, hi + 1, step)]


def default_grids(algorithm: str, subsample: bool = False) -> dict:
    return {p: power_grid(subsample) for p in GRID_PARAMS[algorithm]}


def make_learner(algorithm: str, dim: int, params: dict):
    p = dict(params)
    lam = p.get("lam")
    if algorithm == "oauc-m":
        return MomentAUC(dim, "hinge", lam, InverseTimeStep(lam), p.get("strict_paper_init", False))
    if algorithm == "oauc-m-const":
        return MomentAUC(dim, "hinge", lam, ConstantStep(p["eta"]), p.get("strict_paper_init", False))
    if algorithm == "oauc-s":
        return MomentAUC(dim, "square", lam, ConstantStep(p["eta"]), p.get("strict_paper_init", False))
    if algorithm in ("okauc-m", "okauc-s"):
        kind = "hinge" if algorithm == "okauc-m" else "square"
        sched = InverseTimeStep(lam) if kind == "hinge" else ConstantStep(p["eta"])
        return KernelAUC(dim, GaussianKernel(p["width"]), kind, lam, p.get("budget", 100), sched,
                         p.get("eviction_rule", "residual"), p.get("budget_neg", -1))
    if algorithm == "perceptron":
        return Perceptron(dim)
    if algorithm == "pa1":
        return PassiveAggressive(dim, p["C"])
    raise ValueError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}")


def train_and_score(algorithm: str, params: dict, train: Dataset, test: Dataset, stream_seed: int,
                    strict_ties: bool = False) -> float:
    """One shuffled pass over ``train``; AUC on ``test``. NaN if the learner diverges."""
    model = make_learner(algorithm, train.dim, params)
    stream = shuffled_stream(train, stream_seed)
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            model.fit(stream.X, stream.y)
            scores = model.decision_function(test.X)
    except (FloatingPointError, OverflowError):
        return math.nan
    if not np.all(np.isfinite(scores)):
        return math.nan
    return auc(scores, test.y, strict_ties).value


def _candidates(algorithm: str, grids: dict):
    names = [n for n in TIE_ORDER if n in grids]
    for combo in itertools.product(*(grids[n] for n in names)):
        yield dict(zip(names, combo))


def grid_search_cv(train: Dataset, algorithm: str, grids: dict | None = None, k: int = 5,
                   rng_seed: int = 0, fixed: dict | None = None, strict_ties: bool = False,
                   threads: int = 1) -> dict:
    """Best hyperparameters by mean validation AUC over k stratified folds.

    Ties go to smaller lam, then eta, then width, then grid order. Candidates
    whose runs diverge are dropped.
    """
    grids = default_grids(algorithm) if grids is None else grids
    if any(len(v) == 0 for v in grids.values()):
        raise ValueError("grids must be nonempty")
    fixed = fixed or {}
    cands = list(_candidates(algorithm, grids))
    folds = stratified_kfold(train.y, k, rng_seed)

    def score(c):
        params = {**fixed, **c}
        vals = [train_and_score(algorithm, params, train.subset(tr), train.subset(te),
                                rng_seed * 7919 + f, strict_ties)
                for f, (tr, te) in enumerate(folds)]
        return float(np.mean(vals))

    means = Parallel(n_jobs=threads)(delayed(score)(c) for c in cands) if threads > 1 \
        else [score(c) for c in cands]
    best = None
    for order, (c, m) in enumerate(zip(cands, means)):
        if math.isnan(m):
            continue
        key = (-m, *(c.get(n, 0.0) for n in TIE_ORDER), order)
        if best is None or key < best[0]:
            best = (key, c)
    if best is None:
        raise ValueError("every grid candidate failed on every fold")
    return {**fixed, **best[1]}


@dataclass
class RunRecord:
    seed: int
    fold: int
    params: dict
    auc: float
    seconds: float


@dataclass
class ExperimentReport:
    runs: list
    config: dict = field(default_factory=dict)
    mean: float = math.nan
    stddev: float = math.nan

    def __post_init__(self):
        vals = np.array([r.auc for r in self.runs], dtype=np.float64)
        if vals.size:
            self.mean = float(vals.mean())
            self.stddev = float(vals.std(ddof=1)) if vals.size > 1 else 0.0

    COLUMNS = ("row", "seed", "fold", "lam", "eta", "width", "C", "auc", "stddev", "seconds")

    def rows(self) -> list[list[str]]:
        out = []
        for r in self.runs:
            hp = [_num(r.params.get(n)) for n in TIE_ORDER]
            out.append(["run", str(r.seed), str(r.fold), *hp, _num(r.auc), "", f"{r.seconds:.3f}"])
        total = sum(r.seconds for r in self.runs)
        out.append(["summary", "", "", "", "", "", "", _num(self.mean), _num(self.stddev), f"{total:.3f}"])
        return out

    def write_csv(self, path) -> None:
        write_csv_atomic(path, self.COLUMNS, self.rows())


def _num(v) -> str:
    return "" if v is None else repr(float(v))


def write_csv_atomic(path, header, rows) -> None:
    """Write to a temp file in the target directory, then rename over ``path``."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".csv")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


@dataclass
class ExperimentConfig:
    seeds: tuple = (0, 1, 2, 3)
    folds: int = 5
    inner_folds: int = 5
    subsample_grid: bool = True
    grids: dict | None = None
    fixed: dict = field(default_factory=dict)
    scale_scope: str = "global"
    strict_ties: bool = False
    threads: int = 1


def _one_run(ds: Dataset, algorithm: str, cfg: ExperimentConfig, seed: int, fold: int, tr, te):
    t0 = time.perf_counter()
    train, test = ds.subset(tr), ds.subset(te)
    if cfg.scale_scope == "train_only":
        params = fit_scaling(train.X)
        train, _ = scale_features(train, params)
        test, _ = scale_features(test, params)
    if algorithm.startswith("okauc") and len(train) > KERNEL_TRAIN_CAP:
        pick = np.random.default_rng(seed * 1000 + fold).choice(len(train), KERNEL_TRAIN_CAP, replace=False)
        train = train.subset(np.sort(pick))
    grids = cfg.grids if cfg.grids is not None else default_grids(algorithm, cfg.subsample_grid)
    inner_seed = seed * 1000 + fold
    params = grid_search_cv(train, algorithm, grids, cfg.inner_folds, inner_seed, cfg.fixed, cfg.strict_ties)
    value = train_and_score(algorithm, params, train, test, inner_seed + 500, cfg.strict_ties)
    return RunRecord(seed, fold, params, value, time.perf_counter() - t0)


def run_experiment(ds: Dataset, algorithm: str, cfg: ExperimentConfig | None = None) -> ExperimentReport:
    """Repeated stratified CV: for each seed, k outer folds with inner grid search."""
    cfg = cfg or ExperimentConfig()
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    if cfg.scale_scope not in ("global", "train_only"):
        raise ValueError("scale_scope must be 'global' or 'train_only'")
    if cfg.scale_scope == "global":
        ds, _ = scale_features(ds)
    jobs = [(seed, f, tr, te) for seed in cfg.seeds
            for f, (tr, te) in enumerate(stratified_kfold(ds.y, cfg.folds, seed))]
    if cfg.threads > 1:
        runs = Parallel(n_jobs=cfg.threads)(
            delayed(_one_run)(ds, algorithm, cfg, s, f, tr, te) for s, f, tr, te in jobs)
    else:
        runs = [_one_run(ds, algorithm, cfg, s, f, tr, te) for s, f, tr, te in jobs]
    config = {"algorithm": algorithm, "dataset": ds.name, "seeds": list(cfg.seeds), "folds": cfg.folds,
              "inner_folds": cfg.inner_folds, "subsample_grid": cfg.subsample_grid,
              "scale_scope": cfg.scale_scope, "strict_ties": cfg.strict_ties, "fixed": dict(cfg.fixed)}
    return ExperimentReport(list(runs), config)
