"""Command line: train, experiment, regret, verify."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, PositiveFloat, PositiveInt, ValidationError, model_validator

from .data import (DATA_ENV, Dataset, DatasetConfig, find_dataset, gaussian_stream, load_dataset,
                   moons_stream, scale_features, shuffled_stream)
from .evaluation import (GRID_PARAMS, ExperimentConfig, auc, default_grids, make_learner,
                         run_experiment, write_csv_atomic)
from .regret import (HindsightProblem, _curve, kernel_features, kernel_regret_bound,
                     linear_regret_bound)

log = logging.getLogger("momentauc")

Algorithm = Literal["oauc-s", "oauc-m", "oauc-m-const", "okauc-s", "okauc-m", "perceptron", "pa1"]
REQUIRED = {
    "oauc-m": ("lam",),
    "oauc-m-const": ("lam", "eta"),
    "oauc-s": ("lam", "eta"),
    "okauc-m": ("lam", "width"),
    "okauc-s": ("lam", "eta", "width"),
    "pa1": ("C",),
    "perceptron": (),
}


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DatasetSpec(Strict):
    name: Optional[str] = None
    path: Optional[str] = None
    positive: Union[Literal["auto"], list[float]] = "auto"
    group: Optional[list[float]] = None
    dimension_hint: Optional[PositiveInt] = None
    synthetic: Optional[Literal["gaussian", "moons"]] = None
    size: PositiveInt = 1000
    dim: PositiveInt = 5

    @model_validator(mode="after")
    def _one_source(self):
        if (self.synthetic is None) == (self.path is None and self.name is None):
            raise ValueError("give either a file (path or name) or a synthetic generator")
        return self


class Params(Strict):
    lam: Optional[PositiveFloat] = None
    eta: Optional[PositiveFloat] = None
    width: Optional[PositiveFloat] = None
    C: Optional[PositiveFloat] = None
    budget: Union[PositiveInt, Literal["inf"]] = 100
    budget_neg: Union[PositiveInt, Literal["inf"], None] = None


class Flags(Strict):
    strict_paper_init: bool = False
    eviction_rule: Literal["residual", "paper_literal"] = "residual"
    strict_ties: bool = False
    scale_scope: Literal["global", "train_only"] = "global"


class GridSpec(Strict):
    subsample: bool = True
    lam: Optional[list[PositiveFloat]] = None
    eta: Optional[list[PositiveFloat]] = None
    width: Optional[list[PositiveFloat]] = None
    C: Optional[list[PositiveFloat]] = None


class RunConfig(Strict):
    algorithm: Algorithm
    dataset: DatasetSpec
    params: Params = Params()
    flags: Flags = Flags()
    seeds: list[int] = [0, 1, 2, 3]
    folds: PositiveInt = 5
    inner_folds: PositiveInt = 5
    grid: GridSpec = GridSpec()
    test_fraction: float = 0.2
    horizon: Optional[PositiveInt] = None
    every: PositiveInt = 1


class ConfigError(ValueError):
    pass


def load_config(path) -> RunConfig:
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    return parse_config(raw)


def parse_config(raw) -> RunConfig:
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        msgs = [f"{'.'.join(str(p) for p in e['loc'])}: {e['msg']}" for e in exc.errors()]
        raise ConfigError("invalid config\n  " + "\n  ".join(msgs)) from None


def require_params(cfg: RunConfig) -> None:
    missing = [f"params.{k}" for k in REQUIRED[cfg.algorithm] if getattr(cfg.params, k) is None]
    if missing:
        raise ConfigError("invalid config\n  " + "\n  ".join(
            f"{m}: required for algorithm {cfg.algorithm}" for m in missing))


def _budget(v):
    return None if v == "inf" else v


def learner_params(cfg: RunConfig) -> dict:
    p = {k: v for k, v in cfg.params.model_dump().items() if v is not None and k not in ("budget", "budget_neg")}
    p["budget"] = _budget(cfg.params.budget)
    p["budget_neg"] = -1 if cfg.params.budget_neg is None else _budget(cfg.params.budget_neg)
    p["strict_paper_init"] = cfg.flags.strict_paper_init
    p["eviction_rule"] = cfg.flags.eviction_rule
    return p


def load_data(spec: DatasetSpec, seed: int, scale: bool = True) -> Dataset:
    if spec.synthetic == "gaussian":
        return gaussian_stream(spec.size, spec.dim, seed)
    if spec.synthetic == "moons":
        return moons_stream(spec.size, seed)
    path = spec.path
    if path is None:
        found = find_dataset(spec.name)
        if found is None:
            raise FileNotFoundError(f"dataset {spec.name!r} not found under ${DATA_ENV} "
                                    f"({os.environ.get(DATA_ENV, 'data')})")
        path = str(found)
    cfg = DatasetConfig(path, spec.positive, spec.group, spec.dimension_hint, spec.name or "")
    return load_dataset(cfg, scale=scale)


def _split(ds: Dataset, frac: float, seed: int):
    rng = np.random.default_rng(seed)
    test = []
    for c in (1, -1):
        idx = rng.permutation(np.flatnonzero(ds.y == c))
        test.extend(idx[: max(1, int(round(frac * idx.size)))])
    mask = np.zeros(len(ds), bool)
    mask[test] = True
    return ds.subset(np.flatnonzero(~mask)), ds.subset(np.flatnonzero(mask))


def cmd_train(cfg: RunConfig, seed: int, out: str) -> int:
    require_params(cfg)
    ds = load_data(cfg.dataset, seed, scale=cfg.flags.scale_scope == "global")
    train, test = _split(ds, cfg.test_fraction, seed)
    if cfg.flags.scale_scope == "train_only":
        train, params = scale_features(train)
        test, _ = scale_features(test, params)
    model = make_learner(cfg.algorithm, ds.dim, learner_params(cfg))
    stream = shuffled_stream(train, seed)
    losses = model.fit(stream.X, stream.y)
    rounds = sum(l is not None for l in losses)
    tr = auc(model.decision_function(train.X), train.y, cfg.flags.strict_ties).value
    te = auc(model.decision_function(test.X), test.y, cfg.flags.strict_ties).value
    snap = {"config": cfg.model_dump(), "seed": seed, "model": model.to_dict()}
    tmp = out + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(snap, fh)
    os.replace(tmp, out)
    print(f"algorithm={cfg.algorithm} n_train={len(train)} n_test={len(test)} "
          f"loss_rounds={rounds} train_auc={tr:.6f} test_auc={te:.6f}")
    return 0


def cmd_experiment(cfg: RunConfig, seed: int | None, out: str, threads: int) -> int:
    ds = load_data(cfg.dataset, seed or 0, scale=False)
    seeds = tuple(cfg.seeds) if seed is None else tuple(seed + i for i in range(len(cfg.seeds)))
    grids = None
    custom = {k: v for k, v in cfg.grid.model_dump().items() if k != "subsample" and v is not None}
    if custom:
        grids = {**default_grids(cfg.algorithm, cfg.grid.subsample), **custom}
        grids = {k: v for k, v in grids.items() if k in GRID_PARAMS[cfg.algorithm]}
    fixed = learner_params(cfg)
    for k in ("lam", "eta", "width", "C"):
        fixed.pop(k, None)
    ecfg = ExperimentConfig(seeds, cfg.folds, cfg.inner_folds, cfg.grid.subsample, grids, fixed,
                            cfg.flags.scale_scope, cfg.flags.strict_ties, threads)
    report = run_experiment(ds, cfg.algorithm, ecfg)
    report.write_csv(out)
    print(f"algorithm={cfg.algorithm} runs={len(report.runs)} mean_auc={report.mean:.6f} "
          f"stddev={report.stddev:.6f}")
    return 0


REGRET_COLUMNS = ("t", "loss_rounds", "cumulative_loss", "hindsight_loss", "cumulative_regret",
                  "regret_upper", "bound_value")


def cmd_regret(cfg: RunConfig, seed: int, out: str) -> int:
    require_params(cfg)
    if cfg.algorithm in ("perceptron", "pa1"):
        raise ConfigError(f"regret is defined for the AUC learners, not {cfg.algorithm}")
    ds = load_data(cfg.dataset, seed)
    ds = shuffled_stream(ds, seed) if cfg.dataset.synthetic is None else ds
    if cfg.horizon is not None:
        ds = ds.subset(np.arange(min(cfg.horizon, len(ds))))
    if len(ds) == 0:
        raise ValueError("empty stream")
    p = learner_params(cfg)
    model = make_learner(cfg.algorithm, ds.dim, p)
    losses = model.fit(ds.X, ds.y)
    kernel = cfg.algorithm.startswith("okauc")
    lam = cfg.params.lam
    if kernel:
        budgets = {1: model.pos_buf.budget, -1: model.neg_buf.budget}
        phi = kernel_features(model.kernel.gram(ds.X, ds.X))
        problem = HindsightProblem(phi, ds.y, model.loss, lam, budgets=budgets)
    else:
        problem = HindsightProblem(ds.X, ds.y, model.loss, lam, cfg.flags.strict_paper_init)
    bound = None
    if cfg.algorithm == "oauc-m":
        bound = linear_regret_bound
    elif cfg.algorithm == "okauc-m":
        if all(b is None for b in problem.budgets.values()):
            bound = kernel_regret_bound
        else:
            log.warning("the kernel regret bound holds for unbounded buffers only; "
                        "bound column omitted for budget %s", cfg.params.budget)
    curve = _curve(problem, losses, cfg.every)
    header = REGRET_COLUMNS if bound else REGRET_COLUMNS[:-1]
    rows = []
    for pos, r, cl, opt, up in zip(curve.positions, curve.rounds, curve.cumulative_loss, curve.optimum,
                                   curve.regret_upper):
        row = [str(pos + 1), str(r), repr(float(cl)), repr(float(opt)), repr(float(cl - opt)), repr(float(up))]
        if bound:
            row.append(repr(bound(lam, int(r))))
        rows.append(row)
    write_csv_atomic(out, header, rows)
    last = rows[-1][4] if rows else "nan"
    print(f"algorithm={cfg.algorithm} T={len(ds)} loss_rounds={len(curve.positions) and int(curve.rounds[-1])} "
          f"final_regret={last}")
    return 0


def cmd_verify(names=None) -> int:
    from .verify import SUITES, run_all

    unknown = [n for n in names or () if n not in SUITES]
    if unknown:
        raise ConfigError(f"unknown suites {unknown}; choose from {list(SUITES)}")
    ok = True
    for res in run_all(names):
        print(res.line())
        for f in res.failures[:5]:
            print(f"    violation: {f}")
        ok &= res.ok
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="momentauc", description="Online AUC maximisation from class moments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, default_out in (("train", "model.json"), ("experiment", "report.csv"), ("regret", "regret.csv")):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", default=default_out)
        sp.add_argument("--threads", type=int, default=1)
    vp = sub.add_parser("verify")
    vp.add_argument("--suite", action="append", default=None)
    vp.add_argument("--seed", type=int, default=None)
    vp.add_argument("--threads", type=int, default=1)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        if args.command == "verify":
            return cmd_verify(args.suite)
        cfg = load_config(args.config)
        if args.command == "train":
            return cmd_train(cfg, args.seed or 0, args.out)
        if args.command == "experiment":
            return cmd_experiment(cfg, args.seed, args.out, args.threads)
        return cmd_regret(cfg, args.seed or 0, args.out)
    except (ConfigError, FileNotFoundError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
