"""Metrics, the batch experiment protocol and rho sweeps."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import synthetic
from ._seeding import derive
from .actions import CostSpec, build_grid
from .data import (MAR, MCAR, MNAR, IncompleteInstance, attach_quantiles, inject_missing, load_csv,
                   load_schema, median_threshold, split)
from .imputation import fit_imputer, sample_candidates
from .milp import SolverParams
from .models import predict, train
from .recourse import (Subsample, solve_armin, solve_imputation_ar, solve_plain_ar,
                       solve_robust_ar)

METHODS = ("plain_ar", "imputation_mean", "imputation_knn", "imputation_chained", "robust", "armin")
SWEEP_RHOS = tuple(round(0.5 + 0.05 * k, 2) for k in range(9))


def valid_ratio(actions, originals, clf) -> float:
    """Share of actions valid for the ORIGINAL instances; a missing action counts as invalid."""
    actions, originals = list(actions), list(originals)
    if len(actions) != len(originals):
        raise ValueError("actions and originals must be aligned")
    if not actions:
        return math.nan
    hits = [a is not None and predict(clf, np.asarray(x) + np.asarray(a)) == 1
            for a, x in zip(actions, originals)]
    return float(np.mean(hits))


def sign_agreement(a, a_star) -> float:
    """Share of changed features (in either action) whose direction matches."""
    a, a_star = np.sign(np.asarray(a, dtype=float)), np.sign(np.asarray(a_star, dtype=float))
    if a.shape != a_star.shape:
        raise ValueError("actions must have the same dimension")
    union = (a != 0) | (a_star != 0)
    if not union.any():
        return 1.0
    return float(np.mean(a[union] == a_star[union]))


@dataclass
class ExperimentConfig:
    source: str = "synthetic:correlated"  # or "csv:<path>"
    schema: Optional[str] = None  # schema file, csv sources only
    label_column: Optional[str] = None
    n_rows: int = 2000
    classifier: str = "logistic"
    hyper: dict = field(default_factory=dict)
    mechanism: str = "mcar"  # mcar | mar | mnar
    d_star: int = 2
    target: Optional[str] = None  # mar/mnar: the feature that goes missing
    cond: Optional[str] = None  # mar: the feature that decides
    methods: tuple = ("plain_ar", "imputation_mean", "robust", "armin")
    N: int = 100
    rho: float = 0.75
    heuristic: Optional[tuple] = (10, 10)  # (N', P) or None for the full problem
    candidates: str = "chained_draws"
    robust_imputer: str = "chained"
    cost: str = "tlps"
    bins: int = 10
    test_fraction: float = 0.25
    max_instances: int = 100
    seed: int = 0
    time_limit: float = 60.0
    branching: str = "most-fractional"
    sweep: tuple = ()  # rho values; solved exactly on the first sweep_n candidates
    sweep_n: int = 20
    timing: bool = False

    def __post_init__(self):
        self.methods = tuple(self.methods)
        self.sweep = tuple(float(r) for r in self.sweep)
        if self.heuristic is not None:
            self.heuristic = tuple(int(v) for v in self.heuristic)
        if not self.methods:
            raise ValueError("configure at least one method")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        if self.mechanism not in ("mcar", "mar", "mnar"):
            raise ValueError(f"unknown mechanism {self.mechanism!r}")
        if self.cost not in ("tlps", "l1"):
            raise ValueError(f"unknown cost {self.cost!r}")
        if not 0 < self.rho <= 1:
            raise ValueError("rho must lie in (0, 1]")


@dataclass
class Report:
    config: dict
    aggregates: dict
    records: list
    sweep: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(_clean({"config": self.config, "aggregates": self.aggregates,
                                  "sweep": self.sweep_summary()}),
                          indent=2, sort_keys=True) + "\n"

    def sweep_summary(self) -> list:
        return _sweep_summary(self.sweep)

    def records_csv(self, timing=False) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["instance", "method", "missing", "action", "cost", "valid_for_original",
                "validity_on_S", "sign_agreement", "status"]
        w.writerow(head + (["wall_ms"] if timing else []))
        for r in self.records:
            row = [r["instance"], r["method"], ";".join(r["missing"]),
                   "" if r["action"] is None else ";".join(repr(float(v)) for v in r["action"]),
                   _fmt(r["cost"]), int(r["valid_for_original"]), _fmt(r["validity_on_S"]),
                   _fmt(r["sign_agreement"]), r["status"]]
            w.writerow(row + ([f"{r['wall_ms']:.3f}"] if timing else []))
        return buf.getvalue()

    def sweep_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["instance", "rho", "cost", "validity_on_S", "status"])
        for r in self.sweep:
            w.writerow([r["instance"], repr(r["rho"]), _fmt(r["cost"]), _fmt(r["validity"]), r["status"]])
        return buf.getvalue()

    def write(self, out_dir, timing=False):
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "report.json"), "w") as fh:
            fh.write(self.to_json())
        with open(os.path.join(out_dir, "records.csv"), "w") as fh:
            fh.write(self.records_csv(timing))
        if self.sweep:
            with open(os.path.join(out_dir, "sweep.csv"), "w") as fh:
                fh.write(self.sweep_csv())


def _fmt(v):
    if v is None or (isinstance(v, float) and not math.isfinite(v)):
        return ""
    return repr(float(v))


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def _sweep_summary(rows):
    """Mean cost per rho over the instances solved at every rho, so the curve compares like with like."""
    rhos = sorted({r["rho"] for r in rows})
    by_inst = {}
    for r in rows:
        by_inst.setdefault(r["instance"], {})[r["rho"]] = r["cost"]
    common = sorted(k for k, c in by_inst.items()
                    if all(rho in c and c[rho] is not None and math.isfinite(c[rho]) for rho in rhos))
    out = []
    for rho in rhos:
        costs = [by_inst[k][rho] for k in common]
        solved = sum(1 for c in by_inst.values() if c.get(rho) is not None and math.isfinite(c[rho]))
        out.append({"rho": rho, "mean_cost": float(np.mean(costs)) if costs else None,
                    "n": len(costs), "n_solved": solved})
    return out


def aggregate(records, methods):
    """Per-method summary; recomputable from the records alone."""
    out = {}
    for m in methods:
        rs = [r for r in records if r["method"] == m]
        found = [r for r in rs if r["action"] is not None]
        valid = [r for r in found if r["valid_for_original"]]
        mean = lambda xs: float(np.mean(xs)) if xs else None
        out[m] = {
            "n_instances": len(rs),
            "n_with_action": len(found),
            "valid_ratio": mean([float(r["valid_for_original"]) for r in rs]),
            "mean_cost": mean([r["cost"] for r in found]),
            "mean_cost_valid": mean([r["cost"] for r in valid]),
            "mean_sign_agreement": mean([r["sign_agreement"] for r in found]),
            "mean_validity_on_S": mean([r["validity_on_S"] for r in found]),
        }
        if rs and "wall_ms" in rs[0]:
            out[m]["mean_wall_ms"] = mean([r["wall_ms"] for r in rs])
    return out


# ---------------------------------------------------------------------------
# protocol

@dataclass
class _Context:
    config: ExperimentConfig
    metas: tuple
    clf: object
    state: object
    cost_spec: CostSpec
    mechanism: object
    params: SolverParams


def load_source(config: ExperimentConfig):
    kind, _, arg = config.source.partition(":")
    if kind == "synthetic":
        return synthetic.generate(arg, n=config.n_rows, seed=config.seed)
    if kind == "csv":
        if not config.schema:
            raise ValueError("csv sources need a schema file")
        features, label = load_schema(config.schema)
        return load_csv(arg, features, config.label_column or label)
    raise ValueError(f"unknown data source {config.source!r}")


def _feature_index(names, name, what):
    if name is None:
        raise ValueError(f"{what} feature must be given for this mechanism")
    if name in names:
        return names.index(name)
    raise ValueError(f"unknown {what} feature {name!r}")


def _mechanism(config, train_set):
    names = train_set.names
    if config.mechanism == "mcar":
        return MCAR(config.d_star)
    target = _feature_index(names, config.target, "target")
    if config.mechanism == "mar":
        cond = _feature_index(names, config.cond, "conditioning")
        return MAR(target, cond, median_threshold(train_set, cond))
    return MNAR(target, median_threshold(train_set, target))


def prepare(config: ExperimentConfig):
    data = load_source(config)
    train_set, test_set = split(data, config.test_fraction, seed=config.seed)
    metas = attach_quantiles(train_set)
    clf = train(config.classifier, train_set, seed=config.seed, **config.hyper)
    state = fit_imputer(train_set)
    cost_spec = CostSpec.tlps(metas) if config.cost == "tlps" else \
        CostSpec.weighted_l1(1.0 / np.maximum(train_set.rows.std(axis=0), 1e-12))
    params = SolverParams(time_limit=config.time_limit, branching=config.branching)
    ctx = _Context(config, metas, clf, state, cost_spec, _mechanism(config, train_set), params)
    return ctx, test_set


def select_instances(ctx: _Context, test_set):
    """Test rows predicted -1 (and, for MAR/MNAR, that actually lose a value)."""
    out = []
    for i, x in enumerate(test_set.rows):
        if predict(ctx.clf, x) != -1:
            continue
        if not isinstance(ctx.mechanism, MCAR) and not inject_missing(x, ctx.mechanism).missing_set:
            continue
        out.append(i)
        if len(out) == ctx.config.max_instances:
            break
    return out


def _run_instance(args):
    ctx, k, x = args
    cfg = ctx.config
    x = np.asarray(x, dtype=float)
    xt = inject_missing(x, ctx.mechanism, seed=derive(cfg.seed, 1, k))
    grid = build_grid(xt, ctx.metas, cfg.bins, ctx.cost_spec)
    full_grid = build_grid(IncompleteInstance(x), ctx.metas, cfg.bins, ctx.cost_spec)
    S = sample_candidates(xt, cfg.candidates, ctx.state, cfg.N, seed=derive(cfg.seed, 2, k))
    star = solve_plain_ar(x, ctx.clf, full_grid, ctx.params)
    missing = [ctx.metas[d].name for d in xt.missing_set]
    records = []
    for method in cfg.methods:
        if method == "plain_ar":
            res = star
        elif method.startswith("imputation_"):
            res = solve_imputation_ar(xt, method.split("_", 1)[1], ctx.state, ctx.clf, grid, ctx.params)
        elif method == "robust":
            res = solve_robust_ar(xt, cfg.robust_imputer, ctx.state, ctx.clf, grid, S, ctx.params)
        else:
            heur = Subsample(*cfg.heuristic) if cfg.heuristic else None
            res = solve_armin(xt, ctx.clf, grid, S, cfg.rho, heur, ctx.params, seed=derive(cfg.seed, 3, k))
        # validity on S is recomputed against the sample, plain AR included
        if res.action is not None:
            v_orig = bool(predict(ctx.clf, x + res.action) == 1)
            v_s = float(np.mean(predict(ctx.clf, S.candidates + res.action) == 1))
            agree = sign_agreement(res.action, star.action) if star.action is not None else None
        else:
            v_orig, v_s, agree = False, None, None
        rec = {"instance": k, "method": method, "missing": missing,
               "action": None if res.action is None else [float(v) for v in res.action],
               "cost": res.cost if res.action is not None else None,
               "valid_for_original": v_orig, "validity_on_S": v_s, "sign_agreement": agree,
               "status": res.status}
        if cfg.timing:
            rec["wall_ms"] = 1000.0 * res.wall_time
        records.append(rec)
    sweep = []
    if cfg.sweep:
        sub = S.subset(np.arange(min(cfg.sweep_n, len(S))))
        for rho in cfg.sweep:
            res = solve_armin(xt, ctx.clf, grid, sub, rho, None, ctx.params)
            sweep.append({"instance": k, "rho": rho, "cost": res.cost,
                          "validity": res.empirical_validity, "status": res.status})
    return records, sweep


def run_experiment(config: ExperimentConfig, out_dir=None, jobs: int = 1) -> Report:
    ctx, test_set = prepare(config)
    chosen = select_instances(ctx, test_set)
    tasks = [(ctx, k, test_set.rows[i]) for k, i in enumerate(chosen)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_instance, tasks))
    else:
        results = [_run_instance(t) for t in tasks]
    records = [r for recs, _ in results for r in recs]
    sweep = [s for _, sw in results for s in sw]
    report = Report(_clean(asdict(config)), aggregate(records, config.methods), records, sweep)
    if out_dir is not None:
        report.write(out_dir, timing=config.timing)
    return report
