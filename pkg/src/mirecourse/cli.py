"""Command-line interface.

Subcommands: ``train``, ``recourse``, ``path``, ``experiment``, ``sweep-rho``
and ``verify``. Every option may also come from a ``--config`` file of
``key = value`` lines whose keys are the option names without the leading
dashes; options given on the command line win.

Exit status: 0 on success, 1 on usage errors, 2 when the run fails (including a
FAIL verdict from ``verify``).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time

import numpy as np

from . import synthetic
from ._seeding import derive
from .actions import CostSpec, build_grid
from .data import attach_quantiles, load_csv, load_instance, load_schema, meta_from_dict, meta_to_dict
from .evaluation import METHODS, SWEEP_RHOS, ExperimentConfig, run_experiment
from .imputation import fit_imputer, imputer_from_dict, imputer_to_dict, sample_candidates
from .milp import SolverParams
from .models import LinearModel, load_document, model_from_dict, predict, save_model, train
from .recourse import (Subsample, path, solve_armin, solve_imputation_ar, solve_plain_ar,
                       solve_robust_ar)
from .theory import (segment_actions, verify_prop_growth, verify_prop_sample, verify_prop_upper)

log = logging.getLogger("mirecourse")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n\n{self.format_usage()}")


# ---------------------------------------------------------------------------
# option tables: (flag, type, default, help); default None means "not set"

def _bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _floats(v):
    return tuple(float(s) for s in str(v).replace(";", ",").split(",") if s.strip())


def _names(v):
    return tuple(s.strip() for s in str(v).split(",") if s.strip())


def _show(default):
    if default in (None, ""):
        return "none"
    if isinstance(default, tuple):
        return ",".join(map(str, default))
    return default


def _heuristic(v):
    if str(v).strip().lower() in ("none", "off", "full"):
        return None
    parts = [int(s) for s in str(v).replace("x", ",").split(",")]
    if len(parts) != 2:
        raise ValueError("heuristic is N_SUB,REPEATS or none")
    return tuple(parts)


COMMON = [
    ("--seed", int, 0, "master seed for every random choice"),
    ("--out-dir", str, None, "directory for output files"),
]

DATA = [
    ("--data", str, "synthetic:loan", "synthetic:NAME or a CSV path (needs --schema)"),
    ("--schema", str, None, "schema file for CSV data"),
    ("--label", str, None, "label column (overrides the schema's)"),
    ("--n-rows", int, 2000, "rows drawn from a synthetic generator"),
]

SOLVE = [
    ("--n", int, 100, "number of imputation candidates"),
    ("--rho", float, 0.75, "required empirical validity"),
    ("--bins", int, 10, "grid points per feature"),
    ("--cost", str, "tlps", "tlps or l1 (standardized)"),
    ("--candidates", str, "chained_draws", "candidate distribution"),
    ("--time-limit", float, 60.0, "seconds per MILP"),
    ("--branching", str, "most-fractional", "group-order or most-fractional"),
]

COMMANDS = {
    "train": [*COMMON, *DATA,
              ("--classifier", str, "logistic", "logistic, relu_net or forest"),
              ("--hyper", str, "", "classifier options as key=value pairs separated by commas"),
              ("--out", str, "model.json", "model file to write")],
    "recourse": [*COMMON, *SOLVE,
                 ("--model", str, None, "model file from train"),
                 ("--instance", str, None, "CSV with a header and one row; NA marks missing"),
                 ("--original", str, None, "optional complete row to check validity against"),
                 ("--method", str, "armin", "|".join(METHODS)),
                 ("--heuristic", _heuristic, (10, 10), "armin subsampling N_SUB,REPEATS or none"),
                 ("--imputer", str, "chained", "imputer used by robust")],
    "path": [*COMMON, *SOLVE,
             ("--model", str, None, "model file from train"),
             ("--instance", str, None, "CSV with a header and one row; NA marks missing")],
    "experiment": [*COMMON, *DATA, *SOLVE,
                   ("--classifier", str, "logistic", "logistic, relu_net or forest"),
                   ("--mechanism", str, "mcar", "mcar, mar or mnar"),
                   ("--dstar", int, 2, "features dropped under MCAR"),
                   ("--target", str, None, "feature that goes missing (mar/mnar)"),
                   ("--cond", str, None, "feature that decides (mar)"),
                   ("--methods", _names, ("plain_ar", "imputation_mean", "robust", "armin"),
                    "comma-separated methods"),
                   ("--heuristic", _heuristic, (10, 10), "armin subsampling N_SUB,REPEATS or none"),
                   ("--imputer", str, "chained", "imputer used by robust"),
                   ("--max-instances", int, 100, "test instances to process"),
                   ("--sweep", _floats, (), "rho values for an exact sweep"),
                   ("--sweep-n", int, 20, "candidates used by the sweep"),
                   ("--timing", _bool, False, "record wall times (breaks byte-identical reports)"),
                   ("--jobs", int, 1, "worker processes")],
    "verify": [*COMMON,
               ("--trials", int, None, "Monte-Carlo trials (default depends on the check)"),
               ("--dim", int, 3, "prop4: dimension"),
               ("--imputer", str, "both", "prop4: mean, knn or both"),
               ("--eps", float, 0.25, "prop5: tolerance"),
               ("--delta", float, 0.05, "prop5/prop6: failure probability"),
               ("--dstar", int, 2, "prop5: missing features"),
               ("--width", float, 1.0, "prop5: domain width"),
               ("--n-values", _floats, (5, 20, 100), "prop6: sample sizes")],
}
COMMANDS["sweep-rho"] = [o for o in COMMANDS["experiment"] if o[0] not in ("--methods", "--sweep")] + [
    ("--rhos", _floats, SWEEP_RHOS, "rho grid")]

DESCRIPTIONS = {
    "train": "fit a classifier and an imputer and write them to one model file",
    "recourse": "compute an action for one incomplete instance",
    "path": "trace the cost/validity trade-off for one instance",
    "experiment": "run the batch protocol and write report.json and records.csv",
    "sweep-rho": "exact rho sweep over test instances; writes sweep.csv",
    "verify": "Monte-Carlo checks of the bounds (prop4, prop5, prop6)",
}


def _dest(flag):
    return flag.lstrip("-").replace("-", "_")


def build_parser():
    top = _Parser(prog="mirecourse", description="Recourse for instances with missing values.")
    top.add_argument("--verbose", action="store_true", help="progress and timings on standard error")
    top.add_argument("--config", help="key = value file; command-line options win")
    sub = top.add_subparsers(dest="command", parser_class=_Parser)
    for name, opts in COMMANDS.items():
        p = sub.add_parser(name, help=DESCRIPTIONS[name], description=DESCRIPTIONS[name])
        if name == "verify":
            p.add_argument("check", choices=("prop4", "prop5", "prop6"))
        p.add_argument("--config", dest="sub_config", help="key = value file; command-line options win")
        p.add_argument("--verbose", dest="sub_verbose", action="store_true", help=argparse.SUPPRESS)
        for flag, _type, default, text in opts:
            # parse as text so the same converter serves flags and config entries
            p.add_argument(flag, dest=_dest(flag), default=None,
                           help=f"{text} (default: {_show(default)})")
    return top


def read_config(path):
    """Flat ``key = value`` file; ``#`` starts a comment line."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.lstrip("-").replace("-", "_")] = value
    return out


def resolve(command, ns, config):
    """Merge flags, config entries and defaults into a plain dict of typed values."""
    opts = COMMANDS[command]
    known = {_dest(f) for f, *_ in opts}
    unknown = sorted(set(config) - known - {"verbose"})
    if unknown:
        raise UsageError(f"config file: unknown key(s) for {command}: {', '.join(unknown)}")
    out = {}
    for flag, conv, default, _ in opts:
        key = _dest(flag)
        raw = getattr(ns, key)
        if raw is None:
            raw = config.get(key)
        if raw is None:
            out[key] = default
            continue
        try:
            out[key] = conv(raw)
        except ValueError as exc:
            raise UsageError(f"{flag}: {exc}") from None
    return out


# ---------------------------------------------------------------------------
# helpers

def _load_data(opts):
    src = opts["data"]
    if src.startswith("synthetic:"):
        return synthetic.generate(src.split(":", 1)[1], n=opts["n_rows"], seed=opts["seed"])
    if not opts["schema"]:
        raise UsageError("CSV data needs --schema")
    features, label = load_schema(opts["schema"])
    label = opts["label"] or label
    if label is None:
        raise UsageError("no label column: set label_column in the schema or pass --label")
    return load_csv(src, features, label)


def _source(opts):
    src = opts["data"]
    return src if src.startswith("synthetic:") else f"csv:{src}"


def _parse_hyper(text):
    out = {}
    for item in _names(text):
        if "=" not in item:
            raise UsageError(f"--hyper: expected key=value, got {item!r}")
        k, v = (s.strip() for s in item.split("=", 1))
        try:
            out[k] = int(v)
        except ValueError:
            try:
                out[k] = float(v)
            except ValueError:
                out[k] = v
    return out


def _load_bundle(path):
    if not path:
        raise UsageError("--model is required")
    doc = load_document(path)
    for key in ("features", "imputer"):
        if key not in doc:
            raise ValueError(f"{path}: model file lacks {key!r}; write it with the train command")
    metas = tuple(meta_from_dict(d) for d in doc["features"])
    return model_from_dict(doc), metas, imputer_from_dict(doc["imputer"])


def _cost_spec(kind, metas, state):
    if kind == "tlps":
        return CostSpec.tlps(metas)
    if kind == "l1":
        return CostSpec.weighted_l1(1.0 / np.maximum(state.stds, 1e-12))
    raise UsageError(f"--cost must be tlps or l1, not {kind!r}")


def _params(opts):
    return SolverParams(time_limit=opts["time_limit"], branching=opts["branching"])


def _num(v):
    return f"{v:+.4f}" if v else "0"


def _table(header, rows):
    widths = [max(len(str(c)) for c in col) for col in zip(header, *rows)]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    lines = [fmt.format(*header), fmt.format(*("-" * w for w in widths))]
    lines += [fmt.format(*map(str, r)) for r in rows]
    return "\n".join(line.rstrip() for line in lines)


def _verdict(ok, color):
    word = "PASS" if ok else "FAIL"
    if color:
        return f"\033[{32 if ok else 31}m{word}\033[0m"
    return word


def _use_color():
    return "NO_COLOR" not in os.environ and sys.stdout.isatty()


# ---------------------------------------------------------------------------
# commands

def cmd_train(opts, out):
    data = _load_data(opts)
    clf = train(opts["classifier"], data, seed=opts["seed"], **_parse_hyper(opts["hyper"]))
    metas = attach_quantiles(data)
    state = fit_imputer(data)
    target = opts["out"]
    if opts["out_dir"]:
        os.makedirs(opts["out_dir"], exist_ok=True)
        target = os.path.join(opts["out_dir"], target)
    save_model(clf, target, features=[meta_to_dict(m) for m in metas],
               extra={"imputer": imputer_to_dict(state), "label": data.label_name})
    acc = float(np.mean(predict(clf, data.rows) == data.labels))
    out.write(f"trained {opts['classifier']} on {len(data)} rows, {len(metas)} features; "
              f"training accuracy {acc:.4f}\n")
    out.write(f"wrote {target}\n")


def _instance(opts, metas):
    if not opts["instance"]:
        raise UsageError("--instance is required")
    return load_instance(opts["instance"], metas)


def cmd_recourse(opts, out):
    clf, metas, state = _load_bundle(opts["model"])
    xt = _instance(opts, metas)
    method = opts["method"]
    if method not in METHODS:
        raise UsageError(f"--method must be one of {', '.join(METHODS)}")
    costs = _cost_spec(opts["cost"], metas, state)
    params = _params(opts)
    grid = build_grid(xt, metas, opts["bins"], costs)
    S = sample_candidates(xt, opts["candidates"], state, opts["n"], seed=derive(opts["seed"], 2))
    if method == "plain_ar":
        if xt.missing_set:
            raise ValueError("plain_ar needs a complete instance")
        res = solve_plain_ar(xt, clf, grid, params)
    elif method.startswith("imputation_"):
        res = solve_imputation_ar(xt, method.split("_", 1)[1], state, clf, grid, params)
    elif method == "robust":
        res = solve_robust_ar(xt, opts["imputer"], state, clf, grid, S, params)
    else:
        heur = Subsample(*opts["heuristic"]) if opts["heuristic"] else None
        res = solve_armin(xt, clf, grid, S, opts["rho"], heur, params, seed=derive(opts["seed"], 3))
    original = None
    if opts["original"]:
        original = load_instance(opts["original"], metas)
        if original.missing_set:
            raise ValueError("--original must be a complete row")

    names = [m.name for m in metas]
    missing = [names[d] for d in xt.missing_set]
    out.write(f"method: {method}\nstatus: {res.status}\n")
    out.write(f"missing: {', '.join(missing) if missing else 'none'}\n")
    if "imputed" in res.meta:
        imp = res.meta["imputed"]
        out.write("imputed: " + ", ".join(f"{names[d]}={imp[d]:.4f}" for d in xt.missing_set) + "\n")
    if res.action is None:
        out.write("no action found\n")
        return 0
    moved = [d for d in range(len(names)) if res.action[d] != 0]
    rows = []
    for d in moved:
        now = xt.values[d]
        after = "" if np.isnan(now) else f"{now + res.action[d]:.4f}"
        rows.append((names[d], "" if np.isnan(now) else f"{now:.4f}", _num(res.action[d]), after))
    out.write("\n" + _table(("feature", "value", "action", "new value"), rows or [("(none)", "", "", "")]))
    out.write("\n\n")
    out.write(f"cost: {res.cost:.4f}\n")
    out.write(f"validity on candidates: {res.empirical_validity:.4f} (N={len(S)})\n")
    if original is not None:
        ok = bool(predict(clf, original.values + res.action) == 1)
        out.write(f"valid for original: {'yes' if ok else 'no'}\n")
    return 0


def cmd_path(opts, out):
    clf, metas, state = _load_bundle(opts["model"])
    xt = _instance(opts, metas)
    grid = build_grid(xt, metas, opts["bins"], _cost_spec(opts["cost"], metas, state))
    S = sample_candidates(xt, opts["candidates"], state, opts["n"], seed=derive(opts["seed"], 2))
    res = path(xt, clf, grid, S, _params(opts))
    names = [m.name for m in metas]
    rows = []
    for t, (rho, a, c, v) in enumerate(res.rows()):
        change = "; ".join(f"{names[d]} {_num(a[d])}" for d in range(len(a)) if a[d] != 0) or "(none)"
        rows.append((t, f"{rho:.4f}", f"{c:.4f}", f"{v:.4f}", change))
    out.write(_table(("step", "rho", "cost", "validity", "action"), rows) + "\n")
    out.write(f"status: {res.status}; {len(res)} steps over N={len(S)} candidates\n")
    if opts["out_dir"]:
        os.makedirs(opts["out_dir"], exist_ok=True)
        target = os.path.join(opts["out_dir"], "path.csv")
        with open(target, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "rho", "cost", "validity", *names])
            for t, (rho, a, c, v) in enumerate(res.rows()):
                w.writerow([t, repr(float(rho)), repr(float(c)), repr(float(v)), *(repr(float(x)) for x in a)])
    return 0


def _experiment_config(opts, methods, sweep):
    return ExperimentConfig(
        source=_source(opts), schema=opts["schema"], label_column=opts["label"], n_rows=opts["n_rows"],
        classifier=opts["classifier"], mechanism=opts["mechanism"], d_star=opts["dstar"],
        target=opts["target"], cond=opts["cond"], methods=methods, N=opts["n"], rho=opts["rho"],
        heuristic=opts["heuristic"], candidates=opts["candidates"], robust_imputer=opts["imputer"],
        cost=opts["cost"], bins=opts["bins"], max_instances=opts["max_instances"], seed=opts["seed"],
        time_limit=opts["time_limit"], branching=opts["branching"], sweep=sweep,
        sweep_n=opts["sweep_n"], timing=opts["timing"])


def _fmt_opt(v, spec=".4f"):
    return "-" if v is None else format(v, spec)


def cmd_experiment(opts, out):
    cfg = _experiment_config(opts, opts["methods"], opts["sweep"])
    report = run_experiment(cfg, out_dir=opts["out_dir"], jobs=opts["jobs"])
    rows = [(m, a["n_instances"], a["n_with_action"], _fmt_opt(a["valid_ratio"]), _fmt_opt(a["mean_cost"]),
             _fmt_opt(a["mean_cost_valid"]), _fmt_opt(a["mean_sign_agreement"]))
            for m, a in report.aggregates.items()]
    out.write(_table(("method", "instances", "with action", "valid ratio", "mean cost",
                      "cost (valid)", "sign agreement"), rows) + "\n")
    if report.sweep:
        _write_sweep(report, out)
    if opts["out_dir"]:
        out.write(f"wrote {opts['out_dir']}\n")
    return 0


def _write_sweep(report, out):
    rows = [(f"{s['rho']:.2f}", s["n"], _fmt_opt(s["mean_cost"]))
            for s in json.loads(report.to_json())["sweep"]]
    out.write("\n" + _table(("rho", "instances", "mean cost"), rows) + "\n")


def cmd_sweep(opts, out):
    cfg = _experiment_config(opts, ("plain_ar",), opts["rhos"])
    report = run_experiment(cfg, out_dir=opts["out_dir"], jobs=opts["jobs"])
    _write_sweep(report, out)
    if opts["out_dir"]:
        out.write(f"wrote {opts['out_dir']}\n")
    return 0


def cmd_verify(opts, out, check):
    color = _use_color()
    seed = opts["seed"]
    ok = True
    if check == "prop4":
        kinds = ("mean", "knn") if opts["imputer"] == "both" else (opts["imputer"],)
        trials = opts["trials"] or 10_000
        for kind in kinds:
            t = trials if kind == "mean" else min(trials, 2000)
            r = verify_prop_upper(t, opts["dim"], seed, imputer=kind)
            ok &= r.passed
            out.write(f"{kind}: trials={r.trials} estimate={r.estimate:.6f} (SE {r.se_estimate:.6f}) "
                      f"bound={r.bound:.6f} (SE {r.se_bound:.6f}) sigma2/loss={r.variance_term:.6f} "
                      f"gamma={r.gamma:.6f} p_conf={r.p_conf:.4f} n_conf={r.n_conf}"
                      f"{' low-confidence' if r.low_confidence else ''} -> {_verdict(r.passed, color)}\n")
    elif check == "prop5":
        r = verify_prop_sample(opts["eps"], opts["delta"], opts["dstar"], opts["width"],
                               opts["trials"] or 1000, seed)
        ok = r.passed
        out.write(f"N={r.N}\n")
        out.write(f"coverage={r.coverage:.4f} (SE {r.se:.4f}) target={1 - r.delta:.4f} "
                  f"closed-form={r.exact_coverage:.4f} trials={r.trials} -> {_verdict(r.passed, color)}\n")
    else:
        gen = np.random.default_rng(derive(seed, 7))
        coef = gen.normal(size=3)
        model = LinearModel(coef, -1.0)
        family = segment_actions(3.0 * coef / np.linalg.norm(coef))
        for N in opts["n_values"]:
            r = verify_prop_growth(model, family, int(N), opts["trials"] or 100, opts["delta"], seed)
            ok &= r.passed
            se = np.sqrt(max(r.fraction_within * (1 - r.fraction_within), 1e-12) / r.trials)
            out.write(f"N={r.N}: max patterns {r.max_patterns} (limit {r.N + 1}); "
                      f"sup deviation bound {r.deviation_bound:.4f}, held in {r.fraction_within:.3f} "
                      f"(SE {se:.3f}) of {r.trials} trials -> {_verdict(r.passed, color)}\n")
    if not ok:
        sys.stderr.write("verification failed\n")
    return 0 if ok else 2


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    out = sys.stdout
    try:
        ns = build_parser().parse_args(argv)
        if ns.command is None:
            raise UsageError(build_parser().format_help())
        verbose = ns.verbose or ns.sub_verbose
        logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                            format="%(asctime)s %(message)s", stream=sys.stderr)
        cfg_path = ns.sub_config or ns.config
        config = read_config(cfg_path) if cfg_path else {}
        opts = resolve(ns.command, ns, config)
        start = time.perf_counter()
        if ns.command == "train":
            code = cmd_train(opts, out) or 0
        elif ns.command == "recourse":
            code = cmd_recourse(opts, out)
        elif ns.command == "path":
            code = cmd_path(opts, out)
        elif ns.command == "experiment":
            code = cmd_experiment(opts, out)
        elif ns.command == "sweep-rho":
            code = cmd_sweep(opts, out)
        else:
            code = cmd_verify(opts, out, ns.check)
        log.info("%s finished in %.2f s", ns.command, time.perf_counter() - start)
        return code
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return 1
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 1
    except (OSError, ValueError, RuntimeError, KeyError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


run = main

if __name__ == "__main__":
    sys.exit(main())
