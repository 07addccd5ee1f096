"""Command-line entry point: ``adaconc <subcommand> [flags]``.

Exit codes are 0 on success, 1 on invalid input or parameters, 2 on I/O
failure. Results go to files or standard output; diagnostics go to standard
error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .bounds import BoundParams, posi_intervals
from .core import Dataset, Rectangle, rank_transform_matrix, support
from .errors import AdaconcError, InvalidDataset, InvalidParams
from .gac import GacConfig, train_forest
from .rects import (ApproxFamilyParams, approximate, cardinality_bound, count_family, tuple_count,
                    union_family_log_size)
from .sims import (LowerBoundSpec, SignalSpec, concentration_experiment, consistency_experiment,
                   lowerbound_experiment, mgf_check, noise_split_audit)
from .trees import Forest, dumps


class _Parser(argparse.ArgumentParser):
    """Argument errors exit with the validation code instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# -- CSV input ---------------------------------------------------------------------

def read_table(path: str, require_y: bool = True) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Parse a ``x0,...,x{d-1}[,y]`` table; errors name the 1-based line and column."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]
    if not rows:
        raise InvalidDataset(f"{path}: file is empty")
    header = [h.strip() for h in rows[0]]
    has_y = bool(header) and header[-1] == "y"
    feats = header[:-1] if has_y else header
    if require_y and not has_y:
        raise InvalidDataset(f"{path}: line 1: last column must be 'y'")
    if not feats or feats != [f"x{j}" for j in range(len(feats))]:
        raise InvalidDataset(f"{path}: line 1: feature columns must be named x0, x1, ...")
    if len(rows) < 2:
        raise InvalidDataset(f"{path}: no data rows")
    width = len(header)
    data = np.empty((len(rows) - 1, width))
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise InvalidDataset(f"{path}: line {i}: expected {width} fields, got {len(row)}")
        for c, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise InvalidDataset(
                    f"{path}: line {i}, column {c + 1} ({header[c]}): not a number: {cell!r}") from None
            if not math.isfinite(v):
                raise InvalidDataset(f"{path}: line {i}, column {c + 1} ({header[c]}): non-finite value")
            data[i - 2, c] = v
    X = data[:, :len(feats)]
    Y = data[:, -1] if has_y else None
    return X, Y


def _check_unit(path: str, X: np.ndarray, header_offset: int = 2) -> None:
    bad = np.argwhere((X < 0.0) | (X > 1.0))
    if bad.size:
        i, j = (int(v) for v in bad[0])
        raise InvalidDataset(
            f"{path}: line {i + header_offset}, column {j + 1} (x{j}): value {float(X[i, j])!r} outside [0, 1]; "
            "use --rank-transform for raw features")


def load_csv(path: str, rank_transform: bool = False, M: Optional[float] = None) -> Dataset:
    """Dataset from a CSV file, optionally rank-transforming each feature column."""
    X, Y = read_table(path, require_y=True)
    if rank_transform:
        X = rank_transform_matrix(X)
    else:
        _check_unit(path, X)
    return Dataset(X, Y, M)


def load_features(path: str, rank_transform: bool = False) -> np.ndarray:
    X, _ = read_table(path, require_y=False)
    if rank_transform:
        return rank_transform_matrix(X)
    _check_unit(path, X)
    return X


# -- output helpers ------------------------------------------------------------------

def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _run_config(args) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    cfg["version"] = __version__
    return cfg


def _sidecar(path: Optional[str], args) -> None:
    if path and path != "-":
        _write(path + ".run.json", dumps(_run_config(args)))


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


# -- subcommands -----------------------------------------------------------------------

def cmd_fit(args) -> int:
    D = load_csv(args.csv, args.rank_transform, args.M)
    cfg = GacConfig(args.k, args.alpha, D.M if D.M > 0 else 1.0, args.B, args.max_attempts,
                    args.seed, args.threshold_scale)
    forest = train_forest(D, cfg, threads=args.threads)
    forest.header.update({"rank_transform": bool(args.rank_transform), "d": D.d,
                          "run": _run_config(args)})
    _write(args.out, forest.to_json())
    return 0


def _load_model(path: str) -> Forest:
    with open(path) as fh:
        text = fh.read()
    try:
        return Forest.from_json(text)
    except (KeyError, TypeError) as exc:
        raise InvalidParams(f"{path}: malformed model document ({exc})") from None


def cmd_predict(args) -> int:
    forest = _load_model(args.model)
    X = load_features(args.csv, args.rank_transform)
    if X.shape[1] != forest.d:
        raise InvalidDataset(f"{args.csv}: has {X.shape[1]} features, model expects {forest.d}")
    pred = forest.predict(X)
    lines = ["row,prediction"] + [f"{i},{float(v)!r}" for i, v in enumerate(pred)]
    _write(args.out, "\n".join(lines) + "\n")
    _sidecar(args.out, args)
    return 0


def cmd_posi(args) -> int:
    forest = _load_model(args.model)
    if not 0 <= args.tree < forest.B:
        raise InvalidParams(f"--tree must lie in [0, {forest.B - 1}]")
    h = forest.header
    k = args.k if args.k is not None else h.get("k")
    alpha = args.alpha if args.alpha is not None else h.get("alpha")
    M = args.M if args.M is not None else h.get("M")
    n = args.n if args.n is not None else h.get("n")
    d = args.d if args.d is not None else forest.d
    if None in (k, alpha, M, n):
        raise InvalidParams("posi needs --n, --k, --alpha and --M (or a model header carrying them)")
    p = BoundParams(int(n), int(d), int(k), float(alpha), float(M))
    report = posi_intervals(forest.trees[args.tree], p, args.bound)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    _write(args.out, report.to_csv())
    _sidecar(args.out, args)
    if args.json:
        doc = report.to_dict()
        doc["run"] = _run_config(args)
        _write(args.json, dumps(doc))
    return 0


def cmd_rects_build(args) -> int:
    p = ApproxFamilyParams(tuple(range(args.s)), args.w, args.eps, args.d)
    count = count_family(p)
    bound = cardinality_bound(p.s, p.w, p.eps)
    doc = {"s": p.s, "w": p.w, "eps": p.eps, "d": p.d, "count": count,
           "counter_tuples": tuple_count(p), "bound": bound, "ratio": count / bound,
           "union_log_size": union_family_log_size(p.s, p.w, p.eps, p.d),
           "run": _run_config(args)}
    _write(args.out, dumps(doc))
    return 0


def cmd_rects_approx(args) -> int:
    with open(args.rect) as fh:
        doc = json.load(fh)
    try:
        R = Rectangle(doc["lo"], doc["hi"])
    except (KeyError, TypeError):
        raise InvalidParams(f"{args.rect}: expected an object with 'lo' and 'hi' lists") from None
    S = tuple(args.S) if args.S else tuple(sorted(support(R))) or (0,)
    p = ApproxFamilyParams(S, args.w, args.eps, R.d)
    a = approximate(R, p)
    out = {"S": list(p.S), "w": p.w, "eps": p.eps,
           "rectangle": {"lo": R.lo.tolist(), "hi": R.hi.tolist(), "volume": R.volume()},
           "inner": {"lo": a.inner.lo.tolist(), "hi": a.inner.hi.tolist(), "volume": a.inner.volume(),
                     "counters": [list(c) for c in a.inner_grid.counters]},
           "outer": {"lo": a.outer.lo.tolist(), "hi": a.outer.hi.tolist(), "volume": a.outer.volume(),
                     "counters": [list(c) for c in a.outer_grid.counters]},
           "run": _run_config(args)}
    _write(args.out, dumps(out))
    return 0


def _emit_report(rep, args) -> int:
    doc = json.loads(rep.to_json())
    doc["run"] = _run_config(args)
    _write(args.json, dumps(doc))
    if args.json and args.json != "-":
        stem = os.path.splitext(args.json)[0]
        _write(stem + ".csv", rep.to_csv())
        if not args.no_figures:
            from .plots import plot_report
            plot_report(rep, args.json)
    for c in rep.criteria:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: {c['value']}", file=sys.stderr)
    return 0


def cmd_sim_concentration(args) -> int:
    rep = concentration_experiment(args.n, args.d, args.k, args.alpha, args.M, args.reps, args.seed,
                                   args.n_random)
    return _emit_report(rep, args)


def cmd_sim_lowerbound(args) -> int:
    spec = LowerBoundSpec(args.n, args.r, args.alpha, args.s_override, args.n_max, args.seed, args.M)
    return _emit_report(lowerbound_experiment(spec, args.reps), args)


def cmd_sim_mgf(args) -> int:
    return _emit_report(mgf_check(args.t, args.n, args.seed), args)


def cmd_sim_audit(args) -> int:
    rep = noise_split_audit(args.n, args.d, args.q, args.k, args.alpha, args.M, args.B, args.reps,
                            args.seed, args.beta, args.mean_fn, args.threshold_scale)
    return _emit_report(rep, args)


def cmd_sim_consistency(args) -> int:
    spec = SignalSpec(tuple(range(args.q)), args.beta, None, args.mean_fn, args.M)
    cfg = GacConfig(1, args.alpha, args.M, args.B, args.max_attempts, args.seed, args.threshold_scale)
    rep = consistency_experiment(args.kind, args.n, spec, cfg, args.d, args.reps, args.seed,
                                 threads=args.threads)
    return _emit_report(rep, args)


# -- parser ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="adaconc", description="Adaptive concentration of regression trees.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    fit = sub.add_parser("fit", help="train a guess-and-check forest")
    fit.add_argument("--csv", required=True)
    fit.add_argument("--out", required=True)
    fit.add_argument("--k", type=int, required=True)
    fit.add_argument("--alpha", type=float, required=True)
    fit.add_argument("--M", type=float, default=None, help="response bound (default max |y|)")
    fit.add_argument("--B", type=int, default=1)
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--threads", type=int, default=1)
    fit.add_argument("--rank-transform", action="store_true")
    fit.add_argument("--max-attempts", type=int, default=10)
    fit.add_argument("--threshold-scale", type=float, default=1.0)
    fit.set_defaults(func=cmd_fit)

    pred = sub.add_parser("predict", help="predict with a saved model")
    pred.add_argument("--model", required=True)
    pred.add_argument("--csv", required=True)
    pred.add_argument("--out", default=None)
    pred.add_argument("--rank-transform", action="store_true")
    pred.set_defaults(func=cmd_predict)

    posi = sub.add_parser("posi", help="post-selection envelopes for the leaves of a tree")
    posi.add_argument("--model", required=True)
    posi.add_argument("--n", type=int)
    posi.add_argument("--d", type=int)
    posi.add_argument("--k", type=int)
    posi.add_argument("--alpha", type=float)
    posi.add_argument("--M", type=float)
    posi.add_argument("--bound", choices=("simplified", "full"), default="simplified")
    posi.add_argument("--tree", type=int, default=0)
    posi.add_argument("--out", default=None)
    posi.add_argument("--json", default=None)
    posi.set_defaults(func=cmd_posi)

    rects = sub.add_parser("rects", help="approximating rectangle families")
    rsub = rects.add_subparsers(dest="rects_command", required=True, parser_class=_Parser)
    build = rsub.add_parser("build", help="count a family and compare with its bound")
    build.add_argument("--s", type=int, required=True)
    build.add_argument("--w", type=float, required=True)
    build.add_argument("--eps", type=float, required=True)
    build.add_argument("--d", type=int, default=None)
    build.add_argument("--out", default=None)
    build.set_defaults(func=cmd_rects_build)
    approx = rsub.add_parser("approx", help="inner and outer approximants of a rectangle")
    approx.add_argument("--rect", required=True, help="JSON file with 'lo' and 'hi'")
    approx.add_argument("--w", type=float, required=True)
    approx.add_argument("--eps", type=float, required=True)
    approx.add_argument("--S", type=_ints, default=None, help="support axes (default: support of R)")
    approx.add_argument("--out", default=None)
    approx.set_defaults(func=cmd_rects_approx)

    sim = sub.add_parser("sim", help="seeded experiments")
    ssub = sim.add_subparsers(dest="sim_command", required=True, parser_class=_Parser)

    def common(p, reps):
        p.add_argument("--json", default=None, help="report path (CSV and figures are written alongside)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--reps", type=int, default=reps)
        p.add_argument("--no-figures", action="store_true")

    conc = ssub.add_parser("concentration")
    common(conc, 100)
    conc.add_argument("--n", type=int, default=2000)
    conc.add_argument("--d", type=int, default=50)
    conc.add_argument("--k", type=int, default=150)
    conc.add_argument("--alpha", type=float, default=0.25)
    conc.add_argument("--M", type=float, default=1.0)
    conc.add_argument("--n-random", type=int, default=50)
    conc.set_defaults(func=cmd_sim_concentration)

    lb = ssub.add_parser("lowerbound")
    common(lb, 20)
    lb.add_argument("--n", type=int, default=20_000)
    lb.add_argument("--r", type=float, default=0.55)
    lb.add_argument("--alpha", type=float, default=0.2)
    lb.add_argument("--s-override", type=int, default=None)
    lb.add_argument("--n-max", type=int, default=20_000)
    lb.add_argument("--M", type=float, default=1.0)
    lb.set_defaults(func=cmd_sim_lowerbound)

    mgf = ssub.add_parser("mgf")
    common(mgf, 1)
    mgf.add_argument("--t", type=_floats, default=[0.1, 0.3, 0.5])
    mgf.add_argument("--n", type=int, default=1_000_000, help="Monte Carlo samples")
    mgf.set_defaults(func=cmd_sim_mgf)

    audit = ssub.add_parser("audit")
    common(audit, 20)
    audit.add_argument("--n", type=int, default=5000)
    audit.add_argument("--d", type=int, default=100)
    audit.add_argument("--q", type=int, default=2)
    audit.add_argument("--k", type=int, default=300)
    audit.add_argument("--alpha", type=float, default=0.25)
    audit.add_argument("--M", type=float, default=2.0)
    audit.add_argument("--B", type=int, default=50)
    audit.add_argument("--beta", type=float, default=1.0)
    audit.add_argument("--mean-fn", default="additive-step")
    audit.add_argument("--threshold-scale", type=float, default=1.0)
    audit.set_defaults(func=cmd_sim_audit)

    cons = ssub.add_parser("consistency")
    common(cons, 10)
    cons.add_argument("--kind", choices=("uniform", "l2_rate"), default="uniform")
    cons.add_argument("--n", type=_ints, default=[2000, 8000, 32000], help="comma-separated sample sizes")
    cons.add_argument("--d", type=int, default=50)
    cons.add_argument("--q", type=int, default=2)
    cons.add_argument("--beta", type=float, default=1.0)
    cons.add_argument("--M", type=float, default=3.0)
    cons.add_argument("--B", type=int, default=10)
    cons.add_argument("--alpha", type=float, default=0.5)
    cons.add_argument("--mean-fn", default="ramp")
    cons.add_argument("--threshold-scale", type=float, default=1.0)
    cons.add_argument("--max-attempts", type=int, default=10)
    cons.add_argument("--threads", type=int, default=1)
    cons.set_defaults(func=cmd_sim_consistency)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (AdaconcError, ValueError) as exc:
        print(f"adaconc: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"adaconc: I/O error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
