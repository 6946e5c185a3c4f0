"""Command-line interface.

Subcommands map one-to-one onto the library layers: `qfim` and
`variance-curve` evaluate the single-shot information quantities, `schedule`
plans the adaptive iteration sequence, `robustness` quantifies control-error
penalties (a `single` deviation grid or a `total` Monte Carlo), and
`simulate` runs the full protocol.

Output conventions: JSON documents follow one record shape (schema_version,
command, params, rows, plus command-specific sections) and serialize floats
with repr, the shortest round-trip form; CSV uses a header row, comma
separators, LF line endings, UTF-8. Vector-valued flags take comma-separated
components (`--alpha 0.1,0.2,0.3`) and deviation grids take START:STOP:STEP.
Outputs contain no timestamps, so a rerun with the same arguments is
byte-identical. Stochastic subcommands require an explicit --seed. Exit
codes: 0 on success, 2 on domain or argument validation errors, 3 on
internal invariant failures.
"""

import argparse
import csv
import dataclasses
import json
import os
import sys

import numpy as np

from . import adaptive, robustness, variance
from .core import get_model
from .errors import DomainError, EstimationError, SingularQfim
from .qfim import (
    covariance_from_qfim,
    qfim_entangled,
    qfim_weighted_initial,
    scalar_bound,
    weak_commutativity_residual,
)
from .simulator import ExperimentConfig, run_repetitions

SCHEMA_VERSION = 1


def _jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _emit_json(doc: dict, stream) -> None:
    payload = {"schema_version": SCHEMA_VERSION}
    payload.update(_jsonable(doc))
    stream.write(json.dumps(payload, indent=2))
    stream.write("\n")


def _csv_writer(stream):
    return csv.writer(stream, lineterminator="\n")


def _fmt(x: float) -> str:
    return repr(float(x))


def _triple(text: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated values, e.g. 0.1,0.2,0.3")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a numeric triple: {text!r}")


def _grid_spec(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected START:STOP:STEP")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a numeric range: {text!r}")
    if not step > 0.0 or stop < start:
        raise argparse.ArgumentTypeError("need STOP >= START and STEP > 0")
    return np.arange(start, stop + 0.5 * step, step)


def _resolve_threads(args) -> int:
    if args.threads is not None:
        value = args.threads
    else:
        raw = os.environ.get("HAMEST_THREADS", "1")
        try:
            value = int(raw)
        except ValueError:
            raise DomainError(f"HAMEST_THREADS must be an integer, got {raw!r}")
    if value < 1:
        raise DomainError("thread count must be >= 1")
    return value


def _open_out(path):
    return open(path, "w", encoding="utf-8", newline="") if path else sys.stdout


def _cmd_qfim(args) -> int:
    model = get_model(args.model)
    if args.weight is None:
        f = qfim_entangled(model, args.alpha, args.t)
    else:
        f = qfim_weighted_initial(model, args.alpha, args.t, args.weight)
    cov = None
    bound = None
    singular_reason = None
    try:
        cov = covariance_from_qfim(f, 1).m
        bound = scalar_bound(np.eye(3), f, 1)
    except SingularQfim as exc:
        singular_reason = str(exc)
    if args.format == "csv":
        w = _csv_writer(sys.stdout)
        w.writerow(["section", "i", "c1", "c2", "c3"])
        for i in range(3):
            w.writerow(["qfim", i + 1] + [_fmt(v) for v in f.m[i]])
        if cov is not None:
            for i in range(3):
                w.writerow(["covariance", i + 1] + [_fmt(v) for v in cov[i]])
            w.writerow(["scalar_bound", 1, _fmt(bound), "", ""])
    else:
        doc = {
            "command": "qfim",
            "params": {
                "model": args.model,
                "alpha": list(args.alpha),
                "t": args.t,
                "weight": args.weight if args.weight is not None else 0.5,
            },
            "rows": f.m,
            "covariance": cov,
            "scalar_bound": bound,
            "singular": singular_reason is not None,
            "commutativity_residual": weak_commutativity_residual(model, args.alpha, args.t),
        }
        _emit_json(doc, sys.stdout)
    if singular_reason is not None:
        print(f"error: SingularQfim: {singular_reason}", file=sys.stderr)
        return 2
    return 0


def _cmd_variance_curve(args) -> int:
    model = get_model(args.model)
    if args.points < 2:
        raise DomainError("need at least 2 grid points")
    if not 0.0 < args.t_start < args.t_stop:
        raise DomainError("need 0 < t-start < t-stop")
    grid = np.linspace(args.t_start, args.t_stop, args.points)
    rows = variance.variance_curve(model, args.alpha, grid, args.n)
    out = _open_out(args.out)
    try:
        w = _csv_writer(out)
        w.writerow(["t", "v1", "v2", "v3", "envelope", "infimum", "flag"])
        for r in rows:
            w.writerow(
                [_fmt(r.t), _fmt(r.v1), _fmt(r.v2), _fmt(r.v3), _fmt(r.envelope), _fmt(r.infimum), r.flag]
            )
    finally:
        if args.out:
            out.close()
    return 0


def _cmd_schedule(args) -> int:
    sched = adaptive.plan_schedule(args.v0, args.n, target_v=args.target, target_m=args.m)
    scalars = (
        "v0",
        "n",
        "m",
        "target_v",
        "g0",
        "v_m",
        "t_tot",
        "t_tot_sequential",
        "exact_v",
        "large_n_v",
        "v_oc",
        "ratio",
        "asymptotic_ratio",
    )
    doc = {
        "command": "schedule",
        "params": {"v0": args.v0, "n": args.n, "target": args.target, "m": args.m},
        "rows": list(sched.records),
        "schedule": {name: getattr(sched, name) for name in scalars},
    }
    _emit_json(doc, sys.stdout)
    return 0


def _cmd_robustness_single(args) -> int:
    out = _open_out(args.out)
    try:
        w = _csv_writer(out)
        w.writerow(["D", "R", "pdf"])
        for d in args.grid:
            w.writerow([_fmt(d), _fmt(robustness.ratio_single(d)), _fmt(robustness.deviation_pdf(d))])
    finally:
        if args.out:
            out.close()
    return 0


def _cmd_robustness_total(args) -> int:
    summary = robustness.robustness_mc(
        args.m, args.samples, args.seed, workers=_resolve_threads(args)
    )
    out = _open_out(args.out)
    try:
        w = _csv_writer(out)
        w.writerow(["statistic", "value"])
        w.writerow(["mean", _fmt(summary.mean)])
        w.writerow(["p_below_one", _fmt(summary.p_below_one)])
        for decile, value in zip(range(10, 100, 10), summary.deciles):
            w.writerow([f"decile_{decile}", _fmt(value)])
    finally:
        if args.out:
            out.close()
    return 0


def _cmd_simulate(args) -> int:
    config = ExperimentConfig(
        beta_true=args.beta0,
        m=args.m,
        n=args.n,
        backend=args.backend,
        seed=args.seed,
        time_refinement=args.refine,
        extra_trials=args.extra_trials,
        beta0_bound=args.bound,
        beta0_guess=args.guess,
    )
    traces = run_repetitions(config, args.reps, workers=_resolve_threads(args))
    errors = [t.realized_sq_error for t in traces]
    doc = {
        "command": "simulate",
        "params": config,
        "seed": config.seed,
        "rows": [
            {
                "rep": t.rep,
                "beta_hat": list(t.beta_hat),
                "realized_sq_error": t.realized_sq_error,
                "planned_v_m": t.planned_v_m,
                "aborted": t.aborted,
                "iterations": list(t.iterations),
            }
            for t in traces
        ],
        "summary": {
            "mean_sq_error": float(np.mean(errors)),
            "planned_v_m": traces[0].planned_v_m,
            "ratio": float(np.mean(errors) / traces[0].planned_v_m),
        },
    }
    _emit_json(doc, sys.stdout)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            w = _csv_writer(fh)
            w.writerow(["rep", "beta_hat_1", "beta_hat_2", "beta_hat_3", "realized_sq_error"])
            for t in traces:
                w.writerow(
                    [t.rep, _fmt(t.beta_hat[0]), _fmt(t.beta_hat[1]), _fmt(t.beta_hat[2]), _fmt(t.realized_sq_error)]
                )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hamest",
        description="Adaptive estimation of a qubit Hamiltonian's field components.",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="worker threads (default: HAMEST_THREADS env var, else 1)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("qfim", help="quantum Fisher information at a working point")
    p.add_argument("--model", default="pauli", help="model name (pauli or btp)")
    p.add_argument("--alpha", type=_triple, required=True, metavar="A1,A2,A3")
    p.add_argument("--t", type=float, required=True, help="evolution time")
    p.add_argument("--weight", type=float, default=None, help="initial-state weight x in [0, 1]")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=_cmd_qfim)

    p = sub.add_parser("variance-curve", help="estimator variances on a time grid (CSV)")
    p.add_argument("--model", default="pauli")
    p.add_argument("--alpha", type=_triple, required=True, metavar="A1,A2,A3")
    p.add_argument("--n", type=int, required=True, help="trials per point")
    p.add_argument("--t-start", type=float, required=True)
    p.add_argument("--t-stop", type=float, required=True)
    p.add_argument("--points", type=int, required=True)
    p.add_argument("--out", default=None, help="write CSV here instead of stdout")
    p.set_defaults(func=_cmd_variance_curve)

    p = sub.add_parser("schedule", help="plan the adaptive iteration schedule (JSON)")
    p.add_argument("--v0", type=float, required=True, help="initial variance scale")
    p.add_argument("--n", type=int, required=True, help="trials per iteration")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--target", type=float, default=None, help="precision goal")
    g.add_argument("--m", type=int, default=None, help="iteration count")
    p.set_defaults(func=_cmd_schedule)

    p = sub.add_parser("robustness", help="control-error penalties (CSV)")
    rsub = p.add_subparsers(dest="mode", required=True)
    ps = rsub.add_parser("single", help="per-iteration penalty over a deviation grid")
    ps.add_argument("--grid", type=_grid_spec, required=True, metavar="START:STOP:STEP")
    ps.add_argument("--out", default=None, help="write CSV here instead of stdout")
    ps.set_defaults(func=_cmd_robustness_single)
    pt = rsub.add_parser("total", help="Monte Carlo of the whole-process penalty")
    pt.add_argument("--m", type=int, required=True, help="iteration count")
    pt.add_argument("--samples", type=int, required=True)
    pt.add_argument("--seed", type=int, required=True)
    pt.add_argument("--out", default=None, help="write CSV here instead of stdout")
    pt.set_defaults(func=_cmd_robustness_total)

    p = sub.add_parser("simulate", help="run the adaptive protocol end to end (JSON)")
    p.add_argument("--beta0", type=_triple, required=True, metavar="B1,B2,B3")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--backend", choices=("gaussian", "bell"), default="gaussian")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--refine", action="store_true", help="re-derive times from fresh estimates")
    p.add_argument("--extra-trials", type=int, default=None)
    p.add_argument("--bound", type=float, default=None, help="prior bound on |beta0|")
    p.add_argument("--guess", type=_triple, default=None, metavar="B1,B2,B3", help="prior field guess")
    p.add_argument("--csv", default=None, help="also write a per-rep summary CSV here")
    p.set_defaults(func=_cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EstimationError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
