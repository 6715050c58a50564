"""Command-line entry point: ``kcbs-device <command> [flags]``.

Exit codes: 0 success (including soft warnings), 1 validation failed,
2 usage or input error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .linalg import HermitianOperator, LinalgError
from .measurement import MeasurementError
from .ontic import (
    MODES,
    EmptyModelClass,
    OnticModelError,
    OptimizerConfig,
    check_constraints,
    evaluate_C,
    maximize_C,
    verify_bound_chain,
)
from .quantum import DensityState, QuantumError, contextuality_value
from .reports import InvariantViolation, quantum_report, similarity_report, validate_document
from .scenario import (
    CycleScenario,
    ScenarioError,
    build_kcbs_scenario,
    build_ncycle_scenario,
    parse_scenario_document,
)
from .simulate import SimConfig, SimulationError, run_sequential

log = logging.getLogger("kcbs_device")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3
INPUT_ERRORS = (ScenarioError, MeasurementError, QuantumError, SimulationError, OnticModelError, LinalgError,
                EmptyModelClass, OSError, json.JSONDecodeError, ValueError)


class UsageError(ValueError):
    pass


def dumps(obj) -> str:
    # repr-based float formatting round-trips every double exactly
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def write_outputs(out_dir, files: dict, args, seed=None) -> list[str]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, content in files.items():
        (out / name).write_text(content if isinstance(content, str) else dumps(content))
        written.append(name)
    params = {k: v for k, v in vars(args).items() if k not in ("func", "out")}
    manifest = {
        "command": args.command,
        "parameters": params,
        "seed": seed,
        "artifact_version": __version__,
        "outputs": written,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    (out / "manifest.json").write_text(dumps(manifest))
    return written + ["manifest.json"]


def parse_probs(text: str | None, n: int):
    if text is None or text == "uniform":
        return "uniform"
    try:
        probs = tuple(float(x) for x in text.split(","))
    except ValueError as exc:
        raise UsageError(f"--probs must be comma-separated numbers: {text!r}") from exc
    if len(probs) != n:
        raise UsageError(f"--probs has {len(probs)} entries, scenario has {n} settings")
    return probs


def make_scenario(n: int, probs_text: str | None) -> CycleScenario:
    probs = parse_probs(probs_text, n)
    if n == 5:
        return build_kcbs_scenario(probs)
    return build_ncycle_scenario(n, probs)


def parse_state(text: str, sc: CycleScenario) -> DensityState:
    """'mixed', 'v<i>' (the i-th scenario ket) or a JSON file {"matrix": [[[re, im], ...], ...]}."""
    if text == "mixed":
        return DensityState.maximally_mixed(3)
    if text.startswith("v") and text[1:].isdigit():
        i = int(text[1:])
        if i >= sc.n:
            raise UsageError(f"state {text} out of range for n={sc.n}")
        return DensityState.pure(sc.kets[i])
    doc = json.loads(Path(text).read_text())
    m = np.array([[complex(re, im) for re, im in row] for row in doc["matrix"]])
    return DensityState(HermitianOperator(m))


def _fmt_table(labels, rows) -> str:
    head = "        " + "".join(f"{lbl:>10}" for lbl in labels)
    lines = [head]
    for lbl, row in zip(labels, rows):
        cells = "".join(f"{'-':>10}" if v is None else f"{v:10.6f}" for v in row)
        lines.append(f"{lbl:>8}{cells}")
    return "\n".join(lines)


def cmd_validate(args) -> int:
    if args.kcbs:
        sc = build_kcbs_scenario()
        n, kets, probs = sc.n, list(sc.kets), list(sc.probs)
        source = "kcbs"
    elif args.scenario:
        n, kets, probs = parse_scenario_document(json.loads(Path(args.scenario).read_text()))
        source = args.scenario
    else:
        raise UsageError("give a scenario file or --kcbs")
    report = {"source": source, **validate_document(n, kets, probs)}
    if args.out:
        write_outputs(args.out, {"validation.json": report}, args)
    if args.json:
        sys.stdout.write(dumps(report))
    else:
        for name, chk in report["checks"].items():
            print(f"{'PASS' if chk['ok'] else 'FAIL'}  {name}")
        print(f"max adjacent overlap: {report['checks']['adjacent_orthogonality']['max']:.3e}")
        print(f"sum E max eigenvalue: {report['checks']['config1_completeness']['sum_E_max_eigenvalue']:.12f}")
        diag = report.get("completion_diagnostic")
        if diag:
            print(f"K spectrum (complement): {np.round(diag['K_spectrum'], 6).tolist()}")
            print(f"doubled-mixture completion: total deviates from identity by {diag['doubled_total_deviation']:.6f}")
        print("overall:", "PASS" if report["pass"] else "FAIL")
    return EXIT_OK if report["pass"] else EXIT_FAIL


def cmd_quantum_value(args) -> int:
    sc = make_scenario(args.n, args.probs)
    report = quantum_report(sc, parse_state(args.state, sc))
    if args.out:
        write_outputs(args.out, {"quantum_value.json": report}, args)
    if args.json:
        sys.stdout.write(dumps(report))
        return EXIT_OK
    print("conditional table p(second | first), rows = first outcome")
    print(_fmt_table(report["labels"], report["conditional_table"]))
    print(f"C = {report['C']:.12f}")
    if "closed_form" in report:
        print(f"2(4 - sqrt 5) = {report['closed_form']:.12f}  residual {report['closed_form_residual']:.3e}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    sc = make_scenario(args.n, args.probs)
    cfg = SimConfig(shots=args.shots, seed=args.seed, scenario=sc, initial_state=parse_state(args.state, sc))
    res = run_sequential(cfg, workers=args.workers)
    exact = contextuality_value(sc)
    summary = res.to_dict()
    summary["exact_value"] = exact
    summary["z_score"] = (res.c_estimate - exact) / res.c_stderr if res.c_stderr > 0 else None
    write_outputs(args.out, {"result.json": summary, "joint_counts.csv": res.to_csv()}, args, seed=args.seed)
    if args.json:
        sys.stdout.write(dumps(summary))
    else:
        print(f"C estimate = {res.c_estimate:.6f} +/- {res.c_stderr:.6f}  (exact {exact:.6f})")
        if summary["z_score"] is not None:
            print(f"z = {summary['z_score']:+.3f}")
        print(f"results written to {args.out}")
    if res.status != "ok":
        print(f"warning: {res.status}; {len(res.undefined_cells)} conditional cells undefined, "
              f"low-count first outcomes {res.low_count_rows}", file=sys.stderr)
    return EXIT_OK


def cmd_nc_bound(args) -> int:
    sc = make_scenario(5, args.probs)
    if args.mode not in MODES:
        raise UsageError(f"unknown mode {args.mode!r}; choose from {sorted(MODES)}")
    mode = MODES[args.mode]
    cfg = OptimizerConfig(ontic_states=args.ontic_states, restarts=args.restarts, mode=mode, iters=args.iters,
                          tol=args.tol, seed=args.seed, grid_starts=args.grid_starts, workers=args.workers)
    res = maximize_C(sc, cfg)
    m = res.best_model
    rerun = check_constraints(m, sc, mode, tol=cfg.tol)
    if res.feasible and not rerun.feasible(cfg.tol):
        raise InvariantViolation("optimizer reported a feasible model that fails the independent check")
    summary = {
        "config": cfg.to_dict(),
        **res.to_dict(),
        "margin": 3.20 - res.best_value if res.feasible else None,
        "normalized_variant_value": evaluate_C(m, sc, normalized=True),
    }
    files = {"result.json": summary, "best_model.json": m.to_dict(), "constraint_report.json": rerun.to_dict()}
    if sc.is_uniform:
        files["bound_chain.json"] = verify_bound_chain(m, sc).to_dict()
    write_outputs(args.out, files, args, seed=args.seed)
    if args.json:
        sys.stdout.write(dumps(summary))
    elif res.feasible:
        print(f"best C = {res.best_value:.9f}  margin to 3.20 = {summary['margin']:.9f}  "
              f"({res.feasible_restarts}/{res.restarts_used} restarts feasible)")
    else:
        print(f"no feasible model in {res.restarts_used} restarts "
              f"(least worst violation {res.report.worst_violation:.3e}); feasible = false")
    return EXIT_OK


def cmd_similarity(args) -> int:
    if not 0.0 <= args.s <= 1.0:
        raise UsageError(f"--s must lie in [0, 1], got {args.s}")
    report = similarity_report(args.s)
    if args.out:
        write_outputs(args.out, {"similarity.json": report}, args)
    if args.json:
        sys.stdout.write(dumps(report))
        return EXIT_OK
    for key in ("Z_vs_ZX", "X_vs_ZX"):
        r = report[key]
        pairs = ", ".join(f"{a}->{b}" for a, b in r["outcome_pairing"])
        print(f"{key}: matched={r['matched']} scale={r['scale']!r} pairing [{pairs}]")
    if args.s == 1.0:
        print("s = 1: M_Z and M_ZX agree outcome by outcome (equivalence)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kcbs-device", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default=None):
        sp.add_argument("--json", action="store_true", help="print the JSON report instead of a table")
        sp.add_argument("--out", default=out_default, help="directory for result files and manifest")

    v = sub.add_parser("validate", help="check orthogonality and completeness of a scenario")
    v.add_argument("scenario", nargs="?", help="scenario JSON file")
    v.add_argument("--kcbs", action="store_true", help="validate the built-in KCBS scenario")
    common(v)
    v.set_defaults(func=cmd_validate)

    q = sub.add_parser("quantum-value", help="exact conditional table and C")
    q.add_argument("--n", type=int, default=5)
    q.add_argument("--probs", default="uniform", help="'uniform' or comma-separated p_i")
    q.add_argument("--state", default="mixed", help="'mixed', 'v<i>' or a density-matrix JSON file")
    common(q)
    q.set_defaults(func=cmd_quantum_value)

    s = sub.add_parser("simulate", help="Monte Carlo of the device used twice in a row")
    s.add_argument("--shots", type=int, default=1_000_000)
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--n", type=int, default=5)
    s.add_argument("--probs", default="uniform")
    s.add_argument("--state", default="mixed")
    s.add_argument("--workers", type=int, default=None)
    common(s, out_default="runs/simulate")
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("nc-bound", help="search ontic models for the largest C")
    b.add_argument("--ontic-states", type=int, default=4)
    b.add_argument("--restarts", type=int, default=64)
    b.add_argument("--mode", default="paper-faithful", help=f"one of {', '.join(sorted(MODES))}")
    b.add_argument("--iters", type=int, default=300)
    b.add_argument("--tol", type=float, default=1e-8)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--probs", default="uniform")
    b.add_argument("--grid-starts", action="store_true", help="draw starting responses from {0, 1/4, ..., 1}")
    b.add_argument("--workers", type=int, default=None)
    common(b, out_default="runs/nc-bound")
    b.set_defaults(func=cmd_nc_bound)

    m = sub.add_parser("similarity", help="recover the scale relating M_Z, M_X and M_ZX(s)")
    m.add_argument("--s", type=float, required=True)
    common(m)
    m.set_defaults(func=cmd_similarity)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InvariantViolation as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
