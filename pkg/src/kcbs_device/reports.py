"""JSON-ready report builders behind the CLI commands."""

from __future__ import annotations

import math

import numpy as np

from .linalg import HermitianOperator, Ket, eigenvalues, max_eigenvalue, min_eigenvalue
from .measurement import (
    build_config1,
    check_similarity,
    completion_diagnostic,
    zx_povms,
)
from .quantum import (
    DensityState,
    closed_form_value,
    conditional_table,
    contextuality_value,
    first_outcome_probabilities,
    sequential_conditional,
)
from .scenario import (
    NORM_TOL,
    ORTHO_TOL,
    PROB_TOL,
    CycleScenario,
    ScenarioError,
    scenario_residuals,
    zx_example,
)

SPECTRAL_TOL = 1e-10


class InvariantViolation(RuntimeError):
    """An internal cross-check failed; the CLI maps this to exit code 3."""


def _nan_to_none(a):
    return [[None if math.isnan(x) else float(x) for x in row] for row in np.asarray(a)]


def validate_document(n: int, kets: list[Ket], probs: list[float]) -> dict:
    """Structural checks on a possibly invalid scenario; never raises on bad geometry."""
    if n < 5 or n % 2 == 0:
        raise ScenarioError(f"cycle length must be odd and >= 5, got {n}")
    if any(k.dim != 3 for k in kets):
        raise ScenarioError("scenario kets must have dimension 3")
    res = scenario_residuals(kets, probs)
    unit = [k.normalized() for k in kets]
    p = np.asarray(probs, dtype=float)
    w = p + np.roll(p, -1)
    projs = [np.outer(k.amplitudes, k.amplitudes.conj()) for k in unit]
    sum_e = HermitianOperator(sum(wi * P for wi, P in zip(w, projs)))
    k_min = [min_eigenvalue(HermitianOperator(np.eye(3) - projs[i] - projs[(i + 1) % n])) for i in range(n)]
    checks = {
        "ket_norms": {"max_residual": float(res["norm_residuals"].max()),
                      "ok": bool(res["norm_residuals"].max() <= NORM_TOL)},
        "adjacent_orthogonality": {"overlaps": res["adjacent_overlaps"].tolist(),
                                   "max": float(res["adjacent_overlaps"].max()),
                                   "ok": bool(res["adjacent_overlaps"].max() <= ORTHO_TOL)},
        "probabilities": {"sum_residual": res["prob_sum_residual"], "min": res["min_prob"],
                          "ok": bool(res["prob_sum_residual"] <= PROB_TOL and res["min_prob"] >= 0)},
        "config1_completeness": {"sum_E_spectrum": eigenvalues(sum_e).tolist(),
                                 "sum_E_max_eigenvalue": max_eigenvalue(sum_e),
                                 "ok": bool(max_eigenvalue(sum_e) <= 1 + SPECTRAL_TOL)},
        "config2_completion_psd": {"min_eigenvalues": k_min, "ok": bool(min(k_min) >= -SPECTRAL_TOL)},
    }
    report = {"n": n, "checks": checks, "pass": all(c["ok"] for c in checks.values())}
    if report["pass"]:
        report["completion_diagnostic"] = completion_diagnostic(CycleScenario(n, tuple(kets), tuple(probs)))
    return report


def quantum_report(sc: CycleScenario, rho: DensityState) -> dict:
    povm = build_config1(sc)
    table = conditional_table(sc, rho, povm)
    c = contextuality_value(sc)
    # independent route: explicit double sum of trace-evaluated conditionals
    c_sum = sum(sequential_conditional(sc, i, j) for i in range(sc.n) for j in range(sc.n))
    if abs(c - c_sum) > 1e-10:
        raise InvariantViolation(f"contextuality value routes disagree: {c!r} vs {c_sum!r}")
    out = {
        "n": sc.n,
        "probs": list(sc.probs),
        "labels": povm.labels,
        "first_outcome_probabilities": first_outcome_probabilities(sc, rho, povm).tolist(),
        "conditional_table": _nan_to_none(table),
        "C": c,
        "C_double_sum": c_sum,
    }
    if sc.n == 5 and sc.is_uniform:
        out["closed_form"] = closed_form_value()
        out["closed_form_residual"] = c - closed_form_value()
    return out


def similarity_report(s: float) -> dict:
    mz, mx, mzx = zx_povms(zx_example(s))
    z = check_similarity(mz, mzx)
    x = check_similarity(mx, mzx)
    expected = {"Z": s, "X": 1.0 - s}
    out = {"s": s, "Z_vs_ZX": z.to_dict(), "X_vs_ZX": x.to_dict(), "expected_scales": expected}
    for key, r in (("Z", z), ("X", x)):
        if not r.matched or abs(r.scale - expected[key]) > 1e-12:
            raise InvariantViolation(f"{key} vs ZX: expected scale {expected[key]!r}, got {r.to_dict()}")
    return out
