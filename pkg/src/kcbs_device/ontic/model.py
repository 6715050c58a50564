"""Finite ontic models for the cyclic device and their noncontextuality constraints.

An ontic model is a probability vector ``mu`` over ``K`` ontic states with a
response ``xi[k, i]`` for outcome ``Pi_i`` and ``xiK[k, i]`` for the
completion outcome of setting ``i``.  Measure-level quantities are weighted
sums, ``<f> = sum_k mu_k f(k)``.  Pointwise constraints are imposed on the
support of ``mu`` only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..scenario import CycleScenario

ENTRY_TOL = 1e-10
OVERLAP_CAP = 0.5


class OnticModelError(ValueError):
    pass


class EmptyModelClass(OnticModelError):
    """The requested constraint class admits no model at all."""


@dataclass(frozen=True, eq=False)
class OnticModel:
    mu: np.ndarray
    xi: np.ndarray
    xiK: np.ndarray = None

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float)
        xi = np.array(self.xi, dtype=float)
        if mu.ndim != 1 or xi.ndim != 2 or xi.shape[0] != mu.shape[0] or mu.size == 0:
            raise OnticModelError(f"inconsistent shapes mu{mu.shape} xi{xi.shape}")
        n = xi.shape[1]
        if self.xiK is None:
            xik = 1.0 - xi - np.roll(xi, -1, axis=1)
            xik[np.abs(xik) <= ENTRY_TOL] = 0.0
        else:
            xik = np.array(self.xiK, dtype=float)
            if xik.shape != xi.shape:
                raise OnticModelError(f"xiK shape {xik.shape} does not match xi {xi.shape}")
        if n < 3:
            raise OnticModelError("need at least three settings")
        for name, arr in (("mu", mu), ("xi", xi), ("xiK", xik)):
            if not np.all(np.isfinite(arr)):
                raise OnticModelError(f"{name} has non-finite entries")
            if arr.min() < -ENTRY_TOL or arr.max() > 1 + ENTRY_TOL:
                raise OnticModelError(f"{name} entries must lie in [0, 1]")
        if abs(mu.sum() - 1.0) > ENTRY_TOL:
            raise OnticModelError(f"weights sum to {mu.sum()!r}")
        norm = xi + np.roll(xi, -1, axis=1) + xik
        if np.max(np.abs(norm - 1.0)) > ENTRY_TOL:
            raise OnticModelError("response functions of some setting do not sum to 1")
        for a in (mu, xi, xik):
            a.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "xiK", xik)

    @property
    def num_states(self) -> int:
        return self.mu.shape[0]

    @property
    def n(self) -> int:
        return self.xi.shape[1]

    @property
    def support(self) -> np.ndarray:
        return self.mu > 0

    def overlap(self, shift: int) -> np.ndarray:
        """<xi_i xi_{i+shift}> for every i."""
        return self.mu @ (self.xi * np.roll(self.xi, -shift, axis=1))

    def overlap_matrix(self) -> np.ndarray:
        return (self.xi.T * self.mu) @ self.xi

    def to_dict(self) -> dict:
        return {"mu": self.mu.tolist(), "xi": self.xi.tolist(), "xiK": self.xiK.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> OnticModel:
        try:
            return cls(np.array(doc["mu"]), np.array(doc["xi"]), np.array(doc["xiK"]))
        except KeyError as exc:
            raise OnticModelError(f"malformed model document: missing {exc}") from exc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))


@dataclass(frozen=True)
class ConstraintMode:
    exhaustive: bool = True
    overlap_cap: bool = True
    equal_overlap: bool = False

    def to_dict(self) -> dict:
        return {"exhaustive": self.exhaustive, "overlap_cap": self.overlap_cap, "equal_overlap": self.equal_overlap}


MODES = {
    "paper-faithful": ConstraintMode(exhaustive=True, overlap_cap=True),
    "unconstrained-overlap": ConstraintMode(exhaustive=False, overlap_cap=False),
    "overlap-cap": ConstraintMode(exhaustive=False, overlap_cap=True),
    "exhaustive-only": ConstraintMode(exhaustive=True, overlap_cap=False),
    "symmetric": ConstraintMode(exhaustive=False, overlap_cap=True, equal_overlap=True),
}
PAPER_FAITHFUL = MODES["paper-faithful"]


@dataclass
class ConstraintReport:
    mode: ConstraintMode
    completeness: np.ndarray  # per state: sum_i (p_i + p_{i+1}) xi_i
    completeness_ok: bool
    adjacent_overlap: np.ndarray
    nn_overlaps: np.ndarray
    exhaustiveness_residual: float
    exhaustiveness_ok: bool
    overlap_cap_ok: bool
    equal_overlap_residual: float
    worst_violation: float
    residuals: dict = field(default_factory=dict)

    def feasible(self, tol: float = 1e-8) -> bool:
        return self.worst_violation <= tol

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.to_dict(),
            "completeness": self.completeness.tolist(),
            "completeness_ok": self.completeness_ok,
            "adjacent_overlap": self.adjacent_overlap.tolist(),
            "nn_overlaps": self.nn_overlaps.tolist(),
            "exhaustiveness_residual": self.exhaustiveness_residual,
            "exhaustiveness_ok": self.exhaustiveness_ok,
            "overlap_cap_ok": self.overlap_cap_ok,
            "equal_overlap_residual": self.equal_overlap_residual,
            "worst_violation": self.worst_violation,
            "residuals": self.residuals,
        }


def _check_sizes(m: OnticModel, sc: CycleScenario) -> None:
    if m.n != sc.n:
        raise OnticModelError(f"model has {m.n} settings, scenario has {sc.n}")


def check_constraints(m: OnticModel, sc: CycleScenario, mode: ConstraintMode = PAPER_FAITHFUL,
                      tol: float = 1e-8) -> ConstraintReport:
    """Evaluate every constraint; only those enabled by ``mode`` enter ``worst_violation``.

    Always enforced: per-state completeness of the mixed device and zero
    overlap between adjacent response functions.
    """
    _check_sizes(m, sc)
    sup = m.support
    w = sc.effect_weights()
    comp = m.xi @ w
    comp_res = float(np.max(np.where(sup, comp - 1.0, 0.0)).clip(0.0))
    adj = m.overlap(1)
    adj_res = float(np.max(np.abs(adj)))
    nn = m.overlap(2)
    exh_res = float(np.max(np.where(sup[:, None], m.xiK, 0.0)))
    cap_res = float(np.max(nn - OVERLAP_CAP).clip(0.0))
    # <xi_i xi_{i+3}> = nn[i+3]
    eq_res = float(np.max(np.abs(nn - np.roll(nn, -3))))
    residuals = {"completeness": comp_res, "adjacent_overlap": adj_res}
    if mode.exhaustive:
        residuals["exhaustiveness"] = exh_res
    if mode.overlap_cap:
        residuals["overlap_cap"] = cap_res
    if mode.equal_overlap:
        residuals["equal_overlap"] = eq_res
    return ConstraintReport(
        mode=mode,
        completeness=comp,
        completeness_ok=comp_res <= tol,
        adjacent_overlap=adj,
        nn_overlaps=nn,
        exhaustiveness_residual=exh_res,
        exhaustiveness_ok=exh_res <= tol,
        overlap_cap_ok=cap_res <= tol,
        equal_overlap_residual=eq_res,
        worst_violation=max(residuals.values()),
        residuals=residuals,
    )


def c_from_overlaps(overlaps: np.ndarray, probs) -> float:
    """sum_{i,j} 2 p_i O[i, j] for a matrix of pairwise overlaps O."""
    p = np.asarray(probs, dtype=float)
    return float(np.sum(2.0 * p[:, None] * np.asarray(overlaps)))


def evaluate_C(m: OnticModel, sc: CycleScenario, normalized: bool = False) -> float:
    """Ontic value of the sequential sum.

    Literal form: sum_{i,j} 2 p_i <xi_i xi_j>.  With ``normalized`` each
    term is divided by the first-outcome marginal <xi_j> (terms with a zero
    marginal are dropped); that variant is for sensitivity studies only.
    """
    _check_sizes(m, sc)
    o = m.overlap_matrix()
    if normalized:
        marg = m.mu @ m.xi
        o = np.divide(o, marg[None, :], out=np.zeros_like(o), where=marg[None, :] > 0)
    return c_from_overlaps(o, sc.probs)


def random_feasible_model(rng: np.random.Generator, num_states: int, sc: CycleScenario,
                          mode: ConstraintMode) -> OnticModel:
    """Draw a random model satisfying every constraint of ``mode`` exactly.

    Each state's support is a random independent set of the cycle, which is
    what zero adjacent overlap forces pointwise.
    """
    n = sc.n
    if mode.exhaustive:
        raise EmptyModelClass(
            f"pointwise exhaustiveness on an odd {n}-cycle forces every response to 1/2, "
            "so adjacent overlaps are 1/4 and the class is empty"
        )
    if mode.equal_overlap and num_states % n:
        raise OnticModelError(f"symmetric sampling needs a multiple of {n} states")
    base = num_states // n if mode.equal_overlap else num_states
    w = sc.effect_weights()
    xi = np.zeros((base, n))
    for k in range(base):
        chosen = np.zeros(n, dtype=bool)
        for i in rng.permutation(n):
            if not chosen[(i - 1) % n] and not chosen[(i + 1) % n] and rng.random() < 0.7:
                chosen[i] = True
        xi[k, chosen] = rng.random(chosen.sum())
        load = xi[k] @ w
        if load > 1:
            xi[k] /= load
    mu = rng.dirichlet(np.ones(base))
    if mode.equal_overlap:
        xi = np.concatenate([np.roll(xi, r, axis=1) for r in range(n)])
        mu = np.tile(mu, n) / n
    if mode.overlap_cap:
        top = float(np.max(mu @ (xi * np.roll(xi, -2, axis=1))))
        if top > OVERLAP_CAP:
            xi *= np.sqrt(OVERLAP_CAP / top) * (1 - 1e-12)
    return OnticModel(mu, xi)
