"""Multistart search for the largest ontic value of C under a constraint mode.

Each restart alternates two blocks:

* weights: a linear program in ``mu`` over the simplex (overlap cap and
  equal-overlap constraints kept hard, adjacent overlap penalized);
* responses: projected gradient ascent on each row of ``xi``, projecting onto
  the per-state polytope (box, setting normalization, device completeness,
  optional exhaustiveness) with the measure-level constraints penalized.

The penalty weight grows geometrically.  A final polish zeroes vanishing
adjacent products, re-solves the weight LP with every measure-level
constraint hard, and the result is re-checked from scratch.  This is a local
method; the restarts and the independent feasibility check are what make the
reported value trustworthy, not any convergence guarantee.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linprog, minimize

from ..scenario import CycleScenario
from .model import (
    OVERLAP_CAP,
    PAPER_FAITHFUL,
    ConstraintMode,
    ConstraintReport,
    OnticModel,
    check_constraints,
    evaluate_C,
)

log = logging.getLogger(__name__)

GRID = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
WORKERS_ENV = "KCBS_DEVICE_MAX_WORKERS"


@dataclass(frozen=True)
class OptimizerConfig:
    ontic_states: int = 4
    restarts: int = 64
    mode: ConstraintMode = PAPER_FAITHFUL
    iters: int = 300
    tol: float = 1e-8
    seed: int = 0
    step: float = 0.2
    penalty: float = 1.0
    penalty_growth: float = 1.03
    lp_every: int = 10
    dykstra_sweeps: int = 12
    polish_threshold: float = 1e-3
    refine_rounds: int = 2
    grid_starts: bool = False
    workers: int | None = None

    def __post_init__(self):
        if self.ontic_states < 1 or self.restarts < 1 or self.iters < 1:
            raise ValueError("ontic_states, restarts and iters must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "mode"}
        d["mode"] = self.mode.to_dict()
        return d


@dataclass
class OptResult:
    best_model: OnticModel
    best_value: float
    restarts_used: int
    feasible: bool
    report: ConstraintReport
    best_restart: int
    restart_values: list = field(default_factory=list)  # None for infeasible restarts

    @property
    def feasible_restarts(self) -> int:
        return sum(v is not None for v in self.restart_values)

    def to_dict(self) -> dict:
        return {
            "best_value": self.best_value,
            "feasible": self.feasible,
            "restarts_used": self.restarts_used,
            "feasible_restarts": self.feasible_restarts,
            "best_restart": self.best_restart,
            "worst_violation": self.report.worst_violation,
            "restart_values": self.restart_values,
        }


class _RowPolytope:
    """Per-state feasible set for the response rows; all rows share it."""

    def __init__(self, sc: CycleScenario, exhaustive: bool, sweeps: int):
        n = sc.n
        self.n = n
        self.sweeps = sweeps
        # half-spaces a.x <= 1: setting normalization pairs, then device completeness
        pairs = np.zeros((n, n))
        for i in range(n):
            pairs[i, i] = pairs[i, (i + 1) % n] = 1.0
        self.halfspaces = np.vstack([pairs, sc.effect_weights()[None, :]])
        self.fixed = None
        if exhaustive:
            # xi_i + xi_{i+1} = 1 for all i; on an odd cycle the solution is unique
            self.fixed = np.linalg.solve(pairs, np.ones(n))

    def project(self, x: np.ndarray) -> np.ndarray:
        if self.fixed is not None:
            return np.broadcast_to(self.fixed, x.shape).copy()
        H = self.halfspaces
        hn = np.sum(H * H, axis=1)
        incr = np.zeros((H.shape[0] + 1,) + x.shape)
        for _ in range(self.sweeps):
            y = x + incr[0]
            z = np.clip(y, 0.0, 1.0)
            incr[0] = y - z
            x = z
            for h in range(H.shape[0]):
                y = x + incr[h + 1]
                over = (y @ H[h] - 1.0).clip(0.0)
                z = y - np.outer(over / hn[h], H[h])
                incr[h + 1] = y - z
                x = z
        return self.repair(x)

    def repair(self, x: np.ndarray) -> np.ndarray:
        """Exact feasibility by clipping and row rescaling (all constraints are a.x <= 1, a >= 0)."""
        x = np.clip(x, 0.0, 1.0)
        load = (x @ self.halfspaces.T).max(axis=1)
        scale = np.where(load > 1.0, 1.0 / np.maximum(load, 1e-300), 1.0)
        return x * scale[:, None]


def _pair_products(xi: np.ndarray, shift: int) -> np.ndarray:
    return xi * np.roll(xi, -shift, axis=1)


def _weight_lp(value: np.ndarray, xi: np.ndarray, mode: ConstraintMode, hard_adjacent: bool):
    """Maximize value . mu over the simplex subject to the mode's measure-level constraints."""
    k, n = xi.shape
    a_ub, b_ub, a_eq, b_eq = [], [], [np.ones(k)], [1.0]
    nn = _pair_products(xi, 2)  # column i: xi_i xi_{i+2} per state
    if mode.overlap_cap:
        a_ub.extend(nn.T)
        b_ub.extend([OVERLAP_CAP] * n)
    if mode.equal_overlap:
        for i in range(n):
            a_eq.append(nn[:, i] - nn[:, (i + 3) % n])
            b_eq.append(0.0)
    if hard_adjacent:
        a_eq.append(_pair_products(xi, 1).sum(axis=1))
        b_eq.append(0.0)
    res = linprog(
        -value,
        A_ub=np.array(a_ub) if a_ub else None,
        b_ub=np.array(b_ub) if b_ub else None,
        A_eq=np.array(a_eq),
        b_eq=np.array(b_eq),
        bounds=[(0.0, None)] * k,
        method="highs",
    )
    if res.status != 0:
        return None
    mu = np.clip(res.x, 0.0, None)
    return mu / mu.sum()


def _objective_matrix(sc: CycleScenario) -> np.ndarray:
    p = np.asarray(sc.probs)
    w = np.repeat(2.0 * p[:, None], sc.n, axis=1)  # term 2 p_i xi_i xi_j
    return w + w.T


def _penalty_gradient(xi: np.ndarray, mu: np.ndarray, mode: ConstraintMode, rho: float) -> np.ndarray:
    """Gradient of the penalty terms, divided through by each state's weight."""
    g = -rho * (np.roll(xi, -1, axis=1) + np.roll(xi, 1, axis=1))
    nn = mu @ _pair_products(xi, 2)
    coef = np.zeros(xi.shape[1])
    if mode.overlap_cap:
        coef += 2 * (nn - OVERLAP_CAP).clip(0.0)
    if mode.equal_overlap:
        d = nn - np.roll(nn, -3)
        coef += 2 * (d - np.roll(d, 3))
    if coef.any():
        # d<xi_i xi_{i+2}>/d xi_k = mu_k (xi_{k,i+2} e_i + xi_{k,i} e_{i+2})
        g -= 10 * rho * (coef * np.roll(xi, -2, axis=1) + np.roll(coef * xi, 2, axis=1))
    return g


def _refine_rows(xi: np.ndarray, mu: np.ndarray, sc: CycleScenario, mode: ConstraintMode,
                 poly: _RowPolytope) -> np.ndarray:
    """Local solve over the nonzero entries of xi with every constraint hard and mu fixed."""
    free = xi > 0
    if not free.any():
        return xi
    Q = _objective_matrix(sc)
    n = sc.n
    H = poly.halfspaces

    def unpack(z):
        x = np.zeros_like(xi)
        x[free] = z
        return x

    def neg_obj(z):
        x = unpack(z)
        return -float(mu @ (x @ Q * x).sum(axis=1)) / 2

    def neg_grad(z):
        x = unpack(z)
        return -(mu[:, None] * (x @ Q))[free]

    cons = [{"type": "ineq", "fun": lambda z: (1.0 - unpack(z) @ H.T).ravel()}]
    if mode.overlap_cap:
        cons.append({"type": "ineq", "fun": lambda z: OVERLAP_CAP - mu @ _pair_products(unpack(z), 2)})
    if mode.equal_overlap:
        def spread(z):
            nn = mu @ _pair_products(unpack(z), 2)
            return (nn - np.roll(nn, -3))[: n - 1]
        cons.append({"type": "eq", "fun": spread})
    res = minimize(neg_obj, xi[free], jac=neg_grad, method="SLSQP", bounds=[(0.0, 1.0)] * int(free.sum()),
                   constraints=cons, options={"maxiter": 200, "ftol": 1e-14})
    cand = poly.repair(unpack(res.x))
    if mode.overlap_cap:
        top = float(np.max(mu @ _pair_products(cand, 2)))
        if top > OVERLAP_CAP:
            cand *= np.sqrt(OVERLAP_CAP / top)
    return cand


def _finish(xi: np.ndarray, mu: np.ndarray, sc: CycleScenario, cfg: OptimizerConfig, poly: _RowPolytope):
    """Polish to exact feasibility where possible and build the model."""
    xi = xi.copy()
    Q = _objective_matrix(sc)
    if not cfg.mode.exhaustive:
        prod = _pair_products(xi, 1)
        for k in range(xi.shape[0]):
            for i in range(sc.n):
                j = (i + 1) % sc.n
                if 0 < prod[k, i] <= cfg.polish_threshold:
                    if xi[k, i] <= xi[k, j]:
                        xi[k, i] = 0.0
                    else:
                        xi[k, j] = 0.0
        xi = poly.repair(xi)
        if cfg.mode.overlap_cap:
            # penalized iterates end slightly above the cap; shrinking keeps zeros and the other constraints
            top = float(np.max(mu @ _pair_products(xi, 2)))
            if top > OVERLAP_CAP:
                xi *= np.sqrt(OVERLAP_CAP / top)
        for _ in range(cfg.refine_rounds):
            xi = _refine_rows(xi, mu, sc, cfg.mode, poly)
            new_mu = _weight_lp((xi @ Q * xi).sum(axis=1) / 2, xi, cfg.mode, hard_adjacent=True)
            if new_mu is None:
                break
            mu = new_mu
    mu_hard = _weight_lp((xi @ Q * xi).sum(axis=1) / 2, xi, cfg.mode, hard_adjacent=True)
    if mu_hard is not None:
        mu = mu_hard
    return OnticModel(mu, xi)


def _run_restart(sc: CycleScenario, cfg: OptimizerConfig, r: int) -> OnticModel:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(cfg.seed, spawn_key=(r,))))
    K, n = cfg.ontic_states, sc.n
    poly = _RowPolytope(sc, cfg.mode.exhaustive, cfg.dykstra_sweeps)
    if cfg.grid_starts:
        xi = poly.repair(rng.choice(GRID, size=(K, n)))
    else:
        xi = poly.project(rng.random((K, n)))
    mu = rng.dirichlet(np.ones(K))
    if cfg.mode.equal_overlap and K % n == 0:
        # start on cyclic orbits so every <xi_i xi_{i+2}> begins equal
        base = xi[: K // n]
        xi = np.concatenate([np.roll(base, r, axis=1) for r in range(n)])
        mu = np.tile(mu[: K // n] / mu[: K // n].sum(), n) / n
    Q = _objective_matrix(sc)
    rho = cfg.penalty
    for t in range(cfg.iters):
        if t % cfg.lp_every == 0:
            value = (xi @ Q * xi).sum(axis=1) / 2 - rho * _pair_products(xi, 1).sum(axis=1)
            new_mu = _weight_lp(value, xi, cfg.mode, hard_adjacent=False)
            if new_mu is not None:
                mu = new_mu
        g = xi @ Q + _penalty_gradient(xi, mu, cfg.mode, rho)
        xi = poly.project(xi + cfg.step / (1.0 + rho) * g)
        rho *= cfg.penalty_growth
    return _finish(xi, mu, sc, cfg, poly)


def _restart_job(args):
    sc, cfg, r = args
    m = _run_restart(sc, cfg, r)
    rep = check_constraints(m, sc, cfg.mode, tol=cfg.tol)
    return m, rep, evaluate_C(m, sc)


def _default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def maximize_C(sc: CycleScenario, cfg: OptimizerConfig) -> OptResult:
    """Best feasible model over ``cfg.restarts`` independent restarts.

    Ties on value go to the lowest restart index.  When no restart is
    feasible the least-violating model is returned with ``feasible=False``.
    """
    jobs = [(sc, cfg, r) for r in range(cfg.restarts)]
    workers = cfg.workers or _default_workers()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outs = list(pool.map(_restart_job, jobs))
    else:
        outs = [_restart_job(j) for j in jobs]

    values = [c if rep.feasible(cfg.tol) else None for _, rep, c in outs]
    feasible_idx = [r for r, v in enumerate(values) if v is not None]
    if feasible_idx:
        best = max(feasible_idx, key=lambda r: (values[r], -r))
    else:
        best = min(range(len(outs)), key=lambda r: (outs[r][1].worst_violation, r))
        log.info("no feasible model in %d restarts (least violation %.3e)", cfg.restarts, outs[best][1].worst_violation)
    m, rep, c = outs[best]
    return OptResult(
        best_model=m,
        best_value=float(c),
        restarts_used=cfg.restarts,
        feasible=bool(feasible_idx),
        report=rep,
        best_restart=best,
        restart_values=values,
    )


def with_mode(cfg: OptimizerConfig, mode: ConstraintMode) -> OptimizerConfig:
    return replace(cfg, mode=mode)
