"""Exhaustive grid enumeration of small ontic models.

Independent of the optimizer: every response row with entries on a finite grid
is enumerated, and for two states every pair of rows is combined with every
grid weight.  Used as an oracle for the optimizer at small K.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..scenario import CycleScenario
from .model import OVERLAP_CAP, ConstraintMode, OnticModel

GRID = (0.0, 0.25, 0.5, 0.75, 1.0)
EXACT_TOL = 1e-12


@dataclass
class GridResult:
    num_states: int
    mode: ConstraintMode
    enumerated: int
    feasible: int
    max_value: float | None
    argmax: OnticModel | None

    def to_dict(self) -> dict:
        return {
            "num_states": self.num_states,
            "mode": self.mode.to_dict(),
            "enumerated": self.enumerated,
            "feasible": self.feasible,
            "max_value": self.max_value,
            "argmax": None if self.argmax is None else self.argmax.to_dict(),
        }


def _row_table(sc: CycleScenario, grid):
    n = sc.n
    rows = np.array(list(itertools.product(grid, repeat=n)), dtype=float)
    nxt = np.roll(rows, -1, axis=1)
    # rows whose setting-i outcomes overshoot 1 are not response functions at all
    rows = rows[np.all(rows + nxt <= 1 + EXACT_TOL, axis=1)]
    p = np.asarray(sc.probs, dtype=float)
    s = rows.sum(axis=1)
    value = 2.0 * (rows @ p) * s  # sum_{i,j} 2 p_i xi_i xi_j
    adj = (rows * np.roll(rows, -1, axis=1)).sum(axis=1)
    nn = rows * np.roll(rows, -2, axis=1)
    comp = rows @ (p + np.roll(p, -1))
    completion = 1.0 - rows - np.roll(rows, -1, axis=1)
    return rows, value, adj, nn, comp, completion.max(axis=1)


def _combos(sc: CycleScenario, num_states: int, mode: ConstraintMode, grid):
    """Yield (weights, row indices, feasibility mask, values) blocks covering every model."""
    if num_states not in (1, 2):
        raise ValueError("grid enumeration is implemented for one or two ontic states")
    rows, value, adj, nn, comp, kmax = _row_table(sc, grid)
    # pointwise admissibility of a state in the support
    ok = (comp <= 1 + EXACT_TOL) & (adj <= EXACT_TOL)
    if mode.exhaustive:
        ok &= kmax <= EXACT_TOL

    def measure_ok(nn_avg):
        good = np.ones(nn_avg.shape[0], dtype=bool)
        if mode.overlap_cap:
            good &= np.all(nn_avg <= OVERLAP_CAP + EXACT_TOL, axis=1)
        if mode.equal_overlap:
            good &= np.all(np.abs(nn_avg - np.roll(nn_avg, -3, axis=1)) <= EXACT_TOL, axis=1)
        return good

    if num_states == 1:
        idx = np.arange(rows.shape[0])
        yield rows, (1.0,), (idx,), ok & measure_ok(nn), value
        return
    a_idx, b_idx = np.triu_indices(rows.shape[0])
    for w in grid:
        wa, wb = w, 1.0 - w
        good = (ok[a_idx] | (wa == 0)) & (ok[b_idx] | (wb == 0))
        good &= measure_ok(wa * nn[a_idx] + wb * nn[b_idx])
        yield rows, (wa, wb), (a_idx, b_idx), good, wa * value[a_idx] + wb * value[b_idx]


def grid_maximum(sc: CycleScenario, num_states: int, mode: ConstraintMode, grid=GRID) -> GridResult:
    best_val, best_model, n_feasible, enumerated = None, None, 0, 0
    for rows, weights, idx, good, val in _combos(sc, num_states, mode, grid):
        enumerated += good.size
        n_feasible += int(good.sum())
        if not good.any():
            continue
        j = int(np.flatnonzero(good)[np.argmax(val[good])])
        if best_val is None or val[j] > best_val:
            best_val = float(val[j])
            best_model = OnticModel(np.array(weights), rows[[ix[j] for ix in idx]])
    return GridResult(num_states, mode, enumerated, n_feasible, best_val, best_model)


def feasible_values(sc: CycleScenario, num_states: int, mode: ConstraintMode, grid=GRID) -> np.ndarray:
    """Every value of C attained by a feasible enumerated model."""
    return np.concatenate([val[good] for _, _, _, good, val in _combos(sc, num_states, mode, grid)])
