"""Exact sequential-measurement statistics for the configuration-1 device."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import SPECTRAL_TOL, HermitianOperator, is_psd, projector, sqrtm_psd
from .measurement import LabeledPovm, build_config1
from .scenario import CycleScenario

PROB_CLAMP_TOL = 1e-12


class QuantumError(ValueError):
    pass


@dataclass(frozen=True)
class DensityState:
    matrix: HermitianOperator

    def __post_init__(self):
        m = self.matrix
        if not isinstance(m, HermitianOperator):
            m = HermitianOperator(np.asarray(m))
            object.__setattr__(self, "matrix", m)
        if not is_psd(m, SPECTRAL_TOL):
            raise QuantumError("density matrix is not positive semidefinite")
        if abs(m.trace() - 1.0) > SPECTRAL_TOL:
            raise QuantumError(f"density matrix has trace {m.trace()!r}")

    @property
    def dim(self) -> int:
        return self.matrix.dim

    @classmethod
    def maximally_mixed(cls, dim: int = 3) -> DensityState:
        return cls(HermitianOperator(np.eye(dim) / dim))

    @classmethod
    def pure(cls, ket) -> DensityState:
        return cls(projector(ket))


def outcome_probability(rho: DensityState, effect: HermitianOperator) -> float:
    """Tr(effect rho); values within 1e-12 of 0 or 1 are snapped to the boundary."""
    if effect.dim != rho.dim:
        raise QuantumError(f"dimension mismatch: effect {effect.dim}, state {rho.dim}")
    p = float(np.trace(effect.matrix @ rho.matrix.matrix).real)
    if p < -PROB_CLAMP_TOL or p > 1 + PROB_CLAMP_TOL:
        raise QuantumError(f"probability {p!r} outside [0, 1]; effect or state invalid")
    if p < PROB_CLAMP_TOL:
        return 0.0
    if p > 1 - PROB_CLAMP_TOL:
        return 1.0
    return p


def luders_update(rho: DensityState, effect_label: str, povm: LabeledPovm) -> DensityState:
    """Post-measurement state sqrt(E) rho sqrt(E) / Tr(E rho)."""
    effect = povm[effect_label]
    p = outcome_probability(rho, effect)
    if p == 0.0:
        raise QuantumError(f"outcome {effect_label} has zero probability")
    r = sqrtm_psd(effect).matrix
    m = r @ rho.matrix.matrix @ r
    m = (m + m.conj().T) / 2
    return DensityState(HermitianOperator(m / np.trace(m).real))


def sequential_conditional(sc: CycleScenario, i: int, j: int) -> float:
    """Probability of second outcome E_i after a first outcome E_j.

    The collapse after E_j is onto |v_j>, so the value does not depend on the
    state prepared before the first measurement.
    """
    if not (0 <= i < sc.n and 0 <= j < sc.n):
        raise QuantumError(f"indices ({i}, {j}) out of range for n={sc.n}")
    w = float(sc.effect_weights()[i])
    post = projector(sc.kets[j])
    e_i = w * projector(sc.kets[i])
    return float(np.trace(e_i.matrix @ post.matrix).real)


def conditional_table(sc: CycleScenario, rho: DensityState, povm: LabeledPovm | None = None) -> np.ndarray:
    """Explicit two-step table T[first, second] over configuration-1 labels.

    Rows for zero-probability first outcomes are NaN.
    """
    povm = povm or build_config1(sc)
    labels = povm.labels
    table = np.full((len(labels), len(labels)), np.nan)
    for a, la in enumerate(labels):
        if outcome_probability(rho, povm[la]) == 0.0:
            continue
        post = luders_update(rho, la, povm)
        for b, lb in enumerate(labels):
            table[a, b] = outcome_probability(post, povm[lb])
    return table


def first_outcome_probabilities(sc: CycleScenario, rho: DensityState, povm: LabeledPovm | None = None) -> np.ndarray:
    povm = povm or build_config1(sc)
    return np.array([outcome_probability(rho, povm[lbl]) for lbl in povm.labels])


def contextuality_value(sc: CycleScenario) -> float:
    """Sum over ordered pairs (i, j) of p(E_i | E_j)."""
    overlaps = np.abs(sc.gram()) ** 2
    return float(np.sum(sc.effect_weights()[:, None] * overlaps))


def closed_form_value() -> float:
    return 2 * (4 - math.sqrt(5))

