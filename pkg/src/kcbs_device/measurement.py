"""The device's two configurations and the scaled-similarity relation between POVMs.

Configuration 1 mixes the cyclic projective settings with weights ``p_i``;
its outcomes are ``E0..E{n-1}`` and the completion ``K``.  Configuration 2
runs a single setting ``i`` with outcomes ``Pi{i}``, ``Pi{i+1}``, ``K{i}``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .linalg import (
    SPECTRAL_TOL,
    HermitianOperator,
    eigenvalues,
    max_eigenvalue,
    operator_sum,
)
from .scenario import CycleScenario, QubitZxExample

NULL_EFFECT_TOL = 1e-12
SIMILARITY_TOL = 1e-10


class MeasurementError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledPovm:
    dim: int
    effects: tuple  # ((label, HermitianOperator), ...)

    def __post_init__(self):
        effects = tuple((str(lbl), op) for lbl, op in self.effects)
        labels = [lbl for lbl, _ in effects]
        if len(set(labels)) != len(labels):
            raise MeasurementError(f"duplicate effect labels: {labels}")
        ident = HermitianOperator.identity(self.dim)
        for lbl, op in effects:
            if op.dim != self.dim:
                raise MeasurementError(f"effect {lbl} has dimension {op.dim}, expected {self.dim}")
        if effects:
            # one batched eigen-solve for all effects: 0 <= E <= 1 iff spectrum in [0, 1]
            spectra = np.linalg.eigvalsh(np.stack([op.matrix for _, op in effects]))
            bad = np.flatnonzero((spectra[:, 0] < -SPECTRAL_TOL) | (spectra[:, -1] > 1 + SPECTRAL_TOL))
            if bad.size:
                raise MeasurementError(f"effect {effects[bad[0]][0]} is not between 0 and identity")
        total = operator_sum(op for _, op in effects)
        if not total.allclose(ident, atol=SPECTRAL_TOL):
            dev = float(np.max(np.abs(eigenvalues(total - ident))))
            raise MeasurementError(f"effects do not sum to identity (deviation {dev:.3e})")
        object.__setattr__(self, "effects", effects)

    @property
    def labels(self) -> list[str]:
        return [lbl for lbl, _ in self.effects]

    def __getitem__(self, label: str) -> HermitianOperator:
        for lbl, op in self.effects:
            if lbl == label:
                return op
        raise KeyError(label)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "effects": [
                {"label": lbl, "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in op.matrix]}
                for lbl, op in self.effects
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> LabeledPovm:
        try:
            effects = [
                (e["label"], HermitianOperator(np.array([[complex(re, im) for re, im in row] for row in e["matrix"]])))
                for e in doc["effects"]
            ]
            return cls(int(doc["dim"]), tuple(effects))
        except (KeyError, TypeError) as exc:
            raise MeasurementError(f"malformed POVM document: {exc}") from exc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))


def config1_labels(n: int) -> list[str]:
    return [f"E{i}" for i in range(n)] + ["K"]


def build_config1(sc: CycleScenario) -> LabeledPovm:
    """Mixed-setting POVM: E_i = (p_i + p_{i+1}) Pi_i, completed by K = 1 - sum E_i."""
    w = sc.effect_weights()
    es = [float(w[i]) * P for i, P in enumerate(sc.projectors)]
    total = operator_sum(es)
    top = max_eigenvalue(total)
    if top > 1 + SPECTRAL_TOL:
        raise MeasurementError(f"sum of E_i exceeds identity (max eigenvalue {top:.12f})")
    kappa = HermitianOperator.identity(3) - total
    return LabeledPovm(3, tuple(zip(config1_labels(sc.n), es + [kappa])))


def build_config2(sc: CycleScenario, i: int) -> LabeledPovm:
    if not 0 <= i < sc.n:
        raise MeasurementError(f"setting index {i} out of range 0..{sc.n - 1}")
    j = sc.nxt(i)
    P = sc.projectors
    k = HermitianOperator.identity(3) - P[i] - P[j]
    return LabeledPovm(3, ((f"Pi{i}", P[i]), (f"Pi{j}", P[j]), (f"K{i}", k)))


def doubled_mixture_completion(sc: CycleScenario) -> HermitianOperator:
    """The alternative completion 2 * sum_i p_i K_i, kept only for diagnostics."""
    ks = [float(p) * build_config2(sc, i)[f"K{i}"] for i, p in enumerate(sc.probs)]
    return 2.0 * operator_sum(ks)


def completion_diagnostic(sc: CycleScenario) -> dict:
    """Compare the complement completion with the doubled mixture expression."""
    povm = build_config1(sc)
    sum_e = operator_sum(povm[f"E{i}"] for i in range(sc.n))
    alt = doubled_mixture_completion(sc)
    ident = HermitianOperator.identity(3)
    alt_total = sum_e + alt
    mixture = operator_sum(float(p) * build_config2(sc, i)[f"K{i}"] for i, p in enumerate(sc.probs))
    return {
        "sum_E_spectrum": eigenvalues(sum_e).tolist(),
        "K_spectrum": eigenvalues(povm["K"]).tolist(),
        "doubled_K_spectrum": eigenvalues(alt).tolist(),
        "doubled_total_spectrum": eigenvalues(alt_total).tolist(),
        "doubled_total_deviation": float(np.max(np.abs(eigenvalues(alt_total - ident)))),
        "complement_equals_mixture": povm["K"].allclose(mixture, atol=1e-12),
    }


@dataclass(frozen=True)
class MixtureEntry:
    setting: int
    c2_label: str
    weight: float


def config1_as_mixture(sc: CycleScenario) -> dict[str, list[MixtureEntry]]:
    """Express each configuration-1 effect as a coarse-graining of setting outcomes.

    Setting ``s`` is drawn with probability ``p_s``; every entry drawn from that
    setting carries weight ``p_s``, so the distinct setting weights sum to one.
    """
    out: dict[str, list[MixtureEntry]] = {lbl: [] for lbl in config1_labels(sc.n)}
    for s, p in enumerate(sc.probs):
        t = sc.nxt(s)
        out[f"E{s}"].append(MixtureEntry(s, f"Pi{s}", float(p)))
        out[f"E{t}"].append(MixtureEntry(s, f"Pi{t}", float(p)))
        out["K"].append(MixtureEntry(s, f"K{s}", float(p)))
    for lbl in out:
        out[lbl].sort(key=lambda e: e.setting)
    return out


def mixture_operators(sc: CycleScenario, mixture: dict[str, list[MixtureEntry]]) -> dict[str, HermitianOperator]:
    settings = [build_config2(sc, i) for i in range(sc.n)]
    return {
        lbl: operator_sum(e.weight * settings[e.setting][e.c2_label] for e in entries)
        for lbl, entries in mixture.items()
    }


def zx_povms(ex: QubitZxExample) -> tuple[LabeledPovm, LabeledPovm, LabeledPovm]:
    """(M_Z, M_X, M_ZX) as labeled POVMs."""
    mz = LabeledPovm(2, tuple(zip(("Z0", "Z1"), ex.z_effects)))
    mx = LabeledPovm(2, tuple(zip(("X+", "X-"), ex.x_effects)))
    mzx = LabeledPovm(2, tuple(zip(("ZX0", "ZX1", "ZX+", "ZX-"), ex.zx_effects)))
    return mz, mx, mzx


@dataclass(frozen=True)
class SimilarityResult:
    matched: bool
    scale: float | None = None
    outcome_pairing: tuple = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {"matched": self.matched, "scale": self.scale, "outcome_pairing": [list(p) for p in self.outcome_pairing]}


def _infer_scale(a: np.ndarray, b: np.ndarray) -> float | None:
    """Real s with b = s * a, read off the largest entry of ``a`` and verified globally."""
    idx = np.unravel_index(np.argmax(np.abs(a)), a.shape)
    s = b[idx] / a[idx]
    if abs(s.imag) > SIMILARITY_TOL:
        return None
    s = float(s.real)
    if not np.allclose(b, s * a, rtol=0.0, atol=SIMILARITY_TOL):
        return None
    return s


def check_similarity(a: LabeledPovm, b: LabeledPovm) -> SimilarityResult:
    """Find an injective pairing of ``a``'s outcomes into ``b``'s with b_pi(k) = s * a_k.

    Null effects of ``a`` are skipped.  Null effects of ``b`` are used only if
    no pairing into ``b``'s non-null effects exists, which yields scale zero.
    Within each pass the first pairing in lexicographic order of ``b``'s
    outcomes wins.
    """
    if a.dim != b.dim:
        raise MeasurementError(f"dimension mismatch: {a.dim} vs {b.dim}")
    a_eff = [(lbl, op.matrix) for lbl, op in a.effects if op.norm() >= NULL_EFFECT_TOL]
    if not a_eff:
        return SimilarityResult(False)
    b_live = [(lbl, op.matrix) for lbl, op in b.effects if op.norm() >= NULL_EFFECT_TOL]
    b_all = [(lbl, op.matrix) for lbl, op in b.effects]
    for b_eff in (b_live, b_all):
        found = _search_pairing(a_eff, b_eff)
        if found is not None:
            return found
    return SimilarityResult(False)


def _search_pairing(a_eff, b_eff) -> SimilarityResult | None:
    # pairwise candidate scales; None marks non-proportional pairs
    scales = [[_infer_scale(am, bm) for _, bm in b_eff] for _, am in a_eff]
    for perm in itertools.permutations(range(len(b_eff)), len(a_eff)):
        cand = [scales[k][j] for k, j in enumerate(perm)]
        if any(c is None for c in cand):
            continue
        s0 = cand[0]
        if s0 < -SIMILARITY_TOL:
            continue
        if all(abs(c - s0) <= SIMILARITY_TOL for c in cand):
            pairing = tuple((a_eff[k][0], b_eff[j][0]) for k, j in enumerate(perm))
            return SimilarityResult(True, s0, pairing)
    return None
