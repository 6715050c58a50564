"""Cycle scenarios (KCBS five-cycle and odd n-cycles) and the qubit Z/X/ZX example."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .linalg import HermitianOperator, Ket, projector

ORTHO_TOL = 1e-10
NORM_TOL = 1e-12
PROB_TOL = 1e-12


class ScenarioError(ValueError):
    pass


def scenario_residuals(kets: Sequence[Ket], probs: Sequence[float]) -> dict:
    """Raw structural residuals; used both for validation and for reporting.

    Works on arbitrary (possibly broken) input, so it never raises on bad
    geometry, only on inconsistent lengths.
    """
    n = len(kets)
    if len(probs) != n:
        raise ScenarioError(f"{n} kets but {len(probs)} probabilities")
    amps = np.array([k.amplitudes for k in kets])
    norms = np.abs(np.einsum("ij,ij->i", amps.conj(), amps).real - 1.0)
    gram = amps.conj() @ amps.T
    adjacent = np.array([abs(gram[i, (i + 1) % n]) for i in range(n)])
    p = np.asarray(probs, dtype=float)
    return {
        "norm_residuals": norms,
        "adjacent_overlaps": adjacent,
        "prob_sum_residual": abs(float(p.sum()) - 1.0),
        "min_prob": float(p.min()) if n else 0.0,
    }


def _check_probs(probs: Sequence[float], n: int) -> tuple:
    p = tuple(float(x) for x in probs)
    if len(p) != n:
        raise ScenarioError(f"expected {n} probabilities, got {len(p)}")
    if any(not math.isfinite(x) or x < 0 for x in p):
        raise ScenarioError(f"probabilities must be finite and nonnegative: {p}")
    if abs(sum(p) - 1.0) > PROB_TOL:
        raise ScenarioError(f"probabilities sum to {sum(p)!r}, not 1")
    return p


@dataclass(frozen=True)
class CycleScenario:
    """``n`` unit kets in dimension 3, cyclically orthogonal, with sampling weights."""

    n: int
    kets: tuple
    probs: tuple

    def __post_init__(self):
        if self.n < 5 or self.n % 2 == 0:
            raise ScenarioError(f"cycle length must be odd and >= 5, got {self.n}")
        kets = tuple(self.kets)
        if len(kets) != self.n:
            raise ScenarioError(f"expected {self.n} kets, got {len(kets)}")
        if any(k.dim != 3 for k in kets):
            raise ScenarioError("cycle scenarios live in dimension 3")
        probs = _check_probs(self.probs, self.n)
        res = scenario_residuals(kets, probs)
        if res["norm_residuals"].max() > NORM_TOL:
            raise ScenarioError("kets must be normalized")
        worst = res["adjacent_overlaps"].max()
        if worst > ORTHO_TOL:
            raise ScenarioError(f"adjacent kets not orthogonal (|<v_i|v_i+1>| = {worst:.3e})")
        object.__setattr__(self, "kets", kets)
        object.__setattr__(self, "probs", probs)

    def nxt(self, i: int, k: int = 1) -> int:
        return (i + k) % self.n

    @property
    def projectors(self) -> list[HermitianOperator]:
        return [projector(k) for k in self.kets]

    @property
    def is_uniform(self) -> bool:
        return all(abs(p - 1.0 / self.n) <= PROB_TOL for p in self.probs)

    def gram(self) -> np.ndarray:
        amps = np.array([k.amplitudes for k in self.kets])
        return amps.conj() @ amps.T

    def effect_weights(self) -> np.ndarray:
        """Coefficients p_i + p_{i+1} multiplying each projector in configuration 1."""
        p = np.asarray(self.probs)
        return p + np.roll(p, -1)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "kets": [[[float(z.real), float(z.imag)] for z in k.amplitudes] for k in self.kets],
            "probs": [float(x) for x in self.probs],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> CycleScenario:
        n, kets, probs = parse_scenario_document(doc)
        return cls(n, kets, probs)


def parse_scenario_document(doc: dict) -> tuple[int, list[Ket], list[float]]:
    """Parse a scenario JSON document without enforcing scenario invariants."""
    try:
        n = int(doc["n"])
        kets = [Ket(np.array([complex(re, im) for re, im in k])) for k in doc["kets"]]
        probs = [float(x) for x in doc["probs"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"malformed scenario document: {exc}") from exc
    if len(kets) != n:
        raise ScenarioError(f"document declares n={n} but lists {len(kets)} kets")
    return n, kets, probs


def save_scenario(sc: CycleScenario, path) -> None:
    Path(path).write_text(json.dumps(sc.to_dict(), indent=2))


def load_scenario(path) -> CycleScenario:
    return CycleScenario.from_dict(json.loads(Path(path).read_text()))


def kcbs_vectors() -> list[Ket]:
    """The five unnormalized KCBS vectors in their original coordinates."""
    c = math.sqrt(math.cos(math.pi / 5))
    c2, s2 = math.cos(2 * math.pi / 5), math.sin(2 * math.pi / 5)
    c4, s4 = math.cos(4 * math.pi / 5), math.sin(4 * math.pi / 5)
    rows = [
        (1.0, 0.0, c),
        (c4, -s4, c),
        (c2, s2, c),
        (c2, -s2, c),
        (c4, s4, c),
    ]
    return [Ket(np.array(r)) for r in rows]


def uniform_probs(n: int) -> tuple:
    return (1.0 / n,) * n


def build_kcbs_scenario(probs="uniform") -> CycleScenario:
    if isinstance(probs, str):
        if probs != "uniform":
            raise ScenarioError(f"unknown distribution {probs!r}")
        probs = uniform_probs(5)
    kets = tuple(v.normalized() for v in kcbs_vectors())
    return CycleScenario(5, kets, tuple(probs))


def build_ncycle_scenario(n: int, probs="uniform") -> CycleScenario:
    """Standard odd n-cycle: kets on a cone with planar angles i*pi*(n-1)/n."""
    if n < 5 or n % 2 == 0:
        raise ScenarioError(f"cycle length must be odd and >= 5, got {n}")
    cz = math.cos(math.pi / n)
    z = math.sqrt(cz / (1 + cz))
    r = math.sqrt(1 - z * z)
    kets = []
    for i in range(n):
        phi = i * math.pi * (n - 1) / n
        kets.append(Ket(np.array([r * math.cos(phi), r * math.sin(phi), z])).normalized())
    if isinstance(probs, str):
        if probs != "uniform":
            raise ScenarioError(f"unknown distribution {probs!r}")
        probs = uniform_probs(n)
    return CycleScenario(n, tuple(kets), tuple(probs))


@dataclass(frozen=True)
class QubitZxExample:
    s: float
    z_effects: tuple
    x_effects: tuple
    zx_effects: tuple

    Z_LABELS = ("0", "1")
    X_LABELS = ("+", "-")


def zx_example(s: float) -> QubitZxExample:
    """Z and X projective measurements and their s-weighted four-outcome mixture."""
    s = float(s)
    if not 0.0 <= s <= 1.0:
        raise ScenarioError(f"s must lie in [0, 1], got {s}")
    h = 1 / math.sqrt(2)
    kets = {
        "0": Ket(np.array([1.0, 0.0])),
        "1": Ket(np.array([0.0, 1.0])),
        "+": Ket(np.array([h, h])),
        "-": Ket(np.array([h, -h])),
    }
    z = tuple(projector(kets[k]) for k in QubitZxExample.Z_LABELS)
    x = tuple(projector(kets[k]) for k in QubitZxExample.X_LABELS)
    zx = tuple(s * e for e in z) + tuple((1 - s) * e for e in x)
    return QubitZxExample(s, z, x, zx)
