"""Seeded Monte Carlo of the configuration-1 device applied twice in a row.

Random numbers come from numpy's counter-based Philox generator.  Shots are
split into fixed-size shards; shard ``s`` draws from
``Philox(SeedSequence(seed, spawn_key=(s,)))`` and consumes exactly two
uniforms per shot (first outcome, then second outcome), so counts depend only
on (seed, shots, scenario, state) and never on the number of workers.
"""

from __future__ import annotations

import csv
import io
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .measurement import LabeledPovm, build_config1
from .quantum import DensityState, luders_update, outcome_probability
from .scenario import CycleScenario

log = logging.getLogger(__name__)

SHARD_SIZE = 1 << 16
SUM_TOL = 1e-9
# below this many first outcomes the plug-in binomial error is not meaningful
MIN_ROW_COUNT = 10
WORKERS_ENV = "KCBS_DEVICE_MAX_WORKERS"


class SimulationError(ValueError):
    pass


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    if not 0 <= int(seed) < 2**64:
        raise SimulationError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(stream),))))


def _cdf(probs: np.ndarray) -> np.ndarray:
    total = float(np.sum(probs))
    if abs(total - 1.0) > SUM_TOL:
        raise SimulationError(f"outcome probabilities sum to {total!r}")
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    # trailing zero-probability outcomes must stay unreachable
    last = int(np.flatnonzero(probs > 0)[-1])
    cdf[last:] = 1.0
    return cdf


def _pick(cdf: np.ndarray, u):
    return np.searchsorted(cdf, u, side="right")


def outcome_distribution(rho: DensityState, povm: LabeledPovm) -> np.ndarray:
    return np.array([outcome_probability(rho, op) for _, op in povm.effects])


def sample_outcome(rho: DensityState, povm: LabeledPovm, rng: np.random.Generator):
    """Draw one outcome label by inverse CDF; consumes exactly one uniform."""
    cdf = _cdf(outcome_distribution(rho, povm))
    k = int(_pick(cdf, rng.random()))
    return povm.labels[k], rng


@dataclass(frozen=True)
class SimConfig:
    shots: int
    seed: int
    scenario: CycleScenario
    initial_state: DensityState = field(default_factory=DensityState.maximally_mixed)

    def __post_init__(self):
        if int(self.shots) < 1:
            raise SimulationError(f"shots must be >= 1, got {self.shots}")
        if not 0 <= int(self.seed) < 2**64:
            raise SimulationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


@dataclass
class SimResult:
    labels: list
    shots: int
    seed: int
    first_counts: dict
    joint_counts: dict  # joint_counts[first][second]
    conditional_estimates: dict  # [first][second] -> float, None when undefined
    c_estimate: float
    c_stderr: float
    c_stderr_cellwise: float
    undefined_cells: list
    low_count_rows: list
    status: str

    def count_matrix(self) -> np.ndarray:
        return np.array([[self.joint_counts[a][b] for b in self.labels] for a in self.labels], dtype=np.int64)

    def to_dict(self) -> dict:
        return {
            "labels": self.labels,
            "shots": self.shots,
            "seed": self.seed,
            "rng": "numpy Philox, SeedSequence(seed, spawn_key=(shard,)), shard size %d" % SHARD_SIZE,
            "first_counts": self.first_counts,
            "joint_counts": self.joint_counts,
            "conditional_estimates": self.conditional_estimates,
            "c_estimate": self.c_estimate,
            "c_stderr": self.c_stderr,
            "c_stderr_cellwise": self.c_stderr_cellwise,
            "undefined_cells": [list(c) for c in self.undefined_cells],
            "low_count_rows": self.low_count_rows,
            "status": self.status,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["first\\second"] + self.labels)
        for a in self.labels:
            w.writerow([a] + [self.joint_counts[a][b] for b in self.labels])
        return buf.getvalue()


def transition_model(config: SimConfig) -> tuple[list, np.ndarray, np.ndarray]:
    """(labels, first-outcome CDF, per-first-outcome second CDFs)."""
    povm = build_config1(config.scenario)
    rho = config.initial_state
    if rho.dim != povm.dim:
        raise SimulationError(f"initial state has dimension {rho.dim}, device acts on {povm.dim}")
    first = outcome_distribution(rho, povm)
    m = len(first)
    second = np.ones((m, m))
    for a, lbl in enumerate(povm.labels):
        if first[a] == 0.0:
            continue  # unreachable row; keep a valid dummy CDF
        second[a] = _cdf(outcome_distribution(luders_update(rho, lbl, povm), povm))
    return povm.labels, _cdf(first), second


def _run_shard(seed: int, shard: int, n: int, first_cdf: np.ndarray, second_cdf: np.ndarray) -> np.ndarray:
    m = len(first_cdf)
    u = make_rng(seed, shard).random((n, 2))
    a = _pick(first_cdf, u[:, 0])
    b = np.empty(n, dtype=np.intp)
    for k in range(m):
        sel = a == k
        if sel.any():
            b[sel] = _pick(second_cdf[k], u[sel, 1])
    return np.bincount(a * m + b, minlength=m * m).reshape(m, m)


def _default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def run_counts(config: SimConfig, workers: int | None = None) -> tuple[list, np.ndarray]:
    labels, first_cdf, second_cdf = transition_model(config)
    shots = int(config.shots)
    sizes = [SHARD_SIZE] * (shots // SHARD_SIZE)
    if shots % SHARD_SIZE:
        sizes.append(shots % SHARD_SIZE)
    workers = workers or _default_workers()
    args = [(config.seed, s, n, first_cdf, second_cdf) for s, n in enumerate(sizes)]
    if workers == 1 or len(args) == 1:
        parts = [_run_shard(*a) for a in args]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda a: _run_shard(*a), args))
    total = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for p in parts:  # fixed shard order
        total += p
    return labels, total


def summarize(labels: list, counts: np.ndarray, shots: int, seed: int) -> SimResult:
    """Plug-in conditional estimates N_ji / N_j and the contextuality estimate."""
    n_e = sum(1 for lbl in labels if lbl.startswith("E"))
    first = counts.sum(axis=1)
    cond: dict = {a: {} for a in labels}
    undefined = []
    c_est = 0.0
    var_row = 0.0
    var_cell = 0.0
    for j, a in enumerate(labels):
        for i, b in enumerate(labels):
            cond[a][b] = float(counts[j, i] / first[j]) if first[j] else None
        if j >= n_e:
            continue
        if first[j] == 0:
            undefined.extend((a, labels[i]) for i in range(n_e))
            continue
        cells = counts[j, :n_e] / first[j]
        row = float(cells.sum())
        c_est += row
        # cells in a row share N_j and are multinomially anticorrelated
        var_row += row * (1 - row) / first[j]
        var_cell += float(np.sum(cells * (1 - cells))) / first[j]
    low = [labels[j] for j in range(n_e) if first[j] < MIN_ROW_COUNT]
    status = "ok"
    if undefined or low:
        status = "insufficient_statistics"
        log.warning("%d conditional cells undefined, %d first outcomes seen fewer than %d times",
                    len(undefined), len(low), MIN_ROW_COUNT)
    return SimResult(
        labels=list(labels),
        shots=int(shots),
        seed=int(seed),
        first_counts={a: int(first[j]) for j, a in enumerate(labels)},
        joint_counts={a: {b: int(counts[j, i]) for i, b in enumerate(labels)} for j, a in enumerate(labels)},
        conditional_estimates=cond,
        c_estimate=float(c_est),
        c_stderr=float(np.sqrt(var_row)),
        c_stderr_cellwise=float(np.sqrt(var_cell)),
        undefined_cells=undefined,
        low_count_rows=low,
        status=status,
    )


def run_sequential(config: SimConfig, workers: int | None = None) -> SimResult:
    labels, counts = run_counts(config, workers)
    return summarize(labels, counts, config.shots, config.seed)
