from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kcbs_device.linalg import eigenvalues, inner_product, is_psd, operator_sum
from kcbs_device.scenario import (
    CycleScenario,
    ScenarioError,
    build_kcbs_scenario,
    build_ncycle_scenario,
    kcbs_vectors,
    load_scenario,
    save_scenario,
    zx_example,
)

NN = (3 - math.sqrt(5)) / 2


def test_raw_vectors():
    v = kcbs_vectors()
    assert np.allclose(v[0].amplitudes, [1, 0, math.sqrt(math.cos(math.pi / 5))])
    assert math.sqrt(math.cos(math.pi / 5)) == pytest.approx(0.89945, abs=1e-5)
    assert v[1].amplitudes[0].real == pytest.approx(math.cos(4 * math.pi / 5))
    assert v[1].amplitudes[0].real == pytest.approx(-0.80902, abs=1e-5)
    assert inner_product(v[0], v[0]).real == pytest.approx(1 + math.cos(math.pi / 5))
    assert inner_product(v[0], v[0]).real == pytest.approx(1.80902, abs=1e-5)


def test_uniform_scenario(kcbs):
    assert kcbs.probs == (0.2, 0.2, 0.2, 0.2, 0.2)
    assert abs(inner_product(kcbs.kets[1], kcbs.kets[2])) <= 1e-12
    g = np.abs(kcbs.gram()) ** 2
    for i in range(5):
        assert g[i, (i + 1) % 5] <= 1e-20
        assert g[i, (i + 2) % 5] == pytest.approx(NN, abs=1e-10)
        assert kcbs.kets[i].is_normalized()


def test_bad_probabilities_rejected():
    with pytest.raises(ScenarioError):
        build_kcbs_scenario((0.3, 0.2, 0.2, 0.2, 0.2))
    with pytest.raises(ScenarioError):
        build_kcbs_scenario((1.2, -0.2, 0.0, 0.0, 0.0))


def test_ncycle_five_matches_kcbs(kcbs):
    sc5 = build_ncycle_scenario(5)
    assert np.allclose(np.abs(sc5.gram()), np.abs(kcbs.gram()), atol=1e-10)


@pytest.mark.parametrize("n", [5, 7, 9, 11])
def test_ncycle_adjacent_orthogonal(n):
    sc = build_ncycle_scenario(n)
    g = np.abs(sc.gram())
    for i in range(n):
        assert g[i, (i + 1) % n] < 1e-10
        assert abs(np.linalg.norm(sc.kets[i].amplitudes) - 1) <= 1e-12


@pytest.mark.parametrize("n", [3, 4, 6])
def test_ncycle_rejects_bad_length(n):
    with pytest.raises(ScenarioError):
        build_ncycle_scenario(n)


def test_constructor_rejects_non_orthogonal(kcbs):
    kets = list(kcbs.kets)
    kets[1] = kets[2]
    with pytest.raises(ScenarioError):
        CycleScenario(5, tuple(kets), kcbs.probs)


def test_json_round_trip_bit_exact(tmp_path):
    sc = build_kcbs_scenario((0.1, 0.3, 0.2, 0.15, 0.25))
    path = tmp_path / "sc.json"
    save_scenario(sc, path)
    back = load_scenario(path)
    assert back.probs == sc.probs
    for a, b in zip(sc.kets, back.kets):
        assert np.array_equal(a.amplitudes, b.amplitudes)
    assert json.loads(path.read_text()) == sc.to_dict()


def test_zx_examples():
    ex = zx_example(1.0)
    assert np.allclose(ex.zx_effects[0].matrix, np.diag([1, 0]))
    assert np.allclose(ex.zx_effects[1].matrix, np.diag([0, 1]))
    assert ex.zx_effects[2].norm() == 0 and ex.zx_effects[3].norm() == 0
    half = zx_example(0.5)
    assert np.allclose(half.zx_effects[0].matrix, 0.5 * np.diag([1, 0]), atol=1e-12)
    with pytest.raises(ScenarioError):
        zx_example(1.5)


@given(st.floats(0, 1))
def test_zx_effects_psd_complete_and_scaled(s):
    ex = zx_example(s)
    for e in ex.zx_effects:
        assert is_psd(e)
    total = operator_sum(ex.zx_effects)
    assert np.allclose(total.matrix, np.eye(2), atol=1e-12)
    for z, zx in zip(ex.z_effects, ex.zx_effects[:2]):
        assert np.allclose(zx.matrix, s * z.matrix, atol=1e-12)
    for x, zx in zip(ex.x_effects, ex.zx_effects[2:]):
        assert np.allclose(zx.matrix, (1 - s) * x.matrix, atol=1e-12)
    assert eigenvalues(total) == pytest.approx([1, 1], abs=1e-12)
