from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kcbs_device.linalg import (
    HermitianOperator,
    Ket,
    LinalgError,
    eigenvalues,
    inner_product,
    is_psd,
    max_eigenvalue,
    min_eigenvalue,
    operator_sum,
    projector,
    sqrtm_psd,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
complex3 = st.lists(st.tuples(finite, finite), min_size=3, max_size=3)


def cubic_roots_hermitian(h: np.ndarray) -> list:
    """Eigenvalues of a 3x3 Hermitian matrix from its characteristic polynomial.

    Trigonometric solution of the depressed cubic, evaluated at 50 digits so
    that repeated roots (where the closed form loses half the digits) stay exact
    to well below the test tolerance.
    """
    mp.mp.dps = 50
    a = [[mp.mpc(complex(h[j, k])) for k in range(3)] for j in range(3)]
    m = mp.matrix(a)
    tr = sum(m[j, j] for j in range(3)).real
    c2 = (m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0] + m[0, 0] * m[2, 2] - m[0, 2] * m[2, 0]
          + m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1]).real
    det = mp.det(m).real
    q = tr / 3
    p = c2 - tr**2 / 3
    r = -det + c2 * q - 2 * q**3
    if p >= 0:
        return [float(q)] * 3
    amp = 2 * mp.sqrt(-p / 3)
    arg = max(-1, min(1, 3 * r / (p * amp)))
    theta = mp.acos(arg) / 3
    return sorted(float(q + amp * mp.cos(theta - 2 * mp.pi * k / 3)) for k in range(3))


@given(complex3, complex3)
def test_inner_product_conjugate_symmetric(a, b):
    ka = Ket(np.array([complex(*z) for z in a]))
    kb = Ket(np.array([complex(*z) for z in b]))
    assert inner_product(ka, kb) == pytest.approx(inner_product(kb, ka).conjugate(), abs=1e-9)


def test_normalized_kcbs_inner_products(kcbs):
    v = kcbs.kets
    assert inner_product(v[0], v[0]) == pytest.approx(1.0, abs=1e-12)
    assert abs(inner_product(v[0], v[1])) <= 1e-12
    assert abs(inner_product(v[0], v[2])) ** 2 == pytest.approx((3 - math.sqrt(5)) / 2, abs=1e-12)


@given(complex3)
def test_projector_idempotent_trace_one(a):
    amp = np.array([complex(*z) for z in a])
    if np.linalg.norm(amp) < 1e-3:
        return
    P = projector(Ket(amp).normalized())
    assert P.trace() == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(P @ P, P.matrix, atol=1e-12)


def test_projector_rejects_unnormalized():
    with pytest.raises(LinalgError):
        projector(Ket(np.array([1.0, 1.0, 0.0])))


def test_adjacent_projectors_trace_orthogonal(kcbs):
    P = kcbs.projectors
    assert abs(np.trace(P[0] @ P[1])) <= 1e-12


def test_max_eigenvalue_examples(kcbs):
    assert max_eigenvalue(HermitianOperator.identity(3)) == pytest.approx(1.0)
    assert max_eigenvalue(kcbs.projectors[0]) == pytest.approx(1.0, abs=1e-12)
    total = operator_sum(0.4 * P for P in kcbs.projectors)
    assert max_eigenvalue(total) == pytest.approx(2 * math.sqrt(5) / 5, abs=1e-12)
    # spectrum {(5 - sqrt5)/5 twice, 2 sqrt5/5}
    lo, hi = (5 - math.sqrt(5)) / 5, 2 * math.sqrt(5) / 5
    assert np.allclose(eigenvalues(total), [lo, lo, hi], atol=1e-12)


@settings(max_examples=200)
@given(st.lists(finite, min_size=9, max_size=9))
def test_max_eigenvalue_matches_characteristic_polynomial(vals):
    a = np.array(vals[:3])
    b = np.array(vals[3:6]) + 1j * np.array(vals[6:9])
    h = np.diag(a).astype(complex)
    h[0, 1], h[0, 2], h[1, 2] = b
    h = h + np.triu(h, 1).conj().T
    op = HermitianOperator(h)
    assert max_eigenvalue(op) == pytest.approx(cubic_roots_hermitian(h)[-1], abs=1e-8)
    assert min_eigenvalue(op) == pytest.approx(cubic_roots_hermitian(h)[0], abs=1e-8)


def test_is_psd_examples(kcbs):
    P0 = kcbs.projectors[0]
    assert is_psd(P0)
    assert not is_psd(-P0)
    complement = HermitianOperator.identity(3) - operator_sum(0.4 * P for P in kcbs.projectors)
    assert is_psd(complement)
    assert min_eigenvalue(complement) == pytest.approx(1 - 2 * math.sqrt(5) / 5, abs=1e-12)


def test_sqrtm_psd_squares_back(kcbs):
    K = HermitianOperator.identity(3) - operator_sum(0.4 * P for P in kcbs.projectors)
    r = sqrtm_psd(K)
    assert np.allclose(r @ r, K.matrix, atol=1e-12)


def test_hermitian_validation():
    with pytest.raises(LinalgError):
        HermitianOperator(np.array([[0, 1], [0, 0]], dtype=complex))


def test_dimension_limit():
    with pytest.raises(LinalgError):
        HermitianOperator.identity(9)
    with pytest.raises(LinalgError):
        Ket(np.ones(9))


def test_operator_arithmetic():
    a = HermitianOperator(np.diag([1.0, 2.0, 3.0]))
    assert (a + a - a).allclose(a)
    assert (2 * a).allclose(a * 2)
    assert (-a).trace() == pytest.approx(-6)


def test_ket_phase_convention():
    k = Ket(np.array([0.0, -1j, 1.0])).normalized()
    assert k.amplitudes[1].imag == 0 and k.amplitudes[1].real > 0
