import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qbarrier.cpoly import (
    CPolynomial,
    add,
    compose_linear,
    conjugate,
    evaluate,
    is_conjugate_flattening,
    mul,
    scale,
)

from .helpers import random_cf_poly, random_poly, random_unitary, unit_vectors


def z(n, j):
    return CPolynomial.z(n, j)


def zb(n, j):
    return CPolynomial.zbar(n, j)


def printed_z_barrier():
    # barrier printed for the repeated Z gate, rounded to 3 d.p.
    return (4.453 - 0.848 * z(2, 0) ** 2 - 3.871 * z(2, 0) * zb(2, 0)
            + 2.274 * z(2, 1) * zb(2, 1) - 0.848 * zb(2, 0) ** 2)


# -- conjugate ------------------------------------------------------------------
def test_conjugate_of_variable():
    assert conjugate(z(1, 0)) == zb(1, 0)


def test_conjugate_swaps_indices_and_conjugates_coefficient():
    p = (1j * z(2, 0) * zb(2, 1))
    assert conjugate(p) == (-1j) * z(2, 1) * zb(2, 0)


def test_printed_barrier_is_self_conjugate():
    B = printed_z_barrier()
    assert conjugate(B) == B
    # termwise symmetry oracle
    for key, c in B.items():
        n = B.n
        ck = key[n:] + key[:n]
        assert B.coefficient(ck) == pytest.approx(np.conj(c))


# -- conjugate-flattening ------------------------------------------------------------
def test_modulus_is_conjugate_flattening():
    assert is_conjugate_flattening(z(1, 0) * zb(1, 0))


def test_pure_power_is_not_conjugate_flattening():
    p = z(1, 0) ** 2
    assert not is_conjugate_flattening(p)
    assert abs(p.evaluate([1 + 1j]).imag) > 1


def test_printed_barrier_is_conjugate_flattening():
    assert is_conjugate_flattening(printed_z_barrier())


# -- evaluate ---------------------------------------------------------------------
def test_printed_barrier_values():
    B = printed_z_barrier()
    assert evaluate(B, [1, 0]) == pytest.approx(4.453 - 0.848 - 3.871 - 0.848)
    assert evaluate(B, [1, 0]).real == pytest.approx(-1.114)
    assert evaluate(B, [0, 1]).real == pytest.approx(6.727)


def test_printed_barrier_at_imaginary_unit():
    # the point (i, 0) lies in {|z0|^2 >= 0.9} yet the printed barrier is positive there
    assert evaluate(printed_z_barrier(), [1j, 0]).real == pytest.approx(2.278)


def test_modulus_at_i():
    assert evaluate(z(1, 0) * zb(1, 0), [1j]) == pytest.approx(1)


def test_evaluate_dimension_mismatch():
    with pytest.raises(ValueError):
        evaluate(z(2, 0), [1, 2, 3])


# -- compose_linear ---------------------------------------------------------------
Zg = np.diag([1.0, -1.0])
Xg = np.array([[0.0, 1.0], [1.0, 0.0]])
Hg = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2)


def test_compose_z_keeps_modulus():
    p = z(2, 1) * zb(2, 1)
    assert compose_linear(p, Zg) == p


def test_compose_x_swaps():
    assert compose_linear(z(2, 0), Xg) == z(2, 1)


def test_compose_h_by_hand():
    p = z(2, 0) * zb(2, 0)
    expected = 0.5 * (z(2, 0) * zb(2, 0) + z(2, 0) * zb(2, 1) + z(2, 1) * zb(2, 0) + z(2, 1) * zb(2, 1))
    assert compose_linear(p, Hg).allclose(expected, 1e-14)


def test_compose_dimension_mismatch():
    with pytest.raises(ValueError):
        compose_linear(z(2, 0), np.eye(3))


# -- arithmetic ------------------------------------------------------------------
def test_add_cancels_to_empty():
    p = add(z(1, 0), -z(1, 0))
    assert p.is_zero() and len(p.terms) == 0 and p.degree == 0


def test_difference_of_squares():
    a = z(1, 0) + zb(1, 0)
    b = z(1, 0) - zb(1, 0)
    assert mul(a, b) == z(1, 0) ** 2 - zb(1, 0) ** 2


def test_scale_and_dimension_mismatch():
    assert scale(z(1, 0), 2j).coefficient((1, 0)) == 2j
    with pytest.raises(ValueError):
        add(z(1, 0), z(2, 0))


def test_product_of_cf_is_cf(rng):
    for _ in range(20):
        p = random_cf_poly(rng, 2, 2)
        q = random_cf_poly(rng, 2, 2)
        r = mul(p, q)
        assert is_conjugate_flattening(r, 1e-12)
        W = unit_vectors(rng, 2, 100)
        assert np.max(np.abs(r.evaluate_many(W).imag)) < 1e-10


def test_records_round_trip(rng):
    p = random_poly(rng, 3, 3)
    assert CPolynomial.from_records(3, p.to_records()) == p


def test_str_is_graded_lex():
    p = zb(1, 0) + 2 + z(1, 0)
    assert str(p) == "2 + z0 + conj(z0)"


# -- properties -----------------------------------------------------------------------
seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=50, deadline=None)
@given(seeds, st.integers(1, 3), st.integers(0, 3))
def test_conjugate_evaluates_to_conjugate(seed, n, deg):
    rng = np.random.default_rng(seed)
    p = random_poly(rng, n, deg)
    W = rng.normal(size=(20, n)) + 1j * rng.normal(size=(20, n))
    for w in W:
        assert abs(evaluate(conjugate(p), w) - np.conj(evaluate(p, w))) <= 1e-12 * max(1, abs(evaluate(p, w)))


def test_conjugate_property_1000_samples(rng):
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 4))
        p = random_poly(rng, n, int(rng.integers(0, 4)))
        w = rng.normal(size=n) + 1j * rng.normal(size=n)
        v = evaluate(p, w)
        worst = max(worst, abs(evaluate(conjugate(p), w) - np.conj(v)) / max(1.0, abs(v)))
    assert worst <= 1e-12


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 3), st.integers(0, 3))
def test_cf_flag_matches_real_values(seed, n, deg):
    rng = np.random.default_rng(seed)
    W = rng.normal(size=(1000, n)) + 1j * rng.normal(size=(1000, n))
    p = random_cf_poly(rng, n, deg)
    assert is_conjugate_flattening(p)
    assert np.max(np.abs(p.evaluate_many(W).imag)) <= 1e-10 * max(1.0, np.max(np.abs(p.evaluate_many(W))))
    q = random_poly(rng, n, max(deg, 1))
    if not is_conjugate_flattening(q):
        assert np.max(np.abs(q.evaluate_many(W).imag)) > 1e-6


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 3), st.integers(0, 3))
def test_compose_is_functorial(seed, n, deg):
    rng = np.random.default_rng(seed)
    p = random_poly(rng, n, deg)
    U, V = random_unitary(rng, n), random_unitary(rng, n)
    lhs = compose_linear(compose_linear(p, U), V)
    rhs = compose_linear(p, U @ V)
    assert lhs.max_abs_diff(rhs) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 3))
def test_compose_preserves_cf_and_degree(seed, n):
    rng = np.random.default_rng(seed)
    p = random_cf_poly(rng, n, 2)
    q = compose_linear(p, random_unitary(rng, n))
    assert q.degree <= p.degree
    assert is_conjugate_flattening(q, 1e-10)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 2))
def test_ring_axioms(seed, n):
    rng = np.random.default_rng(seed)
    p, q, r = (random_poly(rng, n, 2) for _ in range(3))
    assert ((p + q) + r).max_abs_diff(p + (q + r)) <= 1e-12
    assert ((p * q) * r).max_abs_diff(p * (q * r)) <= 1e-12
    assert (p * (q + r)).max_abs_diff(p * q + p * r) <= 1e-12
    assert (p * q).max_abs_diff(q * p) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 3))
def test_evaluation_is_homomorphism(seed, n):
    rng = np.random.default_rng(seed)
    p, q = random_poly(rng, n, 2), random_poly(rng, n, 2)
    w = rng.normal(size=n) + 1j * rng.normal(size=n)
    assert evaluate(p * q, w) == pytest.approx(evaluate(p, w) * evaluate(q, w), rel=1e-12, abs=1e-12)
    assert evaluate(p + q, w) == pytest.approx(evaluate(p, w) + evaluate(q, w), rel=1e-12, abs=1e-12)
