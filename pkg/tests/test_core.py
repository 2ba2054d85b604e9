from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from broadwell import (BoundaryTrace, FieldQuartet, Grid, SolverParams, mass, mollify, truncate,
                       truncate_boundary, truncated_collision)
from broadwell.core import component_masses, mollifier_kernel

nonneg = st.floats(0.0, 1e6, allow_nan=False, allow_infinity=False)
kvals = st.floats(1e-3, 1e6, allow_nan=False)


def quartet_of(values, n=3):
    return FieldQuartet(np.asarray(values, float)[:, None, None] * np.ones((4, n, n)))


# grid / containers

def test_grid_spacing_exact():
    for n in (2, 3, 7, 32):
        g = Grid(n)
        assert g.spacing * n == 1
        assert isinstance(g.spacing, Fraction)
        assert np.allclose(g.centers, (np.arange(n) + 0.5) / n)


@pytest.mark.parametrize("n", [0, 1, 2.5, -3])
def test_grid_rejects_small(n):
    with pytest.raises(ValueError):
        Grid(n)


def test_meshgrid_is_ij():
    X, Y = Grid(4).meshgrid()
    assert X[1, 0] == 0.375 and Y[0, 1] == 0.375


@pytest.mark.parametrize("bad", [-1e-9, np.nan, np.inf])
def test_boundary_rejects_bad_samples(bad):
    with pytest.raises(ValueError):
        BoundaryTrace([0.1, bad], [0, 0], [0, 0], [0, 0])


def test_boundary_mass_and_entropy():
    fb = BoundaryTrace([1, 3], [0, 0], [0.5, 0.5], [np.e, np.e])
    assert fb.mass == pytest.approx(0.5 * (4 + 1 + 2 * np.e))
    # ln+ ignores samples below 1
    assert fb.entropy == pytest.approx(0.5 * (3 * np.log(3) + 2 * np.e))


def test_boundary_is_read_only():
    fb = BoundaryTrace.constant(4, 0.2)
    with pytest.raises(ValueError):
        fb.data[0, 0] = 1.0


def test_quartet_rejects_negative_and_nan():
    with pytest.raises(ValueError):
        FieldQuartet(-np.ones((4, 2, 2)))
    with pytest.raises(ValueError):
        FieldQuartet(np.full((4, 2, 2), np.nan))
    with pytest.raises(ValueError):
        FieldQuartet(np.ones((3, 2, 2)))


def test_solver_params_validation():
    SolverParams(k_schedule=(1, 2, 4), alpha_schedule=(1, 0.5))
    with pytest.raises(ValueError):
        SolverParams(k_schedule=(4, 2))
    with pytest.raises(ValueError):
        SolverParams(alpha_schedule=(0.5, 1.0))
    with pytest.raises(ValueError):
        SolverParams(tol_outer=0.0)
    with pytest.raises(ValueError):
        SolverParams(k=0)
    with pytest.raises(ValueError):
        SolverParams(scheme="rk4")
    assert SolverParams().replace(k=3).k == 3


# truncated collision

def test_collision_constant_is_zero():
    for k in (0.5, 8, 1e9):
        assert np.all(truncated_collision(quartet_of([0.7] * 4), k) == 0)


def test_collision_large_k():
    Q = truncated_collision(quartet_of([1, 2, 3, 4]), 1e9)
    assert np.allclose(Q, 10.0, atol=1e-6)


def test_collision_hand_value():
    Q = truncated_collision(quartet_of([2, 2, 0, 0]), 2.0)
    assert np.allclose(Q, -1.0, atol=1e-15)


@given(arrays(float, (4, 2, 2), elements=nonneg), kvals)
def test_collision_antisymmetric(F, k):
    swapped = F[[2, 3, 0, 1]]
    assert np.array_equal(truncated_collision(F, k), -truncated_collision(swapped, k))


@given(arrays(float, (4, 2, 2), elements=nonneg), kvals)
def test_collision_bounded(F, k):
    assert np.all(np.abs(truncated_collision(F, k)) <= k * k)


@given(nonneg, nonneg, kvals)
def test_truncate_monotone(u, v, k):
    lo, hi = min(u, v), max(u, v)
    assert truncate(lo, k) <= truncate(hi, k)
    assert truncate(hi, k) < k or hi == 0


def test_truncate_infinite_k_is_identity():
    u = np.array([0.0, 1.5, 1e12])
    assert np.array_equal(truncate(u, np.inf), u)


# boundary truncation

def test_truncate_boundary_examples():
    fb = BoundaryTrace.constant(4, 0.3)
    assert truncate_boundary(fb, 10) == fb
    assert np.all(truncate_boundary(BoundaryTrace.constant(4, 7.0), 4).data == 2.0)
    at_cap = BoundaryTrace.constant(4, 2.5)
    assert truncate_boundary(at_cap, 5.0) == at_cap


@given(arrays(float, (4, 5), elements=nonneg), kvals, kvals)
def test_truncate_boundary_idempotent_and_monotone(data, k1, k2):
    fb = BoundaryTrace(*data)
    once = truncate_boundary(fb, k1)
    assert truncate_boundary(once, k1) == once
    lo, hi = min(k1, k2), max(k1, k2)
    assert np.all(truncate_boundary(fb, lo).data <= truncate_boundary(fb, hi).data)


# mollifier

def test_mollify_zero_radius_identity(rng):
    f = rng.random((8, 8))
    assert np.array_equal(mollify(f, 0.0), f)


def test_mollify_interior_of_constant():
    n, r = 40, 0.1
    out = mollify(np.ones((n, n)), r)
    c = (np.arange(n) + 0.5) / n
    d = np.minimum.outer(np.minimum(c, 1 - c), np.minimum(c, 1 - c))
    interior = d > r
    assert interior.any()
    assert np.allclose(out[interior], 1.0, atol=1e-12)


def test_mollify_spike():
    f = np.zeros((16, 16))
    f[8, 8] = 1.0
    out = mollify(f, 0.2)
    assert out.min() >= 0
    assert out.sum() <= 1.0 + 1e-14


def test_kernel_normalized():
    w = mollifier_kernel(0.3, 1 / 20)
    assert w.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(w, w.T) and np.allclose(w, w[::-1])


def test_mollify_stacked_matches_single(rng):
    F = rng.random((4, 10, 10))
    out = mollify(F, 0.25)
    for i in range(4):
        assert np.allclose(out[i], mollify(F[i], 0.25))


@given(arrays(float, (9, 9), elements=st.floats(0, 100)), st.floats(0, 0.6))
def test_mollify_positive_and_mass_nonincreasing(f, r):
    out = mollify(f, r)
    assert out.min() >= 0
    assert out.sum() <= f.sum() * (1 + 1e-12) + 1e-12


def test_mollify_negative_radius():
    with pytest.raises(ValueError):
        mollify(np.ones((3, 3)), -0.1)


# mass

def test_mass_examples():
    assert mass(np.ones((5, 5))) == 1.0
    assert mass(np.zeros((5, 5))) == 0.0
    assert mass(FieldQuartet.constant(16, 0.5)) == 2.0
    assert component_masses(FieldQuartet.constant(4, [1, 2, 3, 4])) == (1.0, 2.0, 3.0, 4.0)
