import numpy as np
import pytest

from broadwell import (BoundaryTrace, FieldQuartet, SolverParams, cross_validate, mild_residual,
                       newton_solve)
from broadwell.errors import IterationCap, SingularJacobian
from broadwell.oracle import damped_newton, fd_jacobian

from conftest import REF_K, reference_trace


def test_equilibrium_two_steps():
    n = 6
    G, info = newton_solve(BoundaryTrace.constant(n, 0.5), 10.0, return_info=True)
    assert info.iterations <= 2
    assert np.abs(G.data - 0.5).max() <= 1e-12


def test_zero_data():
    G = newton_solve(BoundaryTrace.constant(5, 0.0), 8.0)
    assert np.all(G.data == 0)


def test_two_initial_points():
    fb = reference_trace(8)
    a = newton_solve(fb, REF_K)
    b = newton_solve(fb, REF_K, initial=FieldQuartet.constant(8, 1.0))
    assert a.l1_distance(b) <= 1e-10
    assert mild_residual(a, fb, REF_K).max() <= 1e-11


def test_grid_budget():
    with pytest.raises(ValueError):
        newton_solve(BoundaryTrace.constant(17, 0.1), 8.0)
    with pytest.raises(ValueError):
        newton_solve(BoundaryTrace.constant(4, 0.1), 8.0, n_cells=5)


def test_fd_jacobian_linear():
    A = np.array([[2.0, 1.0], [0.5, 3.0]])
    J = fd_jacobian(lambda u: A @ u, np.array([0.3, 0.7]))
    assert np.allclose(J, A, atol=1e-6)


def test_damped_newton_errors():
    with pytest.raises(SingularJacobian) as exc:
        damped_newton(lambda u: np.array([u[0] + u[1] - 1, u[0] + u[1] - 2]), np.zeros(2))
    assert exc.value.condition is None or exc.value.condition > 1e12
    with pytest.raises(IterationCap):
        damped_newton(lambda u: u**3 - 8.0 + 1e-3 * np.cos(40 * u), np.full(1, 50.0), max_iter=2)


def test_cross_validate_equilibrium():
    assert cross_validate(BoundaryTrace.constant(6, 0.5), 10.0, params=SolverParams(k=10)) <= 1e-12


def test_cross_validate_reference():
    assert cross_validate(reference_trace(8), REF_K, params=SolverParams(k=REF_K)) <= 1e-8


@pytest.mark.parametrize("k", [4.0, 64.0])
def test_cross_validate_k(k):
    n = 8
    s = (np.arange(n) + 0.5) / n
    fb = BoundaryTrace(3 * s, np.full(n, 1.5), 2 - s, np.full(n, 0.8))
    assert cross_validate(fb, k, params=SolverParams(k=k)) <= 1e-8


def test_cross_validate_rejects_exponential():
    with pytest.raises(ValueError):
        cross_validate(BoundaryTrace.constant(4, 0.1), 8.0,
                       params=SolverParams(k=8, scheme="exponential"))


def test_reference_values():
    # minted by this oracle on the 8x8 reference problem and frozen
    G = newton_solve(reference_trace(8), REF_K)
    masses = G.data.sum(axis=(1, 2)) / 64
    assert np.allclose(masses, [0.40617511171856635, 0.10665747585224342,
                                0.2936632430649014, 0.19350416936428882], atol=1e-10, rtol=0)
    assert G.data[0, -1, 0] == pytest.approx(0.4115476568624189, abs=1e-10)
