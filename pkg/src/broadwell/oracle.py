"""Brute-force referee: damped Newton on the discretized mild form.

The unknown is the flattened quartet (length ``4 n^2``).  The residual is
``F - mild_rhs(F)`` with the same midpoint quadrature the transport module
uses, so a solution of this system is exactly a fixed point of the
midpoint line solver.  The Jacobian is built by forward differences and
owes nothing to the fixed-point machinery.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BoundaryTrace, FieldQuartet, SolverParams, mollify
from .errors import IterationCap, SingularJacobian
from .transport import mild_rhs

MAX_CELLS = 16
FD_STEP = 1e-7


@dataclass
class NewtonInfo:
    iterations: int
    residual: float
    halvings: int


def _residual_fn(fb: BoundaryTrace, k: float, n: int, alpha: float, moll_radius: float,
                 frozen: FieldQuartet | None):
    fixed_moll = None if frozen is None else mollify(frozen.data, moll_radius)

    def residual(u: np.ndarray) -> np.ndarray:
        F = u.reshape(4, n, n)
        if alpha > 0 or moll_radius > 0:
            M = fixed_moll if fixed_moll is not None else mollify(F, moll_radius)
        else:
            M = None
        rhs, _ = mild_rhs(F, fb, k, alpha, M)
        return (F - rhs).ravel()

    return residual


def fd_jacobian(residual, u: np.ndarray, r0: np.ndarray | None = None) -> np.ndarray:
    """Forward-difference Jacobian with step ``1e-7 (1 + |u_j|)``."""
    r0 = residual(u) if r0 is None else r0
    J = np.empty((r0.size, u.size))
    for j in range(u.size):
        step = FD_STEP * (1.0 + abs(u[j]))
        up = u.copy()
        up[j] += step
        J[:, j] = (residual(up) - r0) / step
    return J


def damped_newton(residual, u0: np.ndarray, tol: float = 1e-11, max_iter: int = 50):
    """Newton on ``residual(u) = 0`` with step halving and projection onto ``u >= 0``.

    Returns ``(u, NewtonInfo)``.
    """
    u = np.array(u0, dtype=float)
    r = residual(u)
    norm = np.max(np.abs(r), initial=0.0)
    halvings = 0
    it = 0
    while norm > tol:
        if it >= max_iter:
            raise IterationCap(f"newton: {max_iter} iterations, residual {norm:.3e}")
        it += 1
        J = fd_jacobian(residual, u, r)
        try:
            du = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            du = None
        if du is None or not np.all(np.isfinite(du)):
            cond = float(np.linalg.cond(J))
            raise SingularJacobian(f"singular Jacobian at iteration {it} (cond {cond:.3e})",
                                   condition=cond)
        lam = 1.0
        while True:
            trial = np.maximum(u + lam * du, 0.0)
            rt = residual(trial)
            nt = np.max(np.abs(rt))
            if nt < norm or lam < 1e-10:
                break
            lam *= 0.5
            halvings += 1
        if not nt < norm:
            cond = float(np.linalg.cond(J))
            raise SingularJacobian(f"no descent at iteration {it} (cond {cond:.3e})",
                                   condition=cond)
        u, r, norm = trial, rt, nt
    return u, NewtonInfo(it, float(norm), halvings)


def newton_solve(fb: BoundaryTrace, k: float, n_cells: int | None = None,
                 initial: FieldQuartet | None = None, alpha: float = 0.0,
                 moll_radius: float = 0.0, frozen: FieldQuartet | None = None,
                 tol: float = 1e-11, max_iter: int = 50, return_info: bool = False):
    """Solve the discretized truncated system by damped Newton.

    With ``alpha > 0`` the damped system is solved instead; its mollified
    partners come from ``frozen`` when given (one application of the damped
    map) or from the unknown itself (the damped fixed point).
    """
    n = fb.n_cells if n_cells is None else int(n_cells)
    if n != fb.n_cells:
        raise ValueError(f"n_cells={n} does not match the boundary data ({fb.n_cells})")
    if n > MAX_CELLS:
        raise ValueError(f"the oracle is limited to n_cells <= {MAX_CELLS}")
    residual = _residual_fn(fb, k, n, alpha, moll_radius, frozen)
    u0 = np.zeros(4 * n * n) if initial is None else np.array(initial.data, dtype=float).ravel()
    if np.any(u0 < 0):
        raise ValueError("initial guess must be nonnegative")
    u, info = damped_newton(residual, u0, tol, max_iter)
    F = FieldQuartet(u.reshape(4, n, n))
    return (F, info) if return_info else F


def cross_validate(fb: BoundaryTrace, k: float, n_cells: int | None = None,
                   params: SolverParams | None = None) -> float:
    """L1 distance between the Newton oracle and :func:`solve_truncated` on the same data."""
    from .fixed_point import solve_truncated

    params = SolverParams(k=k) if params is None else params
    if params.scheme != "midpoint":
        raise ValueError("the oracle discretizes the midpoint scheme only")
    F_fp, _ = solve_truncated(fb, k, params)
    F_nt = newton_solve(fb, k, n_cells, initial=None)
    return F_fp.l1_distance(F_nt)
