"""Linear transport along characteristic lines with frozen coefficients.

Each component travels along one axis:

    F1: +x (enters at x=0)   F2: -x (enters at x=1)
    F3: +y (enters at y=0)   F4: -y (enters at y=1)

Within a cell the gain ``g`` and absorption ``a`` are constant.  Two cell
updates are available:

``"exponential"``
    exact solution of ``F' = g - a F`` inside the cell.
``"midpoint"``
    the loss is frozen at the cell-center value, ``F' = g - a u_c``; this is
    the exact transport of a piecewise-constant collision rate, so the mild
    form with midpoint quadrature holds exactly and ``F1 + F2`` (``F3 + F4``)
    is conserved along lines to rounding.  Positive and monotone for
    ``a * spacing <= 2``; larger optical depths raise ``ValueError``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import SCHEMES, BoundaryTrace, FieldQuartet, truncate

SMALL_OPTICAL_DEPTH = 1e-12
# the midpoint update is positive and monotone only below this optical depth per cell
MIDPOINT_MAX_DEPTH = 2.0

# 0-based component tables for the collision coefficients of each equation:
# gain = t(F[plain]) * t(M[moll]), loss = t(F[own]) * t(M[partner]).
GAIN_PLAIN = (2, 3, 0, 1)
GAIN_MOLL = (3, 2, 1, 0)
LOSS_PARTNER = (1, 0, 3, 2)


class Direction(enum.Enum):
    X_FORWARD = 1
    X_BACKWARD = 2
    Y_FORWARD = 3
    Y_BACKWARD = 4

    @property
    def backward(self) -> bool:
        return self in (Direction.X_BACKWARD, Direction.Y_BACKWARD)


@dataclass
class LineProblem:
    """One characteristic line: ``gain``/``absorption`` are listed in grid order
    (increasing coordinate), whatever the travel direction."""

    direction: Direction
    inflow: float
    gain: np.ndarray
    absorption: np.ndarray
    damping: float = 0.0

    def __post_init__(self):
        self.direction = Direction(self.direction)
        self.gain = np.asarray(self.gain, dtype=float)
        self.absorption = np.asarray(self.absorption, dtype=float)
        if self.gain.shape != self.absorption.shape or self.gain.ndim != 1:
            raise ValueError("gain and absorption must be 1-D arrays of equal length")
        if self.inflow < 0 or self.damping < 0:
            raise ValueError("inflow and damping must be >= 0")
        if np.any(self.gain < 0) or np.any(self.absorption < 0):
            raise ValueError("gain and absorption must be entrywise >= 0")


def march(inflow, gain, absorption, h: float, scheme: str = "midpoint"):
    """March a batch of lines.

    Arrays are ``(n_lines, n_cells)`` ordered along the direction of travel.
    Returns the cell-center values and the exit values at the far end.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    gain = np.asarray(gain, dtype=float)
    absorption = np.asarray(absorption, dtype=float)
    E = np.array(inflow, dtype=float, copy=True)
    centers = np.empty_like(gain)
    if scheme == "midpoint":
        depth = float(np.max(absorption, initial=0.0)) * h
        if depth > MIDPOINT_MAX_DEPTH:
            raise ValueError(f"absorption * spacing = {depth:.3g} > {MIDPOINT_MAX_DEPTH:g}: the "
                             "midpoint update loses positivity; refine the grid or use "
                             "scheme='exponential'")
        half = 0.5 * h
        for j in range(gain.shape[1]):
            g, a = gain[:, j], absorption[:, j]
            u = (E + half * g) / (1.0 + half * a)
            centers[:, j] = u
            E = E + h * (g - a * u)
    else:
        small = absorption * h < SMALL_OPTICAL_DEPTH
        a_safe = np.where(small, 1.0, absorption)
        for j in range(gain.shape[1]):
            g, a, sm = gain[:, j], a_safe[:, j], small[:, j]
            centers[:, j] = _exact_step(E, g, a, sm, 0.5 * h)
            E = _exact_step(E, g, a, sm, h)
    return centers, E


def _exact_step(E, g, a, small, s):
    # F(s) = E e^{-as} + g (1 - e^{-as}) / a, with the a -> 0 limit E + g s
    phi = np.where(small, s, -np.expm1(-a * s) / a)
    decay = np.where(small, 1.0, np.exp(-a * s))
    return E * decay + g * phi


def solve_line(p: LineProblem, scheme: str = "exponential") -> np.ndarray:
    """Cell-center values of the line problem ``p`` (grid order).

    The default scheme is the exact exponential integration; pass
    ``scheme="midpoint"`` for the conservative update used by the coupled
    solvers.
    """
    h = 1.0 / p.gain.size
    g, a = p.gain, p.absorption + p.damping
    if p.direction.backward:
        g, a = g[::-1], a[::-1]
    centers, _ = march(np.array([p.inflow]), g[None, :], a[None, :], h, scheme)
    out = centers[0]
    return out[::-1].copy() if p.direction.backward else out


def to_lines(field: np.ndarray, component: int) -> np.ndarray:
    """View of a ``(n, n)`` field as lines ordered along the travel of ``component`` (0-based)."""
    if component == 0:
        return field.T
    if component == 1:
        return field.T[:, ::-1]
    if component == 2:
        return field
    if component == 3:
        return field[:, ::-1]
    raise ValueError(f"component index must be 0..3, got {component}")


def from_lines(lines: np.ndarray, component: int) -> np.ndarray:
    if component == 0:
        return lines.T
    if component == 1:
        return lines[:, ::-1].T
    if component == 2:
        return lines
    if component == 3:
        return lines[:, ::-1]
    raise ValueError(f"component index must be 0..3, got {component}")


def inflow_values(fb: BoundaryTrace, k: float) -> np.ndarray:
    """Truncated traces ``f_bi ^ k/2`` as a ``(4, n)`` array."""
    return np.minimum(fb.data, k / 2.0)


def solve_field(component: int, inflow, gain, absorption, scheme: str = "midpoint",
                return_exit: bool = False):
    """Transport one component (0-based) over the whole square.

    ``gain`` and ``absorption`` are ``(n, n)`` fields indexed ``(i_x, i_y)``.
    """
    n = gain.shape[0]
    centers, exit_ = march(inflow, to_lines(gain, component),
                           to_lines(absorption, component), 1.0 / n, scheme)
    out = np.ascontiguousarray(from_lines(centers, component))
    return (out, exit_) if return_exit else out


def component_coefficients(frozen: np.ndarray, component: int, k: float,
                           damping: float = 0.0, mollified: np.ndarray | None = None,
                           lag: np.ndarray | None = None):
    """Gain and absorption of equation ``component`` (0-based) with frozen fields.

    The loss ``t(F_own) t(M_partner)`` is written as ``F_own * a`` with
    ``a = t(M_partner) / (1 + lag/k)``; ``lag`` defaults to the frozen own
    field, so at a fixed point ``a F_own`` is exactly the truncated loss.
    """
    M = frozen if mollified is None else mollified
    gain = truncate(frozen[GAIN_PLAIN[component]], k) * truncate(M[GAIN_MOLL[component]], k)
    own = frozen[component] if lag is None else lag
    denom = 1.0 if np.isinf(k) else 1.0 + own / k
    absorption = truncate(M[LOSS_PARTNER[component]], k) / denom + damping
    return gain, absorption


def solve_component(frozen: FieldQuartet, component: int, fb: BoundaryTrace, k: float,
                    damping: float = 0.0, mollified: np.ndarray | None = None,
                    lag: np.ndarray | None = None, scheme: str = "midpoint") -> np.ndarray:
    """Solve the linear transport of ``F_component`` (1-based) with coefficients from ``frozen``."""
    c = component - 1
    data = frozen.data if isinstance(frozen, FieldQuartet) else frozen
    gain, absorption = component_coefficients(data, c, k, damping, mollified, lag)
    return solve_field(c, inflow_values(fb, k)[c], gain, absorption, scheme)


def collision_rates(F: np.ndarray, k: float, damping: float = 0.0,
                    mollified: np.ndarray | None = None) -> np.ndarray:
    """Per-cell right-hand sides (gain - loss - damping*F) of the four equations,
    each along its own direction of travel."""
    R = np.empty_like(F)
    for c in range(4):
        g, a = component_coefficients(F, c, k, damping, mollified)
        R[c] = g - a * F[c]
    return R


def mild_rhs(F: FieldQuartet | np.ndarray, fb: BoundaryTrace, k: float, damping: float = 0.0,
             mollified: np.ndarray | None = None):
    """Mild-form right-hand side with midpoint quadrature.

    Returns ``(rhs, exits)``: the ``(4, n, n)`` values
    ``inflow + int_0^s rate`` at cell centers and the ``(4, n)`` values at
    the outflow faces.
    """
    data = F.data if isinstance(F, FieldQuartet) else np.asarray(F, dtype=float)
    n = data.shape[-1]
    h = 1.0 / n
    R = collision_rates(data, k, damping, mollified)
    inflow = inflow_values(fb, k)
    rhs = np.empty_like(data)
    exits = np.empty((4, n))
    for c in range(4):
        r = to_lines(R[c], c)
        cum = np.cumsum(r, axis=1)
        rhs[c] = from_lines(inflow[c][:, None] + h * (cum - 0.5 * r), c)
        exits[c] = inflow[c] + h * cum[:, -1]
    return rhs, exits


def mild_residual(F: FieldQuartet, fb: BoundaryTrace, k: float, damping: float = 0.0,
                  mollified: np.ndarray | None = None) -> np.ndarray:
    """L1 norm, per component, of ``F - mild_rhs(F)``."""
    rhs, _ = mild_rhs(F, fb, k, damping, mollified)
    return np.abs(F.data - rhs).sum(axis=(1, 2)) * F.h**2


def outflow_traces(F: FieldQuartet, fb: BoundaryTrace, k: float, scheme: str = "midpoint",
                   damping: float = 0.0, mollified: np.ndarray | None = None) -> np.ndarray:
    """Values on the outflow faces, continued from the last cell center over half a cell.

    Row ``c`` holds ``F1(1,y)``, ``F2(0,y)``, ``F3(x,1)``, ``F4(x,0)``.
    """
    data = F.data
    h = F.h
    out = np.empty((4, F.n_cells))
    for c in range(4):
        g, a = component_coefficients(data, c, k, damping, mollified)
        u = to_lines(data[c], c)[:, -1]
        g, a = to_lines(g, c)[:, -1], to_lines(a, c)[:, -1]
        if scheme == "midpoint":
            out[c] = u + 0.5 * h * (g - a * u)
        else:
            small = a * h < SMALL_OPTICAL_DEPTH
            out[c] = _exact_step(u, g, np.where(small, 1.0, a), small, 0.5 * h)
    return out
