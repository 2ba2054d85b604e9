"""Grids, fields, boundary traces and the truncated Broadwell collision term.

Fields are stored cell-centered on a uniform ``n x n`` grid of the unit
square and indexed ``(i_x, i_y)``.  Every integral in the package is the
midpoint rule ``spacing**2 * sum(values)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import ndimage

SCHEMES = ("midpoint", "exponential")


@dataclass(frozen=True)
class Grid:
    n_cells: int

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 2:
            raise ValueError(f"n_cells must be an integer >= 2, got {self.n_cells!r}")

    @property
    def spacing(self) -> Fraction:
        return Fraction(1, self.n_cells)

    @property
    def h(self) -> float:
        return 1.0 / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) / self.n_cells

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-center coordinates ``(X, Y)`` with ``X[i_x, i_y] = x_i``."""
        c = self.centers
        return np.meshgrid(c, c, indexing="ij")


class BoundaryTrace:
    """Inflow data ``f_b1(y), f_b2(y), f_b3(x), f_b4(x)`` sampled at cell centers.

    ``fb1`` enters at x=0, ``fb2`` at x=1, ``fb3`` at y=0 and ``fb4`` at y=1.
    """

    def __init__(self, fb1, fb2, fb3, fb4):
        data = np.array([fb1, fb2, fb3, fb4], dtype=float)
        if data.ndim != 2:
            raise ValueError("boundary traces must be four 1-D arrays of equal length")
        if data.shape[1] < 2:
            raise ValueError("boundary traces need at least 2 samples")
        if not np.all(np.isfinite(data)):
            raise ValueError("boundary traces contain non-finite samples")
        if np.any(data < 0):
            raise ValueError("boundary traces must be nonnegative")
        data.setflags(write=False)
        self.data = data

    @classmethod
    def constant(cls, n: int, values: float | Sequence[float]) -> "BoundaryTrace":
        vals = np.broadcast_to(np.asarray(values, dtype=float), (4,))
        return cls(*(np.full(n, v) for v in vals))

    @property
    def n_cells(self) -> int:
        return self.data.shape[1]

    @property
    def h(self) -> float:
        return 1.0 / self.n_cells

    fb1 = property(lambda self: self.data[0])
    fb2 = property(lambda self: self.data[1])
    fb3 = property(lambda self: self.data[2])
    fb4 = property(lambda self: self.data[3])

    def __getitem__(self, i: int) -> np.ndarray:
        return self.data[i]

    @property
    def mass(self) -> float:
        return float(self.h * self.data.sum())

    @property
    def entropy(self) -> float:
        """Quadrature of ``sum_i f_bi ln+ f_bi``."""
        d = self.data
        lnp = np.log(np.where(d > 1.0, d, 1.0))
        return float(self.h * np.sum(d * lnp))

    def __eq__(self, other):
        return isinstance(other, BoundaryTrace) and np.array_equal(self.data, other.data)

    def __repr__(self):
        return f"BoundaryTrace(n_cells={self.n_cells}, mass={self.mass:.6g})"


class FieldQuartet:
    """The four densities ``F1..F4`` as one ``(4, n, n)`` array."""

    def __init__(self, data, *, check: bool = True):
        data = np.array(data, dtype=float)
        if data.ndim != 3 or data.shape[0] != 4 or data.shape[1] != data.shape[2]:
            raise ValueError(f"expected shape (4, n, n), got {data.shape}")
        if check:
            if not np.all(np.isfinite(data)):
                raise ValueError("field contains non-finite entries")
            if np.any(data < 0):
                raise ValueError(f"field has negative entries (min {data.min():.3e})")
        self.data = data

    @classmethod
    def from_components(cls, f1, f2, f3, f4) -> "FieldQuartet":
        return cls(np.stack([f1, f2, f3, f4]))

    @classmethod
    def zeros(cls, n: int) -> "FieldQuartet":
        return cls(np.zeros((4, n, n)))

    @classmethod
    def constant(cls, n: int, values: float | Sequence[float]) -> "FieldQuartet":
        vals = np.broadcast_to(np.asarray(values, dtype=float), (4,))
        return cls(vals[:, None, None] * np.ones((4, n, n)))

    @property
    def n_cells(self) -> int:
        return self.data.shape[1]

    @property
    def h(self) -> float:
        return 1.0 / self.n_cells

    f1 = property(lambda self: self.data[0])
    f2 = property(lambda self: self.data[1])
    f3 = property(lambda self: self.data[2])
    f4 = property(lambda self: self.data[3])

    def __getitem__(self, i: int) -> np.ndarray:
        return self.data[i]

    def copy(self) -> "FieldQuartet":
        return FieldQuartet(self.data.copy(), check=False)

    def l1_distance(self, other: "FieldQuartet") -> float:
        return float(self.h**2 * np.abs(self.data - other.data).sum())

    def __repr__(self):
        return f"FieldQuartet(n_cells={self.n_cells}, mass={mass(self):.6g})"


@dataclass
class SolverParams:
    """Knobs for every solver stage.

    ``k`` is the truncation level, ``alpha`` the damping of the regularized
    system and ``moll_radius`` the support radius of the mollifier.  The
    ``tol_*`` values are L1 stopping thresholds.
    """

    k: float = 8.0
    alpha: float = 0.0
    moll_radius: float = 0.0
    tol_inner: float = 1e-13
    tol_outer: float = 1e-11
    tol_bracket: float = 1e-13
    max_inner: int = 20_000
    max_outer: int = 2_000
    max_bracket: int = 20_000
    k_schedule: tuple[float, ...] = ()
    alpha_schedule: tuple[float, ...] = ()
    scheme: str = "midpoint"

    def __post_init__(self):
        self.k_schedule = tuple(float(v) for v in self.k_schedule)
        self.alpha_schedule = tuple(float(v) for v in self.alpha_schedule)
        if not self.k > 0:
            raise ValueError("k must be > 0")
        if self.alpha < 0 or self.moll_radius < 0:
            raise ValueError("alpha and moll_radius must be >= 0")
        for name in ("tol_inner", "tol_outer", "tol_bracket"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("max_inner", "max_outer", "max_bracket"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if any(b <= a for a, b in zip(self.k_schedule, self.k_schedule[1:])):
            raise ValueError("k_schedule must be strictly increasing")
        if any(v <= 0 for v in self.k_schedule):
            raise ValueError("k_schedule entries must be > 0")
        if any(b >= a for a, b in zip(self.alpha_schedule, self.alpha_schedule[1:])):
            raise ValueError("alpha_schedule must be strictly decreasing")
        if any(v <= 0 for v in self.alpha_schedule):
            raise ValueError("alpha_schedule entries must be > 0")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")

    def replace(self, **changes) -> "SolverParams":
        return replace(self, **changes)


def truncate(u, k: float):
    """``t_k(u) = u / (1 + u/k)``, evaluated as ``u k / (k + u)``; ``k=inf`` gives ``u``."""
    u = np.asarray(u, dtype=float)
    if math.isinf(k):
        return u
    return u * k / (k + u)


def truncated_collision(F: FieldQuartet | np.ndarray, k: float) -> np.ndarray:
    """Gain minus loss ``t_k(F3) t_k(F4) - t_k(F1) t_k(F2)`` at every cell.

    This is the right-hand side seen by ``F1`` and ``F2``; ``F3`` and ``F4``
    see its negative.
    """
    d = F.data if isinstance(F, FieldQuartet) else np.asarray(F, dtype=float)
    t = truncate(d, k)
    return t[2] * t[3] - t[0] * t[1]


def truncate_boundary(fb: BoundaryTrace, k: float) -> BoundaryTrace:
    if not k > 0:
        raise ValueError("k must be > 0")
    return BoundaryTrace(*np.minimum(fb.data, k / 2.0))


def mollifier_kernel(radius: float, h: float) -> np.ndarray:
    """Discrete radial bump ``(1 - (r/radius)^2)^3`` with unit sum."""
    m = int(math.floor(radius / h))
    if m == 0:
        # support inside one cell; also avoids radius**2 underflow
        return np.ones((1, 1))
    offs = np.arange(-m, m + 1) * h
    r2 = (offs[:, None] ** 2 + offs[None, :] ** 2) / radius**2
    w = np.where(r2 < 1.0, (1.0 - r2) ** 3, 0.0)
    return w / w.sum()


def mollify(f: np.ndarray, radius: float) -> np.ndarray:
    """Convolve a cell-centered field with the bump kernel, zero-extended outside the square.

    Works on a single ``(n, n)`` field or on a stacked ``(..., n, n)`` array.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    f = np.asarray(f, dtype=float)
    if radius == 0:
        return f.copy()
    n = f.shape[-1]
    kern = mollifier_kernel(radius, 1.0 / n)
    if kern.shape == (1, 1):
        return f.copy()
    if f.ndim == 2:
        return ndimage.convolve(f, kern, mode="constant", cval=0.0)
    flat = f.reshape(-1, n, n)
    out = np.stack([ndimage.convolve(g, kern, mode="constant", cval=0.0) for g in flat])
    return out.reshape(f.shape)


def mass(f) -> float:
    """Midpoint quadrature of a scalar field, or the summed mass of a quartet."""
    d = f.data if isinstance(f, FieldQuartet) else np.asarray(f, dtype=float)
    n = d.shape[-1]
    return float(d.sum() / n**2)


def component_masses(F: FieldQuartet) -> tuple[float, float, float, float]:
    h2 = F.h**2
    return tuple(float(h2 * F.data[i].sum()) for i in range(4))
