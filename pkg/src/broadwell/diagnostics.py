"""A-posteriori checks on a computed quartet.

Everything here is read-only: conservation along lines and through the
boundary, entropy production, tail masses, translation moduli, exceptional
sets of characteristic lines and the renormalized weak residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import BoundaryTrace, FieldQuartet, SolverParams, component_masses, truncate
from .transport import inflow_values, mild_residual, outflow_traces

SENTINEL = 1e300
AXES = {"x": 0, "y": 1}
# direction of travel along the component's axis
TRAVEL_SIGN = (1.0, -1.0, 1.0, -1.0)
TRAVEL_AXIS = (0, 0, 1, 1)
# component i sees collision_sign * (t3 t4 - t1 t2)
COLLISION_SIGN = (1.0, 1.0, -1.0, -1.0)


def flux_balance(F: FieldQuartet, fb: BoundaryTrace, k: float, scheme: str = "midpoint"):
    """``(inflow, outflow, |inflow - outflow|)`` through the boundary of the square."""
    h = F.h
    inflow = float(h * inflow_values(fb, k).sum())
    outflow = float(h * outflow_traces(F, fb, k, scheme).sum())
    return inflow, outflow, abs(inflow - outflow)


def line_conservation(F: FieldQuartet, fb: BoundaryTrace | None = None,
                      k: float | None = None) -> float:
    """Largest spread of ``F1 + F2`` along a row or of ``F3 + F4`` along a column."""
    s12 = F.data[0] + F.data[1]   # constant in x (axis 0) for a solution
    s34 = F.data[2] + F.data[3]
    dev12 = np.max(s12.max(axis=0) - s12.min(axis=0))
    dev34 = np.max(s34.max(axis=1) - s34.min(axis=1))
    return float(max(dev12, dev34))


def entropy_production_terms(F: FieldQuartet | np.ndarray, k: float):
    """Pointwise ``(a - b) ln(a / b)`` with ``a = t(F1) t(F2)``, ``b = t(F3) t(F4)``.

    Returns ``(terms, singular)``.  Cells where exactly one of ``a``, ``b``
    vanishes have an infinite term; they hold ``SENTINEL`` and are flagged.
    """
    d = F.data if isinstance(F, FieldQuartet) else np.asarray(F, dtype=float)
    t = truncate(d, k)
    a, b = t[0] * t[1], t[2] * t[3]
    pos = (a > 0) & (b > 0)
    singular = (a > 0) != (b > 0)
    terms = np.zeros_like(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.log(a[pos]) - np.log(b[pos])
    terms[pos] = (a[pos] - b[pos]) * ratio
    terms[singular] = SENTINEL
    return terms, singular


def entropy_production(F: FieldQuartet | np.ndarray, k: float) -> float:
    """Quadrature of the entropy production, singular cells excluded."""
    terms, singular = entropy_production_terms(F, k)
    n = terms.shape[-1]
    return float(np.where(singular, 0.0, terms).sum() / n**2)


def tail_mass(F: FieldQuartet, threshold: float) -> float:
    d = F.data
    return float(np.where(d > threshold, d, 0.0).sum() * F.h**2)


def _shift_cells(h: float, spacing: float) -> int:
    m = h / spacing
    r = round(m)
    if abs(m - r) > 1e-9 * max(1.0, abs(m)):
        raise ValueError(f"shift {h!r} is not a multiple of the spacing {spacing!r}")
    return int(r)


def translation_modulus(f: np.ndarray, axis: str | int, h: float,
                        renormalize: bool = False) -> float:
    """``int |f(z + h e_axis) - f(z)| dz`` over the overlap of the square with its shift.

    ``h`` must be an integer number of cells (of either sign); ``renormalize``
    measures ``ln(1 + f)`` instead of ``f``.
    """
    f = np.asarray(f, dtype=float)
    n = f.shape[-1]
    ax = AXES[axis] if isinstance(axis, str) else int(axis)
    m = abs(_shift_cells(h, 1.0 / n))
    if m == 0:
        return 0.0
    if m >= n:
        return 0.0
    g = np.log1p(f) if renormalize else f
    lo = np.take(g, np.arange(n - m), axis=ax)
    hi = np.take(g, np.arange(m, n), axis=ax)
    return float(np.abs(hi - lo).sum() / n**2)


@dataclass
class ExceptionalSet:
    pair: tuple[int, int]
    threshold: float          # Lambda / eps
    measure: float
    indices: np.ndarray
    max_first: float          # largest first-member value off the set
    max_second: float
    bound_first: float        # (L/e) exp(2L/e)
    bound_second: float       # 2 (L/e) exp(2L/e)

    @property
    def within_bounds(self) -> bool:
        return self.max_first <= self.bound_first and self.max_second <= self.bound_second


def _exp_or_inf(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def exceptional_set(F: FieldQuartet, fb: BoundaryTrace, eps: float, lam: float,
                    pair=(1, 2), k: float = math.inf, scheme: str = "midpoint") -> ExceptionalSet:
    """Characteristic lines whose entering data or exiting value reach ``lam/eps``.

    For the pair (1, 2) these are rows ``y`` with ``f_b2(y) >= lam/eps`` or
    ``F1(1, y) >= lam/eps``; for (3, 4) columns with ``f_b4`` or ``F3(x, 1)``.
    Off the set the pair should obey ``F_first <= (lam/eps) e^{2 lam/eps}``
    and ``F_second <= 2 (lam/eps) e^{2 lam/eps}``.
    """
    if not (eps > 0 and lam > 0):
        raise ValueError("eps and lam must be > 0")
    pair = tuple(pair)
    if pair not in ((1, 2), (3, 4)):
        raise ValueError("pair must be (1, 2) or (3, 4)")
    first, second = pair[0] - 1, pair[1] - 1
    thr = lam / eps
    out = outflow_traces(F, fb, k, scheme)[first]
    flagged = (fb[second] >= thr) | (out >= thr)
    idx = np.flatnonzero(flagged)
    keep = ~flagged
    # rows are the second index for the x-pair, columns the first for the y-pair
    if first == 0:
        f1, f2 = F.data[first][:, keep], F.data[second][:, keep]
    else:
        f1, f2 = F.data[first][keep, :], F.data[second][keep, :]
    bound = thr * _exp_or_inf(2.0 * thr)
    return ExceptionalSet(pair, thr, float(flagged.mean()), idx,
                          float(f1.max(initial=0.0)), float(f2.max(initial=0.0)),
                          bound, 2.0 * bound)


def default_test_functions(max_degree: int = 2):
    """Monomials ``x^a y^b`` with ``a, b <= max_degree`` as ``(a, b)`` exponent pairs."""
    return [(a, b) for a in range(max_degree + 1) for b in range(max_degree + 1)]


def _monomial(a: int, b: int, x, y):
    return x**a * y**b


def _monomial_grad(a: int, b: int, x, y, axis: int):
    if axis == 0:
        return a * x ** max(a - 1, 0) * y**b if a else np.zeros(np.broadcast(x, y).shape)
    return b * y ** max(b - 1, 0) * x**a if b else np.zeros(np.broadcast(x, y).shape)


def renormalized_residual(F: FieldQuartet, fb: BoundaryTrace, k: float, test_fns=None,
                          scheme: str = "midpoint") -> np.ndarray:
    """Mismatch in the weak form of the equations for ``ln(1 + F_i)``.

    For each component, with ``s = +-1`` the direction of travel along its
    axis and test function ``phi``, compares

        int_out phi L  -  int_in phi L  -  s * int L d_axis(phi)

    with ``int phi R`` where ``L = ln(1 + F_i)`` and ``R`` is the truncated
    collision term divided by ``1 + F_i``.  Test functions are ``(a, b)``
    exponent pairs for ``x^a y^b``.  Returns the max absolute mismatch per
    component.
    """
    fns = default_test_functions() if test_fns is None else list(test_fns)
    n = F.n_cells
    h = F.h
    c = (np.arange(n) + 0.5) * h
    X, Y = np.meshgrid(c, c, indexing="ij")
    inflow = inflow_values(fb, k)
    outflow = outflow_traces(F, fb, k, scheme)
    t = truncate(F.data, k)
    Q = t[2] * t[3] - t[0] * t[1]
    res = np.zeros(4)
    for i in range(4):
        s, ax = TRAVEL_SIGN[i], TRAVEL_AXIS[i]
        L = np.log1p(F.data[i])
        R = COLLISION_SIGN[i] * Q / (1.0 + F.data[i])
        # face coordinates: where the component enters and leaves
        x_in, x_out = (0.0, 1.0) if s > 0 else (1.0, 0.0)
        for a, b in fns:
            if ax == 0:
                phi_out, phi_in = _monomial(a, b, x_out, c), _monomial(a, b, x_in, c)
            else:
                phi_out, phi_in = _monomial(a, b, c, x_out), _monomial(a, b, c, x_in)
            boundary = h * (np.sum(phi_out * np.log1p(outflow[i]))
                            - np.sum(phi_in * np.log1p(inflow[i])))
            volume = h * h * np.sum(L * _monomial_grad(a, b, X, Y, ax))
            lhs = boundary - s * volume
            rhs = h * h * np.sum(_monomial(a, b, X, Y) * R)
            res[i] = max(res[i], abs(lhs - rhs))
    return res


def gain_term(F: FieldQuartet, component: int, k: float) -> np.ndarray:
    """Truncated gain ``t(F_plain) t(F_partner_plain)`` of ``component`` (1-based)."""
    t = truncate(F.data, k)
    return t[2] * t[3] if component in (1, 2) else t[0] * t[1]


@dataclass
class DiagnosticsReport:
    k: float
    component_masses: tuple[float, float, float, float]
    mass_bound: float
    inflow_total: float
    outflow_total: float
    flux_deviation: float
    line_conservation_max_dev: float
    entropy_boundary: float
    entropy_production: float
    entropy_singular_cells: int
    entropy_production_untruncated: float
    tail_mass: float
    mild_residual: tuple[float, ...]
    renorm_residuals: tuple[float, ...]
    # (component, axis, shift_cells) -> (raw, renormalized)
    translation_moduli: dict = field(default_factory=dict)
    # (component, axis, shift_cells) -> raw modulus of the gain term
    gain_moduli: dict = field(default_factory=dict)
    exceptional: list[ExceptionalSet] = field(default_factory=list)
    spacing: float = 0.0

    @property
    def total_mass(self) -> float:
        return float(sum(self.component_masses))

    def to_flat(self) -> dict:
        """Flat ``str -> number`` view, keys sorted for stable serialization."""
        d: dict = {
            "k": self.k,
            "mass_total": self.total_mass,
            "mass_bound": self.mass_bound,
            "inflow_total": self.inflow_total,
            "outflow_total": self.outflow_total,
            "flux_deviation": self.flux_deviation,
            "line_conservation_max_dev": self.line_conservation_max_dev,
            "entropy_boundary": self.entropy_boundary,
            "entropy_production": self.entropy_production,
            "entropy_singular_cells": self.entropy_singular_cells,
            "entropy_production_untruncated": self.entropy_production_untruncated,
            "tail_mass": self.tail_mass,
        }
        for i in range(4):
            d[f"mass.F{i + 1}"] = self.component_masses[i]
            d[f"mild_residual.F{i + 1}"] = float(self.mild_residual[i])
            d[f"renorm_residual.F{i + 1}"] = float(self.renorm_residuals[i])
        for (comp, axis, m), (raw, ren) in self.translation_moduli.items():
            d[f"modulus.F{comp}.{axis}.{m}.raw"] = raw
            d[f"modulus.F{comp}.{axis}.{m}.renormalized"] = ren
        for (comp, axis, m), raw in self.gain_moduli.items():
            d[f"gain_modulus.F{comp}.{axis}.{m}"] = raw
        for ex in self.exceptional:
            tag = f"exceptional.F{ex.pair[0]}F{ex.pair[1]}"
            d[f"{tag}.threshold"] = ex.threshold
            d[f"{tag}.measure"] = ex.measure
            d[f"{tag}.max_first"] = ex.max_first
            d[f"{tag}.max_second"] = ex.max_second
            d[f"{tag}.bound_first"] = ex.bound_first
            d[f"{tag}.within_bounds"] = ex.within_bounds
        return dict(sorted(d.items()))

    def moduli_rows(self):
        """``(component, axis, h, raw, renormalized)`` rows in a fixed order."""
        return [(comp, axis, m * self.spacing, raw, ren)
                for (comp, axis, m), (raw, ren) in sorted(self.translation_moduli.items())]


def diagnose(F: FieldQuartet, fb: BoundaryTrace, k: float, params: SolverParams | None = None,
             shifts=(0, 1, 2, 4), eps: float = 0.5, lam: float = 2.0,
             test_fns=None) -> DiagnosticsReport:
    """Every diagnostic at once; ``shifts`` are translation lengths in cells."""
    scheme = params.scheme if params is not None else "midpoint"
    n = F.n_cells
    inflow, outflow, dev = flux_balance(F, fb, k, scheme)
    _, singular = entropy_production_terms(F, k)
    moduli, gain_moduli = {}, {}
    for comp in range(1, 5):
        g = gain_term(F, comp, k)
        for axis in ("x", "y"):
            for m in shifts:
                if m >= n:
                    continue
                moduli[(comp, axis, m)] = (
                    translation_modulus(F.data[comp - 1], axis, m / n),
                    translation_modulus(F.data[comp - 1], axis, m / n, renormalize=True))
                gain_moduli[(comp, axis, m)] = translation_modulus(g, axis, m / n)
    return DiagnosticsReport(
        k=float(k),
        component_masses=component_masses(F),
        mass_bound=2.0 * inflow,
        inflow_total=inflow,
        outflow_total=outflow,
        flux_deviation=dev,
        line_conservation_max_dev=line_conservation(F),
        entropy_boundary=fb.entropy,
        entropy_production=entropy_production(F, k),
        entropy_singular_cells=int(singular.sum()),
        entropy_production_untruncated=entropy_production(F, math.inf),
        tail_mass=tail_mass(F, k),
        mild_residual=tuple(float(v) for v in mild_residual(F, fb, k)),
        renorm_residuals=tuple(float(v) for v in renormalized_residual(F, fb, k, test_fns, scheme)),
        translation_moduli=moduli,
        gain_moduli=gain_moduli,
        exceptional=[exceptional_set(F, fb, eps, lam, p, k, scheme) for p in ((1, 2), (3, 4))],
        spacing=1.0 / n,
    )
