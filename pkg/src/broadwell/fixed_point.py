"""Constructive solution path for the truncated stationary Broadwell system.

* :func:`damped_map` runs the monotone inner iteration of the damped and
  mollified system for frozen partner fields.
* :func:`picard_fixed_point` iterates that map to a fixed point, falling back
  to pair-wise bracketing when Picard stalls.
* :func:`alternating_bracket_pair` is the even/odd sandwich scheme for one
  pair of directions with frozen gain.
* :func:`solve_truncated` alternates the two pairs until the quartet settles.
* :func:`continuation` and :func:`damping_continuation` walk ``k`` up and
  ``alpha`` down with warm starts.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import BoundaryTrace, FieldQuartet, SolverParams, mollify, truncate
from .errors import BracketViolation, BroadwellError, NonMonotone
from .transport import component_coefficients, inflow_values, mild_residual, solve_field

log = logging.getLogger(__name__)

ORDER_SLACK = 1e-12
# early outer sweeps bracket the pairs only to this fraction of the last increment
INEXACT_FACTOR = 1e-2
INEXACT_CAP = 1e-3
PAIRS = {(1, 2): (0, 1), (3, 4): (2, 3)}


@dataclass
class StageReport:
    name: str
    iterations: int = 0
    converged: bool = False
    increment: float = math.inf
    wall_time: float = 0.0
    # worst ordering defect seen (monotone or sandwich); <= ORDER_SLACK when clean
    order_defect: float = 0.0
    violations: int = 0


@dataclass
class SolveReport:
    k: float
    alpha: float
    path: str
    converged: bool = False
    increment: float = math.inf
    mild_residual: list[float] = field(default_factory=lambda: [math.nan] * 4)
    residual_bound: float = math.nan
    stages: list[StageReport] = field(default_factory=list)
    bracket_width: float = 0.0
    bracket_sweeps: int = 0
    monotone_violations: int = 0
    bracket_violations: int = 0

    @property
    def iterations(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for s in self.stages:
            out[s.name] = out.get(s.name, 0) + s.iterations
        return out

    @property
    def wall_time(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for s in self.stages:
            out[s.name] = out.get(s.name, 0.0) + s.wall_time
        return out

    def to_dict(self, timing: bool = False) -> dict:
        """Plain-data view; wall times are left out unless ``timing`` so that
        reports of identical runs compare byte-for-byte."""
        d = {
            "k": self.k,
            "alpha": self.alpha,
            "path": self.path,
            "converged": self.converged,
            "increment": self.increment,
            "mild_residual": list(map(float, self.mild_residual)),
            "residual_bound": self.residual_bound,
            "iterations": self.iterations,
            "bracket_width": self.bracket_width,
            "bracket_sweeps": self.bracket_sweeps,
            "monotone_violations": self.monotone_violations,
            "bracket_violations": self.bracket_violations,
        }
        if timing:
            d["wall_time"] = self.wall_time
        return d


@dataclass
class BracketState:
    """Lower/upper iterates of a pair, each of shape ``(2, n, n)``."""

    lower: np.ndarray
    upper: np.ndarray
    width_history: list[float] = field(default_factory=list)
    sweeps: int = 0
    converged: bool = False
    order_defect: float = 0.0

    @property
    def width(self) -> float:
        return self.width_history[-1] if self.width_history else math.inf


def _l1(a: np.ndarray) -> float:
    n = a.shape[-1]
    return float(np.abs(a).sum() / n**2)


def _slack(*arrays) -> float:
    return ORDER_SLACK * max(1.0, *(float(np.max(a, initial=0.0)) for a in arrays))


def damped_map(frozen: FieldQuartet, fb: BoundaryTrace, params: SolverParams):
    """Apply the damped, mollified solution map to ``frozen``.

    Runs ``F^{n+1} = Phi(F^n)`` from ``F^0 = 0``: each component is transported
    with gain ``t(F^n_plain) t(M_moll)`` and absorption
    ``alpha + t(M_partner) / (1 + F^n_own / k)`` where ``M`` is the mollified
    frozen quartet.  The sweeps increase pointwise; a decrease beyond the
    rounding slack raises :class:`NonMonotone`.

    Returns ``(F, StageReport)``; on hitting ``max_inner`` the report has
    ``converged=False`` and the last sweep is returned.
    """
    if not params.alpha > 0:
        raise ValueError("damped_map needs alpha > 0")
    k, alpha = params.k, params.alpha
    M = mollify(frozen.data, params.moll_radius)
    inflow = inflow_values(fb, k)
    rep = StageReport("inner")
    t0 = time.perf_counter()
    F = np.zeros_like(frozen.data)
    for it in range(1, params.max_inner + 1):
        new = np.empty_like(F)
        for c in range(4):
            g, a = component_coefficients(F, c, k, alpha, M)
            new[c] = solve_field(c, inflow[c], g, a, params.scheme)
        defect = float(np.max(F - new))
        rep.order_defect = max(rep.order_defect, defect)
        if defect > _slack(new):
            rep.violations += 1
            raise NonMonotone(f"inner sweep {it} decreased by {defect:.3e}")
        rep.increment = _l1(new - F)
        F = new
        rep.iterations = it
        if rep.increment <= params.tol_inner:
            rep.converged = True
            break
    else:
        log.warning("damped_map: max_inner=%d reached (increment %.3e)",
                    params.max_inner, rep.increment)
    rep.wall_time = time.perf_counter() - t0
    return FieldQuartet(F), rep


def _damped_residual(F: FieldQuartet, fb, params):
    M = mollify(F.data, params.moll_radius)
    return mild_residual(F, fb, params.k, params.alpha, M)


def picard_fixed_point(fb: BoundaryTrace, params: SolverParams,
                       initial: FieldQuartet | None = None):
    """Fixed point of the damped map by Picard iteration ``f <- damped_map(f)``.

    Existence of the fixed point does not make Picard converge; on hitting
    ``max_outer`` the damped system is re-solved by pair bracketing from the
    last iterate and ``report.path`` says which route produced the result.
    """
    n = fb.n_cells
    f = FieldQuartet.zeros(n) if initial is None else initial.copy()
    report = SolveReport(k=params.k, alpha=params.alpha, path="picard")
    for it in range(1, params.max_outer + 1):
        t0 = time.perf_counter()
        F, inner = damped_map(f, fb, params)
        report.stages.append(inner)
        report.monotone_violations += inner.violations
        report.increment = f.l1_distance(F)
        report.stages.append(StageReport("outer", 1, wall_time=time.perf_counter() - t0,
                                         increment=report.increment))
        f = F
        if report.increment <= params.tol_outer and inner.converged:
            report.converged = True
            break
    if not report.converged:
        log.warning("picard_fixed_point: no convergence after %d sweeps (increment %.3e); "
                    "falling back to bracketing", params.max_outer, report.increment)
        f, fallback = _pair_alternation(fb, params, f, damping=params.alpha,
                                        moll_radius=params.moll_radius)
        fallback.path = "bracket-fallback"
        fallback.stages = report.stages + fallback.stages
        fallback.monotone_violations = report.monotone_violations
        report = fallback
    report.mild_residual = list(_damped_residual(f, fb, params))
    report.residual_bound = 10 * params.tol_outer
    return f, report


def alternating_bracket_pair(gain, fb_pair, k: float, params: SolverParams,
                             pair=(1, 2), damping: float = 0.0, moll_radius: float = 0.0):
    """Even/odd sandwich iteration for one pair with frozen gain.

    ``gain`` is one ``(n, n)`` field shared by both members or a tuple of two.
    Iterate ``l+1`` of the first member has absorption
    ``damping + t(mu * f_second^l) / (1 + f_first^{l-1} / k)`` and symmetrically
    for the second member, starting from ``f^{-1} = f^0 = 0``.  Odd iterates
    decrease from above, even ones increase from below, and every step checks

        f^{2l} <= f^{2l+2} <= f^{2l+3} <= f^{2l+1}

    (raising :class:`BracketViolation`).  Stops when the summed L1 width of
    ``upper - lower`` is at most ``params.tol_bracket``.

    Returns ``((first, second), BracketState)`` with the bracket midpoints.
    """
    c0, c1 = PAIRS[tuple(pair)]
    gains = (gain, gain) if isinstance(gain, np.ndarray) else tuple(gain)
    g = np.stack([np.asarray(x, dtype=float) for x in gains])
    n = g.shape[-1]
    inflow = np.minimum(np.asarray(fb_pair, dtype=float), k / 2.0)
    denom = (lambda v: 1.0) if math.isinf(k) else (lambda v: 1.0 + v / k)

    prev = np.zeros((2, n, n))     # f^{l-1}
    cur = np.zeros((2, n, n))      # f^l
    lower, upper = cur, None
    state = BracketState(lower=lower, upper=lower)
    for l in range(params.max_bracket):
        partner = mollify(cur, moll_radius)
        a0 = damping + truncate(partner[1], k) / denom(prev[0])
        a1 = damping + truncate(partner[0], k) / denom(prev[1])
        new = np.stack([solve_field(c0, inflow[0], g[0], a0, params.scheme),
                        solve_field(c1, inflow[1], g[1], a1, params.scheme)])
        if (l + 1) % 2:
            # upper iterate: below the previous upper, above the latest lower
            defect = float(np.max(new - prev)) if l >= 1 else -math.inf
            defect = max(defect, float(np.max(cur - new)))
            upper = new
        else:
            defect = max(float(np.max(prev - new)), float(np.max(new - cur)))
            lower = new
        state.order_defect = max(state.order_defect, defect)
        if defect > _slack(new, cur):
            raise BracketViolation(f"sweep {l + 1}: ordering broken by {defect:.3e}")
        state.sweeps = l + 1
        width = _l1(upper - lower)
        state.width_history.append(width)
        if width <= params.tol_bracket:
            state.converged = True
            break
        prev, cur = cur, new
    else:
        log.warning("alternating_bracket_pair: max_bracket=%d reached (width %.3e)",
                    params.max_bracket, state.width)
    state.lower, state.upper = lower, upper
    mid = 0.5 * (lower + upper)
    return (mid[0], mid[1]), state


def _pair_alternation(fb: BoundaryTrace, params: SolverParams, initial: FieldQuartet,
                      damping: float = 0.0, moll_radius: float = 0.0, k: float | None = None):
    """Gauss-Seidel over the pairs (F1,F2) then (F3,F4), each solved by bracketing.

    While the quartet is still moving, pairs are bracketed only to
    ``INEXACT_FACTOR`` times the previous outer increment; convergence is
    declared only on a sweep run at the full ``tol_bracket``.
    """
    k = params.k if k is None else k
    F = initial.data.copy()
    report = SolveReport(k=k, alpha=damping, path="bracket")
    last = math.inf
    for sweep in range(1, params.max_outer + 1):
        t0 = time.perf_counter()
        old = F.copy()
        stage = StageReport("bracket")
        width = 0.0
        tol = max(params.tol_bracket, min(INEXACT_CAP, INEXACT_FACTOR * last))
        sweep_params = params if tol == params.tol_bracket else params.replace(tol_bracket=tol)
        for pair, (a, b) in PAIRS.items():
            M = mollify(F, moll_radius)
            # gain of F_a is t(F_plain) t(M_moll) with the other pair frozen
            ga, _ = component_coefficients(F, a, k, 0.0, M)
            gb, _ = component_coefficients(F, b, k, 0.0, M)
            (F[a], F[b]), st = alternating_bracket_pair(
                (ga, gb), (fb[a], fb[b]), k, sweep_params, pair, damping, moll_radius)
            stage.iterations += st.sweeps
            stage.order_defect = max(stage.order_defect, st.order_defect)
            width = max(width, st.width)
            report.bracket_sweeps += st.sweeps
        report.bracket_width = width
        report.increment = _l1(F - old)
        stage.increment = report.increment
        last = report.increment
        stage.converged = report.increment <= params.tol_outer and tol == params.tol_bracket
        stage.wall_time = time.perf_counter() - t0
        report.stages.append(stage)
        if stage.converged:
            report.converged = True
            break
    else:
        log.warning("pair alternation: max_outer=%d reached (increment %.3e)",
                    params.max_outer, report.increment)
    return FieldQuartet(F), report


def solve_truncated(fb: BoundaryTrace, k: float, params: SolverParams,
                    initial: FieldQuartet | None = None):
    """Solve the truncated (undamped, unmollified) system at level ``k``.

    Each outer sweep freezes ``t(F3) t(F4)`` as the gain of the (F1, F2) pair
    and brackets it, then does the same for (F3, F4) with the fresh
    ``t(F1) t(F2)``.  Stops when a sweep moves the quartet by at most
    ``params.tol_outer`` in L1.  Non-convergence is reported, not raised.
    """
    if not k > 0:
        raise ValueError("k must be > 0")
    n = fb.n_cells
    init = FieldQuartet.zeros(n) if initial is None else initial
    F, report = _pair_alternation(fb, params, init, k=k)
    report.mild_residual = list(mild_residual(F, fb, k))
    report.residual_bound = 10 * params.tol_outer
    return F, report


@dataclass
class ContinuationStep:
    k: float
    fields: FieldQuartet
    diagnostics: "DiagnosticsReport"
    report: SolveReport
    increment: float | None  # L1 distance to the previous k's solution


def continuation(fb: BoundaryTrace, params: SolverParams, initial: FieldQuartet | None = None,
                 diagnostics_options: dict | None = None) -> list[ContinuationStep]:
    """Solve along ``params.k_schedule`` (or ``[params.k]``) with warm starts."""
    from .diagnostics import diagnose

    schedule = params.k_schedule or (params.k,)
    steps: list[ContinuationStep] = []
    prev = initial
    for k in schedule:
        try:
            F, rep = solve_truncated(fb, k, params, initial=prev)
        except BroadwellError as exc:
            raise type(exc)(f"k={k:g}: {exc}") from exc
        diag = diagnose(F, fb, k, params, **(diagnostics_options or {}))
        inc = None if not steps else F.l1_distance(steps[-1].fields)
        steps.append(ContinuationStep(k, F, diag, rep, inc))
        prev = F
    return steps


@dataclass
class DampingStep:
    alpha: float
    fields: FieldQuartet
    report: SolveReport
    distance: float  # L1 distance to the undamped solution at the same k


def damping_continuation(fb: BoundaryTrace, params: SolverParams,
                         reference: FieldQuartet | None = None) -> list[DampingStep]:
    """Damped solutions along ``params.alpha_schedule`` with mollifier radius equal to alpha.

    Each entry records its L1 distance to the undamped truncated solution
    ``reference`` (computed when not given), which should shrink as alpha does.
    """
    if reference is None:
        reference, _ = solve_truncated(fb, params.k, params)
    out: list[DampingStep] = []
    prev = None
    for alpha in params.alpha_schedule:
        p = params.replace(alpha=alpha, moll_radius=alpha)
        F, rep = picard_fixed_point(fb, p, initial=prev)
        out.append(DampingStep(alpha, F, rep, F.l1_distance(reference)))
        prev = F
    return out


def report_as_dict(report: SolveReport, timing: bool = False) -> dict:
    d = report.to_dict(timing)
    if timing:
        d["stages"] = [asdict(s) for s in report.stages]
    return d
