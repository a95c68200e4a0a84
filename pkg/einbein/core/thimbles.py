"""
Thimble geometry: convergence wedges, steepest-descent tracing and the
decomposition of the physical contour into thimbles.

A thimble through Lambda* is the path with S(Lambda) = S(Lambda*) + i t^2, traced by
integrating dLambda/dt = 2 i t / S'(Lambda) outward from both descent directions.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from .action import EinbeinAction, Prefactor, Wavefunction
from .critical import CriticalPoint
from ..utils.config import get_settings
from ..utils.errors import (
    FlowStall,
    NonIntegerCoefficients,
    TooCloseToCaustic,
    WrongSector,
    ZeroResidue,
)

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


def _wrap(angle: float) -> float:
    """Angle in (-pi, pi]."""
    return math.atan2(math.sin(angle), math.cos(angle))


@dataclass(frozen=True)
class Wedge:
    """Angular interval (theta1, theta2) of convergent approach to infinity, a pole or a branch point."""
    kind: str
    theta1: float
    theta2: float
    index: int
    location: Optional[complex] = None
    residue: float = 0.0

    @property
    def center(self) -> float:
        return 0.5 * (self.theta1 + self.theta2)

    def contains(self, angle: float, margin: float = 0.0) -> bool:
        rel = (angle - self.theta1) % TWO_PI
        return margin < rel < (self.theta2 - self.theta1) - margin


def infinity_wedges(order: int, leading: complex) -> List[Wedge]:
    """The `order` sectors with Im(leading * Lambda^order) > 0."""
    arg = math.atan2(leading.imag, leading.real)
    wedges = []
    for k in range(order):
        lo = ((TWO_PI * k - arg) / order) % TWO_PI
        wedges.append(lo)
    wedges.sort()
    return [Wedge("infinity", lo, lo + math.pi / order, i) for i, lo in enumerate(wedges)]


def pole_sector(beta: complex, residue: float, index: int = 0) -> Wedge:
    """Sector where Im(residue / (Lambda - beta)) > 0."""
    scale = max(1.0, abs(beta))
    if abs(residue) < get_settings().residue_floor * scale ** 2:
        raise ZeroResidue(f"pole {beta} has vanishing residue; only its branch point survives")
    arg = math.atan2(np.imag(residue), np.real(residue))
    return Wedge("pole", arg - math.pi, arg, index, complex(beta), float(np.real(residue)))


def convergence_wedges(action: EinbeinAction, prefactor: Optional[Prefactor] = None,
                       window: Optional[float] = None) -> List[Wedge]:
    """
    Wedges at infinity and sectors at every finite pole.

    Poles whose residue vanishes at the current point are reported as branch-point-only
    entries with the full circle as their interval.
    """
    if action.infinity_order < 1:
        raise ValueError("infinity order must be >= 1")
    wedges = infinity_wedges(action.infinity_order, complex(action.leading_coeff))
    index = len(wedges)
    seen = []
    for pole in action.poles(window):
        try:
            wedges.append(pole_sector(pole.location, pole.coefficient, index))
        except ZeroResidue:
            logger.warning(f"Pole {pole.location} has zero residue; reporting as branch point")
            wedges.append(Wedge("branch", 0.0, TWO_PI, index, complex(pole.location)))
        seen.append(complex(pole.location))
        index += 1
    if prefactor is not None:
        for factor in prefactor.factors:
            loc = complex(factor.location)
            if all(abs(loc - s) > 1e-12 * max(1.0, abs(loc)) for s in seen):
                logger.warning(f"Prefactor branch point {loc} carries no pole of the action")
                wedges.append(Wedge("branch", 0.0, TWO_PI, index, loc))
                seen.append(loc)
                index += 1
    return wedges


@dataclass(frozen=True)
class Endpoint:
    kind: str
    index: int
    location: Optional[complex]
    angle: float

    def describe(self) -> str:
        if self.kind == "infinity":
            return f"inf[{self.index}]"
        return f"{self.kind}({self.location.real:.6g}{self.location.imag:+.6g}j)"


@dataclass(frozen=True)
class Thimble:
    """Oriented polyline through a critical point; Re S is constant and Im S grows toward both ends."""
    critical_point: CriticalPoint
    path: np.ndarray
    t: np.ndarray
    start: Endpoint
    end: Endpoint
    phase: float
    tangent: complex
    anchor: int
    height: float
    drift: float = 0.0

    @property
    def signature(self) -> Tuple[str, str]:
        return (self.start.describe(), self.end.describe())

    @property
    def tangent_angle(self) -> float:
        return math.atan2(self.tangent.imag, self.tangent.real)


@dataclass(frozen=True)
class BranchContour:
    """
    Steepest path leaving a branch point that carries no pole; the physical class wraps
    around the branch point, running in on one sheet and out on the other.
    """
    beta: complex
    path: np.ndarray
    t: np.ndarray
    end: Endpoint
    value: complex
    exponent: float

    @property
    def signature(self) -> Tuple[str, str]:
        return (f"branch({self.beta.real:.6g})", self.end.describe())


def _classify_end(action: EinbeinAction, lam: complex, target: complex, wedges: List[Wedge]) -> Endpoint:
    window = abs(lam) + (2.0 * action.channel.spacing if action.channel else 0.0)
    offset = abs(complex(action.value(lam, check=False)) - target)
    for pole in action.poles(window):
        d = lam - pole.location
        if abs(pole.coefficient / d) > 0.5 * offset:
            angle = math.atan2(d.imag, d.real)
            try:
                sector = pole_sector(pole.location, pole.coefficient)
            except ZeroResidue:
                return Endpoint("branch", -1, complex(pole.location), angle)
            if not sector.contains(angle, margin=-1e-6):
                raise WrongSector(f"flow reached pole {pole.location} at angle {angle:.4f} outside its sector")
            return Endpoint("pole", 0, complex(pole.location), angle)
    angle = math.atan2(lam.imag, lam.real)
    inf = [w for w in wedges if w.kind == "infinity"]
    best = min(inf, key=lambda w: abs(_wrap(angle - w.center)))
    return Endpoint("infinity", best.index, None, angle)


def _project(action: EinbeinAction, lam: np.ndarray, targets: np.ndarray, sweeps: int = 3) -> np.ndarray:
    out = lam.copy()
    for _ in range(sweeps):
        with np.errstate(all="ignore"):
            step = (action.value(out, check=False) - targets) / action.d1(out, check=False)
        ok = np.isfinite(step) & (np.abs(step) < 0.1 * (np.abs(out) + 1e-300))
        out = np.where(ok, out - step, out)
    return out


def _flow_branch(action: EinbeinAction, lam0: complex, t0: float, t_end: float, r_max: float,
                 pole_locs: Sequence[complex], eps_pole: float, samples: int) -> Tuple[np.ndarray, np.ndarray]:
    settings = get_settings()

    def rhs(t, y):
        return np.array([2j * t / action.d1(y[0], check=False)])

    def escape(t, y):
        return abs(y[0]) - r_max
    escape.terminal = True

    events = [escape]
    if pole_locs:
        def near_pole(t, y):
            return min(abs(y[0] - b) for b in pole_locs) - eps_pole
        near_pole.terminal = True
        events.append(near_pole)

    t_eval = np.linspace(t0, t_end, samples)
    sol = solve_ivp(rhs, (t0, t_end), np.array([lam0], dtype=complex), method="DOP853",
                    t_eval=t_eval, events=events, rtol=settings.flow_rtol, atol=settings.flow_atol)
    if sol.status == -1:
        raise FlowStall(f"flow from {lam0} stalled: {sol.message}")
    ts = list(sol.t)
    ys = list(sol.y[0])
    for t_ev, y_ev in zip(sol.t_events, sol.y_events):
        if len(t_ev):
            ts.append(float(t_ev[0]))
            ys.append(complex(y_ev[0][0]))
    order = np.argsort(ts)
    return np.asarray(ts)[order], np.asarray(ys, dtype=complex)[order]


def _default_r_max(action: EinbeinAction, extra: Sequence[complex] = (), height: float = 0.0) -> float:
    locs = [abs(p.location) for p in action.poles()] + [abs(e) for e in extra]
    # far enough for Im S to reach the height along the leading term
    reach = 2.0 * (height / max(abs(action.leading_coeff), 1e-300)) ** (1.0 / action.infinity_order)
    return max(10.0 * max([action.scale] + locs), reach)


def trace_thimble(action: EinbeinAction, cp: CriticalPoint, height: Optional[float] = None,
                  r_max: Optional[float] = None) -> Thimble:
    """
    Trace the thimble through a nondegenerate critical point.

    Args:
        action: einbein action
        cp: critical point with |S''| above the caustic tolerance
        height: Im S reached at both ends (defaults to the configured thimble height)
        r_max: escape radius counted as reaching infinity

    Returns:
        Thimble oriented with Re(tangent) > 0
    """
    settings = get_settings()
    if abs(cp.d2) < settings.caustic_tol:
        raise TooCloseToCaustic(f"critical point {cp.lam} is degenerate (|S''| = {abs(cp.d2):.2e})")
    height = height or settings.thimble_height
    r_max = r_max or _default_r_max(action, [cp.lam], height)
    wedges = convergence_wedges(action)
    target0 = complex(cp.value)

    c = np.sqrt(2j / cp.d2)
    if c.real < 0 or (c.real == 0 and c.imag < 0):
        c = -c
    d3 = abs(complex(action.d3(cp.lam, check=False)))
    t0 = 1e-3 * min(1.0, abs(cp.d2) / (d3 * abs(c) + 1e-300))
    t_end = math.sqrt(height)
    pole_locs = [p.location for p in action.poles(abs(cp.lam) + r_max if action.channel else None)]
    eps_pole = action.guard

    branches = []
    for sign in (1.0, -1.0):
        lam0 = cp.lam + sign * c * t0
        lam0 = complex(_project(action, np.array([lam0]), np.array([target0 + 1j * t0 * t0]))[0])
        ts, lams = _flow_branch(action, lam0, t0, t_end, r_max, pole_locs, eps_pole, settings.flow_samples)
        lams = _project(action, lams, target0 + 1j * ts * ts)
        branches.append((ts, lams))

    (tp, lp), (tm, lm) = branches
    path = np.concatenate([lm[::-1], [cp.lam], lp])
    t = np.concatenate([-tm[::-1], [0.0], tp])
    anchor = len(lm)
    s_vals = action.value(np.delete(path, anchor), check=False)
    drift = float(np.max(np.abs(np.real(s_vals) - target0.real))) if len(s_vals) else 0.0
    tol = settings.phase_tol * max(1.0, abs(target0))
    if drift > tol:
        logger.warning(f"Thimble at {cp.lam:.6g}: Re S drift {drift:.2e} exceeds {tol:.2e}")
    start = _classify_end(action, complex(path[0]), target0, wedges)
    end = _classify_end(action, complex(path[-1]), target0, wedges)
    logger.debug(f"Thimble {start.describe()} -> {end.describe()} through {cp.lam:.6g}")
    return Thimble(cp, path, t, start, end, target0.real, complex(c / abs(c)), anchor, height, drift)


def trace_branch_contour(action: EinbeinAction, beta: complex, exponent: float = -0.5,
                         height: Optional[float] = None, r_max: Optional[float] = None) -> BranchContour:
    """Steepest path from a zero-residue branch point up to Im S = Im S(beta) + height."""
    settings = get_settings()
    height = height or settings.thimble_height
    r_max = r_max or _default_r_max(action, [beta], height)
    target0 = complex(action.value(beta, check=False))
    d1 = complex(action.d1(beta, check=False))
    if abs(d1) < settings.caustic_tol:
        raise TooCloseToCaustic(f"branch point {beta} is also a critical point")
    t0 = 1e-3
    lam0 = beta + 1j * t0 * t0 / d1
    pole_locs = [p.location for p in action.poles()]
    ts, lams = _flow_branch(action, complex(lam0), t0, math.sqrt(height), r_max, pole_locs,
                            action.guard, settings.flow_samples)
    lams = _project(action, lams, target0 + 1j * ts * ts)
    path = np.concatenate([[beta], lams])
    t = np.concatenate([[0.0], ts])
    end = _classify_end(action, complex(path[-1]), target0, convergence_wedges(action))
    return BranchContour(complex(beta), path, t, end, target0, exponent)


def trace_all(action: EinbeinAction, points: Sequence[CriticalPoint], height: Optional[float] = None,
              workers: Optional[int] = None) -> List[Thimble]:
    """Trace every nondegenerate critical point; traces are independent and run in a thread pool."""
    settings = get_settings()
    usable = [cp for cp in points if abs(cp.d2) >= settings.caustic_tol]
    if len(usable) < len(points):
        logger.warning(f"Skipping {len(points) - len(usable)} degenerate critical points")
    with ThreadPoolExecutor(max_workers=workers or settings.max_workers) as pool:
        return list(pool.map(lambda cp: trace_thimble(action, cp, height), usable))


def ghost_endpoint_balance(thimbles: Sequence[Thimble], coefficients: Sequence[int], pole: complex,
                           tol: float = 1e-9) -> int:
    """Signed number of decomposition endpoints at `pole` (+1 arriving, -1 leaving)."""
    count = 0
    for thimble, c in zip(thimbles, coefficients):
        if thimble.end.location is not None and abs(thimble.end.location - pole) < tol * max(1.0, abs(pole)):
            count += c
        if thimble.start.location is not None and abs(thimble.start.location - pole) < tol * max(1.0, abs(pole)):
            count -= c
    return count


def phase_shift(a: Thimble, b: Thimble) -> float:
    """Difference of tangent angles at the two critical points, in (-pi, pi]."""
    return _wrap(b.tangent_angle - a.tangent_angle)


@dataclass(frozen=True)
class Stop:
    """A contour end or passage: approach to a pole or to infinity at an unwrapped angle."""
    kind: str
    angle: float
    pole: complex = 0j

    def same_place(self, other: "Stop", tol: float = 1e-9) -> bool:
        return self.kind == other.kind and abs(self.angle - other.angle) < tol and abs(self.pole - other.pole) < tol

    def describe(self) -> str:
        deg = math.degrees(self.angle)
        if self.kind == "inf":
            return f"inf({deg:.0f})"
        return f"pole[{self.pole.real:.4g}]({deg:.0f})"


@dataclass(frozen=True)
class ContourClass:
    """
    Homology class written as the ordered stops a contour visits. Angles are unwrapped,
    so the sheet of every half-integer prefactor is encoded by the turn of the angle.
    """
    stops: Tuple[Stop, ...]

    def canonical(self) -> "ContourClass":
        """Merge repeated passages through infinity and cancel in/out pairs at a pole."""
        stops = list(self.stops)
        changed = True
        while changed:
            changed = False
            for i in range(len(stops) - 1):
                a, b = stops[i], stops[i + 1]
                if not a.same_place(b):
                    continue
                if a.kind == "inf":
                    del stops[i + 1]
                elif 0 < i and i + 1 < len(stops) - 1:
                    del stops[i:i + 2]
                else:
                    continue
                changed = True
                break
        if len(stops) < 2:
            stops = []
        return ContourClass(tuple(stops))

    def transported(self, inf_shift: float, pole_shifts: Dict[complex, float]) -> "ContourClass":
        moved = []
        for s in self.stops:
            if s.kind == "inf":
                moved.append(Stop("inf", s.angle + inf_shift))
            else:
                shift = next((v for k, v in pole_shifts.items() if abs(k - s.pole) < 1e-9), 0.0)
                moved.append(Stop(s.kind, s.angle + shift, s.pole))
        return ContourClass(tuple(moved))

    def describe(self) -> str:
        return " -> ".join(s.describe() for s in self.stops) or "0"


@dataclass
class Decomposition:
    """Integer coefficients of the physical contour on thimbles and branch contours."""
    thimbles: List[Thimble]
    coefficients: List[int]
    branch_contours: List[BranchContour] = field(default_factory=list)
    branch_coefficients: List[int] = field(default_factory=list)
    residual: float = 0.0
    k0: float = 0.0
    integrals: List[complex] = field(default_factory=list)
    branch_integrals: List[complex] = field(default_factory=list)

    @property
    def signature(self) -> Tuple:
        return tuple(sorted(t.signature for t in self.thimbles)) + tuple(b.signature for b in self.branch_contours)

    def contributing(self) -> List[Tuple[Thimble, int]]:
        return [(t, c) for t, c in zip(self.thimbles, self.coefficients) if c != 0]


def _k0_factors(n_unknowns: int) -> List[float]:
    factors = list(get_settings().decomposition_k0_factors)
    while 2 * len(factors) < n_unknowns + 2:
        factors.append(factors[-1] * 1.23)
    return factors


def decompose_real_axis(thimbles: Sequence[Thimble], wavefunction: Wavefunction,
                        branch_contours: Sequence[BranchContour] = (),
                        k0_factors: Optional[Sequence[float]] = None) -> Decomposition:
    """
    Integer coefficients c_i with oracle = sum c_i * contour integral i.

    The oracle and every contour integral are evaluated at several k0 values; the real
    least-squares solution is rounded and accepted only if the rounded combination
    reproduces every oracle value to the configured tolerance.

    Args:
        thimbles: traced thimbles
        wavefunction: wave function at the observation point
        branch_contours: branch-point contours entering as extra columns
        k0_factors: multiples of wavefunction.k0 used as rows

    Returns:
        Decomposition evaluated at the base k0
    """
    from .quadrature import integrate_branch_contour, integrate_thimble, oracle_real_axis

    settings = get_settings()
    n = len(thimbles) + len(branch_contours)
    if n == 0:
        raise NonIntegerCoefficients("no contours to decompose onto")
    factors = list(k0_factors or _k0_factors(n))
    rows, rhs, base = [], [], None
    for f in factors:
        wf = wavefunction.with_k0(wavefunction.k0 * f)
        oracle = oracle_real_axis(wf) / (1j / wf.k0)
        cols = [integrate_thimble(wf, th) for th in thimbles]
        cols += [integrate_branch_contour(wf, bc) for bc in branch_contours]
        if base is None:
            base = cols
        rows.append(cols)
        rhs.append(oracle)
    mat = np.array(rows, dtype=complex)
    vec = np.array(rhs, dtype=complex)
    weights = 1.0 / np.maximum(np.abs(vec), 1e-300)
    mat_w = mat * weights[:, None]
    vec_w = vec * weights
    norms = np.linalg.norm(mat_w, axis=0)
    usable = norms > 1e-12
    coeffs = np.zeros(n)
    if np.any(usable):
        real_mat = np.vstack([mat_w[:, usable].real, mat_w[:, usable].imag]) / norms[usable]
        real_vec = np.concatenate([vec_w.real, vec_w.imag])
        sol, *_ = np.linalg.lstsq(real_mat, real_vec, rcond=None)
        coeffs[usable] = sol / norms[usable]
    rounded = np.rint(coeffs).astype(int)
    residual = float(np.max(np.abs(mat @ rounded - vec) * weights))
    logger.debug(f"Decomposition {rounded.tolist()} residual {residual:.2e}")
    if residual > settings.decomposition_tol:
        raise NonIntegerCoefficients(
            f"rounded coefficients {rounded.tolist()} leave residual {residual:.2e} "
            f"(raw {np.round(coeffs, 4).tolist()})"
        )
    m = len(thimbles)
    return Decomposition(list(thimbles), rounded[:m].tolist(), list(branch_contours), rounded[m:].tolist(),
                         residual, wavefunction.k0, list(base[:m]), list(base[m:]))
