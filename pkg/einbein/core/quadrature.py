"""
Contour quadrature of Psi, the damped real-axis oracle and field evaluation.

Every integral is taken along a polyline. Prefactor arguments are continued
vertex to vertex from an anchor, so a polyline that stays homotopic to a thimble
gives the same value as the thimble itself.
"""

from __future__ import annotations

import hashlib
import logging
import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .action import Wavefunction, build_wavefunction
from .critical import (
    ILLUMINATED,
    ON_CAUSTIC,
    SHADOW,
    Region,
    _ghost_flag,
    _max_real,
    _prefactor_branch_points,
    find_critical_points,
    relevant_real_count,
)
from .thimbles import (
    BranchContour,
    Decomposition,
    Thimble,
    _wrap,
    decompose_real_axis,
    infinity_wedges,
    trace_all,
    trace_branch_contour,
)
from ..schemas.objects import RefractionModel, SourceSpec
from ..utils.config import get_settings
from ..utils.errors import (
    AccuracyNotReached,
    EinbeinError,
    NonConvergence,
    NonIntegerCoefficients,
    Overflow,
    TooCloseToCaustic,
    UnsupportedCombination,
)

logger = logging.getLogger(__name__)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)
EXP_LIMIT = 700.0
TAIL_DECAY = 45.0
RICHARDSON = (1.0 / 3.0, -2.0, 8.0 / 3.0)


def _gauss(fn: Callable[[np.ndarray], np.ndarray], lo: float, hi: float) -> complex:
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    return complex(half * np.sum(_GL_WEIGHTS * fn(mid + half * _GL_NODES)))


def adaptive_gauss(fn: Callable[[np.ndarray], np.ndarray], a: float, b: float, rtol: float,
                   abs_tol: float = 0.0, max_panels: Optional[int] = None) -> Tuple[complex, float, int]:
    """
    Adaptive 10-point Gauss-Legendre on [a, b].

    A panel is accepted when its two halves agree with the whole to
    max(rtol * |panel|, abs_tol * share of [a, b]).

    Returns:
        (integral, error estimate, panels used)
    """
    max_panels = max_panels or get_settings().quad_max_panels
    stack = [(a, b, _gauss(fn, a, b))]
    total, err, panels = 0j, 0.0, 0
    while stack:
        lo, hi, whole = stack.pop()
        mid = 0.5 * (lo + hi)
        left, right = _gauss(fn, lo, mid), _gauss(fn, mid, hi)
        diff = abs(left + right - whole)
        panels += 1
        if diff <= max(rtol * abs(left + right), abs_tol * (hi - lo) / (b - a)) or hi - lo < 1e-13 * (b - a):
            total += left + right
            err += diff
            continue
        if panels > max_panels:
            raise AccuracyNotReached(f"panel budget {max_panels} exhausted (last error {diff:.2e})")
        stack.append((lo, mid, left))
        stack.append((mid, hi, right))
    return total, err, panels


def _segment_integrand(wf: Wavefunction, k: complex, a: complex, b: complex, ang_a: np.ndarray, ang_b: np.ndarray,
                       singular: bool, singular_end: bool = False) -> Callable[[np.ndarray], np.ndarray]:
    pref = wf.prefactor
    delta = b - a

    def psi(lam, angles):
        expo = 1j * k * wf.action.value(lam, check=False)
        if np.any(np.real(expo) > EXP_LIMIT):
            raise Overflow(f"exponent {np.max(np.real(expo)):.1f} on segment {a:.4g} -> {b:.4g}")
        return pref.from_angles(lam, angles) * np.exp(expo)

    if singular:
        # Lambda - a = (b - a) v^2 removes the end singularity at a
        def fn(v):
            lam = a + delta * v * v
            return psi(lam, pref.segment_angles(b, ang_b, lam)) * 2.0 * delta * v
    elif singular_end:
        def fn(v):
            lam = b - delta * v * v
            return psi(lam, pref.segment_angles(a, ang_a, lam)) * 2.0 * delta * v
    else:
        def fn(u):
            lam = a + delta * u
            return psi(lam, pref.segment_angles(a, ang_a, lam)) * delta
    return fn


def vertex_angles(wf: Wavefunction, path: np.ndarray, anchor: int,
                  anchor_angles: Optional[np.ndarray] = None) -> np.ndarray:
    """Prefactor arguments at every vertex, continued from the sheet-0 values at `anchor`."""
    pref = wf.prefactor
    out = np.zeros((pref.n_factors, len(path)))
    out[:, anchor] = pref.angles(path[anchor])[:, 0] if anchor_angles is None else anchor_angles
    for j in range(anchor, len(path) - 1):
        out[:, j + 1] = pref.segment_angles(path[j], out[:, j], path[j + 1])[:, 0]
    for j in range(anchor, 0, -1):
        # a singular start vertex has ratio 0 for its own factor; its argument is never used
        with np.errstate(all="ignore"):
            out[:, j - 1] = np.nan_to_num(pref.segment_angles(path[j], out[:, j], path[j - 1])[:, 0])
    return out


def integrate_path(wf: Wavefunction, path: Sequence[complex], anchor: int = 0,
                   anchor_angles: Optional[np.ndarray] = None, k0: Optional[complex] = None,
                   singular_start: bool = False, singular_end: bool = False,
                   rtol: Optional[float] = None) -> complex:
    """
    Integral of Psi dLambda along a polyline.

    Args:
        wf: wave function
        path: polyline vertices
        anchor: vertex where the prefactor takes its sheet-0 (or `anchor_angles`) arguments
        anchor_angles: prefactor arguments at the anchor
        k0: wavenumber in the exponent (complex for damping); defaults to wf.k0
        singular_start: path[0] is an integrable singularity (pole or branch point)
        singular_end: the same for path[-1]
        rtol: relative tolerance (defaults to the configured quadrature tolerance)
    """
    settings = get_settings()
    path = np.asarray(path, dtype=complex)
    if len(path) < 2:
        return 0j
    k = wf.k0 if k0 is None else k0
    rtol = rtol or settings.quad_rtol
    angles = vertex_angles(wf, path, anchor, anchor_angles)
    fns = []
    last = len(path) - 2
    for j in range(len(path) - 1):
        if path[j + 1] == path[j]:
            continue
        fns.append(_segment_integrand(wf, k, path[j], path[j + 1], angles[:, j], angles[:, j + 1],
                                      singular_start and j == 0, singular_end and j == last))
    if not fns:
        return 0j
    magnitude = sum(abs(_gauss(lambda u, f=f: np.abs(f(u)), 0.0, 1.0)) for f in fns)
    abs_tol = rtol * magnitude / len(fns)
    total, err, panels = 0j, 0.0, 0
    for f in fns:
        value, e, p = adaptive_gauss(f, 0.0, 1.0, rtol, abs_tol, max(1, settings.quad_max_panels - panels))
        total += value
        err += e
        panels += p
    logger.debug(f"Path of {len(path)} vertices: {panels} panels, error {err:.2e}")
    return total


def integrate_thimble(wf: Wavefunction, thimble: Thimble, k0: Optional[complex] = None) -> complex:
    """
    Integral of Psi along a traced thimble, sheet-0 prefactor at the critical point.

    Raises:
        AccuracyNotReached: the thimble ends where |Psi| is not yet negligible
    """
    path = thimble.path
    if len(path) < 2 or np.all(np.abs(path - path[0]) == 0):
        return 0j
    value = integrate_path(wf, path, thimble.anchor, k0=k0)
    k = wf.k0 if k0 is None else k0
    s_star = complex(thimble.critical_point.value)
    for end in (path[0], path[-1]):
        rise = float(np.real(1j * k * (complex(wf.action.value(end, check=False)) - s_star)))
        if rise > math.log(1e-6):
            raise AccuracyNotReached(f"thimble truncated at {end:.4g} with |Psi| ratio {math.exp(rise):.2e}")
        if rise > math.log(1e-10):
            logger.warning(f"Thimble end {end:.4g}: |Psi| ratio {math.exp(rise):.2e}")
    return value


def integrate_branch_contour(wf: Wavefunction, contour: BranchContour, k0: Optional[complex] = None) -> complex:
    """
    Integral around a branch point that carries no pole: outward on sheet 0, back on
    the sheet reached by one turn, i.e. (1 - exp(2 pi i e)) times the outward path.
    """
    path = contour.path
    if len(path) < 2:
        return 0j
    outward = integrate_path(wf, path, anchor=1, k0=k0, singular_start=True)
    return (1.0 - np.exp(2j * math.pi * contour.exponent)) * outward


@dataclass(frozen=True)
class OracleContour:
    """Physical contour: dip below Lambda = 0, positive real axis with dips, tail into a wedge."""
    path: np.ndarray
    anchor: int
    cutoff: float
    tail_angle: float


def default_cutoff(wf: Wavefunction) -> float:
    """Real-axis length beyond which the oracle turns into a convergence wedge."""
    action = wf.action
    structure = [abs(p.location) for p in action.pole_terms] + [abs(f.location) for f in wf.prefactor.factors]
    for p in action.pole_terms:
        structure.append(math.sqrt(abs(p.coefficient) / max(abs(action.leading_coeff), 1e-300)))
    base = 2.0 * max([action.scale] + structure)
    chan = action.channel
    if chan is None:
        return base
    n = max(2, int(math.ceil(base / chan.spacing)))
    return (n + 0.5) * chan.spacing


def _tail_angle(wf: Wavefunction) -> float:
    action = wf.action
    wedges = infinity_wedges(action.infinity_order, complex(action.leading_coeff))
    best = min(wedges, key=lambda w: abs(_wrap(w.center)))
    return _wrap(best.center)


def oracle_contour(wf: Wavefunction, cutoff: Optional[float] = None) -> OracleContour:
    action = wf.action
    cutoff = cutoff or default_cutoff(wf)
    singular = [p.location for p in action.poles(cutoff)] + [f.location for f in wf.prefactor.factors]
    on_axis = sorted({round(complex(s).real, 14) for s in singular
                      if abs(complex(s).imag) < 1e-12 and 0.0 < complex(s).real < cutoff})
    h = 0.5 * min([action.scale] + on_axis)
    path: List[complex] = [0j, -1j * h, complex(h)]
    anchor = 2
    marks = [h] + on_axis + [cutoff]
    for i, s in enumerate(on_axis, start=1):
        radius = 0.4 * min(marks[i] - marks[i - 1], marks[i + 1] - marks[i])
        for phi in np.linspace(math.pi, 2.0 * math.pi, 9):
            path.append(s + radius * np.exp(1j * phi))
    path.append(complex(cutoff))

    theta = _tail_angle(wf)
    direction = np.exp(1j * theta)
    base = complex(action.value(cutoff, check=False)).imag
    length = action.scale
    for _ in range(60):
        rise = complex(action.value(cutoff + length * direction, check=False)).imag - base
        if wf.k0 * rise > TAIL_DECAY:
            break
        length *= 2.0
    else:
        raise NonConvergence("oracle tail does not decay along its wedge")
    path.extend(cutoff + length * direction * np.linspace(0.0, 1.0, 17)[1:] ** 2)
    return OracleContour(np.array(path, dtype=complex), anchor, cutoff, theta)


def oracle_real_axis(wf: Wavefunction, damping: Optional[float] = None, cutoff: Optional[float] = None) -> complex:
    """
    Brute-force field (i/k0) * integral of Psi along the physical contour with k0 -> k0 (1 + i delta),
    extrapolated to delta -> 0 from delta, delta/2, delta/4.
    """
    if wf.k0 <= 0:
        raise UnsupportedCombination("k0 must be positive")
    delta = damping or get_settings().oracle_damping
    contour = oracle_contour(wf, cutoff)
    values = []
    for d in (delta, 0.5 * delta, 0.25 * delta):
        values.append(integrate_path(wf, contour.path, contour.anchor, k0=wf.k0 * (1.0 + 1j * d),
                                     singular_start=True))
    extrapolated = sum(w * v for w, v in zip(RICHARDSON, values))
    spread = abs(values[-1] - extrapolated)
    if not np.isfinite(extrapolated) or spread > 1e-2 * abs(extrapolated):
        raise NonConvergence(f"damping extrapolation inconsistent (spread {spread:.2e})")
    logger.debug(f"Oracle at k0={wf.k0}: {extrapolated:.10g} (spread {spread:.1e})")
    return (1j / wf.k0) * extrapolated


def source_boundary_term(model: RefractionModel, source: SourceSpec, k0: float, eps: float,
                         x: Sequence[float]) -> complex:
    """-Psi at the contour start Lambda = -i eps: a nascent -delta(x - x') as eps -> 0."""
    wf = build_wavefunction(model, source, x, k0)
    return -complex(wf.psi(-1j * eps))


@dataclass
class FieldSample:
    x: Tuple[float, ...]
    value: complex
    decomposition_id: str = ""
    contributions: List[complex] = field(default_factory=list)
    coefficients: List[int] = field(default_factory=list)
    zone: str = ""
    near_source: bool = False
    diagnostic: Optional[str] = None


class TopologyCache:
    """Thimble-topology -> coefficients, written once per key and shared between threads."""

    def __init__(self):
        self._entries: Dict[Tuple, Dict[Tuple, int]] = {}
        self._lock = threading.Lock()
        self.hits = 0

    def get(self, key: Tuple) -> Optional[Dict[Tuple, int]]:
        with self._lock:
            entry = self._entries.get(key)
            if entry is not None:
                self.hits += 1
            return entry

    def put(self, key: Tuple, coefficients: Dict[Tuple, int]) -> None:
        with self._lock:
            self._entries.setdefault(key, coefficients)

    def __len__(self) -> int:
        return len(self._entries)


def _sheet_key(wf: Wavefunction, lam: complex) -> Tuple[int, ...]:
    angles = wf.prefactor.angles(lam)[:, 0]
    return tuple(int(math.floor(a / (0.5 * math.pi))) for a in angles)


def _contour_keys(wf: Wavefunction, thimbles: Sequence[Thimble], branches: Sequence[BranchContour]) -> List[Tuple]:
    keys = [(th.signature, _sheet_key(wf, th.critical_point.lam)) for th in thimbles]
    keys += [(bc.signature, _sheet_key(wf, complex(bc.path[1]))) for bc in branches]
    return keys


def _decomposition_id(keys: Sequence[Tuple], coefficients: Sequence[int]) -> str:
    text = ";".join(f"{c}:{k}" for k, c in sorted(zip(keys, coefficients)) if c != 0)
    return hashlib.sha1(text.encode()).hexdigest()[:10]


def _zero_residue_branch_points(wf: Wavefunction) -> List[complex]:
    floor = get_settings().residue_floor
    residues = {complex(p.location): p.coefficient for p in wf.action.poles()}
    out = []
    for beta in _prefactor_branch_points(wf.prefactor):
        res = next((v for k, v in residues.items() if abs(k - beta) < 1e-12 * max(1.0, abs(beta))), 0.0)
        if abs(res) < floor * max(1.0, abs(beta)) ** 2:
            out.append(beta)
    return out


def _zone(points, model: RefractionModel, source: SourceSpec) -> str:
    settings = get_settings()
    if any(abs(cp.d2) < settings.caustic_tol and cp.lam.real > 0 for cp in points):
        return ON_CAUSTIC
    return ILLUMINATED if relevant_real_count(points) >= _max_real(model, source) else SHADOW


def _search_region(wf: Wavefunction) -> Optional[Region]:
    chan = wf.action.channel
    if chan is None:
        return None
    sp = chan.spacing
    return (-0.5 * sp, default_cutoff(wf), -1.5 * sp, 1.5 * sp)


def _trace_contours(wf: Wavefunction, points) -> Tuple[List[Thimble], List[BranchContour]]:
    height = max(get_settings().thimble_height, 40.0 / wf.k0)
    thimbles = trace_all(wf.action, points, height)
    branches = [trace_branch_contour(wf.action, beta, -0.5, height) for beta in _zero_residue_branch_points(wf)]
    return thimbles, branches


def decompose_at(model: RefractionModel, source: SourceSpec, x: Sequence[float], k0: float,
                 region: Optional[Region] = None) -> Tuple[Wavefunction, Decomposition]:
    """Thimbles, branch contours and their integer coefficients at one point (no cache, no fallback)."""
    wf = build_wavefunction(model, source, tuple(float(v) for v in x), k0)
    region = region or _search_region(wf)
    points = find_critical_points(wf.action, region, extra_poles=_prefactor_branch_points(wf.prefactor))
    thimbles, branches = _trace_contours(wf, points)
    return wf, decompose_real_axis(thimbles, wf, branches)


def field_at(model: RefractionModel, source: SourceSpec, x: Sequence[float], k0: float,
             region: Optional[Region] = None, cache: Optional[TopologyCache] = None) -> FieldSample:
    """
    Field at one point: critical points -> thimbles -> decomposition -> integrals.

    Falls back to the oracle value (with a diagnostic) where the thimble sum cannot be
    certified, e.g. on a caustic.
    """
    x = tuple(float(v) for v in x)
    wf = build_wavefunction(model, source, x, k0)
    region = region or _search_region(wf)
    points = find_critical_points(wf.action, region, extra_poles=_prefactor_branch_points(wf.prefactor))
    zone = _zone(points, model, source)
    try:
        thimbles, branches = _trace_contours(wf, points)
        keys = _contour_keys(wf, thimbles, branches)
        cache_key = tuple(sorted(keys))
        if len(set(keys)) < len(keys):
            cache = None
        cached = cache.get(cache_key) if cache is not None else None
        if cached is not None:
            coefficients = [cached[k] for k in keys]
            integrals = [integrate_thimble(wf, th) if c else 0j for th, c in zip(thimbles, coefficients)]
            integrals += [integrate_branch_contour(wf, bc) if c else 0j
                          for bc, c in zip(branches, coefficients[len(thimbles):])]
        else:
            decomposition = decompose_real_axis(thimbles, wf, branches)
            coefficients = decomposition.coefficients + decomposition.branch_coefficients
            integrals = decomposition.integrals + decomposition.branch_integrals
            if cache is not None:
                cache.put(cache_key, dict(zip(keys, coefficients)))
    except (NonIntegerCoefficients, TooCloseToCaustic, AccuracyNotReached) as e:
        logger.warning(f"Thimble sum failed at {x} ({e}); using the oracle", exc_info=True)
        return FieldSample(x, oracle_real_axis(wf), "oracle", [], [], zone, False, str(e))
    contributions = [(1j / k0) * c * v for c, v in zip(coefficients, integrals)]
    value = complex(sum(contributions))
    ghost = _ghost_flag(model, source, x)
    diagnostic = "ghost source" if ghost else None
    return FieldSample(x, value, _decomposition_id(keys, coefficients), contributions, coefficients,
                       zone, False, diagnostic)


def field_grid(model: RefractionModel, source: SourceSpec, k0: float, grid, region: Optional[Region] = None,
               workers: Optional[int] = None) -> List[FieldSample]:
    """Field on every grid point; failures become diagnostics, never abort the grid."""
    from ..worker.field_worker import FieldWorker

    return FieldWorker(model, source, k0, region=region, workers=workers).run(grid)


def samples_to_array(samples: Sequence[FieldSample], shape: Tuple[int, int]) -> np.ndarray:
    """Row-major samples (z outer, x inner) as an (nz, nx) complex array."""
    nx, nz = shape
    return np.array([s.value for s in samples], dtype=complex).reshape(nz, nx)


def helmholtz_residual(values: np.ndarray, xs: Sequence[float], zs: Sequence[float],
                       model: RefractionModel, k0: float) -> np.ndarray:
    """
    |(Lap_h + k0^2 n^2) phi| / (k0^2 |phi|) on interior points of an (nz, nx) grid
    with the 5-point stencil; the border is NaN.
    """
    values = np.asarray(values, dtype=complex)
    xs = np.asarray(xs, dtype=float)
    zs = np.asarray(zs, dtype=float)
    hx, hz = xs[1] - xs[0], zs[1] - zs[0]
    out = np.full(values.shape, np.nan)
    center = values[1:-1, 1:-1]
    lap = (values[1:-1, 2:] - 2.0 * center + values[1:-1, :-2]) / hx ** 2
    lap += (values[2:, 1:-1] - 2.0 * center + values[:-2, 1:-1]) / hz ** 2
    n2 = np.array([[model.n_squared((x, z)) for x in xs[1:-1]] for z in zs[1:-1]])
    with np.errstate(all="ignore"):
        out[1:-1, 1:-1] = np.abs(lap + k0 ** 2 * n2 * center) / (k0 ** 2 * np.abs(center))
    return out


def helmholtz_residual_at(model: RefractionModel, source: SourceSpec, x: Sequence[float], k0: float,
                          h: float, value_fn: Optional[Callable[[Tuple[float, ...]], complex]] = None) -> float:
    """Pointwise 5-point (2D) or 7-point (3D) residual using the field at the stencil points."""
    if value_fn is None:
        def value_fn(p):
            return field_at(model, source, p, k0).value
    x = np.asarray(x, dtype=float)
    center = value_fn(tuple(x))
    lap = 0j
    for axis in range(len(x)):
        step = np.zeros(len(x))
        step[axis] = h
        lap += (value_fn(tuple(x + step)) - 2.0 * center + value_fn(tuple(x - step))) / h ** 2
    n2 = model.n_squared(tuple(x))
    return float(abs(lap + k0 ** 2 * n2 * center) / (k0 ** 2 * abs(center)))


def safe_field_at(model: RefractionModel, source: SourceSpec, x: Sequence[float], k0: float,
                  region: Optional[Region] = None, cache: Optional[TopologyCache] = None,
                  cell: float = 0.0) -> FieldSample:
    """field_at that turns every solver error into a diagnostic on the sample."""
    x = tuple(float(v) for v in x)
    near = bool(cell) and _distance_to_source(source, x) <= cell * (1.0 + 1e-9)
    try:
        sample = field_at(model, source, x, k0, region, cache)
    except EinbeinError as e:
        logger.warning(f"Field failed at {x}: {e}", exc_info=True)
        return FieldSample(x, complex(np.nan, np.nan), "", [], [], "", near, f"{type(e).__name__}: {e}")
    sample.near_source = near
    if near:
        note = "adjacent to source"
        sample.diagnostic = note if sample.diagnostic is None else f"{sample.diagnostic}; {note}"
    return sample


def _distance_to_source(source: SourceSpec, x: Tuple[float, ...]) -> float:
    loc = list(source.location)
    if len(loc) != len(x):
        return math.inf
    return math.dist(loc, x)
