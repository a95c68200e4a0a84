"""
Critical points of the einbein action and caustic geometry.

Rational actions are solved through the numerator of d(A/B)/dLambda (companion
matrix eigenvalues, then Newton polish); channel actions by Newton iteration from
a seed grid. Caustics are located where the count of contributing real critical
points changes, refined by bisection.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .action import EinbeinAction, Prefactor, build_action
from .rational import approximant_from_action
from ..schemas.objects import GridSpec, ModelKind, RefractionModel, SourceKind, SourceSpec
from ..utils.config import get_settings
from ..utils.errors import (
    NonConvergence,
    NonPositiveParameters,
    PoleEvaluation,
    RegionContainsPole,
    UnsupportedCombination,
)

logger = logging.getLogger(__name__)

Region = Tuple[float, float, float, float]

ILLUMINATED = "illuminated"
SHADOW = "shadow"
ON_CAUSTIC = "on-caustic"


@dataclass(frozen=True)
class CriticalPoint:
    lam: complex
    value: complex
    d2: complex
    is_real: bool
    multiplicity: int = 1

    @property
    def degenerate(self) -> bool:
        return self.multiplicity >= 2


@dataclass(frozen=True)
class CausticClassification:
    point: Tuple[float, ...]
    zone: str
    caustic_type: str = "none"
    ghost_source: bool = False
    n_real: int = 0
    diagnostic: Optional[str] = None


@dataclass
class CausticMap:
    """Per-point classification plus the refined locus and closed-form references."""
    classifications: List[CausticClassification]
    crossings: List[Tuple[float, float, str]] = field(default_factory=list)
    cusp_points: List[Tuple[float, float]] = field(default_factory=list)
    closed_form: Optional[Callable[[float, float], float]] = None
    closed_form_name: str = ""
    expected_cusp_points: List[Tuple[float, float]] = field(default_factory=list)
    ghost_lines: List["GhostLocus"] = field(default_factory=list)


def _newton(action: EinbeinAction, lam: complex, tol: float, max_iter: int) -> complex:
    for _ in range(max_iter):
        d1 = complex(action.d1(lam))
        d2 = complex(action.d2(lam))
        if d2 == 0:
            raise NonConvergence("vanishing second derivative during Newton step")
        step = d1 / d2
        lam = lam - step
        if abs(step) <= tol * max(1.0, abs(lam)):
            return lam
    raise NonConvergence(f"Newton did not converge from {lam}")


def _in_region(lam: complex, region: Optional[Region]) -> bool:
    if region is None:
        return True
    re0, re1, im0, im1 = region
    return re0 <= lam.real <= re1 and im0 <= lam.imag <= im1


def _check_region(action: EinbeinAction, region: Optional[Region]) -> None:
    if region is None:
        return
    re0, re1, im0, im1 = region
    window = max(abs(re0), abs(re1))
    for pole in action.poles(window):
        b = pole.location
        on_edge = (
            (abs(b.real - re0) < action.guard or abs(b.real - re1) < action.guard) and im0 <= b.imag <= im1
        ) or (
            (abs(b.imag - im0) < action.guard or abs(b.imag - im1) < action.guard) and re0 <= b.real <= re1
        )
        if on_edge:
            raise RegionContainsPole(f"pole {b} lies on the search region boundary")


def _assemble(action: EinbeinAction, roots: Sequence[complex], scale: float) -> List[CriticalPoint]:
    settings = get_settings()
    clustered: List[List[complex]] = []
    for lam in roots:
        for group in clustered:
            if abs(group[0] - lam) < 1e-7 * scale:
                group.append(lam)
                break
        else:
            clustered.append([lam])
    out = []
    for group in clustered:
        lam = complex(np.mean(group))
        d2 = complex(action.d2(lam))
        mult = len(group)
        if abs(d2) < settings.caustic_tol and mult == 1:
            mult = 2
        is_real = abs(lam.imag) < 1e-10 * scale
        if is_real:
            lam = complex(lam.real, 0.0)
        out.append(CriticalPoint(lam, complex(action.value(lam)), d2, is_real, mult))
    return sorted(out, key=lambda cp: (round(cp.lam.real, 12), round(cp.lam.imag, 12)))


def _rational_roots(action: EinbeinAction, extra_poles: Sequence[complex]) -> List[complex]:
    settings = get_settings()
    approximant = approximant_from_action(action, extra_poles)
    roots = approximant.critical_numerator().roots()
    residues = {complex(p.location): p.coefficient for p in action.poles()}
    scale = action.scale
    kept = []
    for lam in roots:
        near = [b for b in list(residues) + list(extra_poles) if abs(lam - b) < 1e-5 * scale]
        if near:
            beta = near[0]
            if abs(residues.get(beta, 0.0)) < settings.residue_floor * scale ** 2:
                logger.debug(f"Discarding root {lam:.6g} at zero-residue pole {beta}")
                continue
        try:
            polished = _newton(action, complex(lam), settings.newton_tol, settings.newton_max_iter)
            if abs(polished - lam) < 1e-3 * scale:
                lam = polished
        except (NonConvergence, PoleEvaluation):
            logger.debug(f"Newton polish failed at {lam:.6g}; keeping eigenvalue")
        kept.append(complex(lam))
    return kept


def _channel_roots(action: EinbeinAction, region: Region, seeds_per_cell: int) -> List[complex]:
    settings = get_settings()
    spacing = action.channel.spacing
    re0, re1, im0, im1 = region
    per_axis = max(2, int(round(math.sqrt(seeds_per_cell))))
    nx = max(per_axis, int(math.ceil((re1 - re0) / spacing * per_axis)))
    ny = max(per_axis, int(math.ceil((im1 - im0) / spacing * per_axis)))
    # offset grid keeps seeds off the real-axis poles
    xs = re0 + (np.arange(nx) + 0.5) * (re1 - re0) / nx
    ys = im0 + (np.arange(ny) + 0.5) * (im1 - im0) / ny
    found: List[complex] = []
    failures = 0
    for y in ys:
        for x in xs:
            try:
                lam = _newton(action, complex(x, y), settings.newton_tol, settings.newton_max_iter)
            except (NonConvergence, PoleEvaluation, FloatingPointError, ZeroDivisionError):
                failures += 1
                continue
            if not _in_region(lam, region):
                continue
            if abs(action.d1(lam)) > 1e-8 * max(1.0, abs(action.leading_coeff)):
                failures += 1
                continue
            if all(abs(lam - f) > 1e-8 * spacing for f in found):
                found.append(lam)
    if failures:
        logger.debug(f"{failures} of {nx * ny} Newton seeds did not converge")
    return found


def find_critical_points(action: EinbeinAction, region: Optional[Region] = None,
                         seeds_per_cell: Optional[int] = None,
                         extra_poles: Sequence[complex] = ()) -> List[CriticalPoint]:
    """
    All critical points of the action inside `region`.

    Args:
        action: einbein action
        region: (re_min, re_max, im_min, im_max); required for channel actions
        seeds_per_cell: Newton seeds per pole-spacing cell for channel actions
        extra_poles: zero-residue pole locations to clear with the denominator

    Returns:
        list of CriticalPoint sorted by real part
    """
    _check_region(action, region)
    if action.channel is not None:
        chan = action.channel
        if region is None:
            w = 4.0 * chan.spacing
            region = (-w, w, -w, w)
        seeds = seeds_per_cell or get_settings().seeds_per_cell
        roots = _channel_roots(action, region, seeds)
        scale = chan.spacing
    else:
        roots = [r for r in _rational_roots(action, extra_poles) if _in_region(r, region)]
        scale = action.scale
    points = _assemble(action, roots, scale)
    logger.debug(f"Found {len(points)} critical points")
    return points


def relevant_real_count(points: Sequence[CriticalPoint]) -> int:
    """Real critical points on the positive axis (those the physical contour meets)."""
    return sum(1 for cp in points if cp.is_real and cp.lam.real > 0)


def eikonal_residual(action: EinbeinAction, cp: CriticalPoint) -> float:
    """|(grad S)^2 - n^2| at a critical point."""
    g = action.grad_x(cp.lam)
    return float(abs(np.sum(g * g) - action.n_squared))


def _prefactor_branch_points(prefactor: Prefactor) -> List[complex]:
    return [complex(f.location) for f in prefactor.factors if abs(f.location) > 0]


def critical_points_at(model: RefractionModel, source: SourceSpec, x: Sequence[float],
                       region: Optional[Region] = None) -> Tuple[EinbeinAction, List[CriticalPoint]]:
    """Build the action at x and solve for its critical points."""
    action, prefactor = build_action(model, source, x, k0=1.0)
    points = find_critical_points(action, region, extra_poles=_prefactor_branch_points(prefactor))
    return action, points


def _ghost_flag(model: RefractionModel, source: SourceSpec, x: Sequence[float]) -> bool:
    floor = get_settings().residue_floor
    for locus in ghost_source_locus(None, model, source):
        if locus.is_true_source:
            continue
        if locus.residue_at(x) < floor:
            return True
    return False


def classify_point(model: RefractionModel, source: SourceSpec, x: Sequence[float],
                   max_real: int, region: Optional[Region] = None) -> CausticClassification:
    settings = get_settings()
    x = tuple(float(v) for v in x)
    try:
        action, points = critical_points_at(model, source, x, region)
    except Exception as e:
        logger.warning(f"Classification failed at {x}: {e}")
        return CausticClassification(x, ON_CAUSTIC, "none", False, 0, str(e))
    n_real = relevant_real_count(points)
    ghost = _ghost_flag(model, source, x)
    if ghost and source.kind == SourceKind.PHASE_SHEET and is_cusp_point(model, source, x):
        return CausticClassification(x, ON_CAUSTIC, "cusp", True, n_real)
    degenerate = [cp for cp in points if abs(cp.d2) < settings.caustic_tol and cp.lam.real > 0]
    if degenerate:
        kind = "cusp" if any(cp.multiplicity >= 3 for cp in degenerate) else "fold"
        return CausticClassification(x, ON_CAUSTIC, kind, ghost, n_real)
    zone = ILLUMINATED if n_real >= max_real else SHADOW
    return CausticClassification(x, zone, "none", ghost, n_real)


def _bisect(count_fn: Callable[[float], int], a: float, b: float, tol: float) -> float:
    ca = count_fn(a)
    while abs(b - a) > tol:
        m = 0.5 * (a + b)
        if count_fn(m) == ca:
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def _max_real(model: RefractionModel, source: SourceSpec) -> int:
    if source.kind == SourceKind.PHASE_SHEET:
        return 3
    if model.kind in (ModelKind.LINEAR_Z, ModelKind.LINEAR_X_QUADRATIC_Z):
        return 2
    return 1


def linear_z_caustic(model: RefractionModel, source: SourceSpec) -> Callable[[float, float], float]:
    """4 L^2 - a^2 r^2 with L = n0^2 - a (z + z')/2; zero on the fold."""
    xp = source.location
    a = model.a

    def residual(x: float, z: float) -> float:
        lin = model.n0sq - 0.5 * a * (z + xp[-1])
        r2 = (x - xp[0]) ** 2 + (z - xp[-1]) ** 2
        return 0.25 * (4.0 * lin * lin - a * a * r2)

    return residual


def astroid_caustic(model: RefractionModel, source: SourceSpec) -> Callable[[float, float], float]:
    """|x|^(2/3) + |z|^(2/3) - (2 n0 mu)^(2/3), zero on the cusped caustic of a phase sheet."""
    x0, zp = source.location
    radius = 2.0 * math.sqrt(model.n0sq) * source.mu

    def residual(x: float, z: float) -> float:
        return abs(x - x0) ** (2.0 / 3.0) + abs(z - zp) ** (2.0 / 3.0) - radius ** (2.0 / 3.0)

    return residual


def caustic_locus(model: RefractionModel, source: SourceSpec, grid: GridSpec,
                  region: Optional[Region] = None) -> CausticMap:
    """
    Classify every grid point and refine zone boundaries by bisection.

    Args:
        model: refraction profile
        source: point source or phase sheet
        grid: 2D (x, z) grid
        region: Lambda search region for channel actions

    Returns:
        CausticMap with classifications, refined crossings and closed-form references
    """
    settings = get_settings()
    max_real = _max_real(model, source)
    xs = np.linspace(*grid.x_range, grid.resolution[0])
    zs = np.linspace(*grid.z_range, grid.resolution[1])
    logger.info(f"Classifying {len(xs) * len(zs)} grid points")

    classes = []
    counts: Dict[Tuple[int, int], int] = {}
    for j, z in enumerate(zs):
        for i, x in enumerate(xs):
            cls = classify_point(model, source, (x, z), max_real, region)
            classes.append(cls)
            counts[(i, j)] = cls.n_real

    def counter(fixed_x: Optional[float], fixed_z: Optional[float]):
        def count(v: float) -> int:
            pt = (fixed_x, v) if fixed_x is not None else (v, fixed_z)
            return relevant_real_count(critical_points_at(model, source, pt, region)[1])
        return count

    crossings = []
    for i, x in enumerate(xs):
        for j in range(len(zs) - 1):
            if counts[(i, j)] != counts[(i, j + 1)]:
                try:
                    z = _bisect(counter(float(x), None), float(zs[j]), float(zs[j + 1]), settings.bisection_tol)
                    _record(crossings, model, source, (float(x), z))
                except Exception as e:
                    logger.warning(f"Bisection failed on column x={x}: {e}")
    for j, z in enumerate(zs):
        for i in range(len(xs) - 1):
            if counts[(i, j)] != counts[(i + 1, j)]:
                try:
                    x = _bisect(counter(None, float(z)), float(xs[i]), float(xs[i + 1]), settings.bisection_tol)
                    _record(crossings, model, source, (x, float(z)))
                except Exception as e:
                    logger.warning(f"Bisection failed on row z={z}: {e}")

    loci = ghost_source_locus(None, model, source)
    result = CausticMap(classes, crossings)
    result.ghost_lines = [g for g in loci if not g.is_true_source and g.axis is not None]
    result.cusp_points = _ghost_cusps(model, source, grid, result.ghost_lines, region)
    if source.kind == SourceKind.PHASE_SHEET:
        result.closed_form = astroid_caustic(model, source)
        result.closed_form_name = "astroid"
        x0, zp = source.location
        tip = 2.0 * math.sqrt(model.n0sq) * source.mu
        result.expected_cusp_points = [(x0, zp - tip), (x0, zp + tip)]
    elif model.kind == ModelKind.LINEAR_Z and model.a != 0:
        result.closed_form = linear_z_caustic(model, source)
        result.closed_form_name = "linear-z fold"
    expected = [p for p in result.expected_cusp_points if _inside(grid, p)]
    if expected and result.cusp_points:
        miss = max(min(math.dist(p, q) for q in result.cusp_points) for p in expected)
        logger.info(f"Detected cusps deviate from the closed form by {miss:.2e}")
    logger.info(f"Caustic map: {len(crossings)} refined crossings, {len(result.cusp_points)} cusp points")
    return result


def _inside(grid: GridSpec, p: Sequence[float]) -> bool:
    return grid.x_range[0] <= p[0] <= grid.x_range[1] and grid.z_range[0] <= p[1] <= grid.z_range[1]


def _record(crossings: List[Tuple[float, float, str]], model: RefractionModel, source: SourceSpec,
            x: Tuple[float, float]) -> None:
    """Append a refined count change with its type; other jumps pinned to a ghost line are not caustics."""
    try:
        cusp = is_cusp_point(model, source, x, tol=1e-5)
    except UnsupportedCombination:
        cusp = False
    if cusp:
        crossings.append((x[0], x[1], "cusp"))
    elif _ghost_flag(model, source, x):
        logger.debug(f"Count change at {x} sits on a ghost-source line")
    else:
        crossings.append((x[0], x[1], "fold"))


def _merge_gap(model: RefractionModel, source: SourceSpec, x: Sequence[float], beta: complex,
               region: Optional[Region]) -> int:
    """Side of beta on which the real critical point nearest to it lies (0 if there is none)."""
    action, _ = build_action(model, source, x, k0=1.0)
    real = [cp.lam.real for cp in find_critical_points(action, region) if cp.is_real]
    if not real:
        return 0
    nearest = min(real, key=lambda lam: abs(lam - beta.real))
    return int(np.sign(nearest - beta.real))


def _ghost_cusps(model: RefractionModel, source: SourceSpec, grid: GridSpec, lines: Sequence["GhostLocus"],
                 region: Optional[Region]) -> List[Tuple[float, float]]:
    """
    Points on ghost-source lines where a critical point passes through the ghost pole.

    On the line the pole drops out of the action; where one of the remaining critical
    points crosses its location, three critical points of the nearby actions merge
    on the pole. Each sign change along the line is bisected and confirmed with
    is_cusp_point.
    """
    settings = get_settings()
    cusps: List[Tuple[float, float]] = []
    if model.kind in (ModelKind.QUADRATIC_Z, ModelKind.LINEAR_X_QUADRATIC_Z):
        logger.debug("Channel ghost lines are not searched for cusps")
        return cusps
    for locus in lines:
        fixed_range = grid.x_range if locus.axis == 0 else grid.z_range
        if not fixed_range[0] <= locus.offset <= fixed_range[1]:
            continue
        free_range = grid.z_range if locus.axis == 0 else grid.x_range
        samples = np.linspace(*free_range, 4 * max(grid.resolution))

        def point(v: float, locus=locus) -> Tuple[float, float]:
            return (locus.offset, v) if locus.axis == 0 else (v, locus.offset)

        def side(v: float, locus=locus) -> int:
            return _merge_gap(model, source, point(v), locus.pole, region)

        try:
            sides = [side(float(v)) for v in samples]
        except (UnsupportedCombination, NonConvergence, PoleEvaluation) as e:
            logger.debug(f"No cusp search on {locus.description}: {e}")
            continue
        for a, b, sa, sb in zip(samples[:-1], samples[1:], sides[:-1], sides[1:]):
            if sa == sb or 0 in (sa, sb):
                continue
            try:
                v = _bisect(side, float(a), float(b), settings.bisection_tol)
            except (NonConvergence, PoleEvaluation) as e:
                logger.warning(f"Cusp refinement failed on {locus.description}: {e}")
                continue
            if is_cusp_point(model, source, point(v), tol=1e-5):
                cusps.append(point(v))
            else:
                logger.debug(f"Pole crossing at {point(v)} is not a triple merge")
    return sorted(cusps, key=lambda p: (p[0], p[1]))


def is_cusp_point(model: RefractionModel, source: SourceSpec, x: Sequence[float], tol: float = 1e-6) -> bool:
    """Three critical points merge on a zero-residue pole at x."""
    action, prefactor = build_action(model, source, x, k0=1.0)
    approximant = approximant_from_action(action, _prefactor_branch_points(prefactor))
    poly = approximant.critical_numerator()
    for beta in _prefactor_branch_points(prefactor):
        if all(abs(poly.deriv(k)(beta)) < tol * max(1.0, abs(poly.coef).max()) for k in range(3)):
            return True
    return False


@dataclass(frozen=True)
class GhostLocus:
    """Spatial zero set of the residue of one pole; a line x[axis] = offset in the (x, z) plane when axis is set."""
    pole: complex
    description: str
    is_true_source: bool
    residue_fn: Callable[[Sequence[float]], float] = field(compare=False, repr=False)
    axis: Optional[int] = None
    offset: Optional[float] = None

    def residue_at(self, x: Sequence[float]) -> float:
        return float(self.residue_fn(x))


def ghost_source_locus(action: Optional[EinbeinAction], model: RefractionModel, source: SourceSpec,
                       window: Optional[float] = None) -> List[GhostLocus]:
    """
    Zero sets of the pole residues of a catalog action.

    Args:
        action: built action (used for the channel pole window); may be None
        model: refraction profile
        source: point source or phase sheet
        window: |Re Lambda| bound for channel poles

    Returns:
        one GhostLocus per finite pole
    """
    xp = tuple(source.location)
    loci: List[GhostLocus] = []
    if source.kind == SourceKind.PHASE_SHEET:
        x0, zp = xp
        loci.append(GhostLocus(0j, f"z = {zp:g} (source plane)", True,
                               lambda x: 0.25 * (x[-1] - zp) ** 2, 1, float(zp)))
        loci.append(GhostLocus(complex(source.mu), f"x = {x0:g}", False,
                               lambda x: 0.25 * (x[0] - x0) ** 2, 0, float(x0)))
        return loci

    loci.append(GhostLocus(0j, f"x = {xp} (source point)", True,
                           lambda x: 0.25 * float(sum((a - b) ** 2 for a, b in zip(x, xp)))))
    if model.kind in (ModelKind.QUADRATIC_Z, ModelKind.LINEAR_X_QUADRATIC_Z) and model.alpha > 0:
        spacing = math.pi / (2.0 * math.sqrt(model.alpha))
        if window is None:
            window = 4.0 * spacing if action is None or action.channel is None else 4.0 * action.channel.spacing
        zp = xp[-1]
        n_max = int(math.floor(window / spacing))
        for n in range(-n_max, n_max + 1):
            if n == 0:
                continue
            sign = (-1) ** n
            loci.append(GhostLocus(complex(n * spacing), f"z = {sign * zp:g}", False,
                                   lambda x, s=sign: 0.25 * (x[-1] - s * zp) ** 2, 1, float(sign * zp)))
    return loci


@dataclass(frozen=True)
class NearbyPoleCusp:
    """Predicted cusped caustic r1^(2/3) + r2^(2/3) = (2 sqrt(b) delta)^(2/3) about a pole pair."""
    center: complex
    delta: float
    b: float

    @property
    def extent(self) -> float:
        return 2.0 * math.sqrt(self.b) * self.delta

    def residual(self, r1: float, r2: float) -> float:
        return abs(r1) ** (2.0 / 3.0) + abs(r2) ** (2.0 / 3.0) - self.extent ** (2.0 / 3.0)

    def curve(self, samples: int = 200) -> np.ndarray:
        t = np.linspace(0.0, 2.0 * np.pi, samples)
        return np.stack([self.extent * np.cos(t) ** 3, self.extent * np.sin(t) ** 3], axis=1)


def nearby_pole_cusp(center: complex, delta: float, b: float) -> NearbyPoleCusp:
    if delta <= 0 or b <= 0:
        raise NonPositiveParameters(f"delta={delta}, b={b} must be positive")
    return NearbyPoleCusp(complex(center), float(delta), float(b))


def nearby_pole_model(delta: float, b: float) -> Tuple[RefractionModel, SourceSpec]:
    """Constant-index phase-sheet model realizing the pole pair (0, delta)."""
    if delta <= 0 or b <= 0:
        raise NonPositiveParameters(f"delta={delta}, b={b} must be positive")
    model = RefractionModel(kind=ModelKind.CONSTANT, n0sq=b)
    source = SourceSpec(kind=SourceKind.PHASE_SHEET, location=(0.0, 0.0), mu=delta)
    return model, source
