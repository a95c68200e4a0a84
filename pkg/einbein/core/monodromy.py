"""
Monodromy of contour classes under closed loops in parameter space.

A basis contour is a word of stops (pole approaches and wedge ends at infinity at
unwrapped angles). A loop winds one parameter of the action (n0^2, the slope a, the
squared distance x^2 + z^2 or a ghost residue). The action is rebuilt at every step
of the loop, the infinity wedges and pole sectors are followed from step to step,
and every stop is carried along with the sector it sits in. The transported words
are written back in the basis through the generators

    P(s_j)  pole at sector centre s_j  ->  first infinity wedge centre above s_j
    A_k     arc at infinity from wedge centre c_k to c_(k+1)

where a generator one full turn further round picks up the prefactor monodromy
sigma = exp(2 pi i e) of the source branch point.
"""

from __future__ import annotations

import cmath
import json
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .action import EinbeinAction, Monomial, PoleTerm, Wavefunction, build_action, build_wavefunction
from .quadrature import TAIL_DECAY, integrate_path
from .thimbles import ContourClass, Stop, infinity_wedges, pole_sector
from ..schemas.objects import ModelKind, RefractionModel, SourceSpec
from ..utils.config import get_settings
from ..utils.errors import BasisNotClosed, CoarseLoop, IntegerRoundingFailure, UnsupportedCombination

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


def deg(angle: float) -> float:
    return math.radians(angle)


@dataclass(frozen=True)
class BasisContour:
    label: str
    word: ContourClass

    def describe(self) -> str:
        return f"{self.label}: {self.word.describe()}"


@dataclass(frozen=True)
class Basis:
    """Basis words with the wedge geometry they refer to and the action they were drawn for."""
    name: str
    contours: Tuple[BasisContour, ...]
    m_inf: int
    first_center: float
    sector_center: float
    sigma: complex
    single_center: bool = True
    model: Optional[RefractionModel] = None
    action: Optional[EinbeinAction] = field(default=None, compare=False, repr=False)

    @property
    def labels(self) -> List[str]:
        return [c.label for c in self.contours]

    @property
    def step(self) -> float:
        return TWO_PI / self.m_inf


@dataclass(frozen=True)
class LoopSpec:
    """
    Closed loop winding one parameter of the action,

        parameter -> parameter * exp(i turns theta),  theta in [0, 2 pi].

    parameter is one of n0sq, a, r2 (the squared source distance), ghost (the residue
    of the pole at `pole`) or none.
    """
    name: str
    parameter: str
    turns: float = 0.0
    pole: Optional[complex] = None

    @property
    def description(self) -> str:
        target = {"n0sq": "n0^2", "a": "a", "r2": "x^2 + z^2", "none": "nothing"}.get(
            self.parameter, f"residue at {self.pole}")
        return f"arg {target} by {self.turns:g} turns" if self.turns else "constant"


NAMED_LOOPS: Dict[str, LoopSpec] = {
    "nu": LoopSpec("nu", "n0sq", 1.0),
    "a": LoopSpec("a", "a", -0.5),
    "a_full": LoopSpec("a_full", "a", 1.0),
    "coord": LoopSpec("coord", "r2", 1.0),
    "trivial": LoopSpec("trivial", "none"),
}


@dataclass(frozen=True)
class LoopTrack:
    """Rotation of the infinity wedges and of every pole sector observed along a loop."""
    wedge_rotation: float
    pole_rotations: Dict[complex, float]
    steps: int


@dataclass
class MonodromyMatrix:
    matrix: np.ndarray
    labels: List[str]
    loop: LoopSpec
    transported: List[ContourClass] = field(default_factory=list)
    confirmation_residual: Optional[float] = None
    track: Optional[LoopTrack] = None

    @property
    def det(self) -> int:
        return int(round(float(np.real(np.linalg.det(self.matrix))))) if len(self.matrix) else 1

    def to_json(self) -> str:
        track = self.track
        return json.dumps({
            "loop": {"name": self.loop.name, "parameter": self.loop.parameter, "turns": self.loop.turns,
                     "description": self.loop.description},
            "wedge_rotation_deg": math.degrees(track.wedge_rotation) if track else None,
            "pole_rotation_deg": {f"{k.real:g}": math.degrees(v) for k, v in track.pole_rotations.items()}
            if track else {},
            "basis": self.labels,
            "matrix": self.matrix.tolist(),
            "det": self.det,
            "transported": [w.describe() for w in self.transported],
            "confirmation_residual": self.confirmation_residual,
        }, indent=2)


def _sigma(dim: int) -> complex:
    """exp(2 pi i e) for the source prefactor Lambda^(-dim/2)."""
    value = cmath.exp(-1j * math.pi * dim)
    return complex(round(value.real), round(value.imag))


def _reference_point(model: RefractionModel, source: SourceSpec) -> Tuple[float, ...]:
    """Point the basis is drawn at; off the source plane only where channel residues need it."""
    x = [float(v) for v in source.location]
    x[0] += 0.5
    if model.kind == ModelKind.QUADRATIC_Z:
        x[-1] += 0.2
    return tuple(x)


def _reference_action(model: RefractionModel, source: SourceSpec) -> EinbeinAction:
    action, _ = build_action(model, source, _reference_point(model, source), k0=1.0)
    return action


def _residues(action: EinbeinAction) -> Dict[complex, complex]:
    """Total residue at every finite pole (channel poles within four spacings)."""
    merged: Dict[complex, complex] = {}
    terms = list(action.pole_terms)
    chan = action.channel
    if chan is not None:
        terms += chan.poles(4.0 * chan.spacing)
    for term in terms:
        loc = complex(term.location)
        key = next((k for k in merged if abs(k - loc) < 1e-9 * max(1.0, abs(loc))), loc)
        merged[key] = merged.get(key, 0j) + complex(term.coefficient)
    return merged


def _geometry(action: EinbeinAction) -> Tuple[float, float]:
    centers = sorted(w.center for w in infinity_wedges(action.infinity_order, complex(action.leading_coeff)))
    return centers[0], pole_sector(0j, _residues(action)[0j]).center


def constant_basis(dim: int = 2, n0sq: float = 1.0) -> Basis:
    """(Gamma_A, Gamma_D): pole to the upper wedge, and the loop from the pole round to its next sheet."""
    model = RefractionModel(kind=ModelKind.CONSTANT, n0sq=n0sq)
    action = _reference_action(model, SourceSpec(location=[0.0] * dim))
    first, sector = _geometry(action)
    contours = (
        BasisContour("Gamma_A", ContourClass((Stop("pole", deg(-90)), Stop("inf", deg(90))))),
        BasisContour("Gamma_D", ContourClass((Stop("pole", deg(-90)), Stop("pole", deg(-450))))),
    )
    return Basis(f"constant_{dim}d", contours, 1, first, sector, _sigma(dim), model=model, action=action)


def linear_z_basis(a: float = 1.0, dim: int = 2, n0sq: float = 1.0) -> Basis:
    """Direct, caustic, shadow and closing contours of the linear profile."""
    if a == 0:
        raise UnsupportedCombination("the linear basis needs a nonzero slope")
    model = RefractionModel(kind=ModelKind.LINEAR_Z, n0sq=n0sq, a=a)
    action = _reference_action(model, SourceSpec(location=[0.0] * dim))
    first, sector = _geometry(action)
    contours = (
        BasisContour("Gamma_A", ContourClass((Stop("pole", deg(270)), Stop("inf", deg(210))))),
        BasisContour("Gamma_B", ContourClass((Stop("inf", deg(210)), Stop("inf", deg(330))))),
        BasisContour("Gamma_C", ContourClass((Stop("inf", deg(210)), Stop("inf", deg(90))))),
        BasisContour("Gamma_D", ContourClass((Stop("inf", deg(450)), Stop("inf", deg(90))))),
    )
    # the source pole is approached from 270 deg, one turn above its sheet-0 sector
    return Basis("linear_z", contours, 3, first, sector + TWO_PI, _sigma(dim), model=model, action=action)


def channel_ghost_basis(alpha: float, n0sq: float = 1.0) -> Basis:
    """Contours threading the first ghost pole: in along one ray, out along another."""
    model = RefractionModel(kind=ModelKind.QUADRATIC_Z, n0sq=n0sq, alpha=alpha)
    action = _reference_action(model, SourceSpec(location=[0.0, 0.0]))
    beta = complex(math.pi / (2.0 * math.sqrt(alpha)))
    contours = (
        BasisContour("Gamma_0", ContourClass((Stop("pole", deg(-90)), Stop("inf", deg(90))))),
        BasisContour("Gamma_g", ContourClass((Stop("pole", deg(-90)), Stop("pole", deg(-60), beta),
                                              Stop("pole", deg(-120), beta), Stop("inf", deg(90))))),
    )
    return Basis("channel_ghost", contours, 1, deg(90), deg(-90), -1, single_center=False,
                 model=model, action=action)


def ghost_loop(alpha: float) -> LoopSpec:
    beta = complex(math.pi / (2.0 * math.sqrt(alpha)))
    return LoopSpec("ghost", "ghost", 1.0, pole=beta)


def continued_action(basis: Basis, loop: LoopSpec, theta: float) -> EinbeinAction:
    """The basis action with the loop parameter advanced to angle theta."""
    action = basis.action
    if action is None or basis.model is None:
        raise UnsupportedCombination(f"basis {basis.name} carries no action to continue")
    u = cmath.exp(1j * loop.turns * theta)
    n0sq = basis.model.n0sq
    terms = []
    for t in action.terms:
        if isinstance(t, Monomial) and t.power == 1 and loop.parameter == "n0sq":
            t = Monomial(1, t.coefficient + n0sq * (u - 1.0))
        elif isinstance(t, Monomial) and t.power == 1 and loop.parameter == "a":
            # n0^2 - a (z + z')/2
            t = Monomial(1, n0sq - (n0sq - t.coefficient) * u)
        elif isinstance(t, Monomial) and t.power == 3 and loop.parameter == "a":
            t = Monomial(3, t.coefficient * u * u)
        elif isinstance(t, PoleTerm) and t.location == 0 and loop.parameter == "r2":
            t = PoleTerm(t.location, t.coefficient * u)
        terms.append(t)
    if loop.parameter == "ghost":
        residues = _residues(action)
        key = next((k for k in residues if abs(k - loop.pole) < 1e-9 * max(1.0, abs(k))), None)
        if key is None:
            raise UnsupportedCombination(f"no pole at {loop.pole} to wind")
        terms.append(PoleTerm(key, residues[key] * (u - 1.0)))
    lead = next((t.coefficient for t in terms if isinstance(t, Monomial) and t.power == action.infinity_order),
                action.leading_coeff)
    return replace(action, terms=tuple(terms), leading_coeff=complex(lead))


def _follow(previous: float, centers: Sequence[float], limit: float, what: str) -> float:
    """Unwrapped centre nearest to `previous`; a jump beyond `limit` cannot be attributed."""
    jumps = [(c - previous + math.pi) % TWO_PI - math.pi for c in centers]
    jump = min(jumps, key=abs)
    if abs(jump) > limit:
        raise CoarseLoop(f"{what} moved {math.degrees(jump):.1f} deg in one step; use more loop steps")
    return previous + jump


def _same_action(a: EinbeinAction, b: EinbeinAction, tol: float = 1e-9) -> bool:
    ma = {t.power: complex(t.coefficient) for t in a.terms if isinstance(t, Monomial)}
    mb = {t.power: complex(t.coefficient) for t in b.terms if isinstance(t, Monomial)}
    if ma.keys() != mb.keys() or any(abs(ma[p] - mb[p]) > tol * max(1.0, abs(ma[p])) for p in ma):
        return False
    ra, rb = _residues(a), _residues(b)
    for key, value in ra.items():
        other = next((v for k, v in rb.items() if abs(k - key) < 1e-9 * max(1.0, abs(k))), 0j)
        if abs(value - other) > tol * max(1.0, abs(value)):
            return False
    return True


def track_loop(basis: Basis, loop: LoopSpec, steps: int) -> LoopTrack:
    """
    Follow the infinity wedges and pole sectors of the continued action round the loop.

    Args:
        basis: basis with the action it was drawn for
        loop: loop descriptor
        steps: number of steps round the loop

    Returns:
        LoopTrack with the accumulated rotations

    Raises:
        CoarseLoop: a wedge or sector moved too far in one step to be followed
        BasisNotClosed: the action at the end of the loop differs from the start
    """
    start = continued_action(basis, loop, 0.0)
    m = start.infinity_order
    wedge = min((w.center for w in infinity_wedges(m, complex(start.leading_coeff))), key=abs)
    wedge0 = wedge
    floor = get_settings().residue_floor
    sectors = {k: pole_sector(k, r).center for k, r in _residues(start).items() if abs(r) > floor}
    sectors0 = dict(sectors)
    for i in range(1, steps + 1):
        action = continued_action(basis, loop, TWO_PI * i / steps)
        centers = [w.center for w in infinity_wedges(m, complex(action.leading_coeff))]
        wedge = _follow(wedge, centers, math.pi / (2.0 * m), "infinity wedge")
        residues = _residues(action)
        for key in sectors:
            res = next(v for k, v in residues.items() if abs(k - key) < 1e-9 * max(1.0, abs(k)))
            sectors[key] = _follow(sectors[key], [pole_sector(key, res).center], 0.5 * math.pi,
                                   f"sector of pole {key.real:g}")
    if not _same_action(start, continued_action(basis, loop, TWO_PI)):
        raise BasisNotClosed(f"loop {loop.name} does not return to the starting action")
    rotations = {k: sectors[k] - sectors0[k] for k in sectors}
    track = LoopTrack(wedge - wedge0, rotations, steps)
    logger.debug(f"Loop {loop.name}: wedges turned {math.degrees(track.wedge_rotation):.2f} deg, "
                 f"sectors {({f'{k.real:g}': round(math.degrees(v), 2) for k, v in rotations.items()})}")
    return track


def _center_index(basis: Basis, angle: float) -> int:
    k = (angle - basis.first_center) / basis.step
    if abs(k - round(k)) > 1e-6:
        raise BasisNotClosed(f"infinity stop at {math.degrees(angle):.3f} deg is not a wedge centre")
    return int(round(k))


def _index_above(basis: Basis, angle: float) -> int:
    return int(math.floor((angle - basis.first_center) / basis.step)) + 1


def _sheet(basis: Basis, angle: float) -> int:
    j = (angle - basis.sector_center) / TWO_PI
    if abs(j - round(j)) > 1e-6:
        raise BasisNotClosed(f"pole stop at {math.degrees(angle):.3f} deg is off the sector centre")
    return int(round(j))


def _arc(basis: Basis, k: int) -> np.ndarray:
    vec = np.zeros(basis.m_inf + 1, dtype=complex)
    vec[1 + k % basis.m_inf] = basis.sigma ** (k // basis.m_inf)
    return vec


def _arcs(basis: Basis, k_from: int, k_to: int) -> np.ndarray:
    vec = np.zeros(basis.m_inf + 1, dtype=complex)
    if k_to >= k_from:
        for k in range(k_from, k_to):
            vec += _arc(basis, k)
    else:
        for k in range(k_to, k_from):
            vec -= _arc(basis, k)
    return vec


def _pole(basis: Basis, angle: float) -> np.ndarray:
    vec = np.zeros(basis.m_inf + 1, dtype=complex)
    vec[0] = basis.sigma ** _sheet(basis, angle)
    return vec


def generator_vector(basis: Basis, word: ContourClass) -> np.ndarray:
    """Coefficients of a single-centre word on (P, A_0, ..., A_(m-1))."""
    stops = word.canonical().stops
    vec = np.zeros(basis.m_inf + 1, dtype=complex)
    for a, b in zip(stops[:-1], stops[1:]):
        if a.kind == "pole":
            vec += _pole(basis, a.angle)
            k_from = _index_above(basis, a.angle)
        else:
            k_from = _center_index(basis, a.angle)
        if b.kind == "pole":
            vec += _arcs(basis, k_from, _index_above(basis, b.angle)) - _pole(basis, b.angle)
        else:
            vec += _arcs(basis, k_from, _center_index(basis, b.angle))
    return vec


def _normalize_passages(word: ContourClass, tol: float = 1e-9) -> Tuple:
    """Canonical key: in/out passages through one pole reduced to a common turn."""
    stops = list(word.canonical().stops)
    key = []
    i = 0
    while i < len(stops):
        s = stops[i]
        if 0 < i < len(stops) - 2 and s.kind == "pole" and stops[i + 1].kind == "pole" \
                and abs(stops[i + 1].pole - s.pole) < tol:
            turn = math.floor(s.angle / TWO_PI)
            key.append(("pass", round(s.pole.real, 9), round(s.angle - turn * TWO_PI, 9),
                        round(stops[i + 1].angle - turn * TWO_PI, 9)))
            i += 2
            continue
        key.append((s.kind, round(s.pole.real, 9), round(s.angle, 9)))
        i += 1
    return tuple(key)


def _integer(matrix: np.ndarray) -> np.ndarray:
    rounded = np.rint(np.real(matrix))
    if np.max(np.abs(matrix - rounded), initial=0.0) > 1e-8:
        raise IntegerRoundingFailure(f"non-integer monodromy entries:\n{np.round(matrix, 6)}")
    return rounded.astype(int)


def transport(basis: Basis, loop: LoopSpec, steps: Optional[int] = None,
              wavefunction: Optional[Wavefunction] = None, route_radius: Optional[float] = None) -> MonodromyMatrix:
    """
    Continue every basis word round the loop and express the result in the basis.

    Args:
        basis: basis words with their wedge geometry
        loop: loop descriptor
        steps: loop discretization (defaults to the configured step count)
        wavefunction: if given, the matrix is confirmed by integrating transported and
            original words along routed polylines
        route_radius: radius of the routing circle for the confirmation

    Returns:
        MonodromyMatrix with det = +-1
    """
    steps = steps or get_settings().monodromy_steps
    track = track_loop(basis, loop, steps)
    moved = [c.word.transported(track.wedge_rotation, track.pole_rotations) for c in basis.contours]
    logger.info(f"Transported {len(moved)} words of {basis.name} round loop {loop.name}")
    for c, w in zip(basis.contours, moved):
        logger.debug(f"{c.label}: {c.word.describe()}  ->  {w.describe()}")

    if basis.single_center:
        original = np.array([generator_vector(basis, c.word) for c in basis.contours])
        target = np.array([generator_vector(basis, w) for w in moved])
        if abs(np.linalg.det(original)) < 1e-9:
            raise BasisNotClosed(f"{basis.name} words are not independent")
        matrix = _integer(target @ np.linalg.inv(original))
    else:
        keys = [_normalize_passages(c.word) for c in basis.contours]
        matrix = np.zeros((len(keys), len(keys)), dtype=int)
        for i, w in enumerate(moved):
            key = _normalize_passages(w)
            if key not in keys:
                raise BasisNotClosed(f"transported word {w.describe()} matches no basis word")
            matrix[i, keys.index(key)] = 1

    result = MonodromyMatrix(matrix, basis.labels, loop, moved, track=track)
    if abs(result.det) != 1:
        raise BasisNotClosed(f"monodromy determinant {result.det}")
    if wavefunction is not None:
        result.confirmation_residual = confirm_numerically(result, basis, wavefunction, route_radius)
    return result


def coordinate_loop(basis: Basis, steps: Optional[int] = None, wavefunction: Optional[Wavefunction] = None,
                    route_radius: Optional[float] = None) -> MonodromyMatrix:
    """Loop of the source residue; for the linear profile also checks M_coord M_a^3 = I."""
    result = transport(basis, NAMED_LOOPS["coord"], steps, wavefunction, route_radius)
    if basis.name == "linear_z":
        m_a = transport(basis, NAMED_LOOPS["a"], steps).matrix
        product = result.matrix @ np.linalg.matrix_power(m_a, 3)
        if not np.array_equal(product, np.eye(len(product), dtype=int)):
            raise BasisNotClosed(f"M_coord M_a^3 != I:\n{product}")
    return result


def _escape_length(wf: Wavefunction, start: complex, direction: complex) -> float:
    base = complex(wf.action.value(start, check=False)).imag
    length = abs(start)
    for _ in range(60):
        rise = complex(wf.action.value(start + length * direction, check=False)).imag - base
        if wf.k0 * rise > TAIL_DECAY:
            return length
        length *= 2.0
    raise BasisNotClosed(f"no decay along direction {cmath.phase(direction):.3f}")


def _arc_points(radius: float, a: float, b: float) -> List[complex]:
    n = max(2, int(math.ceil(abs(b - a) / deg(5))))
    return [radius * cmath.exp(1j * t) for t in np.linspace(a, b, n + 1)[1:]]


def route_word(wf: Wavefunction, word: ContourClass, radius: float) -> Tuple[np.ndarray, int, float]:
    """
    Polyline for a single-centre word: radial legs at each stop joined by arcs of the
    routing circle. Returns (path, anchor, prefactor angle at the anchor).
    """
    stops = word.canonical().stops
    first = stops[0]
    ray = cmath.exp(1j * first.angle)
    if first.kind == "pole":
        path = [0j, radius * ray]
    else:
        far = radius + _escape_length(wf, radius * ray, ray)
        path = [far * ray, radius * ray]
    anchor = 1
    for a, b in zip(stops[:-1], stops[1:]):
        path.extend(_arc_points(radius, a.angle, b.angle))
    last = stops[-1]
    ray = cmath.exp(1j * last.angle)
    if last.kind == "pole":
        path.append(0j)
    else:
        path.append((radius + _escape_length(wf, radius * ray, ray)) * ray)
    return np.array(path, dtype=complex), anchor, first.angle


def integrate_word(wf: Wavefunction, word: ContourClass, radius: float) -> complex:
    if not word.canonical().stops:
        return 0j
    if wf.prefactor.n_factors != 1 or abs(wf.prefactor.factors[0].location) > 0:
        raise UnsupportedCombination("routed words need a single branch point at Lambda = 0")
    path, anchor, angle = route_word(wf, word, radius)
    stops = word.canonical().stops
    return integrate_path(wf, path, anchor, np.array([angle]), singular_start=stops[0].kind == "pole",
                          singular_end=stops[-1].kind == "pole")


def confirm_numerically(result: MonodromyMatrix, basis: Basis, wf: Wavefunction,
                        route_radius: Optional[float] = None) -> float:
    """Max relative residual of  int(transported_i) - sum_j M_ij int(Gamma_j)."""
    if not basis.single_center:
        raise UnsupportedCombination("numerical confirmation routes single-centre words only")
    radius = route_radius or 1.5 * wf.action.scale
    originals = np.array([integrate_word(wf, c.word, radius) for c in basis.contours])
    moved = np.array([integrate_word(wf, w, radius) for w in result.transported])
    predicted = result.matrix @ originals
    scale = max(float(np.max(np.abs(originals))), 1e-300)
    residual = float(np.max(np.abs(moved - predicted)) / scale)
    logger.info(f"Monodromy {result.loop.name} confirmed to {residual:.2e}")
    if residual > 1e-6:
        raise BasisNotClosed(f"transported integrals disagree with the matrix (residual {residual:.2e})")
    return residual


def basis_for(model: RefractionModel, source: SourceSpec) -> Basis:
    """The basis supplied for a catalog model."""
    if model.kind == ModelKind.CONSTANT:
        return constant_basis(source.dimension, model.n0sq)
    if model.kind == ModelKind.LINEAR_Z:
        return linear_z_basis(model.a, source.dimension, model.n0sq)
    if model.kind == ModelKind.QUADRATIC_Z:
        return channel_ghost_basis(model.alpha, model.n0sq)
    raise UnsupportedCombination(f"no monodromy basis for {model.kind.value}")


def loop_for(name: str, model: RefractionModel) -> LoopSpec:
    if name == "ghost":
        return ghost_loop(model.alpha)
    if name not in NAMED_LOOPS:
        raise UnsupportedCombination(f"unknown loop {name!r}; choose from {sorted(NAMED_LOOPS) + ['ghost']}")
    return NAMED_LOOPS[name]


def confirmation_wavefunction(model: RefractionModel, source: SourceSpec, k0: float = 1.0) -> Wavefunction:
    """Wave function at a point close to the source, where routed words stay well scaled."""
    x = list(source.location)
    x[0] += 0.5
    x[-1] += 0.2
    return build_wavefunction(model, source, tuple(x), k0)
