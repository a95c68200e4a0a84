"""
Einbein actions and wave functions.

Builds the closed-form action S(Lambda; x, x') of the exactly soluble refraction
models together with the prefactor f(Lambda), and evaluates

    Psi(Lambda) = f(Lambda) * exp(i k0 S(Lambda))

with Riemann-sheet bookkeeping for the half-integer powers in f.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..schemas.objects import ModelKind, RefractionModel, SourceKind, SourceSpec
from ..utils.config import get_settings
from ..utils.errors import (
    BranchPointEvaluation,
    DimensionMismatch,
    PoleEvaluation,
    UnsupportedCombination,
)

logger = logging.getLogger(__name__)

ArrayLike = Union[complex, np.ndarray]
Point = Tuple[float, ...]


@dataclass(frozen=True)
class PoleTerm:
    """c / (Lambda - location); c is the residue."""
    location: complex
    coefficient: float

    def value(self, lam):
        return self.coefficient / (lam - self.location)

    def d1(self, lam):
        return -self.coefficient / (lam - self.location) ** 2

    def d2(self, lam):
        return 2.0 * self.coefficient / (lam - self.location) ** 3

    def d3(self, lam):
        return -6.0 * self.coefficient / (lam - self.location) ** 4


@dataclass(frozen=True)
class Monomial:
    """coefficient * Lambda**power."""
    power: int
    coefficient: complex

    def value(self, lam):
        return self.coefficient * lam ** self.power

    def d1(self, lam):
        p = self.power
        return p * self.coefficient * lam ** (p - 1) if p >= 1 else 0.0 * lam

    def d2(self, lam):
        p = self.power
        return p * (p - 1) * self.coefficient * lam ** (p - 2) if p >= 2 else 0.0 * lam

    def d3(self, lam):
        p = self.power
        return p * (p - 1) * (p - 2) * self.coefficient * lam ** (p - 3) if p >= 3 else 0.0 * lam


@dataclass(frozen=True)
class ChannelTerm:
    """
    Harmonic channel contribution in z:

        sqrt(alpha) [(z'^2 + z^2) cos(2 sqrt(alpha) Lambda) - 2 z' z] / (2 sin(2 sqrt(alpha) Lambda))

    Simple poles at Lambda = pi n / (2 sqrt(alpha)) with residues (z - (-1)^n z')^2 / 4.
    """
    alpha: float
    z: float
    zp: float

    @property
    def q(self) -> float:
        return math.sqrt(self.alpha)

    @property
    def spacing(self) -> float:
        return math.pi / (2.0 * self.q)

    def _parts(self, lam):
        s = 2.0 * self.q * lam
        return s, np.cos(s), np.sin(s), self.z ** 2 + self.zp ** 2, 2.0 * self.z * self.zp

    def value(self, lam):
        s, c, sn, A, B = self._parts(lam)
        return 0.5 * self.q * (A * c - B) / sn

    def d1(self, lam):
        s, c, sn, A, B = self._parts(lam)
        return self.alpha * (B * c - A) / sn ** 2

    def d2(self, lam):
        s, c, sn, A, B = self._parts(lam)
        return 2.0 * self.alpha * self.q * (2.0 * A * c - B * (1.0 + c ** 2)) / sn ** 3

    def d3(self, lam):
        s, c, sn, A, B = self._parts(lam)
        return 4.0 * self.alpha ** 2 * (B * c * (5.0 + c ** 2) - 2.0 * A * (1.0 + 2.0 * c ** 2)) / sn ** 4

    def d_z(self, lam):
        """Derivative with respect to the observation depth z."""
        s, c, sn, A, B = self._parts(lam)
        return self.q * (self.z * c - self.zp) / sn

    def residue(self, n: int) -> float:
        return 0.25 * (self.z - (-1) ** n * self.zp) ** 2

    def poles(self, window: float) -> List[PoleTerm]:
        """Poles with |Re Lambda| <= window, including n = 0."""
        n_max = int(math.floor(window / self.spacing))
        return [PoleTerm(n * self.spacing, self.residue(n)) for n in range(-n_max, n_max + 1)]

    def distance_to_pole(self, lam):
        n = np.round(np.real(lam) / self.spacing)
        return np.abs(lam - n * self.spacing)


ActionTerm = Union[PoleTerm, Monomial, ChannelTerm]


@dataclass(frozen=True)
class EinbeinAction:
    """Sum of closed-form terms with its behaviour S ~ leading_coeff * Lambda**infinity_order at infinity."""
    terms: Tuple[ActionTerm, ...]
    infinity_order: int
    leading_coeff: complex
    n_squared: float = 0.0
    grad_x: Optional[Callable[[ArrayLike], np.ndarray]] = field(default=None, compare=False, repr=False)
    scale: float = 1.0

    @property
    def pole_terms(self) -> List[PoleTerm]:
        return [t for t in self.terms if isinstance(t, PoleTerm)]

    @property
    def channel(self) -> Optional[ChannelTerm]:
        for t in self.terms:
            if isinstance(t, ChannelTerm):
                return t
        return None

    def poles(self, window: Optional[float] = None) -> List[PoleTerm]:
        """
        Finite poles merged by location; channel poles are enumerated within |Re Lambda| <= window.

        Returns:
            list of PoleTerm with the total residue at each location
        """
        merged = {}
        for term in self.pole_terms:
            merged[term.location] = merged.get(term.location, 0.0) + term.coefficient
        chan = self.channel
        if chan is not None:
            w = window if window is not None else 4.0 * chan.spacing
            for term in chan.poles(w):
                key = complex(term.location)
                match = next((k for k in merged if abs(k - key) < 1e-14 * chan.spacing), None)
                if match is None:
                    merged[key] = term.coefficient
                else:
                    merged[match] += term.coefficient
        return [PoleTerm(complex(loc), float(res)) for loc, res in sorted(merged.items(), key=lambda kv: kv[0].real)]

    @property
    def guard(self) -> float:
        return get_settings().pole_guard * self.scale

    def _check(self, lam) -> None:
        lam_arr = np.atleast_1d(lam)
        for term in self.pole_terms:
            if np.any(np.abs(lam_arr - term.location) < self.guard):
                raise PoleEvaluation(f"Lambda within {self.guard:.2e} of pole {term.location}")
        chan = self.channel
        if chan is not None and np.any(chan.distance_to_pole(lam_arr) < self.guard):
            raise PoleEvaluation("Lambda on a channel pole")

    def value(self, lam, check: bool = True):
        if check:
            self._check(lam)
        return sum(t.value(lam) for t in self.terms)

    def d1(self, lam, check: bool = True):
        if check:
            self._check(lam)
        return sum(t.d1(lam) for t in self.terms)

    def d2(self, lam, check: bool = True):
        if check:
            self._check(lam)
        return sum(t.d2(lam) for t in self.terms)

    def d3(self, lam, check: bool = True):
        if check:
            self._check(lam)
        return sum(t.d3(lam) for t in self.terms)


@dataclass(frozen=True)
class BranchFactor:
    """(Lambda - location)**exponent."""
    location: complex
    exponent: float


def _log_up_angle(w: np.ndarray) -> np.ndarray:
    """Argument with the cut pointing vertically upward: values in (-3pi/2, pi/2]."""
    ang = np.angle(w)
    return np.where(ang > 0.5 * np.pi, ang - 2.0 * np.pi, ang)


@dataclass(frozen=True)
class Prefactor:
    """
    constant * prod (Lambda - beta_m)**e_m [* sinc(2 sqrt(alpha) Lambda)**(-1/2)].

    Sheet 0 takes every argument on the cut pointing upward from its branch
    point; sheet s adds 2 pi s to every argument.
    """
    constant: complex
    factors: Tuple[BranchFactor, ...]
    channel_alpha: Optional[float] = None
    guard: float = 1e-12

    @property
    def n_factors(self) -> int:
        return len(self.factors) + (1 if self.channel_alpha else 0)

    def _sinc(self, lam):
        s = 2.0 * math.sqrt(self.channel_alpha) * lam
        safe = np.where(np.abs(s) < 1e-8, 1.0, s)
        return np.where(np.abs(s) < 1e-8, 1.0 - s ** 2 / 6.0, np.sin(safe) / safe)

    def _bases(self, lam) -> List[np.ndarray]:
        bases = [lam - f.location for f in self.factors]
        if self.channel_alpha:
            bases.append(self._sinc(lam))
        return bases

    def exponents(self) -> List[float]:
        exps = [f.exponent for f in self.factors]
        if self.channel_alpha:
            exps.append(-0.5)
        return exps

    def angles(self, lam) -> np.ndarray:
        """Sheet-0 arguments, shape (n_factors, n_points)."""
        lam = np.atleast_1d(np.asarray(lam, dtype=complex))
        rows = []
        for i, base in enumerate(self._bases(lam)):
            if self.channel_alpha and i == len(self.factors):
                rows.append(np.angle(base))
            else:
                rows.append(_log_up_angle(base))
        return np.array(rows).reshape(len(rows), lam.size)

    def from_angles(self, lam, angles: np.ndarray) -> np.ndarray:
        """Value with the supplied (continued) arguments."""
        lam = np.atleast_1d(np.asarray(lam, dtype=complex))
        log_val = np.full(lam.shape, complex(cmath.log(self.constant)))
        for base, ang, exp in zip(self._bases(lam), angles, self.exponents()):
            mod = np.abs(base)
            if np.any(mod < self.guard):
                raise BranchPointEvaluation("Lambda on a prefactor branch point")
            log_val = log_val + exp * (np.log(mod) + 1j * ang)
        return np.exp(log_val)

    def evaluate(self, lam, sheet: Union[int, Sequence[int]] = 0):
        scalar = np.ndim(lam) == 0
        angles = self.angles(lam)
        shifts = np.broadcast_to(np.asarray(sheet, dtype=float), (angles.shape[0],))
        values = self.from_angles(lam, angles + 2.0 * np.pi * shifts[:, None])
        return complex(values[0]) if scalar else values

    def snap_angles(self, lam, reference: np.ndarray) -> np.ndarray:
        """Sheet-0 arguments shifted by multiples of 2 pi to lie nearest `reference`."""
        base = self.angles(lam)
        return base + 2.0 * np.pi * np.round((reference - base) / (2.0 * np.pi))

    def segment_angles(self, start: complex, start_angles: np.ndarray, nodes: np.ndarray) -> np.ndarray:
        """
        Arguments at points of the straight segment leaving `start`.

        A straight segment subtends less than pi at any branch point off it, so the
        change of argument is the principal argument of the ratio.
        """
        nodes = np.atleast_1d(np.asarray(nodes, dtype=complex))
        rows = []
        for i, f in enumerate(self.factors):
            rows.append(start_angles[i] + np.angle((nodes - f.location) / (start - f.location)))
        if self.channel_alpha:
            ref = np.full(nodes.shape, start_angles[-1])
            rows.append(self.snap_angles(nodes, ref[None, :].repeat(self.n_factors, axis=0))[-1])
        return np.array(rows).reshape(len(rows), nodes.size)


@dataclass(frozen=True)
class Wavefunction:
    """Psi = prefactor * exp(i k0 S) at one observation point."""
    action: EinbeinAction
    prefactor: Prefactor
    k0: float
    model: Optional[RefractionModel] = None
    source: Optional[SourceSpec] = None
    x: Optional[Point] = None
    prefactor_model: Optional[RefractionModel] = None

    def exponential(self, lam, check: bool = True):
        return np.exp(1j * self.k0 * self.action.value(lam, check=check))

    def psi(self, lam, sheet: Union[int, Sequence[int]] = 0):
        return self.prefactor.evaluate(lam, sheet) * self.exponential(lam)

    def at(self, x: Point) -> "Wavefunction":
        """Same model, source and k0 at another observation point."""
        if self.model is None or self.source is None:
            raise UnsupportedCombination("wavefunction was not built from a catalog model")
        return build_wavefunction(self.model, self.source, x, self.k0, prefactor_model=self.prefactor_model)

    def with_k0(self, k0: float) -> "Wavefunction":
        action, prefactor = build_action(self.model, self.source, self.x, k0,
                                         prefactor_model=self.prefactor_model)
        return replace(self, action=action, prefactor=prefactor, k0=k0)


def _power_constant(k0: float, power: float) -> complex:
    """(k0 / (4 pi i))**power on the principal branch."""
    return (k0 / (4.0 * math.pi)) ** power * cmath.exp(-0.25j * math.pi * 2.0 * power)


def _split(x: Point, xp: Point) -> Tuple[np.ndarray, float, float]:
    xv = np.asarray(x, dtype=float)
    xpv = np.asarray(xp, dtype=float)
    return xv - xpv, float(xv[-1]), float(xpv[-1])


def _point_source_action(model: RefractionModel, x: Point, xp: Point, k0: float,
                         prefactor_model: RefractionModel) -> Tuple[EinbeinAction, Prefactor]:
    dim = len(x)
    d, z, zp = _split(x, xp)
    horiz = d[:-1]
    terms: List[ActionTerm] = []
    n2 = model.n_squared(tuple(x))
    pref_const = _power_constant(k0, 0.5 * dim)
    pref_factors = (BranchFactor(0.0, -0.5 * dim),)
    kind = model.kind

    if kind in (ModelKind.CONSTANT, ModelKind.LINEAR_Z):
        r2 = float(np.dot(d, d))
        if r2 > 0:
            terms.append(PoleTerm(0.0, 0.25 * r2))
        lin = model.n0sq - 0.5 * model.a * (z + zp)
        terms.append(Monomial(1, lin))
        order, lead = 1, complex(lin)
        if kind == ModelKind.LINEAR_Z and model.a != 0:
            terms.append(Monomial(3, -model.a ** 2 / 12.0))
            order, lead = 3, complex(-model.a ** 2 / 12.0)
        a = model.a if kind == ModelKind.LINEAR_Z else 0.0

        def grad(lam):
            g = [di / (2.0 * lam) for di in d]
            g[-1] = g[-1] - 0.5 * a * lam
            return np.array(g)

        scale = max(1.0, math.sqrt(r2))
        action = EinbeinAction(tuple(terms), order, lead, n2, grad, scale)
        return action, Prefactor(pref_const, pref_factors)

    if kind in (ModelKind.QUADRATIC_Z, ModelKind.LINEAR_X_QUADRATIC_Z):
        h2 = float(np.dot(horiz, horiz))
        if h2 > 0:
            terms.append(PoleTerm(0.0, 0.25 * h2))
        chan = ChannelTerm(model.alpha, z, zp)
        terms.append(chan)
        beta = model.beta if kind == ModelKind.LINEAR_X_QUADRATIC_Z else 0.0
        lin = model.n0sq - 0.5 * beta * (x[0] + xp[0])
        terms.append(Monomial(1, lin))
        order, lead = 1, complex(lin)
        if beta != 0:
            terms.append(Monomial(3, -beta ** 2 / 12.0))
            order, lead = 3, complex(-beta ** 2 / 12.0)

        def grad(lam):
            g = [di / (2.0 * lam) for di in horiz]
            if g:
                g[0] = g[0] - 0.5 * beta * lam
            g.append(chan.d_z(lam))
            return np.array(g)

        action = EinbeinAction(tuple(terms), order, lead, n2, grad, chan.spacing)
        return action, Prefactor(pref_const, pref_factors, channel_alpha=prefactor_model.alpha)

    raise UnsupportedCombination(
        f"{kind.value} has no closed-form action; build its Laurent series with einbein.core.laurent"
    )


def _phase_sheet_action(model: RefractionModel, source: SourceSpec, x: Point,
                        k0: float) -> Tuple[EinbeinAction, Prefactor]:
    if model.kind != ModelKind.CONSTANT:
        raise UnsupportedCombination("phase-sheet sources are only soluble for the constant model")
    if len(x) != 2 or source.dimension != 2:
        raise DimensionMismatch("phase-sheet sources are two-dimensional (x, z)")
    mu = float(source.mu)
    x0, zp = source.location
    dx, dz = x[0] - x0, x[1] - zp
    terms: List[ActionTerm] = []
    if dz != 0:
        terms.append(PoleTerm(0.0, 0.25 * dz * dz))
    if dx != 0:
        terms.append(PoleTerm(mu, 0.25 * dx * dx))
    terms.append(Monomial(1, model.n0sq))

    def grad(lam):
        return np.array([dx / (2.0 * (lam - mu)), dz / (2.0 * lam)])

    # branch fixed so that (0, mu) approached from below continues the physical contour
    constant = -cmath.sqrt(1j * k0 * mu / (4.0 * math.pi))
    prefactor = Prefactor(constant, (BranchFactor(0.0, -0.5), BranchFactor(mu, -0.5)))
    action = EinbeinAction(tuple(terms), 1, complex(model.n0sq), model.n0sq, grad, max(1.0, mu))
    return action, prefactor


def build_action(model: RefractionModel, source: SourceSpec, x: Point, k0: float,
                 prefactor_model: Optional[RefractionModel] = None) -> Tuple[EinbeinAction, Prefactor]:
    """
    Closed-form einbein action and prefactor for a catalog model.

    Args:
        model: refraction profile
        source: point source or phase sheet
        x: observation point, last coordinate is z
        k0: wavenumber
        prefactor_model: model used for the prefactor only (defaults to `model`)

    Returns:
        (EinbeinAction, Prefactor)
    """
    x = tuple(float(v) for v in x)
    if k0 <= 0:
        raise UnsupportedCombination("k0 must be positive")
    if source.kind == SourceKind.PHASE_SHEET:
        return _phase_sheet_action(model, source, x, k0)
    if len(x) != source.dimension or len(x) not in (2, 3):
        raise DimensionMismatch(f"point has {len(x)} components, source has {source.dimension}")
    return _point_source_action(model, x, tuple(source.location), k0, prefactor_model or model)


def build_wavefunction(model: RefractionModel, source: SourceSpec, x: Point, k0: float,
                       prefactor_model: Optional[RefractionModel] = None) -> Wavefunction:
    action, prefactor = build_action(model, source, x, k0, prefactor_model)
    return Wavefunction(action, prefactor, k0, model, source, tuple(float(v) for v in x), prefactor_model)


def eval_action(action: EinbeinAction, lam: ArrayLike) -> ArrayLike:
    return action.value(lam)


def eval_d1(action: EinbeinAction, lam: ArrayLike) -> ArrayLike:
    return action.d1(lam)


def eval_d2(action: EinbeinAction, lam: ArrayLike) -> ArrayLike:
    return action.d2(lam)


def eval_d3(action: EinbeinAction, lam: ArrayLike) -> ArrayLike:
    return action.d3(lam)


def eval_grad_x(action: EinbeinAction, lam: complex) -> np.ndarray:
    """Spatial gradient of S at fixed Lambda."""
    if action.grad_x is None:
        raise UnsupportedCombination("action carries no spatial gradient")
    action._check(lam)
    return action.grad_x(lam)


def eval_psi(wavefunction: Wavefunction, lam: ArrayLike, sheet: Union[int, Sequence[int]] = 0) -> ArrayLike:
    return wavefunction.psi(lam, sheet)


def hamilton_jacobi_residual(action: EinbeinAction, lam: complex) -> complex:
    """(grad S)^2 - n^2 + dS/dLambda, zero for every catalog action."""
    g = eval_grad_x(action, lam)
    return complex(np.sum(g * g) - action.n_squared + action.d1(lam))


def schrodinger_residual(wavefunction: Wavefunction, lam: complex, x: Point, h: float,
                         h_lam: float) -> complex:
    """
    Finite-difference residual of (i/k0) dPsi/dLambda + (k0^-2 Laplacian + n^2) Psi,
    normalized by |Psi|.
    """
    x = tuple(float(v) for v in x)
    k0 = wavefunction.k0
    center = wavefunction.at(x)
    psi0 = center.psi(lam)
    dpsi = (center.psi(lam + h_lam) - center.psi(lam - h_lam)) / (2.0 * h_lam)
    lap = 0.0
    for axis in range(len(x)):
        step = np.zeros(len(x))
        step[axis] = h
        plus = wavefunction.at(tuple(np.asarray(x) + step)).psi(lam)
        minus = wavefunction.at(tuple(np.asarray(x) - step)).psi(lam)
        lap += (plus - 2.0 * psi0 + minus) / h ** 2
    n2 = wavefunction.model.n_squared(x)
    residual = (1j / k0) * dpsi + lap / k0 ** 2 + n2 * psi0
    return complex(residual / abs(psi0))
