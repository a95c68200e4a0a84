"""
Asymptotic evaluation of thimble sums.

Stationary phase over the contributing critical points, the Airy uniform expansion
near a fold built from the Laurent series truncated at (Lambda - P)^3, the affine
map onto the fold normal form, and arrival times read off the critical values.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy import special

from .action import Wavefunction
from .laurent import LaurentSeries
from .thimbles import BranchContour, Decomposition
from ..utils.config import get_settings
from ..utils.errors import DegenerateCubic, Overflow, TooCloseToCaustic, UnclassifiedCaustic

logger = logging.getLogger(__name__)


def airy(u):
    """Ai(u) for real or complex u."""
    ai, _, _, _ = special.airy(u)
    if not np.all(np.isfinite(ai)):
        raise Overflow(f"Ai overflows at u = {u}")
    return ai


def airy_prime(u):
    _, aip, _, _ = special.airy(u)
    if not np.all(np.isfinite(aip)):
        raise Overflow(f"Ai' overflows at u = {u}")
    return aip


def sp_parameter(k0: float, d2: complex, d3: complex) -> float:
    """k0 |S''|^3 / |S'''|^2, large where a critical point is isolated on the scale 1/k0."""
    if abs(d3) == 0:
        return math.inf
    return k0 * abs(d2) ** 3 / abs(d3) ** 2


def _thimble_term(wf: Wavefunction, thimble) -> complex:
    cp = thimble.critical_point
    k0 = wf.k0
    d3 = complex(wf.action.d3(cp.lam))
    param = sp_parameter(k0, cp.d2, d3)
    if param < get_settings().sp_min_parameter:
        raise TooCloseToCaustic(f"critical point {cp.lam:.6g}: k0|S''|^3/|S'''|^2 = {param:.3g}")
    f = wf.prefactor.evaluate(cp.lam)
    gauss = cmath.exp(1j * thimble.tangent_angle) * math.sqrt(2.0 * math.pi / (k0 * abs(cp.d2)))
    return (1j / k0) * f * cmath.exp(1j * k0 * cp.value) * gauss


def _branch_term(wf: Wavefunction, contour: BranchContour) -> complex:
    """Leading endpoint term of a contour wrapped around a branch point."""
    k0 = wf.k0
    beta, e = contour.beta, contour.exponent
    d1 = complex(wf.action.d1(beta, check=False))
    p1 = complex(contour.path[1])
    index = next(i for i, f in enumerate(wf.prefactor.factors) if abs(f.location - beta) < 1e-12 * max(1.0, abs(beta)))
    phi = float(wf.prefactor.angles(p1)[index, 0])
    # the remaining factors, read off next to the branch point
    rest = complex(wf.prefactor.evaluate(p1)) / (abs(p1 - beta) ** e * cmath.exp(1j * e * phi))
    direction = cmath.exp(1j * phi)
    endpoint = math.gamma(e + 1.0) / (k0 * abs(d1)) ** (e + 1.0)
    wrap = 1.0 - cmath.exp(2j * math.pi * e)
    value = complex(wf.action.value(beta, check=False))
    return (1j / k0) * wrap * rest * cmath.exp(1j * e * phi) * direction * endpoint * cmath.exp(1j * k0 * value)


def stationary_phase(wavefunction: Wavefunction, decomposition: Decomposition) -> complex:
    """
    Sum of Gaussian approximations over the contributing thimbles (and endpoint terms
    of contributing branch contours).

    Raises:
        TooCloseToCaustic: a contributing critical point is within the caustic boundary layer
    """
    total = 0j
    for thimble, c in decomposition.contributing():
        total += c * _thimble_term(wavefunction, thimble)
    for contour, c in zip(decomposition.branch_contours, decomposition.branch_coefficients):
        if c:
            total += c * _branch_term(wavefunction, contour)
    return total


@dataclass(frozen=True)
class UniformExpansion:
    """S ~ Gamma0 + Gamma1 l + Gamma3 l^3 about Lambda_c, with l = Lambda - Lambda_c."""
    gamma0: float
    gamma1: float
    gamma3: float
    center: complex
    codim: int
    gamma2: float = 0.0
    pole: complex = 0j

    def argument(self, k0: float) -> float:
        a = 3.0 * k0 * abs(self.gamma3)
        return math.copysign(1.0, self.gamma3) * k0 * self.gamma1 * a ** (-1.0 / 3.0)

    def evaluate(self, k0: float) -> complex:
        """Ai and Ai' terms of (i/k0) * integral of (k0/(4 pi i Lambda))^(d/2) exp(i k0 S)."""
        d = self.codim
        a = 3.0 * k0 * abs(self.gamma3)
        sigma = math.copysign(1.0, self.gamma3)
        xi = self.argument(k0)
        i0 = 2.0 * math.pi * a ** (-1.0 / 3.0) * airy(xi)
        i1 = -1j * sigma * 2.0 * math.pi * a ** (-2.0 / 3.0) * airy_prime(xi)
        lc = self.center - self.pole
        const = (1j / k0) * (k0 / (4.0 * math.pi * 1j)) ** (0.5 * d)
        series = lc ** (-0.5 * d) * i0 - 0.5 * d * lc ** (-0.5 * d - 1.0) * i1
        return complex(const * cmath.exp(1j * k0 * self.gamma0) * series)


def _fold_center(series: LaurentSeries, x: Optional[Sequence[float]]):
    gm1 = series.numeric(-1, grade=0, x=x).real
    g3 = series.numeric(3, grade=0, x=x).real
    if abs(g3) < 1e-14:
        raise DegenerateCubic("gamma_3 vanishes; the cubic truncation has no fold")
    lc = complex(-gm1 / (3.0 * g3)) ** 0.25
    return gm1, g3, lc


def uniform_expansion(series: LaurentSeries, x: Optional[Sequence[float]] = None) -> UniformExpansion:
    """Taylor data of the truncated series about the inflection point Lambda_c."""
    if series.order < 3:
        raise DegenerateCubic("series must reach order 3")
    gm1, g3, lc = _fold_center(series, x)
    g = {m: series.numeric(m, grade=0, x=x).real for m in (0, 1, 2)}
    value = gm1 / lc + g[0] + g[1] * lc + g[2] * lc ** 2 + g3 * lc ** 3
    slope = -gm1 / lc ** 2 + g[1] + 2.0 * g[2] * lc + 3.0 * g3 * lc ** 2
    curve = gm1 / lc ** 3 + g[2] + 3.0 * g3 * lc
    cubic = -gm1 / lc ** 4 + g3
    if abs(curve) > 1e-9 * max(1.0, abs(value)):
        logger.debug(f"Quadratic Taylor term {curve:.3g} left at Lambda_c (gamma_2 = {g[2]:.3g})")
    return UniformExpansion(complex(value).real, complex(slope).real, complex(cubic).real,
                            lc + series.pole, series.codim, complex(curve).real, series.pole)


def airy_uniform(series: LaurentSeries, x: Optional[Sequence[float]], k0: float) -> complex:
    """
    Uniform Airy approximation of the point-source field near a fold.

    Args:
        series: Laurent series about the source pole, order >= 3
        x: observation point (defaults to the series point)
        k0: wavenumber

    Returns:
        field value carrying the Ai and Ai' terms
    """
    expansion = uniform_expansion(series, x)
    logger.debug(f"Airy argument {expansion.argument(k0):.4g} at Lambda_c = {expansion.center:.6g}")
    return expansion.evaluate(k0)


@dataclass(frozen=True)
class LambdaMap:
    """lambda = nu (Lambda - center) takes k0 S onto k0 Gamma0 + lambda^3 + zeta1 lambda."""
    nu: float
    center: complex
    zeta1: float
    singular: bool = False


def lambda_map(series: LaurentSeries, x: Optional[Sequence[float]] = None, k0: Optional[float] = None) -> LambdaMap:
    """
    Affine map onto the fold normal form.

    The map is singular on a ghost source, where the residue of the pole vanishes and
    Lambda_c runs into the pole.
    """
    k0 = k0 or series.k0
    gm1 = series.numeric(-1, grade=0, x=x).real
    g3 = series.numeric(3, grade=0, x=x).real
    if abs(g3) < 1e-14:
        raise UnclassifiedCaustic("gamma_3 vanishes; no fold normal form")
    if abs(gm1) < get_settings().residue_floor:
        return LambdaMap(math.inf, series.pole, 0.0, True)
    expansion = uniform_expansion(series, x)
    nu = float(np.cbrt(k0 * expansion.gamma3))
    zeta1 = k0 ** (2.0 / 3.0) * expansion.gamma1 / float(np.cbrt(expansion.gamma3))
    return LambdaMap(nu, expansion.center, zeta1, False)


def cusp_generating_roots(zeta1: float, zeta2: float) -> np.ndarray:
    """Critical points of the cusp generating function: roots of l^3 + zeta2 l + zeta1."""
    return Polynomial([zeta1, zeta2, 0.0, 1.0]).roots()


@dataclass(frozen=True)
class Arrival:
    t: float
    smear: float
    label: str
    coefficient: int


def arrival_times(decomposition: Decomposition, c0: float = 1.0) -> List[Arrival]:
    """One arrival per contributing thimble or branch contour, sorted by time."""
    arrivals = []
    for thimble, c in decomposition.contributing():
        s = complex(thimble.critical_point.value)
        label = f"thimble@{thimble.critical_point.lam:.6g}"
        arrivals.append(Arrival(s.real / c0, s.imag, label, c))
    for contour, c in zip(decomposition.branch_contours, decomposition.branch_coefficients):
        if c:
            s = complex(contour.value)
            arrivals.append(Arrival(s.real / c0, s.imag, f"branch@{contour.beta:.6g}", c))
    return sorted(arrivals, key=lambda a: a.t)


def decay_rate(k0_values: Sequence[float], values: Sequence[complex]) -> np.ndarray:
    """-d ln|G| / dk0 by finite differences."""
    k0_values = np.asarray(k0_values, dtype=float)
    return -np.gradient(np.log(np.abs(np.asarray(values))), k0_values)
