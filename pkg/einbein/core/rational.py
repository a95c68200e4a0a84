"""
Rational approximation of the einbein action.

A truncated Laurent series about Lambda = 0 is turned into S ~ A(Lambda)/B(Lambda)
by a Pade fit of T = Lambda * S, which exposes ghost-pole estimates as the roots of B.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy import linalg

from .action import ChannelTerm, EinbeinAction, Monomial
from .laurent import LaurentSeries
from ..utils.errors import DegenerateDenominator, IllConditioned, MultipleRoot, UnsupportedCombination

logger = logging.getLogger(__name__)

SOLVE_TOL = 1e-10
SPURIOUS_RESIDUE = 1e-8


@dataclass(frozen=True)
class GhostPole:
    beta: complex
    residue: complex
    codim: int = 1
    spurious: bool = False


@dataclass(frozen=True)
class RationalApproximant:
    """S ~ A/B with B monic; B carries the pole at Lambda = 0 as a factor when fitted from a series."""
    numerator: Polynomial
    denominator: Polynomial
    N: int
    M: int
    codims: Dict[complex, int] = field(default_factory=dict)
    fit_residual: float = 0.0

    def __call__(self, lam):
        return self.numerator(lam) / self.denominator(lam)

    @property
    def poles(self) -> np.ndarray:
        return self.denominator.roots() if self.denominator.degree() > 0 else np.array([], dtype=complex)

    def residue(self, beta: complex) -> complex:
        return complex(self.numerator(beta) / self.denominator.deriv()(beta))

    def ghost_poles(self, scale: float = 1.0) -> List[GhostPole]:
        out = []
        for beta in self.poles:
            if abs(beta) < 1e-12 * max(scale, 1.0):
                continue
            res = self.residue(beta)
            spurious = abs(res) < SPURIOUS_RESIDUE * scale
            if spurious:
                logger.warning(f"Spurious Pade pole at {beta:.6g} (residue {abs(res):.2e})")
            out.append(GhostPole(complex(beta), res, self.codims.get(complex(beta), 1), spurious))
        return sorted(out, key=lambda g: abs(g.beta))

    def critical_numerator(self) -> Polynomial:
        """A'B - AB', whose roots are the critical points of A/B."""
        a, b = self.numerator, self.denominator
        return a.deriv() * b - a * b.deriv()

    def taylor(self, count: int) -> np.ndarray:
        """First `count` Taylor coefficients of T = Lambda A/B about 0."""
        if abs(self.denominator.coef[0]) > 0:
            raise DegenerateDenominator("denominator has no factor Lambda")
        q = np.zeros(count, dtype=complex)
        qc = self.denominator.coef[1:]
        q[: min(count, len(qc))] = qc[:count]
        a = np.zeros(count, dtype=complex)
        ac = self.numerator.coef
        a[: min(count, len(ac))] = ac[:count]
        out = np.zeros(count, dtype=complex)
        for k in range(count):
            acc = a[k] - sum(q[j] * out[k - j] for j in range(1, k + 1))
            out[k] = acc / q[0]
        return out

    def to_json(self) -> str:
        return json.dumps({
            "N": self.N,
            "M": self.M,
            "A": [[c.real, c.imag] for c in np.asarray(self.numerator.coef, dtype=complex)],
            "B": [[c.real, c.imag] for c in np.asarray(self.denominator.coef, dtype=complex)],
            "ghost_poles": [
                {"beta": [g.beta.real, g.beta.imag], "residue": [g.residue.real, g.residue.imag],
                 "codim": g.codim, "spurious": g.spurious}
                for g in self.ghost_poles()
            ],
        }, indent=2)


def _pade(coeffs: np.ndarray, L: int, M: int):
    """[L/M] Pade of a Taylor series by a Toeplitz solve."""
    c = np.asarray(coeffs, dtype=complex)
    if M == 0:
        return c[: L + 1].copy(), np.array([1.0 + 0j]), 0.0
    col = c[L + 1: L + M + 1]
    row = np.array([c[L + 1 - j] if L + 1 - j >= 0 else 0.0 for j in range(1, M + 1)], dtype=complex)
    mat = linalg.toeplitz(np.array([c[L + k] if L + k >= 0 else 0.0 for k in range(M)], dtype=complex), row)
    q_tail, *_ = linalg.lstsq(mat, -col)
    resid = np.linalg.norm(mat @ q_tail + col) / max(np.linalg.norm(col), 1e-300)
    q = np.concatenate([[1.0], q_tail])
    p = np.array([sum(q[j] * c[k - j] for j in range(0, min(k, M) + 1)) for k in range(L + 1)])
    return p, q, float(resid)


def fit_rational(series: LaurentSeries, N: int, M: int, x: Optional[Sequence[float]] = None) -> RationalApproximant:
    """
    Generalized Pade fit of the k0 -> infinity grade of a series about Lambda = 0.

    Args:
        series: Laurent series about 0 with order >= N + M
        N: numerator degree of the fitted T = Lambda S is N + 1
        M: number of finite poles besides Lambda = 0
        x: observation point (defaults to the series point)

    Returns:
        RationalApproximant with A = P and B = Lambda Q (monic)
    """
    if abs(series.pole) > 0:
        raise UnsupportedCombination("fit_rational needs a series about Lambda = 0")
    if series.order < N + M:
        raise IllConditioned(f"series order {series.order} < N + M = {N + M}")
    coeffs = np.array(series.leading_coefficients(x)[: N + M + 2], dtype=complex)
    nonzero = [k for k, v in enumerate(coeffs) if abs(v) > 1e-300]
    radius = 1.0
    if len(nonzero) >= 2 and nonzero[-1] > nonzero[0]:
        radius = (abs(coeffs[nonzero[0]]) / abs(coeffs[nonzero[-1]])) ** (1.0 / (nonzero[-1] - nonzero[0]))
        radius = radius if np.isfinite(radius) and radius > 0 else 1.0
    scaled = coeffs * radius ** np.arange(len(coeffs))
    p, q, resid = _pade(scaled, N + 1, M)
    if resid > SOLVE_TOL:
        raise IllConditioned(f"Pade solve residual {resid:.2e}")
    p = p / radius ** np.arange(len(p))
    q = q / radius ** np.arange(len(q))
    q_trim = np.trim_zeros(np.where(np.abs(q) < 1e-14 * np.max(np.abs(q)), 0.0, q), "b")
    lead = q_trim[-1]
    numerator = Polynomial(p / lead)
    denominator = Polynomial(np.concatenate([[0.0], q_trim / lead]))
    if abs(numerator.coef[0]) < 1e-14 * max(np.max(np.abs(numerator.coef)), 1e-300):
        raise DegenerateDenominator("residue at Lambda = 0 vanishes; the fitted pole at 0 is spurious")
    logger.info(f"Fitted [{N + 1}/{M}] approximant, solve residual {resid:.2e}")
    codims = {0j: series.codim}
    return RationalApproximant(numerator, denominator, N, M, codims, resid)


def approximant_from_action(action: EinbeinAction, extra_poles: Sequence[complex] = (),
                            codims: Optional[Dict[complex, int]] = None) -> RationalApproximant:
    """
    Exact A/B for a catalog action without channel term.

    `extra_poles` are cleared from the denominator as well (zero-residue poles that
    survive as prefactor branch points), which puts a double root of A'B - AB' there.
    """
    if any(isinstance(t, ChannelTerm) for t in action.terms):
        raise UnsupportedCombination("channel actions are not rational")
    poles = action.poles()
    locations = [complex(p.location) for p in poles]
    for beta in extra_poles:
        if all(abs(beta - loc) > 1e-14 * max(1.0, abs(beta)) for loc in locations):
            locations.append(complex(beta))
    denominator = Polynomial([1.0 + 0j])
    for loc in locations:
        denominator = denominator * Polynomial([-loc, 1.0])
    numerator = Polynomial([0j])
    for pole in poles:
        rest = Polynomial([1.0 + 0j])
        for loc in locations:
            if abs(loc - pole.location) > 1e-14 * max(1.0, abs(loc)):
                rest = rest * Polynomial([-loc, 1.0])
        numerator = numerator + pole.coefficient * rest
    for term in action.terms:
        if isinstance(term, Monomial):
            numerator = numerator + term.coefficient * Polynomial([0.0] * term.power + [1.0]) * denominator
    degree_a = _degree(numerator)
    return RationalApproximant(numerator, denominator, degree_a - 1, max(denominator.degree() - 1, 0),
                               codims or {}, 0.0)


def _degree(poly: Polynomial) -> int:
    coef = np.asarray(poly.coef, dtype=complex)
    scale = max(float(np.max(np.abs(coef))), 1e-300)
    return int(poly.trim(1e-13 * scale).degree())


def reduced(approximant: RationalApproximant, tol: float = SPURIOUS_RESIDUE) -> RationalApproximant:
    """Cancel the zero-residue poles of A/B against the numerator roots sitting on them."""
    a, b = approximant.numerator, approximant.denominator
    scale = max(1.0, float(np.max(np.abs(a.coef))))
    removed = []
    for beta in approximant.poles:
        if abs(approximant.residue(beta)) < tol * scale:
            factor = Polynomial([-beta, 1.0])
            a, _ = divmod(a, factor)
            b, _ = divmod(b, factor)
            removed.append(complex(beta))
    if not removed:
        return approximant
    logger.debug(f"Cancelled removable poles {[f'{r:.6g}' for r in removed]}")
    codims = {k: v for k, v in approximant.codims.items() if all(abs(k - r) > 1e-12 for r in removed)}
    return RationalApproximant(a, b, approximant.N, approximant.M, codims, approximant.fit_residual)


def critical_points(approximant: RationalApproximant) -> np.ndarray:
    """Roots of A'B - AB' once removable poles are cancelled."""
    numerator = reduced(approximant).critical_numerator()
    degree = _degree(numerator)
    if degree < 1:
        return np.array([], dtype=complex)
    return Polynomial(numerator.coef[: degree + 1]).roots()


def riemann_hurwitz_count(approximant: RationalApproximant, tol: float = 1e-6) -> Dict[str, int]:
    """
    Critical-point count n_C = m_inf + 2 n_P - 1 of a meromorphic action.

    The critical points are counted as roots of A'B - AB' and checked against the
    pole data; removable poles are cancelled first.

    Args:
        approximant: rational action A/B
        tol: relative distance under which two roots count as coalesced

    Returns:
        dict with m_inf, n_P, n_C and the basis size N_basis = m_inf + n_P
    """
    approximant = reduced(approximant)
    poles = approximant.poles
    if len(poles) > 1:
        gaps = np.abs(poles[:, None] - poles[None, :]) + np.eye(len(poles)) * np.inf
        scale = max(1.0, float(np.max(np.abs(poles))))
        if np.min(gaps) < 1e-8 * scale:
            raise MultipleRoot("denominator roots coalesce")
    deg_a = _degree(approximant.numerator)
    deg_b = _degree(approximant.denominator)
    m_inf = deg_a - deg_b
    n_p = deg_b
    roots = critical_points(approximant)
    n_c = len(roots)
    if n_c != m_inf + 2 * n_p - 1:
        raise MultipleRoot(f"{n_c} critical points where m_inf + 2 n_P - 1 = {m_inf + 2 * n_p - 1}")
    if n_c > 1:
        gaps = np.abs(roots[:, None] - roots[None, :]) + np.eye(n_c) * np.inf
        scale = max(1.0, float(np.max(np.abs(roots))))
        i, j = np.unravel_index(np.argmin(gaps), gaps.shape)
        if gaps[i, j] < tol * scale:
            raise MultipleRoot(f"critical points coalesce at {roots[i]:.6g}")
    logger.debug(f"Critical points {np.round(roots, 6).tolist()}")
    return {"m_inf": m_inf, "n_P": n_p, "n_C": n_c, "N_basis": m_inf + n_p}
