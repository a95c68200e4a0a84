"""
Laurent series of the einbein action about its poles.

Collecting powers of Lambda in the Schrodinger equation for
Psi = Lambda^(-d/2) exp(i k0 sum_m gamma_m Lambda^m) gives, with eps = i/k0 and
w = x - centre,

    (m + w.grad) gamma_m = [m == 1] n^2 + eps Lap gamma_{m-1}
                           - sum_{j+l=m-1, j,l>=1} grad gamma_j . grad gamma_l

with gamma_{-1} = |w|^2/4 and gamma_0 = 0. The operator on the left divides the
monomial w^k by (m + |k|), so every order is solved exactly on polynomials.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import sympy as sp

from ..schemas.objects import ModelKind, RefractionModel
from ..utils.errors import InvalidPoleIndex, NonPolynomialModel, NumericalError, OrderOverflow

logger = logging.getLogger(__name__)

MAX_ORDER = 40
EPS = sp.Symbol("eps")


def _exact(value):
    """Rational for int/Fraction input, Float otherwise; sympy input passes through."""
    if isinstance(value, sp.Basic):
        return value
    if isinstance(value, bool):
        raise TypeError("boolean coefficient")
    if isinstance(value, int):
        return sp.Integer(value)
    if isinstance(value, Fraction):
        return sp.Rational(value.numerator, value.denominator)
    if isinstance(value, float) and value.is_integer():
        return sp.Integer(int(value))
    return sp.Float(value, 20)


def coordinate_symbols(dim: int) -> Tuple[sp.Symbol, ...]:
    names = ("x", "z") if dim == 2 else ("x", "y", "z")
    return tuple(sp.Symbol(n, real=True) for n in names[:dim])


def _solve_order(m: int, rhs: sp.Expr, ws: Sequence[sp.Symbol]) -> sp.Expr:
    """(m + w.grad)^-1 applied to a polynomial in w."""
    rhs = sp.expand(rhs)
    if rhs == 0:
        return sp.Integer(0)
    try:
        poly = sp.Poly(rhs, *ws)
    except sp.PolynomialError as exc:
        raise NonPolynomialModel(f"order {m} source is not polynomial: {exc}") from exc
    out = sp.Integer(0)
    for powers, coeff in poly.terms():
        mono = sp.Integer(1)
        for w, p in zip(ws, powers):
            mono *= w ** p
        out += sp.expand(coeff) / (m + sum(powers)) * mono
    return sp.expand(out)


def _recursion(ws: Sequence[sp.Symbol], n2: sp.Expr, order: int) -> Dict[int, sp.Expr]:
    gammas: Dict[int, sp.Expr] = {-1: sum(w ** 2 for w in ws) / 4, 0: sp.Integer(0)}
    grads: Dict[int, List[sp.Expr]] = {}
    for m in range(1, order + 1):
        rhs = n2 if m == 1 else sp.Integer(0)
        if m >= 2:
            prev = gammas[m - 1]
            rhs += EPS * sum(sp.diff(prev, w, 2) for w in ws)
        for j in range(1, m - 1):
            l = m - 1 - j
            rhs -= sum(a * b for a, b in zip(grads[j], grads[l]))
        gammas[m] = _solve_order(m, rhs, ws)
        grads[m] = [sp.diff(gammas[m], w) for w in ws]
        logger.debug(f"gamma_{m} solved ({len(sp.Add.make_args(gammas[m]))} terms)")
    return gammas


@dataclass(frozen=True)
class LaurentSeries:
    """
    S = sum_{m=-1..M} gamma_m (Lambda - P)^m with gamma_m polynomial in the
    coordinates and in eps = i/k0 (grade = power of eps).
    """
    pole: complex
    codim: int
    coefficients: Dict[int, sp.Expr]
    order: int
    coords: Tuple[sp.Symbol, ...]
    x: Tuple[float, ...]
    k0: float
    exact: bool = True
    meta: Dict[str, str] = field(default_factory=dict)

    def gamma(self, m: int, grade: Optional[int] = None) -> sp.Expr:
        """gamma_m in the coordinate symbols; `grade` selects one power of eps."""
        expr = self.coefficients.get(m, sp.Integer(0))
        if grade is None:
            return expr
        return sp.expand(expr).coeff(EPS, grade)

    def max_grade(self, m: int) -> int:
        expr = sp.expand(self.gamma(m))
        return int(sp.Poly(expr, EPS).degree()) if expr.has(EPS) else 0

    def numeric(self, m: int, grade: Optional[int] = None, k0: Optional[float] = None,
                x: Optional[Sequence[float]] = None) -> complex:
        """Value of gamma_m at the observation point (all grades summed unless `grade`)."""
        point = self.x if x is None else tuple(x)
        subs = {s: v for s, v in zip(self.coords, point)}
        expr = self.gamma(m, grade)
        if grade is None:
            subs[EPS] = sp.I / (self.k0 if k0 is None else k0)
        return complex(sp.N(expr.subs(subs), 17))

    def leading_coefficients(self, x: Optional[Sequence[float]] = None) -> List[float]:
        """k0 -> infinity grade of gamma_{-1}, ..., gamma_M as numbers."""
        return [self.numeric(m, grade=0, x=x).real for m in range(-1, self.order + 1)]

    def to_json(self) -> str:
        rows = []
        for m in sorted(self.coefficients):
            for g in range(0, max(self.max_grade(m), 0) + 1):
                expr = self.gamma(m, g)
                if expr != 0:
                    rows.append({"m": m, "grade": g, "poly": str(expr)})
        return json.dumps({"pole": [self.pole.real, self.pole.imag], "codim": self.codim,
                           "coefficients": rows}, indent=2)


def _check_constraints(gm1: sp.Expr, ws: Sequence[sp.Symbol], codim: int) -> None:
    eik = sp.simplify(-sum(sp.diff(gm1, w) ** 2 for w in ws) + gm1)
    lap = sp.simplify(sum(sp.diff(gm1, w, 2) for w in ws) - sp.Rational(codim, 2))
    if eik != 0 or lap != 0:
        raise NumericalError("residue violates the source constraint equations")


def laurent_point_source(n2poly: Sequence, xp: Sequence[float], x: Sequence[float], k0: float,
                         order: int) -> LaurentSeries:
    """
    Series about Lambda = 0 for a point source and n^2 polynomial in z.

    Args:
        n2poly: ascending coefficients of n^2(z) (int/Fraction/sympy give exact results)
        xp: source point
        x: observation point used for numeric evaluation
        k0: wavenumber
        order: highest gamma index M

    Returns:
        LaurentSeries with coefficients in the coordinate symbols
    """
    if order < 1:
        raise OrderOverflow("order must be >= 1")
    if order > MAX_ORDER:
        raise OrderOverflow(f"order {order} exceeds {MAX_ORDER}")
    dim = len(xp)
    coords = coordinate_symbols(dim)
    ws = [sp.Symbol(f"w{i}", real=True) for i in range(dim)]
    coeffs = [_exact(c) for c in n2poly]
    centre = [_exact(v) for v in xp]
    zc = centre[-1]
    n2 = sp.expand(sum(c * (zc + ws[-1]) ** k for k, c in enumerate(coeffs)))
    gammas = _recursion(ws, n2, order)
    _check_constraints(gammas[-1], ws, dim)
    back = {w: c - v for w, c, v in zip(ws, coords, centre)}
    coefficients = {m: sp.expand(g.subs(back)) for m, g in gammas.items()}
    exact = all(not isinstance(c, sp.Float) for c in coeffs + centre)
    logger.info(f"Laurent series about 0 to order {order} (exact={exact})")
    return LaurentSeries(0j, dim, coefficients, order, coords, tuple(float(v) for v in x), k0, exact)


def laurent_model(model: RefractionModel, xp: Sequence[float], x: Sequence[float], k0: float,
                  order: int) -> LaurentSeries:
    """Point-source series for any z-only polynomial model."""
    if model.kind == ModelKind.LINEAR_X_QUADRATIC_Z:
        raise NonPolynomialModel("n^2 depends on x; the series recursion needs n^2(z)")
    return laurent_point_source(model.z_polynomial(), xp, x, k0, order)


def laurent_ghost_pole(model: RefractionModel, n: int, xp: Sequence[float], x: Sequence[float],
                       k0: float, order: int) -> LaurentSeries:
    """
    Series about the channel pole P = pi n / (2 sqrt(alpha)).

    The horizontal part h^2/(4 Lambda) + n0^2 Lambda and its prefactor are regular at P
    and are expanded exactly; the z part solves the recursion with codimension 1 about
    zeta = (-1)^n z'.
    """
    if model.kind != ModelKind.QUADRATIC_Z:
        raise InvalidPoleIndex("ghost poles belong to the quadratic channel")
    if n == 0:
        raise InvalidPoleIndex("n = 0 is the source pole")
    if model.alpha <= 0:
        raise InvalidPoleIndex("alpha -> 0 sends the ghost poles to infinity")
    if order < 1 or order > MAX_ORDER:
        raise OrderOverflow(f"order {order} outside 1..{MAX_ORDER}")
    dim = len(xp)
    coords = coordinate_symbols(dim)
    alpha = _exact(model.alpha)
    q = sp.sqrt(alpha)
    P = sp.pi * n / (2 * q)
    zp = _exact(xp[-1])
    zeta = (-1) ** n * zp
    w = sp.Symbol("w", real=True)
    # n0^2 is carried by the horizontal part
    n2z = sp.expand(-alpha * (zeta + w) ** 2)
    gz = _recursion([w], n2z, order)
    _check_constraints(gz[-1], [w], 1)
    zsym = coords[-1]
    h2 = sum((c - _exact(v)) ** 2 for c, v in zip(coords[:-1], xp[:-1]))
    n0sq = _exact(model.n0sq)
    horiz = dim - 1
    coefficients: Dict[int, sp.Expr] = {-1: sp.expand(gz[-1].subs(w, zsym - zeta))}
    coefficients[0] = sp.expand(h2 / (4 * P) + n0sq * P)
    for m in range(1, order + 1):
        extra = h2 / 4 * (-1) ** m / P ** (m + 1) + EPS * sp.Rational(horiz, 2) * (-1) ** (m + 1) / (m * P ** m)
        if m == 1:
            extra += n0sq
        coefficients[m] = sp.expand(gz[m].subs(w, zsym - zeta) + extra)
    exact = all(not isinstance(c, sp.Float) for c in (alpha, zp, n0sq))
    logger.info(f"Laurent series about ghost pole n={n} to order {order} (exact={exact})")
    return LaurentSeries(complex(sp.N(P)), 1, coefficients, order, coords,
                         tuple(float(v) for v in x), k0, exact, {"n": str(n)})
