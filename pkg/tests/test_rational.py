import json
import math

import numpy as np
import pytest
from numpy.polynomial import Polynomial

from einbein.core.action import build_action
from einbein.core.laurent import laurent_model
from einbein.core.rational import (
    RationalApproximant,
    approximant_from_action,
    critical_points,
    fit_rational,
    reduced,
    riemann_hurwitz_count,
)
from einbein.schemas.objects import SourceSpec
from einbein.utils.errors import DegenerateDenominator, IllConditioned, MultipleRoot, UnsupportedCombination

SPACING = math.pi / (2.0 * math.sqrt(0.01))


@pytest.fixture
def channel_series(channel_model):
    return laurent_model(channel_model, (0.0, 0.3), (0.5, 0.7), k0=1.0, order=12)


def test_channel_fit_finds_first_ghost_pole(channel_series):
    approximant = fit_rational(channel_series, 6, 6)
    ghosts = [g for g in approximant.ghost_poles() if not g.spurious and g.beta.real > 0]
    first = min(ghosts, key=lambda g: abs(g.beta - SPACING))
    assert abs(first.beta - SPACING) / SPACING < 1e-3
    assert abs(first.residue - 0.25) < 1e-2
    assert approximant.fit_residual < 1e-10


def test_channel_fit_reproduces_taylor_coefficients(channel_series):
    approximant = fit_rational(channel_series, 6, 6)
    expected = channel_series.leading_coefficients()[:8]
    np.testing.assert_allclose(approximant.taylor(8).real, expected, rtol=1e-8, atol=1e-12)


def test_fit_needs_enough_orders(channel_model):
    short = laurent_model(channel_model, (0.0, 0.3), (0.5, 0.7), k0=1.0, order=4)
    with pytest.raises(IllConditioned):
        fit_rational(short, 3, 3)


def test_fit_at_the_source_has_no_pole(channel_model):
    series = laurent_model(channel_model, (0.0, 0.3), (0.0, 0.3), k0=1.0, order=6)
    with pytest.raises(DegenerateDenominator):
        fit_rational(series, 3, 3)


def test_linear_action_is_exactly_rational(linear_model, point_source):
    action, _ = build_action(linear_model, point_source, (1.0, 0.0), k0=1.0)
    approximant = approximant_from_action(action)
    lam = 0.7 - 0.2j
    assert approximant(lam) == pytest.approx(action.value(lam))
    assert riemann_hurwitz_count(approximant) == {"m_inf": 3, "n_P": 1, "n_C": 4, "N_basis": 4}


def test_critical_numerator_roots_are_the_linear_critical_points(linear_model, point_source):
    action, _ = build_action(linear_model, point_source, (1.0, 0.0), k0=1.0)
    roots = np.sort(approximant_from_action(action).critical_numerator().roots().real)
    inner, outer = math.sqrt(2.0 - math.sqrt(3.0)), math.sqrt(2.0 + math.sqrt(3.0))
    np.testing.assert_allclose(roots, [-outer, -inner, inner, outer], rtol=1e-10)


def test_count_is_taken_from_distinct_critical_points(linear_model, point_source):
    action, _ = build_action(linear_model, point_source, (1.5, 0.2), k0=1.0)
    approximant = approximant_from_action(action)
    roots = critical_points(approximant)
    assert len(roots) == 4
    np.testing.assert_allclose(np.abs([action.d1(r) for r in roots]), 0.0, atol=1e-9)
    assert riemann_hurwitz_count(approximant)["n_C"] == 4


def test_coalesced_critical_points_are_refused(linear_model, point_source):
    action, _ = build_action(linear_model, point_source, (2.0, 0.0), k0=1.0)
    with pytest.raises(MultipleRoot):
        riemann_hurwitz_count(approximant_from_action(action))


def test_removable_pole_does_not_change_the_count(linear_model, point_source):
    action, _ = build_action(linear_model, point_source, (1.0, 0.0), k0=1.0)
    padded = approximant_from_action(action, extra_poles=[0.5 + 0.5j])
    assert padded.denominator.degree() == 2
    assert reduced(padded).denominator.degree() == 1
    assert riemann_hurwitz_count(padded) == {"m_inf": 3, "n_P": 1, "n_C": 4, "N_basis": 4}


def test_denominator_roots_must_be_simple():
    approximant = RationalApproximant(Polynomial([1.0, 0.0, 1.0]), Polynomial([0.0, -1e-10, 1.0]), 1, 1)
    with pytest.raises(MultipleRoot):
        riemann_hurwitz_count(approximant)


def test_constant_action_count(constant_model, point_source):
    action, _ = build_action(constant_model, point_source, (1.0, 0.0), k0=1.0)
    counts = riemann_hurwitz_count(approximant_from_action(action))
    assert counts == {"m_inf": 1, "n_P": 1, "n_C": 2, "N_basis": 2}


def test_phase_sheet_count(constant_model, sheet_source):
    action, _ = build_action(constant_model, sheet_source, (0.3, 1.0), k0=1.0)
    counts = riemann_hurwitz_count(approximant_from_action(action))
    assert counts["n_P"] == 2
    assert counts["n_C"] == 4


def test_channel_action_is_not_rational(channel_model):
    action, _ = build_action(channel_model, SourceSpec(location=[0.0, 0.3]), (0.5, 0.7), k0=1.0)
    with pytest.raises(UnsupportedCombination):
        approximant_from_action(action)


def test_taylor_needs_a_pole_at_zero():
    approximant = RationalApproximant(Polynomial([1.0]), Polynomial([1.0, 1.0]), 0, 0)
    with pytest.raises(DegenerateDenominator):
        approximant.taylor(3)


def test_to_json(channel_series):
    payload = json.loads(fit_rational(channel_series, 6, 6).to_json())
    assert payload["N"] == 6 and payload["M"] == 6
    assert len(payload["B"]) == 8
