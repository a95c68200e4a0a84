import math

import numpy as np
import pytest
from scipy import special
from scipy.special import hankel1

from einbein.core.asymptotics import (
    airy,
    airy_prime,
    airy_uniform,
    arrival_times,
    cusp_generating_roots,
    decay_rate,
    lambda_map,
    sp_parameter,
    stationary_phase,
    uniform_expansion,
)
from einbein.core.action import build_wavefunction
from einbein.core.critical import critical_points_at
from einbein.core.laurent import laurent_model
from einbein.core.quadrature import decompose_at, field_at, oracle_real_axis
from einbein.core.thimbles import phase_shift, trace_thimble
from einbein.utils.errors import DegenerateCubic, UnclassifiedCaustic


def test_airy_values():
    assert airy(0.0) == pytest.approx(0.3550280538878172, rel=1e-14)
    u = np.linspace(-3.0, 2.0, 11)
    _, _, bi, bip = special.airy(u)
    np.testing.assert_allclose(airy(u) * bip - airy_prime(u) * bi, 1.0 / math.pi, rtol=1e-12)


def test_sp_parameter():
    assert sp_parameter(10.0, 2.0, 0.0) == math.inf
    assert sp_parameter(10.0, 2.0, 4.0) == pytest.approx(5.0)


def test_fold_centre_of_the_linear_profile(linear_model):
    series = laurent_model(linear_model, (0.0, 0.0), (2.0, 0.0), k0=20.0, order=3)
    expansion = uniform_expansion(series)
    assert expansion.center.real == pytest.approx(math.sqrt(2.0))
    assert expansion.gamma1 == pytest.approx(0.0, abs=1e-12)
    assert expansion.gamma2 == pytest.approx(0.0, abs=1e-12)
    assert expansion.gamma3 == pytest.approx(-1.0 / 3.0)


def test_airy_argument_changes_sign_across_the_fold(linear_model):
    inside = laurent_model(linear_model, (0.0, 0.0), (1.8, 0.0), k0=20.0, order=3)
    outside = laurent_model(linear_model, (0.0, 0.0), (2.2, 0.0), k0=20.0, order=3)
    assert uniform_expansion(inside).argument(20.0) < 0
    assert uniform_expansion(outside).argument(20.0) > 0


def test_uniform_expansion_needs_a_cubic(constant_model):
    series = laurent_model(constant_model, (0.0, 0.0), (1.0, 0.0), k0=5.0, order=3)
    with pytest.raises(DegenerateCubic):
        uniform_expansion(series)
    with pytest.raises(UnclassifiedCaustic):
        lambda_map(series)


def test_lambda_map_is_singular_on_a_ghost_source(linear_model):
    series = laurent_model(linear_model, (0.0, 0.0), (0.0, 0.0), k0=5.0, order=3)
    assert lambda_map(series).singular
    regular = lambda_map(laurent_model(linear_model, (0.0, 0.0), (1.5, 0.0), k0=5.0, order=3))
    assert not regular.singular
    assert regular.center.real == pytest.approx(math.sqrt(1.5))


def test_cusp_generating_roots():
    roots = np.sort(cusp_generating_roots(0.0, -1.0).real)
    np.testing.assert_allclose(roots, [-1.0, 0.0, 1.0], atol=1e-12)
    assert np.sum(np.abs(cusp_generating_roots(1.0, 1.0).imag) > 1e-9) == 2


def test_decay_rate_of_an_evanescent_field():
    ks = np.linspace(5.0, 15.0, 21)
    rate = decay_rate(ks, 3.0 * np.exp(-0.7 * ks + 1j * ks))
    np.testing.assert_allclose(rate, 0.7, rtol=1e-10)


@pytest.mark.slow
def test_stationary_phase_tends_to_the_exact_field(constant_model, point_source):
    k0 = 50.0
    wf, decomposition = decompose_at(constant_model, point_source, (2.0, 0.0), k0)
    approx = stationary_phase(wf, decomposition)
    exact = 0.25j * hankel1(0, 2.0 * k0)
    assert abs(approx - exact) < 1e-2 * abs(exact)


@pytest.mark.slow
def test_airy_uniform_on_the_fold(linear_model, point_source):
    k0 = 20.0
    x = (2.0, 0.0)
    series = laurent_model(linear_model, (0.0, 0.0), x, k0=k0, order=3)
    oracle = oracle_real_axis(build_wavefunction(linear_model, point_source, x, k0))
    assert abs(airy_uniform(series, x, k0) - oracle) < 5e-2 * abs(oracle)


@pytest.mark.slow
@pytest.mark.parametrize("t", [-1.5, -0.75, 0.0, 0.75, 1.5])
def test_airy_uniform_across_the_fold_band(linear_model, point_source, t):
    # on z = 0 the Airy argument is k0^(2/3) (r/2 - 1): one unit of it is 2 k0^(-2/3) in x
    k0 = 50.0
    x = (2.0 + 2.0 * t * k0 ** (-2.0 / 3.0), 0.0)
    series = laurent_model(linear_model, (0.0, 0.0), x, k0=k0, order=3)
    assert uniform_expansion(series).argument(k0) == pytest.approx(t, abs=1e-9)
    oracle = oracle_real_axis(build_wavefunction(linear_model, point_source, x, k0))
    assert abs(airy_uniform(series, x, k0) - oracle) < 5e-2 * abs(oracle)


@pytest.mark.slow
def test_arrivals_on_the_cusp_axis(constant_model, sheet_source):
    _, decomposition = decompose_at(constant_model, sheet_source, (0.0, 1.0), 10.0)
    arrivals = arrival_times(decomposition)
    assert [a.t for a in arrivals] == pytest.approx([1.0, 1.25], abs=1e-8)
    assert arrivals[0].label.startswith("thimble")
    assert arrivals[1].label.startswith("branch")


def test_illuminated_pair_is_a_quarter_turn_apart(linear_model, point_source):
    action, points = critical_points_at(linear_model, point_source, (1.0, 0.0))
    inner, outer = [p for p in points if p.is_real and p.lam.real > 0]
    shift = phase_shift(trace_thimble(action, inner), trace_thimble(action, outer))
    assert abs(abs(shift) - 0.5 * math.pi) < 1e-2


@pytest.mark.slow
def test_shadow_decay_follows_the_complex_ray(linear_model, point_source):
    x = (3.0, 0.0)
    _, decomposition = decompose_at(linear_model, point_source, x, 20.0)
    ((thimble, _),) = decomposition.contributing()
    expected = thimble.critical_point.value.imag
    ks = np.linspace(20.0, 80.0, 7)
    values = [field_at(linear_model, point_source, x, k).value for k in ks]
    # |G| ~ k0^(-1/2) exp(-k0 Im S) in two dimensions
    rate = decay_rate(ks, values)[1:-1] - 0.5 / ks[1:-1]
    np.testing.assert_allclose(rate, expected, rtol=2e-2)
