import math

import numpy as np
from numpy.polynomial import Polynomial
import pytest

from einbein.core.action import build_action
from einbein.core.critical import (
    ILLUMINATED,
    ON_CAUSTIC,
    SHADOW,
    astroid_caustic,
    caustic_locus,
    classify_point,
    critical_points_at,
    eikonal_residual,
    find_critical_points,
    ghost_source_locus,
    is_cusp_point,
    linear_z_caustic,
    nearby_pole_cusp,
    nearby_pole_model,
    relevant_real_count,
)
from einbein.schemas.objects import GridSpec, ModelKind, SourceSpec
from einbein.utils.errors import NonPositiveParameters, RegionContainsPole


def test_linear_illuminated_point(linear_model, point_source):
    action, points = critical_points_at(linear_model, point_source, (1.0, 0.0))
    assert len(points) == 4
    assert all(cp.is_real for cp in points)
    positive = sorted(cp.lam.real for cp in points if cp.lam.real > 0)
    assert positive == pytest.approx([math.sqrt(2.0 - math.sqrt(3.0)), math.sqrt(2.0 + math.sqrt(3.0))])
    assert relevant_real_count(points) == 2
    for cp in points:
        assert abs(action.d1(cp.lam)) < 1e-12
        assert eikonal_residual(action, cp) < 1e-10


def test_linear_shadow_point(linear_model, point_source):
    _, points = critical_points_at(linear_model, point_source, (3.0, 0.0))
    assert len(points) == 4
    assert relevant_real_count(points) == 0


def test_classification_across_the_fold(linear_model, point_source):
    assert classify_point(linear_model, point_source, (1.0, 0.0), 2).zone == ILLUMINATED
    assert classify_point(linear_model, point_source, (1.99, 0.0), 2).zone == ILLUMINATED
    assert classify_point(linear_model, point_source, (2.01, 0.0), 2).zone == SHADOW
    on = classify_point(linear_model, point_source, (2.0, 0.0), 2)
    assert on.zone == ON_CAUSTIC
    assert on.caustic_type == "fold"


def test_linear_caustic_closed_form(linear_model, point_source):
    residual = linear_z_caustic(linear_model, point_source)
    assert residual(2.0, 0.0) == pytest.approx(0.0)
    assert residual(2.0 * math.sqrt(1.0 - 0.1), 0.1) == pytest.approx(0.0, abs=1e-12)
    assert residual(1.0, 0.0) > 0


def test_caustic_locus_refines_onto_the_fold(linear_model, point_source):
    grid = GridSpec(x_range=(1.5, 2.5), z_range=(-0.1, 0.1), resolution=(4, 3))
    result = caustic_locus(linear_model, point_source, grid)
    assert len(result.classifications) == 12
    assert len(result.crossings) == 3
    for x, z, kind in result.crossings:
        assert kind == "fold"
        assert abs(result.closed_form(x, z)) < 1e-6
    assert result.closed_form_name == "linear-z fold"


def test_cusp_points_of_the_phase_sheet(constant_model, sheet_source):
    assert is_cusp_point(constant_model, sheet_source, (0.0, 2.0))
    assert is_cusp_point(constant_model, sheet_source, (0.0, -2.0))
    assert not is_cusp_point(constant_model, sheet_source, (0.0, 1.0))
    residual = astroid_caustic(constant_model, sheet_source)
    assert residual(0.0, 2.0) == pytest.approx(0.0, abs=1e-12)
    assert residual(2.0, 0.0) == pytest.approx(0.0, abs=1e-12)


def test_phase_sheet_caustic_map_detects_the_astroid(constant_model, sheet_source):
    grid = GridSpec(x_range=(-1.5, 1.5), z_range=(-2.5, 2.5), resolution=(4, 6))
    result = caustic_locus(constant_model, sheet_source, grid)
    residual = astroid_caustic(constant_model, sheet_source)
    assert len(result.crossings) == 8
    for x, z, kind in result.crossings:
        assert kind == "fold"
        assert abs(residual(x, z)) < 1e-6
    assert [g.description for g in result.ghost_lines] == ["x = 0"]
    assert len(result.cusp_points) == 2
    for found, expected in zip(result.cusp_points, [(0.0, -2.0), (0.0, 2.0)]):
        assert found == pytest.approx(expected, abs=1e-6)
    assert result.expected_cusp_points == [(0.0, -2.0), (0.0, 2.0)]


def test_linear_profile_has_no_cusps(linear_model, point_source):
    grid = GridSpec(x_range=(1.5, 2.5), z_range=(-0.1, 0.1), resolution=(4, 3))
    result = caustic_locus(linear_model, point_source, grid)
    assert result.cusp_points == []
    assert result.ghost_lines == []


def test_phase_sheet_on_the_ghost_line(constant_model, sheet_source):
    """At x = x0 the residue at mu vanishes and only the pair +-z/2 survives."""
    _, points = critical_points_at(constant_model, sheet_source, (0.0, 1.0))
    assert sorted(cp.lam.real for cp in points) == pytest.approx([-0.5, 0.5])


def test_phase_sheet_inside_the_cusp(constant_model, sheet_source):
    _, points = critical_points_at(constant_model, sheet_source, (0.2, 1.0))
    assert relevant_real_count(points) == 3


def test_ghost_source_loci(constant_model, sheet_source, channel_model):
    loci = ghost_source_locus(None, constant_model, sheet_source)
    assert [l.is_true_source for l in loci] == [True, False]
    assert loci[1].residue_at((0.0, 1.0)) == 0.0
    assert loci[1].pole == 1.0

    channel = ghost_source_locus(None, channel_model, SourceSpec(location=[0.0, 0.3]))
    ghosts = [l for l in channel if not l.is_true_source]
    assert len(ghosts) == 8
    first = next(l for l in ghosts if abs(l.pole.real - math.pi / 0.2) < 1e-9)
    assert first.residue_at((0.5, -0.3)) == pytest.approx(0.0)


def test_channel_critical_points(channel_model):
    action, _ = build_action(channel_model, SourceSpec(location=[0.0, 0.3]), (0.5, 0.7), k0=1.0)
    spacing = action.channel.spacing
    region = (-0.4 * spacing, 2.6 * spacing, -1.4 * spacing, 1.4 * spacing)
    points = find_critical_points(action, region, seeds_per_cell=16)
    assert points
    for cp in points:
        assert abs(action.d1(cp.lam)) < 1e-8
    assert any(cp.is_real and cp.lam.real > 0 for cp in points)


def test_region_edge_on_a_pole_is_refused(channel_model):
    action, _ = build_action(channel_model, SourceSpec(location=[0.0, 0.3]), (0.5, 0.7), k0=1.0)
    spacing = action.channel.spacing
    with pytest.raises(RegionContainsPole):
        find_critical_points(action, (0.1, spacing, -1.0, 1.0))


def test_nearby_pole_cusp_curve():
    cusp = nearby_pole_cusp(0j, 0.5, 4.0)
    assert cusp.extent == pytest.approx(2.0)
    curve = cusp.curve(50)
    assert np.max(np.abs([cusp.residual(r1, r2) for r1, r2 in curve])) < 1e-12
    model, source = nearby_pole_model(0.5, 4.0)
    assert model.kind == ModelKind.CONSTANT
    assert source.mu == 0.5


@pytest.mark.parametrize("delta, b", [(0.5, 4.0), (1.0, 1.0), (0.3, 2.0)])
def test_critical_points_merge_on_the_pole_at_the_predicted_cusp(delta, b):
    cusp = nearby_pole_cusp(0j, delta, b)
    model, source = nearby_pole_model(delta, b)
    _, inside = critical_points_at(model, source, (1e-4, cusp.extent * (1.0 - 5e-3)))
    _, outside = critical_points_at(model, source, (1e-4, cusp.extent * (1.0 + 5e-3)))
    merging = [cp.lam.real for cp in inside if cp.is_real and cp.lam.real > 0]
    assert len(merging) == 3
    assert max(abs(lam - delta) for lam in merging) < 1e-2 * delta
    assert relevant_real_count(outside) == 1
    assert cusp.residual(1e-4, cusp.extent * (1.0 - 5e-3)) < 0


def test_quartic_roots_off_the_ghost_line(constant_model, sheet_source):
    x, z = 0.3, 1.0
    quartic = Polynomial([-z * z, 2.0 * z * z, 4.0 - x * x - z * z, -8.0, 4.0])
    expected = sorted(quartic.roots(), key=lambda r: (round(r.real, 9), r.imag))
    _, points = critical_points_at(constant_model, sheet_source, (x, z))
    found = sorted((cp.lam for cp in points), key=lambda r: (round(r.real, 9), r.imag))
    assert len(found) == 4
    np.testing.assert_allclose(found, expected, atol=1e-10)


def test_nearby_pole_cusp_parameters():
    with pytest.raises(NonPositiveParameters):
        nearby_pole_cusp(0j, 0.0, 1.0)
    with pytest.raises(NonPositiveParameters):
        nearby_pole_model(0.5, -1.0)
