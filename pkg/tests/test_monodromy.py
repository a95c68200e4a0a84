import json
import math

import numpy as np
import pytest

from einbein.core.monodromy import (
    NAMED_LOOPS,
    LoopSpec,
    basis_for,
    channel_ghost_basis,
    confirmation_wavefunction,
    constant_basis,
    continued_action,
    coordinate_loop,
    generator_vector,
    ghost_loop,
    linear_z_basis,
    loop_for,
    track_loop,
    transport,
)
from einbein.schemas.objects import ModelKind, RefractionModel, SourceSpec
from einbein.utils.errors import BasisNotClosed, CoarseLoop, UnsupportedCombination

LINEAR_A = [[1, 1, 0, 0], [0, -1, 1, -1], [0, -1, 0, 0], [0, 0, 0, 1]]
LINEAR_COORD = [[1, 0, 0, 1], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]


def test_constant_basis_vectors():
    flat = constant_basis(2)
    np.testing.assert_array_equal(generator_vector(flat, flat.contours[0].word), [1, 0])
    np.testing.assert_array_equal(generator_vector(flat, flat.contours[1].word), [0, -1])
    spatial = constant_basis(3)
    np.testing.assert_array_equal(generator_vector(spatial, spatial.contours[1].word), [2, 1])


def test_nu_loop_in_two_dimensions():
    result = transport(constant_basis(2), NAMED_LOOPS["nu"])
    assert result.matrix.tolist() == [[1, 1], [0, 1]]
    assert result.det == 1


def test_nu_loop_in_three_dimensions_is_an_involution():
    result = transport(constant_basis(3), NAMED_LOOPS["nu"])
    assert result.matrix.tolist() == [[-1, 1], [0, 1]]
    assert result.det == -1
    np.testing.assert_array_equal(result.matrix @ result.matrix, np.eye(2, dtype=int))


def test_linear_profile_sector_loop():
    result = transport(linear_z_basis(), NAMED_LOOPS["a"])
    assert result.matrix.tolist() == LINEAR_A
    assert abs(result.det) == 1
    assert result.labels == ["Gamma_A", "Gamma_B", "Gamma_C", "Gamma_D"]


def test_full_turn_undoes_two_sector_loops():
    basis = linear_z_basis()
    m_a = transport(basis, NAMED_LOOPS["a"]).matrix
    m_full = transport(basis, NAMED_LOOPS["a_full"]).matrix
    np.testing.assert_array_equal(m_a @ m_a @ m_full, np.eye(4, dtype=int))


def test_coordinate_loop_closes_the_group_relation():
    basis = linear_z_basis()
    result = coordinate_loop(basis)
    assert result.matrix.tolist() == LINEAR_COORD
    m_a = transport(basis, NAMED_LOOPS["a"]).matrix
    np.testing.assert_array_equal(result.matrix @ np.linalg.matrix_power(m_a, 3), np.eye(4, dtype=int))


def test_trivial_loop_is_the_identity():
    result = transport(linear_z_basis(), NAMED_LOOPS["trivial"])
    np.testing.assert_array_equal(result.matrix, np.eye(4, dtype=int))


def test_ghost_loop_leaves_the_channel_basis_fixed():
    result = transport(channel_ghost_basis(0.01), ghost_loop(0.01))
    np.testing.assert_array_equal(result.matrix, np.eye(2, dtype=int))


def test_channel_basis_does_not_close_under_nu():
    with pytest.raises(BasisNotClosed):
        transport(channel_ghost_basis(0.01), NAMED_LOOPS["nu"])


def test_too_coarse_a_loop_is_refused():
    with pytest.raises(CoarseLoop):
        transport(linear_z_basis(), NAMED_LOOPS["a"], steps=3)
    with pytest.raises(CoarseLoop):
        transport(constant_basis(2), NAMED_LOOPS["nu"], steps=3)
    assert transport(linear_z_basis(), NAMED_LOOPS["a"], steps=12).matrix.tolist() == LINEAR_A


def test_rotations_are_read_off_the_continued_action():
    assert track_loop(linear_z_basis(), NAMED_LOOPS["a"], 90).wedge_rotation == pytest.approx(2.0 * math.pi / 3.0)
    assert track_loop(linear_z_basis(a=2.0), NAMED_LOOPS["a_full"], 90).wedge_rotation == pytest.approx(
        -4.0 * math.pi / 3.0)
    assert track_loop(constant_basis(2), NAMED_LOOPS["nu"], 90).wedge_rotation == pytest.approx(-2.0 * math.pi)
    coord = track_loop(linear_z_basis(), NAMED_LOOPS["coord"], 90)
    assert coord.wedge_rotation == pytest.approx(0.0)
    assert coord.pole_rotations[0j] == pytest.approx(2.0 * math.pi)


def test_index_loop_does_not_move_the_cubic_wedges():
    basis = linear_z_basis()
    result = transport(basis, NAMED_LOOPS["nu"])
    np.testing.assert_array_equal(result.matrix, np.eye(4, dtype=int))
    assert result.track.wedge_rotation == pytest.approx(0.0)
    assert continued_action(basis, NAMED_LOOPS["nu"], math.pi).leading_coeff == pytest.approx(-1.0 / 12.0)


def test_open_path_is_not_a_loop():
    with pytest.raises(BasisNotClosed):
        transport(constant_basis(2), LoopSpec("half", "n0sq", 0.5))


def test_linear_basis_needs_a_slope():
    with pytest.raises(UnsupportedCombination):
        linear_z_basis(a=0.0)


def test_to_json():
    payload = json.loads(transport(constant_basis(2), NAMED_LOOPS["nu"]).to_json())
    assert payload["matrix"] == [[1, 1], [0, 1]]
    assert payload["basis"] == ["Gamma_A", "Gamma_D"]
    assert payload["loop"]["turns"] == 1
    assert payload["wedge_rotation_deg"] == pytest.approx(-360.0)
    assert payload["confirmation_residual"] is None


def test_lookups(linear_model, channel_model, point_source):
    assert basis_for(linear_model, point_source).name == "linear_z"
    assert basis_for(channel_model, point_source).name == "channel_ghost"
    assert loop_for("ghost", channel_model).pole == pytest.approx(math.pi / 0.2)
    with pytest.raises(UnsupportedCombination):
        loop_for("spiral", linear_model)
    poly = RefractionModel(kind=ModelKind.POLYNOMIAL_Z, poly=[1.0, -1.0, 0.0, 0.1])
    with pytest.raises(UnsupportedCombination):
        basis_for(poly, point_source)


@pytest.mark.slow
@pytest.mark.parametrize("dim", [2, 3])
def test_nu_loop_confirmed_by_integration(constant_model, dim):
    source = SourceSpec(location=[0.0] * dim)
    wf = confirmation_wavefunction(constant_model, source)
    result = transport(constant_basis(dim), NAMED_LOOPS["nu"], wavefunction=wf)
    assert result.confirmation_residual < 1e-6


@pytest.mark.slow
def test_linear_loops_confirmed_by_integration(linear_model, point_source):
    wf = confirmation_wavefunction(linear_model, point_source)
    basis = linear_z_basis()
    assert transport(basis, NAMED_LOOPS["a"], wavefunction=wf).confirmation_residual < 1e-6
    assert coordinate_loop(basis, wavefunction=wf).confirmation_residual < 1e-6
