import cmath
import math

import numpy as np
import pytest
from scipy.special import hankel1

from einbein.core.action import (
    build_action,
    build_wavefunction,
    eval_action,
    eval_d1,
    eval_d2,
    eval_d3,
    eval_grad_x,
    eval_psi,
    hamilton_jacobi_residual,
    schrodinger_residual,
)
from einbein.core.quadrature import oracle_real_axis
from einbein.schemas.objects import ModelKind, RefractionModel, SourceKind, SourceSpec
from einbein.utils.errors import (
    BranchPointEvaluation,
    DimensionMismatch,
    PoleEvaluation,
    UnsupportedCombination,
)

CATALOG = [
    RefractionModel(kind=ModelKind.CONSTANT, n0sq=1.3),
    RefractionModel(kind=ModelKind.LINEAR_Z, n0sq=1.0, a=0.7),
    RefractionModel(kind=ModelKind.QUADRATIC_Z, n0sq=1.0, alpha=0.05),
    RefractionModel(kind=ModelKind.LINEAR_X_QUADRATIC_Z, n0sq=1.0, alpha=0.05, beta=0.3),
]


@pytest.mark.parametrize("model", CATALOG, ids=lambda m: m.kind.value)
@pytest.mark.parametrize("lam", [0.7 + 0.3j, 2.1 - 0.4j, -1.3 + 0.9j])
def test_hamilton_jacobi_holds_for_catalog(model, lam):
    source = SourceSpec(location=[0.1, -0.2])
    action, _ = build_action(model, source, (0.9, 0.6), k0=3.0)
    assert abs(hamilton_jacobi_residual(action, lam)) < 1e-10


def test_hamilton_jacobi_holds_in_3d():
    model = RefractionModel(kind=ModelKind.LINEAR_Z, n0sq=1.0, a=0.5)
    source = SourceSpec(location=[0.0, 0.0, 0.0])
    action, _ = build_action(model, source, (0.4, -0.3, 0.8), k0=2.0)
    assert abs(hamilton_jacobi_residual(action, 0.9 + 0.2j)) < 1e-10


def test_hamilton_jacobi_holds_for_phase_sheet(constant_model, sheet_source):
    action, _ = build_action(constant_model, sheet_source, (0.4, 1.1), k0=2.0)
    assert abs(hamilton_jacobi_residual(action, 0.6 - 0.3j)) < 1e-10


SCHRODINGER_CASES = [(m, SourceSpec(location=[0.0, 0.0])) for m in CATALOG] + [
    (RefractionModel(kind=ModelKind.CONSTANT, n0sq=1.0),
     SourceSpec(kind=SourceKind.PHASE_SHEET, location=[0.0, 0.0], mu=1.0)),
]


@pytest.mark.parametrize("model,source", SCHRODINGER_CASES,
                         ids=[m.kind.value for m in CATALOG] + ["phase_sheet"])
def test_schrodinger_residual_is_small(model, source):
    # lower half plane keeps Lambda off the upward prefactor cuts and the real-axis poles
    rng = np.random.default_rng(20240611)
    wf = build_wavefunction(model, source, (0.5, 0.5), k0=5.0)
    for _ in range(100):
        lam = complex(rng.uniform(-1.5, 1.5), rng.uniform(-1.2, -0.4))
        x = tuple(float(v) for v in rng.uniform(-0.8, 0.8, size=2))
        residual = schrodinger_residual(wf, lam, x, h=1e-4, h_lam=1e-5)
        assert abs(residual) < 1e-6, (lam, x)


def test_constant_action_value(constant_model, point_source):
    action, _ = build_action(constant_model, point_source, (0.6, 0.8), k0=1.0)
    lam = 0.5 + 0.5j
    assert action.value(lam) == pytest.approx(1.0 / (4.0 * lam) + lam)
    assert action.infinity_order == 1


def test_linear_action_has_cubic_growth(linear_model, point_source):
    action, _ = build_action(linear_model, point_source, (1.0, 0.0), k0=1.0)
    assert action.infinity_order == 3
    assert action.leading_coeff == pytest.approx(-1.0 / 12.0)
    lam = 1.2 - 0.1j
    expected = 1.0 / (4.0 * lam) + lam - lam ** 3 / 12.0
    assert action.value(lam) == pytest.approx(expected)


def test_channel_pole_residues(channel_model):
    source = SourceSpec(location=[0.0, 0.3])
    action, _ = build_action(channel_model, source, (0.5, 0.7), k0=1.0)
    chan = action.channel
    assert chan.spacing == pytest.approx(math.pi / 0.2)
    assert chan.residue(1) == pytest.approx(0.25)
    assert chan.residue(2) == pytest.approx(0.04)
    poles = action.poles(2.5 * chan.spacing)
    at_zero = next(p for p in poles if abs(p.location) < 1e-12)
    assert at_zero.coefficient == pytest.approx(0.25 * 0.5 ** 2 + 0.04)


def test_gradient_matches_finite_difference(linear_model, point_source):
    lam = 0.9 + 0.4j
    action, _ = build_action(linear_model, point_source, (1.0, 0.5), k0=1.0)
    grad = eval_grad_x(action, lam)
    h = 1e-6
    for axis in range(2):
        plus = [1.0, 0.5]
        minus = [1.0, 0.5]
        plus[axis] += h
        minus[axis] -= h
        sp = build_action(linear_model, point_source, plus, k0=1.0)[0].value(lam)
        sm = build_action(linear_model, point_source, minus, k0=1.0)[0].value(lam)
        assert grad[axis] == pytest.approx((sp - sm) / (2.0 * h), rel=1e-7)


def test_prefactor_sheets(constant_model, point_source, point_source_3d):
    lam = 0.3 + 0.7j
    _, flat = build_action(constant_model, point_source, (1.0, 0.0), k0=2.0)
    assert flat.evaluate(lam, 1) == pytest.approx(flat.evaluate(lam, 0))
    _, spatial = build_action(constant_model, point_source_3d, (1.0, 0.0, 0.0), k0=2.0)
    assert spatial.evaluate(lam, 1) == pytest.approx(-spatial.evaluate(lam, 0))
    assert spatial.evaluate(lam, 2) == pytest.approx(spatial.evaluate(lam, 0))


def test_prefactor_cut_points_upward(constant_model, point_source):
    _, prefactor = build_action(constant_model, point_source, (1.0, 0.0), k0=2.0)
    left = prefactor.angles(-1e-3 + 1.0j)[0, 0]
    right = prefactor.angles(1e-3 + 1.0j)[0, 0]
    assert left == pytest.approx(-1.5 * math.pi, abs=1e-2)
    assert right == pytest.approx(0.5 * math.pi, abs=1e-2)
    assert prefactor.angles(-1.0)[0, 0] == pytest.approx(-math.pi)


def test_pole_evaluation_is_refused(constant_model, point_source):
    action, _ = build_action(constant_model, point_source, (1.0, 0.0), k0=1.0)
    with pytest.raises(PoleEvaluation):
        action.value(0.0)


def test_branch_point_evaluation_is_refused(constant_model, point_source):
    _, prefactor = build_action(constant_model, point_source, (1.0, 0.0), k0=1.0)
    with pytest.raises(BranchPointEvaluation):
        prefactor.evaluate(0.0)


def test_bad_inputs(constant_model, linear_model, point_source, sheet_source):
    with pytest.raises(UnsupportedCombination):
        build_action(constant_model, point_source, (1.0, 0.0), k0=0.0)
    with pytest.raises(DimensionMismatch):
        build_action(constant_model, point_source, (1.0, 0.0, 0.5), k0=1.0)
    with pytest.raises(UnsupportedCombination):
        build_action(linear_model, sheet_source, (1.0, 0.0), k0=1.0)
    poly = RefractionModel(kind=ModelKind.POLYNOMIAL_Z, poly=[1.0, -1.0, 0.0, 0.1])
    with pytest.raises(UnsupportedCombination):
        build_action(poly, point_source, (1.0, 0.0), k0=1.0)


def test_oracle_reproduces_2d_hankel(constant_model, point_source):
    k0, r = 5.0, math.hypot(0.6, 0.8)
    wf = build_wavefunction(constant_model, point_source, (0.6, 0.8), k0)
    expected = 0.25j * hankel1(0, k0 * r)
    assert abs(oracle_real_axis(wf) - expected) < 1e-6 * abs(expected)


def test_oracle_reproduces_3d_spherical_wave(point_source_3d):
    model = RefractionModel(kind=ModelKind.CONSTANT, n0sq=1.0)
    x = (0.6, 0.3, 0.8)
    k0, r = 5.0, float(np.linalg.norm(x))
    wf = build_wavefunction(model, point_source_3d, x, k0)
    expected = cmath.exp(1j * k0 * r) / (4.0 * math.pi * r)
    assert abs(oracle_real_axis(wf) - expected) < 1e-6 * abs(expected)


def test_evaluators_agree_with_the_closed_form(linear_model, point_source):
    wf = build_wavefunction(linear_model, point_source, (1.0, 0.5), 4.0)
    lam, h = 0.8 + 0.4j, 1e-5
    lin = 1.0 - 0.5 * 0.5
    expected = 1.25 / (4.0 * lam) + lin * lam - lam ** 3 / 12.0
    assert eval_action(wf.action, lam) == pytest.approx(expected, rel=1e-14)
    for fn, deriv in ((eval_action, eval_d1), (eval_d1, eval_d2), (eval_d2, eval_d3)):
        fd = (fn(wf.action, lam + h) - fn(wf.action, lam - h)) / (2.0 * h)
        assert abs(fd - deriv(wf.action, lam)) < 1e-7 * max(1.0, abs(deriv(wf.action, lam)))
    psi = eval_psi(wf, lam)
    assert psi == pytest.approx(wf.prefactor.evaluate(lam) * cmath.exp(4.0j * expected), rel=1e-12)
