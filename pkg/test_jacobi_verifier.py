"""
Tests for Jacobi residuals and the closed forms they reduce to
"""

import numpy as np
import pytest
import sympy as sp
from numpy.testing import assert_allclose

from bracket_engine import PhasePoint, build_bracket, coordinate_observable, sample_phase_points
from errors import ArgumentError
from fields import FieldConfig, from_potential, preset_field, preset_mass, preset_metric, preset_potential
from jacobi_verifier import (
    basis_jacobi_residual,
    christoffel,
    closed_form_fourth_identity,
    curved_fourth_identity_split,
    jacobi_identity,
    kretschmann,
    maxwell_residual,
    nested_residual,
    quadratic_exclusion_prediction,
    quadratic_force_exclusion,
    raise_all,
    riemann,
    riemann_cyclic_sum,
    verify_jacobi,
)

X = [coordinate_observable("X", i) for i in range(4)]
U = [coordinate_observable("U", i) for i in range(4)]
ETA = np.diag([1.0, -1.0, -1.0, -1.0])
POTENTIALS = ["uniform_B", "polynomial", "plane_wave", "coulomb", "zero"]
METRICS = ["minkowski", "spherical_flat", "schwarzschild", "polynomial_perturbation"]


def _flat_spec(field_tensor, charge=1.0, mass=1.0):
    return build_bracket(FieldConfig(fields=(field_tensor,)), "flat_EM", charges=[charge], mass=mass)


def _curved_spec(metric_name, field_tensor=None):
    metric = preset_metric(metric_name)
    fields = (field_tensor,) if field_tensor is not None else ()
    return build_bracket(FieldConfig(metric=metric, fields=fields), "curved")


# ---------------------------------------------------------------------------
# Flat space: Jacobi <=> homogeneous Maxwell
# ---------------------------------------------------------------------------

def test_free_particle_has_no_residual():
    report = verify_jacobi(build_bracket(FieldConfig(), "flat_EM"), count=20, seed=1)
    assert report.passed
    assert all(v == 0.0 for v in report.max_residuals.values())


@pytest.mark.parametrize("potential", POTENTIALS)
def test_potential_fields_satisfy_all_identities(potential):
    spec = _flat_spec(from_potential(preset_potential(potential)), charge=0.8, mass=1.3)
    report = verify_jacobi(spec, count=100, seed=2024, tolerance=1e-8)
    assert report.passed, report.max_residuals
    assert report.cross_validation <= 1e-5


def test_divergent_field_fails_fourth_identity_only():
    report = verify_jacobi(_flat_spec(preset_field("divergent_B", {"k": 1.0})), count=20, seed=3)
    assert report.failing() == [4]
    assert report.max_residuals[4] == pytest.approx(3.0)
    assert report.cross_validation <= 1e-8
    assert not report.to_dict()["identities"]["4"]["pass"]


def test_fourth_identity_equals_scaled_maxwell_residual():
    field_tensor = preset_field("divergent_B", {"k": 0.5})
    spec = _flat_spec(field_tensor, charge=2.0, mass=4.0)
    for p in sample_phase_points(spec.config, 10, seed=4):
        nested = basis_jacobi_residual(spec, p, 4).components
        t = maxwell_residual(field_tensor, p.X).components
        assert_allclose(nested, 0.5 * raise_all(t, ETA), atol=1e-8)
        assert abs(nested[1, 2, 3]) == pytest.approx(0.75)


def test_maxwell_residual_of_divergent_field():
    t = maxwell_residual(preset_field("divergent_B", {"k": 2.0}), [0.0, 0.3, 0.1, -0.2]).components
    assert abs(t[1, 2, 3]) == pytest.approx(6.0)
    # totally antisymmetric in three spatial slots
    assert np.count_nonzero(np.abs(t) > 1e-12) == 6
    assert_allclose(t[0], 0.0)


def test_maxwell_residual_vanishes_for_closed_fields():
    t = maxwell_residual(from_potential(preset_potential("polynomial", {"seed": 21})), [0.3, -0.2, 0.7, 0.1])
    assert np.max(np.abs(t.components)) <= 1e-9
    t = maxwell_residual(preset_field("monopole_B"), [0.0, 1.0, 1.0, 1.0])
    assert np.max(np.abs(t.components)) <= 1e-8
    t = maxwell_residual(preset_field("uniform_EB", {"E": [1.0, 0.0, 0.0]}), np.zeros(4))
    assert_allclose(t.components, 0.0)


def test_monopole_field_is_closed_at_sampled_points():
    monopole = preset_field("monopole_B")
    points = sample_phase_points(FieldConfig(fields=(monopole,)), 100, seed=23)
    for p in points:
        assert np.linalg.norm(p.X[1:]) > 1e-3
        scale = 1.0 + np.max(np.abs(monopole.deriv(p.X)))
        assert np.max(np.abs(maxwell_residual(monopole, p.X).components)) <= 1e-12 * scale
    report = verify_jacobi(_flat_spec(monopole), points)
    assert report.passed, report.max_residuals


def test_maxwell_residual_matches_symbolic_oracle():
    rng = np.random.default_rng(17)
    constant, linear = rng.normal(size=(4, 4)), rng.normal(size=(4, 4, 4))
    field_tensor = preset_field("custom_polynomial", {"constant": constant.tolist(), "linear": linear.tolist()})

    x = sp.symbols("x0:4", real=True)
    f_up = sp.Matrix(4, 4, lambda m, n: constant[m, n] + sum(linear[m, n, l] * x[l] for l in range(4)))
    f_up = (f_up - f_up.T) / 2
    eta = sp.diag(1, -1, -1, -1)
    f_low = eta * f_up * eta
    point = [0.2, -0.5, 0.4, 0.1]
    subs = dict(zip(x, point))
    expected = np.zeros((4, 4, 4))
    for m in range(4):
        for n in range(4):
            for l in range(4):
                expr = sp.diff(f_low[m, n], x[l]) + sp.diff(f_low[n, l], x[m]) + sp.diff(f_low[l, m], x[n])
                expected[m, n, l] = float(expr.subs(subs))
    assert_allclose(maxwell_residual(field_tensor, point).components, expected, atol=1e-12)


def test_jacobi_identity_for_general_observables():
    f = X[1] * U[2] + 0.5 * U[0] * U[0]
    g = U[1] * U[3] - 2.0 * X[0] * X[2]
    h = X[3] * X[3] * U[1] + U[2]
    closed = _flat_spec(from_potential(preset_potential("polynomial")))
    for p in sample_phase_points(closed.config, 5, seed=8):
        assert abs(jacobi_identity(f, g, h, closed, p)) <= 1e-8

    broken = _flat_spec(preset_field("divergent_B"))
    p = PhasePoint([0.0, 0.2, 0.3, 0.4], [1.2, 0.3, 0.4, 0.5])
    c = nested_residual(broken, p)
    # [f,[g,h]] + cyc = -([[f,g],h] + cyc)
    assert jacobi_identity(U[1], U[2], U[3], broken, p) == pytest.approx(-c[5, 6, 7])
    assert abs(c[5, 6, 7]) == pytest.approx(3.0)


# ---------------------------------------------------------------------------
# Curved space
# ---------------------------------------------------------------------------

def test_christoffel_values():
    gamma = christoffel(preset_metric("spherical_flat"), [0.0, 2.0, np.pi / 2, 0.0]).components
    assert gamma[1, 2, 2] == pytest.approx(-2.0)
    assert gamma[2, 1, 2] == pytest.approx(0.5)
    gamma = christoffel(preset_metric("schwarzschild", {"rs": 1.0}), [0.0, 4.0, np.pi / 2, 0.0]).components
    assert gamma[1, 0, 0] == pytest.approx(3.0 / 128.0)
    assert_allclose(gamma, gamma.transpose(0, 2, 1))


def test_christoffel_matches_symbolic_oracle():
    eps = 0.05
    x = sp.symbols("x0:4", real=True)
    eta = sp.diag(1, -1, -1, -1)
    g = sp.Matrix(4, 4, lambda i, j: eta[i, j] + eps * x[i] * x[j])
    point = [0.3, -0.6, 0.2, 0.8]
    subs = dict(zip(x, point))
    g_num = np.array(g.subs(subs), dtype=float)
    dg_num = np.array([[[float(sp.diff(g[a, b], x[c]).subs(subs)) for c in range(4)] for b in range(4)]
                       for a in range(4)])
    g_inv = np.linalg.inv(g_num)
    expected = 0.5 * np.einsum("ma,asl->msl", g_inv,
                               dg_num + dg_num.transpose(0, 2, 1) - np.einsum("sla->asl", dg_num))
    actual = christoffel(preset_metric("polynomial_perturbation", {"eps": eps}), point).components
    assert_allclose(actual, expected, atol=1e-12)


@pytest.mark.parametrize("metric_name", METRICS)
def test_riemann_cyclic_identity(metric_name):
    metric = preset_metric(metric_name)
    config = FieldConfig(metric=metric)
    for p in sample_phase_points(config, 10, seed=13):
        r = riemann(metric, p.X).lowered.components
        assert np.max(np.abs(riemann_cyclic_sum(r))) <= 1e-10
        assert_allclose(r, -r.transpose(1, 0, 2, 3), atol=1e-10)
        assert_allclose(r, -r.transpose(0, 1, 3, 2), atol=1e-10)


def test_flat_space_in_spherical_coordinates_has_no_curvature():
    metric = preset_metric("spherical_flat")
    for p in sample_phase_points(FieldConfig(metric=metric), 10, seed=14):
        assert np.max(np.abs(riemann(metric, p.X).mixed.components)) <= 1e-6


@pytest.mark.parametrize("r", [3.0, 4.0, 7.5])
def test_schwarzschild_kretschmann_scalar(r):
    rs = 1.0
    value = kretschmann(preset_metric("schwarzschild", {"rs": rs}), [0.0, r, 1.0, 0.2])
    assert value == pytest.approx(12.0 * rs**2 / r**6, abs=1e-8)


def test_curved_split_for_potential_field():
    metric = preset_metric("schwarzschild")
    field_tensor = preset_field("from_potential", {"potential": "polynomial", "potential_params": {"scale": 0.05}},
                                metric=metric)
    spec = build_bracket(FieldConfig(metric=metric, fields=(field_tensor,)), "curved")
    for p in sample_phase_points(spec.config, 10, seed=15):
        split = curved_fourth_identity_split(spec, p)
        summary = split.summary()
        assert summary["maxwell_part_max"] <= 1e-6
        assert summary["riemann_part_max"] <= 1e-6
        assert_allclose(split.total, basis_jacobi_residual(spec, p, 4).components, atol=1e-5)


def test_curved_split_for_non_closed_field():
    spec = _curved_spec("schwarzschild", preset_field("divergent_B", {"k": 1.0}))
    worst = 0.0
    for p in sample_phase_points(spec.config, 10, seed=16):
        split = curved_fourth_identity_split(spec, p)
        nested = basis_jacobi_residual(spec, p, 4).components
        assert_allclose(split.maxwell_part.components, nested, atol=1e-5)
        assert_allclose(closed_form_fourth_identity(spec, p), nested, atol=1e-5)
        worst = max(worst, split.summary()["maxwell_part_max"])
    assert worst > 1e-3


@pytest.mark.parametrize("metric_name", ["spherical_flat", "schwarzschild", "polynomial_perturbation"])
def test_curved_brackets_without_fields_pass(metric_name):
    report = verify_jacobi(_curved_spec(metric_name), count=30, seed=18, tolerance=1e-8)
    assert report.passed, report.max_residuals
    assert report.cross_validation <= 1e-5


def test_metric_terms_are_required_in_curved_space():
    metric = preset_metric("schwarzschild")
    spec = build_bracket(FieldConfig(metric=metric), "curved", include_metric_terms=False)
    report = verify_jacobi(spec, count=10, seed=19, cross_validate=False)
    assert not report.passed


# ---------------------------------------------------------------------------
# Other kinds
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("mass", ["linear_gradient", "gaussian_well"])
def test_variable_mass_bracket_passes(mass):
    spec = build_bracket(FieldConfig(mass=preset_mass(mass)), "variable_mass")
    report = verify_jacobi(spec, count=30, seed=20)
    assert report.passed, report.max_residuals
    assert report.cross_validation <= 1e-8


def test_single_linear_entry_breaks_third_identity():
    c = 0.5
    coeff = np.zeros((4, 4, 4))
    coeff[0, 1, 1] = c
    residual = quadratic_force_exclusion(coeff).components
    assert residual[1, 0, 1] == pytest.approx(-c / 2)
    assert residual[1, 1, 0] == pytest.approx(c / 2)
    assert np.count_nonzero(np.abs(residual) > 1e-12) == 2


def test_linear_bracket_residual_is_permuted_coefficient():
    rng = np.random.default_rng(22)
    for _ in range(10):
        coeff = rng.normal(size=(4, 4, 4))
        p = PhasePoint(rng.normal(size=4), rng.normal(size=4))
        assert_allclose(quadratic_force_exclusion(coeff, p).components, quadratic_exclusion_prediction(coeff),
                        atol=1e-8)


def test_symmetric_pair_coefficient_gives_antisymmetrized_permutation():
    rng = np.random.default_rng(24)
    coeff = rng.normal(size=(4, 4, 4))
    coeff = 0.5 * (coeff + coeff.transpose(0, 2, 1))
    # residual[m, n, l] = -(L^{nlm} - L^{lnm}) / 2
    expected = -0.5 * (np.einsum("nlm->mnl", coeff) - np.einsum("lnm->mnl", coeff))
    residual = quadratic_force_exclusion(coeff).components
    assert_allclose(residual, expected, atol=1e-8)
    assert_allclose(quadratic_exclusion_prediction(coeff), expected, atol=1e-12)
    assert np.max(np.abs(residual - np.einsum("nlm->mnl", coeff))) > 0.1
    assert_allclose(quadratic_force_exclusion(np.zeros((4, 4, 4))).components, 0.0)


# ---------------------------------------------------------------------------
# Report and errors
# ---------------------------------------------------------------------------

def test_report_is_deterministic_and_parallel_safe():
    spec = _flat_spec(preset_field("divergent_B"))
    serial = verify_jacobi(spec, count=16, seed=5)
    again = verify_jacobi(spec, count=16, seed=5)
    threaded = verify_jacobi(spec, count=16, seed=5, n_jobs=2)
    assert serial.to_dict() == again.to_dict()
    assert serial.max_residuals == threaded.max_residuals
    data = serial.to_dict()
    assert sorted(data["identities"]) == ["1", "2", "3", "4"]
    assert data["seed"] == 5 and data["sample_count"] == 16


def test_verifier_errors():
    spec = _flat_spec(preset_field("divergent_B"))
    p = PhasePoint(np.zeros(4), [1.0, 0.0, 0.0, 0.0])
    with pytest.raises(ArgumentError):
        basis_jacobi_residual(spec, p, 5)
    with pytest.raises(ArgumentError):
        verify_jacobi(spec, points=[])
    with pytest.raises(ArgumentError):
        curved_fourth_identity_split(spec, p)
    polynomial = build_bracket(FieldConfig(), "custom_polynomial")
    with pytest.raises(ArgumentError):
        closed_form_fourth_identity(polynomial, p)
