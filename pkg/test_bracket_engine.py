"""
Tests for basis brackets, the Poisson tensor and observables built on it
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from bracket_engine import (
    PHASE_DIM,
    Observable,
    PhasePoint,
    bracket_as_observable,
    build_bracket,
    coordinate_observable,
    eval_bracket,
    polynomial_coefficients,
    sample_phase_points,
)
from config import fd_steps
from errors import ArgumentError, CapabilityError, DomainError, NumericError
from fields import FieldConfig, preset_field, preset_mass, preset_metric
from tensor_core import central_difference

X = [coordinate_observable("X", i) for i in range(4)]
U = [coordinate_observable("U", i) for i in range(4)]


@pytest.fixture(scope="module")
def potential_config():
    return FieldConfig(fields=(preset_field("from_potential", {"potential": "polynomial"}),))


@pytest.fixture(scope="module")
def potential_spec(potential_config):
    return build_bracket(potential_config, "flat_EM", charges=[1.5], mass=2.0)


@pytest.fixture(scope="module")
def schwarzschild_spec():
    metric = preset_metric("schwarzschild")
    field_tensor = preset_field("from_potential", {"potential": "polynomial", "potential_params": {"scale": 0.05}},
                                metric=metric)
    return build_bracket(FieldConfig(metric=metric, fields=(field_tensor,)), "curved")


@pytest.fixture(scope="module")
def variable_mass_spec():
    return build_bracket(FieldConfig(mass=preset_mass("gaussian_well")), "variable_mass")


@pytest.fixture(scope="module")
def polynomial_spec():
    rng = np.random.default_rng(8)
    coeffs = polynomial_coefficients(A=rng.normal(size=(4, 4)), L=rng.normal(size=(4, 4, 4)),
                                     Q=rng.normal(size=(4, 4, 4, 4)))
    return build_bracket(FieldConfig(), "custom_polynomial", polynomial=coeffs)


def _observables():
    """A few observables with exact partials built from coordinates"""
    f = X[1] * U[2] + 0.5 * U[0] * U[0]
    g = U[1] * U[3] - 2.0 * X[0] * X[2] + 1.0
    h = X[3] * X[3] * U[1] + U[2]
    return f, g, h


def test_phase_point_validation():
    p = PhasePoint([0, 1, 2, 3], [1, 0, 0, 0])
    assert p.z.shape == (PHASE_DIM,)
    assert_allclose(PhasePoint.from_z(p.z).X, [0, 1, 2, 3])
    with pytest.raises(ArgumentError):
        PhasePoint([0, 1, 2], [1, 0, 0, 0])
    with pytest.raises(NumericError):
        PhasePoint([0, 1, 2, np.nan], [1, 0, 0, 0])
    with pytest.raises(ValueError):
        p.X[0] = 4.0


def test_flat_coordinate_brackets(potential_spec, potential_config):
    p = PhasePoint([0.1, 0.2, -0.3, 0.4], [1.2, 0.3, 0.5, -0.4])
    field_value = potential_config.fields[0].components(p.X)
    eta = np.diag([1.0, -1.0, -1.0, -1.0])
    for m in range(4):
        for n in range(4):
            assert eval_bracket(X[m], X[n], potential_spec, p) == 0.0
            assert eval_bracket(X[m], U[n], potential_spec, p) == pytest.approx(eta[m, n])
            assert eval_bracket(U[m], U[n], potential_spec, p) == pytest.approx(0.75 * field_value[m, n])


def test_spec_views(potential_spec):
    p = PhasePoint([0.1, 0.2, -0.3, 0.4], [1.2, 0.3, 0.5, -0.4])
    j = potential_spec.poisson_tensor(p)
    assert_allclose(j, -j.T)
    assert_allclose(j[4:, 4:], potential_spec.b_uu(p).components)
    assert_allclose(j[:4, 4:], potential_spec.b_xu(p).components)
    assert_allclose(potential_spec.b_xx(p).components, 0.0)
    assert_allclose(potential_spec.charge_over_mass(), [0.75])


def test_bracket_axioms(potential_spec):
    f, g, h = _observables()
    rng = np.random.default_rng(2)
    for _ in range(10):
        p = PhasePoint(rng.normal(size=4), rng.normal(size=4))
        # antisymmetry
        assert eval_bracket(f, g, potential_spec, p) == pytest.approx(-eval_bracket(g, f, potential_spec, p))
        # bilinearity
        lhs = eval_bracket(2.0 * f + h, g, potential_spec, p)
        rhs = 2.0 * eval_bracket(f, g, potential_spec, p) + eval_bracket(h, g, potential_spec, p)
        assert lhs == pytest.approx(rhs)
        # Leibniz
        lhs = eval_bracket(f, g * h, potential_spec, p)
        rhs = eval_bracket(f, g, potential_spec, p) * h.value(p) + g.value(p) * eval_bracket(f, h, potential_spec, p)
        assert lhs == pytest.approx(rhs)


def test_constant_observable_commutes(potential_spec):
    f, _, _ = _observables()
    p = PhasePoint([0.0, 0.1, 0.2, 0.3], [1.0, 0.0, 0.0, 0.0])
    assert eval_bracket(Observable.constant(3.0), f, potential_spec, p) == 0.0


def test_nested_bracket_partials_match_finite_differences(potential_spec):
    nested = bracket_as_observable(U[1], U[2], potential_spec)
    for p in sample_phase_points(potential_spec.config, 10, seed=4):
        numeric = central_difference(lambda z: eval_bracket(U[1], U[2], potential_spec, z), p.z, fd_steps(p.z))
        assert_allclose(nested.grad(p), numeric, atol=1e-6)


@pytest.mark.parametrize("spec_name", ["potential_spec", "schwarzschild_spec", "variable_mass_spec", "polynomial_spec"])
def test_poisson_tensor_gradient_matches_finite_differences(spec_name, request):
    spec = request.getfixturevalue(spec_name)
    for p in sample_phase_points(spec.config, 10, seed=6):
        numeric = central_difference(spec.poisson_tensor, p.z, fd_steps(p.z))
        assert_allclose(spec.poisson_tensor_grad(p), numeric, rtol=1e-5, atol=1e-6)


def test_observable_finite_difference_fallback(potential_spec):
    def fn(z):
        return z[1] * z[5] ** 2

    def grad(z):
        g = np.zeros(PHASE_DIM)
        g[1], g[5] = z[5] ** 2, 2.0 * z[1] * z[5]
        return g

    p = PhasePoint([0.0, 0.7, 0.0, 0.0], [1.1, 0.4, 0.0, 0.0])
    numeric = Observable.from_function(fn)
    exact = Observable.from_function(fn, grad=grad)
    assert_allclose(numeric.grad(p), exact.grad(p), atol=1e-8)
    assert_allclose(numeric.hess(p), exact.hess(p), atol=1e-5)
    assert eval_bracket(numeric, U[2], potential_spec, p) == pytest.approx(
        eval_bracket(exact, U[2], potential_spec, p), abs=1e-8)


def test_missing_partials_raise_capability_error(potential_spec):
    value_only = Observable(lambda z: float(z[0]), name="t")
    p = PhasePoint(np.zeros(4), [1.0, 0.0, 0.0, 0.0])
    with pytest.raises(CapabilityError):
        eval_bracket(value_only, U[0], potential_spec, p)
    first_only = Observable(lambda z: float(z[0]), lambda z: np.eye(PHASE_DIM)[0], name="t")
    with pytest.raises(CapabilityError):
        bracket_as_observable(first_only, U[0], potential_spec)


def test_coordinate_observable_validation():
    with pytest.raises(ArgumentError):
        coordinate_observable("P", 0)
    with pytest.raises(ArgumentError):
        coordinate_observable("X", 4)
    with pytest.raises(ArgumentError):
        X[0] + "one"


def test_variable_mass_with_constant_mass_is_free():
    spec = build_bracket(FieldConfig(mass=preset_mass("constant", {"m": 2.0})), "variable_mass")
    p = PhasePoint([0.1, 0.2, 0.3, 0.4], [1.3, 0.2, -0.5, 0.6])
    assert_allclose(spec.b_uu(p).components, 0.0)
    assert_allclose(spec.b_xu(p).components, np.diag([1.0, -1.0, -1.0, -1.0]) / 2.0)
    assert_allclose(spec.poisson_tensor_grad(p), 0.0)


def test_curved_bracket_without_metric_terms():
    metric = preset_metric("spherical_flat")
    spec = build_bracket(FieldConfig(metric=metric), "curved", include_metric_terms=False)
    p = PhasePoint([0.0, 2.0, 1.0, 0.5], [1.5, 0.3, 0.1, 0.2])
    assert_allclose(spec.b_uu(p).components, 0.0)
    full = build_bracket(FieldConfig(metric=metric), "curved")
    assert np.max(np.abs(full.b_uu(p).components)) > 0.1


@pytest.mark.parametrize(
    "config, kind, kwargs",
    [
        (FieldConfig(), "quantum", {}),
        (FieldConfig(metric=preset_metric("schwarzschild")), "flat_EM", {}),
        (FieldConfig(), "variable_mass", {}),
        (FieldConfig(fields=(preset_field("divergent_B"),)), "flat_EM", {"mass": 0.0}),
        (FieldConfig(fields=(preset_field("divergent_B"),)), "flat_EM", {"charges": [1.0, 2.0]}),
        (FieldConfig(fields=(preset_field("divergent_B"),)), "monopole", {}),
    ],
)
def test_build_bracket_rejects_bad_input(config, kind, kwargs):
    with pytest.raises(ArgumentError):
        build_bracket(config, kind, **kwargs)


def test_sample_phase_points_are_on_shell_and_seeded():
    metric = preset_metric("schwarzschild")
    config = FieldConfig(metric=metric)
    first = sample_phase_points(config, 25, seed=12)
    second = sample_phase_points(config, 25, seed=12)
    for a, b in zip(first, second):
        assert_allclose(a.z, b.z)
        assert a.is_on_shell(metric)
        assert a.U[0] > 0
    box = metric.domain_box()
    assert all(np.all(p.X >= box[:, 0]) and np.all(p.X <= box[:, 1]) for p in first)


def test_sampling_rejects_singular_points():
    config = FieldConfig(fields=(preset_field("coulomb"),))
    tiny_box = np.array([[0.0, 0.0], [-1e-4, 1e-4], [-1e-4, 1e-4], [-1e-4, 1e-4]])
    with pytest.raises(DomainError):
        sample_phase_points(config, 1, seed=0, box=tiny_box)
    with pytest.raises(ArgumentError):
        sample_phase_points(config, 1, seed=0, box=np.array([[1.0, 0.0]] * 4))


def test_polynomial_coefficient_shapes():
    coeffs = polynomial_coefficients(L=np.ones((4, 4, 4)))
    assert coeffs["A"].shape == (4, 4)
    assert coeffs["Q"].shape == (4, 4, 4, 4)
    with pytest.raises(ArgumentError):
        polynomial_coefficients(A=np.zeros((3, 3)))
