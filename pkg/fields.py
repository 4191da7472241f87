"""
Spacetime-dependent inputs: metrics, field tensors, 4-potentials and
scalar mass fields, each with values and partial derivatives at a point.

Analytic presets are written once in sympy, differentiated symbolically
and compiled with lambdify. Derivative arrays always carry the
derivative index last:

    metric.deriv(x)[b, s, a]      = d_a g_{bs}
    metric.deriv2(x)[b, s, a, c]  = d_a d_c g_{bs}
    field.deriv(x)[m, n, l]       = d_l F^{mn}
    potential.deriv(x)[m, n]      = d_n A^m
    mass.grad(x)[a]               = d_a m
"""

import itertools
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
import sympy as sp

from config import DIM, MINKOWSKI, SINGULAR_RADIUS, fd_steps
from errors import ArgumentError, DomainError, NumericError
from tensor_core import UP, MetricValue, Tensor, central_difference

logger = logging.getLogger(__name__)

COORDS = sp.symbols("x0:4", real=True)

METRIC_PRESETS = ("minkowski", "spherical_flat", "schwarzschild", "polynomial_perturbation")
FIELD_PRESETS = ("uniform_EB", "coulomb", "monopole_B", "divergent_B", "from_potential", "custom_polynomial")
POTENTIAL_PRESETS = ("zero", "uniform_B", "polynomial", "plane_wave", "coulomb")
MASS_PRESETS = ("constant", "linear_gradient", "gaussian_well")

_METRIC_DEFAULTS = {
    "minkowski": {},
    "spherical_flat": {},
    "schwarzschild": {"rs": 1.0},
    "polynomial_perturbation": {"eps": 0.05},
}
_FIELD_DEFAULTS = {
    "uniform_EB": {"E": [0.0, 0.0, 0.0], "B": [0.0, 0.0, 0.0]},
    "coulomb": {"Q": 1.0},
    "monopole_B": {"g": 1.0},
    "divergent_B": {"k": 1.0},
    "from_potential": {"potential": "zero", "potential_params": {}},
    "custom_polynomial": {"constant": np.zeros((DIM, DIM)).tolist(), "linear": np.zeros((DIM,) * 3).tolist()},
}
_POTENTIAL_DEFAULTS = {
    "zero": {},
    "uniform_B": {"B": 1.0},
    "polynomial": {"seed": 7, "degree": 2, "scale": 0.3},
    "plane_wave": {"amplitude": 0.2, "wavevector": [1.0, 1.0, 0.0, 0.0], "polarization": [0.0, 0.0, 1.0, 0.0]},
    "coulomb": {"Q": 1.0},
}
_MASS_DEFAULTS = {
    "constant": {"m": 1.0},
    "linear_gradient": {"m0": 2.0, "k": [0.0, 0.1, 0.0, 0.0]},
    "gaussian_well": {"m0": 1.0, "depth": 0.3, "width": 1.0, "center": [0.0, 0.0, 0.0]},
}

DEFAULT_BOX = np.array([[-2.0, 2.0]] * DIM)
_METRIC_BOXES = {
    "minkowski": DEFAULT_BOX,
    "spherical_flat": np.array([[-2.0, 2.0], [0.5, 5.0], [0.3, np.pi - 0.3], [-np.pi, np.pi]]),
    "schwarzschild": np.array([[-2.0, 2.0], [3.0, 10.0], [0.3, np.pi - 0.3], [-np.pi, np.pi]]),
    "polynomial_perturbation": np.array([[-1.0, 1.0]] * DIM),
}


def _merge_params(name, params, defaults):
    params = dict(params or {})
    unknown = set(params) - set(defaults)
    if unknown:
        raise ArgumentError(f"unknown parameter(s) for preset {name!r}: {sorted(unknown)}")
    merged = dict(defaults)
    merged.update(params)
    return merged


def _freeze(value):
    """Hashable copy of a parameter value for the compile cache"""
    if isinstance(value, dict):
        return tuple(sorted((k, _freeze(v)) for k, v in value.items()))
    if isinstance(value, (list, tuple, np.ndarray)):
        return tuple(_freeze(v) for v in value)
    return value


def _as_point(x):
    x = np.asarray(x, dtype=float)
    if x.shape != (DIM,):
        raise ArgumentError(f"spacetime point must have 4 components, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NumericError("spacetime point is not finite")
    return x


def with_derivative(expr_array):
    """Differentiate a sympy array, appending the derivative index last"""
    d = sp.derive_by_array(expr_array, COORDS)
    rank = d.rank()
    return sp.permutedims(d, tuple(range(1, rank)) + (0,))


def compile_array(expr_array):
    """lambdify a sympy array into x -> ndarray of the same shape"""
    expr_array = sp.Array(expr_array)
    shape = expr_array.shape
    fn = sp.lambdify(COORDS, expr_array.tolist(), modules="numpy")

    def evaluate(x):
        return np.array(fn(*x), dtype=float).reshape(shape)

    return evaluate


def compile_scalar(expr):
    fn = sp.lambdify(COORDS, expr, modules="numpy")

    def evaluate(x):
        return float(fn(*x))

    return evaluate


def _no_domain(x):
    return None


def _spatial_radius_check(x, radius=SINGULAR_RADIUS, what="field"):
    r = float(np.linalg.norm(x[1:]))
    if r < radius:
        raise DomainError(f"{what} is singular at the spatial origin (r = {r:.3e} < {radius})")


# ---------------------------------------------------------------------------
# Metric
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MetricField:
    """Metric g_{mu nu}(X) with analytic first and second derivatives"""

    name: str
    params: dict
    value_fn: Callable
    deriv_fn: Callable
    deriv2_fn: Callable
    domain_fn: Callable = _no_domain
    box: np.ndarray = field(default_factory=lambda: DEFAULT_BOX.copy())
    constant: bool = False

    def check_domain(self, x):
        self.domain_fn(_as_point(x))

    def components(self, x):
        x = _as_point(x)
        self.domain_fn(x)
        return self.value_fn(x)

    def eval(self, x):
        return MetricValue.from_components(self.components(x))

    def deriv(self, x):
        x = _as_point(x)
        self.domain_fn(x)
        d = self.deriv_fn(x)
        return 0.5 * (d + d.transpose(1, 0, 2))

    def deriv2(self, x):
        x = _as_point(x)
        self.domain_fn(x)
        return self.deriv2_fn(x)

    def inverse_deriv(self, x):
        """d_l g^{mn} = -g^{ma} d_l g_{ab} g^{bn}"""
        g_inv = self.eval(x).contra
        return -np.einsum("ma,abl,bn->mnl", g_inv, self.deriv(x), g_inv)

    def domain_box(self):
        return np.array(self.box, dtype=float)


def _metric_expression(name, p):
    t, r, th, ph = COORDS
    if name == "minkowski":
        return sp.diag(1, -1, -1, -1)
    if name == "spherical_flat":
        return sp.diag(1, -1, -r**2, -r**2 * sp.sin(th) ** 2)
    if name == "schwarzschild":
        rs = sp.Float(p["rs"])
        f = 1 - rs / r
        return sp.diag(f, -1 / f, -r**2, -r**2 * sp.sin(th) ** 2)
    if name == "polynomial_perturbation":
        eps = sp.Float(p["eps"])
        eta = sp.diag(1, -1, -1, -1)
        return sp.Matrix(DIM, DIM, lambda i, j: eta[i, j] + eps * COORDS[i] * COORDS[j])
    raise ArgumentError(f"unknown metric preset {name!r}; expected one of {METRIC_PRESETS}")


@lru_cache(maxsize=None)
def _compiled_metric(name, frozen_params):
    g = sp.Array(_metric_expression(name, dict(frozen_params)))
    dg = with_derivative(g)
    d2g = with_derivative(dg)
    return compile_array(g), compile_array(dg), compile_array(d2g)


def _metric_domain(name, p):
    if name == "spherical_flat":
        def check(x):
            if x[1] <= SINGULAR_RADIUS:
                raise DomainError(f"spherical coordinates are singular at r = {x[1]:.3e}")
            if abs(np.sin(x[2])) <= SINGULAR_RADIUS:
                raise DomainError(f"spherical coordinates are singular on the polar axis (theta = {x[2]:.3e})")
        return check
    if name == "schwarzschild":
        rs = p["rs"]

        def check(x):
            if x[1] - rs <= SINGULAR_RADIUS:
                raise DomainError(f"r = {x[1]:.6f} is at or inside the horizon rs = {rs}")
            if abs(np.sin(x[2])) <= SINGULAR_RADIUS:
                raise DomainError(f"Schwarzschild coordinates are singular on the polar axis (theta = {x[2]:.3e})")
        return check
    return _no_domain


def preset_metric(name, params=None):
    """Build one of the analytic metric presets"""
    if name not in _METRIC_DEFAULTS:
        raise ArgumentError(f"unknown metric preset {name!r}; expected one of {METRIC_PRESETS}")
    p = _merge_params(name, params, _METRIC_DEFAULTS[name])
    if name == "schwarzschild" and not float(p["rs"]) > 0:
        raise ArgumentError(f"schwarzschild radius must be positive, got {p['rs']}")

    g_fn, dg_fn, d2g_fn = _compiled_metric(name, _freeze(p))
    box = _METRIC_BOXES[name].copy()
    if name == "schwarzschild":
        box[1] = [3.0 * p["rs"], 10.0 * p["rs"]]
    logger.info(f"Built metric preset {name} {p}")
    return MetricField(
        name=name,
        params=p,
        value_fn=g_fn,
        deriv_fn=dg_fn,
        deriv2_fn=d2g_fn,
        domain_fn=_metric_domain(name, p),
        box=box,
        constant=(name == "minkowski"),
    )


def minkowski():
    return preset_metric("minkowski")


# ---------------------------------------------------------------------------
# Potentials
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PotentialField:
    """4-potential A^mu(X) with first and second derivatives"""

    name: str
    params: dict
    value_fn: Callable
    deriv_fn: Callable
    deriv2_fn: Callable
    domain_fn: Callable = _no_domain

    def check_domain(self, x):
        self.domain_fn(_as_point(x))

    def components(self, x):
        x = _as_point(x)
        self.domain_fn(x)
        return self.value_fn(x)

    def eval(self, x):
        return Tensor(self.components(x), UP)

    def deriv(self, x):
        x = _as_point(x)
        self.domain_fn(x)
        return self.deriv_fn(x)

    def deriv2(self, x):
        x = _as_point(x)
        self.domain_fn(x)
        return self.deriv2_fn(x)


def _monomials(degree):
    terms = []
    for k in range(degree + 1):
        for combo in itertools.combinations_with_replacement(COORDS, k):
            terms.append(sp.Mul(*combo))
    return terms


def _potential_expression(name, p):
    t, x, y, z = COORDS
    if name == "zero":
        return [sp.Integer(0)] * DIM
    if name == "uniform_B":
        # A = (0, 0, B x, 0) gives F^{12} = -B, i.e. a field along +z
        return [0, 0, sp.Float(p["B"]) * x, 0]
    if name == "polynomial":
        degree = int(p["degree"])
        if degree < 1:
            raise ArgumentError(f"polynomial potential needs degree >= 1, got {degree}")
        rng = np.random.default_rng(int(p["seed"]))
        terms = _monomials(degree)
        coeffs = rng.normal(scale=float(p["scale"]), size=(DIM, len(terms)))
        return [sum(sp.Float(c) * m for c, m in zip(coeffs[mu], terms)) for mu in range(DIM)]
    if name == "plane_wave":
        k = [sp.Float(v) for v in p["wavevector"]]
        pol = [sp.Float(v) for v in p["polarization"]]
        if len(k) != DIM or len(pol) != DIM:
            raise ArgumentError("plane_wave wavevector and polarization need 4 components")
        phase = sum(float(MINKOWSKI[mu, mu]) * k[mu] * COORDS[mu] for mu in range(DIM))
        return [sp.Float(p["amplitude"]) * pol[mu] * sp.sin(phase) for mu in range(DIM)]
    if name == "coulomb":
        r = sp.sqrt(x**2 + y**2 + z**2)
        return [sp.Float(p["Q"]) / r, 0, 0, 0]
    raise ArgumentError(f"unknown potential preset {name!r}; expected one of {POTENTIAL_PRESETS}")


@lru_cache(maxsize=None)
def _compiled_potential(name, frozen_params):
    a = sp.Array(_potential_expression(name, dict(frozen_params)))
    da = with_derivative(a)
    d2a = with_derivative(da)
    return compile_array(a), compile_array(da), compile_array(d2a)


def preset_potential(name, params=None):
    if name not in _POTENTIAL_DEFAULTS:
        raise ArgumentError(f"unknown potential preset {name!r}; expected one of {POTENTIAL_PRESETS}")
    p = _merge_params(name, params, _POTENTIAL_DEFAULTS[name])
    a_fn, da_fn, d2a_fn = _compiled_potential(name, _freeze(p))
    domain = (lambda x: _spatial_radius_check(x, what="coulomb potential")) if name == "coulomb" else _no_domain
    return PotentialField(name=name, params=p, value_fn=a_fn, deriv_fn=da_fn, deriv2_fn=d2a_fn, domain_fn=domain)


# ---------------------------------------------------------------------------
# Field tensors
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FieldTensorField:
    """Antisymmetric contravariant F^{mu nu}(X) for one field species"""

    name: str
    params: dict
    value_fn: Callable
    deriv_fn: Callable
    label: str = "em"
    domain_fn: Callable = _no_domain
    constant: bool = False

    def check_domain(self, x):
        self.domain_fn(_as_point(x))

    def components(self, x):
        x = _as_point(x)
        self.domain_fn(x)
        f = np.asarray(self.value_fn(x), dtype=float)
        return 0.5 * (f - f.T)

    def eval(self, x):
        return Tensor(self.components(x), (UP, UP), "antisymmetric")

    def deriv(self, x):
        x = _as_point(x)
        self.domain_fn(x)
        d = np.asarray(self.deriv_fn(x), dtype=float)
        return 0.5 * (d - d.transpose(1, 0, 2))


def _magnetic(b):
    """F^{ij} = -eps_{ijk} B^k"""
    f = [[sp.Integer(0)] * DIM for _ in range(DIM)]
    for i, j, k in ((1, 2, 3), (2, 3, 1), (3, 1, 2)):
        f[i][j] = -b[k - 1]
        f[j][i] = b[k - 1]
    return f


def _electric(e):
    """F^{0i} = -E^i"""
    f = [[sp.Integer(0)] * DIM for _ in range(DIM)]
    for i in range(1, DIM):
        f[0][i] = -e[i - 1]
        f[i][0] = e[i - 1]
    return f


def _field_expression(name, p):
    t, x, y, z = COORDS
    r = sp.sqrt(x**2 + y**2 + z**2)
    if name == "uniform_EB":
        e = sp.Matrix(_electric([sp.Float(v) for v in p["E"]]))
        b = sp.Matrix(_magnetic([sp.Float(v) for v in p["B"]]))
        return e + b
    if name == "coulomb":
        q = sp.Float(p["Q"])
        return sp.Matrix(_electric([q * c / r**3 for c in (x, y, z)]))
    if name == "monopole_B":
        g = sp.Float(p["g"])
        return sp.Matrix(_magnetic([g * c / r**3 for c in (x, y, z)]))
    if name == "divergent_B":
        k = sp.Float(p["k"])
        return sp.Matrix(_magnetic([k * x, k * y, k * z]))
    if name == "custom_polynomial":
        a = np.asarray(p["constant"], dtype=float)
        b = np.asarray(p["linear"], dtype=float)
        if a.shape != (DIM, DIM) or b.shape != (DIM,) * 3:
            raise ArgumentError("custom_polynomial needs a 4x4 constant part and a 4x4x4 linear part")
        return sp.Matrix(DIM, DIM, lambda m, n: sp.Float(a[m, n]) + sum(
            sp.Float(b[m, n, l]) * COORDS[l] for l in range(DIM)))
    raise ArgumentError(f"unknown field preset {name!r}; expected one of {FIELD_PRESETS}")


@lru_cache(maxsize=None)
def _compiled_field(name, frozen_params):
    f = sp.Array(_field_expression(name, dict(frozen_params)))
    return compile_array(f), compile_array(with_derivative(f))


def from_potential(potential, metric=None, label="em"):
    """F^{mn} = g^{ma} g^{nb} (d_a A_b - d_b A_a) with A_b = g_{br} A^r"""
    metric = metric or minkowski()

    def lowered_curl(x):
        g = metric.components(x)
        dg = metric.deriv(x)
        a = potential.components(x)
        da = potential.deriv(x)
        # d[b, a] = d_a A_b
        d = np.einsum("bra,r->ba", dg, a) + g @ da
        return d.T - d, (g, dg, a, da)

    def value(x):
        f_low, _ = lowered_curl(x)
        g_inv = metric.eval(x).contra
        return g_inv @ f_low @ g_inv

    def deriv(x):
        f_low, (g, dg, a, da) = lowered_curl(x)
        d2g = metric.deriv2(x)
        d2a = potential.deriv2(x)
        dd = (np.einsum("bral,r->bal", d2g, a)
              + np.einsum("bra,rl->bal", dg, da)
              + np.einsum("brl,ra->bal", dg, da)
              + np.einsum("br,ral->bal", g, d2a))
        df_low = dd.transpose(1, 0, 2) - dd
        g_inv = metric.eval(x).contra
        dg_inv = -np.einsum("ma,abl,bn->mnl", g_inv, dg, g_inv)
        return (np.einsum("mal,ab,nb->mnl", dg_inv, f_low, g_inv)
                + np.einsum("ma,abl,nb->mnl", g_inv, df_low, g_inv)
                + np.einsum("ma,ab,nbl->mnl", g_inv, f_low, dg_inv))

    def domain(x):
        metric.check_domain(x)
        potential.check_domain(x)

    return FieldTensorField(
        name="from_potential",
        params={"potential": potential.name, "potential_params": potential.params, "metric": metric.name},
        value_fn=value,
        deriv_fn=deriv,
        label=label,
        domain_fn=domain,
    )


def preset_field(name, params=None, metric=None, label="em"):
    """Build a field-tensor preset; from_potential takes the metric to raise indices with"""
    if name not in _FIELD_DEFAULTS:
        raise ArgumentError(f"unknown field preset {name!r}; expected one of {FIELD_PRESETS}")
    p = _merge_params(name, params, _FIELD_DEFAULTS[name])
    if name == "from_potential":
        potential = preset_potential(p["potential"], p["potential_params"])
        logger.info(f"Built field from_potential({potential.name}) on {getattr(metric, 'name', 'minkowski')}")
        return from_potential(potential, metric, label=label)

    f_fn, df_fn = _compiled_field(name, _freeze(p))
    domain = _no_domain
    if name in ("coulomb", "monopole_B"):
        def domain(x):
            _spatial_radius_check(x, what=name)
    logger.info(f"Built field preset {name} {p}")
    return FieldTensorField(
        name=name,
        params=p,
        value_fn=f_fn,
        deriv_fn=df_fn,
        label=label,
        domain_fn=domain,
        constant=(name == "uniform_EB"),
    )


def combine_fields(fields, weights, label="combined"):
    """Sum_I w_I F_I as a single field tensor"""
    fields = tuple(fields)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (len(fields),):
        raise ArgumentError(f"{len(fields)} fields but {weights.size} weights")

    def value(x):
        out = np.zeros((DIM, DIM))
        for w, f in zip(weights, fields):
            if w != 0.0:
                out += w * f.components(x)
        return out

    def deriv(x):
        out = np.zeros((DIM,) * 3)
        for w, f in zip(weights, fields):
            if w != 0.0:
                out += w * f.deriv(x)
        return out

    def domain(x):
        for w, f in zip(weights, fields):
            if w != 0.0:
                f.check_domain(x)

    return FieldTensorField(
        name="combination",
        params={"fields": [f.name for f in fields], "weights": weights.tolist()},
        value_fn=value,
        deriv_fn=deriv,
        label=label,
        domain_fn=domain,
        constant=all(f.constant for f in fields),
    )


# ---------------------------------------------------------------------------
# Mass
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MassField:
    """Scalar rest mass m(X) > 0 with gradient and Hessian"""

    name: str
    params: dict
    value_fn: Callable
    grad_fn: Callable
    hess_fn: Callable
    constant: bool = False

    def eval(self, x):
        m = self.value_fn(_as_point(x))
        if not m > 0:
            raise DomainError(f"mass field {self.name} is not positive at {np.asarray(x).tolist()}: m = {m}")
        return m

    def grad(self, x):
        return self.grad_fn(_as_point(x))

    def hess(self, x):
        return self.hess_fn(_as_point(x))

    def check_domain(self, x):
        self.eval(x)


def _mass_expression(name, p):
    t, x, y, z = COORDS
    if name == "constant":
        return sp.Float(p["m"])
    if name == "linear_gradient":
        return sp.Float(p["m0"]) + sum(sp.Float(k) * c for k, c in zip(p["k"], COORDS))
    if name == "gaussian_well":
        c = [sp.Float(v) for v in p["center"]]
        width = sp.Float(p["width"])
        r2 = (x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2
        return sp.Float(p["m0"]) - sp.Float(p["depth"]) * sp.exp(-r2 / (2 * width**2))
    raise ArgumentError(f"unknown mass preset {name!r}; expected one of {MASS_PRESETS}")


@lru_cache(maxsize=None)
def _compiled_mass(name, frozen_params):
    m = _mass_expression(name, dict(frozen_params))
    grad = sp.derive_by_array(m, COORDS)
    hess = sp.derive_by_array(grad, COORDS)
    return compile_scalar(m), compile_array(grad), compile_array(hess)


def _validate_mass(name, p, box):
    if name == "constant" and not p["m"] > 0:
        raise ArgumentError(f"constant mass must be positive, got {p['m']}")
    if name == "linear_gradient":
        k = np.asarray(p["k"], dtype=float)
        if k.shape != (DIM,):
            raise ArgumentError("linear_gradient needs a 4-component gradient k")
        # affine: the minimum over the box sits at a corner
        for corner in itertools.product(*box):
            if p["m0"] + k @ np.asarray(corner) <= 0:
                raise ArgumentError(f"linear_gradient mass is not positive at box corner {list(corner)}")
    if name == "gaussian_well":
        if not p["width"] > 0:
            raise ArgumentError(f"gaussian_well width must be positive, got {p['width']}")
        if not p["m0"] - p["depth"] > 0:
            raise ArgumentError(f"gaussian_well minimum m0 - depth = {p['m0'] - p['depth']} is not positive")


def preset_mass(name, params=None, box=None):
    if name not in _MASS_DEFAULTS:
        raise ArgumentError(f"unknown mass preset {name!r}; expected one of {MASS_PRESETS}")
    p = _merge_params(name, params, _MASS_DEFAULTS[name])
    box = DEFAULT_BOX if box is None else np.asarray(box, dtype=float)
    _validate_mass(name, p, box)
    m_fn, grad_fn, hess_fn = _compiled_mass(name, _freeze(p))
    return MassField(name=name, params=p, value_fn=m_fn, grad_fn=grad_fn, hess_fn=hess_fn,
                     constant=(name == "constant"))


# ---------------------------------------------------------------------------
# Oracle and bundle
# ---------------------------------------------------------------------------

def fd_derivative_oracle(source, x, h=None):
    """Central-difference derivative of any field type, matching its analytic layout"""
    x = _as_point(x)
    if h is None:
        steps = fd_steps(x)
    else:
        steps = np.broadcast_to(np.asarray(h, dtype=float), (DIM,))
        if np.any(steps <= 0):
            raise ArgumentError(f"finite-difference step must be positive, got {h}")

    if isinstance(source, MetricField):
        fn = source.components
    elif isinstance(source, (FieldTensorField, PotentialField)):
        fn = source.components
    elif isinstance(source, MassField):
        fn = source.eval
    elif callable(source):
        fn = source
    else:
        raise ArgumentError(f"cannot differentiate {type(source).__name__}")
    return central_difference(fn, x, steps)


@dataclass(frozen=True, eq=False)
class FieldConfig:
    """Metric, field tensors, mass field and potential for one scenario"""

    metric: MetricField = field(default_factory=minkowski)
    fields: tuple = ()
    mass: Optional[MassField] = None
    potential: Optional[PotentialField] = None
    box: Optional[np.ndarray] = None

    def domain_box(self):
        if self.box is not None:
            return np.asarray(self.box, dtype=float)
        return self.metric.domain_box()

    def check_domain(self, x):
        self.metric.check_domain(x)
        for f in self.fields:
            f.check_domain(x)
        if self.mass is not None:
            self.mass.check_domain(x)
        if self.potential is not None:
            self.potential.check_domain(x)

    def species(self, label=None):
        if not self.fields:
            raise ArgumentError("scenario defines no field tensors")
        if label is None:
            return self.fields[0]
        for f in self.fields:
            if f.label == label:
                return f
        raise ArgumentError(f"no field with species label {label!r}")
