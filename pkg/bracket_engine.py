"""
Noncanonical Poisson brackets on the 8-dimensional phase space z = (X, U).

A BracketSpec holds the basis brackets [X,X] = 0, [X,U] = B_XU and
[U,U] = B_UU for one scenario. Packed together they form the Poisson
tensor

    J = [[ 0       , B_XU ],
         [ -B_XU^T , B_UU ]]

so that [f, g] = grad f . J . grad g. The derivative dJ[i, j, k] (index k
runs over z) is what nested brackets and the Jacobi residual need.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from config import DIM, MAX_SAMPLE_ATTEMPTS, MAX_SAMPLE_SPEED, SHELL_TOL, fd_steps
from errors import ArgumentError, CapabilityError, DomainError, NumericError
from fields import FieldConfig, combine_fields
from tensor_core import UP, Tensor, central_difference, frame_four_velocity

logger = logging.getLogger(__name__)

PHASE_DIM = 2 * DIM
KINDS = ("flat_EM", "curved", "variable_mass", "monopole", "multiparticle_block", "custom_polynomial")


@dataclass(frozen=True, eq=False)
class PhasePoint:
    """Position X^mu and 4-velocity U^mu"""

    X: np.ndarray
    U: np.ndarray

    def __post_init__(self):
        for name in ("X", "U"):
            v = np.array(getattr(self, name), dtype=float)
            if v.shape != (DIM,):
                raise ArgumentError(f"{name} must have 4 components, got shape {v.shape}")
            if not np.all(np.isfinite(v)):
                raise NumericError(f"{name} is not finite")
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @property
    def z(self):
        return np.concatenate((self.X, self.U))

    @classmethod
    def from_z(cls, z):
        z = np.asarray(z, dtype=float)
        return cls(z[:DIM], z[DIM:])

    def shell_error(self, metric):
        """|g(U,U) - 1| with g evaluated at X"""
        g = metric.components(self.X)
        return abs(float(self.U @ g @ self.U) - 1.0)

    def is_on_shell(self, metric, tol=SHELL_TOL):
        return self.shell_error(metric) <= tol


def as_z(p):
    if isinstance(p, PhasePoint):
        return p.z
    z = np.asarray(p, dtype=float)
    if z.shape != (PHASE_DIM,):
        raise ArgumentError(f"phase point must have 8 components, got shape {z.shape}")
    return z


@dataclass(frozen=True, eq=False)
class BracketSpec:
    """Basis brackets of one scenario

    ``coefficients(x, u)`` returns (B_XU, B_UU, dB_XU, dB_UU) where the
    derivative arrays carry the 8 phase-space derivatives as their last
    index.
    """

    kind: str
    config: FieldConfig
    coefficients: Callable
    charges: tuple = ()
    mass: object = 1.0
    effective_field: object = None
    include_metric_terms: bool = True
    polynomial: dict = field(default_factory=dict)

    @property
    def metric(self):
        return self.config.metric

    def _split(self, p):
        z = as_z(p)
        return z[:DIM], z[DIM:]

    def b_xx(self, p):
        return Tensor(np.zeros((DIM, DIM)), (UP, UP), "antisymmetric")

    def b_xu(self, p):
        x, u = self._split(p)
        return Tensor(self.coefficients(x, u)[0], (UP, UP))

    def b_uu(self, p):
        x, u = self._split(p)
        return Tensor(self.coefficients(x, u)[1], (UP, UP), "antisymmetric")

    def poisson_tensor(self, p):
        x, u = self._split(p)
        b_xu, b_uu, _, _ = self.coefficients(x, u)
        return _pack(b_xu, b_uu)

    def poisson_tensor_grad(self, p):
        x, u = self._split(p)
        _, _, d_xu, d_uu = self.coefficients(x, u)
        return _pack_grad(d_xu, d_uu)

    def poisson_tensor_and_grad(self, p):
        x, u = self._split(p)
        b_xu, b_uu, d_xu, d_uu = self.coefficients(x, u)
        return _pack(b_xu, b_uu), _pack_grad(d_xu, d_uu)

    def charge_over_mass(self):
        if isinstance(self.mass, (int, float)):
            return np.asarray(self.charges, dtype=float) / float(self.mass)
        raise ArgumentError(f"{self.kind} bracket has a position-dependent mass")


def _pack(b_xu, b_uu):
    j = np.zeros((PHASE_DIM, PHASE_DIM))
    j[:DIM, DIM:] = b_xu
    j[DIM:, :DIM] = -b_xu.T
    j[DIM:, DIM:] = b_uu
    return j


def _pack_grad(d_xu, d_uu):
    dj = np.zeros((PHASE_DIM, PHASE_DIM, PHASE_DIM))
    dj[:DIM, DIM:, :] = d_xu
    dj[DIM:, :DIM, :] = -d_xu.transpose(1, 0, 2)
    dj[DIM:, DIM:, :] = d_uu
    return dj


def _antisym(a):
    return a - np.swapaxes(a, 0, 1)


def _require_constant_metric(config, kind):
    if not config.metric.constant:
        raise ArgumentError(f"{kind} bracket needs a constant metric, got {config.metric.name}; use kind 'curved'")


def _electromagnetic_coefficients(config, field_eff):
    """B_XU = g^{mn}, B_UU = (1/m) Sum_I q_I F_I"""
    g_inv = config.metric.eval(np.zeros(DIM)).contra

    def coefficients(x, u):
        d_xu = np.zeros((DIM, DIM, PHASE_DIM))
        d_uu = np.zeros((DIM, DIM, PHASE_DIM))
        if field_eff is None:
            return g_inv, np.zeros((DIM, DIM)), d_xu, d_uu
        d_uu[:, :, :DIM] = field_eff.deriv(x)
        return g_inv, field_eff.components(x), d_xu, d_uu

    return coefficients


def _curved_coefficients(config, field_eff, include_metric_terms):
    """Bracket with position-dependent metric

    B_XU = g^{mn}(X)
    B_UU = T^{mn} - T^{nm} + (q/m) F^{mn},  T^{mn} = g^{ma} g^{nb} g_{bs,a} U^s
    """
    metric = config.metric

    def coefficients(x, u):
        g_inv = metric.eval(x).contra
        dg = metric.deriv(x)
        dg_inv = -np.einsum("ma,abl,bn->mnl", g_inv, dg, g_inv)

        d_xu = np.zeros((DIM, DIM, PHASE_DIM))
        d_xu[:, :, :DIM] = dg_inv
        b_uu = np.zeros((DIM, DIM))
        d_uu = np.zeros((DIM, DIM, PHASE_DIM))

        if include_metric_terms:
            d2g = metric.deriv2(x)
            t = np.einsum("ma,nb,bsa,s->mn", g_inv, g_inv, dg, u)
            dt_x = (np.einsum("mac,nb,bsa,s->mnc", dg_inv, g_inv, dg, u)
                    + np.einsum("ma,nbc,bsa,s->mnc", g_inv, dg_inv, dg, u)
                    + np.einsum("ma,nb,bsac,s->mnc", g_inv, g_inv, d2g, u))
            dt_u = np.einsum("ma,nb,bsa->mns", g_inv, g_inv, dg)
            b_uu += _antisym(t)
            d_uu[:, :, :DIM] += _antisym(dt_x)
            d_uu[:, :, DIM:] += _antisym(dt_u)

        if field_eff is not None:
            b_uu += field_eff.components(x)
            d_uu[:, :, :DIM] += field_eff.deriv(x)
        return g_inv, b_uu, d_xu, d_uu

    return coefficients


def _variable_mass_coefficients(config):
    """B_XU = g^{mn}/m, B_UU = (w^m U^n - w^n U^m)/m^2 with w^m = g^{ma} m_{,a}"""
    mass = config.mass
    g_inv = config.metric.eval(np.zeros(DIM)).contra

    def coefficients(x, u):
        m = mass.eval(x)
        grad = mass.grad(x)
        hess = mass.hess(x)
        w = g_inv @ grad
        dw = g_inv @ hess

        b_xu = g_inv / m
        b_uu = (np.outer(w, u) - np.outer(u, w)) / m**2

        d_xu = np.zeros((DIM, DIM, PHASE_DIM))
        d_xu[:, :, :DIM] = -np.einsum("mn,g->mng", g_inv, grad) / m**2
        d_uu = np.zeros((DIM, DIM, PHASE_DIM))
        d_uu[:, :, :DIM] = (_antisym(np.einsum("mg,n->mng", dw, u)) / m**2
                            - 2.0 * np.einsum("mn,g->mng", b_uu, grad) / m)
        eye = np.eye(DIM)
        d_uu[:, :, DIM:] = _antisym(np.einsum("m,ns->mns", w, eye)) / m**2
        return b_xu, b_uu, d_xu, d_uu

    return coefficients


def _polynomial_coefficients(config, polynomial):
    """B_UU = A^{mn} + L^{mna} U_a + Q^{mnab} U_a U_b, antisymmetrized in (m, n)"""
    g = config.metric.eval(np.zeros(DIM)).cov
    g_inv = config.metric.eval(np.zeros(DIM)).contra
    a = 0.5 * _antisym(polynomial["A"])
    l = 0.5 * _antisym(polynomial["L"])
    q = 0.5 * _antisym(polynomial["Q"])

    def coefficients(x, u):
        u_low = g @ u
        b_uu = a + l @ u_low + np.einsum("mnab,a,b->mn", q, u_low, u_low)
        d_xu = np.zeros((DIM, DIM, PHASE_DIM))
        d_uu = np.zeros((DIM, DIM, PHASE_DIM))
        d_uu[:, :, DIM:] = (np.einsum("mna,as->mns", l, g)
                            + np.einsum("mnab,as,b->mns", q, g, u_low)
                            + np.einsum("mnab,a,bs->mns", q, u_low, g))
        return g_inv, b_uu, d_xu, d_uu

    return coefficients


def polynomial_coefficients(A=None, L=None, Q=None):
    """Coefficient arrays for the custom_polynomial kind, zero-filled"""
    out = {
        "A": np.zeros((DIM,) * 2) if A is None else np.asarray(A, dtype=float),
        "L": np.zeros((DIM,) * 3) if L is None else np.asarray(L, dtype=float),
        "Q": np.zeros((DIM,) * 4) if Q is None else np.asarray(Q, dtype=float),
    }
    for key, rank in (("A", 2), ("L", 3), ("Q", 4)):
        if out[key].shape != (DIM,) * rank:
            raise ArgumentError(f"polynomial coefficient {key} must have shape {(DIM,) * rank}, got {out[key].shape}")
    return out


def _effective_field(config, charges, mass):
    if not config.fields:
        return None
    charges = np.asarray(charges if charges is not None else [1.0] * len(config.fields), dtype=float)
    if charges.shape != (len(config.fields),):
        raise ArgumentError(f"{len(config.fields)} field species but {charges.size} charges")
    if len(config.fields) == 1 and charges[0] == mass:
        return config.fields[0]
    return combine_fields(config.fields, charges / mass, label="effective")


def build_bracket(config, kind, charges=None, mass=1.0, include_metric_terms=True, polynomial=None):
    """Assemble the basis brackets for one scenario

    ``charges`` holds one charge per field species in ``config.fields``; for
    ``multiparticle_block`` it is the n x m charge matrix and ``mass`` the n
    masses.
    """
    if kind not in KINDS:
        raise ArgumentError(f"unknown bracket kind {kind!r}; expected one of {KINDS}")

    if kind == "multiparticle_block":
        from structure_tools import ChargeMatrix, assemble_multiparticle

        return assemble_multiparticle(ChargeMatrix(charges, mass), config.fields, metric=config.metric)

    if kind == "variable_mass":
        if config.mass is None:
            raise ArgumentError("variable_mass bracket needs a mass field")
        _require_constant_metric(config, kind)
        if config.fields:
            logger.warning("variable_mass bracket ignores the scenario's field tensors")
        coefficients = _variable_mass_coefficients(config)
        return BracketSpec(kind=kind, config=config, coefficients=coefficients, mass=config.mass)

    if isinstance(mass, (int, float, np.floating)):
        mass = float(mass)
        if not mass > 0:
            raise ArgumentError(f"mass must be positive, got {mass}")
    else:
        raise ArgumentError(f"{kind} bracket needs a constant mass, got {type(mass).__name__}")

    if kind == "monopole" and len(config.fields) != 2:
        raise ArgumentError(f"monopole bracket needs an electric and a dual field, got {len(config.fields)}")

    field_eff = _effective_field(config, charges, mass)
    charges = tuple(np.asarray(charges if charges is not None else [1.0] * len(config.fields), dtype=float))

    if kind in ("flat_EM", "monopole"):
        _require_constant_metric(config, kind)
        coefficients = _electromagnetic_coefficients(config, field_eff)
    elif kind == "curved":
        coefficients = _curved_coefficients(config, field_eff, include_metric_terms)
    else:
        _require_constant_metric(config, kind)
        polynomial = polynomial if polynomial is not None else polynomial_coefficients()
        coefficients = _polynomial_coefficients(config, polynomial)

    logger.info(f"Built {kind} bracket on {config.metric.name} with {len(config.fields)} field(s)")
    return BracketSpec(
        kind=kind,
        config=config,
        coefficients=coefficients,
        charges=charges,
        mass=mass,
        effective_field=field_eff,
        include_metric_terms=include_metric_terms,
        polynomial=polynomial or {},
    )


# ---------------------------------------------------------------------------
# Observables
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Observable:
    """Scalar function on phase space with first and second partials

    Missing analytic partials fall back to central differences up to
    ``fd_order`` levels (1: gradient only, 2: gradient and Hessian).
    """

    value_fn: Callable
    grad_fn: Optional[Callable] = None
    hess_fn: Optional[Callable] = None
    name: str = "f"
    fd_order: int = 0

    @classmethod
    def from_function(cls, fn, grad=None, hess=None, name="f", fd_order=2):
        return cls(fn, grad, hess, name, fd_order)

    @classmethod
    def constant(cls, c):
        c = float(c)
        return cls(lambda z: c, lambda z: np.zeros(PHASE_DIM), lambda z: np.zeros((PHASE_DIM, PHASE_DIM)), repr(c))

    @property
    def has_second_partials(self):
        if self.hess_fn is not None:
            return True
        if self.grad_fn is not None:
            return self.fd_order >= 1
        return self.fd_order >= 2

    def _value(self, z):
        return float(self.value_fn(z))

    def _grad(self, z):
        if self.grad_fn is not None:
            return np.asarray(self.grad_fn(z), dtype=float)
        if self.fd_order < 1:
            raise CapabilityError(f"observable {self.name} has no first partials")
        return central_difference(self.value_fn, z, fd_steps(z))

    def _hess(self, z):
        if self.hess_fn is not None:
            return np.asarray(self.hess_fn(z), dtype=float)
        if not self.has_second_partials:
            raise CapabilityError(f"observable {self.name} has no second partials")
        h = central_difference(self._grad, z, fd_steps(z))
        return 0.5 * (h + h.T)

    def value(self, p):
        return self._value(as_z(p))

    def grad(self, p):
        return self._grad(as_z(p))

    def hess(self, p):
        return self._hess(as_z(p))

    def dX(self, p):
        return self.grad(p)[:DIM]

    def dU(self, p):
        return self.grad(p)[DIM:]

    def __add__(self, other):
        other = _lift(other)
        return Observable(
            lambda z: self._value(z) + other._value(z),
            lambda z: self._grad(z) + other._grad(z),
            lambda z: self._hess(z) + other._hess(z),
            f"({self.name} + {other.name})",
        )

    __radd__ = __add__

    def __neg__(self):
        return -1.0 * self

    def __sub__(self, other):
        return self + (-1.0) * _lift(other)

    def __rsub__(self, other):
        return _lift(other) - self

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating)):
            c = float(other)
            return Observable(
                lambda z: c * self._value(z),
                lambda z: c * self._grad(z),
                lambda z: c * self._hess(z),
                f"{c}*{self.name}",
            )
        other = _lift(other)

        def hess(z):
            gf, gg = self._grad(z), other._grad(z)
            return (self._hess(z) * other._value(z) + other._hess(z) * self._value(z)
                    + np.outer(gf, gg) + np.outer(gg, gf))

        return Observable(
            lambda z: self._value(z) * other._value(z),
            lambda z: self._grad(z) * other._value(z) + other._grad(z) * self._value(z),
            hess,
            f"{self.name}*{other.name}",
        )

    __rmul__ = __mul__


def _lift(other):
    if isinstance(other, Observable):
        return other
    if isinstance(other, (int, float, np.floating)):
        return Observable.constant(other)
    raise ArgumentError(f"cannot combine an observable with {type(other).__name__}")


def coordinate_observable(which, index):
    """Projection onto X^index or U^index with exact one-hot partials"""
    if which not in ("X", "U"):
        raise ArgumentError(f"coordinate must be 'X' or 'U', got {which!r}")
    if index not in range(DIM):
        raise ArgumentError(f"coordinate index must be in 0..3, got {index!r}")
    slot = index if which == "X" else DIM + index
    one_hot = np.zeros(PHASE_DIM)
    one_hot[slot] = 1.0
    one_hot.setflags(write=False)
    zero_hess = np.zeros((PHASE_DIM, PHASE_DIM))
    return Observable(lambda z: z[slot], lambda z: one_hot, lambda z: zero_hess, f"{which}^{index}")


def eval_bracket(f, g, spec, p):
    """[f, g] = B_XU^{mn}(df/dX^m dg/dU^n - dg/dX^m df/dU^n) + B_UU^{mn} df/dU^m dg/dU^n"""
    z = as_z(p)
    grad_f = f._grad(z)
    grad_g = g._grad(z)
    if not (np.all(np.isfinite(grad_f)) and np.all(np.isfinite(grad_g))):
        raise NumericError(f"non-finite partials in [{f.name}, {g.name}]")
    value = float(grad_f @ spec.poisson_tensor(z) @ grad_g)
    if not np.isfinite(value):
        raise NumericError(f"bracket [{f.name}, {g.name}] is not finite")
    return value


def bracket_as_observable(f, g, spec):
    """[f, g] as an observable whose gradient differentiates through J"""
    for obs in (f, g):
        if not obs.has_second_partials:
            raise CapabilityError(f"observable {obs.name} has no second partials; cannot nest brackets")

    def value(z):
        return eval_bracket(f, g, spec, z)

    def grad(z):
        j, dj = spec.poisson_tensor_and_grad(z)
        grad_f, grad_g = f._grad(z), g._grad(z)
        return (f._hess(z) @ (j @ grad_g)
                + np.einsum("i,ijk,j->k", grad_f, dj, grad_g)
                + g._hess(z) @ (j.T @ grad_f))

    return Observable(value, grad, None, f"[{f.name}, {g.name}]", fd_order=1)


def sample_phase_points(config, count, seed, box=None, max_speed=MAX_SAMPLE_SPEED):
    """Seeded phase points: X uniform in the box, U on shell from a frame velocity |v| <= max_speed"""
    rng = np.random.default_rng(seed)
    box = config.domain_box() if box is None else np.asarray(box, dtype=float)
    if box.shape != (DIM, 2) or np.any(box[:, 1] < box[:, 0]):
        raise ArgumentError(f"domain box must be 4 ordered [lo, hi] pairs, got {box.tolist()}")

    points = []
    attempts = 0
    while len(points) < count:
        attempts += 1
        if attempts > MAX_SAMPLE_ATTEMPTS:
            raise DomainError(f"only {len(points)} of {count} sample points fall inside the valid domain")
        x = rng.uniform(box[:, 0], box[:, 1])
        direction = rng.normal(size=3)
        speed = rng.uniform(0.0, max_speed)
        try:
            config.check_domain(x)
            metric_value = config.metric.eval(x)
        except DomainError:
            continue
        v = speed * direction / np.linalg.norm(direction)
        points.append(PhasePoint(x, frame_four_velocity(v, metric_value)))
    logger.info(f"Sampled {count} phase points with seed {seed} ({attempts} draws)")
    return points
