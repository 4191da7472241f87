"""
Structural results on top of the bracket engine: Darboux canonization,
the electric/magnetic dual and the charge rotation it allows, multi-
particle block brackets, and the component/condition counts that rule
out forces cubic in U.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.linalg import block_diag, orth

from bracket_engine import PHASE_DIM, build_bracket
from config import ANALYTIC_TOL, DIM
from errors import ArgumentError
from fields import FieldConfig, FieldTensorField, combine_fields, from_potential, minkowski
from jacobi_verifier import basis_jacobi_residual
from tensor_core import DOWN, UP, Tensor, levi_civita

logger = logging.getLogger(__name__)

SIGN_CONVENTIONS = (1.0, -1.0)
CURVED_CANONICAL_TOL = 1e-6


# ---------------------------------------------------------------------------
# Canonization
# ---------------------------------------------------------------------------

@dataclass
class CanonicalPair:
    """(X, P) with the canonical residuals measured for each sign convention"""

    X: Tensor
    P: Tensor
    sign: float
    residuals: dict = field(default_factory=dict)
    tolerance: float = ANALYTIC_TOL

    @property
    def passing(self):
        return [s for s, r in self.residuals.items() if max(r.values()) <= self.tolerance]

    @property
    def passed(self):
        return self.sign in self.passing

    def to_dict(self):
        return {
            "X": self.X.components.tolist(),
            "P": self.P.components.tolist(),
            "P_variance": self.P.variance[0],
            "sign": "+" if self.sign > 0 else "-",
            "residuals": {("+" if s > 0 else "-"): r for s, r in self.residuals.items()},
            "passing": ["+" if s > 0 else "-" for s in self.passing],
            "tolerance": self.tolerance,
        }


def _transformed_brackets(spec, p, momentum_jacobian):
    """Brackets of (X, P) by the chain rule: K J K^T with K = d(X, P)/d(X, U)"""
    k = np.eye(PHASE_DIM)
    k[DIM:, :] = momentum_jacobian
    jw = k @ spec.poisson_tensor(p) @ k.T
    return jw[:DIM, DIM:], jw[DIM:, DIM:]


def _pick(pairs, tolerance):
    """Prefer a passing convention, otherwise the one with the smallest residual"""
    residuals = {s: r for s, (_, r) in pairs.items()}
    scored = sorted(pairs, key=lambda s: (max(residuals[s].values()) > tolerance, max(residuals[s].values())))
    return scored[0], residuals


def canonize_flat(p, potential, q_over_m, tolerance=ANALYTIC_TOL):
    """P^m = U^m + s (q/m) A^m, tried for both signs s under the flat bracket of F = dA"""
    config = FieldConfig(fields=(from_potential(potential),))
    spec = build_bracket(config, "flat_EM", charges=[q_over_m], mass=1.0)
    g_inv = minkowski().eval(p.X).contra
    a = potential.components(p.X)
    da = potential.deriv(p.X)

    pairs = {}
    for s in SIGN_CONVENTIONS:
        jac = np.hstack((s * q_over_m * da, np.eye(DIM)))
        xp, pp = _transformed_brackets(spec, p, jac)
        momentum = p.U + s * q_over_m * a
        pairs[s] = (momentum, {"xp": float(np.max(np.abs(xp - g_inv))), "pp": float(np.max(np.abs(pp)))})

    sign, residuals = _pick(pairs, tolerance)
    logger.info(f"Flat canonization residuals: {residuals}")
    return CanonicalPair(Tensor(p.X, UP), Tensor(pairs[sign][0], UP), sign, residuals, tolerance)


def canonize_curved(p, potential, metric, q_over_m, tolerance=CURVED_CANONICAL_TOL):
    """P_m = g_{mn} U^n + s (q/m) A_m under the curved bracket; targets [X^m, P_n] = delta, [P, P] = 0"""
    config = FieldConfig(metric=metric, fields=(from_potential(potential, metric),))
    spec = build_bracket(config, "curved", charges=[q_over_m], mass=1.0)
    x, u = p.X, p.U
    g = metric.components(x)
    dg = metric.deriv(x)
    a = potential.components(x)
    da = potential.deriv(x)
    a_low = g @ a
    # d_a A_m with A_m = g_{mr} A^r
    da_low = np.einsum("mra,r->ma", dg, a) + g @ da

    pairs = {}
    for s in SIGN_CONVENTIONS:
        jac = np.hstack((np.einsum("mna,n->ma", dg, u) + s * q_over_m * da_low, g))
        xp, pp = _transformed_brackets(spec, p, jac)
        momentum = g @ u + s * q_over_m * a_low
        pairs[s] = (momentum, {"xp": float(np.max(np.abs(xp - np.eye(DIM)))), "pp": float(np.max(np.abs(pp)))})

    sign, residuals = _pick(pairs, tolerance)
    logger.info(f"Curved canonization residuals on {metric.name}: {residuals}")
    return CanonicalPair(Tensor(x, UP), Tensor(pairs[sign][0], DOWN), sign, residuals, tolerance)


# ---------------------------------------------------------------------------
# Duality and monopoles
# ---------------------------------------------------------------------------

def _raised_epsilon(metric):
    eps_low = math.sqrt(abs(metric.det)) * levi_civita().components
    g_inv = metric.contra
    return np.einsum("ma,nb,rc,sd,abcd->mnrs", g_inv, g_inv, g_inv, g_inv, eps_low, optimize=True)


def dual_tensor(f, metric):
    """dual^{mn} = 1/2 eps^{mnrs} F_{rs}, eps carrying the sqrt|det g| weight"""
    f = f.components if isinstance(f, Tensor) else np.asarray(f, dtype=float)
    if not np.allclose(f, -f.T, atol=1e-14):
        raise ArgumentError("dual is defined for antisymmetric F only")
    f_low = metric.cov @ f @ metric.cov
    return Tensor(0.5 * np.einsum("mnrs,rs->mn", _raised_epsilon(metric), f_low), (UP, UP), "antisymmetric")


def dual_field(field_tensor, metric=None, label="dual"):
    """Dual of a field tensor in a constant metric"""
    metric = metric or minkowski()
    if not metric.constant:
        raise ArgumentError(f"dual fields are only built in a constant metric, got {metric.name}")
    metric_value = metric.eval(np.zeros(DIM))
    eps_up = _raised_epsilon(metric_value)
    g = metric_value.cov

    def value(x):
        return dual_tensor(field_tensor.components(x), metric_value).components

    def deriv(x):
        df_low = np.einsum("ma,abl,bn->mnl", g, field_tensor.deriv(x), g)
        return 0.5 * np.einsum("mnrs,rsl->mnl", eps_up, df_low)

    return FieldTensorField(
        name="dual",
        params={"of": field_tensor.name},
        value_fn=value,
        deriv_fn=deriv,
        label=label,
        domain_fn=field_tensor.check_domain,
        constant=field_tensor.constant,
    )


class TotalField(NamedTuple):
    field: FieldTensorField
    charge: float


def total_field(field_tensor, alpha, beta, q_e=1.0, metric=None):
    """H = (F - (a/b) dual) / sqrt(1 + a^2/b^2) with charge q = q_e sqrt(1 + a^2/b^2)"""
    if beta == 0:
        raise ArgumentError("beta must be nonzero for the total-field rotation")
    ratio = alpha / beta
    scale = math.sqrt(1.0 + ratio**2)
    if alpha == 0:
        return TotalField(field_tensor, float(q_e))
    dual = dual_field(field_tensor, metric)
    h = combine_fields((field_tensor, dual), (1.0 / scale, -ratio / scale), label="total")
    return TotalField(h, float(q_e) * scale)


@dataclass(frozen=True, eq=False)
class MonopoleConfig:
    """Electric and magnetic charge tied by alpha q_e + beta q_m = 0"""

    q_e: float
    q_m: float
    alpha: float
    beta: float
    field: FieldTensorField
    relation_enabled: bool = True

    def __post_init__(self):
        if self.beta == 0:
            raise ArgumentError("beta must be nonzero")
        if self.relation_enabled and abs(self.alpha * self.q_e + self.beta * self.q_m) > 1e-12:
            raise ArgumentError(
                f"charges violate alpha q_e + beta q_m = 0: {self.alpha * self.q_e + self.beta * self.q_m:.3e}"
            )

    @classmethod
    def from_relation(cls, q_e, alpha, beta, field_tensor):
        if beta == 0:
            raise ArgumentError("beta must be nonzero")
        return cls(q_e, -alpha * q_e / beta, alpha, beta, field_tensor)


def monopole_bracket(monopole, metric=None, mass=1.0):
    """[U, U] = (1/m)(q_e F + q_m dual)"""
    metric = metric or minkowski()
    dual = dual_field(monopole.field, metric)
    config = FieldConfig(metric=metric, fields=(monopole.field, dual))
    return build_bracket(config, "monopole", charges=[monopole.q_e, monopole.q_m], mass=mass)


# ---------------------------------------------------------------------------
# Multi-particle brackets
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ChargeMatrix:
    """q[i, I]: charge of particle i under field species I, with particle masses"""

    q: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        q = np.atleast_2d(np.asarray(self.q, dtype=float))
        masses = np.atleast_1d(np.asarray(self.masses, dtype=float))
        if q.ndim != 2 or q.shape[0] < 1 or q.shape[1] < 1:
            raise ArgumentError(f"charge matrix must be n x m with n, m >= 1, got shape {q.shape}")
        if masses.shape != (q.shape[0],):
            raise ArgumentError(f"{q.shape[0]} particles but {masses.size} masses")
        if np.any(masses <= 0):
            raise ArgumentError(f"masses must be positive, got {masses.tolist()}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "masses", masses)

    @property
    def n_particles(self):
        return self.q.shape[0]

    @property
    def n_species(self):
        return self.q.shape[1]

    @property
    def charge_to_mass(self):
        return self.q / self.masses[:, None]


@dataclass(frozen=True, eq=False)
class MultiParticleSpec:
    """Block-diagonal bracket over n particles; cross-particle brackets vanish"""

    charges: ChargeMatrix
    blocks: tuple
    kind: str = "multiparticle_block"

    @property
    def n_particles(self):
        return len(self.blocks)

    def block(self, i):
        if i not in range(self.n_particles):
            raise ArgumentError(f"particle index {i} out of range for {self.n_particles} particles")
        return self.blocks[i]

    def split(self, z):
        z = np.asarray(z, dtype=float)
        if z.shape != (PHASE_DIM * self.n_particles,):
            raise ArgumentError(f"expected {PHASE_DIM * self.n_particles} phase coordinates, got {z.shape}")
        return z.reshape(self.n_particles, PHASE_DIM)

    def poisson_tensor(self, z):
        parts = self.split(z)
        return block_diag(*(spec.poisson_tensor(part) for spec, part in zip(self.blocks, parts)))

    def residual(self, i, p, which=4):
        return basis_jacobi_residual(self.block(i), p, which)


def assemble_multiparticle(charges, fields, metric=None):
    """One block per particle with B_UU = (1/m_i) Sum_I q_(i,I) F_I"""
    fields = tuple(fields)
    if charges.n_species != len(fields):
        raise ArgumentError(f"charge matrix has {charges.n_species} species but {len(fields)} fields were given")
    metric = metric or minkowski()
    config = FieldConfig(metric=metric, fields=fields)
    kind = "flat_EM" if metric.constant else "curved"
    blocks = tuple(
        build_bracket(config, kind, charges=row, mass=m) for row, m in zip(charges.q, charges.masses)
    )
    logger.info(f"Assembled {charges.n_particles} particle blocks over {charges.n_species} species")
    return MultiParticleSpec(charges, blocks)


def constrained_field_combinations(charges):
    """Orthonormal basis c of the row space of q_(i,I)/m_i; each Sum_I c_I F_I must be closed"""
    basis = orth(charges.charge_to_mass.T).T
    # fix the SVD sign freedom: largest entry of each vector positive
    for row in basis:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return basis


# ---------------------------------------------------------------------------
# Counting
# ---------------------------------------------------------------------------

def _axis_permutation(rank, perm):
    """Matrix of T -> transpose(T, perm) acting on flattened rank-k arrays"""
    size = DIM**rank
    basis = np.eye(size).reshape((size,) + (DIM,) * rank)
    moved = np.transpose(basis, (0,) + tuple(1 + a for a in perm))
    return moved.reshape(size, size).T


def _symmetrizer(rank, axes, sign=False):
    """Average over permutations of the given axes, signed for antisymmetrization"""
    size = DIM**rank
    if len(axes) < 2:
        return np.eye(size)
    total = np.zeros((size, size))
    perms = list(itertools.permutations(axes))
    for perm in perms:
        full = list(range(rank))
        for src, dst in zip(axes, perm):
            full[src] = dst
        parity = _parity(perm, axes) if sign else 1.0
        total += parity * _axis_permutation(rank, full)
    return total / len(perms)


def _parity(perm, reference):
    index = [reference.index(a) for a in perm]
    inversions = sum(1 for i in range(len(index)) for j in range(i + 1, len(index)) if index[i] > index[j])
    return -1.0 if inversions % 2 else 1.0


def constraint_operator(order):
    """Cyclic Jacobi sum at one order in U as a matrix on enumerated index tuples

    Columns are the unknowns T^{[mn]l}_S: an ordered pair m < n, a free index l
    and a sorted U multi-index S. Rows are the conditions
    T^{mnl}_S + T^{nlm}_S + T^{lmn}_S = 0 for every (m, n, l, S).
    """
    pairs = list(itertools.combinations(range(DIM), 2))
    u_tuples = list(itertools.combinations_with_replacement(range(DIM), order))
    columns = {
        key: i for i, key in enumerate((a, b, c, s) for a, b in pairs for c in range(DIM) for s in u_tuples)
    }
    rows = list(itertools.product(range(DIM), range(DIM), range(DIM), u_tuples))
    operator = np.zeros((len(rows), len(columns)))
    for r, (m, n, l, s) in enumerate(rows):
        for i, j, k in ((m, n, l), (n, l, m), (l, m, n)):
            if i == j:
                continue
            operator[r, columns[(min(i, j), max(i, j), k, s)]] += 1.0 if i < j else -1.0
    return operator


@dataclass
class CountReport:
    components: dict
    conditions: dict

    @property
    def total_unknowns(self):
        return sum(self.components.values())

    @property
    def total_conditions(self):
        return sum(self.conditions.values())

    @property
    def overdetermined(self):
        return self.total_conditions > self.total_unknowns

    def to_dict(self):
        return {
            "components": self.components,
            "conditions": {str(k): v for k, v in self.conditions.items()},
            "total_unknowns": self.total_unknowns,
            "total_conditions": self.total_conditions,
            "overdetermined": self.overdetermined,
        }


def _rank(matrix):
    return int(np.linalg.matrix_rank(matrix, tol=1e-9))


def count_components_and_conditions(max_order=3):
    """Independent entries of A, L, Q and the rank of the Jacobi constraints per order in U"""
    pair = _symmetrizer(2, (0, 1), sign=True)
    components = {
        "A": _rank(pair),
        "L": _rank(_symmetrizer(3, (0, 1), sign=True)),
        "Q": _rank(_symmetrizer(4, (0, 1), sign=True) @ _symmetrizer(4, (2, 3))),
    }
    conditions = {order: _rank(constraint_operator(order)) for order in range(max_order + 1)}
    report = CountReport(components, conditions)
    logger.info(f"Counts: components {components}, conditions {conditions}")
    return report
