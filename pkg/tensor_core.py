"""
Dense rank-1..4 tensors over 4-dimensional spacetime indices.

Variance is carried as data ("up" / "down" per slot) and checked at run
time, so a contraction that silently skips the metric is an error rather
than a wrong number. Every container is immutable after construction.
"""

import itertools
import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from config import DIM, METRIC_INVERSE_TOL
from errors import ArgumentError, DomainError, NumericError

logger = logging.getLogger(__name__)

UP = "up"
DOWN = "down"
SYMMETRIES = ("none", "symmetric", "antisymmetric")


def _as_variance(variance, rank):
    if isinstance(variance, str):
        variance = (variance,) * rank
    variance = tuple(variance)
    if len(variance) != rank:
        raise ArgumentError(f"variance has {len(variance)} labels for a rank-{rank} tensor")
    for label in variance:
        if label not in (UP, DOWN):
            raise ArgumentError(f"unknown variance label {label!r}")
    return variance


@dataclass(frozen=True, eq=False)
class Tensor:
    """Components plus one variance label per index slot"""

    components: np.ndarray
    variance: tuple
    symmetry: str = "none"

    def __post_init__(self):
        comps = np.array(self.components, dtype=float)
        rank = comps.ndim
        if rank < 1 or rank > 4 or comps.shape != (DIM,) * rank:
            raise ArgumentError(f"expected a 4^k array with k in 1..4, got shape {comps.shape}")
        if not np.all(np.isfinite(comps)):
            raise NumericError("tensor components must be finite")
        if self.symmetry not in SYMMETRIES:
            raise ArgumentError(f"unknown symmetry flag {self.symmetry!r}")
        if self.symmetry != "none":
            if rank != 2:
                raise ArgumentError("symmetry flags apply to rank-2 tensors only")
            if self.symmetry == "symmetric":
                comps = 0.5 * (comps + comps.T)
            else:
                comps = 0.5 * (comps - comps.T)
        comps.setflags(write=False)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "variance", _as_variance(self.variance, rank))

    @property
    def rank(self):
        return self.components.ndim

    def __getitem__(self, index):
        return self.components[index]

    def _check_compatible(self, other):
        if not isinstance(other, Tensor):
            return NotImplemented
        if other.variance != self.variance:
            raise ArgumentError(f"variance mismatch: {self.variance} vs {other.variance}")
        return None

    def __add__(self, other):
        if self._check_compatible(other) is NotImplemented:
            return NotImplemented
        return Tensor(self.components + other.components, self.variance)

    def __sub__(self, other):
        if self._check_compatible(other) is NotImplemented:
            return NotImplemented
        return Tensor(self.components - other.components, self.variance)

    def __mul__(self, scalar):
        if isinstance(scalar, Tensor):
            return NotImplemented
        return Tensor(float(scalar) * self.components, self.variance, self.symmetry)

    __rmul__ = __mul__

    def __neg__(self):
        return Tensor(-self.components, self.variance, self.symmetry)

    def __repr__(self):
        return f"Tensor(rank={self.rank}, variance={self.variance}, symmetry={self.symmetry!r})"


def vec4(components, variance=UP):
    return Tensor(components, variance)


def tensor2(components, variance=(UP, UP), symmetry="none"):
    return Tensor(components, variance, symmetry)


@dataclass(frozen=True, eq=False)
class MetricValue:
    """Metric g_{mu nu} and its inverse g^{mu nu} at one spacetime point"""

    g: Tensor
    g_inv: Tensor

    @classmethod
    def from_components(cls, g):
        g = np.asarray(g, dtype=float)
        if g.shape != (DIM, DIM):
            raise ArgumentError(f"metric must be 4x4, got {g.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericError("metric components are not finite")
        scale = max(1.0, float(np.max(np.abs(g))))
        if np.max(np.abs(g - g.T)) > 1e-12 * scale:
            raise ArgumentError("metric is not symmetric")
        g = 0.5 * (g + g.T)

        eigenvalues = np.linalg.eigvalsh(g)
        if np.sum(eigenvalues > 0) != 1 or np.sum(eigenvalues < 0) != 3:
            raise DomainError(f"metric signature is not (+,-,-,-): eigenvalues {eigenvalues}")

        try:
            g_inv = np.linalg.inv(g)
        except np.linalg.LinAlgError as e:
            raise NumericError(f"singular metric: {e}") from e
        g_inv = 0.5 * (g_inv + g_inv.T)
        deviation = np.max(np.abs(g @ g_inv - np.eye(DIM)))
        if deviation > METRIC_INVERSE_TOL:
            raise NumericError(f"metric inverse deviates from identity by {deviation:.3e}")

        return cls(Tensor(g, (DOWN, DOWN), "symmetric"), Tensor(g_inv, (UP, UP), "symmetric"))

    @property
    def cov(self):
        return self.g.components

    @property
    def contra(self):
        return self.g_inv.components

    @property
    def det(self):
        return float(np.linalg.det(self.cov))


def _check_slot(t, slot):
    if not isinstance(slot, (int, np.integer)) or slot < 0 or slot >= t.rank:
        raise ArgumentError(f"invalid slot {slot!r} for a rank-{t.rank} tensor")


def _apply_metric(t, slot, matrix, new_label):
    moved = np.tensordot(matrix, t.components, axes=([1], [slot]))
    variance = list(t.variance)
    variance[slot] = new_label
    return Tensor(np.moveaxis(moved, 0, slot), tuple(variance))


def raise_index(t, slot, metric):
    """Contract a covariant slot with g^{mu nu}"""
    _check_slot(t, slot)
    if t.variance[slot] != DOWN:
        raise ArgumentError(f"slot {slot} is already contravariant")
    return _apply_metric(t, slot, metric.contra, UP)


def lower_index(t, slot, metric):
    """Contract a contravariant slot with g_{mu nu}"""
    _check_slot(t, slot)
    if t.variance[slot] != UP:
        raise ArgumentError(f"slot {slot} is already covariant")
    return _apply_metric(t, slot, metric.cov, DOWN)


def contract(a, b, slots=(0, 0)):
    """Einstein summation over slot pair (slot of a, slot of b)"""
    i, j = slots
    _check_slot(a, i)
    _check_slot(b, j)
    if a.variance[i] == b.variance[j]:
        raise ArgumentError(
            f"cannot contract two {a.variance[i]} indices; raise or lower one with the metric first"
        )
    result = np.tensordot(a.components, b.components, axes=([i], [j]))
    variance = a.variance[:i] + a.variance[i + 1:] + b.variance[:j] + b.variance[j + 1:]
    if result.ndim == 0:
        return float(result)
    return Tensor(result, variance)


def _permutation_sign(perm):
    sign = 1
    perm = list(perm)
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


@lru_cache(maxsize=1)
def _levi_civita_array():
    eps = np.zeros((DIM,) * 4)
    for perm in itertools.permutations(range(DIM)):
        eps[perm] = _permutation_sign(perm)
    eps.setflags(write=False)
    return eps


def levi_civita():
    """Levi-Civita symbol with eps_{0123} = +1"""
    return Tensor(_levi_civita_array(), DOWN)


def dot(u, v, g):
    """g_{mu nu} u^mu v^nu on plain arrays"""
    return float(np.asarray(u) @ np.asarray(g) @ np.asarray(v))


def four_velocity(velocity, metric):
    """On-shell U from a coordinate 3-velocity dx^i/dt"""
    velocity = np.asarray(velocity, dtype=float)
    if velocity.shape != (3,):
        raise ArgumentError(f"3-velocity must have 3 components, got {velocity.shape}")
    direction = np.concatenate(([1.0], velocity))
    norm = dot(direction, direction, metric.cov)
    if norm <= 0.0:
        raise ArgumentError(f"3-velocity {velocity.tolist()} is not timelike here (g(v,v) = {norm:.3e})")
    return direction / np.sqrt(norm)


def orthonormal_frame(metric):
    """Columns e_a with e_a . g . e_b = diag(+1,-1,-1,-1)"""
    eigenvalues, vectors = np.linalg.eigh(metric.cov)
    order = np.argsort(-eigenvalues)
    timelike = order[0]
    spacelike = sorted(order[1:])
    time_leg = vectors[:, timelike] / np.sqrt(eigenvalues[timelike])
    # future-directed
    columns = [time_leg if time_leg[0] >= 0 else -time_leg]
    columns += [vectors[:, k] / np.sqrt(-eigenvalues[k]) for k in spacelike]
    return np.stack(columns, axis=1)


def frame_four_velocity(velocity, metric):
    """On-shell U from a 3-velocity measured in an orthonormal frame of g"""
    velocity = np.asarray(velocity, dtype=float)
    speed2 = float(velocity @ velocity)
    if speed2 >= 1.0:
        raise ArgumentError(f"frame speed must be below 1, got {np.sqrt(speed2):.6f}")
    gamma = 1.0 / np.sqrt(1.0 - speed2)
    return orthonormal_frame(metric) @ (gamma * np.concatenate(([1.0], velocity)))


def central_difference(fn, point, steps):
    """Central-difference derivative of fn at point; derivative index last"""
    point = np.asarray(point, dtype=float)
    slices = []
    for i, h in enumerate(steps):
        shift = np.zeros_like(point)
        shift[i] = h
        forward = np.asarray(fn(point + shift), dtype=float)
        backward = np.asarray(fn(point - shift), dtype=float)
        slices.append((forward - backward) / (2.0 * h))
    return np.stack(slices, axis=-1)
