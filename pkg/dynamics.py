"""
Equations of motion generated by the bracket, the printed force laws they
should reproduce, and a fixed-step proper-time integrator with invariant
monitoring.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from bracket_engine import PHASE_DIM, Observable, PhasePoint, as_z
from config import DIM, MIDPOINT_MAX_ITER, MIDPOINT_TOL, SHELL_TOL
from errors import ArgumentError, DomainError, DomainExitError, NumericError
from jacobi_verifier import christoffel

logger = logging.getLogger(__name__)

HAMILTONIANS = ("quadratic", "variable_mass")
METHODS = ("rk4", "symmetric_midpoint")
CSV_COLUMNS = ["tau", "x0", "x1", "x2", "x3", "u0", "u1", "u2", "u3", "H", "udotu"]


def quadratic_hamiltonian(metric):
    """H = 1/2 g_{mn}(X) U^m U^n"""

    def value(z):
        u = z[DIM:]
        return 0.5 * float(u @ metric.components(z[:DIM]) @ u)

    def grad(z):
        x, u = z[:DIM], z[DIM:]
        dg = metric.deriv(x)
        return np.concatenate((0.5 * np.einsum("mna,m,n->a", dg, u, u), metric.components(x) @ u))

    def hess(z):
        x, u = z[:DIM], z[DIM:]
        dg = metric.deriv(x)
        h = np.zeros((PHASE_DIM, PHASE_DIM))
        h[:DIM, :DIM] = 0.5 * np.einsum("mnab,m,n->ab", metric.deriv2(x), u, u)
        h[:DIM, DIM:] = np.einsum("sna,n->as", dg, u)
        h[DIM:, :DIM] = h[:DIM, DIM:].T
        h[DIM:, DIM:] = metric.components(x)
        return h

    return Observable(value, grad, hess, "H")


def variable_mass_hamiltonian(metric, mass):
    """H = 1/2 m(X) (g_{mn} U^m U^n - 1), which vanishes on shell"""

    def parts(z):
        x, u = z[:DIM], z[DIM:]
        g = metric.components(x)
        dg = metric.deriv(x)
        s = float(u @ g @ u) - 1.0
        ds_x = np.einsum("mna,m,n->a", dg, u, u)
        ds_u = 2.0 * g @ u
        return x, u, g, dg, s, ds_x, ds_u

    def value(z):
        x, _, _, _, s, _, _ = parts(z)
        return 0.5 * mass.eval(x) * s

    def grad(z):
        x, _, _, _, s, ds_x, ds_u = parts(z)
        m = mass.eval(x)
        return 0.5 * np.concatenate((mass.grad(x) * s + m * ds_x, m * ds_u))

    def hess(z):
        x, u, g, dg, s, ds_x, ds_u = parts(z)
        m = mass.eval(x)
        grad_m = mass.grad(x)
        h = np.zeros((PHASE_DIM, PHASE_DIM))
        h[:DIM, :DIM] = 0.5 * (mass.hess(x) * s + np.outer(grad_m, ds_x) + np.outer(ds_x, grad_m)
                               + m * np.einsum("mnab,m,n->ab", metric.deriv2(x), u, u))
        h[:DIM, DIM:] = 0.5 * (np.outer(grad_m, ds_u) + 2.0 * m * np.einsum("sna,n->as", dg, u))
        h[DIM:, :DIM] = h[:DIM, DIM:].T
        h[DIM:, DIM:] = m * g
        return h

    return Observable(value, grad, hess, "H")


def _effective_field_components(config, x, charges, mass):
    charges = np.ones(len(config.fields)) if charges is None else np.asarray(charges, dtype=float)
    f = np.zeros((DIM, DIM))
    for q, field_tensor in zip(charges, config.fields):
        if q != 0.0:
            f += (q / mass) * field_tensor.components(x)
    return f


def closed_form_accel(kind, config, p, charges=None, mass=1.0):
    """Printed force law: -Gamma U U + (q/m) F U for the EM kinds, the gradient force for variable mass"""
    x, u = p.X, p.U
    g = config.metric.components(x)
    if kind in ("flat_EM", "monopole", "curved"):
        gamma = christoffel(config.metric, x).components
        f = _effective_field_components(config, x, charges, mass)
        return -np.einsum("msl,s,l->m", gamma, u, u) + f @ (g @ u)
    if kind == "variable_mass":
        if config.mass is None:
            raise ArgumentError("variable_mass force needs a mass field")
        m = config.mass.eval(x)
        grad_m = config.mass.grad(x)
        g_inv = config.metric.eval(x).contra
        return ((g_inv @ grad_m) * float(u @ g @ u) - float(grad_m @ u) * u) / m
    raise ArgumentError(f"no closed-form acceleration for kind {kind!r}")


@dataclass(frozen=True, eq=False)
class EquationOfMotion:
    """dz/dtau for one bracket and Hamiltonian"""

    spec: object
    hamiltonian: Observable
    source: str = "bracket_derived"

    @property
    def metric(self):
        return self.spec.metric

    def rhs(self, z):
        """[z_i, H] for all eight coordinates"""
        z = as_z(z)
        if self.source == "closed_form":
            p = PhasePoint.from_z(z)
            accel = closed_form_accel(self.spec.kind, self.spec.config, p, self.spec.charges,
                                      self.spec.mass if self.spec.kind != "variable_mass" else 1.0)
            return np.concatenate((p.U, accel))
        return self.spec.poisson_tensor(z) @ self.hamiltonian.grad(z)

    def xdot(self, p):
        return self.rhs(p)[:DIM]

    def udot(self, p):
        return self.rhs(p)[DIM:]

    def energy(self, z):
        return self.hamiltonian.value(z)

    def norm(self, z):
        z = as_z(z)
        u = z[DIM:]
        return float(u @ self.metric.components(z[:DIM]) @ u)

    def domain_check(self, z):
        self.spec.config.check_domain(as_z(z)[:DIM])


def _hamiltonian_for(spec, hamiltonian):
    if hamiltonian not in HAMILTONIANS:
        raise ArgumentError(f"unknown Hamiltonian {hamiltonian!r}; expected one of {HAMILTONIANS}")
    if not hasattr(spec, "poisson_tensor") or getattr(spec, "kind", None) == "multiparticle_block":
        raise ArgumentError("equations of motion are derived per particle block")
    if (hamiltonian == "variable_mass") != (spec.kind == "variable_mass"):
        raise ArgumentError(f"{hamiltonian} Hamiltonian is incompatible with a {spec.kind} bracket")
    if hamiltonian == "variable_mass":
        return variable_mass_hamiltonian(spec.metric, spec.config.mass)
    return quadratic_hamiltonian(spec.metric)


def derive_eom(spec, hamiltonian="quadratic"):
    """xdot = [X, H], udot = [U, H]"""
    return EquationOfMotion(spec, _hamiltonian_for(spec, hamiltonian), "bracket_derived")


def closed_form_eom(spec, hamiltonian="quadratic"):
    return EquationOfMotion(spec, _hamiltonian_for(spec, hamiltonian), "closed_form")


def orthogonality_residual(eom, p):
    """U_m (udot^m + Gamma^m_{sl} U^s U^l); reduces to g(U, udot) for constant metrics"""
    x, u = p.X, p.U
    gamma = christoffel(eom.metric, x).components
    covariant_accel = eom.udot(p) + np.einsum("msl,s,l->m", gamma, u, u)
    return float((eom.metric.components(x) @ u) @ covariant_accel)


@dataclass
class Trajectory:
    """Samples (tau, z) with the invariant log H and g(U, U)"""

    taus: list = field(default_factory=list)
    states: list = field(default_factory=list)
    energies: list = field(default_factory=list)
    norms: list = field(default_factory=list)

    def append(self, tau, z, energy, norm):
        if self.taus and not tau > self.taus[-1]:
            raise NumericError(f"proper time must increase: {tau} after {self.taus[-1]}")
        self.taus.append(float(tau))
        self.states.append(np.array(z, dtype=float))
        self.energies.append(float(energy))
        self.norms.append(float(norm))

    def __len__(self):
        return len(self.taus)

    @property
    def samples(self):
        return [(tau, PhasePoint.from_z(z)) for tau, z in zip(self.taus, self.states)]

    def positions(self):
        return np.array([z[:DIM] for z in self.states])

    def velocities(self):
        return np.array([z[DIM:] for z in self.states])

    def to_frame(self):
        data = np.column_stack((
            np.asarray(self.taus),
            np.asarray(self.states).reshape(len(self), PHASE_DIM),
            np.asarray(self.energies),
            np.asarray(self.norms),
        )) if len(self) else np.empty((0, len(CSV_COLUMNS)))
        return pd.DataFrame(data, columns=CSV_COLUMNS)

    def write_csv(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        logger.info(f"Wrote {len(self)} samples to {path}")
        return path


def _rk4_step(f, z, h):
    k1 = f(z)
    k2 = f(z + 0.5 * h * k1)
    k3 = f(z + 0.5 * h * k2)
    k4 = f(z + h * k3)
    return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _midpoint_step(f, z, h):
    """Implicit midpoint z1 = z + h f((z + z1)/2), fixed-point iterated"""
    z1 = z + h * f(z)
    for _ in range(MIDPOINT_MAX_ITER):
        z_next = z + h * f(0.5 * (z + z1))
        if np.max(np.abs(z_next - z1)) <= MIDPOINT_TOL * max(1.0, float(np.max(np.abs(z_next)))):
            return z_next
        z1 = z_next
    raise NumericError(f"implicit midpoint did not converge in {MIDPOINT_MAX_ITER} iterations (h = {h})")


_STEPPERS = {"rk4": _rk4_step, "symmetric_midpoint": _midpoint_step}


def integrate(eom, p0, tau_end, dt, method="rk4", shell_tol=SHELL_TOL):
    """Fixed-step proper-time integration from p0 to tau_end"""
    if method not in _STEPPERS:
        raise ArgumentError(f"unknown integration method {method!r}; expected one of {METHODS}")
    if not dt > 0:
        raise ArgumentError(f"dt must be positive, got {dt}")
    if not tau_end > 0:
        raise ArgumentError(f"tau_end must be positive, got {tau_end}")
    z = as_z(p0).copy()
    eom.domain_check(z)
    shell = abs(eom.norm(z) - 1.0)
    if shell > shell_tol:
        raise ArgumentError(f"initial state is off shell by {shell:.3e} (tolerance {shell_tol:.1e})")

    step = _STEPPERS[method]
    n_steps = max(1, math.ceil(tau_end / dt - 1e-9))
    traj = Trajectory()
    traj.append(0.0, z, eom.energy(z), eom.norm(z))
    logger.info(f"Integrating {n_steps} {method} steps to tau = {tau_end}")

    tau = 0.0
    for i in range(n_steps):
        h = dt if i < n_steps - 1 else tau_end - tau
        try:
            z = step(eom.rhs, z, h)
            if not np.all(np.isfinite(z)):
                raise NumericError(f"state became non-finite at tau = {tau + h}")
            eom.domain_check(z)
        except DomainError as e:
            logger.warning(f"Trajectory left the domain near tau = {tau:.6g}: {e}")
            raise DomainExitError(f"left the domain near tau = {tau:.6g}: {e}", trajectory=traj) from e
        tau = tau_end if i == n_steps - 1 else (i + 1) * dt
        traj.append(tau, z, eom.energy(z), eom.norm(z))
    return traj


def invariant_drift(traj):
    """(max |H - H0|, max |g(U,U) - g(U,U)0|)"""
    if not len(traj):
        raise ArgumentError("trajectory is empty")
    energies = np.asarray(traj.energies)
    norms = np.asarray(traj.norms)
    return float(np.max(np.abs(energies - energies[0]))), float(np.max(np.abs(norms - norms[0])))
