"""
Jacobi residuals of the scenario brackets and the closed forms they
reduce to: homogeneous Maxwell equations, the covariant Maxwell equations
plus the Riemann cyclic identity in curved space, and the residual left
by a bracket quadratic in U.

For coordinate functions z_i the nested residual is

    C[i, j, k] = dJ[i,j,l] J[l,k] + dJ[j,k,l] J[l,i] + dJ[k,i,l] J[l,j]

i.e. [[z_i,z_j],z_k] + [[z_j,z_k],z_i] + [[z_k,z_i],z_j]. The four
basis identities are its (X,X,X), (X,X,U), (X,U,U) and (U,U,U) blocks.
"""

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from joblib import Parallel, delayed

from bracket_engine import (
    PhasePoint,
    bracket_as_observable,
    build_bracket,
    eval_bracket,
    polynomial_coefficients,
    sample_phase_points,
)
from config import ANALYTIC_TOL, DEFAULT_SAMPLE_COUNT, DEFAULT_SEED, DIM, N_JOBS
from errors import ArgumentError
from fields import FieldConfig, minkowski
from tensor_core import DOWN, UP, Tensor

logger = logging.getLogger(__name__)

IDENTITIES = (1, 2, 3, 4)
_BLOCKS = {
    1: (slice(0, DIM), slice(0, DIM), slice(0, DIM)),
    2: (slice(0, DIM), slice(0, DIM), slice(DIM, 2 * DIM)),
    3: (slice(0, DIM), slice(DIM, 2 * DIM), slice(DIM, 2 * DIM)),
    4: (slice(DIM, 2 * DIM), slice(DIM, 2 * DIM), slice(DIM, 2 * DIM)),
}


def _cyclic(a):
    """a[m,n,l] + a[n,l,m] + a[l,m,n]"""
    return a + np.einsum("nlm->mnl", a) + np.einsum("lmn->mnl", a)


def nested_residual(spec, p):
    """Full 8x8x8 cyclic residual of the Poisson tensor at p"""
    j, dj = spec.poisson_tensor_and_grad(p)
    return (np.einsum("ijl,lk->ijk", dj, j)
            + np.einsum("jkl,li->ijk", dj, j)
            + np.einsum("kil,lj->ijk", dj, j))


def basis_jacobi_residual(spec, p, which):
    """One of the four basis Jacobi identities as a rank-3 array over (mu, nu, lambda)"""
    if which not in _BLOCKS:
        raise ArgumentError(f"basis identity must be one of {IDENTITIES}, got {which!r}")
    return Tensor(nested_residual(spec, p)[_BLOCKS[which]], UP)


def jacobi_identity(f, g, h, spec, p):
    """[f,[g,h]] + [g,[h,f]] + [h,[f,g]] for arbitrary observables"""
    return (eval_bracket(f, bracket_as_observable(g, h, spec), spec, p)
            + eval_bracket(g, bracket_as_observable(h, f, spec), spec, p)
            + eval_bracket(h, bracket_as_observable(f, g, spec), spec, p))


def _lowered_field_derivative(field_tensor, metric, x):
    """F_{mn} and d_l F_{mn}, lowering with g(x) before differentiating"""
    g = metric.components(x)
    dg = metric.deriv(x)
    f = field_tensor.components(x)
    df = field_tensor.deriv(x)
    f_low = g @ f @ g
    df_low = (np.einsum("mal,ab,bn->mnl", dg, f, g)
              + np.einsum("ma,abl,bn->mnl", g, df, g)
              + np.einsum("ma,ab,bnl->mnl", g, f, dg))
    return f_low, df_low


def maxwell_residual(field_tensor, x, metric=None):
    """T_{mnl} = F_{mn,l} + F_{nl,m} + F_{lm,n}"""
    metric = metric or minkowski()
    x = np.asarray(x, dtype=float)
    _, df_low = _lowered_field_derivative(field_tensor, metric, x)
    return Tensor(_cyclic(df_low), DOWN)


def raise_all(t, g_inv):
    """Raise every slot of a covariant rank-3 array"""
    return np.einsum("ma,nb,lc,abc->mnl", g_inv, g_inv, g_inv, np.asarray(t))


def christoffel(metric, x):
    """Gamma^m_{sl} = 1/2 g^{ma} (g_{as,l} + g_{al,s} - g_{sl,a})"""
    g_inv = metric.eval(x).contra
    dg = metric.deriv(x)
    k = dg + np.einsum("als->asl", dg) - np.einsum("sla->asl", dg)
    return Tensor(0.5 * np.einsum("ma,asl->msl", g_inv, k), (UP, DOWN, DOWN))


def christoffel_derivative(metric, x):
    """d_c Gamma^m_{sl}, derivative index last"""
    g_inv = metric.eval(x).contra
    dg = metric.deriv(x)
    d2g = metric.deriv2(x)
    dg_inv = -np.einsum("ma,abl,bn->mnl", g_inv, dg, g_inv)
    k = dg + np.einsum("als->asl", dg) - np.einsum("sla->asl", dg)
    dk = d2g + np.einsum("alsc->aslc", d2g) - np.einsum("slac->aslc", d2g)
    return 0.5 * (np.einsum("mac,asl->mslc", dg_inv, k) + np.einsum("ma,aslc->mslc", g_inv, dk))


class RiemannTensors(NamedTuple):
    mixed: Tensor     # R^r_{smn}
    lowered: Tensor   # R_{asmn}


def riemann(metric, x):
    """R^r_{smn} = d_m Gamma^r_{ns} - d_n Gamma^r_{ms} + Gamma^r_{ml} Gamma^l_{ns} - Gamma^r_{nl} Gamma^l_{ms}"""
    gamma = christoffel(metric, x).components
    d_gamma = christoffel_derivative(metric, x)
    mixed = (np.einsum("rnsm->rsmn", d_gamma)
             - np.einsum("rmsn->rsmn", d_gamma)
             + np.einsum("rml,lns->rsmn", gamma, gamma)
             - np.einsum("rnl,lms->rsmn", gamma, gamma))
    lowered = np.einsum("ar,rsmn->asmn", metric.components(x), mixed)
    return RiemannTensors(Tensor(mixed, (UP, DOWN, DOWN, DOWN)), Tensor(lowered, DOWN))


def riemann_cyclic_sum(lowered):
    """R_{abgd} + R_{agdb} + R_{adbg}"""
    r = np.asarray(lowered)
    return r + np.einsum("agdb->abgd", r) + np.einsum("adbg->abgd", r)


def kretschmann(metric, x):
    g_inv = metric.eval(x).contra
    r = riemann(metric, x).lowered.components
    r_up = np.einsum("ae,bf,cg,dh,efgh->abcd", g_inv, g_inv, g_inv, g_inv, r, optimize=True)
    return float(np.einsum("abcd,abcd->", r, r_up))


def covariant_derivative_field(field_tensor, metric, x):
    """F^{mn}_{;a} = d_a F^{mn} + Gamma^m_{ar} F^{rn} + Gamma^n_{ar} F^{mr}"""
    gamma = christoffel(metric, x).components
    f = field_tensor.components(x)
    df = field_tensor.deriv(x)
    return df + np.einsum("mar,rn->mna", gamma, f) + np.einsum("nar,mr->mna", gamma, f)


@dataclass(frozen=True, eq=False)
class CurvedSplit:
    """Fourth identity in curved space as covariant Maxwell part plus Riemann part"""

    maxwell_part: Tensor
    riemann_part: Tensor

    @property
    def total(self):
        return self.maxwell_part.components + self.riemann_part.components

    def summary(self):
        return {
            "maxwell_part_max": float(np.max(np.abs(self.maxwell_part.components))),
            "riemann_part_max": float(np.max(np.abs(self.riemann_part.components))),
        }


def curved_fourth_identity_split(spec, p):
    """(q/m)(g^{la} F^{mn}_{;a} + cyc) and g^{mb} g^{ng} g^{ld} U^a (R_{abgd} + R_{agdb} + R_{adbg})"""
    if spec.kind != "curved":
        raise ArgumentError(f"curved split needs a curved bracket, got {spec.kind}")
    x, u = p.X, p.U
    metric = spec.metric
    g_inv = metric.eval(x).contra

    maxwell_part = np.zeros((DIM,) * 3)
    if spec.effective_field is not None:
        nabla_f = covariant_derivative_field(spec.effective_field, metric, x)
        maxwell_part = _cyclic(np.einsum("la,mna->mnl", g_inv, nabla_f))

    cyclic_r = riemann_cyclic_sum(riemann(metric, x).lowered.components)
    riemann_part = np.einsum("mb,ng,ld,a,abgd->mnl", g_inv, g_inv, g_inv, u, cyclic_r)
    return CurvedSplit(Tensor(maxwell_part, UP), Tensor(riemann_part, UP))


def quadratic_exclusion_prediction(L):
    """Residual predicted for B_UU = L^{mna} U_a: -L^{nlm}, with L antisymmetrized in its first pair"""
    l = np.asarray(L, dtype=float)
    l = 0.5 * (l - l.transpose(1, 0, 2))
    return -np.einsum("nlm->mnl", l)


def quadratic_force_exclusion(L, p=None):
    """Third basis identity for a flat bracket with [U^m, U^n] = L^{mna} U_a"""
    spec = build_bracket(FieldConfig(), "custom_polynomial", polynomial=polynomial_coefficients(L=L))
    p = p or PhasePoint(np.zeros(DIM), np.array([1.0, 0.0, 0.0, 0.0]))
    return basis_jacobi_residual(spec, p, 3)


def closed_form_fourth_identity(spec, p):
    """Fourth identity predicted from field and metric data alone"""
    if spec.kind in ("flat_EM", "monopole"):
        if spec.effective_field is None:
            return np.zeros((DIM,) * 3)
        g_inv = spec.metric.eval(p.X).contra
        t = maxwell_residual(spec.effective_field, p.X, spec.metric).components
        return raise_all(t, g_inv)
    if spec.kind == "curved":
        return curved_fourth_identity_split(spec, p).total
    if spec.kind == "variable_mass":
        return np.zeros((DIM,) * 3)
    raise ArgumentError(f"no closed form for the fourth identity of a {spec.kind} bracket")


@dataclass
class JacobiReport:
    """Max-abs residual of each basis identity over the sampled points"""

    kind: str
    seed: int
    sample_count: int
    tolerance: float
    max_residuals: dict = field(default_factory=dict)
    worst_points: dict = field(default_factory=dict)
    worst_tensors: dict = field(default_factory=dict)
    cross_validation: float = None

    @property
    def verdicts(self):
        return {k: bool(v <= self.tolerance) for k, v in self.max_residuals.items()}

    @property
    def passed(self):
        return all(self.verdicts.values())

    def failing(self):
        return [k for k, ok in self.verdicts.items() if not ok]

    def to_dict(self):
        return {
            "kind": self.kind,
            "seed": self.seed,
            "sample_count": self.sample_count,
            "tolerance": self.tolerance,
            "identities": {
                str(k): {
                    "max_residual": self.max_residuals[k],
                    "pass": self.verdicts[k],
                    "worst_point": self.worst_points[k],
                    "worst_residual": np.round(self.worst_tensors[k], 15).tolist(),
                }
                for k in sorted(self.max_residuals)
            },
            "cross_validation_max": self.cross_validation,
            "pass": self.passed,
        }


def _point_residuals(spec, p, cross_validate):
    c = nested_residual(spec, p)
    blocks = {k: c[_BLOCKS[k]] for k in IDENTITIES}
    discrepancy = None
    if cross_validate:
        discrepancy = float(np.max(np.abs(blocks[4] - closed_form_fourth_identity(spec, p))))
    return blocks, discrepancy


def verify_jacobi(spec, points=None, tolerance=ANALYTIC_TOL, seed=DEFAULT_SEED,
                  count=DEFAULT_SAMPLE_COUNT, n_jobs=N_JOBS, cross_validate=True):
    """Evaluate the four basis identities over sampled phase points"""
    if points is None:
        points = sample_phase_points(spec.config, count, seed)
    points = list(points)
    if not points:
        raise ArgumentError("no phase points to verify")
    cross_validate = cross_validate and spec.kind in ("flat_EM", "monopole", "curved", "variable_mass")

    results = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_point_residuals)(spec, p, cross_validate) for p in points
    )

    report = JacobiReport(kind=spec.kind, seed=seed, sample_count=len(points), tolerance=tolerance)
    for k in IDENTITIES:
        maxima = np.array([np.max(np.abs(blocks[k])) for blocks, _ in results])
        worst = int(np.argmax(maxima))
        report.max_residuals[k] = float(maxima[worst])
        report.worst_points[k] = points[worst].z.tolist()
        report.worst_tensors[k] = results[worst][0][k]
    if cross_validate:
        report.cross_validation = max(d for _, d in results)

    for k, ok in report.verdicts.items():
        if not ok:
            logger.warning(f"Identity {k} residual {report.max_residuals[k]:.3e} exceeds {tolerance:.1e}")
    logger.info(f"Verified {spec.kind} bracket at {len(points)} points: "
                + ", ".join(f"{k}={v:.2e}" for k, v in report.max_residuals.items()))
    return report
