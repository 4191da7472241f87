"""
Command-line front end: reads a scenario JSON file, runs the Jacobi,
dynamics and structure checks on it and writes machine-readable reports.

    python cli.py check scenarios/potential_em.json
    python cli.py integrate scenarios/gyro_orbit.json --out reports/gyro.csv
    python cli.py canonize scenarios/potential_em.json
    python cli.py count
    python cli.py sweep scenarios/gyro_orbit.json --param integration.dt --values 0.2,0.1

Exit codes: 0 pass, 1 usage or input error, 2 residual failure, 3 domain exit.
"""

import argparse
import copy
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from bracket_engine import KINDS, PhasePoint, build_bracket, polynomial_coefficients, sample_phase_points
from config import (
    ANALYTIC_TOL,
    DEFAULT_SAMPLE_COUNT,
    DEFAULT_SEED,
    EOM_AGREEMENT_TOL,
    FINITE_DIFFERENCE_TOL,
    N_JOBS,
    SHELL_TOL,
    TOOL_NAME,
    __version__,
    setup_logging,
)
from dynamics import METHODS, closed_form_accel, derive_eom, integrate, invariant_drift, orthogonality_residual
from errors import ArgumentError, BracketCheckError, DomainExitError, ScenarioError
from fields import FieldConfig, combine_fields, preset_field, preset_mass, preset_metric, preset_potential
from jacobi_verifier import curved_fourth_identity_split, maxwell_residual, verify_jacobi
from structure_tools import (
    MonopoleConfig,
    canonize_curved,
    canonize_flat,
    count_components_and_conditions,
    monopole_bracket,
)
from tensor_core import four_velocity, frame_four_velocity

logger = logging.getLogger(TOOL_NAME)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RESIDUAL = 2
EXIT_DOMAIN = 3

REPORTS_DIR = Path("reports")

_TOP_LEVEL = {
    "name", "description", "kind", "metric", "fields", "mass", "potential", "particles", "domain_box",
    "tolerances", "sampling", "integration", "include_metric_terms", "polynomial", "monopole",
}
_SECTIONS = {
    "metric": {"preset", "params"},
    "fields": {"preset", "params", "label"},
    "mass": {"preset", "params"},
    "potential": {"preset", "params"},
    "particles": {"x0", "velocity", "mass", "charges", "frame"},
    "tolerances": {"analytic", "finite_difference", "shell_tol"},
    "sampling": {"count", "seed"},
    "integration": {"dt", "tau_end", "method"},
    "polynomial": {"A", "L", "Q"},
    "monopole": {"q_e", "alpha", "beta"},
}


def _line_of(text, key):
    idx = text.find(f'"{key}"')
    return text.count("\n", 0, idx) + 1 if idx >= 0 else None


# ---------------------------------------------------------------------------
# Scenario
# ---------------------------------------------------------------------------

@dataclass
class Scenario:
    """Validated scenario file with builders for fields, brackets and initial states"""

    raw: dict
    path: str = ""
    text: str = ""
    config: FieldConfig = None
    initial_points: list = field(default_factory=list)

    @property
    def name(self):
        return self.raw.get("name") or Path(self.path).stem or "scenario"

    @property
    def kind(self):
        return self.raw["kind"]

    @property
    def particles(self):
        return self.raw["particles"]

    @property
    def tolerances(self):
        t = {"analytic": ANALYTIC_TOL, "finite_difference": FINITE_DIFFERENCE_TOL, "shell_tol": SHELL_TOL}
        t.update(self.raw.get("tolerances", {}))
        return t

    @property
    def sampling(self):
        s = {"count": DEFAULT_SAMPLE_COUNT, "seed": DEFAULT_SEED}
        s.update(self.raw.get("sampling", {}))
        return s

    @property
    def integration(self):
        if "integration" not in self.raw:
            raise ScenarioError("scenario has no integration block", self.path)
        block = {"method": "rk4"}
        block.update(self.raw["integration"])
        return block

    def error(self, message, key=None):
        return ScenarioError(message, self.path, _line_of(self.text, key) if key else None)

    def charges(self, i=0):
        particle = self.particles[i]
        return particle.get("charges", [1.0] * len(self.config.fields))

    def mass(self, i=0):
        return float(self.particles[i].get("mass", 1.0))

    def build_spec(self):
        kind = self.kind
        if kind == "multiparticle_block":
            q = [self.charges(i) for i in range(len(self.particles))]
            masses = [self.mass(i) for i in range(len(self.particles))]
            return build_bracket(self.config, kind, charges=q, mass=masses)
        if kind == "monopole":
            block = self.raw.get("monopole")
            if block is None:
                raise self.error("monopole kind needs a 'monopole' block", "kind")
            monopole = MonopoleConfig.from_relation(float(block.get("q_e", 1.0)), float(block.get("alpha", 0.0)),
                                                    float(block.get("beta", 1.0)), self.config.species())
            return monopole_bracket(monopole, self.config.metric, mass=self.mass())
        polynomial = None
        if kind == "custom_polynomial":
            polynomial = polynomial_coefficients(**self.raw.get("polynomial", {}))
        return build_bracket(
            self.config,
            kind,
            charges=self.charges() if self.config.fields else None,
            mass=self.mass(),
            include_metric_terms=bool(self.raw.get("include_metric_terms", True)),
            polynomial=polynomial,
        )

    def particle_spec(self, spec, i):
        if getattr(spec, "kind", None) == "multiparticle_block":
            return spec.block(i)
        return spec


def _check_keys(scenario, section, allowed, where):
    if not isinstance(section, dict):
        raise scenario.error(f"{where} must be an object")
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise scenario.error(f"unknown field '{unknown[0]}' in {where}; allowed: {sorted(allowed)}", unknown[0])


def _number(scenario, value, where, key, cast=float):
    if isinstance(value, (bool, str)) or not isinstance(value, (int, float)):
        raise scenario.error(f"{where} must be a number, got {value!r}", key)
    if cast is int and not float(value).is_integer():
        raise scenario.error(f"{where} must be an integer, got {value!r}", key)
    return cast(value)


def _vector(scenario, value, where, key, length=None):
    if not isinstance(value, list) or (length is not None and len(value) != length):
        size = f"{length} numbers" if length is not None else "a list of numbers"
        raise scenario.error(f"{where} must be {size}, got {value!r}", key)
    return [_number(scenario, v, f"{where}[{i}]", key) for i, v in enumerate(value)]


def _coerce_values(scenario):
    """Required keys and numeric types of particles, sampling, tolerances, integration and monopole blocks"""
    raw = scenario.raw
    for i, particle in enumerate(raw["particles"]):
        where = f"particles[{i}]"
        if "x0" not in particle:
            raise scenario.error(f"{where} is missing required field 'x0'", "particles")
        particle["x0"] = _vector(scenario, particle["x0"], f"{where}.x0", "x0", 4)
        if "velocity" in particle:
            particle["velocity"] = _vector(scenario, particle["velocity"], f"{where}.velocity", "velocity", 3)
        if "mass" in particle:
            particle["mass"] = _number(scenario, particle["mass"], f"{where}.mass", "mass")
        if "charges" in particle:
            particle["charges"] = _vector(scenario, particle["charges"], f"{where}.charges", "charges")
        if particle.get("frame", "coordinate") not in ("coordinate", "orthonormal"):
            raise scenario.error(f"{where}.frame must be 'coordinate' or 'orthonormal'", "frame")

    sampling = raw.get("sampling", {})
    if "count" in sampling:
        sampling["count"] = _number(scenario, sampling["count"], "sampling.count", "count", int)
        if sampling["count"] < 1:
            raise scenario.error("sampling.count must be at least 1", "count")
    if "seed" in sampling:
        sampling["seed"] = _number(scenario, sampling["seed"], "sampling.seed", "seed", int)

    tolerances = raw.get("tolerances", {})
    for name in list(tolerances):
        tolerances[name] = _number(scenario, tolerances[name], f"tolerances.{name}", name)
        if tolerances[name] <= 0.0:
            raise scenario.error(f"tolerances.{name} must be positive", name)

    if "integration" in raw:
        block = raw["integration"]
        for name in ("dt", "tau_end"):
            if name not in block:
                raise scenario.error(f"integration is missing required field '{name}'", "integration")
            block[name] = _number(scenario, block[name], f"integration.{name}", name)
            if block[name] <= 0.0:
                raise scenario.error(f"integration.{name} must be positive", name)

    monopole = raw.get("monopole", {})
    for name in list(monopole):
        monopole[name] = _number(scenario, monopole[name], f"monopole.{name}", name)


def _build_config(scenario):
    raw = scenario.raw
    try:
        metric_block = raw.get("metric", {"preset": "minkowski"})
        metric = preset_metric(metric_block.get("preset", "minkowski"), metric_block.get("params"))
    except ArgumentError as e:
        raise scenario.error(f"metric: {e}", "metric") from e

    fields = []
    for i, block in enumerate(raw.get("fields", [])):
        try:
            fields.append(preset_field(block["preset"], block.get("params"), metric=metric,
                                       label=block.get("label", f"em{i}")))
        except KeyError as e:
            raise scenario.error(f"fields[{i}] is missing 'preset'", "fields") from e
        except ArgumentError as e:
            raise scenario.error(f"fields[{i}]: {e}", "fields") from e

    box = raw.get("domain_box")
    if box is not None:
        box = np.asarray(box, dtype=float)
        if box.shape != (4, 2) or np.any(box[:, 1] < box[:, 0]):
            raise scenario.error("domain_box must be four ordered [lo, hi] pairs", "domain_box")

    mass = potential = None
    try:
        if "mass" in raw:
            mass = preset_mass(raw["mass"]["preset"], raw["mass"].get("params"),
                               box if box is not None else metric.domain_box())
    except (KeyError, ArgumentError) as e:
        raise scenario.error(f"mass: {e}", "mass") from e
    try:
        if "potential" in raw:
            potential = preset_potential(raw["potential"]["preset"], raw["potential"].get("params"))
    except (KeyError, ArgumentError) as e:
        raise scenario.error(f"potential: {e}", "potential") from e
    return FieldConfig(metric=metric, fields=tuple(fields), mass=mass, potential=potential, box=box)


def _initial_point(scenario, i):
    particle = scenario.particles[i]
    where = f"particles[{i}]"
    try:
        x0 = np.asarray(particle["x0"], dtype=float)
        velocity = np.asarray(particle.get("velocity", [0.0, 0.0, 0.0]), dtype=float)
        scenario.config.check_domain(x0)
        metric_value = scenario.config.metric.eval(x0)
        if particle.get("frame", "coordinate") == "orthonormal":
            u0 = frame_four_velocity(velocity, metric_value)
        else:
            u0 = four_velocity(velocity, metric_value)
        return PhasePoint(x0, u0)
    except KeyError as e:
        raise scenario.error(f"{where} is missing {e}", "particles") from e
    except BracketCheckError as e:
        raise scenario.error(f"{where}: {e}", "x0") from e


def parse_scenario(text, path=""):
    """Parse and validate scenario JSON text"""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"invalid JSON: {e.msg}", path, e.lineno) from e
    scenario = Scenario(raw=raw, path=str(path), text=text)
    _check_keys(scenario, raw, _TOP_LEVEL, "scenario")

    if "kind" not in raw:
        raise scenario.error("missing required field 'kind'")
    if raw["kind"] not in KINDS:
        raise scenario.error(f"unknown kind {raw['kind']!r}; expected one of {KINDS}", "kind")
    if not raw.get("particles"):
        raise scenario.error("scenario needs at least one particle", "particles")

    for key, allowed in _SECTIONS.items():
        if key not in raw:
            continue
        entries = raw[key] if key in ("fields", "particles") else [raw[key]]
        if not isinstance(entries, list):
            raise scenario.error(f"{key} must be a list", key)
        for i, entry in enumerate(entries):
            _check_keys(scenario, entry, allowed, f"{key}[{i}]" if key in ("fields", "particles") else key)

    method = raw.get("integration", {}).get("method", "rk4")
    if method not in METHODS:
        raise scenario.error(f"unknown integration method {method!r}; expected one of {METHODS}", "method")

    _coerce_values(scenario)
    try:
        scenario.config = _build_config(scenario)
        scenario.initial_points = [_initial_point(scenario, i) for i in range(len(raw["particles"]))]
    except (KeyError, ValueError, TypeError) as e:
        if isinstance(e, ScenarioError):
            raise
        raise scenario.error(f"{type(e).__name__}: {e}") from e
    return scenario


def load_scenario(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ScenarioError(f"cannot read scenario: {e.strerror}", str(path)) from e
    scenario = parse_scenario(text, path)
    logger.info(f"📋 Loaded scenario {scenario.name} ({scenario.kind}) from {path}")
    return scenario


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _report_header(scenario, command, seed=None):
    header = {"tool": TOOL_NAME, "version": __version__, "command": command}
    if scenario is not None:
        header["scenario"] = scenario.raw
        header["tolerances"] = scenario.tolerances
    if seed is not None:
        header["seed"] = seed
    return header


def _eom_section(spec, points, tolerance):
    """Bracket-derived acceleration against the printed force law, and orthogonality"""
    hamiltonian = "variable_mass" if spec.kind == "variable_mass" else "quadratic"
    eom = derive_eom(spec, hamiltonian)
    mass = spec.mass if spec.kind != "variable_mass" else 1.0
    discrepancy = orthogonality = 0.0
    for p in points:
        accel = closed_form_accel(spec.kind, spec.config, p, spec.charges, mass)
        discrepancy = max(discrepancy, float(np.max(np.abs(eom.udot(p) - accel))))
        orthogonality = max(orthogonality, abs(orthogonality_residual(eom, p)))
    return {
        "max_discrepancy": discrepancy,
        "max_orthogonality": orthogonality,
        "pass": discrepancy <= EOM_AGREEMENT_TOL and orthogonality <= tolerance,
    }


def _check_block(scenario, spec, seed, tolerance, n_jobs, charges, mass):
    tol = scenario.tolerances
    points = sample_phase_points(spec.config, int(scenario.sampling["count"]), seed)
    jacobi = verify_jacobi(spec, points, tolerance=tolerance, seed=seed, n_jobs=n_jobs)
    section = {"jacobi": jacobi.to_dict()}
    passed = jacobi.passed

    if jacobi.cross_validation is not None:
        ok = jacobi.cross_validation <= tol["finite_difference"]
        section["cross_validation"] = {"max_discrepancy": jacobi.cross_validation, "pass": ok}
        passed = passed and ok

    if spec.kind == "curved":
        splits = [curved_fourth_identity_split(spec, p).summary() for p in points]
        section["curved_split"] = {k: max(s[k] for s in splits) for k in splits[0]}

    if spec.config.fields and spec.kind not in ("custom_polynomial", "variable_mass"):
        weights = np.asarray(charges, dtype=float) / mass
        effective = combine_fields(spec.config.fields, weights)
        residuals = [float(np.max(np.abs(maxwell_residual(effective, p.X, spec.metric).components)))
                     for p in points]
        section["maxwell_residual"] = {"max": max(residuals), "mean": float(np.mean(residuals))}

    if spec.kind != "custom_polynomial":
        section["eom"] = _eom_section(spec, points[:20], tolerance)
        passed = passed and section["eom"]["pass"]

    section["pass"] = passed
    return section, passed


def cmd_check(scenario, seed=None, tolerance=None, n_jobs=N_JOBS):
    seed = scenario.sampling["seed"] if seed is None else seed
    tolerance = scenario.tolerances["analytic"] if tolerance is None else tolerance
    spec = scenario.build_spec()
    report = _report_header(scenario, "check", seed)

    if spec.kind == "multiparticle_block":
        sections = []
        for i, block in enumerate(spec.blocks):
            section, _ = _check_block(scenario, block, seed, tolerance, n_jobs,
                                      scenario.charges(i), scenario.mass(i))
            sections.append(section)
        report["particles"] = sections
        passed = all(s["pass"] for s in sections)
    else:
        charges = spec.charges if spec.kind != "variable_mass" else []
        mass = spec.mass if spec.kind != "variable_mass" else 1.0
        section, passed = _check_block(scenario, spec, seed, tolerance, n_jobs, charges, mass)
        report.update(section)

    report["pass"] = passed
    return report, EXIT_OK if passed else EXIT_RESIDUAL


def cmd_integrate(scenario, out_csv, particle=0):
    spec = scenario.particle_spec(scenario.build_spec(), particle)
    if particle not in range(len(scenario.initial_points)):
        raise ArgumentError(f"particle {particle} does not exist (scenario has {len(scenario.initial_points)})")
    block = scenario.integration
    hamiltonian = "variable_mass" if spec.kind == "variable_mass" else "quadratic"
    eom = derive_eom(spec, hamiltonian)
    p0 = scenario.initial_points[particle]

    exit_code = EXIT_OK
    try:
        traj = integrate(eom, p0, float(block["tau_end"]), float(block["dt"]), block["method"],
                         shell_tol=scenario.tolerances["shell_tol"])
    except DomainExitError as e:
        traj = e.trajectory
        exit_code = EXIT_DOMAIN
        logger.error(f"❌ {e}")

    traj.write_csv(out_csv)
    d_h, d_norm = invariant_drift(traj)
    report = _report_header(scenario, "integrate")
    report["integration"] = {
        "particle": particle,
        "method": block["method"],
        "dt": float(block["dt"]),
        "tau_end": float(block["tau_end"]),
        "samples": len(traj),
        "tau_reached": traj.taus[-1],
        "max_abs_dH": d_h,
        "max_abs_dUU": d_norm,
        "csv": str(out_csv),
        "domain_exit": exit_code == EXIT_DOMAIN,
    }
    return report, exit_code


def cmd_canonize(scenario, seed=None):
    if scenario.kind not in ("flat_EM", "curved"):
        raise ArgumentError(f"canonize needs a flat_EM or curved scenario, got {scenario.kind}")
    potential = scenario.config.potential
    if potential is None:
        raise ArgumentError("canonize needs a 'potential' block")
    seed = scenario.sampling["seed"] if seed is None else seed
    charges = scenario.particles[0].get("charges") or [1.0]
    q_over_m = float(charges[0]) / scenario.mass()
    metric = scenario.config.metric
    sampling_config = FieldConfig(metric=metric, potential=potential, box=scenario.config.box)
    count = min(20, int(scenario.sampling["count"]))
    points = scenario.initial_points[:1] + sample_phase_points(sampling_config, count, seed)

    worst = {}
    passing_everywhere = None
    for p in points:
        if scenario.kind == "flat_EM":
            pair = canonize_flat(p, potential, q_over_m, tolerance=scenario.tolerances["analytic"])
        else:
            pair = canonize_curved(p, potential, metric, q_over_m)
        for s, r in pair.residuals.items():
            key = "+" if s > 0 else "-"
            entry = worst.setdefault(key, {"xp": 0.0, "pp": 0.0})
            for name, value in r.items():
                entry[name] = max(entry[name], value)
        passing = set(pair.passing)
        passing_everywhere = passing if passing_everywhere is None else passing_everywhere & passing

    signs = ["+" if s > 0 else "-" for s in sorted(passing_everywhere, reverse=True)]
    report = _report_header(scenario, "canonize", seed)
    report["canonization"] = {
        "case": "flat" if scenario.kind == "flat_EM" else "curved",
        "momentum": "P^mu = U^mu + s (q/m) A^mu" if scenario.kind == "flat_EM" else "P_mu = g_mu_nu U^nu + s (q/m) A_mu",
        "q_over_m": q_over_m,
        "points": len(points),
        "max_residuals": worst,
        "passing_signs": signs,
    }
    report["pass"] = bool(signs)
    return report, EXIT_OK if signs else EXIT_RESIDUAL


def cmd_count(scenario=None):
    counts = count_components_and_conditions()
    report = _report_header(scenario, "count")
    report["counts"] = counts.to_dict()
    return report, EXIT_OK


def _set_path(raw, dotted, value):
    target = raw
    parts = dotted.split(".")
    for part in parts[:-1]:
        target = target[int(part)] if isinstance(target, list) else target.setdefault(part, {})
    last = parts[-1]
    if isinstance(target, list):
        target[int(last)] = value
    else:
        target[last] = value


def cmd_sweep(scenario, param, values, mode="check", seed=None, tolerance=None, n_jobs=N_JOBS, out_dir=REPORTS_DIR):
    rows = []
    for value in values:
        raw = copy.deepcopy(scenario.raw)
        try:
            _set_path(raw, param, value)
        except (KeyError, IndexError, ValueError, TypeError) as e:
            raise ArgumentError(f"cannot set {param}: {e}") from e
        variant = parse_scenario(json.dumps(raw), scenario.path)
        row = {"value": value}
        if mode == "integrate":
            csv = Path(out_dir) / f"{scenario.name}_sweep_{len(rows)}.csv"
            report, code = cmd_integrate(variant, csv)
            row.update({k: report["integration"][k] for k in ("max_abs_dH", "max_abs_dUU", "samples")})
        else:
            report, code = cmd_check(variant, seed, tolerance, n_jobs)
            identities = report.get("jacobi", {}).get("identities", {})
            for k, v in identities.items():
                row[f"identity_{k}"] = v["max_residual"]
        row["exit_code"] = code
        rows.append(row)

    table = pd.DataFrame(rows)
    logger.info(f"Sweep over {param}:\n{table.to_string(index=False)}")
    report = _report_header(scenario, "sweep")
    report["sweep"] = {"param": param, "mode": mode, "rows": table.to_dict(orient="records")}
    # worst row decides, as for several scenarios in check
    return report, max(row["exit_code"] for row in rows)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

class ExitCodeParser(argparse.ArgumentParser):
    """Usage errors exit with 1 so that 2 stays reserved for residual failures"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = ExitCodeParser(prog=TOOL_NAME, description="Jacobi-identity checks for relativistic particle brackets")
    parser.add_argument("--version", action="version", version=f"{TOOL_NAME} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=ExitCodeParser)

    def common(p, scenario_nargs=None):
        p.add_argument("scenario", nargs=scenario_nargs)
        p.add_argument("--out", help="output path (report JSON, or CSV for integrate)")
        p.add_argument("--quiet", action="store_true", help="only log warnings and errors")
        p.add_argument("--timing", action="store_true", help="record wall-clock time in the report")

    check = sub.add_parser("check", help="verify the four basis Jacobi identities")
    common(check, "+")
    check.add_argument("--seed", type=int)
    check.add_argument("--tol", type=float)
    check.add_argument("--jobs", type=int, default=N_JOBS)

    integ = sub.add_parser("integrate", help="integrate one particle and write a trajectory CSV")
    common(integ)
    integ.add_argument("--particle", type=int, default=0)

    canon = sub.add_parser("canonize", help="Darboux canonization residuals for both sign conventions")
    common(canon)
    canon.add_argument("--seed", type=int)

    count = sub.add_parser("count", help="component and condition counts for polynomial brackets")
    common(count, "?")

    sweep = sub.add_parser("sweep", help="repeat check or integrate over values of one scenario parameter")
    common(sweep)
    sweep.add_argument("--param", required=True, help="dotted path, e.g. integration.dt or fields.0.params.k")
    sweep.add_argument("--values", required=True, help="comma-separated JSON values")
    sweep.add_argument("--mode", choices=("check", "integrate"), default="check")
    sweep.add_argument("--seed", type=int)
    sweep.add_argument("--tol", type=float)
    sweep.add_argument("--jobs", type=int, default=N_JOBS)
    return parser


def _default_out(scenario_path, command, suffix=".json"):
    stem = Path(scenario_path).stem if scenario_path else "counts"
    return REPORTS_DIR / f"{stem}_{command}{suffix}"


def write_report(report, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2) + "\n")
    return path


def _parse_values(text):
    values = []
    for item in text.split(","):
        item = item.strip()
        try:
            values.append(json.loads(item))
        except json.JSONDecodeError:
            values.append(item)
    return values


def run_check_file(path, args, out):
    started = time.perf_counter()
    scenario = load_scenario(path)
    report, code = cmd_check(scenario, args.seed, args.tol, args.jobs)
    if args.timing:
        report["wall_clock_seconds"] = time.perf_counter() - started
    write_report(report, out)
    if code == EXIT_OK:
        logger.info(f"✅ {scenario.name}: all identities pass -> {out}")
    else:
        failing = report.get("jacobi", {}).get("identities", {})
        bad = [k for k, v in failing.items() if not v["pass"]]
        logger.warning(f"❌ {scenario.name}: residual failure (identities {bad or 'see report'}) -> {out}")
    return code


def _run(args):
    started = time.perf_counter()
    if args.command == "check":
        paths = args.scenario
        if len(paths) == 1:
            outs = [Path(args.out) if args.out else _default_out(paths[0], "check")]
        else:
            out_dir = Path(args.out) if args.out else REPORTS_DIR
            outs = [out_dir / f"{Path(p).stem}_check.json" for p in paths]
        codes = Parallel(n_jobs=min(len(paths), max(1, args.jobs)), prefer="threads")(
            delayed(run_check_file)(p, args, out) for p, out in zip(paths, outs)
        )
        return max(codes)

    scenario = load_scenario(args.scenario) if args.scenario else None

    if args.command == "integrate":
        out = Path(args.out) if args.out else _default_out(args.scenario, "trajectory", ".csv")
        report, code = cmd_integrate(scenario, out, args.particle)
        summary = report["integration"]
        icon = "✅" if code == EXIT_OK else "⚠️"
        logger.info(f"{icon} {summary['samples']} samples to tau = {summary['tau_reached']:.6g}: "
                    f"max |dH| = {summary['max_abs_dH']:.3e}, max |d(U.U)| = {summary['max_abs_dUU']:.3e}")
        report_path = out.with_suffix(".json")
    elif args.command == "canonize":
        report, code = cmd_canonize(scenario, args.seed)
        report_path = Path(args.out) if args.out else _default_out(args.scenario, "canonize")
        logger.info(f"{'✅' if code == EXIT_OK else '❌'} passing sign conventions: "
                    f"{report['canonization']['passing_signs']}")
    elif args.command == "count":
        report, code = cmd_count(scenario)
        report_path = Path(args.out) if args.out else _default_out(args.scenario, "count")
        counts = report["counts"]
        logger.info(f"📊 components {counts['components']}, conditions {counts['conditions']}, "
                    f"overdetermined: {counts['overdetermined']}")
    else:
        report, code = cmd_sweep(scenario, args.param, _parse_values(args.values), args.mode,
                                 args.seed, args.tol, args.jobs)
        report_path = Path(args.out) if args.out else _default_out(args.scenario, "sweep")

    if args.timing:
        report["wall_clock_seconds"] = time.perf_counter() - started
    write_report(report, report_path)
    return code


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    setup_logging(args.quiet)

    try:
        return _run(args)
    except ScenarioError as e:
        logger.error(f"❌ Scenario error: {e}")
        return EXIT_USAGE
    except DomainExitError as e:
        logger.error(f"❌ {e}")
        return EXIT_DOMAIN
    except (BracketCheckError, OSError) as e:
        logger.error(f"❌ {type(e).__name__}: {e}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
