from __future__ import annotations

import configparser
import logging
from dataclasses import fields, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

from .diagnostics import check_integrability_eps
from .errors import ConfigError, NSKError
from .kernel import build_kernel
from .models import (
    DiagnosticsSpec,
    Grid,
    KernelSpec,
    OutputSpec,
    PhysicsSpec,
    PressureSpec,
    RenormSpec,
    RunConfig,
    ScenarioSpec,
)
from .renormalization import build_renorm
from .scenarios import GENERATORS, MANUFACTURED, generate_initial
from .solver import VISCOSITY_CONSTRAINT
from .thermo import IsentropicLaw, build_pressure_law

logger = logging.getLogger(__name__)


def _bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _floats(raw: str) -> Tuple[float, ...]:
    return tuple(float(part) for part in raw.replace("\n", ",").split(",") if part.strip())


def _ints(raw: str) -> Tuple[int, ...]:
    return tuple(int(part) for part in raw.split(",") if part.strip())


def _optional_float(raw: str) -> Optional[float]:
    return None if raw.strip().lower() in ("", "none") else float(raw)


Converter = Callable[[str], Any]

# section -> key -> (target attribute, converter)
SCHEMA: Dict[str, Dict[str, Tuple[str, Converter]]] = {
    "grid": {"dim": ("dim", int), "n": ("n", int), "L": ("L", float)},
    "physics": {
        "mu": ("mu", float),
        "lambda": ("lam", float),
        "kappa": ("kappa", float),
        "eps_vac_factor": ("eps_vac_factor", float),
        "artificial_viscosity": ("artificial_viscosity", float),
    },
    "pressure": {
        "law": ("law", str),
        "a": ("a", float),
        "gamma": ("gamma", float),
        "R": ("R", float),
        "T_star": ("T_star", float),
        "b": ("b", float),
        "theta": ("theta", float),
        "table_rho": ("table_rho", _floats),
        "table_p": ("table_p", _floats),
    },
    "kernel": {
        "shape": ("shape", str),
        "sigma": ("sigma", float),
        "radius": ("radius", float),
        "table": ("table", _floats),
    },
    "scenario": {
        "name": ("name", str),
        "generator": ("generator", str),
        "rho_bar": ("rho_bar", float),
        "amplitude": ("amplitude", float),
        "modes": ("modes", _ints),
        "seed": ("seed", int),
        "velocity_amplitude": ("velocity_amplitude", float),
        "rho_liquid": ("rho_liquid", _optional_float),
        "rho_vapor": ("rho_vapor", _optional_float),
        "width": ("width", float),
        "geometry": ("geometry", str),
        "background": ("background", float),
        "pocket_radius": ("pocket_radius", float),
        "manufactured": ("manufactured", str),
        "t_end": ("t_end", float),
        "c_cfl": ("c_cfl", float),
        "dt": ("dt", _optional_float),
    },
    "diagnostics": {
        "eps_integrability": ("eps_integrability", _optional_float),
        "n_formal": ("n_formal", int),
        "gamma": ("gamma", _optional_float),
        "renorm_b": ("renorm_b", str),
        "renorm_eps": ("renorm_eps", float),
        "cutoff_k": ("cutoff_k", float),
        "rho_bar": ("rho_bar", _optional_float),
        "equilibrium": ("equilibrium", _bool),
        "gamma1_extension": ("gamma1_extension", _bool),
        "effective_flux": ("effective_flux", _bool),
    },
    "output": {
        "dir": ("dir", str),
        "ledger_every": ("ledger_every", int),
        "snapshot_every": ("snapshot_every", int),
        "snapshot_format": ("snapshot_format", str),
        "ledger_name": ("ledger_name", str),
    },
}

RUN_KEYS = ("t_end", "c_cfl", "dt")
REQUIRED = (("grid", "n"), ("scenario", "t_end"))


def _read_sections(text: str, source: str, errors: List[str]) -> Dict[str, Dict[str, Any]]:
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys are case sensitive (L, R, T_star)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError([f"{source}: {exc}"]) from exc

    values: Dict[str, Dict[str, Any]] = {name: {} for name in SCHEMA}
    for section in parser.sections():
        if section not in SCHEMA:
            errors.append(f"unknown section [{section}]")
            continue
        keys = SCHEMA[section]
        for key, raw in parser[section].items():
            if key not in keys:
                errors.append(f"unknown key [{section}] {key}")
                continue
            attr, convert = keys[key]
            try:
                values[section][attr] = convert(raw)
            except ValueError as exc:
                errors.append(f"[{section}] {key} = {raw!r}: {exc}")
    for section, key in REQUIRED:
        attr = SCHEMA[section][key][0]
        if attr not in values[section] and not any(e.startswith(f"[{section}] {key} ") for e in errors):
            errors.append(f"missing required key [{section}] {key}")
    return values


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Validated RunConfig, or ConfigError listing every problem found."""
    errors: List[str] = []
    values = _read_sections(text, source, errors)

    grid: Optional[Grid] = None
    if "n" in values["grid"]:
        try:
            grid = Grid(**{"dim": 1, "L": 1.0, **values["grid"]})
        except NSKError as exc:
            errors.append(f"[grid] {exc}")

    physics = PhysicsSpec(**values["physics"])
    pressure = PressureSpec(**values["pressure"])
    kernel = KernelSpec(**values["kernel"])
    run_values = {k: values["scenario"].pop(k) for k in RUN_KEYS if k in values["scenario"]}
    scenario = ScenarioSpec(**values["scenario"])
    diagnostics = DiagnosticsSpec(**values["diagnostics"])
    output = OutputSpec(**values["output"])

    _validate_physics(physics, errors)
    law = None
    try:
        law = build_pressure_law(pressure)
    except NSKError as exc:
        errors.append(f"[pressure] {exc}")
    if grid is not None:
        try:
            build_kernel(kernel, grid)
        except NSKError as exc:
            errors.append(f"[kernel] {exc}")
    _validate_run(run_values, errors)
    _validate_scenario(scenario, errors)
    _validate_diagnostics(diagnostics, pressure, law, errors)
    _validate_output(output, errors)
    if grid is not None and law is not None and scenario.generator in GENERATORS and not errors:
        try:
            generate_initial(scenario, grid, law)
        except NSKError as exc:
            errors.append(f"[scenario] {exc}")
    if errors:
        raise ConfigError(errors)

    config = RunConfig(
        grid=grid,
        physics=physics,
        pressure=pressure,
        kernel=kernel,
        scenario=scenario,
        diagnostics=diagnostics,
        output=output,
        **run_values,
    )
    logger.debug("parsed config %s: scenario %s on %s", source, scenario.name, grid)
    return config


def load_config(path: Path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror or exc}"]) from exc
    return parse_config(text, source=str(path))


def _validate_physics(spec: PhysicsSpec, errors: List[str]) -> None:
    if not (spec.mu > 0 and spec.lam + 2.0 * spec.mu > 0):
        errors.append(f"[physics] mu={spec.mu}, lambda={spec.lam} violates {VISCOSITY_CONSTRAINT}")
    if not spec.kappa >= 0:
        errors.append(f"[physics] kappa={spec.kappa} violates κ ≥ 0")
    if not spec.eps_vac_factor > 0:
        errors.append(f"[physics] eps_vac_factor={spec.eps_vac_factor} must be > 0")
    if not spec.artificial_viscosity >= 0:
        errors.append(f"[physics] artificial_viscosity={spec.artificial_viscosity} must be >= 0")


def _validate_run(run_values: Dict[str, Any], errors: List[str]) -> None:
    t_end = run_values.get("t_end")
    if t_end is not None and not t_end >= 0:
        errors.append(f"[scenario] t_end={t_end} must be >= 0")
    c_cfl = run_values.get("c_cfl", 0.5)
    if not 0 < c_cfl <= 1:
        errors.append(f"[scenario] c_cfl={c_cfl} violates 0 < c_cfl ≤ 1")
    dt = run_values.get("dt")
    if dt is not None and not dt > 0:
        errors.append(f"[scenario] dt={dt} must be > 0")


def _validate_scenario(spec: ScenarioSpec, errors: List[str]) -> None:
    if spec.generator not in GENERATORS:
        errors.append(f"[scenario] unknown generator {spec.generator!r} (expected one of {', '.join(GENERATORS)})")
    if spec.generator == "manufactured" and spec.manufactured not in MANUFACTURED:
        errors.append(f"[scenario] unknown manufactured solution {spec.manufactured!r}")
    if spec.generator == "perturbation" and not 0 <= spec.amplitude < spec.rho_bar:
        errors.append(f"[scenario] amplitude={spec.amplitude} violates perturbation amplitude < ρ̄={spec.rho_bar}")


def monitor_gamma(spec: DiagnosticsSpec, pressure: PressureSpec) -> Optional[float]:
    """Exponent of the integrability monitor: [diagnostics] gamma, else the isentropic law's own."""
    if spec.gamma is not None:
        return spec.gamma
    return pressure.gamma if pressure.law == "isentropic" else None


def _validate_diagnostics(spec: DiagnosticsSpec, pressure: PressureSpec, law, errors: List[str]) -> None:
    if spec.gamma is not None and not spec.gamma >= 1:
        errors.append(f"[diagnostics] gamma={spec.gamma} must be >= 1")
    elif spec.eps_integrability is not None:
        gamma = monitor_gamma(spec, pressure)
        if gamma is None:
            errors.append(f"[diagnostics] the integrability monitor needs gamma with the {pressure.law} law")
        else:
            problem = check_integrability_eps(spec.eps_integrability, gamma, spec.n_formal)
            if problem:
                errors.append(f"[diagnostics] {problem}")
    try:
        build_renorm(RenormSpec(kind=spec.renorm_b, eps=spec.renorm_eps, k=spec.cutoff_k), law)
    except NSKError as exc:
        errors.append(f"[diagnostics] {exc}")
    if spec.rho_bar is not None and not spec.rho_bar > 0:
        errors.append(f"[diagnostics] rho_bar={spec.rho_bar} must be > 0")
    if spec.equilibrium and pressure.gamma == 1 and not spec.gamma1_extension:
        errors.append("[diagnostics] equilibrium energy with gamma=1 needs gamma1_extension = true")
    if spec.equilibrium and law is not None and not isinstance(law, IsentropicLaw):
        errors.append("[diagnostics] equilibrium energy is defined for the isentropic law only")


def _validate_output(spec: OutputSpec, errors: List[str]) -> None:
    if spec.snapshot_format not in ("bin", "csv"):
        errors.append(f"[output] snapshot_format={spec.snapshot_format!r} (expected 'bin' or 'csv')")
    if spec.ledger_every < 1:
        errors.append(f"[output] ledger_every={spec.ledger_every} must be >= 1")
    if spec.snapshot_every < 0:
        errors.append(f"[output] snapshot_every={spec.snapshot_every} must be >= 0")


# --- Dump ---------------------------------------------------------------------


def _format(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    return str(value)


def dump_config(config: RunConfig) -> str:
    """Every field with defaults filled; parse_config(dump_config(c)) == c."""
    sources = {
        "grid": config.grid,
        "physics": config.physics,
        "pressure": config.pressure,
        "kernel": config.kernel,
        "scenario": config.scenario,
        "diagnostics": config.diagnostics,
        "output": config.output,
    }
    run_values = {"t_end": config.t_end, "c_cfl": config.c_cfl, "dt": config.dt}
    lines: List[str] = []
    for section, keys in SCHEMA.items():
        obj = sources[section]
        names = {f.name for f in fields(obj)}
        lines.append(f"[{section}]")
        for key, (attr, _) in keys.items():
            value = getattr(obj, attr) if attr in names else run_values[attr]
            lines.append(f"{key} = {_format(value)}")
        lines.append("")
    return "\n".join(lines)


def with_output_dir(config: RunConfig, directory: str) -> RunConfig:
    return replace(config, output=replace(config.output, dir=directory))
