"""INI configuration files.

Three optional sections map onto the configuration dataclasses::

    [scenario]      ScenarioConfig fields (num_users, epsilon, rng_seed, ...)
    [experiment]    sweep, values, allocators, trials, seed, output_dir,
                    q_s, q_l, workers
    [solver]        SolverConfig fields; projected-gradient settings use a
                    ``pga_`` prefix (pga_max_iters, pga_rel_tol, ...)

Lists are comma separated. An empty ``q_l`` or ``lambda_init`` means
"derive automatically".
"""
import configparser
from dataclasses import fields
from pathlib import Path

from .errors import ConfigError
from .harness import ExperimentPlan
from .polytope import PGAConfig
from .scenario import ScenarioConfig
from .solver import SolverConfig

__all__ = ["load_plan", "parse_plan", "plan_to_ini"]

_EXPERIMENT_KEYS = {
    "sweep": str, "values": list, "allocators": list, "trials": int, "seed": int,
    "output_dir": str, "q_s": int, "q_l": float, "workers": int,
}
_OPTIONAL = {"q_l", "lambda_init"}


def _coerce(key, raw, typ):
    raw = raw.strip()
    if raw == "" and key in _OPTIONAL:
        return None
    try:
        if typ is bool:
            return {"1": True, "true": True, "yes": True, "on": True,
                    "0": False, "false": False, "no": False, "off": False}[raw.lower()]
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw
    except (KeyError, ValueError):
        raise ConfigError(f"{key}: cannot read {raw!r} as {typ.__name__}") from None


def _section(parser, name, types):
    if not parser.has_section(name):
        return {}
    out = {}
    for key, raw in parser.items(name):
        if key not in types:
            raise ConfigError(f"[{name}] unknown key {key!r}")
        out[key] = _coerce(key, raw, types[key])
    return out


def _sweep_values(sweep, raw):
    items = [v.strip() for v in raw.split(",") if v.strip()]
    typ = float if sweep == "epsilon" else int
    return tuple(_coerce("values", v, typ) for v in items)


def parse_plan(text):
    """Build an :class:`ExperimentPlan` from INI text."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keys are case sensitive ("J")
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    unknown = set(parser.sections()) - {"scenario", "experiment", "solver"}
    if unknown:
        raise ConfigError(f"unknown section(s): {sorted(unknown)}")

    scenario = ScenarioConfig(**_section(parser, "scenario", ScenarioConfig.field_types()))

    solver_types = {f.name: f.type for f in fields(SolverConfig) if f.name != "pga"}
    solver_types["lambda_init"] = float
    solver_types.update({f"pga_{f.name}": f.type for f in fields(PGAConfig)})
    solver_kw = _section(parser, "solver", solver_types)
    pga_kw = {k[4:]: solver_kw.pop(k) for k in list(solver_kw) if k.startswith("pga_")}
    try:
        solver = SolverConfig(pga=PGAConfig(**pga_kw), **solver_kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    exp = {}
    if parser.has_section("experiment"):
        for key, raw in parser.items("experiment"):
            if key not in _EXPERIMENT_KEYS:
                raise ConfigError(f"[experiment] unknown key {key!r}")
            if key not in ("values", "allocators"):
                exp[key] = _coerce(key, raw, _EXPERIMENT_KEYS[key])
        sweep = exp.get("sweep", "none")
        if parser.has_option("experiment", "values"):
            exp["values"] = _sweep_values(sweep, parser.get("experiment", "values"))
        if parser.has_option("experiment", "allocators"):
            raw = parser.get("experiment", "allocators")
            exp["allocators"] = tuple(a.strip() for a in raw.split(",") if a.strip())
    return ExperimentPlan(scenario=scenario, solver=solver, **exp)


def load_plan(path):
    """Read an INI file; a missing file is a configuration error."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_plan(text)


def plan_to_ini(plan):
    """Inverse of :func:`parse_plan` (defaults included)."""
    lines = ["[scenario]"]
    for f in fields(ScenarioConfig):
        lines.append(f"{f.name} = {getattr(plan.scenario, f.name)}")
    lines.append("")
    lines.append("[experiment]")
    lines.append(f"sweep = {plan.sweep.value}")
    lines.append("values = " + ", ".join(str(v) for v in plan.values))
    lines.append("allocators = " + ", ".join(plan.allocators))
    for key in ("trials", "seed", "output_dir", "q_s", "workers"):
        lines.append(f"{key} = {getattr(plan, key)}")
    lines.append("q_l = " + ("" if plan.q_l is None else str(plan.q_l)))
    lines.append("")
    lines.append("[solver]")
    for f in fields(SolverConfig):
        if f.name == "pga":
            continue
        v = getattr(plan.solver, f.name)
        lines.append(f"{f.name} = {'' if v is None else v}")
    for f in fields(PGAConfig):
        lines.append(f"pga_{f.name} = {getattr(plan.solver.pga, f.name)}")
    return "\n".join(lines) + "\n"
