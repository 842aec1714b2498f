"""Seeded Monte-Carlo experiments: sweeps, convergence traces, load/rate trade-off.

Every trial draws a fresh scenario whose seed depends only on
``(plan.seed, trial)``, so all sweep values and allocators of one trial see
the same random numbers. Results are written as CSV with a fixed column
set; wall-clock timings go to a separate file so that the result tables are
byte-identical across reruns.
"""
import csv
import enum
import io
import json
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .baselines import (
    BaselineKind,
    BudgetExceededError,
    centralized_allocate,
    exhaustive_allocate,
    greedy_allocate,
    round_robin_allocate,
)
from .errors import ConfigError, InfeasibleError, MudAllocError, NumericalError
from .ratemodel import RateModelParams, clamped_q_l, processing_load, sum_rate
from .scenario import ScenarioConfig, build_scenario
from .solver import ConvergenceWarning, SolverConfig, solve

__all__ = [
    "PROPOSED",
    "SweepVariable",
    "ExperimentPlan",
    "ResultTable",
    "trial_seeds",
    "run_experiment",
    "converge_trace",
    "tradeoff_report",
    "RESULT_COLUMNS",
    "TRACE_COLUMNS",
    "TRADEOFF_COLUMNS",
]

PROPOSED = "proposed"
ALLOCATORS = (PROPOSED,) + tuple(k.value for k in BaselineKind)


class SweepVariable(str, enum.Enum):
    EPSILON = "epsilon"
    Q_S = "q_s"
    J = "J"
    NONE = "none"


@dataclass(frozen=True)
class ExperimentPlan:
    """What to run.

    Parameters
    ----------
    scenario : ScenarioConfig
        Base scenario; the sweep variable overrides one field per point and
        ``rng_seed`` is replaced per trial.
    sweep : SweepVariable
        Axis being varied, or ``none`` for a single point.
    values : tuple
        Sweep values (ignored when ``sweep`` is ``none``).
    allocators : tuple of str
        Any of ``proposed``, ``greedy``, ``round_robin``, ``centralized``,
        ``exhaustive``.
    q_s : int
        Users per satellite when ``q_s`` is not the sweep variable.
    q_l : float or None
        Satellites per user; ``None`` derives it from q_s with
        :func:`mudalloc.ratemodel.clamped_q_l`.
    workers : int
        Process-pool size; 1 runs in-process.
    """

    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    sweep: SweepVariable = SweepVariable.NONE
    values: tuple = ()
    allocators: tuple = (PROPOSED, "greedy", "round_robin")
    trials: int = 50
    seed: int = 0
    output_dir: str = "results"
    q_s: int = 3
    q_l: float = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    workers: int = 1

    def __post_init__(self):
        try:
            sweep = SweepVariable(self.sweep)
        except ValueError:
            raise ConfigError(f"unknown sweep variable {self.sweep!r}") from None
        object.__setattr__(self, "sweep", sweep)
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "allocators", tuple(str(a) for a in self.allocators))
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not self.allocators:
            raise ConfigError("at least one allocator is required")
        for a in self.allocators:
            if a not in ALLOCATORS:
                raise ConfigError(f"unknown allocator {a!r}; choose from {ALLOCATORS}")
        if sweep is not SweepVariable.NONE and not self.values:
            raise ConfigError(f"sweep over {sweep.value} needs at least one value")
        K = self.scenario.num_users
        if not 1 <= self.q_s <= K:
            raise ConfigError(f"q_s must lie in [1, K={K}] (got {self.q_s})")
        if self.q_l is not None and self.q_l < 0:
            raise ConfigError("q_l must be non-negative")
        for v in self.values:
            if sweep is SweepVariable.EPSILON and not v >= 0:
                raise ConfigError(f"epsilon sweep value {v} is negative")
            if sweep is SweepVariable.Q_S and not (1 <= v <= K and float(v).is_integer()):
                raise ConfigError(f"q_s sweep value {v} must be an integer in [1, {K}]")
            if sweep is SweepVariable.J and not (v >= 1 and float(v).is_integer()):
                raise ConfigError(f"J sweep value {v} must be an integer >= 1")

    def points(self):
        """Sweep values, or a single ``None`` when nothing is swept."""
        return (None,) if self.sweep is SweepVariable.NONE else self.values

    def setting(self, value):
        """(scenario config, q_s, q_l) for one sweep point (seed not yet applied).

        ``value=None`` gives the base point without any sweep override.
        """
        cfg, q_s = self.scenario, self.q_s
        if value is None:
            pass
        elif self.sweep is SweepVariable.EPSILON:
            cfg = cfg.with_(epsilon=float(value))
        elif self.sweep is SweepVariable.J:
            cfg = cfg.with_(num_sats=int(value))
        elif self.sweep is SweepVariable.Q_S:
            q_s = int(value)
        K, J = cfg.num_users, cfg.num_sats
        q_l = float(clamped_q_l(q_s, K, J) if self.q_l is None else self.q_l)
        return cfg, q_s, q_l

    def with_(self, **changes):
        return replace(self, **changes)


def trial_seeds(seed, trial):
    """(scenario seed, allocator seed) for one trial."""
    ss = np.random.SeedSequence([seed, trial])
    scen, alloc = ss.generate_state(2, dtype=np.uint32)
    return int(scen), int(alloc)


# -- tables -------------------------------------------------------------------

RESULT_COLUMNS = (
    "kind", "sweep", "sweep_value", "trial", "allocator", "q_s", "q_l",
    "sum_rate", "sum_rate_se", "total_load", "total_load_se", "load_per_sat",
    "outer_iters", "converged", "n", "error",
)
TRACE_COLUMNS = (
    "sweep_value", "trial", "outer_iter", "lambda", "objective_start", "objective",
    "sum_rate", "max_nonintegrality", "rel_change", "inner_iters", "converged_at",
)
TRADEOFF_COLUMNS = (
    "q_s", "q_l", "load_ratio", "load_ratio_se", "rate_ratio", "rate_ratio_se",
    "proposed_rate", "centralized_rate", "proposed_load", "centralized_load", "n",
)
TIMING_COLUMNS = ("sweep_value", "trial", "allocator", "wall_time")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return ""
        return repr(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return ";".join(_fmt(x) for x in v)
    return str(v)


@dataclass
class ResultTable:
    """Ordered rows of one CSV file."""

    columns: tuple
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    timings: list = field(default_factory=list)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(r.get(c)) for c in self.columns])
        return buf.getvalue()

    def write(self, path, timings_path=None, metadata_path=None):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv(), encoding="utf-8")
        if timings_path is not None and self.timings:
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(TIMING_COLUMNS)
            for t in self.timings:
                w.writerow([_fmt(t[c]) for c in TIMING_COLUMNS])
            Path(timings_path).write_text(buf.getvalue(), encoding="utf-8")
        if metadata_path is not None:
            Path(metadata_path).write_text(
                json.dumps(self.metadata, indent=2, sort_keys=True) + "\n", encoding="utf-8"
            )
        return path

    def select(self, **match):
        return [r for r in self.rows if all(r.get(k) == v for k, v in match.items())]


def _metadata(plan, kind):
    meta = {
        "kind": kind,
        "seed": plan.seed,
        "trials": plan.trials,
        "sweep": plan.sweep.value,
        "values": list(plan.values),
        "allocators": list(plan.allocators),
        "scenario": asdict(plan.scenario),
        "q_s": plan.q_s,
        "q_l": plan.q_l,
        "q_l_rule": "explicit" if plan.q_l is not None else "q_s*K/J clamped to floor(J*q_s/K)",
        "points": [],
    }
    for v in plan.points():
        cfg, q_s, q_l = plan.setting(v)
        meta["points"].append({"sweep_value": v, "q_s": q_s, "q_l": q_l,
                               "K": cfg.num_users, "J": cfg.num_sats})
    return meta


# -- per-trial work -----------------------------------------------------------

def _error_code(exc):
    if isinstance(exc, BudgetExceededError):
        return "budget"
    if isinstance(exc, InfeasibleError):
        return "infeasible"
    if isinstance(exc, NumericalError):
        return "numerical"
    return "error"


def _run_allocator(name, scenario, q_s, q_l, solver_cfg, alloc_seed):
    """Returns (sum_rate, per-sat load, outer iterations, converged, report)."""
    params = RateModelParams.from_scenario(scenario)
    N, K, J = scenario.dims
    if name == PROPOSED:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            rep = solve(scenario, q_s, q_l, solver_cfg, params)
        return rep.rounded_sum_rate, rep.load, rep.outer_iterations, rep.converged, rep
    if name == "greedy":
        Q = greedy_allocate(scenario, q_s, q_l, rng=alloc_seed)
    elif name == "round_robin":
        Q = round_robin_allocate(scenario, q_s, q_l, rng=alloc_seed)
    elif name == "centralized":
        Q = centralized_allocate(K, J)
    else:
        Q = exhaustive_allocate(scenario, q_s, q_l, params)
    return sum_rate(scenario, params, Q), processing_load(scenario, Q), None, None, None


def _trial(args):
    plan, value, trial = args
    cfg, q_s, q_l = plan.setting(value)
    scen_seed, alloc_seed = trial_seeds(plan.seed, trial)
    scenario = build_scenario(cfg.with_(rng_seed=scen_seed))
    rows, timings = [], []
    for name in plan.allocators:
        t0 = time.perf_counter()
        row = {"kind": "trial", "sweep": plan.sweep.value, "sweep_value": value,
               "trial": trial, "allocator": name, "q_s": q_s, "q_l": q_l}
        try:
            rate, load, outer, conv, _ = _run_allocator(
                name, scenario, q_s, q_l, plan.solver, alloc_seed)
            row.update(sum_rate=float(rate), total_load=float(np.sum(load)),
                       load_per_sat=[float(x) for x in load], outer_iters=outer,
                       converged=conv, error="")
        except MudAllocError as exc:
            row["error"] = _error_code(exc)
        rows.append(row)
        timings.append({"sweep_value": value, "trial": trial, "allocator": name,
                        "wall_time": time.perf_counter() - t0})
    return rows, timings


def _map(fn, jobs, workers):
    """Order-preserving map, in a process pool when ``workers > 1``."""
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs))


def _mean_se(xs):
    xs = np.asarray(xs, dtype=float)
    if xs.size == 0:
        return float("nan"), float("nan")
    se = float(np.std(xs, ddof=1) / np.sqrt(xs.size)) if xs.size > 1 else 0.0
    return float(np.mean(xs)), se


def run_experiment(plan):
    """Run every (sweep value, trial, allocator) and append aggregate rows.

    Allocator failures are recorded in the ``error`` column of their row and
    excluded from the aggregates; the run continues.
    """
    jobs = [(plan, v, t) for v in plan.points() for t in range(plan.trials)]
    table = ResultTable(RESULT_COLUMNS, metadata=_metadata(plan, "sweep"))
    for rows, timings in _map(_trial, jobs, plan.workers):
        table.rows.extend(rows)
        table.timings.extend(timings)
    aggregates = []
    for v in plan.points():
        for name in plan.allocators:
            mine = [r for r in table.rows if r["sweep_value"] == v and r["allocator"] == name]
            ok = [r for r in mine if not r["error"]]
            rate, rate_se = _mean_se([r["sum_rate"] for r in ok])
            load, load_se = _mean_se([r["total_load"] for r in ok])
            per_sat = np.mean([r["load_per_sat"] for r in ok], axis=0) if ok else None
            outer = [r["outer_iters"] for r in ok if r["outer_iters"] is not None]
            conv = [r["converged"] for r in ok if r["converged"] is not None]
            aggregates.append({
                "kind": "aggregate", "sweep": plan.sweep.value, "sweep_value": v,
                "trial": None, "allocator": name, "q_s": mine[0]["q_s"], "q_l": mine[0]["q_l"],
                "sum_rate": rate, "sum_rate_se": rate_se, "total_load": load,
                "total_load_se": load_se,
                "load_per_sat": None if per_sat is None else [float(x) for x in per_sat],
                "outer_iters": float(np.mean(outer)) if outer else None,
                "converged": float(np.mean(conv)) if conv else None,
                "n": len(ok), "error": "" if ok else "all_failed",
            })
    table.rows.extend(aggregates)
    return table


def _trace_trial(args):
    plan, value, trial = args
    cfg, q_s, q_l = plan.setting(value)
    scen_seed, _ = trial_seeds(plan.seed, trial)
    scenario = build_scenario(cfg.with_(rng_seed=scen_seed))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        rep = solve(scenario, q_s, q_l, plan.solver)
    return [
        {"sweep_value": value, "trial": trial, "outer_iter": r.outer, "lambda": r.lam,
         "objective_start": r.objective_start, "objective": r.objective,
         "sum_rate": r.sum_rate, "max_nonintegrality": r.max_nonintegrality,
         "rel_change": r.rel_change, "inner_iters": r.inner_iterations,
         "converged_at": rep.converged_at}
        for r in rep.trace
    ]


def converge_trace(plan):
    """Per-(trial, outer iteration) objective trace of the proposed solver.

    ``objective`` is the penalized relaxed objective at the penalty weight
    of that iteration; ``objective_start`` is the same quantity at the
    iterate entering it. ``converged_at`` is -1 for runs that hit the
    outer-iteration cap.
    """
    if PROPOSED not in plan.allocators:
        raise ConfigError("converge needs the proposed allocator in the plan")
    jobs = [(plan, v, t) for v in plan.points() for t in range(plan.trials)]
    table = ResultTable(TRACE_COLUMNS, metadata=_metadata(plan, "converge"))
    for rows in _map(_trace_trial, jobs, plan.workers):
        table.rows.extend(rows)
    return table


def _tradeoff_trial(args):
    plan, value, trial = args
    cfg, q_s, q_l = plan.setting(value)
    scen_seed, _ = trial_seeds(plan.seed, trial)
    scenario = build_scenario(cfg.with_(rng_seed=scen_seed))
    params = RateModelParams.from_scenario(scenario)
    N, K, J = scenario.dims
    C = centralized_allocate(K, J)
    c_rate, c_load = sum_rate(scenario, params, C), float(np.sum(processing_load(scenario, C)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        rep = solve(scenario, q_s, q_l, plan.solver, params)
    return q_s, q_l, rep.rounded_sum_rate, float(np.sum(rep.load)), c_rate, c_load


def tradeoff_report(plan):
    """Proposed load and sum-rate relative to the centralized receiver, per q_s.

    Ratios are computed per trial and then averaged. With no q_s sweep the
    plan's single q_s is reported.
    """
    if plan.sweep not in (SweepVariable.Q_S, SweepVariable.NONE):
        raise ConfigError("tradeoff sweeps q_s; set sweep = q_s or none")
    jobs = [(plan, v, t) for v in plan.points() for t in range(plan.trials)]
    results = _map(_tradeoff_trial, jobs, plan.workers)
    meta = _metadata(plan, "tradeoff")
    meta["allocators"] = [PROPOSED, "centralized"]
    table = ResultTable(TRADEOFF_COLUMNS, metadata=meta)
    n = plan.trials
    for i, _ in enumerate(plan.points()):
        chunk = results[i * n:(i + 1) * n]
        q_s, q_l = chunk[0][0], chunk[0][1]
        a = np.array([r[2:] for r in chunk], dtype=float)
        load_ratio, load_se = _mean_se(a[:, 1] / a[:, 3])
        rate_ratio, rate_se = _mean_se(a[:, 0] / a[:, 2])
        table.rows.append({
            "q_s": q_s, "q_l": q_l, "load_ratio": load_ratio, "load_ratio_se": load_se,
            "rate_ratio": rate_ratio, "rate_ratio_se": rate_se,
            "proposed_rate": float(a[:, 0].mean()), "centralized_rate": float(a[:, 2].mean()),
            "proposed_load": float(a[:, 1].mean()), "centralized_load": float(a[:, 3].mean()),
            "n": n,
        })
    return table
