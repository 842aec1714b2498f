"""Command-line entry point: ``mudalloc <command> ...``.

Exit codes: 0 success, 2 configuration error, 3 infeasible constraints,
4 numerical failure.
"""
import argparse
import csv
import io
import json
import logging
import sys
import warnings
from pathlib import Path

from . import __version__
from .config import load_plan
from .errors import ConfigError, MudAllocError
from .harness import converge_trace, run_experiment, tradeoff_report
from .scenario import INTERFERENCE_VARIANTS, build_scenario
from .solver import solve

log = logging.getLogger("mudalloc")


def _common(p, out_help):
    p.add_argument("config", help="INI configuration file")
    p.add_argument("--seed", type=int, help="override the seed in the config")
    p.add_argument("--trials", type=int, help="override the number of trials")
    p.add_argument("--out", help=out_help)
    p.add_argument("--interference-variant", choices=INTERFERENCE_VARIANTS,
                   help="residual-interference model")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mudalloc",
        description="Satellite-user matching for distributed multi-user detection.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    _common(sub.add_parser("solve", help="solve one scenario, print a JSON report"),
            "write the JSON report here instead of stdout")
    _common(sub.add_parser("sweep", help="Monte-Carlo sweep of all allocators"),
            "output directory (default: output_dir from the config)")
    _common(sub.add_parser("converge", help="per-iteration objective traces"),
            "output directory")
    _common(sub.add_parser("tradeoff", help="load and rate relative to centralized, per q_s"),
            "output directory")

    scen = sub.add_parser("scenario", help="scenario utilities")
    scen_sub = scen.add_subparsers(dest="action", required=True)
    _common(scen_sub.add_parser("dump", help="write channels.csv and signatures.csv"),
            "output directory")
    return parser


def _plan(args):
    plan = load_plan(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.interference_variant is not None:
        changes["scenario"] = plan.scenario.with_(interference_variant=args.interference_variant)
    return plan.with_(**changes) if changes else plan


def _out_dir(args, plan):
    return Path(args.out if args.out else plan.output_dir)


def _single_scenario(args, plan):
    cfg = plan.scenario
    if args.seed is not None:
        cfg = cfg.with_(rng_seed=args.seed)
    return build_scenario(cfg)


def cmd_solve(args):
    plan = _plan(args)
    scenario = _single_scenario(args, plan)
    _, q_s, q_l = plan.setting(None)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        report = solve(scenario, q_s, q_l, plan.solver)
    for w in caught:
        log.warning("%s", w.message)
    text = report.to_json(indent=2)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(f"sum-rate {report.rounded_sum_rate:.6g} bit/s/Hz, total load "
              f"{report.load.sum():.6g}, outer iterations {report.outer_iterations}")
    else:
        print(text)


def cmd_sweep(args):
    plan = _plan(args)
    out = _out_dir(args, plan)
    table = run_experiment(plan)
    table.write(out / "results.csv", out / "timings.csv", out / "metadata.json")
    print(out / "results.csv")


def cmd_converge(args):
    plan = _plan(args)
    out = _out_dir(args, plan)
    table = converge_trace(plan)
    table.write(out / "trace.csv", metadata_path=out / "trace_metadata.json")
    print(out / "trace.csv")


def cmd_tradeoff(args):
    plan = _plan(args)
    out = _out_dir(args, plan)
    table = tradeoff_report(plan)
    table.write(out / "tradeoff.csv", metadata_path=out / "tradeoff_metadata.json")
    print(out / "tradeoff.csv")


def _write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")


def cmd_scenario_dump(args):
    plan = _plan(args)
    scenario = _single_scenario(args, plan)
    out = _out_dir(args, plan)
    out.mkdir(parents=True, exist_ok=True)
    h = scenario.channel.h
    N, K, J = scenario.dims
    _write_csv(out / "channels.csv", ("n", "k", "j", "re", "im"),
               ((n, k, j, repr(float(h[n, k, j].real)), repr(float(h[n, k, j].imag)))
                for n in range(N) for k in range(K) for j in range(J)))
    s = scenario.signatures.s
    _write_csv(out / "signatures.csv", ("n", "k", "re", "im"),
               ((n, k, repr(float(s[n, k].real)), repr(float(s[n, k].imag)))
                for n in range(N) for k in range(K)))
    info = {"N": N, "K": K, "J": J, "sigma2": scenario.sigma2,
            "rng_seed": scenario.config.rng_seed}
    (out / "scenario.json").write_text(json.dumps(info, indent=2) + "\n", encoding="utf-8")
    print(out)


COMMANDS = {
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "converge": cmd_converge,
    "tradeoff": cmd_tradeoff,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    handler = cmd_scenario_dump if args.command == "scenario" else COMMANDS[args.command]
    try:
        handler(args)
    except MudAllocError as exc:
        print(f"mudalloc: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:  # invalid values rejected by dataclass validation
        print(f"mudalloc: {exc}", file=sys.stderr)
        return ConfigError.exit_code
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
