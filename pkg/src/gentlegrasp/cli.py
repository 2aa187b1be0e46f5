"""Grasp simulation, offline friction estimation and telemetry reports.

Exit codes: 0 success, 2 object dropped, 3 gripper limit reached,
64 usage or input errors.
"""
import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import particle_filter as pf
from .contact import mer_forces
from .exceptions import EmptyLog, ParseError, ValidationError
from .scenario import load_estimator_config, load_scenario
from .simulator import run_episode
from .tactile_log import PatchLogWriter, parse_log
from .telemetry import EXIT_CODES, SCHEMA_VERSION, Verdict, compute_report, plot_columns, read_trace, write_trace

EX_USAGE = 64

log = logging.getLogger("gentlegrasp")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


def _simulate_one(scenario_path, out, seed=None, fmt="jsonl", dump_patches=None):
    scenario = load_scenario(scenario_path)
    if seed is not None:
        scenario = scenario.with_seed(seed)
    if dump_patches:
        with open(dump_patches, "w") as fh:
            result = run_episode(scenario, patch_sink=PatchLogWriter(fh, scenario.sensor.surface))
    else:
        result = run_episode(scenario)
    if out:
        write_trace(result.trace, out, fmt)
    return result


def cmd_simulate(args):
    if args.batch:
        args.directory = args.batch
        args.jobs = 1
        return cmd_batch(args)
    if not args.scenario:
        raise ParseError("a scenario path or preset name is required")
    result = _simulate_one(args.scenario, args.out, args.seed, args.format, args.dump_patches)
    print(json.dumps(asdict(result.report)))
    if result.verdict is not Verdict.SUCCESS:
        print(f"verdict: {result.verdict.value}", file=sys.stderr)
    return EXIT_CODES[result.verdict]


def cmd_estimate(args):
    config = load_estimator_config(args.estimator_config)
    if args.seed is not None:
        config = replace(config, rng_seed=args.seed)
    try:
        text = Path(args.tactile_log).read_text()
    except OSError as e:
        raise ParseError(str(e), path=args.tactile_log)
    patches = parse_log(text, path=args.tactile_log)
    pset = pf.init(config)
    lines = [json.dumps({"type": "header", "schema_version": SCHEMA_VERSION, "source": str(args.tactile_log),
                         "rng_seed": config.rng_seed})]
    for t, patch in patches:
        mer = mer_forces(patch)
        pset, est = pf.step(pset, pf.Observation(mer), config)
        lines.append(json.dumps({"type": "estimate", "t": t, "f_mer_n": mer.normal, "f_mer_t": mer.tangential,
                                 "mu_hat": est.mean, "ci_low": est.ci_low, "ci_high": est.ci_high,
                                 "ess": est.ess, "weights_reset": pset.weights_reset}))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _fmt(v, spec):
    return "-" if v is None else format(v, spec)


def cmd_report(args):
    rows = []
    for path in args.telemetry:
        trace = read_trace(path)
        report = compute_report(trace)
        rows.append((path, report))
        print(json.dumps({"trace": str(path), **asdict(report)}))
        if args.plot_dir:
            out = Path(args.plot_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / (Path(path).stem + "_plot.csv")).write_text(plot_columns(trace))
    print()
    print(f"{'trace':<32} {'verdict':<20} {'conv_s':>8} {'cf_err':>8} {'peak_N':>8} {'slip_mm':>8}")
    for path, r in rows:
        print(f"{Path(path).name:<32} {r.verdict:<20} {_fmt(r.convergence_time_s, '8.3f')} "
              f"{_fmt(r.steady_state_cf_error, '8.4f')} {r.peak_grip_force:8.3f} {r.total_macro_slip:8.3f}")
    return 0


def _batch_job(job):
    path, out, seed, fmt = job
    result = _simulate_one(path, out, seed, fmt)
    return str(path), result.verdict.value, asdict(result.report)


def derive_seeds(base_seed, n):
    """Independent per-episode seeds from one base seed."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(base_seed).spawn(n)]


def cmd_batch(args):
    directory = Path(args.directory)
    paths = sorted(directory.glob("*.yaml"))
    if not paths:
        raise ParseError("no *.yaml scenarios found", path=directory)
    out_dir = Path(args.out or "batch_out")
    out_dir.mkdir(parents=True, exist_ok=True)
    seeds = derive_seeds(args.seed if args.seed is not None else 0, len(paths))
    suffix = ".csv" if args.format == "csv" else ".jsonl"
    jobs = [(p, out_dir / (p.stem + suffix), s, args.format) for p, s in zip(paths, seeds)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            results = list(ex.map(_batch_job, jobs))
    else:
        results = [_batch_job(j) for j in jobs]
    worst = 0
    for (path, verdict, report), seed in zip(results, seeds):
        print(json.dumps({"scenario": path, "seed": seed, **report}))
        worst = max(worst, EXIT_CODES[Verdict(verdict)])
    return worst


def build_parser():
    parser = _Parser(prog="gentlegrasp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="run one scenario (file path or preset name)")
    p.add_argument("scenario", nargs="?")
    p.add_argument("--out", help="telemetry output path")
    p.add_argument("--seed", type=int, help="override the scenario and estimator seeds")
    p.add_argument("--format", choices=["jsonl", "csv"], default="jsonl")
    p.add_argument("--dump-patches", help="write every patch the estimator consumed as a tactile log")
    p.add_argument("--batch", metavar="DIR", help="run every scenario in DIR instead")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="replay a tactile log through the friction estimator")
    p.add_argument("tactile_log")
    p.add_argument("estimator_config", help="scenario file or bare estimator YAML")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("report", help="summarize one or more telemetry traces")
    p.add_argument("telemetry", nargs="+")
    p.add_argument("--plot-dir", help="write plot-ready CSV columns per trace here")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("batch", help="run every scenario in a directory")
    p.add_argument("directory")
    p.add_argument("--out", help="output directory for traces")
    p.add_argument("--seed", type=int, help="base seed for per-episode seeds")
    p.add_argument("--format", choices=["jsonl", "csv"], default="jsonl")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_batch)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ParseError, ValidationError, EmptyLog) as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return EX_USAGE


if __name__ == "__main__":
    sys.exit(main())
