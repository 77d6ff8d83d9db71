"""Command-line entry point: ``bushfire-opf {simulate,estimate,experiment,bound}``.

Exit codes: 0 on success, 1 on a runtime failure, 2 on a usage error
(including a missing or malformed config file).
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .estimation import estimate_trajectory, residual_analysis
from .fire import random_origins, read_trajectory_csv, simulate_trajectory, write_trajectory_csv
from .harness import (ConfigError, ExperimentConfig, bound_report, data_path, load_config, run_experiment,
                      sequence_schedule, write_regret_curve, write_runtime, write_step_logs, write_summary)
from .online import ALGORITHMS

log = logging.getLogger("bushfire_opf")


class UsageError(Exception):
    pass


def _config(args) -> ExperimentConfig:
    path = Path(args.config)
    if not path.is_file() and data_path(args.config).is_file():
        path = data_path(args.config)
    cfg = load_config(path)
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if getattr(args, "horizon", None) is not None:
        over["horizon"] = args.horizon
    if over:
        cfg = replace(cfg, **over)
    return cfg


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _trajectory(cfg: ExperimentConfig, sequence: int, rep: int):
    g = cfg.grid()
    schedule = sequence_schedule(cfg, sequence, g.n_areas)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(sequence, rep)))
    origins = random_origins(g, cfg.origins, rng)
    return g, schedule, simulate_trajectory(g, origins, schedule, cfg.horizon, rng)


def cmd_simulate(args) -> int:
    cfg = _config(args)
    out = _outdir(args)
    g, schedule, states = _trajectory(cfg, args.sequence, args.rep)
    write_trajectory_csv(g, states, out / "trajectory.csv")
    _write_schedule(schedule, out / "schedule.csv")
    print(f"wrote {len(states)} periods to {out / 'trajectory.csv'}; final burning count {states[-1].count}")
    return 0


def _write_schedule(schedule, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "h", "p_plus", "p_minus"])
        for t in range(1, schedule.horizon + 1):
            p = schedule.at(t)
            for h in range(schedule.n_areas):
                w.writerow([t, h + 1, f"{p.p_plus[h]:.10g}", f"{p.p_minus[h]:.10g}"])


def cmd_estimate(args) -> int:
    cfg = _config(args)
    out = _outdir(args)
    if args.trajectory:
        g = cfg.grid()
        states = read_trajectory_csv(g, args.trajectory)
        schedule = sequence_schedule(cfg, args.sequence, g.n_areas)
        if len(states) > schedule.horizon:
            raise UsageError("trajectory is longer than the configured horizon")
    else:
        g, schedule, states = _trajectory(cfg, args.sequence, args.rep)
    estimates = estimate_trajectory(g, states)
    with open(out / "estimates.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "h", "p_plus_hat", "nu_plus", "p_minus_hat", "nu_minus"])
        for st, est in zip(states, estimates):
            for h in range(g.n_areas):
                w.writerow([st.t, h + 1] + [f"{v:.10g}" for v in (est.p_plus[h], est.nu_plus[h],
                                                                  est.p_minus[h], est.nu_minus[h])])
    qq = residual_analysis(g, states, schedule, estimates)
    for (h, name), res in sorted(qq.items()):
        with open(out / f"qq_area{h + 1}_{name}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["normal_quantile", "residual_quantile"])
            for a, b in zip(res.theoretical, res.sample):
                w.writerow([f"{a:.10g}", f"{b:.10g}"])
        print(f"area {h + 1} {name}: n={res.residuals.size} KS={res.ks_statistic:.4f} p={res.ks_pvalue:.3g}")
    return 0


def cmd_experiment(args) -> int:
    cfg = _config(args)
    if args.full_scale:
        cfg = cfg.full_scale()
    over = {}
    if args.algorithms:
        algs = tuple(a.strip() for a in args.algorithms.split(",") if a.strip())
        bad = [a for a in algs if a not in ALGORITHMS]
        if bad:
            raise UsageError(f"unknown algorithm(s) {', '.join(bad)}; choose from {', '.join(ALGORITHMS)}")
        over["algorithms"] = algs
    if args.reps is not None:
        over["reps"] = args.reps
    if args.sequences is not None:
        over["sequences"] = args.sequences
    if args.interval_policy is not None:
        over["interval_policy"] = args.interval_policy
    cfg = replace(cfg, **over)
    out = _outdir(args)

    def progress(done, total):
        if args.progress:
            print(f"\r{done}/{total} replications", end="", file=sys.stderr, flush=True)

    rec = run_experiment(cfg, threads=args.threads, log_steps=args.step_log, progress=progress)
    if args.progress:
        print(file=sys.stderr)
    write_summary(rec, out / "summary.csv", cfg.checkpoints)
    write_regret_curve(rec, out / "regret_curve.csv")
    write_runtime(rec, out / "runtime.csv")
    if args.step_log:
        write_step_logs(rec, out / "steps.csv")
    for a in rec.algorithms:
        m, s = rec.at(a, rec.horizon)
        print(f"{a:18s} R(T)={m:.6g}  se={s:.3g}")
    print(f"{rec.n} replications in {rec.runtime:.1f} s; outputs in {out}")
    return 0


def cmd_bound(args) -> int:
    cfg = _config(args)
    rep = bound_report(cfg, args.nu_plus, args.nu_minus)
    for k, v in rep.items():
        print(f"{k} = {v:.6g}" if isinstance(v, float) else f"{k} = {v}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bushfire-opf",
                                description="Online power-flow planning under stochastically spreading bushfire.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log LP incidents and progress details")
    sub = p.add_subparsers(dest="command", metavar="command")

    def common(sp, out_default):
        sp.add_argument("--config", required=True,
                        help="experiment config file (INI); packaged names such as ieee11.cfg also work")
        sp.add_argument("--seed", type=int, default=None, help="master seed, overrides the config")
        sp.add_argument("--out", default=out_default, help=f"output directory (default: {out_default})")

    def single_run(sp):
        sp.add_argument("--sequence", type=int, default=0, help="parameter sequence index (default: 0)")
        sp.add_argument("--rep", type=int, default=0, help="replication index (default: 0)")
        sp.add_argument("--horizon", type=int, default=None, help="number of periods T, overrides the config")

    sp = sub.add_parser("simulate", help="simulate one fire trajectory",
                        description="Simulate one fire trajectory; writes trajectory.csv and schedule.csv.")
    common(sp, "out")
    single_run(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("estimate", aliases=["analyze"], help="per-period MLEs and Q-Q residual analysis",
                        description="Per-period MLEs with variance proxies and normal Q-Q pairs of the "
                                    "standardised errors; writes estimates.csv and qq_area<h>_<plus|minus>.csv.")
    common(sp, "out")
    single_run(sp)
    sp.add_argument("--trajectory", default=None,
                    help="trajectory CSV to analyse instead of simulating one")
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("experiment", help="regret study of the online learners",
                        description="Regret study; writes summary.csv, regret_curve.csv, runtime.csv "
                                    "and, with --step-log, steps.csv.")
    common(sp, "out")
    sp.add_argument("--algorithms", default=None,
                    help=f"comma-separated subset of {','.join(ALGORITHMS)}")
    sp.add_argument("--reps", type=int, default=None, help="replications per parameter sequence")
    sp.add_argument("--sequences", type=int, default=None, help="number of parameter sequences")
    sp.add_argument("--interval-policy", choices=("exhaustive", "geometric"), default=None,
                    help="intervals checked by the change detector")
    sp.add_argument("--horizon", type=int, default=None, help="number of periods T, overrides the config")
    sp.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                    help="worker processes (default: available CPUs)")
    sp.add_argument("--full-scale", action="store_true",
                    help="use the config's full-scale sequence and replication counts")
    sp.add_argument("--step-log", action="store_true", help="also write the per-step log steps.csv")
    sp.add_argument("--progress", action="store_true", help="report progress on stderr")
    sp.set_defaults(func=cmd_experiment)

    sp = sub.add_parser("bound", help="regret bound constants for a config",
                        description="Print the Lipschitz constants and the regret bound for a config.")
    common(sp, "out")
    sp.add_argument("--nu-plus", type=float, default=None, help="variance cap for the spread estimates")
    sp.add_argument("--nu-minus", type=float, default=None, help="variance cap for the containment estimates")
    sp.set_defaults(func=cmd_bound)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"bushfire-opf: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"bushfire-opf: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
