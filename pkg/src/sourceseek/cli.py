"""Command-line entry point: ``sourceseek {simulate,montecarlo,avgcheck,gradcheck}``.

Exit status: 0 on success, 2 for configuration errors, 3 for runtime or
field-domain errors.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ._types import PlanarVector, SourceSeekError
from .averaging import AveragingReport, compare_full_vs_averaged, moving_average
from .controller_esc import EscController
from .field import FIELD_NAMES, FanPolynomial, Quadratic, field_from_name, finite_diff_gradient
from .harness.config import ConfigError, ExperimentConfig, load_config
from .harness.experiments import SettlingResult, monte_carlo, settling_time, summarize, trial_inits
from .harness.output import dumps_json, staged, write_csv
from .sensors import SensorArray
from .vehicle import Termination, simulate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

BOXPLOT_HEADER = ("group", "min", "q1", "median", "q3", "max")
TRIALS_HEADER = ("group", "trial", "z1", "z2", "theta", "ts", "final_distance", "termination")
AVG_HEADER = AveragingReport.COLUMNS

# Sampling domains for gradcheck.
_GRADCHECK_BOX = {"quadratic": 5.0, "nonquad_a": 1.0, "nonquad_b": 1.0}
_FAN_OUTER = 5.0


def _stats(summaries) -> dict:
    """Summary statistics: scalars for a single group, name-keyed maps otherwise."""
    keys = ("median_ts", "q1_ts", "q3_ts", "failures", "min_ts", "max_ts")
    if len(summaries) == 1:
        return {k: getattr(summaries[0], k) for k in keys}
    return {k: {s.group: getattr(s, k) for s in summaries} for k in keys}


def _result_row(r: SettlingResult) -> dict:
    return {
        "group": r.group,
        "trial": r.trial,
        "init": [r.init.z1, r.init.z2, r.init.theta],
        "ts": r.ts,
        "final_distance": r.final_distance,
        "termination": r.termination,
        "error": r.error,
    }


def cmd_simulate(cfg: ExperimentConfig, traj_out: Optional[Path]) -> dict:
    inits = list(cfg.init.poses) if cfg.init.explicit else trial_inits(cfg)
    want_traj = traj_out is not None or cfg.write_trajectories
    traj_dir = traj_out if traj_out is not None else cfg.output_dir
    results = []
    runs = []
    with staged(cfg.output_dir) as out, staged(traj_dir) as tout:
        for g in cfg.groups:
            dt = cfg.step_for(g, batch=False)
            for i, pose in enumerate(inits):
                gsrc = "analytic" if g.sensor is None else SensorArray(g.sensor, seed=(cfg.seed, i, 1))
                traj = simulate(g.field, g.controller, pose, dt, cfg.t_end, gsrc, record_every=cfg.record_every)
                src = g.field.source
                ts = settling_time(traj, src, cfg.settle_fraction) if len(traj) else None
                if ts is None and traj.termination == Termination.DOMAIN_EXIT and isinstance(g.field, FanPolynomial):
                    ts = traj.steps * dt
                final = (traj.final_pose.position - src).norm() if len(traj) else math.nan
                r = SettlingResult(g.name, i, pose, ts, final, traj.termination, traj.error)
                results.append(r)
                row = _result_row(r)
                row["initial_distance"] = (pose.position - src).norm()
                row["t_final"] = traj.steps * dt
                if isinstance(g.controller, EscController) and cfg.record_every == 1 and len(traj) * dt * g.controller.params.omega0 > 2 * math.pi:
                    avg = moving_average(traj, g.controller.params.omega0)
                    row["final_distance_averaged"] = float(np.hypot(*(avg.positions[-1] - (src.x, src.y))))
                runs.append(row)
                if want_traj:
                    traj.to_csv(tout.file(f"{g.name}_{i}.csv"))
        summaries = [summarize(g.name, [r for r in results if r.group == g.name]) for g in cfg.groups]
        summary = {"config_hash": cfg.config_hash(), "runs": runs, **_stats(summaries)}
        out.file("summary.json").write_text(dumps_json(summary))
        write_csv(out.file("boxplot.csv"), BOXPLOT_HEADER, _box_rows(summaries))
    return summary


def _box_rows(summaries):
    return [(s.group, s.min_ts, s.q1_ts, s.median_ts, s.q3_ts, s.max_ts) for s in summaries]


def cmd_montecarlo(cfg: ExperimentConfig) -> dict:
    with staged(cfg.output_dir) as out:
        report = monte_carlo(cfg)
        summary = {
            "config_hash": cfg.config_hash(),
            "seed": cfg.seed,
            "trials": cfg.trials,
            "groups": [g.name for g in cfg.groups],
            **_stats(report.summaries),
        }
        out.file("summary.json").write_text(dumps_json(summary))
        write_csv(out.file("boxplot.csv"), BOXPLOT_HEADER, _box_rows(report.summaries))
        write_csv(
            out.file("trials.csv"),
            TRIALS_HEADER,
            [(r.group, r.trial, r.init.z1, r.init.z2, r.init.theta, r.ts, r.final_distance, r.termination)
             for r in report.results],
        )
    return summary


def cmd_avgcheck(cfg: ExperimentConfig) -> dict:
    if not cfg.init.explicit or len(cfg.init.poses) != 1:
        raise ConfigError("avgcheck needs exactly one explicit initial pose in [init] poses")
    pose = cfg.init.poses[0]
    sup = {}
    with staged(cfg.output_dir) as out:
        for g in cfg.groups:
            if not isinstance(g.controller, EscController) or not isinstance(g.field, Quadratic):
                raise ConfigError(f"group {g.name!r}: avgcheck needs the esc controller on a quadratic field")
            rep = compare_full_vs_averaged(
                g.field, g.controller.params, pose, cfg.avg_horizon,
                dt=cfg.step_for(g, batch=False), window_periods=cfg.avg_window, dtau=cfg.avg_dtau,
            )
            name = "avgcheck.csv" if len(cfg.groups) == 1 else f"avgcheck_{g.name}.csv"
            write_csv(out.file(name), AVG_HEADER, (tuple(float(v) for v in row) for row in rep.table))
            sup[g.name] = rep.sup_error
        summary = {
            "config_hash": cfg.config_hash(),
            "sup_error": next(iter(sup.values())) if len(sup) == 1 else sup,
            "horizon": cfg.avg_horizon,
            "window_periods": cfg.avg_window,
        }
        out.file("avgcheck.json").write_text(dumps_json(summary))
    return summary


def gradcheck(name: str, points: int, seed: int = 0, h: float = 1e-5) -> dict:
    """Analytic against central-difference gradients at random in-domain points.

    The error is ``|g - fd| / max(|g|, 1)``: relative where the gradient is
    large, absolute near critical points.
    """
    field = field_from_name(name)
    rng = np.random.Generator(np.random.Philox(seed))
    worst = 0.0
    worst_at = None
    for _ in range(points):
        if isinstance(field, FanPolynomial):
            d = rng.uniform(field.d_min + 2 * h, _FAN_OUTER)
            phi = rng.uniform(0, 2 * math.pi)
            p = PlanarVector(field.center.x + d * math.cos(phi), field.center.y + d * math.sin(phi))
        else:
            b = _GRADCHECK_BOX[name]
            p = PlanarVector(rng.uniform(-b, b), rng.uniform(-b, b))
        g = field.gradient(p)
        fd = finite_diff_gradient(field, p, h)
        err = (g - fd).norm() / max(g.norm(), 1.0)
        if err > worst:
            worst, worst_at = err, [p.x, p.y]
    return {"field": name, "points": points, "max_rel_error": worst, "worst_point": worst_at, "tolerance": 1e-6,
            "passed": worst < 1e-6}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sourceseek", description="Source-seeking simulations for unicycle robots.")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("simulate", help="run the configured initial poses and write trajectories")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--traj-out", type=Path, default=None, help="directory for per-run trajectory CSVs")
    p = sub.add_parser("montecarlo", help="seeded batch of random initial conditions")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p = sub.add_parser("avgcheck", help="compare the ESC loop with its averaged model")
    p.add_argument("--config", required=True, type=Path)
    p = sub.add_parser("gradcheck", help="check analytic gradients against finite differences")
    p.add_argument("--field", required=True, choices=FIELD_NAMES)
    p.add_argument("--points", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gradcheck":
            if args.points < 1:
                raise ConfigError(f"--points must be >= 1, got {args.points}")
            res = gradcheck(args.field, args.points, args.seed)
            sys.stdout.write(dumps_json(res))
            return EXIT_OK if res["passed"] else EXIT_RUNTIME
        cfg = load_config(args.config)
        if args.command == "simulate":
            summary = cmd_simulate(cfg, args.traj_out)
        elif args.command == "montecarlo":
            summary = cmd_montecarlo(cfg.with_overrides(args.trials, args.seed))
        else:
            summary = cmd_avgcheck(cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (SourceSeekError, ArithmeticError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    sys.stdout.write(dumps_json(summary))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
