"""Settling times and seeded Monte-Carlo batches."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .._types import PlanarVector, Pose, SourceSeekError, ValidationError
from ..field import FanPolynomial, FieldSpec
from ..sensors import SensorArray
from ..vehicle import Termination, Trajectory, simulate
from .config import ConfigError, ExperimentConfig, Group

__all__ = [
    "SettlingResult",
    "GroupSummary",
    "BatchReport",
    "settling_time",
    "sample_initial_conditions",
    "trial_rng",
    "trial_inits",
    "run_trial",
    "monte_carlo",
    "summarize",
]

MAX_REJECTIONS = 1000


@dataclass(frozen=True)
class SettlingResult:
    group: str
    trial: int
    init: Pose
    ts: Optional[float]
    final_distance: float
    termination: str
    error: Optional[str] = None


@dataclass(frozen=True)
class GroupSummary:
    group: str
    n: int
    failures: int
    min_ts: Optional[float]
    q1_ts: Optional[float]
    median_ts: Optional[float]
    q3_ts: Optional[float]
    max_ts: Optional[float]


@dataclass
class BatchReport:
    results: list[SettlingResult]
    summaries: list[GroupSummary]

    def summary(self, group: str) -> GroupSummary:
        for s in self.summaries:
            if s.group == group:
                return s
        raise KeyError(group)


def settling_time(traj: Trajectory, source: PlanarVector, fraction: float = 0.2) -> Optional[float]:
    """First recorded time with ``|z - source| <= fraction * |z(0) - source|``."""
    if not 0 < fraction < 1:
        raise ValidationError(f"fraction must be in (0, 1), got {fraction}")
    if len(traj) == 0:
        raise ValidationError("empty trajectory")
    d = traj.distances(source)
    hit = np.flatnonzero(d <= fraction * d[0])
    return float(traj.t[hit[0]]) if hit.size else None


def trial_rng(seed: int, trial: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for one trial; independent of execution order."""
    return np.random.Generator(np.random.Philox([seed, trial, stream]))


def sample_initial_conditions(
    rng: np.random.Generator,
    z1: tuple[float, float],
    z2: tuple[float, float],
    theta: tuple[float, float] = (0.0, 2.0 * math.pi),
    field: Optional[FieldSpec] = None,
) -> Pose:
    """Uniform pose in the box, resampled until it lies in ``field``'s domain."""
    for lo, hi in (z1, z2, theta):
        if not lo <= hi:
            raise ValidationError(f"empty range ({lo}, {hi})")
    for _ in range(MAX_REJECTIONS):
        p = Pose(float(rng.uniform(*z1)), float(rng.uniform(*z2)), float(rng.uniform(*theta)))
        if field is None:
            return p
        try:
            field.value(p.position)
        except SourceSeekError:
            continue
        return p
    raise ConfigError(f"no in-domain initial condition after {MAX_REJECTIONS} draws; check the init box")


def trial_inits(cfg: ExperimentConfig) -> list[Pose]:
    """One initial pose per trial, shared by every group.

    Explicit poses are cycled; otherwise each trial samples from its own
    substream.
    """
    if cfg.init.explicit:
        poses = cfg.init.poses
        return [poses[i % len(poses)] for i in range(cfg.trials)]
    field = cfg.groups[0].field
    return [
        sample_initial_conditions(trial_rng(cfg.seed, i), cfg.init.z1, cfg.init.z2, cfg.init.theta, field)
        for i in range(cfg.trials)
    ]


def run_trial(
    group: Group,
    init: Pose,
    dt: float,
    t_end: float,
    fraction: float,
    seed: int,
    trial: int,
    backend: Optional[str] = None,
) -> SettlingResult:
    """Simulate until settled or ``t_end``.

    On the fan, reaching the exclusion radius counts as arriving: the fan
    body is the source.
    """
    source = group.field.source
    d0 = (init.position - source).norm()
    gsrc = "analytic" if group.sensor is None else SensorArray(group.sensor, seed=(seed, trial, 1))
    try:
        traj = simulate(
            group.field, group.controller, init, dt, t_end, gsrc,
            record_every=max(1, int(round(t_end / dt))),
            stop_within=(source, fraction * d0),
        )
    except SourceSeekError as e:
        return SettlingResult(group.name, trial, init, None, math.nan, "error", str(e))
    final = (traj.final_pose.position - source).norm()
    ts = None
    if traj.termination == Termination.SETTLED:
        ts = float(traj.t[-1])
    elif traj.termination == Termination.DOMAIN_EXIT and isinstance(group.field, FanPolynomial):
        ts = traj.steps * dt
    return SettlingResult(group.name, trial, init, ts, final, traj.termination, traj.error)


def _run_trial_args(args):
    return run_trial(*args)


def summarize(group: str, results: Sequence[SettlingResult]) -> GroupSummary:
    """Quartiles (linear interpolation, inclusive) over the trials that settled."""
    ts = np.array([r.ts for r in results if r.ts is not None], dtype=float)
    failures = len(results) - ts.size
    if ts.size == 0:
        return GroupSummary(group, len(results), failures, None, None, None, None, None)
    q = np.percentile(ts, [0, 25, 50, 75, 100], method="linear")
    return GroupSummary(group, len(results), failures, *(float(v) for v in q))


def monte_carlo(cfg: ExperimentConfig, backend: Optional[str] = None) -> BatchReport:
    inits = trial_inits(cfg)
    tasks = []
    for g in cfg.groups:
        dt = cfg.step_for(g, batch=True)
        for i, p in enumerate(inits):
            tasks.append((g, p, dt, cfg.t_end, cfg.settle_fraction, cfg.seed, i, backend))
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_trial_args, tasks, chunksize=max(1, len(tasks) // (4 * cfg.workers))))
    else:
        results = [run_trial(*t) for t in tasks]
    results.sort(key=lambda r: ([g.name for g in cfg.groups].index(r.group), r.trial))
    summaries = [summarize(g.name, [r for r in results if r.group == g.name]) for g in cfg.groups]
    return BatchReport(results, summaries)
