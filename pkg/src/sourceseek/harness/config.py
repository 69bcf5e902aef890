"""Experiment configuration: a TOML file with fixed sections.

::

    [field]      name = "quadratic" | "nonquad_a" | "nonquad_b" | "fan", plus field parameters
    [control]    controller = "ga" | "esc", plus gains
    [sensor]     enabled, gain, r0, adc_bits (0 disables), noise_std, baseline, eps
    [init]       poses = [[z1, z2, theta_deg], ...]  or  z1 = [lo, hi], z2 = [lo, hi], theta_deg = [lo, hi]
    [run]        dt, t_end, trials, seed, settle_fraction, record_every, workers
    [output]     dir, trajectories
    [avgcheck]   horizon, window, dtau
    [[groups]]   name, and optional field / control / sensor override tables

Errors carry the offending line when it can be located.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import re
import sys
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Any, Optional, Union

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .._types import Pose, SourceSeekError, ValidationError
from ..controller_esc import MAX_PHASE_STEP, EscController, EscParams
from ..controller_ga import GaController, GaGains
from ..field import FIELD_NAMES, FanPolynomial, FieldSpec, field_from_name
from ..sensors import SensorCalibration

__all__ = ["ConfigError", "ExperimentConfig", "Group", "InitSpec", "load_config", "parse_config"]

SIM_DT = 1e-3
BATCH_DT = 1e-2

_SECTIONS = {"field", "control", "sensor", "init", "run", "output", "avgcheck", "groups"}
_FIELD_KEYS = {
    "quadratic": {"j_star", "c1", "c2", "center"},
    "nonquad_a": set(),
    "nonquad_b": set(),
    "fan": {"coeffs", "r_f", "center", "d_min"},
}
_GA_KEYS = {"k1", "k2"}
_ESC_KEYS = {"a", "omega0", "h", "c_z1", "c_z2", "k1", "k2"}
_SENSOR_KEYS = {"enabled", "gain", "r0", "adc_bits", "noise_std", "baseline", "eps"}
_INIT_KEYS = {"poses", "z1", "z2", "theta_deg"}
_RUN_KEYS = {"dt", "t_end", "trials", "seed", "settle_fraction", "record_every", "workers"}
_OUTPUT_KEYS = {"dir", "trajectories"}
_AVG_KEYS = {"horizon", "window", "dtau"}
_GROUP_KEYS = {"name", "field", "control", "sensor"}

# Default sampling boxes per field (half-width); the fan uses an annulus.
_DEFAULT_BOX = {"quadratic": 5.0, "nonquad_a": 1.0, "nonquad_b": 1.0, "fan": 3.0}


class ConfigError(ValidationError):
    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None):
        self.detail = message
        self.line = line
        self.path = path
        where = ""
        if path:
            where = f"{path}:{line}: " if line else f"{path}: "
        elif line:
            where = f"line {line}: "
        super().__init__(where + message)


@dataclass(frozen=True)
class InitSpec:
    poses: tuple[Pose, ...] = ()
    z1: tuple[float, float] = (-5.0, 5.0)
    z2: tuple[float, float] = (-5.0, 5.0)
    theta: tuple[float, float] = (0.0, 2.0 * math.pi)

    @property
    def explicit(self) -> bool:
        return bool(self.poses)


@dataclass(frozen=True)
class Group:
    name: str
    field_name: str
    field: FieldSpec
    controller: Union[GaController, EscController]
    sensor: Optional[SensorCalibration]


@dataclass
class ExperimentConfig:
    groups: list[Group]
    init: InitSpec
    dt: Optional[float]
    t_end: float
    trials: int = 1
    seed: int = 0
    settle_fraction: float = 0.2
    record_every: int = 1
    workers: int = 1
    output_dir: Path = Path("out")
    write_trajectories: bool = False
    avg_horizon: float = 60.0
    avg_window: int = 1
    avg_dtau: float = 0.01
    raw: dict = dc_field(default_factory=dict)
    source_path: Optional[str] = None

    def step_for(self, group: Group, batch: bool) -> float:
        """The integration step for a group: explicit ``dt`` or the default."""
        if self.dt is not None:
            return self.dt
        dt = BATCH_DT if batch else SIM_DT
        if isinstance(group.controller, EscController):
            dt = min(dt, MAX_PHASE_STEP / group.controller.params.omega0)
        return dt

    def config_hash(self) -> str:
        """SHA-256 of the canonical resolved configuration (output location excluded)."""
        body = {k: v for k, v in self.raw.items() if k != "output"}
        body.setdefault("run", {})
        body["run"] = dict(body["run"], trials=self.trials, seed=self.seed)
        blob = json.dumps(body, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_overrides(self, trials: Optional[int] = None, seed: Optional[int] = None) -> ExperimentConfig:
        cfg = copy.copy(self)
        if trials is not None:
            if trials < 1:
                raise ConfigError(f"trials must be >= 1, got {trials}")
            cfg.trials = trials
        if seed is not None:
            if seed < 0:
                raise ConfigError(f"seed must be >= 0, got {seed}")
            cfg.seed = seed
        return cfg


class _Locator:
    """Finds the line of ``key`` inside ``[section]`` for diagnostics."""

    def __init__(self, text: str):
        self.lines = text.splitlines()

    def find(self, section: Optional[str], key: Optional[str] = None) -> Optional[int]:
        current = None
        header = re.compile(r"^\s*\[\[?\s*([A-Za-z0-9_.]+)\s*\]\]?")
        for i, line in enumerate(self.lines, 1):
            m = header.match(line)
            if m:
                current = m.group(1).split(".")[0]
                if key is None and current == section:
                    return i
                continue
            if key is not None and current == section and re.match(rf"^\s*{re.escape(key)}\s*=", line):
                return i
        return None


def _number(v: Any, what: str, loc, positive=False, nonneg=False, integer=False) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{what} must be a number, got {v!r}", loc())
    if integer and not isinstance(v, int):
        raise ConfigError(f"{what} must be an integer, got {v!r}", loc())
    if not math.isfinite(v):
        raise ConfigError(f"{what} must be finite", loc())
    if positive and not v > 0:
        raise ConfigError(f"{what} must be positive, got {v}", loc())
    if nonneg and not v >= 0:
        raise ConfigError(f"{what} must be >= 0, got {v}", loc())
    return v


def _check_keys(table: dict, allowed: set, section: str, locator: _Locator) -> None:
    for k in table:
        if k not in allowed:
            raise ConfigError(
                f"unknown key {k!r} in [{section}]; allowed: {', '.join(sorted(allowed)) or 'none'}",
                locator.find(section, k),
            )


def _pair(v: Any, what: str, loc) -> tuple[float, float]:
    if not (isinstance(v, list) and len(v) == 2):
        raise ConfigError(f"{what} must be a [lo, hi] pair, got {v!r}", loc())
    lo, hi = (_number(x, what, loc) for x in v)
    if lo > hi:
        raise ConfigError(f"{what} has lo > hi: {v!r}", loc())
    return (float(lo), float(hi))


def _build_field(tbl: dict, section: str, locator: _Locator) -> tuple[str, FieldSpec]:
    if "name" not in tbl:
        raise ConfigError("[field] needs a name", locator.find(section))
    name = tbl["name"]
    if name not in FIELD_NAMES:
        raise ConfigError(
            f"unknown field {name!r}; expected one of {', '.join(FIELD_NAMES)}", locator.find(section, "name")
        )
    params = {k: v for k, v in tbl.items() if k != "name"}
    _check_keys(params, _FIELD_KEYS[name], section, locator)
    for k, v in params.items():
        loc = lambda k=k: locator.find(section, k)  # noqa: E731
        if k in ("center", "coeffs"):
            n = 2 if k == "center" else 5
            if not (isinstance(v, list) and len(v) == n):
                raise ConfigError(f"{k} must be a list of {n} numbers", loc())
            params[k] = [float(_number(x, k, loc)) for x in v]
        else:
            params[k] = float(_number(v, k, loc))
    try:
        return name, field_from_name(name, **params)
    except ValidationError as e:
        raise ConfigError(str(e), locator.find(section)) from None


def _build_controller(tbl: dict, section: str, locator: _Locator):
    kind = tbl.get("controller")
    if kind not in ("ga", "esc"):
        raise ConfigError(
            f"[control] controller must be 'ga' or 'esc', got {kind!r}", locator.find(section, "controller")
        )
    gains = {k: v for k, v in tbl.items() if k != "controller"}
    allowed = _GA_KEYS if kind == "ga" else _ESC_KEYS
    _check_keys(gains, allowed, section, locator)
    missing = allowed - set(gains)
    if missing:
        raise ConfigError(f"[control] {kind} needs {', '.join(sorted(missing))}", locator.find(section))
    vals = {k: float(_number(v, k, lambda k=k: locator.find(section, k), positive=True)) for k, v in gains.items()}
    if kind == "ga":
        return GaController(GaGains(vals["k1"], vals["k2"]))
    return EscController(EscParams(**vals))


def _build_sensor(tbl: dict, section: str, locator: _Locator) -> Optional[SensorCalibration]:
    _check_keys(tbl, _SENSOR_KEYS, section, locator)
    enabled = tbl.get("enabled", False)
    if not isinstance(enabled, bool):
        raise ConfigError("sensor.enabled must be true or false", locator.find(section, "enabled"))
    if not enabled:
        return None
    kw: dict[str, Any] = {}
    for k, v in tbl.items():
        if k == "enabled":
            continue
        loc = lambda k=k: locator.find(section, k)  # noqa: E731
        if k == "adc_bits":
            bits = int(_number(v, k, loc, nonneg=True, integer=True))
            kw[k] = bits or None
        else:
            kw[k] = float(_number(v, k, loc))
    try:
        return SensorCalibration(**kw)
    except ValidationError as e:
        raise ConfigError(str(e), locator.find(section)) from None


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    out.update(override)
    return out


def parse_config(text: str, path: Optional[str] = None) -> ExperimentConfig:
    try:
        return _parse(text)
    except ConfigError as e:
        if path and e.path is None:
            raise ConfigError(e.detail, e.line, path) from None
        raise


def _parse(text: str) -> ExperimentConfig:
    if not text.strip():
        raise ConfigError("configuration is empty")
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        m = re.search(r"line (\d+)", str(e))
        raise ConfigError(f"syntax error: {e}", int(m.group(1)) if m else None) from None
    loc = _Locator(text)
    for k in raw:
        if k not in _SECTIONS:
            raise ConfigError(
                f"unknown section or key {k!r}; expected sections {', '.join(sorted(_SECTIONS))}",
                loc.find(k) or loc.find(None, k),
            )
        if k != "groups" and not isinstance(raw[k], dict):
            raise ConfigError(f"{k!r} must be a [section]", loc.find(None, k))
    for sec in ("field", "control"):
        if sec not in raw:
            raise ConfigError(f"missing required section [{sec}]")

    # groups: base sections plus optional overrides
    group_tables = raw.get("groups", [{"name": "default"}])
    if not isinstance(group_tables, list) or not group_tables:
        raise ConfigError("groups must be an array of tables ([[groups]])", loc.find("groups"))
    groups = []
    names = set()
    for g in group_tables:
        _check_keys(g, _GROUP_KEYS, "groups", loc)
        name = g.get("name")
        if not isinstance(name, str) or not re.fullmatch(r"[A-Za-z0-9_.=+-]+", name):
            raise ConfigError(
                f"group name must be a non-empty string of [A-Za-z0-9_.=+-], got {name!r}", loc.find("groups", "name")
            )
        if name in names:
            raise ConfigError(f"duplicate group name {name!r}", loc.find("groups", "name"))
        names.add(name)
        for sub in ("field", "control", "sensor"):
            if sub in g and not isinstance(g[sub], dict):
                raise ConfigError(f"groups.{sub} must be a table", loc.find("groups", sub))
        ftbl = _merge(raw["field"], g.get("field", {}))
        if "name" in g.get("field", {}):
            ftbl = dict(g["field"])
        fname, field = _build_field(ftbl, "field", loc)
        ctbl = _merge(raw["control"], g.get("control", {}))
        if "controller" in g.get("control", {}):
            ctbl = dict(g["control"])
        controller = _build_controller(ctbl, "control", loc)
        sensor = _build_sensor(_merge(raw.get("sensor", {}), g.get("sensor", {})), "sensor", loc)
        if sensor is not None and isinstance(controller, EscController):
            raise ConfigError("sensor pipeline only feeds the ga controller", loc.find("sensor", "enabled"))
        groups.append(Group(name, fname, field, controller, sensor))

    run = raw.get("run", {})
    _check_keys(run, _RUN_KEYS, "run", loc)
    rl = lambda k: (lambda: loc.find("run", k))  # noqa: E731
    dt = float(_number(run["dt"], "dt", rl("dt"), positive=True)) if "dt" in run else None
    if "t_end" not in run:
        raise ConfigError("[run] needs t_end", loc.find("run"))
    t_end = float(_number(run["t_end"], "t_end", rl("t_end"), positive=True))
    trials = int(_number(run.get("trials", 1), "trials", rl("trials"), positive=True, integer=True))
    seed = int(_number(run.get("seed", 0), "seed", rl("seed"), nonneg=True, integer=True))
    frac = float(_number(run.get("settle_fraction", 0.2), "settle_fraction", rl("settle_fraction"), positive=True))
    if not frac < 1:
        raise ConfigError("settle_fraction must be in (0, 1)", loc.find("run", "settle_fraction"))
    record_every = int(_number(run.get("record_every", 1), "record_every", rl("record_every"), positive=True, integer=True))
    workers = int(_number(run.get("workers", 1), "workers", rl("workers"), positive=True, integer=True))
    if dt is not None:
        if t_end < dt:
            raise ConfigError(f"t_end={t_end} is shorter than dt={dt}", loc.find("run", "t_end"))
        for g in groups:
            if isinstance(g.controller, EscController) and g.controller.params.omega0 * dt > MAX_PHASE_STEP * (1 + 1e-12):
                raise ConfigError(
                    f"group {g.name!r}: dt={dt} too coarse for omega0={g.controller.params.omega0} "
                    f"(need omega0*dt <= {MAX_PHASE_STEP})",
                    loc.find("run", "dt"),
                )

    init = _build_init(raw.get("init", {}), groups, loc)

    out = raw.get("output", {})
    _check_keys(out, _OUTPUT_KEYS, "output", loc)
    out_dir = out.get("dir", "out")
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError("output.dir must be a non-empty string", loc.find("output", "dir"))
    traj = out.get("trajectories", False)
    if not isinstance(traj, bool):
        raise ConfigError("output.trajectories must be true or false", loc.find("output", "trajectories"))

    avg = raw.get("avgcheck", {})
    _check_keys(avg, _AVG_KEYS, "avgcheck", loc)
    al = lambda k: (lambda: loc.find("avgcheck", k))  # noqa: E731
    horizon = float(_number(avg.get("horizon", 60.0), "horizon", al("horizon"), positive=True))
    window = int(_number(avg.get("window", 1), "window", al("window"), positive=True, integer=True))
    dtau = float(_number(avg.get("dtau", 0.01), "dtau", al("dtau"), positive=True))

    return ExperimentConfig(
        groups=groups,
        init=init,
        dt=dt,
        t_end=t_end,
        trials=trials,
        seed=seed,
        settle_fraction=frac,
        record_every=record_every,
        workers=workers,
        output_dir=Path(out_dir),
        write_trajectories=traj,
        avg_horizon=horizon,
        avg_window=window,
        avg_dtau=dtau,
        raw=raw,
    )


def _build_init(tbl: dict, groups: list[Group], loc: _Locator) -> InitSpec:
    _check_keys(tbl, _INIT_KEYS, "init", loc)
    il = lambda k: (lambda: loc.find("init", k))  # noqa: E731
    if "poses" in tbl:
        if set(tbl) & {"z1", "z2", "theta_deg"}:
            raise ConfigError("[init] takes either poses or a sampling box, not both", loc.find("init", "poses"))
        poses_raw = tbl["poses"]
        if not (isinstance(poses_raw, list) and poses_raw):
            raise ConfigError("init.poses must be a non-empty list of [z1, z2, theta_deg]", il("poses")())
        poses = []
        for p in poses_raw:
            if not (isinstance(p, list) and len(p) == 3):
                raise ConfigError(f"each pose must be [z1, z2, theta_deg], got {p!r}", il("poses")())
            z1, z2, th = (float(_number(x, "pose", il("poses"))) for x in p)
            pose = Pose.from_degrees(z1, z2, th)
            for g in groups:
                try:
                    g.field.value(pose.position)
                except SourceSeekError as e:
                    raise ConfigError(f"initial pose {p!r} outside the {g.field_name} field domain: {e}", il("poses")()) from None
            poses.append(pose)
        return InitSpec(poses=tuple(poses))
    half = _DEFAULT_BOX[groups[0].field_name]
    z1 = _pair(tbl["z1"], "init.z1", il("z1")) if "z1" in tbl else (-half, half)
    z2 = _pair(tbl["z2"], "init.z2", il("z2")) if "z2" in tbl else (-half, half)
    if "theta_deg" in tbl:
        lo, hi = _pair(tbl["theta_deg"], "init.theta_deg", il("theta_deg"))
        theta = (math.radians(lo), math.radians(hi))
    else:
        theta = (0.0, 2.0 * math.pi)
    for g in groups:
        if isinstance(g.field, FanPolynomial):
            c, r = g.field.center, g.field.d_min
            far = max(math.hypot(x - c.x, y - c.y) for x in z1 for y in z2)
            if far < r:
                raise ConfigError("init box lies entirely inside the fan exclusion radius", loc.find("init"))
    return InitSpec(z1=z1, z2=z2, theta=theta)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e.strerror}", path=str(p)) from None
    cfg = parse_config(text, str(p))
    cfg.source_path = str(p)
    return cfg
