"""Scenario files: TOML with ``schema = 1``, strict keys, field-path errors.

A minimal file is just a preset and a seed::

    preset = "paper-fig3"
    seed = 7

An absent ``schema`` means the current version. Every other table falls back to documented defaults (see :class:`ScenarioConfig`).
Angles in the file are in degrees; everything else is SI.
"""

from __future__ import annotations

import hashlib
import math
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .channel import C0, DEFAULT_STEP, PATTERNS, AntennaArray, CarrierConfig, Scene
from .geometry import vector_angles
from .mobility import PRESET_CARRIER_HZ, PRESET_NAMES, MobilityProfile, Schedule, preset_scenario
from .scenario import ClusterParams, RiceanProcess, generate_clusters

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid scenario file. ``path`` is the dotted field location."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass(frozen=True)
class CarrierSection:
    f0: float | None = None  # None -> preset carrier
    c0: float = C0


@dataclass(frozen=True)
class ArraySection:
    elements: int = 2
    spacing_wavelengths: float = 0.5
    axis: tuple[float, float, float] = (1.0, 0.0, 0.0)
    pattern: str = "isotropic"


@dataclass(frozen=True)
class ArraysSection:
    tx: ArraySection = field(default_factory=ArraySection)
    rx: ArraySection = field(default_factory=ArraySection)


@dataclass(frozen=True)
class ClustersSection:
    n: int = 20
    m: int = 20
    tx_azimuth_spread_deg: float = 10.0
    tx_elevation_spread_deg: float = 5.0
    rx_azimuth_spread_deg: float = 40.0
    rx_elevation_spread_deg: float = 10.0
    tx_ray_azimuth_spread_deg: float = 2.0
    tx_ray_elevation_spread_deg: float = 1.0
    rx_ray_azimuth_spread_deg: float = 15.0
    rx_ray_elevation_spread_deg: float = 7.0
    delay_spread: float = 100e-9
    delay_scaling: float = 2.3
    last_power_ratio: float = 0.01
    tx_distance: tuple[float, float] = (50.0, 150.0)
    rx_distance: tuple[float, float] = (10.0, 100.0)
    xpr: float = 8.0
    scatterer_speed: float = 0.0
    death_rate: float = 0.0
    birth_rate: float = 0.0


@dataclass(frozen=True)
class RiceanSection:
    mean_k: float = 7.0
    std_k: float = 4.0
    correlation_time: float = 0.1


@dataclass(frozen=True)
class SimulationSection:
    duration: float | None = None  # None -> preset duration
    integration_step: float = DEFAULT_STEP
    grid_step: float = 1e-3
    cir_step: float = 1e-3
    posture: bool = True


@dataclass(frozen=True)
class OutputSection:
    anchor_times: tuple[float, ...] = (0.0, 1.0, 2.0)
    max_lag: float = 0.1
    lag_step: float = 1e-4
    max_spacing: float = 2.0
    spacing_step: float = 0.05
    n_realizations: int = 1000
    n_scenes: int = 1
    component: str = "total"


@dataclass(frozen=True)
class ScheduleSpec:
    times: tuple[float, ...] = (0.0,)
    values: tuple[float, ...] = (0.0,)


@dataclass(frozen=True)
class TerminalSection:
    initial_position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    speed: ScheduleSpec = field(default_factory=ScheduleSpec)
    azimuth_deg: ScheduleSpec = field(default_factory=ScheduleSpec)
    elevation_deg: ScheduleSpec = field(default_factory=ScheduleSpec)
    roll_deg: ScheduleSpec = field(default_factory=ScheduleSpec)
    yaw_deg: ScheduleSpec = field(default_factory=ScheduleSpec)
    pitch_deg: ScheduleSpec = field(default_factory=ScheduleSpec)


@dataclass(frozen=True)
class MobilitySection:
    duration: float = 1.0
    tx: TerminalSection = field(default_factory=TerminalSection)
    rx: TerminalSection = field(default_factory=TerminalSection)


@dataclass(frozen=True)
class ScenarioConfig:
    schema: int = SCHEMA_VERSION
    preset: str | None = None
    seed: int = 0
    carrier: CarrierSection = field(default_factory=CarrierSection)
    arrays: ArraysSection = field(default_factory=ArraysSection)
    clusters: ClustersSection = field(default_factory=ClustersSection)
    ricean: RiceanSection = field(default_factory=RiceanSection)
    simulation: SimulationSection = field(default_factory=SimulationSection)
    output: OutputSection = field(default_factory=OutputSection)
    mobility: MobilitySection | None = None  # used only when preset is unset

    @property
    def f0(self) -> float:
        if self.carrier.f0 is not None:
            return self.carrier.f0
        return PRESET_CARRIER_HZ.get(self.preset or "", 2.4e9)


# Parsing ---------------------------------------------------------------------

_NESTED = {
    ScenarioConfig: {"carrier": CarrierSection, "arrays": ArraysSection, "clusters": ClustersSection,
                     "ricean": RiceanSection, "simulation": SimulationSection, "output": OutputSection,
                     "mobility": MobilitySection},
    ArraysSection: {"tx": ArraySection, "rx": ArraySection},
    MobilitySection: {"tx": TerminalSection, "rx": TerminalSection},
    TerminalSection: {k: ScheduleSpec for k in ("speed", "azimuth_deg", "elevation_deg", "roll_deg",
                                                "yaw_deg", "pitch_deg")},
}


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _coerce(value, default, path: str):
    """Coerce a TOML scalar/array to the type of ``default``."""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(path, "expected true/false")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, "expected an integer")
        return value
    if isinstance(default, float) or default is None:
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            raise ConfigError(path, "expected a number")
        if isinstance(value, str):
            if default is None and path == "preset":
                return value
            raise ConfigError(path, "expected a number")
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(path, "must be finite")
        return value
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(path, "expected a string")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, list):
            raise ConfigError(path, "expected an array")
        return tuple(_coerce(v, float(0), f"{path}[{i}]") for i, v in enumerate(value))
    raise ConfigError(path, "unsupported value")


def _build(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(path, "expected a table")
    known = {f.name: f for f in fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(_join(path, key), "unknown key")
    defaults = cls()
    nested = _NESTED.get(cls, {})
    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        sub = _join(path, key)
        if key in nested:
            kwargs[key] = _build(nested[key], value, sub)
        elif cls is ScenarioConfig and key == "preset":
            if not isinstance(value, str):
                raise ConfigError(sub, "expected a string")
            kwargs[key] = value
        else:
            kwargs[key] = _coerce(value, getattr(defaults, key), sub)
    return cls(**kwargs)


def _check_positive(path, value, allow_zero=False):
    if value is None:
        return
    if not (value >= 0 if allow_zero else value > 0):
        raise ConfigError(path, f"must be {'>= 0' if allow_zero else '> 0'}, got {value}")


def validate(cfg: ScenarioConfig) -> ScenarioConfig:
    """Range checks; raises :class:`ConfigError` naming the offending field."""
    if cfg.schema != SCHEMA_VERSION:
        raise ConfigError("schema", f"unsupported schema {cfg.schema}; expected {SCHEMA_VERSION}")
    if cfg.preset is not None and cfg.preset not in PRESET_NAMES:
        raise ConfigError("preset", f"unknown preset {cfg.preset!r}; choose from {', '.join(PRESET_NAMES)}")
    if cfg.preset is None and cfg.mobility is None:
        raise ConfigError("mobility", "required when no preset is given")
    if cfg.seed < 0:
        raise ConfigError("seed", "must be >= 0")
    _check_positive("carrier.f0", cfg.carrier.f0)
    _check_positive("carrier.c0", cfg.carrier.c0)
    for side in ("tx", "rx"):
        a = getattr(cfg.arrays, side)
        p = f"arrays.{side}"
        if a.elements < 1:
            raise ConfigError(f"{p}.elements", "must be >= 1")
        _check_positive(f"{p}.spacing_wavelengths", a.spacing_wavelengths, allow_zero=True)
        if len(a.axis) != 3 or not any(a.axis):
            raise ConfigError(f"{p}.axis", "must be a non-zero 3-vector")
        if a.pattern not in PATTERNS:
            raise ConfigError(f"{p}.pattern", f"unknown pattern; choose from {', '.join(PATTERNS)}")
    c = cfg.clusters
    if c.n < 1:
        raise ConfigError("clusters.n", "must be >= 1")
    if c.m < 1:
        raise ConfigError("clusters.m", "must be >= 1")
    for f in fields(c):
        if f.name.endswith("_deg") or f.name in ("delay_spread", "scatterer_speed", "death_rate", "birth_rate"):
            _check_positive(f"clusters.{f.name}", getattr(c, f.name), allow_zero=True)
    _check_positive("clusters.delay_scaling", c.delay_scaling)
    _check_positive("clusters.xpr", c.xpr)
    if not 0 < c.last_power_ratio <= 1:
        raise ConfigError("clusters.last_power_ratio", "must lie in (0, 1]")
    for name in ("tx_distance", "rx_distance"):
        rng = getattr(c, name)
        if len(rng) != 2 or not 0 < rng[0] <= rng[1]:
            raise ConfigError(f"clusters.{name}", "must be [low, high] with 0 < low <= high")
    _check_positive("ricean.mean_k", cfg.ricean.mean_k)
    _check_positive("ricean.std_k", cfg.ricean.std_k, allow_zero=True)
    _check_positive("ricean.correlation_time", cfg.ricean.correlation_time)
    s = cfg.simulation
    _check_positive("simulation.duration", s.duration)
    _check_positive("simulation.integration_step", s.integration_step)
    _check_positive("simulation.grid_step", s.grid_step)
    _check_positive("simulation.cir_step", s.cir_step)
    o = cfg.output
    if any(t < 0 for t in o.anchor_times):
        raise ConfigError("output.anchor_times", "must be >= 0")
    _check_positive("output.max_lag", o.max_lag, allow_zero=True)
    _check_positive("output.lag_step", o.lag_step)
    _check_positive("output.max_spacing", o.max_spacing, allow_zero=True)
    _check_positive("output.spacing_step", o.spacing_step)
    if o.n_realizations < 2:
        raise ConfigError("output.n_realizations", "must be >= 2")
    if o.n_scenes < 1:
        raise ConfigError("output.n_scenes", "must be >= 1")
    if o.component not in ("total", "los", "nlos"):
        raise ConfigError("output.component", "must be total, los or nlos")
    if cfg.mobility is not None:
        _check_positive("mobility.duration", cfg.mobility.duration)
        for side in ("tx", "rx"):
            term = getattr(cfg.mobility, side)
            if len(term.initial_position) != 3:
                raise ConfigError(f"mobility.{side}.initial_position", "must be a 3-vector")
            for f in fields(term):
                if f.name == "initial_position":
                    continue
                spec = getattr(term, f.name)
                p = f"mobility.{side}.{f.name}"
                try:
                    Schedule(spec.times, spec.values)
                except ValueError as exc:
                    raise ConfigError(p, str(exc)) from None
                if f.name == "speed" and min(spec.values) < 0:
                    raise ConfigError(p, "speed must be >= 0")
    return cfg


def parse_scenario_text(text: str) -> ScenarioConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("", f"invalid TOML: {exc}") from None
    # An absent schema means the current one; any other version is rejected by validate.
    return validate(_build(ScenarioConfig, data, ""))


def parse_scenario(path) -> ScenarioConfig:
    """Read and validate a scenario file."""
    return parse_scenario_text(Path(path).read_text(encoding="utf-8"))


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items() if v is not None}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def dump_scenario(cfg: ScenarioConfig) -> str:
    """Serialise to TOML; :func:`parse_scenario_text` reads it back unchanged."""
    return tomli_w.dumps(_plain(asdict(cfg)))


def config_hash(cfg: ScenarioConfig) -> str:
    return hashlib.sha256(dump_scenario(cfg).encode()).hexdigest()[:16]


# Scene construction ------------------------------------------------------------


def _schedule(spec: ScheduleSpec, degrees: bool) -> Schedule:
    scale = math.pi / 180 if degrees else 1.0
    return Schedule(spec.times, tuple(v * scale for v in spec.values))


def _profile(term: TerminalSection, duration: float, grid_step: float) -> MobilityProfile:
    return MobilityProfile(
        initial_position=np.array(term.initial_position),
        speed=_schedule(term.speed, False),
        azimuth=_schedule(term.azimuth_deg, True),
        elevation=_schedule(term.elevation_deg, True),
        roll=_schedule(term.roll_deg, True),
        yaw=_schedule(term.yaw_deg, True),
        pitch=_schedule(term.pitch_deg, True),
        duration=duration,
        grid_step=grid_step,
    )


def mobility_profiles(cfg: ScenarioConfig) -> tuple[MobilityProfile, MobilityProfile]:
    s = cfg.simulation
    if cfg.preset is not None:
        tx, rx = preset_scenario(cfg.preset, grid_step=s.grid_step)
    else:
        m = cfg.mobility
        tx = _profile(m.tx, m.duration, s.grid_step)
        rx = _profile(m.rx, m.duration, s.grid_step)
    if s.duration is not None:
        if s.duration > min(tx.duration, rx.duration) + 1e-12 and cfg.preset is not None:
            raise ConfigError("simulation.duration", "exceeds the preset's trajectory window")
        tx, rx = replace(tx, duration=s.duration), replace(rx, duration=s.duration)
    return tx, rx


def _array(a: ArraySection, wavelength: float) -> AntennaArray:
    return AntennaArray.ula(a.elements, a.spacing_wavelengths * wavelength, a.axis, a.pattern)


def cluster_params(c: ClustersSection) -> ClusterParams:
    r = math.radians
    return ClusterParams(
        tx_azimuth_spread=r(c.tx_azimuth_spread_deg),
        tx_elevation_spread=r(c.tx_elevation_spread_deg),
        rx_azimuth_spread=r(c.rx_azimuth_spread_deg),
        rx_elevation_spread=r(c.rx_elevation_spread_deg),
        tx_ray_azimuth_spread=r(c.tx_ray_azimuth_spread_deg),
        tx_ray_elevation_spread=r(c.tx_ray_elevation_spread_deg),
        rx_ray_azimuth_spread=r(c.rx_ray_azimuth_spread_deg),
        rx_ray_elevation_spread=r(c.rx_ray_elevation_spread_deg),
        delay_spread=c.delay_spread,
        delay_scaling=c.delay_scaling,
        last_power_ratio=c.last_power_ratio,
        tx_distance=tuple(c.tx_distance),
        rx_distance=tuple(c.rx_distance),
        xpr=c.xpr,
        scatterer_speed=c.scatterer_speed,
    )


def scene_seeds(seed: int, index: int = 0) -> tuple[int, int]:
    """Independent ``(cluster, k-process)`` seeds for scene ``index``."""
    ss = np.random.SeedSequence(seed, spawn_key=(0x5C, index))
    a, b = ss.generate_state(2, dtype=np.uint32)
    return int(a), int(b)


def build_scene(cfg: ScenarioConfig, index: int = 0, posture: bool | None = None) -> Scene:
    """Scene ``index`` of the configured ensemble (index 0 is the primary scene)."""
    tx, rx = mobility_profiles(cfg)
    carrier = CarrierConfig(cfg.f0, cfg.carrier.c0)
    cluster_seed, k_seed = scene_seeds(cfg.seed, index)
    d = rx.initial_position - tx.initial_position
    dep, arr = vector_angles(d), vector_angles(-d)
    clusters = generate_clusters(cfg.clusters.n, cfg.clusters.m, cluster_params(cfg.clusters),
                                 cluster_seed, dep, arr)
    r = cfg.ricean
    return Scene(
        carrier=carrier,
        tx=tx,
        rx=rx,
        tx_array=_array(cfg.arrays.tx, carrier.wavelength),
        rx_array=_array(cfg.arrays.rx, carrier.wavelength),
        clusters=clusters,
        k_process=RiceanProcess(r.mean_k, r.std_k, r.correlation_time, k_seed),
        posture=cfg.simulation.posture if posture is None else posture,
        step=cfg.simulation.integration_step,
        death_rate=cfg.clusters.death_rate,
        birth_rate=cfg.clusters.birth_rate,
        metadata=(("seed", cfg.seed), ("config_hash", config_hash(cfg))),
    )


def build_scenes(cfg: ScenarioConfig, posture: bool | None = None) -> list[Scene]:
    return [build_scene(cfg, i, posture) for i in range(cfg.output.n_scenes)]
