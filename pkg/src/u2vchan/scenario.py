"""Stochastic scene generation: clusters, sub-path rays, powers, phases and the K-factor process."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import lfilter

from .geometry import SphericalAngles

# Ray offset angles of the 20-ray cluster pattern in 3GPP TR 38.901 (Table 7.5-3),
# to be scaled by the intra-cluster spread.
RAY_OFFSETS = np.array([
    0.0447, -0.0447, 0.1413, -0.1413, 0.2492, -0.2492, 0.3715, -0.3715,
    0.5129, -0.5129, 0.6797, -0.6797, 0.8844, -0.8844, 1.1481, -1.1481,
    1.5195, -1.5195, 2.1551, -2.1551,
])

K_FLOOR = 1e-3


@dataclass(frozen=True)
class ClusterParams:
    """Distribution parameters for cluster generation. Angles in radians.

    ``*_spread`` is the std of the cluster mean angle around the LoS direction,
    ``*_ray_spread`` the intra-cluster scale applied to the ray offsets.
    Delays follow an exponential draw with ``delay_spread``; powers decay
    exponentially in delay so the last cluster carries ``last_power_ratio`` of
    the first. Scatterers sit ``tx_distance`` / ``rx_distance`` metres from the
    terminals at generation time.
    """

    tx_azimuth_spread: float = math.radians(10.0)
    tx_elevation_spread: float = math.radians(5.0)
    rx_azimuth_spread: float = math.radians(40.0)
    rx_elevation_spread: float = math.radians(10.0)
    tx_ray_azimuth_spread: float = math.radians(2.0)
    tx_ray_elevation_spread: float = math.radians(1.0)
    rx_ray_azimuth_spread: float = math.radians(15.0)
    rx_ray_elevation_spread: float = math.radians(7.0)
    delay_spread: float = 100e-9
    delay_scaling: float = 2.3
    last_power_ratio: float = 0.01
    tx_distance: tuple[float, float] = (50.0, 150.0)
    rx_distance: tuple[float, float] = (10.0, 100.0)
    xpr: float = 8.0
    scatterer_speed: float = 0.0

    def __post_init__(self):
        for name in ("tx_azimuth_spread", "tx_elevation_spread", "rx_azimuth_spread",
                     "rx_elevation_spread", "tx_ray_azimuth_spread", "tx_ray_elevation_spread",
                     "rx_ray_azimuth_spread", "rx_ray_elevation_spread", "delay_spread",
                     "scatterer_speed"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0 < self.last_power_ratio <= 1:
            raise ValueError("last_power_ratio must be in (0, 1]")
        if not self.xpr > 0:
            raise ValueError("xpr must be > 0")
        for name in ("tx_distance", "rx_distance"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValueError(f"{name} must satisfy 0 < low <= high")
            object.__setattr__(self, name, (float(lo), float(hi)))


@dataclass(frozen=True)
class SubPath:
    departure: SphericalAngles
    arrival: SphericalAngles
    init_phases: tuple[float, float, float, float]  # VV, VH, HV, HH
    xpr: float = 8.0

    def __post_init__(self):
        if not all(-math.pi < p <= math.pi for p in self.init_phases):
            raise ValueError("polarisation phases must lie in (-pi, pi]")
        if not self.xpr > 0:
            raise ValueError("xpr must be > 0")


@dataclass(frozen=True)
class Cluster:
    subpaths: tuple[SubPath, ...]
    delay: float
    power: float
    scatterer_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    random_init_phase: float = math.pi
    alive: bool = True
    tx_distance: float = 100.0
    rx_distance: float = 50.0

    def __post_init__(self):
        if self.delay < 0 or self.power < 0:
            raise ValueError("cluster delay and power must be >= 0")
        if not 0 < self.random_init_phase <= 2 * math.pi:
            raise ValueError("cluster initial phase must lie in (0, 2*pi]")


@dataclass(frozen=True)
class ClusterSet:
    clusters: tuple[Cluster, ...]
    m_subpaths: int
    params: ClusterParams = field(default_factory=ClusterParams)

    def __post_init__(self):
        if any(len(c.subpaths) != self.m_subpaths for c in self.clusters):
            raise ValueError("every cluster must carry m_subpaths sub-paths")

    @property
    def n_alive(self) -> int:
        return sum(c.alive for c in self.clusters)

    def alive_mask(self) -> np.ndarray:
        return np.array([c.alive for c in self.clusters], dtype=bool)

    def powers(self) -> np.ndarray:
        return np.array([c.power for c in self.clusters])

    def angle_arrays(self) -> dict[str, np.ndarray]:
        """Sub-path angles stacked into ``(N, M)`` arrays."""
        def grab(side, attr):
            return np.array([[getattr(getattr(sp, side), attr) for sp in c.subpaths]
                             for c in self.clusters]).reshape(len(self.clusters), self.m_subpaths)
        return {
            "dep_az": grab("departure", "azimuth"),
            "dep_el": grab("departure", "elevation"),
            "arr_az": grab("arrival", "azimuth"),
            "arr_el": grab("arrival", "elevation"),
        }

    def phase_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """``(N,)`` cluster initial phases and ``(N, M, 4)`` polarisation phases."""
        pol = np.array([[sp.init_phases for sp in c.subpaths] for c in self.clusters])
        return np.array([c.random_init_phase for c in self.clusters]), pol.reshape(-1, self.m_subpaths, 4)

    def xpr_array(self) -> np.ndarray:
        return np.array([[sp.xpr for sp in c.subpaths] for c in self.clusters]).reshape(-1, self.m_subpaths)


def _wrap(a):
    return np.mod(a, 2 * math.pi)


def _elev(a):
    return np.clip(a, -math.pi / 2, math.pi / 2)


def _ray_offsets(m: int, rng: np.random.Generator) -> np.ndarray:
    if m == len(RAY_OFFSETS):
        return RAY_OFFSETS.copy()
    return rng.uniform(-2.0, 2.0, size=m)


def draw_init_phases(rng: np.random.Generator, shape) -> np.ndarray:
    """Uniform phases on ``(0, 2*pi]``."""
    return 2 * math.pi - rng.uniform(0.0, 2 * math.pi, size=shape)


def draw_pol_phases(rng: np.random.Generator, shape) -> np.ndarray:
    """Uniform phases on ``(-pi, pi]``."""
    return math.pi - rng.uniform(0.0, 2 * math.pi, size=shape)


def generate_clusters(
    n_paths: int,
    m_subpaths: int,
    params: ClusterParams | None = None,
    rng_seed=0,
    los_departure: SphericalAngles | None = None,
    los_arrival: SphericalAngles | None = None,
) -> ClusterSet:
    """Draw a cluster set around the given LoS departure/arrival directions.

    ``rng_seed`` may be an int, a ``SeedSequence`` or a ``Generator``.
    """
    if n_paths < 1 or m_subpaths < 1:
        raise ValueError("n_paths and m_subpaths must both be >= 1")
    params = params or ClusterParams()
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    los_departure = los_departure or SphericalAngles(0.0, 0.0)
    los_arrival = los_arrival or SphericalAngles(0.0, 0.0)
    n, m = n_paths, m_subpaths

    dep_az0 = los_departure.azimuth + rng.normal(0.0, 1.0, n) * params.tx_azimuth_spread
    dep_el0 = los_departure.elevation + rng.normal(0.0, 1.0, n) * params.tx_elevation_spread
    arr_az0 = los_arrival.azimuth + rng.normal(0.0, 1.0, n) * params.rx_azimuth_spread
    arr_el0 = los_arrival.elevation + rng.normal(0.0, 1.0, n) * params.rx_elevation_spread

    # 38.901-style exponential delays, shifted so the first cluster is at zero.
    raw = -params.delay_scaling * params.delay_spread * np.log(rng.uniform(1e-12, 1.0, n))
    delays = np.sort(raw - raw.min())
    if delays[-1] > 0:
        decay = math.log(1.0 / params.last_power_ratio) / delays[-1]
        powers = np.exp(-decay * delays)
    else:
        powers = np.ones(n)
    powers /= powers.sum()

    d_tx = rng.uniform(*params.tx_distance, size=n)
    d_rx = rng.uniform(*params.rx_distance, size=n)
    cluster_phase = draw_init_phases(rng, n)
    pol = draw_pol_phases(rng, (n, m, 4))
    if params.scatterer_speed > 0:
        heading = rng.uniform(0.0, 2 * math.pi, n)
        vel = params.scatterer_speed * np.stack([np.cos(heading), np.sin(heading), np.zeros(n)], -1)
    else:
        vel = np.zeros((n, 3))

    clusters = []
    for i in range(n):
        offsets = _ray_offsets(m, rng)
        couple = [rng.permutation(offsets) for _ in range(3)]
        dep_az = _wrap(dep_az0[i] + params.tx_ray_azimuth_spread * offsets)
        dep_el = _elev(dep_el0[i] + params.tx_ray_elevation_spread * couple[0])
        arr_az = _wrap(arr_az0[i] + params.rx_ray_azimuth_spread * couple[1])
        arr_el = _elev(arr_el0[i] + params.rx_ray_elevation_spread * couple[2])
        subpaths = tuple(
            SubPath(
                departure=SphericalAngles(dep_az[j], dep_el[j]),
                arrival=SphericalAngles(arr_az[j], arr_el[j]),
                init_phases=tuple(float(p) for p in pol[i, j]),
                xpr=params.xpr,
            )
            for j in range(m)
        )
        clusters.append(
            Cluster(
                subpaths=subpaths,
                delay=float(delays[i]),
                power=float(powers[i]),
                scatterer_velocity=vel[i],
                random_init_phase=float(cluster_phase[i]),
                tx_distance=float(d_tx[i]),
                rx_distance=float(d_rx[i]),
            )
        )
    return ClusterSet(tuple(clusters), m, params)


def _renormalised(clusters: list[Cluster]) -> tuple[Cluster, ...]:
    total = sum(c.power for c in clusters if c.alive)
    if total <= 0:
        return tuple(clusters)
    return tuple(replace(c, power=c.power / total) if c.alive else c for c in clusters)


def birth_death_step(
    cset: ClusterSet,
    dt: float,
    death_rate: float,
    birth_rate: float,
    rng: np.random.Generator,
    los_departure: SphericalAngles | None = None,
    los_arrival: SphericalAngles | None = None,
) -> ClusterSet:
    """Advance the cluster birth-death process by ``dt`` seconds.

    Each alive cluster survives with probability ``exp(-death_rate * dt)``;
    a Poisson(``birth_rate * dt``) number of fresh clusters is appended.
    Powers are renormalised over the alive clusters.
    """
    if dt < 0 or death_rate < 0 or birth_rate < 0:
        raise ValueError("dt and rates must be >= 0")
    if dt == 0 or (death_rate == 0 and birth_rate == 0):
        return cset
    survive = math.exp(-death_rate * dt)
    clusters = [replace(c, alive=bool(rng.random() < survive)) if c.alive else c for c in cset.clusters]
    n_born = int(rng.poisson(birth_rate * dt))
    if n_born:
        fresh = generate_clusters(n_born, cset.m_subpaths, cset.params, rng, los_departure, los_arrival)
        scale = 1.0 / max(sum(c.alive for c in clusters), 1)
        clusters += [replace(c, power=c.power * n_born * scale) for c in fresh.clusters]
    return ClusterSet(_renormalised(clusters), cset.m_subpaths, cset.params)


@dataclass(frozen=True)
class RiceanProcess:
    """First-order Gauss-Markov Ricean K-factor in the linear domain.

    ``K(t) = max(mean_k + std_k * x(t), 1e-3)`` with ``x`` a unit-variance
    exponentially correlated Gaussian process realised on a uniform grid and
    linearly interpolated in between.
    """

    mean_k: float = 7.0
    std_k: float = 4.0
    correlation_time: float = 0.1
    seed: int = 0
    grid_step: float = 1e-3

    def __post_init__(self):
        if self.mean_k <= 0 or self.std_k < 0:
            raise ValueError("mean_k must be > 0 and std_k >= 0")
        if self.correlation_time <= 0 or self.grid_step <= 0:
            raise ValueError("correlation_time and grid_step must be > 0")

    def _base(self, n: int) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(0x4B,)))
        a = math.exp(-self.grid_step / self.correlation_time)
        w = rng.standard_normal(n)
        w[1:] *= math.sqrt(1.0 - a * a)
        return lfilter([1.0], [1.0, -a], w)

    def values(self, times) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        if times.size and times.min() < 0:
            raise ValueError("K-factor process is defined for t >= 0")
        if self.std_k == 0:
            return np.full(times.shape, float(self.mean_k))
        n = int(math.floor((times.max() if times.size else 0.0) / self.grid_step)) + 2
        x = self._base(n)
        grid = np.arange(n) * self.grid_step
        k = self.mean_k + self.std_k * np.interp(times, grid, x)
        return np.maximum(k, K_FLOOR)


def sample_k_factor(proc: RiceanProcess, t):
    """K(t) for a scalar or array of times."""
    out = proc.values(t)
    return float(out) if np.ndim(out) == 0 else out
