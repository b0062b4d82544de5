"""Time-variant U2V MIMO channel synthesis.

A :class:`Scene` bundles everything fixed for one channel draw: carrier,
arrays, Tx/Rx mobility, the cluster set (with scatterers placed at ``t = 0``)
and the K-factor process. :meth:`Scene.trace` evaluates the deterministic
geometry on a set of times (unit vectors, cumulative Doppler phases, rotation
matrices, delays). Coefficients combine a trace with random initial phases.

Scatterers follow a twin-cluster layout: each sub-path has a Tx-side point
along its departure direction and an Rx-side point along its arrival
direction, joined by a per-cluster virtual link whose length makes the
``t = 0`` excess delay equal to the drawn cluster delay. Departure and
arrival angles are recomputed from the moving terminals at every time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .geometry import as_vec3, directions, unit_vectors, vector_angles
from .mobility import MobilityProfile
from .scenario import ClusterSet, RiceanProcess, draw_init_phases, draw_pol_phases

C0 = 299_792_458.0
DEFAULT_STEP = 5e-5
_CHUNK = 256


class DegenerateGeometryError(ValueError):
    """Raised when Tx and Rx (or a terminal and a scatterer) coincide."""


@dataclass(frozen=True)
class CarrierConfig:
    f0: float
    c0: float = C0

    def __post_init__(self):
        if not (self.f0 > 0 and math.isfinite(self.f0)):
            raise ValueError(f"carrier frequency must be positive, got {self.f0}")
        if not self.c0 > 0:
            raise ValueError("c0 must be positive")

    @property
    def wavenumber(self) -> float:
        return 2 * math.pi * self.f0 / self.c0

    @property
    def wavelength(self) -> float:
        return self.c0 / self.f0


# Field patterns ---------------------------------------------------------------
# Each takes local unit directions (..., 3) and returns (F_V, F_H) arrays.


def isotropic_pattern(local_dirs):
    shape = np.shape(local_dirs)[:-1]
    return np.ones(shape), np.zeros(shape)


def isotropic_h_pattern(local_dirs):
    shape = np.shape(local_dirs)[:-1]
    return np.zeros(shape), np.ones(shape)


def tr38901_pattern(local_dirs, hpbw_deg: float = 65.0, floor_db: float = 30.0):
    """Single-element pattern of 3GPP TR 38.901 with boresight along local +x.

    Relative gain (no boresight directivity), vertically polarised.
    """
    _, az, el = directions(local_dirs)
    az = np.where(az > math.pi, az - 2 * math.pi, az)
    zenith = math.pi / 2 - el
    a_v = -np.minimum(12 * (np.degrees(zenith - math.pi / 2) / hpbw_deg) ** 2, floor_db)
    a_h = -np.minimum(12 * (np.degrees(az) / hpbw_deg) ** 2, floor_db)
    atten = -np.minimum(-(a_v + a_h), floor_db)
    return np.sqrt(10 ** (atten / 10)), np.zeros(np.shape(az))


PATTERNS = {"isotropic": isotropic_pattern, "isotropic-h": isotropic_h_pattern, "3gpp": tr38901_pattern}


@dataclass(frozen=True)
class AntennaArray:
    """Element positions in the terminal's local frame plus a field pattern name."""

    element_positions: np.ndarray
    pattern: str = "isotropic"

    def __post_init__(self):
        pos = np.asarray(self.element_positions, dtype=float).reshape(-1, 3)
        if pos.shape[0] < 1:
            raise ValueError("array needs at least one element")
        if not np.all(np.isfinite(pos)):
            raise ValueError("element positions must be finite")
        if self.pattern not in PATTERNS:
            raise ValueError(f"unknown pattern {self.pattern!r}")
        object.__setattr__(self, "element_positions", pos)

    @classmethod
    def ula(cls, n: int, spacing: float, axis=(1.0, 0.0, 0.0), pattern: str = "isotropic") -> "AntennaArray":
        """Uniform linear array centred on the local origin."""
        axis = as_vec3(axis)
        axis = axis / np.linalg.norm(axis)
        offsets = (np.arange(n) - (n - 1) / 2) * spacing
        return cls(offsets[:, None] * axis, pattern)

    @property
    def size(self) -> int:
        return self.element_positions.shape[0]

    def field(self, local_dirs):
        return PATTERNS[self.pattern](local_dirs)


# Integration ------------------------------------------------------------------


def _chunk_values(integrand, step: float, chunk: int, c_start: int, last: int, base):
    """Yield ``(c, f, grid_vals)`` for the grid chunks from ``c_start`` up to index ``last``.

    Chunk ``c`` covers grid indices ``[c*chunk, (c+1)*chunk]`` (cut at
    ``last``) and starts from the running integral ``base``; every caller goes
    through this one loop so results never depend on where integration started.
    """
    for c in range(c_start, last // chunk + 1):
        f = integrand(np.arange(c * chunk, min((c + 1) * chunk, last) + 1) * step)
        if base is None:
            base = np.zeros_like(f[0])
        cum = np.cumsum(0.5 * (f[1:] + f[:-1]) * step, axis=0)
        grid_vals = np.concatenate([base[None], base + cum])
        yield c, f, grid_vals
        base = grid_vals[-1]


def cumulative_checkpoints(integrand, t_max: float, step: float, chunk: int = _CHUNK) -> np.ndarray:
    """Running integrals at grid indices ``0, chunk, 2*chunk, ...`` up to ``t_max``."""
    last = int(math.floor(t_max / step + 1e-9))
    out = []
    for _, _, grid_vals in _chunk_values(integrand, step, chunk, 0, last, None):
        out.append(grid_vals[0])
    return np.stack(out)


def integrate_cumulative(integrand, times, step: float, chunk: int = _CHUNK,
                         checkpoints: np.ndarray | None = None) -> np.ndarray:
    """Trapezoidal ``int_0^t integrand`` for every ``t`` in ``times``.

    The rule runs on the uniform grid ``i * step``; the last partial cell up
    to ``t`` is closed with one more trapezoid, so the value at ``t`` does not
    depend on which other times are requested. ``integrand`` maps a 1-D time
    array to an array whose leading axis is time. ``checkpoints`` (from
    :func:`cumulative_checkpoints` with the same ``step`` and ``chunk``) let
    the loop start at the chunk holding the earliest requested time.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1:
        raise ValueError("times must be 1-D")
    if times.size and times.min() < 0:
        raise ValueError("integration times must be >= 0")
    f_t = integrand(times)
    out = np.zeros_like(f_t)
    if times.size == 0:
        return out
    idx = np.floor(times / step + 1e-9).astype(int)
    owner = idx // chunk

    def fill(c, f, grid_vals):
        sel = owner == c
        if np.any(sel):
            local = idx[sel] - c * chunk
            frac = (times[sel] - idx[sel] * step).reshape((-1,) + (1,) * (f.ndim - 1))
            out[sel] = grid_vals[local] + 0.5 * (f[local] + f_t[sel]) * frac

    if checkpoints is not None and int(owner.max()) < len(checkpoints):
        # A checkpoint equals the running base the full loop carries into its
        # chunk, so integrating only the chunks that hold requested times is exact.
        for c in np.unique(owner):
            last = min((int(c) + 1) * chunk, int(idx[owner == c].max()))
            for item in _chunk_values(integrand, step, chunk, int(c), last, checkpoints[c]):
                fill(*item)
        return out
    for item in _chunk_values(integrand, step, chunk, 0, int(idx.max()), None):
        fill(*item)
    return out


def _unit(vecs, what: str) -> np.ndarray:
    norms = np.linalg.norm(vecs, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise DegenerateGeometryError(f"coincident endpoints in {what}")
    return vecs / norms


def _los_integrand(tx: MobilityProfile, rx: MobilityProfile, carrier: CarrierConfig):
    k = carrier.wavenumber

    def integrand(t):
        s_tx = _unit(rx.positions(t) - tx.positions(t), "LoS link")
        return k * (np.einsum("ti,ti->t", tx.velocities(t), s_tx)
                    - np.einsum("ti,ti->t", rx.velocities(t), s_tx))

    return integrand


def doppler_phase_los(tx: MobilityProfile, rx: MobilityProfile, carrier: CarrierConfig, times,
                      step: float = DEFAULT_STEP, checkpoints=None) -> np.ndarray:
    """Cumulative LoS Doppler phase ``k int_0^t (v_tx . s_tx + v_rx . s_rx) dt'``."""
    return integrate_cumulative(_los_integrand(tx, rx, carrier), np.atleast_1d(times), step,
                                checkpoints=checkpoints)


def _nlos_integrand(tx: MobilityProfile, rx: MobilityProfile, scat_tx, scat_rx, scat_vel,
                    carrier: CarrierConfig):
    k = carrier.wavenumber
    scat_tx, scat_rx = np.asarray(scat_tx, float), np.asarray(scat_rx, float)
    scat_vel = np.asarray(scat_vel, float)

    def integrand(t):
        shift = t[:, None, None, None] * scat_vel[None, :, None, :]
        s_tx = _unit(scat_tx[None] + shift - tx.positions(t)[:, None, None], "Tx-scatterer link")
        s_rx = _unit(scat_rx[None] + shift - rx.positions(t)[:, None, None], "Rx-scatterer link")
        rel_tx = tx.velocities(t)[:, None, :] - scat_vel[None]
        rel_rx = rx.velocities(t)[:, None, :] - scat_vel[None]
        return k * (np.einsum("tni,tnmi->tnm", rel_tx, s_tx) + np.einsum("tni,tnmi->tnm", rel_rx, s_rx))

    return integrand


def doppler_phase_nlos(tx: MobilityProfile, rx: MobilityProfile, scat_tx, scat_rx, scat_vel,
                       carrier: CarrierConfig, times, step: float = DEFAULT_STEP,
                       checkpoints=None) -> np.ndarray:
    """Cumulative NLoS Doppler phases, shape ``(T, N, M)``.

    ``scat_tx``/``scat_rx`` are the ``(N, M, 3)`` scatterer points at ``t = 0``
    and ``scat_vel`` the ``(N, 3)`` cluster velocities.
    """
    integrand = _nlos_integrand(tx, rx, scat_tx, scat_rx, scat_vel, carrier)
    return integrate_cumulative(integrand, np.atleast_1d(times), step, checkpoints=checkpoints)


def spatial_phase(k: float, element, rotation, direction) -> np.ndarray:
    """``k * (rotation @ element) . direction`` broadcast over leading axes.

    ``rotation`` is ``(T, 3, 3)``, ``direction`` ``(T, ..., 3)``.
    """
    world = np.einsum("tij,j->ti", rotation, as_vec3(element))
    shape = (world.shape[0],) + (1,) * (np.ndim(direction) - 2) + (3,)
    return k * np.sum(world.reshape(shape) * direction, axis=-1)


# Scene and trace --------------------------------------------------------------


@dataclass(frozen=True)
class Trace:
    """Deterministic scene geometry evaluated at ``times``."""

    times: np.ndarray
    tx_rot: np.ndarray       # (T, 3, 3) velocity rotation [@ posture]
    rx_rot: np.ndarray       # (T, 3, 3)
    s_tx_los: np.ndarray     # (T, 3)
    s_rx_los: np.ndarray     # (T, 3)
    s_tx: np.ndarray         # (T, N, M, 3)
    s_rx: np.ndarray         # (T, N, M, 3)
    doppler_los: np.ndarray  # (T,)
    doppler_nlos: np.ndarray  # (T, N, M)
    k_factor: np.ndarray     # (T,)
    los_delay: np.ndarray    # (T,)
    cluster_delays: np.ndarray  # (T, N)


@dataclass(frozen=True)
class Scene:
    """One fully specified channel scene. ``posture=False`` gives the reference
    model with the posture matrix removed from the Tx spatial phase."""

    carrier: CarrierConfig
    tx: MobilityProfile
    rx: MobilityProfile
    tx_array: AntennaArray
    rx_array: AntennaArray
    clusters: ClusterSet
    k_process: RiceanProcess = field(default_factory=RiceanProcess)
    posture: bool = True
    step: float = DEFAULT_STEP
    death_rate: float = 0.0
    birth_rate: float = 0.0
    metadata: tuple = ()

    @property
    def duration(self) -> float:
        return min(self.tx.duration, self.rx.duration)

    @property
    def wavenumber(self) -> float:
        return self.carrier.wavenumber

    def with_posture(self, enabled: bool) -> "Scene":
        """Same scene with the posture factor on or off; cached geometry is shared."""
        other = replace(self, posture=enabled)
        other.__dict__["scatterers"] = self.scatterers
        other.__dict__["doppler_checkpoints"] = self.doppler_checkpoints
        return other

    @cached_property
    def scatterers(self) -> dict[str, np.ndarray]:
        """Scatterer layout fixed at ``t = 0`` from the cluster angles."""
        cs = self.clusters
        ang = cs.angle_arrays()
        tx0, rx0 = self.tx.initial_position, self.rx.initial_position
        d_tx = np.array([c.tx_distance for c in cs.clusters])
        d_rx = np.array([c.rx_distance for c in cs.clusters])
        s_tx = tx0 + d_tx[:, None, None] * unit_vectors(ang["dep_az"], ang["dep_el"])
        s_rx = rx0 + d_rx[:, None, None] * unit_vectors(ang["arr_az"], ang["arr_el"])
        los0 = float(np.linalg.norm(rx0 - tx0))
        if los0 == 0.0:
            raise DegenerateGeometryError("Tx and Rx start at the same position")
        excess = np.array([c.delay for c in cs.clusters]) * self.carrier.c0
        virtual = np.maximum(los0 + excess - d_tx - d_rx, 0.0)
        return {
            "tx": s_tx,
            "rx": s_rx,
            "velocity": np.array([c.scatterer_velocity for c in cs.clusters], dtype=float).reshape(-1, 3),
            "virtual": virtual,
            "powers": cs.powers(),
            "alive": cs.alive_mask(),
        }

    @cached_property
    def doppler_checkpoints(self) -> tuple[np.ndarray, np.ndarray]:
        """Running LoS/NLoS Doppler integrals at chunk boundaries over the window."""
        sc = self.scatterers
        los = cumulative_checkpoints(_los_integrand(self.tx, self.rx, self.carrier), self.duration, self.step)
        nlos = cumulative_checkpoints(
            _nlos_integrand(self.tx, self.rx, sc["tx"], sc["rx"], sc["velocity"], self.carrier),
            self.duration, self.step)
        return los, nlos

    def los_angles_at_start(self):
        d = self.rx.initial_position - self.tx.initial_position
        return vector_angles(d), vector_angles(-d)

    def trace(self, times) -> Trace:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        if times.size and (times.min() < 0 or times.max() > self.duration + 1e-9):
            raise ValueError(f"times must lie in [0, {self.duration}]")
        sc = self.scatterers
        tx_pos, rx_pos = self.tx.positions(times), self.rx.positions(times)
        s_tx_los = _unit(rx_pos - tx_pos, "LoS link")
        shift = times[:, None, None, None] * sc["velocity"][None, :, None, :]
        d_tx = sc["tx"][None] + shift - tx_pos[:, None, None]
        d_rx = sc["rx"][None] + shift - rx_pos[:, None, None]
        s_tx = _unit(d_tx, "Tx-scatterer link")
        s_rx = _unit(d_rx, "Rx-scatterer link")
        lengths = (np.linalg.norm(d_tx, axis=-1) + np.linalg.norm(d_rx, axis=-1)).mean(axis=-1)
        tx_rot = self.tx.heading_rotations(times)
        if self.posture:
            tx_rot = tx_rot @ self.tx.posture_rotations(times)
        rx_rot = self.rx.heading_rotations(times)
        cp_los, cp_nlos = self.doppler_checkpoints
        return Trace(
            times=times,
            tx_rot=tx_rot,
            rx_rot=rx_rot,
            s_tx_los=s_tx_los,
            s_rx_los=-s_tx_los,
            s_tx=s_tx,
            s_rx=s_rx,
            doppler_los=doppler_phase_los(self.tx, self.rx, self.carrier, times, self.step, cp_los),
            doppler_nlos=doppler_phase_nlos(self.tx, self.rx, sc["tx"], sc["rx"], sc["velocity"],
                                            self.carrier, times, self.step, cp_nlos),
            k_factor=self.k_process.values(times),
            los_delay=np.linalg.norm(rx_pos - tx_pos, axis=-1) / self.carrier.c0,
            cluster_delays=(lengths + sc["virtual"][None]) / self.carrier.c0,
        )


# Coefficients -----------------------------------------------------------------


@dataclass(frozen=True)
class RealizationPhases:
    """Random initial phases of one channel realisation."""

    los: float
    cluster: np.ndarray  # (N,) on (0, 2*pi]
    pol: np.ndarray      # (N, M, 4) on (-pi, pi]: VV, VH, HV, HH

    @classmethod
    def draw(cls, rng: np.random.Generator, n: int, m: int) -> "RealizationPhases":
        return cls(float(draw_init_phases(rng, ())), draw_init_phases(rng, n), draw_pol_phases(rng, (n, m, 4)))

    @classmethod
    def from_clusters(cls, cset: ClusterSet, los: float) -> "RealizationPhases":
        cluster, pol = cset.phase_arrays()
        return cls(los, cluster, pol)


def _local(rot, dirs):
    """World directions ``(T, ..., 3)`` into the local frame of ``rot`` ``(T, 3, 3)``."""
    flat = dirs.reshape(dirs.shape[0], -1, 3)
    return np.einsum("tji,tkj->tki", rot, flat).reshape(dirs.shape)


def los_polarisation(scene: Scene, trace: Trace) -> np.ndarray:
    """``F_tx^T diag(1, -1) F_rx`` for the LoS path, shape ``(T,)``."""
    tv, th = scene.tx_array.field(_local(trace.tx_rot, trace.s_tx_los[:, None])[:, 0])
    rv, rh = scene.rx_array.field(_local(trace.rx_rot, trace.s_rx_los[:, None])[:, 0])
    return tv * rv - th * rh


def nlos_polarisation_weights(scene: Scene, trace: Trace) -> np.ndarray:
    """Per sub-path weights of the four polarisation phasors, shape ``(T, N, M, 4)``."""
    tv, th = scene.tx_array.field(_local(trace.tx_rot, trace.s_tx))
    rv, rh = scene.rx_array.field(_local(trace.rx_rot, trace.s_rx))
    cross = 1.0 / np.sqrt(scene.clusters.xpr_array())[None]
    return np.stack([tv * rv, cross * tv * rh, cross * th * rv, th * rh], axis=-1)


def effective_phase_los(scene: Scene, trace: Trace, r_tx, r_rx) -> np.ndarray:
    """Doppler plus spatial phase of the LoS path for elements at ``r_tx``/``r_rx``."""
    k = scene.wavenumber
    return (trace.doppler_los
            + spatial_phase(k, r_tx, trace.tx_rot, trace.s_tx_los)
            + spatial_phase(k, r_rx, trace.rx_rot, trace.s_rx_los))


def effective_phase_nlos(scene: Scene, trace: Trace, r_tx, r_rx) -> np.ndarray:
    """Doppler plus spatial phase of every sub-path, shape ``(T, N, M)``."""
    k = scene.wavenumber
    return (trace.doppler_nlos
            + spatial_phase(k, r_tx, trace.tx_rot, trace.s_tx)
            + spatial_phase(k, r_rx, trace.rx_rot, trace.s_rx))


def los_coefficient(scene: Scene, trace: Trace, p: int, q: int, init_phase: float = 0.0) -> np.ndarray:
    """Unweighted LoS coefficient of element pair ``(q, p)`` over the trace times."""
    phase = effective_phase_los(scene, trace, scene.tx_array.element_positions[p],
                                scene.rx_array.element_positions[q])
    return los_polarisation(scene, trace) * np.exp(1j * (init_phase + phase))


def nlos_coefficient(scene: Scene, trace: Trace, n: int, p: int, q: int,
                     phases: RealizationPhases) -> np.ndarray:
    """Unweighted coefficient of cluster ``n``: a ``1/sqrt(M)`` sum over its sub-paths."""
    if not scene.clusters.clusters[n].alive:
        return np.zeros(trace.times.shape, dtype=complex)
    m = scene.clusters.m_subpaths
    phase = effective_phase_nlos(scene, trace, scene.tx_array.element_positions[p],
                                 scene.rx_array.element_positions[q])[:, n]
    pol = nlos_polarisation_weights(scene, trace)[:, n]
    bilinear = np.sum(pol * np.exp(1j * phases.pol[n])[None], axis=-1)
    return np.sum(bilinear * np.exp(1j * (phases.cluster[n] + phase)), axis=-1) / math.sqrt(m)


def path_weights(trace: Trace) -> tuple[np.ndarray, np.ndarray]:
    """Ricean weights ``sqrt(K/(K+1))`` and ``sqrt(1/(K+1))`` over the trace."""
    k = trace.k_factor
    return np.sqrt(k / (k + 1)), np.sqrt(1 / (k + 1))


@dataclass(frozen=True)
class ChannelRealization:
    """CIR matrices on a time grid.

    ``los`` and ``nlos`` hold the weighted per-path terms so that
    ``H = los + nlos.sum(axis=1)``.
    """

    times: np.ndarray
    los: np.ndarray           # (T, Q, P)
    nlos: np.ndarray          # (T, N, Q, P)
    los_delay: np.ndarray     # (T,)
    cluster_delays: np.ndarray  # (T, N)
    alive: np.ndarray         # (T, N) bool
    metadata: dict = field(default_factory=dict)

    @property
    def H(self) -> np.ndarray:
        return self.los + self.nlos.sum(axis=1)


def _birth_death_mask(scene: Scene, times: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Alive flags ``(T, N)``; dead clusters are revived as births from the pool."""
    alive0 = scene.scatterers["alive"]
    n = alive0.size
    mask = np.empty((times.size, n), dtype=bool)
    state = alive0.copy()
    prev = times[0] if times.size else 0.0
    for i, t in enumerate(times):
        dt = t - prev
        prev = t
        if dt > 0 and (scene.death_rate > 0 or scene.birth_rate > 0):
            state &= rng.random(n) < math.exp(-scene.death_rate * dt)
            dead = np.flatnonzero(~state)
            n_born = min(int(rng.poisson(scene.birth_rate * dt)), dead.size)
            if n_born:
                state[rng.choice(dead, n_born, replace=False)] = True
        mask[i] = state
    return mask


def cir_matrices(scene: Scene, trace: Trace, phases: RealizationPhases,
                 alive: np.ndarray | None = None) -> ChannelRealization:
    """Assemble the weighted LoS and per-cluster terms for every element pair."""
    n_t = trace.times.size
    P, Q = scene.tx_array.size, scene.rx_array.size
    N, M = scene.clusters.clusters.__len__(), scene.clusters.m_subpaths
    w_los, w_nlos = path_weights(trace)
    if alive is None:
        alive = np.broadcast_to(scene.scatterers["alive"], (n_t, N))
    powers = scene.scatterers["powers"]
    # power renormalisation over the clusters alive at each time
    alive_power = np.where(alive, powers[None], 0.0)
    norm = alive_power.sum(axis=1, keepdims=True)
    gain = np.sqrt(np.divide(alive_power, norm, out=np.zeros_like(alive_power), where=norm > 0))
    los_pol = los_polarisation(scene, trace)
    pol = nlos_polarisation_weights(scene, trace)
    bilinear = np.sum(pol * np.exp(1j * phases.pol)[None], axis=-1)  # (T, N, M)
    los = np.empty((n_t, Q, P), dtype=complex)
    nlos = np.empty((n_t, N, Q, P), dtype=complex)
    for q in range(Q):
        r_rx = scene.rx_array.element_positions[q]
        for p in range(P):
            r_tx = scene.tx_array.element_positions[p]
            ph_l = effective_phase_los(scene, trace, r_tx, r_rx)
            los[:, q, p] = w_los * los_pol * np.exp(1j * (phases.los + ph_l))
            ph_n = effective_phase_nlos(scene, trace, r_tx, r_rx)
            terms = bilinear * np.exp(1j * (phases.cluster[None, :, None] + ph_n))
            nlos[:, :, q, p] = w_nlos[:, None] * gain * terms.sum(axis=-1) / math.sqrt(M)
    return ChannelRealization(
        times=trace.times,
        los=los,
        nlos=nlos,
        los_delay=trace.los_delay,
        cluster_delays=trace.cluster_delays,
        alive=np.asarray(alive, dtype=bool),
    )


def cir_matrix(scene: Scene, t: float, phases: RealizationPhases) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(H, tau_los, tau_clusters)`` at a single time ``t``."""
    real = cir_matrices(scene, scene.trace([t]), phases)
    return real.H[0], real.los_delay[0], real.cluster_delays[0]


def simulate(scene: Scene, times, seed: int = 0, phases: RealizationPhases | None = None) -> ChannelRealization:
    """One channel realisation on ``times``.

    All initial phases (LoS, per cluster, per sub-path polarisation) are drawn
    from ``seed`` unless ``phases`` is given; the birth-death draws use the
    same stream.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0x51,)))
    n, m = len(scene.clusters.clusters), scene.clusters.m_subpaths
    drawn = RealizationPhases.draw(rng, n, m)
    phases = drawn if phases is None else phases
    alive = None
    if scene.death_rate > 0 or scene.birth_rate > 0:
        alive = _birth_death_mask(scene, times, rng)
    real = cir_matrices(scene, scene.trace(times), phases, alive)
    meta = dict(scene.metadata)
    meta["seed"] = seed
    return ChannelRealization(real.times, real.los, real.nlos, real.los_delay, real.cluster_delays,
                              real.alive, meta)


def transfer_function(realization: ChannelRealization, f: float) -> np.ndarray:
    """Frequency response ``(T, Q, P)`` at baseband frequency ``f``."""
    los = realization.los * np.exp(-2j * math.pi * f * realization.los_delay)[:, None, None]
    nlos = realization.nlos * np.exp(-2j * math.pi * f * realization.cluster_delays)[:, :, None, None]
    return los + nlos.sum(axis=1)
