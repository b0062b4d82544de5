"""Spatial-temporal correlation: analytic expectations, Monte Carlo estimates, coherence time.

Every correlation is evaluated between a reference point ``(t, r_tx, r_rx)``
and a list of lagged points ``(t + dt_i, r_tx + dr_tx_i, r_rx + dr_rx_i)``.
Each point's channel is written as

    h_i = a_i * exp(j*phi_los) + sum_l b_il * exp(j*theta_l)

where ``a_i``/``b_il`` are deterministic (geometry, weights, polarisation)
and the phases are the independent uniform initial phases of one realisation.
The analytic expectation over those phases keeps only the diagonal terms; the
Monte Carlo estimator draws them.

Curves are normalised as ``E{h_0* h_i} / sqrt(E|h_0|^2 E|h_i|^2)``, which is
the zero-lag normalisation whenever the power is constant and guarantees
``|rho| <= 1`` otherwise.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .channel import (
    Scene,
    Trace,
    los_polarisation,
    nlos_polarisation_weights,
    path_weights,
)

BLOCK_SIZE = 50
ANALYTIC_CHUNK = 256
COMPONENTS = ("total", "los", "nlos")


class CurveParseError(ValueError):
    pass


@dataclass(frozen=True)
class CorrelationCurve:
    lags: np.ndarray
    values: np.ndarray
    kind: str = "ACF"
    anchor_time: float = 0.0
    normalized: bool = True
    stderr: np.ndarray | None = None
    lag_unit: str = "s"
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("ACF", "CCF", "STCF"):
            raise ValueError(f"unknown curve kind {self.kind!r}")
        lags = np.asarray(self.lags, dtype=float)
        values = np.asarray(self.values, dtype=complex)
        if lags.shape != values.shape or lags.ndim != 1:
            raise ValueError("lags and values must be 1-D and of equal length")
        object.__setattr__(self, "lags", lags)
        object.__setattr__(self, "values", values)

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)


# Points and amplitudes ---------------------------------------------------------


@dataclass(frozen=True)
class _Points:
    """Deterministic amplitudes of one scene at a set of space-time points."""

    a: np.ndarray        # (P,) LoS amplitude
    b: np.ndarray        # (P, N, M*4) sub-path/polarisation amplitudes
    lag: np.ndarray      # (P,) time lag from the reference point
    n: int
    m: int


def _as_offsets(x, n: int) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = np.broadcast_to(arr, (n, 3))
    return arr.reshape(n, 3)


def _check_component(component: str) -> None:
    if component not in COMPONENTS:
        raise ValueError(f"component must be one of {COMPONENTS}, got {component!r}")


def _point_amplitudes(scene: Scene, t: float, lags, r_tx, r_rx, f: float = 0.0,
                      component: str = "total", clusters: Sequence[int] | None = None) -> _Points:
    """Amplitudes at points ``(t + lags[i], r_tx[i], r_rx[i])``."""
    _check_component(component)
    lags = np.asarray(lags, dtype=float)
    n_pts = lags.size
    r_tx, r_rx = _as_offsets(r_tx, n_pts), _as_offsets(r_rx, n_pts)
    times, inv = np.unique(t + lags, return_inverse=True)
    tr: Trace = scene.trace(times)
    k = scene.wavenumber
    nc, m = len(scene.clusters.clusters), scene.clusters.m_subpaths

    w_los, w_nlos = path_weights(tr)
    tx_world = np.einsum("pij,pj->pi", tr.tx_rot[inv], r_tx)
    rx_world = np.einsum("pij,pj->pi", tr.rx_rot[inv], r_rx)

    phase_los = (tr.doppler_los[inv]
                 + k * np.sum(tx_world * tr.s_tx_los[inv], -1)
                 + k * np.sum(rx_world * tr.s_rx_los[inv], -1))
    a = (w_los[inv] * los_polarisation(scene, tr)[inv]
         * np.exp(1j * phase_los) * np.exp(-2j * math.pi * f * tr.los_delay[inv]))

    phase_nlos = (tr.doppler_nlos[inv]
                  + k * np.sum(tx_world[:, None, None] * tr.s_tx[inv], -1)
                  + k * np.sum(rx_world[:, None, None] * tr.s_rx[inv], -1))
    sc = scene.scatterers
    keep = sc["alive"].copy()
    if clusters is not None:
        sel = np.zeros(nc, dtype=bool)
        sel[list(clusters)] = True
        keep &= sel
    gain = np.sqrt(np.where(keep, sc["powers"], 0.0) / np.sum(np.where(sc["alive"], sc["powers"], 0.0)))
    scale = w_nlos[inv][:, None] * gain[None] / math.sqrt(m)
    delay = np.exp(-2j * math.pi * f * tr.cluster_delays[inv])
    pol = nlos_polarisation_weights(scene, tr)[inv]  # (P, N, M, 4)
    b = (scale * delay)[:, :, None, None] * pol * np.exp(1j * phase_nlos)[..., None]
    if component == "los":
        b = np.zeros_like(b)
    elif component == "nlos":
        a = np.zeros_like(a)
    return _Points(a=a, b=b.reshape(n_pts, nc, m * 4), lag=lags, n=nc, m=m)


def _survival(scene: Scene, lags: np.ndarray) -> np.ndarray:
    return np.exp(-scene.death_rate * np.abs(lags))


def _normalise(num, p0, pi):
    denom = np.sqrt(p0 * pi)
    return np.divide(num, denom, out=np.zeros_like(num), where=denom > 0)


def _scenes(scene) -> list[Scene]:
    return list(scene) if isinstance(scene, (list, tuple)) else [scene]


def _power(pts: _Points) -> np.ndarray:
    return np.abs(pts.a) ** 2 + np.sum(np.abs(pts.b) ** 2, axis=(1, 2))


def _analytic_curve(scenes, t, lags, r_tx, r_rx, normalize: bool, chunk: int = ANALYTIC_CHUNK,
                    **kw) -> np.ndarray:
    """Expectation over the initial phases, averaged over ``scenes``.

    Distinct sub-paths carry independent phases, so only the diagonal terms
    survive: ``E{h_0* h_i} = a_0* a_i + sum_l b_0l* b_il``. Points are
    evaluated in chunks so fine lag grids stay within memory.
    """
    n = lags.size
    num = np.zeros(n, dtype=complex)
    power = np.zeros(n)
    for s in scenes:
        ref = _point_amplitudes(s, t, lags[:1], r_tx[:1], r_rx[:1], **kw)
        for i0 in range(0, n, chunk):
            sl = slice(i0, min(i0 + chunk, n))
            pts = _point_amplitudes(s, t, lags[sl], r_tx[sl], r_rx[sl], **kw)
            cross = np.einsum("nl,inl->i", ref.b[0].conj(), pts.b)
            num[sl] += ref.a[0].conj() * pts.a + _survival(s, pts.lag) * cross
            power[sl] += _power(pts)
    num, power = num / len(scenes), power / len(scenes)
    return _normalise(num, power[0], power) if normalize else num


def _element(array, idx):
    return array.element_positions[idx]


def analytic_stcf(scene, t: float, dt: float = 0.0, delta_r_tx=(0.0, 0.0, 0.0),
                  delta_r_rx=(0.0, 0.0, 0.0), p: int = 0, q: int = 0, f: float = 0.0,
                  component: str = "total", clusters=None, normalize: bool = True) -> complex:
    """Space-time correlation between element pair ``(q, p)`` at ``t`` and the
    pair displaced by ``delta_r_tx``/``delta_r_rx`` (local frames) at ``t + dt``."""
    scenes = _scenes(scene)
    r_tx0 = _element(scenes[0].tx_array, p)
    r_rx0 = _element(scenes[0].rx_array, q)
    lags = np.array([0.0, dt])
    r_tx = np.stack([r_tx0, r_tx0 + np.asarray(delta_r_tx, float)])
    r_rx = np.stack([r_rx0, r_rx0 + np.asarray(delta_r_rx, float)])
    return complex(_analytic_curve(scenes, t, lags, r_tx, r_rx, normalize, f=f, component=component,
                                   clusters=clusters)[1])


def _acf_geometry(scene: Scene, lags, p, q):
    lags = np.asarray(lags, dtype=float)
    if lags.ndim != 1 or lags.size == 0:
        raise ValueError("lags must be a non-empty 1-D array")
    if lags[0] != 0.0:
        lags = np.concatenate([[0.0], lags])
    n = lags.size
    r_tx = np.broadcast_to(_element(scene.tx_array, p), (n, 3))
    r_rx = np.broadcast_to(_element(scene.rx_array, q), (n, 3))
    return lags, r_tx, r_rx


def array_axis(array) -> np.ndarray:
    """Unit axis through the first two elements (local +x for single elements)."""
    pos = array.element_positions
    if pos.shape[0] > 1 and np.linalg.norm(pos[1] - pos[0]) > 0:
        d = pos[1] - pos[0]
        return d / np.linalg.norm(d)
    return np.array([1.0, 0.0, 0.0])


def _ccf_geometry(scene: Scene, spacings, p, q, side: str, axis):
    spacings = np.asarray(spacings, dtype=float)
    if spacings.ndim != 1 or spacings.size == 0:
        raise ValueError("spacings must be a non-empty 1-D array")
    if spacings[0] != 0.0:
        spacings = np.concatenate([[0.0], spacings])
    if side not in ("tx", "rx", "both"):
        raise ValueError("side must be 'tx', 'rx' or 'both'")
    lam = scene.carrier.wavelength
    n = spacings.size
    r_tx = np.tile(_element(scene.tx_array, p), (n, 1))
    r_rx = np.tile(_element(scene.rx_array, q), (n, 1))
    if side in ("tx", "both"):
        ax = array_axis(scene.tx_array) if axis is None else np.asarray(axis, float)
        r_tx = r_tx + spacings[:, None] * lam * ax
    if side in ("rx", "both"):
        ax = array_axis(scene.rx_array) if axis is None else np.asarray(axis, float)
        r_rx = r_rx + spacings[:, None] * lam * ax
    return spacings, r_tx, r_rx


def analytic_acf(scene, t: float, lags, p: int = 0, q: int = 0, f: float = 0.0,
                 component: str = "total", clusters=None, normalize: bool = True) -> CorrelationCurve:
    """Time-variant ACF of element pair ``(q, p)`` at anchor ``t``."""
    scenes = _scenes(scene)
    lags, r_tx, r_rx = _acf_geometry(scenes[0], lags, p, q)
    values = _analytic_curve(scenes, t, lags, r_tx, r_rx, normalize, f=f, component=component,
                             clusters=clusters)
    return CorrelationCurve(lags, values, "ACF", t, normalize,
                            label=f"analytic {component}")


def analytic_ccf(scene, t: float, spacings, p: int = 0, q: int = 0, side: str = "tx", axis=None,
                 component: str = "total", clusters=None, normalize: bool = True) -> CorrelationCurve:
    """Spatial CCF at time ``t`` against element spacing in carrier wavelengths."""
    scenes = _scenes(scene)
    spacings, r_tx, r_rx = _ccf_geometry(scenes[0], spacings, p, q, side, axis)
    values = _analytic_curve(scenes, t, np.zeros(spacings.size), r_tx, r_rx, normalize,
                             component=component, clusters=clusters)
    return CorrelationCurve(spacings, values, "CCF", t, normalize,
                            lag_unit="wavelength", label=f"analytic {component}")


# Monte Carlo -------------------------------------------------------------------


def _stcf_points(scenes, t, lags, r_tx, r_rx, **kw) -> list[_Points]:
    return [_point_amplitudes(s, t, lags, r_tx, r_rx, **kw) for s in scenes]


def _block_seed(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0x4D43, block)))


def _block_sums(scene: Scene, pts: _Points, active: np.ndarray, seed: int, block: int, size: int):
    rng = _block_seed(seed, block)
    n, m = pts.n, pts.m
    los_phase = 2 * math.pi - rng.uniform(0.0, 2 * math.pi, size)
    cluster_phase = 2 * math.pi - rng.uniform(0.0, 2 * math.pi, (size, n))
    pol_phase = math.pi - rng.uniform(0.0, 2 * math.pi, (size, n, m, 4))
    theta = (cluster_phase[:, :, None, None] + pol_phase).reshape(size, n, m * 4)
    x = np.exp(1j * theta)
    h = pts.a[None] * np.exp(1j * los_phase)[:, None]
    if scene.death_rate > 0:
        death = rng.exponential(1.0 / scene.death_rate, (size, n))
        alive = death[:, None, :] > np.abs(pts.lag)[None, :, None]  # (R, P, N)
        y = np.einsum("pnl,rnl->rpn", pts.b, x)
        h = h + np.sum(np.where(alive, y, 0.0), axis=-1)
    else:
        flat_b = pts.b.reshape(pts.b.shape[0], -1)[:, active]
        flat_x = x.reshape(size, -1)[:, active]
        h = h + flat_x @ flat_b.T
    prod = h[:, :1].conj() * h
    return prod.sum(0), (np.abs(prod) ** 2).sum(0), (np.abs(h) ** 2).sum(0)


def _mc_curve(scenes, pts_list, n_realizations: int, seed: int, workers: int, normalize: bool):
    if n_realizations < 2:
        raise ValueError("need at least 2 realisations")
    n_blocks = math.ceil(n_realizations / BLOCK_SIZE)
    sizes = [min(BLOCK_SIZE, n_realizations - b * BLOCK_SIZE) for b in range(n_blocks)]
    actives = []
    for pts in pts_list:
        flat = pts.b.reshape(pts.b.shape[0], -1)
        actives.append(np.flatnonzero(np.any(flat != 0, axis=0)))

    def job(b):
        i = b % len(scenes)
        return _block_sums(scenes[i], pts_list[i], actives[i], seed, b, sizes[b])

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, range(n_blocks)))
    else:
        results = [job(b) for b in range(n_blocks)]
    s_prod = np.zeros_like(results[0][0])
    s_sq = np.zeros_like(results[0][1])
    s_pow = np.zeros_like(results[0][2])
    for prod, sq, pw in results:  # fixed reduction order
        s_prod = s_prod + prod
        s_sq = s_sq + sq
        s_pow = s_pow + pw
    r = n_realizations
    mean = s_prod / r
    power = s_pow / r
    var = np.maximum(s_sq / r - np.abs(mean) ** 2, 0.0)
    stderr = np.sqrt(var / r)
    if not normalize:
        return mean, stderr
    denom = np.sqrt(power[0] * power)
    return _normalise(mean, power[0], power), np.divide(stderr, denom, out=np.zeros_like(stderr),
                                                         where=denom > 0)


def mc_acf(scene, t: float, lags, n_realizations: int = 1000, seed: int = 0, p: int = 0, q: int = 0,
           f: float = 0.0, component: str = "total", clusters=None, workers: int = 1,
           normalize: bool = True) -> CorrelationCurve:
    """Ensemble ACF over independent initial-phase draws.

    With a list of scenes, realisation blocks cycle through them.
    """
    scenes = _scenes(scene)
    lags, r_tx, r_rx = _acf_geometry(scenes[0], lags, p, q)
    pts = _stcf_points(scenes, t, lags, r_tx, r_rx, f=f, component=component, clusters=clusters)
    values, stderr = _mc_curve(scenes, pts, n_realizations, seed, workers, normalize)
    return CorrelationCurve(lags, values, "ACF", t, normalize, stderr, label=f"simulated {component}")


def mc_ccf(scene, t: float, spacings, n_realizations: int = 1000, seed: int = 0, p: int = 0, q: int = 0,
           side: str = "tx", axis=None, component: str = "total", clusters=None, workers: int = 1,
           normalize: bool = True) -> CorrelationCurve:
    """Ensemble CCF across virtual elements placed along the array axis."""
    scenes = _scenes(scene)
    spacings, r_tx, r_rx = _ccf_geometry(scenes[0], spacings, p, q, side, axis)
    pts = _stcf_points(scenes, t, np.zeros(spacings.size), r_tx, r_rx, component=component,
                       clusters=clusters)
    values, stderr = _mc_curve(scenes, pts, n_realizations, seed, workers, normalize)
    return CorrelationCurve(spacings, values, "CCF", t, normalize, stderr, lag_unit="wavelength",
                            label=f"simulated {component}")


# Coherence time ------------------------------------------------------------------


def coherence_time(curve: CorrelationCurve, threshold: float = 0.5, part: str = "abs") -> float | None:
    """Smallest lag at which the ACF first drops below ``threshold``.

    ``part`` selects ``abs`` (envelope) or ``real``; a deterministic phasor
    never loses magnitude, so its decorrelation only shows in the real part.
    Linear interpolation between grid points; ``None`` if never crossed.
    """
    if curve.kind != "ACF":
        raise ValueError("coherence time needs an ACF curve")
    if part == "abs":
        y = np.abs(curve.values)
    elif part == "real":
        y = curve.values.real
    else:
        raise ValueError("part must be 'abs' or 'real'")
    below = np.flatnonzero(y < threshold)
    if below.size == 0:
        return None
    i = int(below[0])
    if i == 0:
        return float(curve.lags[0])
    x0, x1 = curve.lags[i - 1], curve.lags[i]
    y0, y1 = y[i - 1], y[i]
    return float(x0 + (threshold - y0) * (x1 - x0) / (y1 - y0))


# Curve files ---------------------------------------------------------------------

CURVE_HEADER = ("lag", "re", "im", "abs")


def format_curve(curve: CorrelationCurve) -> str:
    buf = io.StringIO()
    buf.write(",".join(CURVE_HEADER) + "\n")
    for lag, v in zip(curve.lags, curve.values):
        buf.write(f"{float(lag)!r},{float(v.real)!r},{float(v.imag)!r},{float(abs(v))!r}\n")
    return buf.getvalue()


def write_curve(curve: CorrelationCurve, path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_curve(curve))
    return path


def ingest_reference_curve(path, kind: str = "ACF", anchor_time: float = 0.0) -> CorrelationCurve:
    """Parse a ``lag,re,im,abs`` CSV into a curve; errors carry the line number."""
    lags, values = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CURVE_HEADER:
            raise CurveParseError(f"line 1: expected header {','.join(CURVE_HEADER)}, got {header}")
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise CurveParseError(f"line {line}: expected 4 columns, got {len(row)}")
            try:
                lag, re_, im_, ab = (float(c) for c in row)
            except ValueError as exc:
                raise CurveParseError(f"line {line}: {exc}") from None
            if not all(math.isfinite(v) for v in (lag, re_, im_, ab)):
                raise CurveParseError(f"line {line}: non-finite value")
            if abs(math.hypot(re_, im_) - ab) > 1e-9 * max(1.0, ab):
                raise CurveParseError(f"line {line}: abs column disagrees with re/im")
            if lags and lag <= lags[-1]:
                raise CurveParseError(f"line {line}: lags must be strictly increasing")
            lags.append(lag)
            values.append(complex(re_, im_))
    if not lags:
        raise CurveParseError("no data rows")
    unit = "s" if kind == "ACF" else "wavelength"
    return CorrelationCurve(np.array(lags), np.array(values), kind, anchor_time,
                            normalized=True, lag_unit=unit, label=str(path))


@dataclass(frozen=True)
class CurveComparison:
    lags: np.ndarray
    reference: np.ndarray
    candidate: np.ndarray
    max_abs_deviation: float   # max | |a| - |b| |
    max_complex_deviation: float  # max |a - b|

    def as_dict(self) -> dict:
        return {
            "n_points": int(self.lags.size),
            "lag_min": float(self.lags[0]),
            "lag_max": float(self.lags[-1]),
            "max_abs_deviation": self.max_abs_deviation,
            "max_complex_deviation": self.max_complex_deviation,
        }


def _mean_spacing(lags):
    return (lags[-1] - lags[0]) / max(lags.size - 1, 1)


def compare_curves(reference: CorrelationCurve, candidate: CorrelationCurve) -> CurveComparison:
    """Compare two curves on the coarser of their two lag grids.

    The finer curve is linearly interpolated (real and imaginary parts) onto
    the coarser grid, restricted to the overlapping lag range.
    """
    coarse_is_ref = _mean_spacing(reference.lags) >= _mean_spacing(candidate.lags)
    coarse, fine = (reference, candidate) if coarse_is_ref else (candidate, reference)
    lo = max(coarse.lags[0], fine.lags[0])
    hi = min(coarse.lags[-1], fine.lags[-1])
    sel = (coarse.lags >= lo - 1e-15) & (coarse.lags <= hi + 1e-15)
    if not np.any(sel):
        raise ValueError("curves have no overlapping lag range")
    grid = coarse.lags[sel]
    on_grid = coarse.values[sel]
    interp = np.interp(grid, fine.lags, fine.values.real) + 1j * np.interp(grid, fine.lags, fine.values.imag)
    ref_v, cand_v = (on_grid, interp) if coarse_is_ref else (interp, on_grid)
    return CurveComparison(
        lags=grid,
        reference=ref_v,
        candidate=cand_v,
        max_abs_deviation=float(np.max(np.abs(np.abs(ref_v) - np.abs(cand_v)))),
        max_complex_deviation=float(np.max(np.abs(ref_v - cand_v))),
    )
