import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st
from scipy import special

from u2vchan.channel import AntennaArray
from u2vchan.geometry import SphericalAngles
from u2vchan.mobility import MobilityProfile, preset_scenario
from u2vchan.scenario import Cluster, ClusterSet, RiceanProcess, SubPath
from u2vchan.stats import (
    CorrelationCurve,
    CurveParseError,
    analytic_acf,
    analytic_ccf,
    analytic_stcf,
    coherence_time,
    compare_curves,
    ingest_reference_curve,
    mc_acf,
    mc_ccf,
    write_curve,
)

from conftest import small_scene

LAGS = np.linspace(0, 0.02, 41)


@pytest.fixture(scope="module")
def scene():
    return small_scene(n=3, m=6, mean_k=1.5)


def test_zero_lag_is_one(scene):
    assert analytic_stcf(scene, 0.3) == pytest.approx(1.0)
    acf = analytic_acf(scene, 0.3, LAGS)
    assert acf.values[0] == pytest.approx(1.0)
    assert acf.kind == "ACF" and acf.anchor_time == 0.3


def test_static_strong_los_stays_correlated():
    tx, rx = preset_scenario("static")
    sc = replace(small_scene(mean_k=1e12), tx=tx, rx=rx)
    np.testing.assert_allclose(analytic_acf(sc, 0.5, LAGS).values, 1.0, atol=1e-9)


def test_straight_line_los_is_unit_phasor(scene):
    acf = analytic_acf(scene, 0.2, LAGS, component="los")
    np.testing.assert_allclose(acf.magnitude, 1.0, atol=1e-12)
    assert acf.values[1:].real.min() < 0.99


def test_ccf_zero_spacing_and_los_magnitude(scene):
    ccf = analytic_ccf(scene, 0.1, np.linspace(0, 2, 21))
    assert ccf.values[0] == pytest.approx(1.0)
    assert ccf.lag_unit == "wavelength"
    los = analytic_ccf(scene, 0.1, np.linspace(0, 2, 21), component="los")
    np.testing.assert_allclose(los.magnitude, 1.0, atol=1e-12)


def test_hermitian_symmetry(scene):
    fwd = analytic_stcf(scene, 0.3, 0.004)
    back = analytic_stcf(scene, 0.304, -0.004)
    assert back == pytest.approx(fwd.conjugate(), abs=1e-12)


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(t=st.floats(0.0, 0.8), dt=st.floats(-0.1, 0.1), dx=st.floats(-0.5, 0.5),
       comp=st.sampled_from(["total", "los", "nlos"]))
def test_correlation_bounded(scene, t, dt, dx, comp):
    t1 = min(max(t + dt, 0.0), 1.0)
    rho = analytic_stcf(scene, t, t1 - t, (dx, 0.0, 0.0), (0.0, dx, 0.0), component=comp)
    assert abs(rho) <= 1.0 + 1e-9


def _clarke_scene(m=360):
    carrier_scene = small_scene()
    ring = [SphericalAngles((k + 0.5) * 2 * math.pi / m, 0.0) for k in range(m)]
    subs = tuple(SubPath(SphericalAngles(0.0, 0.0), a, (0.0, 0.0, 0.0, 0.0), xpr=1e12) for a in ring)
    cs = ClusterSet((Cluster(subs, 0.0, 1.0, tx_distance=100.0, rx_distance=30.0),), m)
    rx = MobilityProfile.constant_velocity([200.0, 0.0, 0.0], 0.0, 0.0, duration=1.0)
    lam = carrier_scene.carrier.wavelength
    return replace(carrier_scene, rx=rx, clusters=cs, rx_array=AntennaArray.ula(2, lam / 2, (1, 0, 0)),
                   k_process=RiceanProcess(1e-9, 0.0, 0.1, 0), posture=False)


def test_isotropic_ring_matches_clarke():
    sc = _clarke_scene()
    d = np.linspace(0, 0.38, 39)
    ccf = analytic_ccf(sc, 0.0, d, side="rx", component="nlos")
    np.testing.assert_allclose(ccf.values.real, special.j0(2 * math.pi * d), atol=1e-6)
    np.testing.assert_allclose(ccf.values.imag, 0.0, atol=1e-6)


def test_mc_matches_analytic(scene):
    ana = analytic_acf(scene, 0.2, LAGS)
    mc = mc_acf(scene, 0.2, LAGS, n_realizations=2000, seed=4)
    assert np.max(np.abs(mc.values - ana.values)) < 0.08
    ana_c = analytic_ccf(scene, 0.2, np.linspace(0, 1, 11))
    mc_c = mc_ccf(scene, 0.2, np.linspace(0, 1, 11), n_realizations=2000, seed=4)
    assert np.max(np.abs(mc_c.values - ana_c.values)) < 0.08


def test_mc_stderr_scales(scene):
    small = mc_acf(scene, 0.2, LAGS, n_realizations=500, seed=1)
    big = mc_acf(scene, 0.2, LAGS, n_realizations=2000, seed=1)
    ratio = np.mean(small.stderr[1:]) / np.mean(big.stderr[1:])
    assert ratio == pytest.approx(2.0, rel=0.15)


def test_mc_error_shrinks_like_inverse_sqrt(scene):
    ana = analytic_acf(scene, 0.2, LAGS).values
    errs = {}
    for n in (250, 1000, 4000):
        errs[n] = np.mean([np.sqrt(np.mean(np.abs(mc_acf(scene, 0.2, LAGS, n, seed=s).values - ana) ** 2))
                           for s in range(8)])
    assert errs[250] / errs[1000] == pytest.approx(2.0, rel=0.35)
    assert errs[1000] / errs[4000] == pytest.approx(2.0, rel=0.35)


def test_mc_worker_count_invariant(scene):
    a = mc_acf(scene, 0.2, LAGS, n_realizations=230, seed=9, workers=1)
    b = mc_acf(scene, 0.2, LAGS, n_realizations=230, seed=9, workers=4)
    np.testing.assert_array_equal(a.values, b.values)


def test_mc_argument_errors(scene):
    with pytest.raises(ValueError):
        mc_acf(scene, 0.2, LAGS, n_realizations=1)
    with pytest.raises(ValueError):
        mc_acf(scene, 0.2, LAGS, component="diffuse")
    with pytest.raises(ValueError):
        mc_ccf(scene, 0.2, [0.0, 0.5], side="left")


def test_death_rate_decays_nlos(scene):
    dying = replace(scene, death_rate=20.0)
    a = analytic_acf(scene, 0.1, LAGS, component="nlos").values
    b = analytic_acf(dying, 0.1, LAGS, component="nlos").values
    np.testing.assert_allclose(b, a * np.exp(-20.0 * LAGS), atol=1e-12)


def test_coherence_time_cases():
    lags = np.linspace(0, 1, 11)
    lin = CorrelationCurve(lags, 1 - lags)
    assert coherence_time(lin) == pytest.approx(0.5)
    assert coherence_time(lin, threshold=0.75) == pytest.approx(0.25)
    assert coherence_time(CorrelationCurve(lags, np.ones(11))) is None
    rot = CorrelationCurve(lags, np.exp(1j * math.pi * lags))
    assert coherence_time(rot) is None
    assert coherence_time(rot, part="real") == pytest.approx(1 / 3, abs=0.01)
    with pytest.raises(ValueError):
        coherence_time(CorrelationCurve(lags, 1 - lags, kind="CCF"))
    with pytest.raises(ValueError):
        coherence_time(lin, part="imag")


@given(tau=st.floats(0.05, 0.9))
def test_coherence_time_recovers_exponential(tau):
    lags = np.linspace(0, 5, 2001)
    c = CorrelationCurve(lags, np.exp(-lags * math.log(2) / tau))
    assert coherence_time(c) == pytest.approx(tau, rel=1e-3)


def test_curve_round_trip(tmp_path, scene):
    acf = analytic_acf(scene, 0.1, LAGS)
    path = write_curve(acf, tmp_path / "acf.csv")
    back = ingest_reference_curve(path)
    np.testing.assert_array_equal(back.lags, acf.lags)
    np.testing.assert_array_equal(back.values, acf.values)


@pytest.mark.parametrize("body, line", [
    ("lag,re,im,abs\n0,1,0,1\n0.2,0.5,0,0.5\n0.1,0.2,0,0.2\n", 4),
    ("lag,re,im,abs\n0,1,0,1\n0.1,0.5,0\n", 3),
    ("lag,re,im,abs\n0,1,0,1\n0.1,0.5,0,0.9\n", 3),
    ("lag,re,im,abs\n0,1,0,1\n0.1,nan,0,0.5\n", 3),
    ("lag,re,im,abs\n0,x,0,1\n", 2),
    ("t,re,im,abs\n0,1,0,1\n", 1),
])
def test_ingest_errors_name_the_line(tmp_path, body, line):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(CurveParseError, match=f"line {line}"):
        ingest_reference_curve(path)


def test_compare_on_coarser_grid():
    coarse = CorrelationCurve(np.array([0.0, 0.5, 1.0]), np.array([1.0, 0.5, 0.0]))
    fine_lags = np.linspace(0, 1, 101)
    fine = CorrelationCurve(fine_lags, 1 - fine_lags + 0.01j)
    cmp = compare_curves(fine, coarse)
    assert cmp.lags.size == 3
    np.testing.assert_allclose(cmp.lags, coarse.lags)
    assert cmp.max_abs_deviation == pytest.approx(abs(abs(0.01j) - 0.0), abs=1e-9)
    assert cmp.max_complex_deviation == pytest.approx(0.01)
    assert cmp.as_dict()["n_points"] == 3
