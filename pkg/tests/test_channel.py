import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import integrate, stats

from u2vchan.channel import (
    C0,
    AntennaArray,
    CarrierConfig,
    ChannelRealization,
    DegenerateGeometryError,
    RealizationPhases,
    cir_matrices,
    cir_matrix,
    doppler_phase_los,
    doppler_phase_nlos,
    integrate_cumulative,
    isotropic_pattern,
    los_coefficient,
    nlos_coefficient,
    path_weights,
    simulate,
    spatial_phase,
    transfer_function,
    tr38901_pattern,
)
from u2vchan.mobility import MobilityProfile, Schedule, preset_scenario
from u2vchan.scenario import RiceanProcess

from conftest import small_scene

CARRIER = CarrierConfig(2.4e9)
K = CARRIER.wavenumber


def line(pos, speed, az, duration=1.0, el=0.0):
    return MobilityProfile.constant_velocity(pos, speed, az, el, duration=duration)


def test_carrier_wavenumber():
    assert K == pytest.approx(50.30, abs=0.01)
    assert CARRIER.wavelength == pytest.approx(C0 / 2.4e9)
    with pytest.raises(ValueError):
        CarrierConfig(-1.0)


def test_los_doppler_closed_form():
    tx = line([0, 0, 0], 50.0, 0.0)
    rx = line([1e9, 0, 0], 0.0, 0.0)
    phi = doppler_phase_los(tx, rx, CARRIER, [0.0, 1e-3, 0.5])
    assert phi[0] == 0.0
    assert phi[1] == pytest.approx(2.515, abs=5e-4)
    np.testing.assert_allclose(phi, K * 50.0 * np.array([0.0, 1e-3, 0.5]), atol=1e-9)


def test_los_doppler_static_is_zero():
    tx, rx = preset_scenario("static")
    assert np.all(doppler_phase_los(tx, rx, CARRIER, np.linspace(0, 2, 9)) == 0.0)


def test_nlos_doppler_co_moving_is_zero():
    tx = line([0, 0, 100], 5.0, 0.9273)
    rx = line([100, 0, 0], 5.0, 0.9273)
    vel = tx.velocities(np.array([0.0]))
    scat = np.array([[[50.0, 50.0, 20.0]]])
    phi = doppler_phase_nlos(tx, rx, scat, scat + 1.0, vel, CARRIER, np.linspace(0, 1, 5))
    np.testing.assert_allclose(phi, 0.0, atol=1e-12)


def test_nlos_doppler_constant_geometry_linear():
    tx = line([0, 0, 0], 50.0, 0.0)
    rx = line([500, 0, 0], 10.0, math.pi / 2)
    scat_tx = np.array([[[1e12, 0.0, 0.0]]])
    scat_rx = np.array([[[500.0, 1e12, 0.0]]])
    t = np.array([0.0, 0.123, 0.77, 1.0])
    phi = doppler_phase_nlos(tx, rx, scat_tx, scat_rx, np.zeros((1, 3)), CARRIER, t)
    np.testing.assert_allclose(phi[:, 0, 0], K * 60.0 * t, atol=1e-9)


def test_nlos_doppler_against_quadrature():
    tx = MobilityProfile([0, 0, 120], Schedule.constant(40.0), Schedule.ramp(0.0, 1.2, 0.0, 1.0),
                         Schedule.constant(0.1), duration=1.0)
    rx = line([80, 30, 0], 15.0, 2.0)
    p_tx, p_rx = np.array([60.0, -20.0, 30.0]), np.array([90.0, 60.0, 5.0])
    v_s = np.array([1.0, -2.0, 0.0])

    def integrand(t):
        ta = np.array([t])
        d1 = p_tx + v_s * t - tx.positions(ta)[0]
        d2 = p_rx + v_s * t - rx.positions(ta)[0]
        return K * ((tx.velocities(ta)[0] - v_s) @ d1 / np.linalg.norm(d1)
                    + (rx.velocities(ta)[0] - v_s) @ d2 / np.linalg.norm(d2))

    expected = integrate.quad(integrand, 0.0, 0.8, epsabs=1e-11, limit=200)[0]
    phi = doppler_phase_nlos(tx, rx, p_tx[None, None], p_rx[None, None], v_s[None], CARRIER, [0.8])
    assert phi[0, 0, 0] == pytest.approx(expected, abs=1e-6)


def test_integration_independent_of_request_set():
    f = lambda t: np.sin(7 * t)[:, None] * np.array([1.0, 2.0])  # noqa: E731
    times = np.array([0.05, 0.31, 0.5, 0.2049])
    all_at_once = integrate_cumulative(f, times, 1e-4, chunk=64)
    for i, t in enumerate(times):
        np.testing.assert_array_equal(integrate_cumulative(f, [t], 1e-4, chunk=64)[0], all_at_once[i])
    exact = (1 - np.cos(7 * times)) / 7
    np.testing.assert_allclose(all_at_once[:, 0], exact, atol=1e-8)


def test_checkpoints_do_not_change_values(fig3_scene):
    t = np.array([0.9, 1.05, 2.1])
    cp_los, cp_nlos = fig3_scene.doppler_checkpoints
    sc = fig3_scene.scatterers
    a = doppler_phase_los(fig3_scene.tx, fig3_scene.rx, fig3_scene.carrier, t, fig3_scene.step, cp_los)
    b = doppler_phase_los(fig3_scene.tx, fig3_scene.rx, fig3_scene.carrier, t, fig3_scene.step)
    np.testing.assert_array_equal(a, b)
    a = doppler_phase_nlos(fig3_scene.tx, fig3_scene.rx, sc["tx"], sc["rx"], sc["velocity"],
                           fig3_scene.carrier, t, fig3_scene.step, cp_nlos)
    b = doppler_phase_nlos(fig3_scene.tx, fig3_scene.rx, sc["tx"], sc["rx"], sc["velocity"],
                           fig3_scene.carrier, t, fig3_scene.step)
    np.testing.assert_array_equal(a, b)


def test_doppler_continuity(fig3_scene):
    dt = 1e-3
    tr = fig3_scene.trace(np.arange(0, 2.2, dt))
    v_max = 50.0 + 20.0
    bound = fig3_scene.wavenumber * v_max * dt
    assert np.max(np.abs(np.diff(tr.doppler_los))) < bound
    assert np.max(np.abs(np.diff(tr.doppler_nlos, axis=0))) < bound


def test_spatial_phase_cases():
    rot = np.repeat(np.eye(3)[None], 2, axis=0)
    s = np.array([[0.6, 0.8, 0.0], [0.0, 0.0, 1.0]])
    np.testing.assert_array_equal(spatial_phase(K, [0, 0, 0], rot, s), [0.0, 0.0])
    r = np.array([0.01, 0.02, 0.03])
    np.testing.assert_allclose(spatial_phase(K, r, rot, s), K * s @ r)


def test_posture_changes_spatial_phase_at_pitch_quarter_turn(fig3_scene):
    # An element off the pitch axis is moved by the 90 degree pitch.
    r = np.array([0.0, fig3_scene.carrier.wavelength / 4, 0.0])
    on = fig3_scene.trace([1.0])
    off = fig3_scene.with_posture(False).trace([1.0])
    a = spatial_phase(fig3_scene.wavenumber, r, on.tx_rot, on.s_tx_los)
    b = spatial_phase(fig3_scene.wavenumber, r, off.tx_rot, off.s_tx_los)
    assert abs(a[0] - b[0]) > 1e-3


def test_los_coefficient_unit_modulus(fig3_scene):
    tr = fig3_scene.trace(np.linspace(0, 2.2, 23))
    h = los_coefficient(fig3_scene, tr, 1, 0, init_phase=0.4)
    np.testing.assert_allclose(np.abs(h), 1.0, atol=1e-12)


def test_los_coefficient_horizontal_sign():
    scene = small_scene()
    h_arrays = dict(tx_array=AntennaArray(scene.tx_array.element_positions, "isotropic-h"),
                    rx_array=AntennaArray(scene.rx_array.element_positions, "isotropic-h"))
    hh = replace(scene, **h_arrays)
    tr = hh.trace([0.2])
    vv = los_coefficient(scene, scene.trace([0.2]), 0, 0)
    np.testing.assert_allclose(los_coefficient(hh, tr, 0, 0), -vv, atol=1e-15)


def test_static_los_constant():
    tx, rx = preset_scenario("static")
    scene = replace(small_scene(), tx=tx, rx=rx)
    h = los_coefficient(scene, scene.trace(np.linspace(0, 2.2, 12)), 0, 1, init_phase=1.0)
    np.testing.assert_allclose(h, h[0], atol=1e-15)


def test_degenerate_geometry():
    tx = line([1, 2, 3], 0.0, 0.0)
    with pytest.raises(DegenerateGeometryError):
        doppler_phase_los(tx, tx, CARRIER, [0.1])


def _phase_draws(scene, n_draws, seed):
    rng = np.random.default_rng(seed)
    n, m = len(scene.clusters.clusters), scene.clusters.m_subpaths
    return [RealizationPhases.draw(rng, n, m) for _ in range(n_draws)]


def test_single_subpath_unit_modulus():
    scene = small_scene(n=1, m=1, xpr=1e12)
    tr = scene.trace([0.3])
    for ph in _phase_draws(scene, 20, 0):
        assert abs(nlos_coefficient(scene, tr, 0, 0, 0, ph)[0]) == pytest.approx(1.0, abs=1e-12)


def test_nlos_power_and_rayleigh():
    scene = small_scene(n=1, m=20, xpr=1e12)
    tr = scene.trace([0.3])
    h = np.array([nlos_coefficient(scene, tr, 0, 0, 1, ph)[0] for ph in _phase_draws(scene, 10_000, 1)])
    assert np.mean(np.abs(h) ** 2) == pytest.approx(1.0, abs=0.05)
    p = stats.kstest(np.abs(h), stats.rayleigh(scale=math.sqrt(0.5)).cdf).pvalue
    assert p > 0.01


def test_dead_cluster_returns_zero():
    scene = small_scene(n=2, m=2)
    dead = replace(scene.clusters, clusters=(replace(scene.clusters.clusters[0], alive=False),
                                             scene.clusters.clusters[1]))
    scene = replace(scene, clusters=dead)
    ph = _phase_draws(scene, 1, 0)[0]
    assert np.all(nlos_coefficient(scene, scene.trace([0.1]), 0, 0, 0, ph) == 0)


def test_ricean_limits():
    scene = small_scene(mean_k=1e15)
    ph = _phase_draws(scene, 1, 2)[0]
    h, _, _ = cir_matrix(scene, 0.4, ph)
    tr = scene.trace([0.4])
    for q in range(2):
        for p in range(2):
            assert h[q, p] == pytest.approx(los_coefficient(scene, tr, p, q, ph.los)[0], abs=1e-7)

    class _T:
        k_factor = np.array([0.0, 1.0])
    w_los, w_nlos = path_weights(_T)
    assert w_los[0] == 0.0 and w_nlos[0] == 1.0
    assert w_los[1] ** 2 + w_nlos[1] ** 2 == pytest.approx(1.0)


def test_delays_are_path_lengths():
    scene = small_scene(n=3, m=2)
    t = np.array([0.0, 0.5])
    tr = scene.trace(t)
    d = np.linalg.norm(scene.rx.positions(t) - scene.tx.positions(t), axis=-1)
    np.testing.assert_allclose(tr.los_delay, d / C0, rtol=1e-12)
    assert np.all(tr.cluster_delays >= 0)
    # at t = 0 the excess delay reproduces the drawn delay unless the virtual link is clamped
    excess = tr.cluster_delays[0] - tr.los_delay[0]
    drawn = np.array([c.delay for c in scene.clusters.clusters])
    free = scene.scatterers["virtual"] > 0
    assert free.any()
    np.testing.assert_allclose(excess[free], drawn[free], atol=1e-12)
    assert np.all(excess >= drawn - 1e-12)


def test_realization_shapes_and_energy():
    scene = small_scene(n=4, m=10, mean_k=3.0, std_k=1.0)
    times = np.linspace(0, 1, 21)
    powers = []
    for seed in range(200):
        real = simulate(scene, times, seed)
        assert real.H.shape == (21, 2, 2)
        powers.append(np.mean(np.abs(real.H) ** 2))
    assert np.mean(powers) == pytest.approx(1.0, abs=0.05)


def test_transfer_function_cases():
    scene = small_scene(n=3, m=4)
    real = simulate(scene, [0.0, 0.2], 5)
    np.testing.assert_allclose(transfer_function(real, 0.0), real.H, atol=1e-15)

    one = np.ones((1, 1, 1), dtype=complex)
    single = ChannelRealization(np.zeros(1), one * 0.7j, np.zeros((1, 1, 1, 1), complex),
                                np.array([3e-7]), np.array([[0.0]]), np.ones((1, 1), bool))
    mags = [abs(transfer_function(single, f)[0, 0, 0]) for f in (0.0, 1e6, 3.3e7)]
    np.testing.assert_allclose(mags, 0.7)

    dtau = 2e-7
    two = ChannelRealization(np.zeros(1), one * 0.5, (one * 0.5)[:, None], np.array([1e-6]),
                             np.array([[1e-6 + dtau]]), np.ones((1, 1), bool))
    for m in range(3):
        f_null = (2 * m + 1) / (2 * dtau)
        assert abs(transfer_function(two, f_null)[0, 0, 0]) < 1e-9
    assert abs(transfer_function(two, 1 / dtau)[0, 0, 0]) == pytest.approx(1.0)


def test_posture_off_is_bit_identical_to_zero_posture():
    tx, rx = preset_scenario("paper-fig3")
    base = small_scene(n=3, m=4, tx=tx.without_posture(), rx=rx)
    ph = _phase_draws(base, 1, 9)[0]
    t = np.linspace(0, 2.2, 12)
    on = cir_matrices(base, base.trace(t), ph)
    off = cir_matrices(base.with_posture(False), base.with_posture(False).trace(t), ph)
    np.testing.assert_array_equal(on.H, off.H)


def test_3gpp_pattern_shape():
    fv, fh = tr38901_pattern(np.array([[1.0, 0, 0], [-1.0, 0, 0], [0, 1.0, 0]]))
    assert fv[0] == pytest.approx(1.0)
    assert fv[1] == pytest.approx(10 ** (-30 / 20))
    assert 10 ** (-30 / 20) <= fv[2] < 1
    assert np.all(fh == 0)
    v, h = isotropic_pattern(np.zeros((4, 3)))
    assert np.all(v == 1) and np.all(h == 0)


def test_birth_death_masks_clusters():
    scene = replace(small_scene(n=6, m=2), death_rate=3.0, birth_rate=0.0)
    real = simulate(scene, np.linspace(0, 1, 50), 0)
    assert real.alive[0].all()
    assert real.alive[-1].sum() < 6
    dead = ~real.alive
    assert np.all(real.nlos[dead] == 0)


def test_antenna_array_validation():
    with pytest.raises(ValueError):
        AntennaArray(np.array([[np.nan, 0, 0]]))
    with pytest.raises(ValueError):
        AntennaArray(np.zeros((1, 3)), "dipole")
    ula = AntennaArray.ula(3, 0.1, (0, 2, 0))
    np.testing.assert_allclose(ula.element_positions[:, 1], [-0.1, 0, 0.1])


def test_k_process_feeds_weights():
    scene = replace(small_scene(), k_process=RiceanProcess(7.0, 4.0, 0.1, 1))
    tr = scene.trace(np.linspace(0, 1, 11))
    np.testing.assert_array_equal(tr.k_factor, scene.k_process.values(np.linspace(0, 1, 11)))
