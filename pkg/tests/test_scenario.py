import math

import numpy as np
import pytest

from mudalloc.errors import ConfigError
from mudalloc.scenario import (
    ScenarioConfig,
    build_scenario,
    draw_fading,
    fspl_db,
    generate_channels,
    generate_geometry,
    generate_signatures,
    path_loss,
    slant_ranges,
)


def test_fspl_at_orbit_altitude():
    expected = 20 * math.log10(600) + 20 * math.log10(2) + 92.45
    assert fspl_db(600e3, 2e9) == pytest.approx(expected, abs=1e-12)
    assert fspl_db(600e3, 2e9) == pytest.approx(154.03, abs=5e-3)
    assert 20 * math.log10(path_loss(600e3, 2e9)) == pytest.approx(expected, abs=1e-9)


def test_fspl_reference_point_and_doubling():
    assert fspl_db(1e3, 1e9) == pytest.approx(92.45, abs=1e-12)
    assert fspl_db(2 * 777e3, 2e9) - fspl_db(777e3, 2e9) == pytest.approx(20 * math.log10(2), abs=1e-12)
    assert 20 * math.log10(2) == pytest.approx(6.0206, abs=1e-4)


@pytest.mark.parametrize("d,f", [(0.0, 2e9), (-1.0, 2e9), (1e3, 0.0)])
def test_path_loss_domain(d, f):
    with pytest.raises(ConfigError):
        path_loss(d, f)


def test_config_defaults_and_validation():
    c = ScenarioConfig()
    assert (c.num_users, c.num_res, c.num_sats) == (32, 12, 8)
    assert (c.carrier_freq_hz, c.bandwidth_hz, c.orbit_altitude_m) == (2e9, 15e6, 600e3)
    assert (c.eirp_dbw, c.g_over_t_dbk, c.noise_density_dbm_hz) == (-7.0, -33.6, -173.0)
    for bad in (dict(num_users=0), dict(modulation_order=6), dict(modulation_order=1),
                dict(signature_column_weight=13), dict(fading_model="nakagami"),
                dict(epsilon=-0.1), dict(interference_variant="other")):
        with pytest.raises(ConfigError):
            ScenarioConfig(**bad)


def test_noise_power_per_re():
    c = ScenarioConfig()
    n0 = 10 ** ((-173 - 30) / 10)
    assert c.noise_power == pytest.approx(n0 * 15e6 / 12, rel=1e-12)


def test_zenith_satellite_distance():
    d = slant_ranges([[0.0, 0.0, 0.0]], [[0.0, 0.0, 600e3]])
    assert d[0, 0] == pytest.approx(600e3)


def test_geometry_deterministic_and_above_altitude():
    c = ScenarioConfig(rng_seed=11)
    d1 = generate_geometry(c, np.random.default_rng(5))
    d2 = generate_geometry(c, np.random.default_rng(5))
    assert np.array_equal(d1, d2)
    assert d1.shape == (32, 8)
    assert np.all(d1 >= c.orbit_altitude_m)


def test_signatures_default_shape():
    sig = generate_signatures(ScenarioConfig(), np.random.default_rng(0))
    assert sig.shape == (12, 32)
    assert np.all(sig.column_weights == 2)
    assert set(sig.row_degrees.tolist()) <= {5, 6}
    assert sig.d_f <= 6
    assert np.allclose(np.linalg.norm(sig.s, axis=0), 1.0, atol=1e-12)
    for n, users in enumerate(sig.occupancy):
        assert set(users) == set(np.flatnonzero(sig.s[n] != 0))


def test_dense_signatures():
    c = ScenarioConfig(num_users=5, num_res=4, signature_column_weight=4)
    sig = generate_signatures(c, np.random.default_rng(0))
    assert sig.d_f == 5
    assert np.allclose(np.linalg.norm(sig.s, axis=0), 1.0, atol=1e-12)


@pytest.mark.parametrize("N,K,dv", [(5, 7, 3), (3, 10, 1), (7, 7, 7), (4, 9, 2)])
def test_signature_row_degrees_balanced(N, K, dv):
    c = ScenarioConfig(num_users=K, num_res=N, signature_column_weight=dv)
    sig = generate_signatures(c, np.random.default_rng(N * K))
    assert np.all(sig.column_weights == dv)
    assert np.ptp(sig.row_degrees) <= 1


def test_rayleigh_unit_power():
    g = draw_fading("rayleigh", (10**6,), np.random.default_rng(0))
    assert abs(np.mean(np.abs(g) ** 2) - 1.0) < 0.01


def test_rician_unit_power():
    g = draw_fading("rician", (4, 500, 500), np.random.default_rng(0), rician_k_db=10.0)
    assert abs(np.mean(np.abs(g) ** 2) - 1.0) < 0.01


def test_no_fading_channels():
    c = ScenarioConfig(fading_model="none", num_users=6, num_sats=3, rng_seed=2)
    sc = build_scenario(c)
    mag = np.abs(sc.channel.h)
    assert np.all(np.isfinite(mag)) and np.all(mag > 0)
    assert np.allclose(mag, mag[0][None], rtol=0, atol=0)
    d = sc.channel.distances
    for k in range(6):
        order_d = np.argsort(d[k])
        assert np.all(np.diff(mag[0, k, order_d]) < 0)


def test_channels_scale_with_path_loss():
    c = ScenarioConfig(num_users=5, num_sats=3)
    sig = generate_signatures(c, np.random.default_rng(0))
    d = generate_geometry(c, np.random.default_rng(1))
    h1 = generate_channels(c, sig, d, np.random.default_rng(2)).h
    h2 = generate_channels(c, sig, 3.0 * d, np.random.default_rng(2)).h
    assert np.allclose(np.abs(h1) / np.abs(h2), 3.0, rtol=1e-12)


def test_build_scenario_bit_identical():
    a = build_scenario(ScenarioConfig(rng_seed=9))
    b = build_scenario(ScenarioConfig(rng_seed=9))
    assert np.array_equal(a.channel.h, b.channel.h)
    assert np.array_equal(a.signatures.s, b.signatures.s)
    assert a.sigma2 == b.sigma2
    c = build_scenario(ScenarioConfig(rng_seed=10))
    assert not np.array_equal(a.channel.h, c.channel.h)


def test_scenario_is_immutable(default_scenario):
    with pytest.raises(ValueError):
        default_scenario.channel.h[0, 0, 0] = 0
    with pytest.raises(Exception):
        default_scenario.config = None


def test_sic_order_descending(default_scenario):
    sc = default_scenario
    g = np.take_along_axis(sc.gain2, sc.sic_order, axis=1)
    assert np.all(np.diff(g, axis=1) <= 0)
    rank = sc.sic_rank
    assert np.array_equal(np.take_along_axis(rank, sc.sic_order, axis=1),
                          np.broadcast_to(np.arange(sc.dims[1])[None, :, None], sc.dims))
