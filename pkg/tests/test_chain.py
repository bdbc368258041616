import math

import numpy as np
import pytest

from cryoreadout import chain, device
from cryoreadout.chain import (ChainResponse, CouplingNetwork, StageResponse,
                               capacitive_division, cascade, corner_frequency,
                               default_chain, fixed_gain_stage,
                               hbt_stage_response, s21_db, snr_db,
                               unity_gain_load)

# 0.1 * e * n_s * delta_z * S/D with the default source constants
DELTA_Q = 3.1685e-18


def _default_first_stage():
    net = device.default_network()
    params = device.default_transistor(net)
    op = device.solve_operating_point(net, params)
    ss = device.small_signal(op, params)
    return ss, net


def test_corner_frequency_values():
    assert corner_frequency(CouplingNetwork(c_parasitic=300e-12)) == \
        pytest.approx(10.6e6, rel=0.01)
    assert corner_frequency(CouplingNetwork(c_parasitic=10e-12)) == \
        pytest.approx(318e6, rel=0.01)


def test_corner_frequency_scaling():
    a = corner_frequency(CouplingNetwork(c_parasitic=10e-12))
    b = corner_frequency(CouplingNetwork(c_parasitic=100e-12))
    assert b == pytest.approx(a / 10.0, rel=1e-12)
    # depends on R and C_p only through their product
    c = corner_frequency(CouplingNetwork(c_parasitic=1e-12, r_input=500.0))
    assert c == pytest.approx(a, rel=1e-12)


def test_capacitive_division_values():
    assert capacitive_division(DELTA_Q, CouplingNetwork(c_parasitic=300e-12)) \
        == pytest.approx(10.5e-9, rel=0.03)
    assert capacitive_division(DELTA_Q, CouplingNetwork(c_parasitic=10e-12)) \
        == pytest.approx(290e-9, rel=0.03)
    assert capacitive_division(0.0, CouplingNetwork()) == 0.0
    with pytest.raises(ValueError):
        capacitive_division(-1e-18, CouplingNetwork())


def test_coupling_network_validation():
    with pytest.raises(ValueError):
        CouplingNetwork(c_cell=0.0)


def test_stage_response_validation():
    with pytest.raises(ValueError):
        StageResponse(gain_factor=1.0, poles=(-1.0,))


def test_fixed_gain_stage_midband():
    st = fixed_gain_stage(40.0, 100e3, 1.5e9, noise_temperature=6.0)
    assert abs(st.evaluate(10e6)) == pytest.approx(100.0, rel=0.01)
    assert abs(fixed_gain_stage(0.0, 1.0, 1e15).evaluate(1e6)) == \
        pytest.approx(1.0, rel=1e-6)


def test_fixed_gain_stage_corner_definitions():
    st = fixed_gain_stage(20.0, 1e3, 1e15)
    assert abs(st.evaluate(1e3)) == pytest.approx(10.0 / math.sqrt(2.0),
                                                  rel=1e-9)
    st = fixed_gain_stage(20.0, 1e-3, 1e6)
    assert abs(st.evaluate(1e6)) == pytest.approx(10.0 / math.sqrt(2.0),
                                                  rel=1e-6)
    with pytest.raises(ValueError):
        fixed_gain_stage(20.0, 1e9, 1e6)


def test_cascade_identity_and_multiplicativity():
    st = fixed_gain_stage(20.0, 1e3, 1e9)
    single = cascade([st])
    f = np.geomspace(1e3, 1e8, 40)
    np.testing.assert_allclose(single.evaluate(f), st.evaluate(f), rtol=1e-15)

    both = cascade([st, st])
    np.testing.assert_allclose(np.abs(both.evaluate(f)),
                               np.abs(st.evaluate(f)) ** 2, rtol=1e-12)
    assert abs(both.evaluate(1e6)) == pytest.approx(100.0, rel=0.01)

    with pytest.raises(ValueError):
        ChainResponse(stages=())


def test_friis_accumulation():
    first = StageResponse(gain_factor=1.0, noise_temperature=2.0)
    second = StageResponse(gain_factor=100.0, noise_temperature=6.0)
    assert cascade([first, second]).total_noise_temperature() == \
        pytest.approx(8.0, rel=1e-12)


def test_friis_ordering():
    rng = np.random.default_rng(11)
    for _ in range(20):
        g1, g2 = rng.uniform(1.0, 100.0, 2)
        t_low, t_high = sorted(rng.uniform(1.0, 50.0, 2))
        quiet = StageResponse(gain_factor=g1, noise_temperature=t_low)
        loud = StageResponse(gain_factor=g2, noise_temperature=t_high)
        t_good = cascade([quiet, loud]).total_noise_temperature()
        t_bad = cascade([loud, quiet]).total_noise_temperature()
        assert t_good <= t_bad + 1e-12


def test_friis_zero_gain_stage_rejected():
    dead = StageResponse(gain_factor=0.0, noise_temperature=2.0)
    live = StageResponse(gain_factor=100.0, noise_temperature=6.0)
    with pytest.raises(ValueError, match="zero gain"):
        cascade([dead, live]).total_noise_temperature()


def test_hbt_midband_gain_formula():
    ss, net = _default_first_stage()
    st = hbt_stage_response(ss, net, load_resistance=50.0)
    r_par = 1.0 / (1.0 / net.r_collector + 1.0 / ss.r_o + 1.0 / 50.0)
    assert abs(st.evaluate(10e6)) == pytest.approx(ss.g_m * r_par, rel=0.02)
    assert abs(st.evaluate(10e6)) == pytest.approx(0.19, rel=0.02)
    with pytest.raises(ValueError):
        hbt_stage_response(ss, net, load_resistance=0.0)


def test_hbt_big_caps_flatten_response():
    ss, net0 = _default_first_stage()
    net = device.BiasNetwork(c_in=1.0, c_out=1.0, c_bypass=1.0)
    st = hbt_stage_response(ss, net, load_resistance=333.0)
    assert abs(st.evaluate(1e3)) == pytest.approx(abs(st.evaluate(1e7)),
                                                  rel=0.01)


def test_unity_gain_load():
    ss, net = _default_first_stage()
    r_load = unity_gain_load(ss, net)
    st = hbt_stage_response(ss, net, r_load)
    assert abs(st.evaluate(chain.DEFAULT_REFERENCE_FREQUENCY)) == \
        pytest.approx(1.0, rel=1e-9)


def test_first_stage_flat_at_unity():
    resp = default_chain(stage="first")
    db = np.array([d for _, d in s21_db(resp, np.geomspace(1e5, 1e8, 200))])
    assert np.all(np.abs(db) <= 1.0)


def test_two_stage_flat_at_40db():
    resp = default_chain()
    db = np.array([d for _, d in s21_db(resp, np.geomspace(1e5, 1e8, 200))])
    assert np.all(np.abs(db - 40.0) <= 1.0)
    with pytest.raises(ValueError):
        default_chain(stage="third")


def test_s21_db():
    unity = cascade([StageResponse(gain_factor=1.0)])
    rows = s21_db(unity, [1e3, 1e6, 1e9])
    assert all(db == pytest.approx(0.0, abs=1e-12) for _, db in rows)
    pole = cascade([StageResponse(gain_factor=1.0, poles=(1e6,))])
    rows = s21_db(pole, [1e6])
    assert rows[0][1] == pytest.approx(-10.0 * math.log10(2.0), rel=1e-9)
    with pytest.raises(ValueError):
        s21_db(unity, [0.0, 1e6])


def test_snr_db_values():
    assert snr_db(290e-9, 35e-12, 1.0) == pytest.approx(78.4, abs=0.1)
    assert snr_db(290e-9, 35e-12, 100e6) == pytest.approx(-1.6, abs=0.1)
    assert snr_db(35e-12 * math.sqrt(1e6), 35e-12, 1e6) == \
        pytest.approx(0.0, abs=1e-9)
    with pytest.raises(ValueError):
        snr_db(0.0, 35e-12, 1.0)


def test_transfer_function_matches_impulse_response_fft():
    from cryoreadout.lockin import SynthesisConfig, synthesize

    resp = default_chain()
    n, fs = 2 ** 16, 2.5e8
    impulse = np.zeros(n)
    impulse[0] = 1.0
    cfg = SynthesisConfig(sample_rate=fs, input_noise_density=0.0)
    out = synthesize(impulse, resp, cfg)
    freqs = np.fft.rfftfreq(n, 1.0 / fs)
    mag_db = 20.0 * np.log10(np.abs(np.fft.rfft(out)[1:]))
    ref_db = np.array([d for _, d in s21_db(resp, freqs[1:])])
    band = (freqs[1:] >= 1e5) & (freqs[1:] <= 1e8)
    assert np.max(np.abs(mag_db[band] - ref_db[band])) < 0.1
