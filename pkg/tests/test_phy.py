import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from disco.config import McsScheme, PhyConfig, default_mcs_set
from disco.phy import (LinkBudget, QamPerModel, downlink_units, load_snr_table, mean_gain, min_tx_power,
                       pathloss_db, required_snr, sample_channel_gain, snr_thresholds, uplink_units)

NOISE_1MHZ = 10 ** ((-174 + 60 + 5) / 10) / 1000  # W


def test_gain_at_reference_distance():
    g = sample_channel_gain((1.0, 0.0), (0.0, 0.0), np.random.default_rng(0), fading=1.0)
    assert g == pytest.approx(10 ** -6.134, rel=1e-12)


def test_gain_deterministic_under_seed():
    a = sample_channel_gain((30.0, 40.0), (0.0, 0.0), np.random.default_rng(7))
    b = sample_channel_gain((30.0, 40.0), (0.0, 0.0), np.random.default_rng(7))
    assert a == b


def test_fading_has_unit_mean():
    rng = np.random.default_rng(1)
    g0 = sample_channel_gain((5.0, 0.0), (0.0, 0.0), rng, fading=1.0)
    draws = np.array([sample_channel_gain((5.0, 0.0), (0.0, 0.0), rng) for _ in range(20000)]) / g0
    # a full-scale check would use 1e6 draws; block draw of the same law
    big = rng.exponential(1.0, size=10 ** 6)
    assert big.mean() == pytest.approx(1.0, abs=0.01)
    assert draws.mean() == pytest.approx(1.0, abs=0.03)


def test_zero_distance_rejected():
    with pytest.raises(ValueError):
        sample_channel_gain((0.0, 0.0), (0.0, 0.0), np.random.default_rng(0))
    with pytest.raises(ValueError):
        pathloss_db(0.0)


def test_pathloss_clamped_below_one_metre():
    assert pathloss_db(0.5) == pathloss_db(1.0) == pytest.approx(61.34)
    assert pathloss_db(10.0) == pytest.approx(81.34)


def test_mean_gain_vectorised():
    g = mean_gain(np.array([[1.0, 0.0], [10.0, 0.0]]), (0.0, 0.0), PhyConfig())
    np.testing.assert_allclose(g, [10 ** -6.134, 10 ** -8.134])


def test_snr_monotone_in_constellation():
    assert required_snr(McsScheme(4, 0.5), 0.5, 12000) < required_snr(McsScheme(256, 0.5), 0.5, 12000)


def test_vacuous_target_gives_zero_threshold():
    # 1-bit packets: PER(0) = 0.5 for BPSK-like limit; anything above is met at zero SNR
    assert required_snr(McsScheme(16, 0.5), 1 - 1e-9, 1) == pytest.approx(0.0, abs=1e-12)


def test_bisection_threshold_is_tight():
    model = QamPerModel()
    mcs = McsScheme(16, 0.5)
    g = model.required_snr(mcs, 1e-4, 12000)
    assert model.per(g, mcs, 12000) <= 1e-4
    assert model.per(0.99 * g, mcs, 12000) > 1e-4


def test_snr_monotone_over_default_set():
    model = QamPerModel()
    for r in (0.3, 0.5, 0.9):
        g = [model.required_snr(McsScheme(m, r), 1e-4, 12000) for m in (4, 16, 64, 256)]
        assert g == sorted(g)
    for m in (4, 64):
        g = [model.required_snr(McsScheme(m, r), 1e-4, 12000) for r in (0.3, 0.5, 0.7, 0.9)]
        assert g == sorted(g)
    g = [model.required_snr(McsScheme(16, 0.5), t, 12000) for t in (1e-6, 1e-4, 1e-2)]
    assert g == sorted(g, reverse=True)


def test_threshold_table_values():
    # frozen values of the default model (theta = 1e-4, 1500-byte packets)
    model = QamPerModel()
    db = lambda m, r: 10 * math.log10(model.required_snr(McsScheme(m, r), 1e-4, 12000))  # noqa: E731
    assert db(4, 0.3) == pytest.approx(7.19, abs=0.01)
    assert db(256, 0.9) == pytest.approx(33.44, abs=0.01)


def test_snr_table_override(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("M,R,gamma\n4,0.5,3.0\n16,0.5,12.0\n")
    model = load_snr_table(path)
    assert model.required_snr(McsScheme(16, 0.5), 1e-4, 12000) == 12.0
    with pytest.raises(KeyError):
        model.required_snr(McsScheme(64, 0.5), 1e-4, 12000)


def test_thresholds_cached_vector():
    s = default_mcs_set()
    a = snr_thresholds(s, 1e-4, 12000, QamPerModel())
    assert a.shape == (28,) and np.all(a > 0)
    assert snr_thresholds(s, 1e-4, 12000, QamPerModel()) is a


def test_min_tx_power_examples():
    link = LinkBudget(gain=1e-10, bandwidth=1e6, noise_power=PhyConfig().noise_power(1e6))
    assert link.noise_power == pytest.approx(1.259e-14, rel=1e-3)
    assert min_tx_power(10.0, link) == pytest.approx(1.259e-3, rel=1e-3)
    assert min_tx_power(0.0, link) == 0.0
    double = LinkBudget(2e-10, 1e6, link.noise_power)
    assert min_tx_power(10.0, double) == pytest.approx(min_tx_power(10.0, link) / 2)
    with pytest.raises(ValueError):
        min_tx_power(1.0, LinkBudget(0.0, 1e6, 1e-14))


def test_uplink_units_examples():
    assert uplink_units(McsScheme(16, 0.5), 1e6, 0.009, 1000, 12000) == 12
    assert uplink_units(McsScheme(4, 0.3), 1e6, 0.009, 1000, 12000) == 0
    assert uplink_units(McsScheme(16, 0.5), 0.0, 0.009, 1000, 12000) == 0


def test_downlink_units_examples():
    assert downlink_units(McsScheme(16, 0.5), 1e6, 0.009, 1000, 12000) == 12
    assert downlink_units(McsScheme(4, 0.3), 1e6, 0.009, 1000, 12000) == 0
    assert downlink_units(McsScheme(16, 0.5), 1e6, 0.009, 13000, 12000) == 0
    assert downlink_units(McsScheme(16, 0.5), 1e6, 0.009, 1, 12000) == 12000


mcs_st = st.builds(McsScheme, st.sampled_from([4, 16, 64, 256]), st.sampled_from([0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]))


@settings(max_examples=300, deadline=None)
@given(mcs=mcs_st, bw=st.floats(0, 2e7), s_i=st.floats(1, 1e5), nb=st.integers(1, 20000))
def test_double_floor_bound(mcs, bw, s_i, nb):
    n = uplink_units(mcs, bw, 0.009, s_i, nb)
    exact = 0.009 * bw * mcs.bits_per_symbol / s_i
    assert exact - (nb / s_i + 2) - 1e-6 <= n <= exact + 1e-6


@settings(max_examples=200, deadline=None)
@given(bw=st.floats(0, 2e7), s_i=st.floats(1, 1e5), scale=st.floats(1, 3))
def test_units_monotone(bw, s_i, scale):
    base = uplink_units(McsScheme(16, 0.5), bw, 0.009, s_i, 12000)
    assert uplink_units(McsScheme(16, 0.5), bw * scale, 0.009, s_i, 12000) >= base
    assert uplink_units(McsScheme(64, 0.5), bw, 0.009, s_i, 12000) >= base
    assert uplink_units(McsScheme(16, 0.7), bw, 0.009, s_i, 12000) >= base
    assert uplink_units(McsScheme(16, 0.5), bw, 0.009, s_i * scale, 12000) <= base


def test_min_power_nondecreasing_in_m():
    link = LinkBudget(1e-9, 1e6, NOISE_1MHZ)
    p = [min_tx_power(required_snr(McsScheme(m, 0.5), 1e-4, 12000), link) for m in (4, 16, 64, 256)]
    assert p == sorted(p)
