import dataclasses

import numpy as np
import pytest
from hypothesis import given, strategies as st

from disco.config import ApPowerModel, CpuModel, SlotTiming, UeProfile
from disco.energy import ap_energy, es_energy, ue_energies, ue_energy, weighted_energy

T = SlotTiming()


def test_ap_energy_examples():
    assert ap_energy(1, 0.1, ApPowerModel(), T) == pytest.approx(0.0229)
    assert ap_energy(0, 0.0, ApPowerModel(), T) == pytest.approx(0.004702)
    assert ap_energy(1, 0.1, ApPowerModel(), SlotTiming(tau=0.0)) == pytest.approx(0.001 * 2.2)


def test_sleeping_ap_cannot_transmit():
    with pytest.raises(ValueError):
        ap_energy(0, 0.1, ApPowerModel(), T)


def test_ue_energy_examples():
    ue = UeProfile()
    # tx curve gives 1.0 W at 70 mW
    assert ue.tx_power_curve(0.07) == pytest.approx(1.0)
    assert ue_energy(1, 0.07, ue, T) == pytest.approx(0.018)
    assert ue_energy(0, 0.0, ue, T) == pytest.approx(0.004014)
    assert ue_energy(1, 0.0, ue, T) == pytest.approx(0.009)


def test_ue_energy_errors():
    with pytest.raises(ValueError):
        ue_energy(0, 0.01, UeProfile(), T)
    with pytest.raises(ValueError):
        ue_energy(1, 0.2, UeProfile(), T)


def test_ue_energies_vector():
    profiles = [UeProfile(), UeProfile(p_on=1.0)]
    e = ue_energies(np.array([True, False]), np.array([0.0, 0.0]), profiles, T)
    assert e == pytest.approx([0.009, 0.009 * 0.346 + 0.001])


def test_es_energy_examples():
    cpu = CpuModel()
    assert es_energy(4.5e9, cpu, T) == pytest.approx(1.020125)
    assert es_energy(0.0, cpu, T) == pytest.approx(0.11)
    assert es_energy(4.5e9, dataclasses.replace(cpu, kappa=0.0), T) == pytest.approx(0.2)
    with pytest.raises(ValueError):
        es_energy(1.23e9, cpu, T)


def test_weighted_energy_examples():
    e = (0.018, 0.0229, 1.020125)
    assert weighted_energy(*e, (1, 0, 0))[0] == 0.018
    w, tot = weighted_energy(*e, (1 / 3, 1 / 3, 1 / 3))
    assert w == pytest.approx(0.353675)
    assert tot == pytest.approx(sum(e))
    assert weighted_energy(0.5, 0.5, 0.5, (0.2, 0.3, 0.5))[0] == pytest.approx(0.5)


pos = st.floats(0, 10, allow_nan=False)


@given(e=st.tuples(pos, pos, pos), a=st.tuples(pos, pos, pos), perm=st.permutations([0, 1, 2]))
def test_weighted_energy_permutation_invariant(e, a, perm):
    s = sum(a) or 1.0
    a = tuple(x / s for x in a)
    base = weighted_energy(*e, a)[0]
    pe = tuple(e[i] for i in perm)
    pa = tuple(a[i] for i in perm)
    assert weighted_energy(*pe, pa)[0] == pytest.approx(base)


@given(p=st.floats(0, 0.1))
def test_energies_positive_and_sleep_cheaper(p):
    ue = UeProfile()
    assert 0 < ue_energy(0, 0, ue, T) <= ue_energy(1, p, ue, T)
    ap = ApPowerModel()
    assert 0 < ap_energy(0, 0, ap, T) <= ap_energy(1, p, ap, T)
    cpu = CpuModel()
    assert 0 < es_energy(0.0, cpu, T) <= es_energy(cpu.freq_set[1], cpu, T)
