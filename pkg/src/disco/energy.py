"""Per-slot energy accounting for the UEs, the AP and the edge server."""

from __future__ import annotations

import numpy as np

from .config import ApPowerModel, CpuModel, SlotTiming, UeProfile


def ap_energy(ap_active, p_dl_total, model: ApPowerModel, timing: SlotTiming):
    """AP energy in one slot; always-on signalling period included."""
    on = np.asarray(ap_active, dtype=float)
    p_dl = np.asarray(p_dl_total, dtype=float)
    if np.any((on == 0) & (p_dl != 0)):
        raise ValueError("sleeping AP cannot transmit")
    busy = on * (model.p_on + p_dl) + (1 - on) * model.p_sleep
    return timing.tau * busy + timing.tau_s * model.p_on


def ue_energy(ue_active, p_tx, profile: UeProfile, timing: SlotTiming):
    on = np.asarray(ue_active, dtype=float)
    p = np.asarray(p_tx, dtype=float)
    if np.any((on == 0) & (p != 0)):
        raise ValueError("sleeping UE cannot transmit")
    if np.any(p > profile.p_tx_max * (1 + 1e-12)):
        raise ValueError(f"transmit power exceeds p_tx_max={profile.p_tx_max}")
    busy = on * (profile.p_on + profile.tx_power_curve(p)) + (1 - on) * profile.p_sleep
    return timing.tau * busy + timing.tau_s * profile.p_on


def ue_energies(ue_active: np.ndarray, p_tx: np.ndarray, profiles, timing: SlotTiming) -> np.ndarray:
    """Vector of per-UE energies; profiles may differ per UE."""
    return np.array([ue_energy(a, p, prof, timing) for a, p, prof in zip(ue_active, p_tx, profiles)])


def es_energy(f_c: float, model: CpuModel, timing: SlotTiming) -> float:
    """Edge-server energy; the active flag is implied by f_c > 0."""
    if not np.any(np.isclose(model.freq_set, f_c, rtol=1e-12, atol=0.0)):
        raise ValueError(f"f_c={f_c:g} is not an available CPU frequency")
    on = 1.0 if f_c > 0 else 0.0
    dyn = model.kappa * f_c ** 3
    # the dynamic term vanishes with f_c, so gating it by the flag changes nothing
    assert on or dyn == 0.0
    busy = on * model.p_on + (1 - on) * model.p_sleep + dyn
    return timing.tau * busy + timing.tau_s * model.p_on


def weighted_energy(e_u: float, e_a: float, e_m: float, alphas) -> tuple[float, float]:
    """Return (weighted, unweighted) slot energy."""
    a1, a2, a3 = alphas
    return a1 * e_u + a2 * e_a + a3 * e_m, e_u + e_a + e_m
