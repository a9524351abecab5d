"""Per-slot drift-plus-penalty solvers.

The per-slot objective splits into a radio part (UE/AP sleep, MCS and power in
both directions) and a CPU part (ES frequency, per-UE shares, ES sleep); each
is minimised exactly:

* radio: per UE and direction, exhaustive search over the MCS set at the
  minimum power meeting the PER target; then UE-sleep and AP-sleep comparisons.
* CPU: for each candidate frequency, a greedy fill in decreasing J_k * Q~_k,
  which is optimal for the linear allocation problem at fixed f_c.

``eval_gamma_objective`` and ``eval_exact_objective`` score arbitrary decisions
so the solvers can be checked against enumeration.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import ScenarioConfig
from .control import StrategyPreset, get_preset
from .energy import weighted_energy
from .phy import floor_count, per_model_for, snr_thresholds
from .queueing import QueueSnapshot, pressure_terms
from .state import Decision

_NO_FORCING = StrategyPreset("unconstrained")


@dataclass(frozen=True)
class LinkTables:
    """MCS data for one direction, reordered per UE by required power.

    Column 0 is "no transmission"; columns 1.. are MCS schemes sorted by
    (SNR threshold, modulation order), so a first-index argmin implements the
    tie-break "lower power, then lower M".
    """

    index: np.ndarray  # K x (M+1) config index of each column, -1 for silence
    bits: np.ndarray  # K x (M+1) coded bits per symbol
    gamma: np.ndarray  # K x (M+1) linear SNR thresholds

    @classmethod
    def build(cls, mcs_set, targets: np.ndarray, packet_bits: int, model) -> "LinkTables":
        bits = np.array([m.bits_per_symbol for m in mcs_set])
        order_m = np.array([m.modulation_order for m in mcs_set])
        idx, b, g = [], [], []
        for theta in targets:
            gam = snr_thresholds(tuple(mcs_set), float(theta), packet_bits, model)
            perm = np.lexsort((order_m, gam))
            idx.append(np.concatenate(([-1], perm)))
            b.append(np.concatenate(([0.0], bits[perm])))
            g.append(np.concatenate(([0.0], gam[perm])))
        return cls(np.array(idx), np.array(b), np.array(g))


@dataclass(frozen=True)
class Tables:
    ul: LinkTables
    dl: LinkTables


def build_tables(config: ScenarioConfig) -> Tables:
    arr = config.arrays
    model = per_model_for(config.phy)
    nb = config.phy.packet_bits
    return Tables(LinkTables.build(config.mcs_ul, arr.per_ul, nb, model),
                  LinkTables.build(config.mcs_dl, arr.per_dl, nb, model))


# ---------------------------------------------------------------------------
# radio


@dataclass
class LinkChoice:
    """Best scheme per UE for one direction (assuming the UE is active)."""

    mcs: np.ndarray  # config index or -1
    power: np.ndarray
    units: np.ndarray
    objective: np.ndarray  # full per-UE partial objective of the chosen option


def _capacity(tab: LinkTables, bandwidth: np.ndarray, tau: float, unit_bits: np.ndarray, nb: int):
    n_sym = floor_count(tau * bandwidth)
    n_pkt = floor_count(n_sym[:, None] * tab.bits / nb)
    return floor_count(n_pkt * nb / unit_bits[:, None])


def _pick(obj: np.ndarray, tab: LinkTables, power: np.ndarray, units: np.ndarray) -> LinkChoice:
    best = np.argmin(obj, axis=1)
    rows = np.arange(obj.shape[0])
    return LinkChoice(tab.index[rows, best], power[rows, best], units[rows, best], obj[rows, best])


def solve_uplink(snap: QueueSnapshot, gain: np.ndarray, bandwidth: np.ndarray, config: ScenarioConfig,
                 tables: Optional[Tables] = None) -> LinkChoice:
    """Uplink MCS/power for every UE, vectorised over UEs.

    Objective per UE: (4 Q_m - 2 Q_l) N_u + (Z + mu Y) max(0, Q_l - N_u)
    + V a1 tau p_u(p_tx), with p_tx the minimum power for the scheme.  Schemes
    needing more than p_tx_max are excluded; silence is always available.
    """
    tables = tables or build_tables(config)
    tab = tables.ul
    arr = config.arrays
    tau = config.timing.tau
    v_a1 = config.lyapunov.v * config.lyapunov.alphas[0]
    bandwidth = np.asarray(bandwidth, dtype=float)
    gain = np.asarray(gain, dtype=float)

    units = _capacity(tab, bandwidth, tau, arr.s_in, config.phy.packet_bits)
    noise = config.phy.noise_power(bandwidth)
    p_min = tab.gamma * noise[:, None] / gain[:, None]
    w = (snap.z + arr.mu * snap.y)[:, None]
    q_l = snap.q_l[:, None]
    obj = ((4 * snap.q_m[:, None] - 2 * q_l) * units
           + w * np.maximum(0.0, q_l - units)
           + v_a1 * tau * arr.tx_consumed(p_min))
    obj[:, 0] = w[:, 0] * snap.q_l  # silence, exactly
    infeasible = p_min > arr.p_tx_max[:, None]
    infeasible[:, 0] = False
    obj[infeasible] = np.inf
    return _pick(obj, tab, p_min, units)


def solve_downlink(snap: QueueSnapshot, gain: np.ndarray, bandwidth: np.ndarray, config: ScenarioConfig,
                   tables: Optional[Tables] = None) -> LinkChoice:
    """Downlink counterpart: -4 Q_a N_d + (Z + mu Y) max(0, Q_a - N_d) + V a2 tau p_d,
    with the per-UE power budget p_dl_max / K."""
    tables = tables or build_tables(config)
    tab = tables.dl
    arr = config.arrays
    tau = config.timing.tau
    v_a2 = config.lyapunov.v * config.lyapunov.alphas[1]
    bandwidth = np.asarray(bandwidth, dtype=float)
    gain = np.asarray(gain, dtype=float)

    units = _capacity(tab, bandwidth, tau, arr.s_out, config.phy.packet_bits)
    noise = config.phy.noise_power(bandwidth)
    p_min = tab.gamma * noise[:, None] / gain[:, None]
    w = (snap.z + arr.mu * snap.y)[:, None]
    q_a = snap.q_a[:, None]
    obj = -4 * q_a * units + w * np.maximum(0.0, q_a - units) + v_a2 * tau * p_min
    obj[:, 0] = w[:, 0] * snap.q_a
    infeasible = p_min > config.ap.p_dl_max / config.n_users
    infeasible[:, 0] = False
    obj[infeasible] = np.inf
    return _pick(obj, tab, p_min, units)


@dataclass
class RadioSolution:
    ap_active: bool
    ue_active: np.ndarray
    mcs_ul: np.ndarray
    p_tx: np.ndarray
    n_ul: np.ndarray
    mcs_dl: np.ndarray
    p_dl: np.ndarray
    n_dl: np.ndarray
    l_sleep_k: np.ndarray  # per-UE objective when the UE sleeps
    l_active_k: np.ndarray  # per-UE objective when active with the best up/down choices
    l_sleep: float  # whole radio objective with the AP asleep
    l_active: float  # whole radio objective with the AP awake


def solve_radio(snap: QueueSnapshot, gain_ul, gain_dl, bw_ul, bw_dl, config: ScenarioConfig,
                strategy: Optional[StrategyPreset] = None, tables: Optional[Tables] = None) -> RadioSolution:
    strategy = strategy or _NO_FORCING
    tables = tables or build_tables(config)
    arr = config.arrays
    t, ts = config.timing.tau, config.timing.tau_s
    v = config.lyapunov.v
    a1, a2, _ = config.lyapunov.alphas

    up = solve_uplink(snap, gain_ul, bw_ul, config, tables)
    down = solve_downlink(snap, gain_dl, bw_dl, config, tables)
    w = snap.z + arr.mu * snap.y

    l_sleep_k = w * (snap.q_l + snap.q_a) + v * a1 * (t * arr.p_sleep + ts * arr.p_on)
    # exact differences against sleeping: the silent options score w*Q_l and w*Q_a
    gain_k = ((up.objective - w * snap.q_l) + (down.objective - w * snap.q_a)
              + v * a1 * t * (arr.p_on - arr.p_sleep))
    l_active_k = l_sleep_k + gain_k
    if strategy.force_ue_on:
        ue_on = np.ones(config.n_users, dtype=bool)
    else:
        ue_on = gain_k < 0  # ties sleep

    ap = config.ap
    l_sleep = float(l_sleep_k.sum() + v * a2 * (t * ap.p_sleep + ts * ap.p_on))
    ap_gain = float(np.where(ue_on, gain_k, 0.0).sum() + v * a2 * t * (ap.p_on - ap.p_sleep))
    l_active = l_sleep + ap_gain
    ap_on = True if strategy.force_ap_on else ap_gain < 0

    if not ap_on:
        ue_on = np.zeros(config.n_users, dtype=bool)
    on = ue_on.astype(float)
    return RadioSolution(
        ap_active=bool(ap_on),
        ue_active=ue_on,
        mcs_ul=np.where(ue_on, up.mcs, -1),
        p_tx=up.power * on,
        n_ul=up.units * on,
        mcs_dl=np.where(ue_on, down.mcs, -1),
        p_dl=down.power * on,
        n_dl=down.units * on,
        l_sleep_k=l_sleep_k,
        l_active_k=l_active_k,
        l_sleep=l_sleep,
        l_active=l_active,
    )


# ---------------------------------------------------------------------------
# CPU


@dataclass
class CpuSolution:
    f_c: float
    f_k: np.ndarray
    n_comp: np.ndarray
    objective: float
    objectives: np.ndarray  # one per candidate frequency, in config order


def cpu_caps(q_m: np.ndarray, config: ScenarioConfig) -> np.ndarray:
    """Largest useful share per UE: enough cycles to clear Q_m + 1 units."""
    return (np.asarray(q_m, dtype=float) + 1) / (config.timing.tau * config.arrays.j)


def cpu_objective(f_c, f_k, q_tilde, config: ScenarioConfig):
    """ES part of the per-slot objective (constant sleep-power offset included as written)."""
    cpu = config.cpu
    t, ts = config.timing.tau, config.timing.tau_s
    v_a3 = config.lyapunov.v * config.lyapunov.alphas[2]
    f_c = np.asarray(f_c, dtype=float)
    on = (f_c > 0).astype(float)
    work = t * np.sum(np.asarray(q_tilde) * np.asarray(f_k) * config.arrays.j, axis=-1)
    return v_a3 * t * (on * (cpu.p_on - cpu.p_sleep) + cpu.p_sleep + cpu.kappa * f_c ** 3) - work \
        + v_a3 * ts * cpu.p_sleep


def greedy_allocation(f_c: np.ndarray, caps: np.ndarray, q_tilde: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Fill UEs in decreasing J_k Q~_k (ties by index) up to their caps, for each f_c.

    Returns an array shaped (len(f_c), K).  UEs with Q~_k <= 0 end with zero.
    """
    order = np.argsort(-(j * q_tilde), kind="stable")
    c = caps[order]
    before = np.concatenate(([0.0], np.cumsum(c)[:-1]))
    alloc_sorted = np.clip(np.asarray(f_c, dtype=float)[:, None] - before[None, :], 0.0, c[None, :])
    alloc = np.empty_like(alloc_sorted)
    alloc[:, order] = alloc_sorted
    alloc[:, q_tilde <= 0] = 0.0
    return alloc


def solve_cpu(snap: QueueSnapshot, config: ScenarioConfig, strategy: Optional[StrategyPreset] = None,
              q_tilde: Optional[np.ndarray] = None) -> CpuSolution:
    strategy = strategy or _NO_FORCING
    arr = config.arrays
    if q_tilde is None:
        q_tilde = pressure_terms(snap, arr.mu)[0]
    freqs = config.cpu.freq_set
    caps = cpu_caps(snap.q_m, config)
    if strategy.equal_cpu_split:
        alloc = np.minimum(freqs[:, None] / config.n_users, caps[None, :])
    else:
        alloc = greedy_allocation(freqs, caps, q_tilde, arr.j)
    obj = cpu_objective(freqs, alloc, q_tilde, config)
    if strategy.force_es_on:
        if not np.any(freqs > 0):
            raise ValueError(f"strategy {strategy.name!r} keeps the ES on but F has no positive frequency")
        obj = np.where(freqs > 0, obj, np.inf)
    i = int(np.argmin(obj))  # first minimum: ties go to the lower-index frequency
    f_k = alloc[i]
    return CpuSolution(float(freqs[i]), f_k, floor_count(config.timing.tau * f_k * arr.j), float(obj[i]), obj)


# ---------------------------------------------------------------------------
# full decision and objective evaluators


def solve_slot(snap: QueueSnapshot, gain_ul, gain_dl, bw_ul, bw_dl, config: ScenarioConfig,
               strategy: Optional[StrategyPreset] = None, tables: Optional[Tables] = None):
    """Radio then CPU allocation; returns (Decision, RadioSolution, CpuSolution)."""
    if isinstance(strategy, str):
        strategy = get_preset(strategy)
    radio = solve_radio(snap, gain_ul, gain_dl, bw_ul, bw_dl, config, strategy, tables)
    cpu = solve_cpu(snap, config, strategy)
    dec = Decision(
        ap_active=radio.ap_active, es_active=cpu.f_c > 0, f_c=cpu.f_c,
        ue_active=radio.ue_active, mcs_ul=radio.mcs_ul, p_tx=radio.p_tx, n_ul=radio.n_ul,
        mcs_dl=radio.mcs_dl, p_dl=radio.p_dl, n_dl=radio.n_dl, f_k=cpu.f_k, n_comp=cpu.n_comp,
    )
    return dec, radio, cpu


def slot_energies(dec: Decision, config: ScenarioConfig) -> tuple[float, float, float]:
    """(E_u summed over UEs, E_a, E_m) for a decision."""
    arr = config.arrays
    t, ts = config.timing.tau, config.timing.tau_s
    on = dec.ue_active.astype(float)
    e_u = float(np.sum(t * (on * (arr.p_on + arr.tx_consumed(dec.p_tx)) + (1 - on) * arr.p_sleep)
                       + ts * arr.p_on))
    ap = config.ap
    a = 1.0 if dec.ap_active else 0.0
    e_a = t * (a * (ap.p_on + float(dec.p_dl.sum())) + (1 - a) * ap.p_sleep) + ts * ap.p_on
    cpu = config.cpu
    m = 1.0 if dec.f_c > 0 else 0.0
    e_m = t * (m * cpu.p_on + (1 - m) * cpu.p_sleep + cpu.kappa * dec.f_c ** 3) + ts * cpu.p_on
    return e_u, e_a, e_m


def gamma_objective_parts(snap: QueueSnapshot, dec: Decision, config: ScenarioConfig) -> tuple[float, float]:
    """Radio and CPU parts of the relaxed per-slot objective; their sum is the objective."""
    arr = config.arrays
    a1, a2, a3 = config.lyapunov.alphas
    v = config.lyapunov.v
    t = config.timing.tau
    w = snap.z + arr.mu * snap.y
    e_u, e_a, e_m = slot_energies(dec, config)
    radio = float(np.sum((4 * snap.q_m - 2 * snap.q_l) * dec.n_ul - 4 * snap.q_a * dec.n_dl
                         + w * (np.maximum(0.0, snap.q_l - dec.n_ul) + np.maximum(0.0, snap.q_a - dec.n_dl)))) \
        + v * (a1 * e_u + a2 * e_a)
    q_tilde = 4 * (snap.q_m - snap.q_a) + w
    cpu = -t * float(np.sum(q_tilde * dec.f_k * arr.j)) + v * a3 * e_m
    return radio, cpu


def eval_gamma_objective(snap: QueueSnapshot, dec: Decision, config: ScenarioConfig, arrivals=None) -> float:
    """Relaxed (floor- and step-free) per-slot objective for any feasible decision.

    ``arrivals`` do not enter the relaxed objective; accepted for symmetry with
    :func:`eval_exact_objective`.
    """
    radio, cpu = gamma_objective_parts(snap, dec, config)
    return radio + cpu


def max_units(config: ScenarioConfig, bw_ul=None, bw_dl=None):
    """Per-UE (N_u_max, N_c_max, N_d_max) with the best MCS, full CPU, given bandwidths."""
    arr = config.arrays
    eq_ul, eq_dl = config.equal_bandwidth()
    bw_ul = eq_ul if bw_ul is None else np.asarray(bw_ul, dtype=float)
    bw_dl = eq_dl if bw_dl is None else np.asarray(bw_dl, dtype=float)
    t, nb = config.timing.tau, config.phy.packet_bits
    best_ul = max(m.bits_per_symbol for m in config.mcs_ul)
    best_dl = max(m.bits_per_symbol for m in config.mcs_dl)
    n_u = floor_count(floor_count(floor_count(t * bw_ul) * best_ul / nb) * nb / arr.s_in)
    n_d = floor_count(floor_count(floor_count(t * bw_dl) * best_dl / nb) * nb / arr.s_out)
    n_c = floor_count(t * config.cpu.f_max * arr.j)
    return n_u, n_c, n_d


def eval_exact_objective(snap: QueueSnapshot, dec: Decision, arrivals, config: ScenarioConfig,
                         delta=None, bw_ul=None, bw_dl=None) -> float:
    """Per-slot drift-plus-penalty bound before the floor/step relaxations.

    Uses the floored unit counts carried by the decision and the step function
    on the predicted total backlog.  Diagnostic only.
    """
    arr = config.arrays
    v = config.lyapunov.v
    a = np.asarray(arrivals, dtype=float)
    delta = config.delta_init if delta is None else np.asarray(delta, dtype=float)
    n_u_max, n_c_max, _ = max_units(config, bw_ul, bw_dl)
    q_l, q_m, q_a = snap.q_l, snap.q_m, snap.q_a
    n_u, n_c, n_d = dec.n_ul, dec.n_comp, dec.n_dl
    rest_l = np.maximum(0.0, q_l - n_u)
    rest_m = np.maximum(0.0, q_m - n_c)
    rest_a = np.maximum(0.0, q_a - n_d)
    pred = rest_l + a + rest_m + np.minimum(q_l, n_u_max) + rest_a + np.minimum(q_m, n_c_max)
    step = (pred - delta * config.q_avg > 0).astype(float)
    per_ue = (-2 * q_l * n_u + 4 * q_m * (n_u - n_c) + 4 * q_a * (n_c - n_d)
              + snap.z * (rest_l + rest_m + rest_a) + arr.mu * snap.y * step)
    e_w, _ = weighted_energy(*slot_energies(dec, config), config.lyapunov.alphas)
    return float(per_ue.sum()) + v * e_w


def compute_zeta(config: ScenarioConfig, bw_ul=None, bw_dl=None) -> float:
    """Drift-bound constant; needs a bounded arrival process (``arrival_max`` on every UE)."""
    if any(u.arrival_max is None for u in config.ues):
        raise ValueError("compute_zeta needs arrival_max on every UE")
    arr = config.arrays
    a_max = np.array([u.arrival_max for u in config.ues], dtype=float)
    n_u, n_c, n_d = max_units(config, bw_ul, bw_dl)
    terms = (a_max ** 2 + 3 * n_u ** 2 + 4 * n_c ** 2 + 2 * n_d ** 2 + config.q_avg ** 2 / 2
             + arr.mu ** 2 * (1 - arr.epsilon) ** 2 / 2)
    return float(terms.sum())


def zeta_from_maxima(a_max, n_u_max, n_c_max, n_d_max, q_avg, mu, epsilon) -> float:
    """Same constant from explicit per-UE maxima (arrays or scalars)."""
    terms = (np.square(a_max) + 3 * np.square(n_u_max) + 4 * np.square(n_c_max) + 2 * np.square(n_d_max)
             + np.square(q_avg) / 2 + np.square(mu) * np.square(1 - np.asarray(epsilon)) / 2)
    return float(np.sum(terms))
