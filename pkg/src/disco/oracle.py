"""Brute-force reference solvers for small instances.

The radio oracle enumerates every sleep pattern and every (MCS or silence)
choice per UE and direction; the CPU oracle enumerates every frequency in F
and, for each, every vertex of the inner allocation polytope.  Both score
candidates with :func:`eval_gamma_objective`'s parts, independently of the
fast solvers' own bookkeeping.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from .config import CpuModel, LyapunovConfig, McsScheme, PhyConfig, ScenarioConfig, UeProfile
from .control import StrategyPreset
from .phy import floor_count, mean_gain, per_model_for, snr_thresholds
from .queueing import QueueSnapshot, pressure_terms
from .solver import cpu_caps, eval_exact_objective, gamma_objective_parts
from .state import Decision

_NONE = StrategyPreset("unconstrained")


def _link_options(config: ScenarioConfig, k: int, gain: float, bw: float, uplink: bool):
    """All admissible (mcs index, power, units) for one UE and direction, silence first."""
    arr = config.arrays
    mcs_set = config.mcs_ul if uplink else config.mcs_dl
    target = arr.per_ul[k] if uplink else arr.per_dl[k]
    unit_bits = arr.s_in[k] if uplink else arr.s_out[k]
    p_max = arr.p_tx_max[k] if uplink else config.ap.p_dl_max / config.n_users
    nb = config.phy.packet_bits
    gam = snr_thresholds(tuple(mcs_set), float(target), nb, per_model_for(config.phy))
    noise = config.phy.noise_power(bw)
    out = [(-1, 0.0, 0.0)]
    n_sym = floor_count(config.timing.tau * bw)
    for m, (scheme, g) in enumerate(zip(mcs_set, gam)):
        p = g * noise / gain
        if p > p_max:
            continue
        units = floor_count(floor_count(n_sym * scheme.bits_per_symbol / nb) * nb / unit_bits)
        out.append((m, float(p), float(units)))
    return out


def _decision(k, ap, es, f_c, ue_on, ul, dl, f_k):
    return Decision(
        ap_active=ap, es_active=es, f_c=f_c, ue_active=np.array(ue_on, dtype=bool),
        mcs_ul=np.array([o[0] for o in ul]), p_tx=np.array([o[1] for o in ul]),
        n_ul=np.array([o[2] for o in ul]),
        mcs_dl=np.array([o[0] for o in dl]), p_dl=np.array([o[1] for o in dl]),
        n_dl=np.array([o[2] for o in dl]),
        f_k=np.asarray(f_k, dtype=float), n_comp=np.zeros(k),
    )


def radio_candidates(snap, gain_ul, gain_dl, bw_ul, bw_dl, config: ScenarioConfig,
                     strategy: Optional[StrategyPreset] = None):
    """Yield every feasible radio decision (CPU fields idle)."""
    strategy = strategy or _NONE
    k = config.n_users
    idle = (-1, 0.0, 0.0)
    ul_opts = [_link_options(config, i, gain_ul[i], bw_ul[i], True) for i in range(k)]
    dl_opts = [_link_options(config, i, gain_dl[i], bw_dl[i], False) for i in range(k)]
    ap_choices = (True,) if strategy.force_ap_on else (False, True)
    for ap in ap_choices:
        if not ap:
            yield _decision(k, False, False, 0.0, [False] * k, [idle] * k, [idle] * k, np.zeros(k))
            continue
        ue_choices = [(True,) if strategy.force_ue_on else (False, True)] * k
        for ue_on in itertools.product(*ue_choices):
            per_ue = [itertools.product(ul_opts[i], dl_opts[i]) if ue_on[i] else [(idle, idle)]
                      for i in range(k)]
            for combo in itertools.product(*per_ue):
                ul = [c[0] for c in combo]
                dl = [c[1] for c in combo]
                yield _decision(k, True, False, 0.0, ue_on, ul, dl, np.zeros(k))


def allocation_vertices(f_c: float, caps: np.ndarray):
    """Vertices of {0 <= f_k <= min(cap_k, f_c), sum f_k <= f_c}.

    At a vertex at most one coordinate lies strictly between its bounds; that
    coordinate takes whatever the sum constraint leaves.
    """
    k = len(caps)
    upper = np.minimum(caps, f_c)
    seen = set()
    for pattern in itertools.product((0, 1, 2), repeat=k):
        if sum(p == 2 for p in pattern) > 1:
            continue
        f = np.array([upper[i] if p == 1 else 0.0 for i, p in enumerate(pattern)])
        if 2 in pattern:
            j = pattern.index(2)
            f[j] = f_c - f.sum()
            if not 0 <= f[j] <= upper[j]:
                continue
        if f.sum() > f_c * (1 + 1e-12):
            continue
        key = tuple(f)
        if key not in seen:
            seen.add(key)
            yield f


@dataclass
class OracleResult:
    value: float
    decision: Decision
    count: int  # candidates scored


def radio_oracle(snap, gain_ul, gain_dl, bw_ul, bw_dl, config, strategy=None) -> OracleResult:
    best, best_dec, n = np.inf, None, 0
    for dec in radio_candidates(snap, gain_ul, gain_dl, bw_ul, bw_dl, config, strategy):
        val = gamma_objective_parts(snap, dec, config)[0]
        n += 1
        if val < best:
            best, best_dec = val, dec
    return OracleResult(best, best_dec, n)


def cpu_oracle(snap: QueueSnapshot, config: ScenarioConfig, strategy=None) -> OracleResult:
    strategy = strategy or _NONE
    k = config.n_users
    caps = cpu_caps(snap.q_m, config)
    best, best_dec, n = np.inf, None, 0
    for f_c in config.cpu.freq_set:
        if strategy.force_es_on and f_c == 0:
            continue
        if strategy.equal_cpu_split:
            allocs = [np.minimum(f_c / k, caps)]
        else:
            allocs = allocation_vertices(float(f_c), caps)
        for f in allocs:
            dec = Decision.idle(k)
            dec.f_c, dec.es_active, dec.f_k = float(f_c), bool(f_c > 0), f
            val = gamma_objective_parts(snap, dec, config)[1]
            n += 1
            if val < best:
                best, best_dec = val, dec
    return OracleResult(best, best_dec, n)


def lp_inner_optimum(f_c: float, caps: np.ndarray, q_tilde: np.ndarray, j: np.ndarray) -> float:
    """max sum(q_tilde * j * f) over the allocation polytope, by linear programming."""
    k = len(caps)
    if f_c == 0:
        return 0.0
    # solve a rescaled problem (shares of f_c, unit-size coefficients); raw
    # cycle counts and tiny J_k values otherwise fall under the solver tolerances
    c = np.asarray(q_tilde, dtype=float) * j
    scale = float(np.max(np.abs(c)))
    if scale == 0:
        return 0.0
    bounds = [(0.0, float(min(cap / f_c, 1.0))) for cap in caps]
    res = linprog(-c / scale, A_ub=np.ones((1, k)), b_ub=[1.0], bounds=bounds, method="highs")
    if not res.success:
        raise RuntimeError(res.message)
    return float(-res.fun) * scale * f_c


def exact_oracle(snap, arrivals, gain_ul, gain_dl, bw_ul, bw_dl, config, delta=None) -> OracleResult:
    """Minimum of the exact (floored, step-function) objective over radio x CPU candidates.

    CPU candidates are the allocation vertices; unit counts use the floored
    compute throughput of each candidate.
    """
    k = config.n_users
    caps = cpu_caps(snap.q_m, config)
    cpu = []
    for f_c in config.cpu.freq_set:
        for f in allocation_vertices(float(f_c), caps):
            cpu.append((float(f_c), f))
    best, best_dec, n = np.inf, None, 0
    for rdec in radio_candidates(snap, gain_ul, gain_dl, bw_ul, bw_dl, config):
        for f_c, f in cpu:
            dec = Decision(rdec.ap_active, f_c > 0, f_c, rdec.ue_active, rdec.mcs_ul, rdec.p_tx, rdec.n_ul,
                           rdec.mcs_dl, rdec.p_dl, rdec.n_dl, f,
                           floor_count(config.timing.tau * f * config.arrays.j))
            val = eval_exact_objective(snap, dec, arrivals, config, delta, bw_ul, bw_dl)
            n += 1
            if val < best:
                best, best_dec = val, dec
    return OracleResult(best, best_dec, n)


# ---------------------------------------------------------------------------
# random small instances


@dataclass
class Instance:
    config: ScenarioConfig
    snap: QueueSnapshot
    gain_ul: np.ndarray
    gain_dl: np.ndarray
    bw_ul: np.ndarray
    bw_dl: np.ndarray
    arrivals: np.ndarray


def random_instance(rng: np.random.Generator, max_users: int = 2, max_mcs: int = 3, max_freqs: int = 4,
                    max_queue: int = 20) -> Instance:
    """Small random scenario and queue state for oracle comparisons.

    Bandwidths are drawn so that unit capacities stay comparable with the
    queue sizes; otherwise every instance degenerates to "send everything".
    """
    k = int(rng.integers(1, max_users + 1))
    all_mcs = [McsScheme(m, r) for m in (4, 16, 64, 256) for r in (0.3, 0.5, 0.7, 0.9)]
    pick = rng.choice(len(all_mcs), size=int(rng.integers(1, max_mcs + 1)), replace=False)
    mcs = tuple(all_mcs[i] for i in sorted(pick))
    n_f = int(rng.integers(1, max_freqs + 1))
    levels = sorted(rng.choice(np.arange(11) / 10, size=n_f, replace=False).tolist())
    if levels == [0.0]:
        levels.append(1.0)
    levels = tuple(levels)
    ues = []
    for _ in range(k):
        ues.append(UeProfile(
            position=tuple(rng.uniform(-75, 75, size=2).tolist()),
            input_unit_bits=float(10 ** rng.uniform(3, 5)),
            output_unit_bits=float(10 ** rng.uniform(2, 4)),
            cycles_per_unit_inv=float(10 ** -rng.uniform(5, 8)),
            arrival_rate=float(rng.uniform(1, 10)),
            arrival_max=30,
        ))
    v = float(10 ** rng.uniform(0, 7))
    alphas = tuple((rng.dirichlet(np.ones(3))).tolist())
    cfg = ScenarioConfig(
        ues=tuple(ues), mcs_ul=mcs, mcs_dl=mcs,
        cpu=CpuModel(f_max=float(10 ** rng.uniform(8, 9.7)), levels=levels),
        phy=PhyConfig(total_bw_ul=float(10 ** rng.uniform(5.5, 7)), total_bw_dl=float(10 ** rng.uniform(5.5, 7))),
        lyapunov=LyapunovConfig(v=v, alphas=alphas),
    )
    q = rng.integers(0, max_queue + 1, size=(3, k)).astype(float)
    z = rng.integers(0, 40, size=k).astype(float) * (rng.random(k) < 0.7)
    y = rng.integers(0, 5, size=k).astype(float) * (rng.random(k) < 0.5)
    snap = QueueSnapshot(q[0], q[1], q[2], z, y)
    g = mean_gain(cfg.arrays.positions, cfg.ap_position, cfg.phy)
    gain_ul = g * rng.exponential(1.0, size=k)
    gain_dl = g * rng.exponential(1.0, size=k)
    bw_ul, bw_dl = cfg.equal_bandwidth()
    arrivals = rng.integers(0, 31, size=k)
    return Instance(cfg, snap, gain_ul, gain_dl, bw_ul, bw_dl, arrivals)


def pressure(inst: Instance) -> np.ndarray:
    return pressure_terms(inst.snap, inst.config.arrays.mu)[0]
