"""Verification suites: oracle equivalence, invariants, and the acceptance experiments.

Every check returns a :class:`Check` with the measured value, the threshold
it is held to, and the verdict, so callers can print a uniform table.
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .control import PRESETS, apply_strategy, update_delta
from .oracle import cpu_oracle, radio_oracle, random_instance
from .queueing import update_virtual_y, update_virtual_z
from .scenarios import arrival_load, comparison, reliability, tradeoff, with_arrival_rate, with_v
from .sim import SampledEnvironment, SlotRunner, episode_streams, realization_seeds, run_monte_carlo, \
    run_realization
from .solver import gamma_objective_parts, solve_slot
from .state import SlotState, check_decision


@dataclass
class Check:
    name: str
    passed: bool
    measured: str
    threshold: str
    seconds: float = 0.0
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"[{verdict}] {self.name}: measured {self.measured}; required {self.threshold} ({self.seconds:.1f} s)"


def _timed(fn: Callable[..., Check]) -> Callable[..., Check]:
    def wrapper(*a, **kw):
        t0 = time.perf_counter()
        c = fn(*a, **kw)
        c.seconds = time.perf_counter() - t0
        return c

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# ---------------------------------------------------------------------------
# oracle equivalence


@_timed
def oracle_equivalence(n_instances: int = 500, seed: int = 0, presets=("holistic",)) -> Check:
    """Solver objective equals the enumerated minimum exactly, radio and CPU separately."""
    rng = np.random.default_rng(seed)
    mismatches = []
    worst = 0.0
    for i in range(n_instances):
        inst = random_instance(rng)
        for name in presets:
            cfg, preset = apply_strategy(name, inst.config)
            dec, _, _ = solve_slot(inst.snap, inst.gain_ul, inst.gain_dl, inst.bw_ul, inst.bw_dl, cfg, preset)
            radio, cpu = gamma_objective_parts(inst.snap, dec, cfg)
            r = radio_oracle(inst.snap, inst.gain_ul, inst.gain_dl, inst.bw_ul, inst.bw_dl, cfg, preset)
            c = cpu_oracle(inst.snap, cfg, preset)
            gap = max(radio - r.value, cpu - c.value)
            worst = max(worst, gap)
            if radio != r.value or cpu != c.value:
                mismatches.append((i, name, radio - r.value, cpu - c.value))
    n = n_instances * len(presets)
    return Check(f"oracle equivalence ({n_instances} instances x {len(presets)} presets)", not mismatches,
                 f"{len(mismatches)} mismatches, max gap {worst:.3g}", "0 mismatches, gap exactly 0",
                 detail={"mismatches": mismatches[:10], "cases": n})


# ---------------------------------------------------------------------------
# invariants


@_timed
def invariant_steps(n_steps: int = 100_000, seed: int = 0, episode_len: int = 500) -> Check:
    """Randomized slot steps with every structural invariant asserted after each step.

    Scenarios, strategies and V are redrawn every ``episode_len`` slots.  Per
    step: decision invariants, FIFO/count consistency, unit conservation,
    FIFO delivery order, Z/Y/delta recomputed from their update rules and
    checked against the clamps.
    """
    rng = np.random.default_rng(seed)
    names = list(PRESETS)
    done = 0
    failures = []
    while done < n_steps:
        inst = random_instance(rng, max_users=4, max_mcs=6, max_freqs=6)
        cfg = inst.config.replace(bandwidth_policy=str(rng.choice(["equal", "heuristic"])))
        cfg = cfg.replace(lyapunov=dataclasses.replace(
            cfg.lyapunov, adapt_delta=bool(rng.random() < 0.5), delta_init=(float(rng.uniform(1, 3)),),
            nu_init=(float(rng.uniform(0.1, 10)),), window_max=int(rng.integers(10, 500))))
        name = names[int(rng.integers(len(names)))]
        runner = SlotRunner(cfg, name)
        cfg = runner.config
        _, ch, ar = episode_streams(int(rng.integers(2 ** 31)))
        env = SampledEnvironment(cfg, ch, ar)
        state = SlotState.initial(cfg)
        last_birth = np.full(cfg.n_users, -1)
        for _ in range(min(episode_len, n_steps - done)):
            try:
                q_m = np.array([len(q) for q in state.q_compute], dtype=float)
                z0, y0, d0 = state.z.copy(), state.y.copy(), state.delta.copy()
                dec, m = runner.step(state, env)
                check_decision(dec, cfg, q_m)
                if runner.preset.force_ap_on:
                    assert dec.ap_active, "forced AP asleep"
                if runner.preset.force_ue_on:
                    assert np.all(dec.ue_active), "forced UE asleep"
                if runner.preset.force_es_on:
                    assert dec.f_c > 0, "forced ES asleep"
                state.check()
                for i, d, c in m.delays:
                    birth = state.t - d  # delay = delivery slot + 1 - birth, and state.t is already advanced
                    assert birth >= last_birth[i], "FIFO delivery order broken"
                    last_birth[i] = birth
                q_tot = sum(state.counts())
                assert np.array_equal(state.z, update_virtual_z(z0, q_tot, cfg.q_avg)), "Z update"
                assert np.array_equal(state.y, update_virtual_y(y0, q_tot, d0, cfg.q_avg, cfg.arrays.mu,
                                                                cfg.arrays.epsilon)), "Y update"
                assert np.all(state.z >= 0) and np.all(state.y >= 0) and np.all(state.delta >= 1), "clamps"
                if not cfg.lyapunov.adapt_delta:
                    assert np.array_equal(state.delta, d0), "delta moved without adaptation"
                # equilibrium and clamp of the threshold update
                assert np.array_equal(update_delta(d0, 1.0, cfg.arrays.epsilon, cfg.arrays.epsilon),
                                      np.maximum(d0, 1)), "delta equilibrium"
            except AssertionError as e:
                failures.append((done, name, str(e)))
                break
            done += 1
        if len(failures) >= 5:
            break
    return Check(f"invariant suite ({n_steps} randomized slot steps)", not failures,
                 f"{done} steps, {len(failures)} violations", "0 violations",
                 detail={"failures": failures})


# ---------------------------------------------------------------------------
# acceptance experiments

# Run sizes and thresholds; each constant is the value stated for the criterion
# unless noted as a pinned choice.
C2_SLOTS = 20_000
C2_V = 5e6
C2_SEED = 2024
C4_V_GRID = tuple(np.logspace(4, 8, 5))  # pinned: 5 log-spaced values spanning delay-bound to energy-bound
C4_REALIZATIONS = 10
C4_SLOTS = 5_000  # pinned
C4_SATURATION = 0.9  # pinned: delay at the largest V within [0.9, 1.05] x D_avg
C5_SLOTS = 100_000
C6_SLOTS = 10_000
C6_REALIZATIONS = 20
C6_V = 5e7
C7_RATES = (2.0, 6.0, 10.0, 14.0, 18.0)  # pinned grid
C7_REALIZATIONS = 3  # pinned
C7_SLOTS = 10_000
C7_SATURATION = 0.9  # pinned: "close to 1" read as >= 0.9 for every entity


@lru_cache(maxsize=2)
def _criterion2_run(seed: int = C2_SEED, slots: int = C2_SLOTS):
    cfg, rnd = tradeoff(C2_V)
    return run_realization(cfg, rnd, "holistic", slots, realization_seeds(seed, 1)[0], keep_log=True)


@_timed
def criterion1(seed: int = 0, n: int = 500) -> Check:
    c = oracle_equivalence(n, seed)
    c.name = "C1 " + c.name
    return c


@_timed
def criterion2(seed: int = C2_SEED, slots: int = C2_SLOTS) -> Check:
    log = _criterion2_run(seed, slots)
    d = log.mean_delay_timestamp()
    d_avg = log.config.ues[0].constraint.d_avg
    return Check("C2 average delay (K=5, V=5e6, T=%d)" % slots, d <= 1.05 * d_avg,
                 f"mean delay {d * 1e3:.2f} ms", f"<= {1.05 * d_avg * 1e3:.1f} ms")


@_timed
def criterion3(seed: int = C2_SEED, slots: int = C2_SLOTS) -> Check:
    log = _criterion2_run(seed, slots)
    cfg = log.config
    z = log.series["z"][-1] / log.horizon / cfg.q_avg
    y = log.series["y"][-1] / log.horizon / cfg.arrays.mu
    ok = bool(np.all(z < 0.05) and np.all(y < 0.05))
    return Check("C3 mean-rate stability", ok,
                 f"max Z(T)/(T Q_avg) {z.max():.2e}, max Y(T)/(T mu) {y.max():.2e}", "both < 0.05")


@_timed
def criterion4(seed: int = 0, v_grid=C4_V_GRID, realizations: int = C4_REALIZATIONS, slots: int = C4_SLOTS) -> Check:
    cfg, rnd = tradeoff()
    e, de, d, dd = [], [], [], []
    for v in v_grid:
        r = run_monte_carlo(with_v(cfg, v), rnd, realizations, "holistic", slots, seed)
        m, ci = r.summary("mean_e_w")
        e.append(m), de.append(ci)
        m, ci = r.summary("mean_delay")
        d.append(m), dd.append(ci)
    energy_ok = all(e[i + 1] <= e[i] + de[i] + de[i + 1] for i in range(len(e) - 1))
    delay_ok = all(d[i + 1] >= d[i] - dd[i] - dd[i + 1] for i in range(len(d) - 1))
    d_avg = cfg.ues[0].constraint.d_avg
    sat_ok = C4_SATURATION * d_avg <= d[-1] <= 1.05 * d_avg
    measured = "E^w " + ", ".join(f"{x * 1e3:.2f}" for x in e) + " mJ; delay " + \
        ", ".join(f"{x * 1e3:.1f}" for x in d) + " ms"
    return Check("C4 energy-delay trade-off over V", energy_ok and delay_ok and sat_ok, measured,
                 f"E^w nonincreasing, delay nondecreasing (CI overlap allowed), last delay in "
                 f"[{C4_SATURATION * d_avg * 1e3:.0f}, {1.05 * d_avg * 1e3:.0f}] ms",
                 detail={"v": list(v_grid), "e_w": e, "ci_e_w": de, "delay": d, "ci_delay": dd})


@_timed
def criterion5(seed: int = 0, slots: int = C5_SLOTS) -> Check:
    cfg, rnd = reliability()
    log = run_realization(cfg, rnd, "holistic", slots, realization_seeds(seed, 1)[0], keep_log=True)
    c = log.config
    surv, conv, final = [], [], []
    for k, ue in enumerate(c.ues):
        surv.append(float(log.survivor(k, [ue.constraint.d_max])[0]))
        tail = log.series["delta"][-slots // 10:, k]
        conv.append(float(tail.std() / tail.mean()))
        final.append(float(tail.mean()))
    eps = c.arrays.epsilon
    surv_ok = all(0 <= s <= 2 * e for s, e in zip(surv, eps))
    conv_ok = all(x < 0.05 for x in conv)
    order = np.argsort([u.constraint.d_max for u in c.ues])  # increasing D_max
    order_ok = all(final[order[i]] <= final[order[i + 1]] for i in range(len(order) - 1))
    measured = ("S(D_max) " + ", ".join(f"{s:.1e}" for s in surv) + "; delta " +
                ", ".join(f"{x:.2f}" for x in final) + "; sd/mean " + ", ".join(f"{x:.3f}" for x in conv))
    return Check("C5 out-of-service adaptation (4 UEs, T=%d)" % slots, surv_ok and conv_ok and order_ok, measured,
                 f"S(D_max) <= {2 * eps[0]:.0e}, last-decile sd/mean < 0.05, delta ordered by D_max",
                 detail={"survivor": surv, "delta": final, "sd_over_mean": conv,
                         "e_tot": float(log.series["e_tot"].mean())})


COMPARISON_ORDER = (("holistic@heuristic", "holistic@equal"), ("holistic@equal", "radio_sleep"),
                    ("holistic@equal", "es_sleep"), ("radio_sleep", "no_sleep"), ("es_sleep", "no_sleep"))


def comparison_energies(seed: int = 0, realizations: int = C6_REALIZATIONS, slots: int = C6_SLOTS,
                        v: float = C6_V, jobs: int = 1) -> dict:
    cfg, rnd = comparison(v)
    out = {}
    for label in ("holistic@heuristic", "holistic@equal", "radio_sleep", "es_sleep", "no_sleep"):
        name, _, policy = label.partition("@")
        c = cfg.replace(bandwidth_policy=policy) if policy else cfg
        out[label] = run_monte_carlo(c, rnd, realizations, name, slots, seed, jobs=jobs).values("mean_e_tot")
    return out


@_timed
def criterion6(seed: int = 0, realizations: int = C6_REALIZATIONS, slots: int = C6_SLOTS, jobs: int = 1) -> Check:
    e = comparison_energies(seed, realizations, slots, jobs=jobs)
    parts, ok = [], True
    for a, b in COMPARISON_ORDER:
        agree = float(np.mean(e[a] <= e[b]))
        good = e[a].mean() <= e[b].mean() and agree >= 0.9
        ok &= good
        parts.append(f"{a}<={b}: means {e[a].mean() * 1e3:.1f}/{e[b].mean() * 1e3:.1f} mJ, paired {agree:.0%}"
                     + ("" if good else " (X)"))
    return Check("C6 sleep-mode gain ordering (K=10, %d realizations)" % realizations, ok, "; ".join(parts),
                 "each ordering on means with >= 90% of paired realizations",
                 detail={k: v.tolist() for k, v in e.items()})


@_timed
def criterion7(seed: int = 0, rates=C7_RATES, realizations: int = C7_REALIZATIONS, slots: int = C7_SLOTS) -> Check:
    cfg, rnd = arrival_load(rates[0])
    duty = {"ap": [], "ue": [], "es": []}
    for a in rates:
        r = run_monte_carlo(with_arrival_rate(cfg, a), rnd, realizations, "holistic", slots, seed)
        for key in duty:
            duty[key].append(float(r.values(f"duty.{key}").mean()))
    mono = all(all(x[i + 1] >= x[i] for i in range(len(x) - 1)) for x in duty.values())
    top = all(x[-1] >= C7_SATURATION for x in duty.values())
    measured = "; ".join(f"{k} " + ", ".join(f"{v:.3f}" for v in x) for k, x in duty.items())
    return Check("C7 duty-cycle saturation (K=15, A=%s)" % ",".join(f"{a:g}" for a in rates), mono and top, measured,
                 f"nondecreasing in A and >= {C7_SATURATION} at the highest A", detail=duty)


@_timed
def criterion8(seed: int = 0, n_steps: int = 100_000) -> Check:
    c = invariant_steps(n_steps, seed)
    c.name = "C8 " + c.name
    return c


@_timed
def criterion9(seed: int = C2_SEED, slots: int = C2_SLOTS) -> Check:
    log = _criterion2_run(seed, slots)
    ts, lit = log.mean_delay_timestamp(), log.mean_delay_little()
    rel = abs(ts - lit) / lit
    return Check("C9 Little's-law cross-check", rel <= 0.05,
                 f"timestamp {ts * 1e3:.3f} ms vs Little {lit * 1e3:.3f} ms (rel. diff {rel:.2%})", "<= 5%")


ACCEPTANCE = (criterion1, criterion2, criterion3, criterion4, criterion5, criterion6, criterion7, criterion8,
              criterion9)


def run_suite(suite: str, seed: int = 0, quick: bool = False) -> list[Check]:
    if suite == "oracle":
        return [oracle_equivalence(60 if quick else 500, seed, presets=tuple(PRESETS))]
    if suite == "invariants":
        return [invariant_steps(5_000 if quick else 100_000, seed)]
    if suite == "acceptance":
        if quick:
            return [criterion1(seed, 50), criterion2(slots=4000), criterion3(slots=4000), criterion9(slots=4000),
                    criterion8(seed, 5000)]
        return [c() for c in ACCEPTANCE]
    raise ValueError(f"unknown suite {suite!r}")
