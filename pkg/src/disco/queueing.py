"""Physical queue dynamics (local, compute, result), virtual queues, pressure terms.

Within a slot, departures are computed from the start-of-slot contents, then
units handed over from the upstream stage are appended, then new arrivals.  A
unit therefore advances at most one stage per slot.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .phy import floor_count
from .state import SlotState


@dataclass(frozen=True)
class QueueSnapshot:
    q_l: np.ndarray
    q_m: np.ndarray
    q_a: np.ndarray
    z: np.ndarray
    y: np.ndarray

    @property
    def q_tot(self) -> np.ndarray:
        return self.q_l + self.q_m + self.q_a

    @classmethod
    def of(cls, state: SlotState) -> "QueueSnapshot":
        q_l, q_m, q_a = state.counts()
        return cls(q_l, q_m, q_a, state.z.copy(), state.y.copy())

    @classmethod
    def from_values(cls, q_l, q_m, q_a, z=0.0, y=0.0) -> "QueueSnapshot":
        q_l = np.atleast_1d(np.asarray(q_l, dtype=float))
        k = q_l.size

        def vec(v):
            return np.broadcast_to(np.asarray(v, dtype=float), (k,)).copy()

        return cls(q_l, vec(q_m), vec(q_a), vec(z), vec(y))


def serve_and_arrive_local(state: SlotState, k: int, n_ul: int, arrivals: int) -> list[tuple[int, int]]:
    """Uplink departures from the local queue of UE ``k``, then the slot's new arrivals.

    New units enter the queue at the slot boundary, so they carry ``t + 1`` as
    their birth stamp (the first slot in which they can be served).  Returns
    the transferred runs.
    """
    if n_ul < 0:
        raise ValueError("n_ul must be >= 0")
    moved = state.q_local[k].pop(n_ul)
    state.q_local[k].push(state.t + 1, int(arrivals))
    state.created[k] += int(arrivals)
    return moved


def compute_units(f_k, j_k, tau: float):
    """Units the ES completes for a UE in one slot at frequency ``f_k``."""
    out = floor_count(tau * np.asarray(f_k, dtype=float) * np.asarray(j_k, dtype=float))
    return int(out) if np.ndim(out) == 0 else out


def serve_compute_queue(state: SlotState, k: int, n_c: int, inbound) -> list[tuple[int, int]]:
    done = state.q_compute[k].pop(n_c)
    state.q_compute[k].extend(inbound)
    return done


def serve_result_queue(state: SlotState, k: int, n_dl: int, inbound) -> list[tuple[int, int]]:
    """Deliver results to UE ``k``.

    Returns ``(delay_slots, count)`` pairs; the delay counts every slot from the
    unit's birth stamp through the delivery slot inclusive.
    """
    sent = state.q_result[k].pop(n_dl)
    state.q_result[k].extend(inbound)
    out = [(state.t + 1 - birth, count) for birth, count in sent]
    state.delivered[k] += sum(c for _, c in sent)
    return out


def update_virtual_z(z, q_tot_next, q_avg):
    return np.maximum(0.0, np.asarray(z, dtype=float) + q_tot_next - q_avg)


def update_virtual_y(y, q_tot_next, delta, q_avg, mu, epsilon):
    exceeded = (np.asarray(q_tot_next, dtype=float) > np.asarray(delta) * q_avg).astype(float)
    return np.maximum(0.0, np.asarray(y, dtype=float) + mu * (exceeded - epsilon))


def pressure_terms(snap: QueueSnapshot, mu):
    """Backlog weights driving the CPU scheduler and the bandwidth heuristic.

    Returns ``(q_tilde, q_tilde_ul, q_tilde_dl)``.
    """
    w = snap.z + mu * snap.y
    q_tilde = 4 * (snap.q_m - snap.q_a) + w
    q_tilde_ul = 4 * snap.q_m - 2 * snap.q_l + w * snap.q_l
    q_tilde_dl = 4 * snap.q_a + w * snap.q_a
    return q_tilde, q_tilde_ul, q_tilde_dl
