#!/usr/bin/env python3
"""Per-user reliability targets and the adaptive delta threshold.

Each UE has its own worst-case delay bound; the controller shrinks or grows
delta until the measured out-of-service rate sits at the target.
"""
import argparse

from disco.scenarios import reliability
from disco.sim import episode_streams, run_episode

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument("--slots", type=int, default=20000)
parser.add_argument("--seed", type=int, default=0)
args = parser.parse_args()

cfg, rnd = reliability()
params, _, _ = episode_streams(args.seed)
cfg = rnd.apply(cfg, params)
log = run_episode(cfg, "holistic", args.slots, args.seed)

print(f"{'UE':>3} {'D_max [ms]':>10} {'eps':>8} {'P(D>D_max)':>11} {'delta':>7} {'mean delay [ms]':>16}")
for k, ue in enumerate(cfg.ues):
    d_max = ue.constraint.d_max
    tail = log.oos_rate_delay()[k]
    print(f"{k:3d} {1e3 * d_max:10.0f} {ue.constraint.epsilon:8.0e} {tail:11.2e} "
          f"{log.series['delta'][-1, k]:7.2f} {1e3 * log.mean_delay_timestamp(k):16.1f}")
