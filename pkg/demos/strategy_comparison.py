#!/usr/bin/env python3
"""Holistic sleep control against always-on and partial-sleep baselines.

All strategies share the realization seeds, so each one sees the same
scenario, fading and arrivals.
"""
import argparse

from disco.scenarios import comparison
from disco.sim import run_monte_carlo

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument("--slots", type=int, default=5000)
parser.add_argument("--realizations", type=int, default=4)
parser.add_argument("--seed", type=int, default=0)
parser.add_argument("--jobs", type=int, default=1)
args = parser.parse_args()

cfg, rnd = comparison()
print(f"{'strategy':>12} {'E_tot [mJ]':>11} {'E_w [mJ]':>10} {'delay [ms]':>11}")
for name in ("holistic", "radio_sleep", "es_sleep", "no_sleep", "equal_fk"):
    mc = run_monte_carlo(cfg, rnd, args.realizations, name, args.slots, args.seed, args.jobs)
    e_tot, _ = mc.summary("mean_e_tot")
    e_w, _ = mc.summary("mean_e_w")
    delay, _ = mc.summary("mean_delay")
    print(f"{name:>12} {1e3 * e_tot:11.2f} {1e3 * e_w:10.2f} {1e3 * delay:11.1f}")
