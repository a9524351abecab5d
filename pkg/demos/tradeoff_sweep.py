#!/usr/bin/env python3
"""Energy vs delay as the penalty weight V grows.

Larger V weighs energy more heavily against queue backlog, so the weighted
energy falls while the mean delay climbs toward the average-delay target.
"""
import argparse

from disco.scenarios import tradeoff
from disco.sim import run_monte_carlo

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument("--slots", type=int, default=5000)
parser.add_argument("--realizations", type=int, default=4)
parser.add_argument("--seed", type=int, default=0)
parser.add_argument("--jobs", type=int, default=1)
args = parser.parse_args()

print(f"{'V':>8} {'E_w [mJ]':>10} {'delay [ms]':>11} {'AP duty':>8} {'ES duty':>8}")
for v in (1e4, 1e5, 1e6, 1e7, 1e8):
    cfg, rnd = tradeoff(v)
    mc = run_monte_carlo(cfg, rnd, args.realizations, "holistic", args.slots, args.seed, args.jobs)
    e_w, _ = mc.summary("mean_e_w")
    delay, _ = mc.summary("mean_delay")
    ap = sum(r["duty"]["ap"] for r in mc.runs) / len(mc.runs)
    es = sum(r["duty"]["es"] for r in mc.runs) / len(mc.runs)
    print(f"{v:8.0e} {1e3 * e_w:10.2f} {1e3 * delay:11.1f} {ap:8.3f} {es:8.3f}")
