"""Command line: ``disco run``, ``disco sweep``, ``disco verify``.

Exit codes: 0 success, 1 verification failure, 2 usage/configuration error.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import os
import subprocess
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, verify
from .config import ConfigError, apply_overrides, config_hash, from_dict, to_dict, validate_config
from .control import PRESETS, get_preset
from .sim import RandomizationSpec, episode_streams, mean_ci, realization_seeds, run_episode, run_realization
from .scenarios import TEMPLATES, with_arrival_rate, with_v

SWEEP_COLUMNS = ("strategy", "param", "value", "n", "mean_e_w", "ci_e_w", "mean_delay", "ci_delay",
                 "mean_e_tot", "ci_e_tot", "mean_e_u", "mean_e_a", "mean_e_m",
                 "duty_ap", "duty_ue", "duty_es")


class UsageError(Exception):
    pass


def _load_config(path: str, overrides):
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise UsageError(f"{p}: invalid JSON ({e})") from None
    randomization = data.pop("randomization", None)
    try:
        data = apply_overrides(data, overrides or [])
        cfg = validate_config(from_dict(data))
    except (ConfigError, ValueError, KeyError, TypeError) as e:
        raise UsageError(f"{p}: invalid configuration\n{e}") from None
    rnd = None
    if randomization is not None:
        try:
            rnd = RandomizationSpec(**{k: tuple(v) if isinstance(v, list) else v for k, v in randomization.items()})
        except TypeError as e:
            raise UsageError(f"{p}: invalid randomization block ({e})") from None
    return cfg, rnd


def _parse_strategy(name: str):
    """``preset`` or ``preset@bandwidth_policy``."""
    preset, _, policy = name.partition("@")
    if preset not in PRESETS:
        raise UsageError(f"unknown strategy {preset!r}; valid presets: {', '.join(PRESETS)}")
    if policy and policy not in ("equal", "heuristic"):
        raise UsageError(f"unknown bandwidth policy {policy!r}; use equal or heuristic")
    return preset, policy or None


def _seed(args) -> int:
    env = os.environ.get("DISCO_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"DISCO_SEED must be an integer, got {env!r}") from None
    return args.seed


def _git_stamp() -> str:
    try:
        out = subprocess.run(["git", "rev-parse", "--short", "HEAD"], capture_output=True, text=True, timeout=5,
                             cwd=Path(__file__).resolve().parent)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def _write_manifest(out: Path, args, seed: int, extra=None) -> None:
    """Append one JSON line describing the invocation; written before any work starts."""
    out.mkdir(parents=True, exist_ok=True)
    entry = {
        "command": args.command,
        "config": str(getattr(args, "config", "")),
        "overrides": list(getattr(args, "set", None) or []),
        "seed": seed,
        "out": str(out),
        "version": __version__,
        "git": _git_stamp(),
        "argv": sys.argv[1:],
    }
    entry.update(extra or {})
    with open(out / "manifest.jsonl", "a", encoding="utf-8") as fh:
        fh.write(json.dumps(entry, sort_keys=True) + "\n")


def cmd_run(args) -> int:
    cfg, rnd = _load_config(args.config, args.set)
    preset, policy = _parse_strategy(args.strategy)
    if policy:
        cfg = cfg.replace(bandwidth_policy=policy)
    if args.slots <= 0:
        raise UsageError("--slots must be positive")
    seed = _seed(args)
    out = Path(args.out)
    _write_manifest(out, args, seed, {"strategy": args.strategy, "slots": args.slots,
                                      "config_hash": config_hash(cfg)})
    # same derivation as a one-realization sweep, so the two agree
    ss = realization_seeds(seed, 1)[0]
    params_rng, _, _ = episode_streams(ss)
    if rnd is not None:
        cfg = rnd.apply(cfg, params_rng)
    log = run_episode(cfg, preset, args.slots, ss, check=args.check)
    csv_path, json_path = log.save(out)
    agg = log.aggregates()
    print(f"wrote {csv_path} and {json_path}")
    print(f"mean weighted energy {agg['mean_e_w']:.6g} J/slot, mean delay {agg['mean_delay']:.6g} s, "
          f"duty AP {agg['duty']['ap']:.3f} UE {agg['duty']['ue']:.3f} ES {agg['duty']['es']:.3f}")
    return 0


def _parse_param(spec: str):
    name, sep, values = spec.partition("=")
    name = name.strip()
    if not sep:
        raise UsageError("--param expects NAME=v1,v2,... with NAME in {V, arrival}")
    if name not in ("V", "arrival"):
        raise UsageError(f"unknown sweep parameter {name!r}; use V or arrival")
    try:
        vals = [float(v) for v in values.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--param {name}: values must be numbers") from None
    if not vals:
        raise UsageError("empty sweep list")
    return name, vals


def _sweep_job(job):
    cfg, rnd, preset, slots, seed, out = job
    log = run_realization(cfg, rnd, preset, slots, seed, keep_log=True)
    log.save(out)
    return log.aggregates()


def cmd_sweep(args) -> int:
    cfg, rnd = _load_config(args.config, args.set)
    param, values = _parse_param(args.param)
    strategies = [s for s in args.strategies.split(",") if s.strip()]
    if not strategies:
        raise UsageError("empty strategy list")
    parsed = [_parse_strategy(s) for s in strategies]
    if args.realizations <= 0:
        raise UsageError("--realizations must be positive")
    seed = _seed(args)
    out = Path(args.out)
    _write_manifest(out, args, seed, {"param": param, "values": values, "strategies": strategies,
                                      "realizations": args.realizations, "slots": args.slots})
    seeds = realization_seeds(seed, args.realizations)
    jobs, keys = [], []
    for (name, (preset, policy)), value in itertools.product(zip(strategies, parsed), values):
        c = with_v(cfg, value) if param == "V" else with_arrival_rate(cfg, value)
        if policy:
            c = c.replace(bandwidth_policy=policy)
        for s in seeds:
            jobs.append((c, rnd, preset, args.slots, s, out / "episodes"))
            keys.append((name, value))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            results = list(ex.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]

    rows = []
    for (name, value), group in itertools.groupby(zip(keys, results), key=lambda kr: kr[0]):
        aggs = [r for _, r in group]
        e_w, ci_w = mean_ci([a["mean_e_w"] for a in aggs])
        d, ci_d = mean_ci([a["mean_delay"] for a in aggs])
        e_t, ci_t = mean_ci([a["mean_e_tot"] for a in aggs])
        rows.append({
            "strategy": name, "param": param, "value": value, "n": len(aggs),
            "mean_e_w": e_w, "ci_e_w": ci_w, "mean_delay": d, "ci_delay": ci_d,
            "mean_e_tot": e_t, "ci_e_tot": ci_t,
            "mean_e_u": float(np.mean([a["mean_e_u"] for a in aggs])),
            "mean_e_a": float(np.mean([a["mean_e_a"] for a in aggs])),
            "mean_e_m": float(np.mean([a["mean_e_m"] for a in aggs])),
            "duty_ap": float(np.mean([a["duty"]["ap"] for a in aggs])),
            "duty_ue": float(np.mean([a["duty"]["ue"] for a in aggs])),
            "duty_es": float(np.mean([a["duty"]["es"] for a in aggs])),
        })
    table = out / f"sweep_{param}.csv"
    with open(table, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    print(f"wrote {len(results)} episodes under {out / 'episodes'} and table {table}")
    for r in rows:
        print(f"{r['strategy']:>20s} {param}={r['value']:<10g} E^w {r['mean_e_w']:.5g} ± {r['ci_e_w']:.2g}  "
              f"delay {r['mean_delay']:.4g} ± {r['ci_delay']:.2g}")
    return 0


def cmd_verify(args) -> int:
    seed = _seed(args)
    results = verify.run_suite(args.suite, seed=seed, quick=args.quick)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} passed")
    return 1 if failed else 0


def cmd_config(args) -> int:
    """Print a built-in template as JSON (a starting point for ``run``/``sweep``)."""
    if args.template not in TEMPLATES:
        raise UsageError(f"unknown template {args.template!r}; choose from {', '.join(TEMPLATES)}")
    cfg, rnd = TEMPLATES[args.template]()
    data = to_dict(cfg)
    if rnd is not None:
        data["randomization"] = {k: v for k, v in to_dict(rnd).items() if v is not None}
    print(json.dumps(data, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="disco", description="Discontinuous computation offloading simulator")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("config", help="scenario JSON file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config field by dotted path (repeatable), e.g. lyapunov.v=1e6")
        if seed:
            sp.add_argument("--seed", type=int, default=0, help="master seed (DISCO_SEED overrides)")
        sp.add_argument("--slots", type=int, default=1000, help="slots per episode")
        sp.add_argument("--out", default="runs", help="output directory")

    r = sub.add_parser("run", help="simulate one episode")
    common(r)
    r.add_argument("--strategy", default="holistic", help="preset name, optionally preset@heuristic")
    r.add_argument("--check", action="store_true", help="assert invariants after every slot")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="cross product of parameter values, strategies and realizations")
    common(s)
    s.add_argument("--param", required=True, help="V=v1,v2,... or arrival=a1,a2,...")
    s.add_argument("--strategies", default="holistic", help="comma-separated presets (preset@heuristic allowed)")
    s.add_argument("--realizations", type=int, default=1)
    s.add_argument("--jobs", type=int, default=1, help="worker processes")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="oracle, invariant or acceptance suite")
    v.add_argument("--suite", choices=("oracle", "invariants", "acceptance"), default="oracle")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--quick", action="store_true", help="reduced sizes (not the acceptance scale)")
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("config", help="print a built-in scenario template as JSON")
    c.add_argument("template")
    c.set_defaults(func=cmd_config)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
