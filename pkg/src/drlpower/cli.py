"""Command-line entry point: run, compare, export, selftest."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from .config import load_config
from .metrics import (aggregate, build_comparison, export_traces, mean_metrics, write_comparison_csv,
                      write_per_seed_csv, write_summary)
from .policies import ARMS
from .sim import Simulator, run_experiment

log = logging.getLogger("drlpower")


def parse_seeds(text: str) -> list[int]:
    """'7' -> [7]; '0..31' -> [0, ..., 31] (inclusive)."""
    if ".." in text:
        lo, hi = (int(v) for v in text.split("..", 1))
        if hi < lo:
            raise argparse.ArgumentTypeError(f"empty seed range {text!r}")
        return list(range(lo, hi + 1))
    return [int(text)]


def _seeds(args, cfg) -> list[int]:
    if args.seeds is not None:
        return args.seeds
    return [args.seed if args.seed is not None else cfg.seed]


def _config(args):
    return load_config(args.config, episodes=args.episodes)


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _print_rows(rows) -> None:
    def f(v, fmt):
        return "NA" if v is None else format(v, fmt)
    print(f"{'arm':8s} {'eff Mbps/J':>11s} {'tput Mbps':>10s} {'gain eff':>9s} {'gain tput':>10s}")
    for r in rows:
        print(f"{r.arm:8s} {f(r.energy_efficiency, '11.3f')} {f(r.throughput_mbps, '10.3f')} "
              f"{f(r.gain_eff_pct, '8.1f')}% {f(r.gain_tput_pct, '9.1f')}%")


def cmd_run(args) -> int:
    cfg = _config(args)
    out = _out(args)
    per_seed = []
    for seed in _seeds(args, cfg):
        t0 = time.perf_counter()
        sim = Simulator(cfg, args.arm, seed)
        flog = sim.run()
        m = aggregate(flog.since(cfg.eval_start_frame), cfg.frame_duration, args.arm, seed)
        per_seed.append(m)
        export_traces(flog, None, out / f"trace_{args.arm}_seed{seed}.csv")
        if args.arm == "dqn":
            for n, agent in enumerate(sim.arm.agents):
                agent.net.save(out / f"weights_seed{seed}_node{n}.bin")
        log.info("seed %d: %.3f Mbps/J, %.3f Mbps (%.1fs)", seed, m.energy_efficiency,
                 m.throughput_mbps, time.perf_counter() - t0)
    results = {args.arm: {"per_seed": per_seed, "mean": mean_metrics(per_seed)}}
    rows = [r for r in build_comparison({args.arm: results[args.arm]["mean"]}) if r.energy_efficiency is not None]
    write_per_seed_csv(results, out / "per_seed.csv")
    write_summary(out / "summary.json", cfg.to_dict(), rows, [m.seed for m in per_seed])
    _print_rows(rows)
    return 0


def cmd_compare(args) -> int:
    cfg = _config(args)
    out = _out(args)
    seeds = _seeds(args, cfg)
    t0 = time.perf_counter()
    results = run_experiment(cfg, list(ARMS), seeds, jobs=args.jobs)
    rows = build_comparison({arm: res["mean"] for arm, res in results.items()})
    write_comparison_csv(rows, out / "comparison.csv")
    write_per_seed_csv(results, out / "per_seed.csv")
    write_summary(out / "summary.json", cfg.to_dict(), rows, seeds)
    _print_rows(rows)
    log.info("%d seeds x %d arms in %.1fs", len(seeds), len(ARMS), time.perf_counter() - t0)
    return 0


def cmd_export(args) -> int:
    cfg = _config(args)
    out = _out(args)
    for seed in _seeds(args, cfg):
        flog = Simulator(cfg, args.arm, seed).run()
        suffix = "all" if args.node is None else f"node{args.node}"
        path = out / f"trace_{args.arm}_seed{seed}_{suffix}.csv"
        try:
            n = export_traces(flog, args.node, path)
        except LookupError as exc:
            print(f"error: {exc}", file=sys.stderr)
            path.unlink(missing_ok=True)
            return 2
        print(f"{path}: {n} rows")
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run_all
    ok = True
    for name, passed, detail in run_all():
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="drlpower", description="Per-node DQN transmit power control simulator")
    sub = p.add_subparsers(dest="verb", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON file with ScenarioConfig keys")
    common.add_argument("--seed", type=int)
    common.add_argument("--seeds", type=parse_seeds, help="inclusive range n..m")
    common.add_argument("--episodes", type=int)
    common.add_argument("--out", default="out")
    common.add_argument("-v", "--verbose", action="store_true")

    r = sub.add_parser("run", parents=[common], help="run one policy arm")
    r.add_argument("--arm", choices=ARMS, default="dqn")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", parents=[common], help="run all arms on shared seeds")
    c.add_argument("--jobs", type=int, default=1, help="worker processes")
    c.set_defaults(func=cmd_compare)

    e = sub.add_parser("export", parents=[common], help="write per-frame traces")
    e.add_argument("--arm", choices=ARMS, default="dqn")
    e.add_argument("--node", type=int, help="single node (default: all)")
    e.set_defaults(func=cmd_export)

    s = sub.add_parser("selftest", help="gradient check, state sweep, FLOP count")
    s.add_argument("-v", "--verbose", action="store_true")
    s.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
