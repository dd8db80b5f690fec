"""Command line entry point: ``run``, ``summarize`` and ``validate``."""
from __future__ import annotations

import argparse
import sys

from .config import ALGORITHMS, ConfigError, dump_config, load_config
from .metrics import GridError, format_summary, read_csv, run_sweep, summarize, write_csv

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ratsteer", description="Multi-RAT traffic steering simulator")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run a load sweep and write a KPI CSV")
    r.add_argument("--config", required=True)
    r.add_argument("--algo", choices=ALGORITHMS, help="run only this algorithm")
    r.add_argument("--seed", type=int, help="run only this seed")
    r.add_argument("--out", help="CSV path (default: the config's output)")
    r.add_argument("--workers", type=int, help="parallel runs (default: the config's workers)")

    s = sub.add_parser("summarize", help="steady-state comparison of a KPI CSV")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--reference", default="dqn")

    v = sub.add_parser("validate", help="check a config file and print it with defaults filled in")
    v.add_argument("--config", required=True)
    return p


def _run(args) -> int:
    cfg = load_config(args.config)
    if args.algo:
        cfg.algorithms = [args.algo]
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be non-negative")
        cfg.seeds = [args.seed]
    out = args.out or cfg.output
    rows = run_sweep(cfg, args.workers)
    write_csv(rows, out)
    bad = sorted({(r["algorithm"], r["load_bps"], r["seed"], r["status"]) for r in rows if r["status"] != "ok"})
    for a, l, s, status in bad:
        print(f"{a} load={l:g} seed={s}: {status}", file=sys.stderr)
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_DIVERGED if bad else EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.cmd == "run":
            return _run(args)
        if args.cmd == "validate":
            print(dump_config(load_config(args.config)))
            return EXIT_OK
        rows = read_csv(args.inp)
        print(format_summary(summarize(rows, args.reference), args.reference))
        return EXIT_OK
    except (ConfigError, GridError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
