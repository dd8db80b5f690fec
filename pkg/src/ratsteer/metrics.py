"""Load sweeps, KPI CSV files and steady-state comparison tables."""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .sim import KPI_COLUMNS, run

INT_COLUMNS = {"seed", "window", "ttis", "drops", "capacity_violations", "generated_pkts", "delivered_pkts"}
STR_COLUMNS = {"algorithm", "status"}
CLASSES = ("voice", "video", "gaming")


class GridError(ValueError):
    """Algorithms in a KPI table were not run on the same (load, seed) grid."""


def sweep_cells(cfg: ExperimentConfig) -> list[tuple[str, float, int]]:
    return [(a, float(l), int(s)) for a in cfg.algorithms for l in cfg.loads_bps for s in cfg.seeds]


def run_cell(cfg: ExperimentConfig, algorithm: str, load_bps: float, seed: int) -> list[dict]:
    """KPI rows of one run. Failures become a single row with a non-ok status."""
    try:
        return run(cfg, algorithm, load_bps, seed).rows
    except Exception as e:  # recorded, the sweep goes on
        row = {c: 0 for c in KPI_COLUMNS}
        row.update(algorithm=algorithm, seed=seed, load_bps=load_bps, window=0,
                   status=f"error: {type(e).__name__}: {e}")
        return [row]


def _run_cell_args(args):
    return run_cell(*args)


def sort_rows(rows: list[dict]) -> list[dict]:
    return sorted(rows, key=lambda r: (r["algorithm"], float(r["load_bps"]), int(r["seed"]), int(r["window"])))


def run_sweep(cfg: ExperimentConfig, workers: int | None = None) -> list[dict]:
    """Every (algorithm, load, seed) cell of ``cfg``; rows in canonical order."""
    cells = sweep_cells(cfg)
    workers = workers or cfg.workers
    rows: list[dict] = []
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_run_cell_args, [(cfg, *c) for c in cells]):
                rows.extend(part)
    else:
        for c in cells:
            rows.extend(run_cell(cfg, *c))
    return sort_rows(rows)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(KPI_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in KPI_COLUMNS])
    return buf.getvalue()


def write_csv(rows: list[dict], path) -> None:
    Path(path).write_bytes(rows_to_csv(rows).encode("utf-8"))


def parse_csv(text: str) -> list[dict]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != KPI_COLUMNS:
        raise ValueError(f"unexpected columns: {reader.fieldnames}")
    rows = []
    for raw in reader:
        row = {}
        for c in KPI_COLUMNS:
            v = raw[c]
            row[c] = v if c in STR_COLUMNS else int(v) if c in INT_COLUMNS else float(v)
        rows.append(row)
    return rows


def read_csv(path) -> list[dict]:
    return parse_csv(Path(path).read_bytes().decode("utf-8"))


def steady_state(rows: list[dict], fraction: float = 0.25) -> list[dict]:
    """Last ``fraction`` of the windows of one run (at least one)."""
    rows = sorted(rows, key=lambda r: r["window"])
    k = max(1, math.ceil(len(rows) * fraction))
    return rows[-k:]


def _group(rows):
    runs: dict[tuple, list[dict]] = {}
    for r in rows:
        runs.setdefault((r["algorithm"], float(r["load_bps"]), int(r["seed"])), []).append(r)
    return runs


def check_grid(rows: list[dict]) -> None:
    runs = _group(rows)
    algos = sorted({k[0] for k in runs})
    if len(algos) < 2:
        raise GridError(f"need at least two algorithms, found {algos}")
    grid = {k[1:] for k in runs}
    missing = [(a, l, s) for a in algos for (l, s) in sorted(grid) if (a, l, s) not in runs]
    if missing:
        cells = ", ".join(f"{a}@load={l:g},seed={s}" for a, l, s in missing)
        raise GridError(f"missing cells: {cells}")


def summarize(rows: list[dict], reference: str = "dqn") -> list[dict]:
    """Steady-state means per (algorithm, load), averaged over seeds.

    Each entry carries throughput, delay, reward and the per-class share of
    bytes served by LTE. When ``reference`` is present, entries of the other
    algorithms also get the reference's relative throughput and delay change
    against them (``d_tput``, ``d_delay``); positive ``d_tput`` and negative
    ``d_delay`` favour the reference.
    """
    check_grid(rows)
    per_load: dict[tuple[str, float], list[list[dict]]] = {}
    for (a, l, s), rs in sorted(_group(rows).items()):
        per_load.setdefault((a, l), []).append(steady_state(rs))
    out = []
    for (a, l), runs in sorted(per_load.items()):
        ss = [r for run_rows in runs for r in run_rows]
        entry = dict(
            algorithm=a, load_bps=l, seeds=len(runs),
            throughput_bps=float(np.mean([np.mean([r["throughput_bps"] for r in rr]) for rr in runs])),
            mean_delay_s=float(np.mean([np.mean([r["mean_delay_s"] for r in rr]) for rr in runs])),
            mean_reward=float(np.mean([np.mean([r["mean_reward"] for r in rr]) for rr in runs])),
        )
        for k in CLASSES:
            lte = sum(r[f"bytes_{k}_lte"] for r in ss)
            nr = sum(r[f"bytes_{k}_nr"] for r in ss)
            entry[f"{k}_lte_share"] = lte / (lte + nr) if lte + nr else float("nan")
        out.append(entry)
    ref = {e["load_bps"]: e for e in out if e["algorithm"] == reference}
    for e in out:
        r = ref.get(e["load_bps"])
        if r is None or e["algorithm"] == reference:
            continue
        e["d_tput"] = _rel(r["throughput_bps"], e["throughput_bps"])
        e["d_delay"] = _rel(r["mean_delay_s"], e["mean_delay_s"])
    return out


def _rel(x: float, base: float) -> float:
    if base == 0:
        return 0.0 if x == 0 else math.copysign(math.inf, x)
    return (x - base) / base


def format_summary(entries: list[dict], reference: str = "dqn") -> str:
    head = f"{'algorithm':<10} {'load_Mbps':>9} {'tput_Mbps':>10} {'delay_ms':>9} {'reward':>7} " \
           f"{'voiceLTE':>8} {'videoLTE':>8} {'gameLTE':>8} {reference + '_dT':>9} {reference + '_dD':>9}"
    lines = [head]
    for e in entries:
        dt = f"{e['d_tput'] * 100:+8.1f}%" if "d_tput" in e else f"{'':>9}"
        dd = f"{e['d_delay'] * 100:+8.1f}%" if "d_delay" in e else f"{'':>9}"
        lines.append(f"{e['algorithm']:<10} {e['load_bps'] / 1e6:>9.2f} {e['throughput_bps'] / 1e6:>10.3f} "
                     f"{e['mean_delay_s'] * 1e3:>9.3f} {e['mean_reward']:>7.4f} "
                     f"{e['voice_lte_share']:>8.2f} {e['video_lte_share']:>8.2f} {e['gaming_lte_share']:>8.2f} "
                     f"{dt} {dd}")
    return "\n".join(lines)
