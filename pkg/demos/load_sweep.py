"""Sweep the offered load and write a plot-ready KPI CSV.

Runs every algorithm at 5..10 Mbps per UE. The CSV has one row per
1000-TTI reporting window; ``ratsteer summarize --in sweep.csv`` prints the
comparison table again later.

    python3 demos/load_sweep.py [ttis] [out.csv]
"""
import sys
import time

from ratsteer import scaled_config
from ratsteer.metrics import format_summary, run_sweep, summarize, write_csv

ttis = int(sys.argv[1]) if len(sys.argv) > 1 else 10_000
out = sys.argv[2] if len(sys.argv) > 2 else "sweep.csv"

cfg = scaled_config(ue_count=10, gnb_count=2, ttis=ttis)
t0 = time.time()
rows = run_sweep(cfg)
write_csv(rows, out)
print(f"{len(rows)} rows -> {out} in {time.time() - t0:.0f} s\n")
print(format_summary(summarize(rows)))
