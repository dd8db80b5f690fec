"""Train each steering policy on a small network and compare steady-state KPIs.

Ten UEs share one LTE macro cell and two NR small cells. Every UE offers
7 Mbps. Each algorithm runs for 20 000 TTIs (20 s of simulated time) and
the last quarter of the run is summarised.

    python3 demos/quickstart.py
"""
from ratsteer import scaled_config
from ratsteer.metrics import format_summary, run_sweep, summarize

cfg = scaled_config(ue_count=10, gnb_count=2, ttis=20_000, loads_bps=[7e6], seeds=[0])
rows = run_sweep(cfg)
print(format_summary(summarize(rows)))

# Positive dqn_dT means DQN moved more traffic than that baseline; negative
# dqn_dD means its packets waited less.
