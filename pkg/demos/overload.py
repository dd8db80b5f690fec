"""Load shedding by a trained, frozen DQN policy.

A DQN is trained on six UEs, then frozen. In a fresh drop, every flow's
current queue is suddenly filled far past the load cutoff, and the next
two decision periods show which flows the policy moves to the other RAT.

    python3 demos/overload.py
"""
from ratsteer import scaled_config
from ratsteer.scenarios import overload_scenario
from ratsteer.sim import run

RAT_NAMES = ("LTE", "NR")
CLASS_NAMES = ("voice", "video", "gaming")

cfg = scaled_config(ue_count=6, gnb_count=2, ttis=30_000)
agent = run(cfg, "dqn", 8e6, seed=0).agent
results = overload_scenario(cfg, agent, 8e6, seed=1)

for r in results:
    after = " ".join(RAT_NAMES[a] for _, a in r.decisions)
    moved = f"switched at +{r.switch_tti - r.cross_tti} TTI" if r.switched else "stayed"
    print(f"UE {r.ue} {CLASS_NAMES[r.klass]:<6} on {RAT_NAMES[r.rat_before]}: {after:<10} {moved}")
print(f"{sum(r.switched for r in results)} of {len(results)} flows steered away")
