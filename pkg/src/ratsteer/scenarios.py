"""Scripted scenarios run against a fixed (frozen) steering policy."""
from __future__ import annotations

from dataclasses import dataclass

from .config import ExperimentConfig
from .sim import World


@dataclass
class SheddingResult:
    flow: int
    ue: int
    klass: int
    rat_before: int
    cross_tti: int
    decisions: list[tuple[int, int]]  # (tti, action) after the crossing
    switch_tti: int | None  # first decision that left the overloaded RAT

    @property
    def switched(self) -> bool:
        return self.switch_tti is not None


def overload_scenario(cfg: ExperimentConfig, agent, load_bps: float, seed: int, warm_ttis: int = 2000,
                      fill: float = 0.8, periods: int = 2) -> list[SheddingResult]:
    """Drive every active flow's current queue past the load cutoff and watch
    the next ``periods`` decision periods.

    The world runs ``warm_ttis`` TTIs under the frozen ``agent``; then, in a
    single TTI, each flow's current queue is topped up to ``fill`` of the
    queue capacity (at least one packet above the heuristic load cutoff).
    """
    agent.frozen = True
    world = World(cfg, load_bps, seed)
    for _ in range(warm_ttis):
        world.step(agent)
    cutoff = cfg.heuristic.load_cutoff
    target = max(int(fill * cfg.sim.queue_capacity), int(cutoff) + 1)
    cross = world.tti
    out = []
    for f, src in enumerate(world.flows):
        if src.rate <= 0:
            continue
        rat = world.route[f]
        q = world.queues[src.ue][rat]
        if q.npkts < target:
            world.inject(src.ue, rat, f, target - q.npkts)
        out.append(SheddingResult(f, src.ue, int(src.klass), rat, cross, [], None))
    first_log = len(world.decision_log)
    for _ in range(periods * cfg.sim.decision_period):
        world.step(agent)
    by_flow = {r.flow: r for r in out}
    for tti, f, a in world.decision_log[first_log:]:
        r = by_flow.get(f)
        if r is None:
            continue
        r.decisions.append((tti, a))
        if r.switch_tti is None and a != r.rat_before:
            r.switch_tti = tti
    return out
