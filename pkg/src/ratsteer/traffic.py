"""Typed Poisson traffic sources and the class mix."""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Mapping, Sequence

import numpy as np

from .netmodel import Packet


class TrafficClass(IntEnum):
    VOICE = 0
    VIDEO = 1
    GAMING = 2


@dataclass(frozen=True)
class TrafficClassSpec:
    klass: TrafficClass
    packet_size: int  # bytes
    t_qos: float  # bit/s
    d_qos: float  # s
    mix_fraction: float

    @property
    def packet_bits(self) -> int:
        return 8 * self.packet_size


DEFAULT_CLASSES: dict[TrafficClass, TrafficClassSpec] = {
    TrafficClass.VOICE: TrafficClassSpec(TrafficClass.VOICE, 30, 0.1e6, 0.100, 0.20),
    TrafficClass.VIDEO: TrafficClassSpec(TrafficClass.VIDEO, 250, 10e6, 0.080, 0.50),
    TrafficClass.GAMING: TrafficClassSpec(TrafficClass.GAMING, 120, 5e6, 0.040, 0.30),
}


def check_mix(specs: Mapping[TrafficClass, TrafficClassSpec], tol: float = 1e-9) -> None:
    total = sum(s.mix_fraction for s in specs.values())
    if abs(total - 1.0) > tol:
        raise ValueError(f"mix fractions sum to {total}, expected 1")
    if any(s.mix_fraction < 0 for s in specs.values()):
        raise ValueError("mix fractions must be non-negative")


@dataclass(frozen=True)
class FlowSource:
    flow: int
    ue: int
    klass: TrafficClass
    rate: float  # packets per TTI
    packet_bits: int

    def offered_bps(self, tti_duration: float = 1e-3) -> float:
        return self.rate * self.packet_bits / tti_duration


def generate_arrivals(src: FlowSource, tti: int, rng: np.random.Generator) -> list[Packet]:
    if src.rate <= 0:
        return []
    n = rng.poisson(src.rate)
    return [Packet(src.flow, int(src.klass), src.packet_bits, tti) for _ in range(n)]


def class_assignment(ue_count: int, classes: Sequence[TrafficClass]) -> dict[int, list[TrafficClass]]:
    """Round-robin class -> UE map. Every UE gets at least one class and
    every class at least one UE."""
    if ue_count < 1:
        raise ValueError("ue_count must be >= 1")
    owners: dict[int, list[TrafficClass]] = {u: [] for u in range(ue_count)}
    n = max(ue_count, len(classes))
    for i in range(n):
        owners[i % ue_count].append(classes[i % len(classes)])
    # dedupe while keeping order
    return {u: list(dict.fromkeys(ks)) for u, ks in owners.items()}


def build_traffic_mix(total_load: float, specs: Mapping[TrafficClass, TrafficClassSpec],
                      ue_count: int, tti_duration: float = 1e-3) -> list[FlowSource]:
    """Split ``total_load`` (bit/s) by class fraction, then evenly over the
    UEs carrying that class."""
    if ue_count < 1:
        raise ValueError("ue_count must be >= 1")
    if total_load < 0:
        raise ValueError("total_load must be >= 0")
    check_mix(specs)
    classes = [k for k in sorted(specs) if specs[k].mix_fraction > 0]
    owners = class_assignment(ue_count, classes)
    carriers = {k: [u for u in range(ue_count) if k in owners[u]] for k in classes}
    flows = []
    for u in range(ue_count):
        for k in owners[u]:
            spec = specs[k]
            bps = total_load * spec.mix_fraction / len(carriers[k])
            rate = bps * tti_duration / spec.packet_bits
            flows.append(FlowSource(len(flows), u, k, rate, spec.packet_bits))
    return flows
