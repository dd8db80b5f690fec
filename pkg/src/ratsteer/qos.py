"""QoS ratios, the weighted steering metric and its sigmoid reward."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .traffic import TrafficClassSpec

R_CAP = 2.0


@dataclass(frozen=True)
class QosWeights:
    w1: float = 0.5  # delay
    w2: float = 0.5  # throughput

    def __post_init__(self):
        if self.w1 < 0 or self.w2 < 0 or abs(self.w1 + self.w2 - 1.0) > 1e-9:
            raise ValueError("weights must be non-negative and sum to 1")


@dataclass(frozen=True)
class KpiSample:
    klass: int
    bs: int
    delay: float  # s
    throughput: float  # bit/s
    window: int = 1  # TTIs

    def __post_init__(self):
        if self.window < 1 or self.delay < 0 or self.throughput < 0:
            raise ValueError(f"invalid KPI sample {self}")


def delay_ratio(sample: KpiSample, spec: TrafficClassSpec, r_cap: float = R_CAP) -> float:
    """D_QoS / D. A window with no served packet counts as r_cap."""
    if sample.delay == 0:
        return r_cap
    return spec.d_qos / sample.delay


def throughput_ratio(sample: KpiSample, spec: TrafficClassSpec) -> float:
    return sample.throughput / spec.t_qos


def steering_metric(r_delay: float, r_tput: float, w: QosWeights, r_cap: float = R_CAP) -> float:
    r_delay = min(max(r_delay, 0.0), r_cap)
    r_tput = min(max(r_tput, 0.0), r_cap)
    return w.w1 * r_delay + w.w2 * r_tput


def reward(m: float) -> float:
    # numerically stable logistic
    if m >= 0:
        return 1.0 / (1.0 + math.exp(-m))
    z = math.exp(m)
    return z / (1.0 + z)


def sample_reward(sample: KpiSample, spec: TrafficClassSpec, w: QosWeights,
                  r_cap: float = R_CAP) -> float:
    m = steering_metric(delay_ratio(sample, spec, r_cap), throughput_ratio(sample, spec), w, r_cap)
    return reward(m)
