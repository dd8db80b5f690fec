"""Experiment configuration: schema, defaults and loading.

A config file is a JSON object. Every key is optional; omitted keys take
the defaults below (standard traffic classes, 1 eNB + 4 gNBs, 30 UEs). Unknown keys
are rejected.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, ValidationError, \
    field_validator, model_validator

from .baselines import Discretizer, HeuristicWeights
from .qos import QosWeights
from .rl import AgentConfig
from .traffic import TrafficClass, TrafficClassSpec

ALGORITHMS = ("dqn", "qlearning", "heuristic")
CLASS_NAMES = {"voice": TrafficClass.VOICE, "video": TrafficClass.VIDEO, "gaming": TrafficClass.GAMING}


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CellConfig(_Strict):
    tx_power_w: PositiveFloat
    bandwidth_hz: PositiveFloat
    carrier_freq_hz: PositiveFloat
    rbg_count: PositiveInt


class TopologyConfig(_Strict):
    enb_position: tuple[float, float] = (0.0, 0.0)
    gnb_positions: list[tuple[float, float]] = Field(default_factory=lambda: [
        (500.0, 0.0), (0.0, 500.0), (-500.0, 0.0), (0.0, -500.0)])
    enb: CellConfig = CellConfig(tx_power_w=40.0, bandwidth_hz=10e6, carrier_freq_hz=3.5e9, rbg_count=50)
    gnb: CellConfig = CellConfig(tx_power_w=20.0, bandwidth_hz=20e6, carrier_freq_hz=0.8e9, rbg_count=100)
    swap_carriers: bool = False
    ue_count: PositiveInt = 30
    ue_drop: Literal["uniform", "hotspot"] = "uniform"
    macro_radius_m: PositiveFloat = 1500.0
    hotspot_radius_m: PositiveFloat = 150.0
    noise_psd_dbm_hz: float = -174.0
    noise_figure_db: float = 9.0
    shadowing_sigma_db: float = Field(8.0, ge=0)

    @field_validator("gnb_positions")
    @classmethod
    def _some_gnb(cls, v):
        if not v:
            raise ValueError("at least one gNB is required")
        return v


class ClassConfig(_Strict):
    packet_size_bytes: PositiveInt
    t_qos_bps: PositiveFloat
    d_qos_s: PositiveFloat
    mix_fraction: float = Field(ge=0, le=1)


def _default_classes() -> dict[str, ClassConfig]:
    return {
        "voice": ClassConfig(packet_size_bytes=30, t_qos_bps=0.1e6, d_qos_s=0.100, mix_fraction=0.20),
        "video": ClassConfig(packet_size_bytes=250, t_qos_bps=10e6, d_qos_s=0.080, mix_fraction=0.50),
        "gaming": ClassConfig(packet_size_bytes=120, t_qos_bps=5e6, d_qos_s=0.040, mix_fraction=0.30),
    }


class TrafficConfig(_Strict):
    classes: dict[Literal["voice", "video", "gaming"], ClassConfig] = Field(default_factory=_default_classes)
    load_mode: Literal["per_ue", "aggregate"] = "per_ue"

    @field_validator("classes")
    @classmethod
    def _mix_sums_to_one(cls, v):
        full = _default_classes()
        full.update(v)
        total = sum(c.mix_fraction for c in full.values())
        if not math.isclose(total, 1.0, abs_tol=1e-9):
            raise ValueError(f"mix fractions sum to {total:g}, expected 1")
        return full

    def specs(self) -> dict[TrafficClass, TrafficClassSpec]:
        return {CLASS_NAMES[n]: TrafficClassSpec(CLASS_NAMES[n], c.packet_size_bytes, c.t_qos_bps,
                                                 c.d_qos_s, c.mix_fraction)
                for n, c in self.classes.items()}


class SimConfig(_Strict):
    ttis: int = Field(50_000, ge=0)
    tti_s: PositiveFloat = 1e-3
    decision_period: PositiveInt = 10
    reward_window: PositiveInt = 50
    report_window: PositiveInt = 1000
    queue_capacity: PositiveInt = 1000
    sinr_norm_db: tuple[float, float] = (-10.0, 40.0)

    @model_validator(mode="after")
    def _check(self):
        if self.ttis and self.ttis < self.decision_period:
            raise ValueError("ttis must be >= decision_period")
        if self.sinr_norm_db[1] <= self.sinr_norm_db[0]:
            raise ValueError("sinr_norm_db must be increasing")
        return self


class QosConfig(_Strict):
    w1: float = Field(0.5, ge=0, le=1)
    w2: float = Field(0.5, ge=0, le=1)
    r_cap: PositiveFloat = 2.0
    class_weights: dict[Literal["voice", "video", "gaming"], tuple[float, float]] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _weights(self):
        for name, (a, b) in [("default", (self.w1, self.w2)), *self.class_weights.items()]:
            try:
                QosWeights(a, b)
            except ValueError as e:
                raise ValueError(f"{name} weights: {e}") from None
        return self

    def weights(self) -> dict[TrafficClass, QosWeights]:
        out = {k: QosWeights(self.w1, self.w2) for k in TrafficClass}
        for name, (a, b) in self.class_weights.items():
            out[CLASS_NAMES[name]] = QosWeights(a, b)
        return out


class DqnConfig(_Strict):
    gamma: float = Field(0.9, ge=0, lt=1)
    lr: PositiveFloat = 1e-3
    batch_size: PositiveInt = 32
    replay_capacity: PositiveInt = 10_000
    target_sync: PositiveInt = 200
    eps_start: float = Field(1.0, ge=0, le=1)
    eps_end: float = Field(0.05, ge=0, le=1)
    eps_decay_steps: PositiveInt = 5000
    warmup: int = Field(500, ge=0)
    hidden: list[PositiveInt] = Field(default_factory=lambda: [32, 32])

    @model_validator(mode="after")
    def _eps(self):
        if self.eps_end > self.eps_start:
            raise ValueError("eps_end must be <= eps_start")
        return self

    def agent_config(self) -> AgentConfig:
        d = self.model_dump()
        d["hidden"] = tuple(d["hidden"])
        return AgentConfig(**d)


class QLearningConfig(_Strict):
    alpha: float = Field(0.1, ge=0, le=1)
    gamma: float = Field(0.9, ge=0, lt=1)
    eps_start: float = Field(1.0, ge=0, le=1)
    eps_end: float = Field(0.05, ge=0, le=1)
    eps_decay_steps: PositiveInt = 5000
    sinr_edges_db: tuple[float, float, float] = (0.0, 10.0, 20.0)
    queue_edges: tuple[float, float] = (50.0, 200.0)

    @model_validator(mode="after")
    def _check(self):
        if self.eps_end > self.eps_start:
            raise ValueError("eps_end must be <= eps_start")
        Discretizer(self.sinr_edges_db, self.queue_edges)
        return self

    def discretizer(self) -> Discretizer:
        return Discretizer(tuple(self.sinr_edges_db), tuple(self.queue_edges))


class HeuristicConfig(_Strict):
    alpha: float = Field(0.25, ge=0)
    beta: float = Field(0.25, ge=0)
    gamma: float = Field(0.25, ge=0)
    delta: float = Field(0.25, ge=0)
    load_cutoff: float = Field(50.0, ge=0)
    sinr_cutoff_db: float = 10.0

    def weights(self) -> HeuristicWeights:
        return HeuristicWeights(**self.model_dump())


class ExperimentConfig(_Strict):
    topology: TopologyConfig = Field(default_factory=TopologyConfig)
    traffic: TrafficConfig = Field(default_factory=TrafficConfig)
    sim: SimConfig = Field(default_factory=SimConfig)
    qos: QosConfig = Field(default_factory=QosConfig)
    dqn: DqnConfig = Field(default_factory=DqnConfig)
    qlearning: QLearningConfig = Field(default_factory=QLearningConfig)
    heuristic: HeuristicConfig = Field(default_factory=HeuristicConfig)
    loads_bps: list[PositiveFloat] = Field(default_factory=lambda: [5e6, 6e6, 7e6, 8e6, 9e6, 10e6])
    seeds: list[int] = Field(default_factory=lambda: [0])
    algorithms: list[Literal["dqn", "qlearning", "heuristic"]] = Field(default_factory=lambda: list(ALGORITHMS))
    output: str = "kpi.csv"
    workers: PositiveInt = 1

    @field_validator("seeds")
    @classmethod
    def _seeds(cls, v):
        if not v or any(s < 0 for s in v):
            raise ValueError("seeds must be a non-empty list of non-negative integers")
        return v


def parse_config(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(str(e)) from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}") from None
    return parse_config(data)


def dump_config(cfg: ExperimentConfig) -> str:
    return json.dumps(cfg.model_dump(mode="json"), indent=2, sort_keys=True)


def scaled_config(ue_count: int = 10, gnb_count: int = 2, ttis: int = 50_000, **overrides) -> ExperimentConfig:
    """Default config shrunk to fewer UEs and small cells."""
    base = ExperimentConfig()
    data = base.model_dump(mode="json")
    data["topology"]["ue_count"] = ue_count
    data["topology"]["gnb_positions"] = data["topology"]["gnb_positions"][:gnb_count]
    data["sim"]["ttis"] = ttis
    for key, val in overrides.items():
        section, _, field = key.partition("__")
        if field:
            data[section][field] = val
        else:
            data[section] = val
    return parse_config(data)
