"""Baseline steering policies: the weighted threshold rule and tabular Q-learning."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .netmodel import RAT
from .rl import EpsilonSchedule
from .traffic import TrafficClass

THROUGHPUT_HEAVY = (TrafficClass.VIDEO, TrafficClass.GAMING)


@dataclass
class HeuristicWeights:
    alpha: float = 0.25  # eNB load
    beta: float = 0.25  # gNB load
    gamma: float = 0.25  # gNB channel
    delta: float = 0.25  # service type
    load_cutoff: float = 50.0  # packets
    sinr_cutoff_db: float = 10.0

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma, self.delta) < 0:
            raise ValueError("heuristic weights must be non-negative")

    @property
    def threshold(self) -> float:
        """Mean score over every binary input combination."""
        scores = [heuristic_score(*bits, w=self) for bits in itertools.product((0, 1), repeat=4)]
        return float(np.mean(scores))


def heuristic_score(l_e: int, l_g: int, ch_g: int, s_u: int, w: HeuristicWeights) -> float:
    return w.alpha * l_e + w.beta * l_g + w.gamma * ch_g + w.delta * s_u


def heuristic_decide(t_u: float, t_th: float) -> RAT:
    return RAT.NR if t_u > t_th else RAT.LTE


def heuristic_inputs(state, w: HeuristicWeights) -> dict[str, int]:
    """Binary indicators from a steering state (raw, un-normalised fields)."""
    return dict(
        l_e=int(state.q_enb > w.load_cutoff),
        l_g=int(state.q_gnb > w.load_cutoff),
        ch_e=int(state.sinr_enb_db >= w.sinr_cutoff_db),  # reported only
        ch_g=int(state.sinr_gnb_db >= w.sinr_cutoff_db),
        s_u=int(TrafficClass(state.klass) in THROUGHPUT_HEAVY),
    )


class HeuristicAgent:
    uses_replay = False

    def __init__(self, weights: HeuristicWeights | None = None):
        self.weights = weights or HeuristicWeights()
        self.t_th = self.weights.threshold
        self.frozen = False

    def act(self, state) -> int:
        x = heuristic_inputs(state, self.weights)
        t_u = heuristic_score(x["l_e"], x["l_g"], x["ch_g"], x["s_u"], self.weights)
        return int(heuristic_decide(t_u, self.t_th))

    greedy = act

    def observe(self, *args, **kwargs) -> None:
        pass

    def learn(self) -> None:
        return None


@dataclass
class Discretizer:
    sinr_edges_db: tuple[float, ...] = (0.0, 10.0, 20.0)
    queue_edges: tuple[float, ...] = (50.0, 200.0)
    n_classes: int = 3

    def __post_init__(self):
        if list(self.sinr_edges_db) != sorted(self.sinr_edges_db):
            raise ValueError("SINR bucket edges must be increasing")
        if list(self.queue_edges) != sorted(self.queue_edges):
            raise ValueError("queue bucket edges must be increasing")

    @property
    def shape(self) -> tuple[int, ...]:
        ns = len(self.sinr_edges_db) + 1
        nq = len(self.queue_edges) + 1
        return (self.n_classes, ns, ns, nq, nq)

    @property
    def n_states(self) -> int:
        return int(np.prod(self.shape))

    def __call__(self, state) -> int:
        idx = (
            int(state.klass),
            int(np.searchsorted(self.sinr_edges_db, state.sinr_enb_db, side="right")),
            int(np.searchsorted(self.sinr_edges_db, state.sinr_gnb_db, side="right")),
            int(np.searchsorted(self.queue_edges, state.q_enb, side="right")),
            int(np.searchsorted(self.queue_edges, state.q_gnb, side="right")),
        )
        return int(np.ravel_multi_index(idx, self.shape))


def discretize_state(state, disc: Discretizer | None = None) -> int:
    return (disc or Discretizer())(state)


@dataclass
class QTable:
    n_states: int
    action_count: int = 2
    alpha: float = 0.1
    gamma: float = 0.9
    values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.values = np.zeros((self.n_states, self.action_count))

    def __getitem__(self, s: int) -> np.ndarray:
        return self.values[s]


def q_update(table: QTable, s: int, a: int, r: float, s2: int) -> None:
    q = table.values
    q[s, a] += table.alpha * (r + table.gamma * q[s2].max() - q[s, a])


class QLearningAgent:
    uses_replay = False

    def __init__(self, disc: Discretizer, alpha: float, gamma: float, eps: EpsilonSchedule,
                 rng: np.random.Generator, action_count: int = 2):
        self.disc = disc
        self.table = QTable(disc.n_states, action_count, alpha, gamma)
        self.eps = eps
        self.rng = rng
        self.decisions = 0
        self.updates = 0
        self.frozen = False

    def key(self, state) -> int:
        return state if isinstance(state, (int, np.integer)) else self.disc(state)

    def act(self, state) -> int:
        eps = 0.0 if self.frozen else self.eps(self.decisions)
        self.decisions += 1
        if self.rng.random() < eps:
            return int(self.rng.integers(self.table.action_count))
        return int(np.argmax(self.table[self.key(state)]))

    def greedy(self, state) -> int:
        return int(np.argmax(self.table[self.key(state)]))

    def observe(self, state, action: int, r: float, next_state, terminal: bool = False) -> None:
        if self.frozen:
            return
        s, s2 = self.key(state), self.key(next_state)
        if terminal:
            q = self.table.values
            q[s, action] += self.table.alpha * (r - q[s, action])
        else:
            q_update(self.table, s, action, r, s2)
        self.updates += 1

    def learn(self) -> None:
        return None
