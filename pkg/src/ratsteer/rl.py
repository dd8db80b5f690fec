"""Deep Q-learning building blocks: replay memory, a small ReLU network with
hand-written backprop, epsilon-greedy selection, TD targets and SGD updates."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np


class DivergenceError(RuntimeError):
    """Raised when a training step produces a non-finite loss."""


class WarmupIncomplete(ValueError):
    """Replay memory holds fewer experiences than the requested batch."""


@dataclass
class Experience:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    terminal: bool = False


class Batch(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    terminals: np.ndarray

    @classmethod
    def from_experiences(cls, batch: Sequence[Experience]) -> "Batch":
        return cls(
            np.array([e.state for e in batch], dtype=float),
            np.array([e.action for e in batch], dtype=np.int64),
            np.array([e.reward for e in batch], dtype=float),
            np.array([e.next_state for e in batch], dtype=float),
            np.array([e.terminal for e in batch], dtype=bool),
        )


class ReplayMemory:
    """Fixed-capacity ring buffer stored as preallocated arrays."""

    def __init__(self, capacity: int, state_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.state_dim = state_dim
        self._s = np.zeros((capacity, state_dim))
        self._a = np.zeros(capacity, dtype=np.int64)
        self._r = np.zeros(capacity)
        self._s2 = np.zeros((capacity, state_dim))
        self._t = np.zeros(capacity, dtype=bool)
        self._next = 0
        self._len = 0
        self.pushes = 0

    def __len__(self) -> int:
        return self._len

    def push(self, e: Experience) -> None:
        i = self._next
        self._s[i] = e.state
        self._a[i] = e.action
        self._r[i] = e.reward
        self._s2[i] = e.next_state
        self._t[i] = e.terminal
        self._next = (i + 1) % self.capacity
        self._len = min(self._len + 1, self.capacity)
        self.pushes += 1

    def _ordered_index(self) -> np.ndarray:
        start = (self._next - self._len) % self.capacity
        return (start + np.arange(self._len)) % self.capacity

    def __getitem__(self, i: int) -> Experience:
        j = self._ordered_index()[i]
        return Experience(self._s[j].copy(), int(self._a[j]), float(self._r[j]),
                          self._s2[j].copy(), bool(self._t[j]))

    def __iter__(self):
        for i in range(self._len):
            yield self[i]

    def batch(self, positions: np.ndarray) -> Batch:
        start = (self._next - self._len) % self.capacity
        j = (start + np.asarray(positions)) % self.capacity
        return Batch(self._s[j], self._a[j], self._r[j], self._s2[j], self._t[j])

    def sample_positions(self, size: int, rng: np.random.Generator) -> np.ndarray:
        if size > self._len:
            raise WarmupIncomplete(f"need {size} experiences, have {self._len}")
        return rng.choice(self._len, size=size, replace=False)


def push(mem: ReplayMemory, e: Experience) -> None:
    mem.push(e)


def sample_minibatch(mem: ReplayMemory, size: int, rng: np.random.Generator) -> list[Experience]:
    return [mem[int(i)] for i in mem.sample_positions(size, rng)]


class QNetwork:
    """Dense network, ReLU on hidden layers, identity output."""

    def __init__(self, sizes: Sequence[int], rng: np.random.Generator | None = None):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.sizes = list(sizes)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            if rng is None:
                w = np.zeros((fan_in, fan_out))
            else:
                lim = np.sqrt(6.0 / (fan_in + fan_out))
                w = rng.uniform(-lim, lim, size=(fan_in, fan_out))
            self.weights.append(w)
            self.biases.append(np.zeros(fan_out))

    @property
    def input_dim(self) -> int:
        return self.sizes[0]

    @property
    def action_count(self) -> int:
        return self.sizes[-1]

    def params(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def _forward(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        acts = [x]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = x @ w + b
            x = z if i == last else np.maximum(z, 0.0)
            acts.append(x)
        return x, acts

    def forward(self, state) -> np.ndarray:
        x = np.asarray(state, dtype=float)
        if x.shape[-1] != self.input_dim:
            raise ValueError(f"state has dim {x.shape[-1]}, network expects {self.input_dim}")
        return self._forward(x)[0]

    __call__ = forward

    def loss_and_grads(self, states: np.ndarray, actions: np.ndarray,
                       targets: np.ndarray) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
        """Mean squared TD error over the batch and its exact gradients."""
        n = len(states)
        q, acts = self._forward(states)
        rows = np.arange(n)
        err = q[rows, actions] - targets
        loss = float(np.mean(err ** 2))
        delta = np.zeros_like(q)
        delta[rows, actions] = 2.0 * err / n
        gw = [None] * len(self.weights)
        gb = [None] * len(self.weights)
        for i in range(len(self.weights) - 1, -1, -1):
            gw[i] = acts[i].T @ delta
            gb[i] = delta.sum(axis=0)
            if i:
                delta = (delta @ self.weights[i].T) * (acts[i] > 0)
        return loss, gw, gb

    def copy(self) -> "QNetwork":
        net = QNetwork(self.sizes)
        sync_target(self, net)
        return net

    def save(self, path) -> None:
        arrays = {"sizes": np.array(self.sizes, dtype=np.int64)}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            arrays[f"w{i}"] = w
            arrays[f"b{i}"] = b
        with open(path, "wb") as fh:
            np.savez(fh, **arrays)

    @classmethod
    def load(cls, path) -> "QNetwork":
        with np.load(path) as data:
            net = cls([int(s) for s in data["sizes"]])
            for i in range(len(net.weights)):
                net.weights[i] = data[f"w{i}"].copy()
                net.biases[i] = data[f"b{i}"].copy()
        return net


def forward(net: QNetwork, state) -> np.ndarray:
    return net.forward(state)


def select_action(net: QNetwork, state, eps: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy; greedy ties go to the lowest index."""
    if rng.random() < eps:
        return int(rng.integers(net.action_count))
    return int(np.argmax(net.forward(state)))


def td_target(r: float, next_state, terminal: bool, target_net: QNetwork, gamma: float) -> float:
    if terminal:
        return float(r)
    return float(r + gamma * np.max(target_net.forward(next_state)))


def td_targets(batch: Batch, target_net: QNetwork, gamma: float) -> np.ndarray:
    boot = np.max(target_net.forward(batch.next_states), axis=1)
    return batch.rewards + gamma * np.where(batch.terminals, 0.0, boot)


@dataclass
class EpsilonSchedule:
    start: float = 1.0
    end: float = 0.05
    decay_steps: int = 5000

    def __call__(self, step: int) -> float:
        if step >= self.decay_steps:
            return self.end
        return self.start + (self.end - self.start) * step / self.decay_steps


@dataclass
class AgentConfig:
    gamma: float = 0.9
    lr: float = 1e-3
    batch_size: int = 32
    replay_capacity: int = 10_000
    target_sync: int = 200
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 5000
    warmup: int = 500
    hidden: tuple[int, ...] = (32, 32)

    def __post_init__(self):
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must be in [0, 1)")
        if not 0 <= self.eps_end <= self.eps_start <= 1:
            raise ValueError("need 0 <= eps_end <= eps_start <= 1")
        for name in ("lr", "batch_size", "replay_capacity", "target_sync", "eps_decay_steps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.warmup < 0:
            raise ValueError("warmup must be >= 0")

    @property
    def epsilon(self) -> EpsilonSchedule:
        return EpsilonSchedule(self.eps_start, self.eps_end, self.eps_decay_steps)


def train_step(main: QNetwork, target: QNetwork, batch, cfg: AgentConfig) -> float:
    """One SGD step on the main network; returns the pre-update loss."""
    if not isinstance(batch, Batch):
        if len(batch) == 0:
            raise ValueError("empty batch")
        batch = Batch.from_experiences(batch)
    y = td_targets(batch, target, cfg.gamma)
    loss, gw, gb = main.loss_and_grads(batch.states, batch.actions, y)
    if not np.isfinite(loss):
        raise DivergenceError(f"non-finite loss {loss}")
    for i in range(len(main.weights)):
        main.weights[i] -= cfg.lr * gw[i]
        main.biases[i] -= cfg.lr * gb[i]
    return loss


def sync_target(main: QNetwork, target: QNetwork) -> None:
    if main.sizes != target.sizes:
        raise ValueError(f"shape mismatch {main.sizes} vs {target.sizes}")
    target.weights = [w.copy() for w in main.weights]
    target.biases = [b.copy() for b in main.biases]


class DQNAgent:
    """Main/target network pair with replay, trained once per call to ``learn``."""

    uses_replay = True

    def __init__(self, state_dim: int, action_count: int, cfg: AgentConfig,
                 rng: np.random.Generator):
        self.cfg = cfg
        self.rng = rng
        self.main = QNetwork([state_dim, *cfg.hidden, action_count], rng)
        self.target = self.main.copy()
        self.memory = ReplayMemory(cfg.replay_capacity, state_dim)
        self.eps = cfg.epsilon
        self.decisions = 0
        self.train_steps = 0
        self.frozen = False
        self.last_loss = float("nan")

    def act(self, state) -> int:
        vec = state.vector() if hasattr(state, "vector") else state
        eps = 0.0 if self.frozen else self.eps(self.decisions)
        self.decisions += 1
        return select_action(self.main, vec, eps, self.rng)

    def greedy(self, state) -> int:
        vec = state.vector() if hasattr(state, "vector") else state
        return int(np.argmax(self.main.forward(vec)))

    def observe(self, state, action: int, r: float, next_state, terminal: bool = False) -> None:
        if self.frozen:
            return
        s = state.vector() if hasattr(state, "vector") else state
        s2 = next_state.vector() if hasattr(next_state, "vector") else next_state
        self.memory.push(Experience(s, action, r, s2, terminal))

    def learn(self) -> float | None:
        if self.frozen or len(self.memory) < max(self.cfg.warmup, self.cfg.batch_size):
            return None
        pos = self.memory.sample_positions(self.cfg.batch_size, self.rng)
        self.last_loss = train_step(self.main, self.target, self.memory.batch(pos), self.cfg)
        self.train_steps += 1
        if self.train_steps % self.cfg.target_sync == 0:
            sync_target(self.main, self.target)
        return self.last_loss
