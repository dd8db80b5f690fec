"""Radio network model: topology, channel, SINR, Shannon capacity and delay.

Two layers live here. The scalar functions (``compute_channel_gain``,
``compute_sinr``, ``link_capacity`` ...) work on small explicit objects and
are the reference definitions. ``RadioMap`` is the vectorised version the
simulator uses every TTI; the test-suite checks one against the other.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

BOLTZMANN_DBM_HZ = -174.0  # thermal noise density at 290 K


class RAT(IntEnum):
    LTE = 0
    NR = 1


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


@dataclass
class Packet:
    flow: int
    klass: int
    size_bits: float
    enqueue_tti: int


class PacketQueue:
    """Bounded FIFO of packets. Overflow drops the arriving packet."""

    def __init__(self, capacity: int = 1000):
        if capacity < 1:
            raise ValueError("queue capacity must be >= 1")
        self.capacity = capacity
        self._items: deque[Packet] = deque()
        self.enqueued = 0
        self.dequeued = 0
        self.dropped = 0

    def __len__(self) -> int:
        return len(self._items)

    def push(self, pkt: Packet) -> bool:
        if len(self._items) >= self.capacity:
            self.dropped += 1
            return False
        self._items.append(pkt)
        self.enqueued += 1
        return True

    def pop(self) -> Packet:
        pkt = self._items.popleft()
        self.dequeued += 1
        return pkt

    def peek(self) -> Packet:
        return self._items[0]


@dataclass
class BaseStation:
    id: int
    rat: RAT
    tx_power_total: float  # W
    bandwidth: float  # Hz
    carrier_freq: float  # Hz
    position: tuple[float, float]
    rbg_count: int
    queues: dict[int, PacketQueue] = field(default_factory=dict)

    def __post_init__(self):
        if self.tx_power_total <= 0 or self.bandwidth <= 0:
            raise ValueError("tx power and bandwidth must be positive")
        if self.rbg_count < 1:
            raise ValueError("rbg_count must be >= 1")

    @property
    def rbg_bandwidth(self) -> float:
        return self.bandwidth / self.rbg_count

    @property
    def rbg_power(self) -> float:
        # uniform split over RBGs
        return self.tx_power_total / self.rbg_count


@dataclass
class UserEquipment:
    id: int
    position: tuple[float, float]
    lte_bs: int
    nr_bs: int
    flows: list[int] = field(default_factory=list)

    def attached(self, rat: RAT) -> int:
        return self.lte_bs if rat == RAT.LTE else self.nr_bs


@dataclass
class RbgAllocation:
    """x[h, u, b] indicators plus per-BS RBG bandwidth."""

    x: dict[tuple[int, int, int], int] = field(default_factory=dict)
    rbg_bandwidth: dict[int, float] = field(default_factory=dict)

    def assign(self, h: int, u: int, b: int) -> None:
        for (hh, uu, bb), v in self.x.items():
            if hh == h and bb == b and v and uu != u:
                raise ValueError(f"RBG {h} of BS {b} already given to UE {uu}")
        self.x[(h, u, b)] = 1

    def indicator(self, h: int, u: int, b: int) -> int:
        return self.x.get((h, u, b), 0)

    def busy(self, h: int, b: int) -> bool:
        return any(v for (hh, _, bb), v in self.x.items() if hh == h and bb == b)

    def rbgs_of(self, u: int, b: int) -> list[int]:
        return sorted(h for (h, uu, bb), v in self.x.items() if v and uu == u and bb == b)

    def is_exclusive(self) -> bool:
        owners: dict[tuple[int, int], int] = {}
        for (h, u, b), v in self.x.items():
            if not v:
                continue
            if (h, b) in owners:
                return False
            owners[(h, b)] = u
        return True


@dataclass
class ChannelRealization:
    gains: dict[tuple[int, int, int], float]
    noise_density: float  # W/Hz

    def __post_init__(self):
        if self.noise_density <= 0:
            raise ValueError("noise density must be positive")
        if any(g <= 0 for g in self.gains.values()):
            raise ValueError("channel gains must be positive")

    def g(self, h: int, u: int, b: int) -> float:
        return self.gains[(h, u, b)]


def distance(a: Sequence[float], b: Sequence[float], min_distance: float = 1.0) -> float:
    d = math.hypot(a[0] - b[0], a[1] - b[1])
    return max(d, min_distance)


def path_loss_db(distance_m, rat: RAT, carrier_freq: float):
    """Log-distance path loss in dB. Distances below 1 m are clamped."""
    d = np.maximum(np.asarray(distance_m, dtype=float), 1.0)
    if rat == RAT.LTE:
        return 128.1 + 37.6 * np.log10(d / 1000.0)
    return 32.4 + 21.0 * np.log10(d) + 20.0 * np.log10(carrier_freq / 1e9)


def rayleigh_power(rng: np.random.Generator, size=None):
    """Unit-mean power gain of a Rayleigh channel (exponential in power)."""
    return rng.exponential(1.0, size=size)


def compute_channel_gain(ue: UserEquipment, bs: BaseStation, rbg: int,
                         rng: np.random.Generator, shadowing_db: float | None = None,
                         fading: bool = True, shadowing_sigma_db: float = 8.0) -> float:
    """Linear gain for one (RBG, UE, BS) triple.

    ``shadowing_db`` is the frozen per-link shadowing value; when omitted it
    is drawn from ``rng``. ``fading=False`` pins the fast-fading term to 1.
    ``rbg`` only selects which fading sample is meant; draws are i.i.d.
    """
    d = distance(ue.position, bs.position)
    pl = float(path_loss_db(d, bs.rat, bs.carrier_freq))
    if shadowing_db is None:
        shadowing_db = rng.normal(0.0, shadowing_sigma_db)
    fast = rayleigh_power(rng) if fading else 1.0
    return 10.0 ** (-(pl + shadowing_db) / 10.0) * fast


def compute_sinr(h: int, u: UserEquipment, b: BaseStation, interferers: Iterable[BaseStation],
                 alloc: RbgAllocation, chan: ChannelRealization) -> float:
    if not alloc.indicator(h, u.id, b.id):
        raise ValueError(f"RBG {h} of BS {b.id} is not allocated to UE {u.id}")
    omega = alloc.rbg_bandwidth.get(b.id, b.rbg_bandwidth)
    interference = 0.0
    for m in interferers:
        if m.id == b.id or not alloc.busy(h, m.id):
            continue
        interference += m.rbg_power * chan.g(h, u.id, m.id)
    return b.rbg_power * chan.g(h, u.id, b.id) / (omega * chan.noise_density + interference)


def link_capacity(u: UserEquipment, b: BaseStation, alloc: RbgAllocation,
                  chan: ChannelRealization, interferers: Iterable[BaseStation] = ()) -> float:
    """Shannon capacity in bit/s summed over the RBGs ``b`` gives to ``u``."""
    interferers = list(interferers)
    omega = alloc.rbg_bandwidth.get(b.id, b.rbg_bandwidth)
    total = 0.0
    for h in alloc.rbgs_of(u.id, b.id):
        total += omega * math.log2(1.0 + compute_sinr(h, u, b, interferers, alloc, chan))
    return total


def check_capacity_constraint(demands: Sequence[float], capacity: float,
                              indicators: Sequence[int] | None = None) -> bool:
    """True iff the routed demand on a link fits its capacity."""
    if indicators is None:
        indicators = [1] * len(demands)
    load = sum(d * x for d, x in zip(demands, indicators))
    return load <= capacity


def transmission_delay(packet_bits: float, capacity: float) -> float:
    if capacity < 0:
        raise ValueError("capacity must be >= 0")
    if capacity == 0:
        return math.inf
    return packet_bits / capacity


def total_delay(enqueue_tti: int, tti_now: int, packet_bits: float, capacity: float,
                tti_duration: float = 1e-3) -> float:
    """Transmission plus queueing delay of one dequeued packet."""
    if enqueue_tti > tti_now:
        raise ValueError("packet dequeued before it was enqueued")
    return transmission_delay(packet_bits, capacity) + (tti_now - enqueue_tti) * tti_duration


class DelayAccumulator:
    """Mean delay per (class, BS) over a reporting window."""

    def __init__(self):
        self._sum: dict[tuple[int, int], float] = {}
        self._n: dict[tuple[int, int], int] = {}

    def add(self, klass: int, bs: int, delay: float, n: int = 1) -> None:
        key = (klass, bs)
        self._sum[key] = self._sum.get(key, 0.0) + delay * n
        self._n[key] = self._n.get(key, 0) + n

    def mean(self, klass: int, bs: int) -> float:
        n = self._n.get((klass, bs), 0)
        return self._sum[(klass, bs)] / n if n else 0.0

    def reset(self) -> None:
        self._sum.clear()
        self._n.clear()


class RadioMap:
    """Per-carrier arrays for a whole drop: mean gains, fading, SINR, capacity.

    BSs that share a carrier interfere with each other; different carriers
    are orthogonal. All BSs on one carrier must share the RBG count.
    """

    def __init__(self, stations: Sequence[BaseStation], ues: Sequence[UserEquipment],
                 rng: np.random.Generator, noise_density: float,
                 shadowing_sigma_db: float = 8.0):
        self.stations = list(stations)
        self.n_ue = len(ues)
        self.noise_density = noise_density
        pos_ue = np.array([ue.position for ue in ues], dtype=float).reshape(-1, 2)
        self.groups: list[dict] = []
        self.bs_group: dict[int, tuple[int, int]] = {}
        carriers: dict[float, list[BaseStation]] = {}
        for bs in self.stations:
            carriers.setdefault(bs.carrier_freq, []).append(bs)
        for gi, (freq, members) in enumerate(sorted(carriers.items())):
            nrbg = {bs.rbg_count for bs in members}
            if len(nrbg) != 1:
                raise ValueError(f"BSs on {freq/1e9:g} GHz disagree on rbg_count")
            pos_bs = np.array([bs.position for bs in members], dtype=float)
            d = np.maximum(np.linalg.norm(pos_bs[:, None, :] - pos_ue[None, :, :], axis=2), 1.0)
            pl = np.stack([path_loss_db(d[i], bs.rat, bs.carrier_freq)
                           for i, bs in enumerate(members)])
            shadow = rng.normal(0.0, shadowing_sigma_db, size=pl.shape)
            self.groups.append(dict(
                freq=freq,
                ids=[bs.id for bs in members],
                nrbg=nrbg.pop(),
                omega=np.array([bs.rbg_bandwidth for bs in members]),
                power=np.array([bs.rbg_power for bs in members]),
                mean_gain=10.0 ** (-(pl + shadow) / 10.0),
                path_loss_db=pl,
                shadowing_db=shadow,
            ))
            for j, bs in enumerate(members):
                self.bs_group[bs.id] = (gi, j)

    def draw_fading(self, rng: np.random.Generator) -> list[np.ndarray]:
        """Per-TTI gains, one (n_bs, n_ue, n_rbg) array per carrier."""
        out = []
        for g in self.groups:
            nb, nu = g["mean_gain"].shape
            out.append(g["mean_gain"][:, :, None] * rayleigh_power(rng, (nb, nu, g["nrbg"])))
        return out

    def sinr(self, gains: np.ndarray, group: int, owner: np.ndarray) -> np.ndarray:
        """SINR[b, u, h] given RBG owners (``-1`` = idle) for each BS in a carrier group.

        Interference on RBG h comes only from other BSs that scheduled h.
        """
        g = self.groups[group]
        rx = g["power"][:, None, None] * gains
        busy = (owner >= 0).astype(float)
        interf = np.einsum("buh,bh->uh", rx, busy)
        own = rx * busy[:, None, :]
        noise = (g["omega"] * self.noise_density)[:, None, None]
        return rx / (noise + interf[None, :, :] - own)

    def capacities(self, sinr: np.ndarray, group: int, owner: np.ndarray) -> np.ndarray:
        """Capacity C[b, u] in bit/s of the allocation ``owner``."""
        g = self.groups[group]
        nb, nu, nh = sinr.shape
        cap = np.zeros((nb, nu))
        for b in range(nb):
            mask = owner[b] >= 0
            if not mask.any():
                continue
            h = np.nonzero(mask)[0]
            rates = g["omega"][b] * np.log2(1.0 + sinr[b, owner[b, h], h])
            cap[b] = np.bincount(owner[b, h], weights=rates, minlength=nu)
        return cap

    def serving_sinr(self, gains: np.ndarray, group: int, owner: np.ndarray,
                     serving: np.ndarray) -> np.ndarray:
        """SINR[u, h] of every UE at its serving BS ``serving[u]`` in a carrier group."""
        g = self.groups[group]
        if len(g["ids"]) == 1:  # lone BS on its carrier: noise only
            return g["power"][0] * gains[0] / (g["omega"][0] * self.noise_density)
        rx = g["power"][:, None, None] * gains
        busy = (owner >= 0).astype(float)
        interf = np.einsum("buh,bh->uh", rx, busy)
        ue = np.arange(len(serving))
        rx_own = rx[serving, ue]
        noise = (g["omega"] * self.noise_density)[serving][:, None]
        return rx_own / (noise + interf - rx_own * busy[serving])

    def ue_capacities(self, serving_sinr: np.ndarray, group: int, owner: np.ndarray) -> np.ndarray:
        """Capacity in bit/s of each UE under ``owner``; UEs own RBGs only at their serving BS."""
        g = self.groups[group]
        b, h = np.nonzero(owner >= 0)
        u = owner[b, h]
        rates = g["omega"][b] * np.log2(1.0 + serving_sinr[u, h])
        return np.bincount(u, weights=rates, minlength=serving_sinr.shape[0])

