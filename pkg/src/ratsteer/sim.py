"""TTI-driven multi-RAT downlink simulator with per-flow steering agents.

Each TTI runs, in order: traffic generation, steering decisions for flows
on their decision boundary, per-BS round-robin RBG scheduling,
transmission at Shannon capacity, KPI accounting, and finally reward
computation / agent training for decisions whose measurement window closed.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .baselines import HeuristicAgent, QLearningAgent
from .config import ExperimentConfig
from .netmodel import RAT, BaseStation, RadioMap, UserEquipment, db_to_linear, dbm_to_watt
from .qos import KpiSample, sample_reward
from .rl import DQNAgent
from .traffic import TrafficClass, build_traffic_mix

N_CLASSES = len(TrafficClass)
STATE_DIM = N_CLASSES + 4
A_LTE, A_5G = 0, 1

KPI_COLUMNS = [
    "algorithm", "seed", "load_bps", "window", "ttis", "status",
    "throughput_bps", "mean_delay_s", "delay_voice_s", "delay_video_s", "delay_gaming_s",
    "bytes_voice_lte", "bytes_voice_nr", "bytes_video_lte", "bytes_video_nr",
    "bytes_gaming_lte", "bytes_gaming_nr",
    "mean_reward", "drops", "capacity_violations", "rate_ok_frac", "delay_ok_frac",
    "generated_pkts", "delivered_pkts",
]


@dataclass
class SteeringState:
    klass: int
    sinr_enb_db: float
    sinr_gnb_db: float
    q_enb: float  # packets
    q_gnb: float
    queue_capacity: int = 1000
    sinr_range_db: tuple[float, float] = (-10.0, 40.0)

    def vector(self) -> np.ndarray:
        lo, hi = self.sinr_range_db
        v = np.zeros(STATE_DIM)
        v[self.klass] = 1.0
        v[N_CLASSES] = min(max((self.sinr_enb_db - lo) / (hi - lo), 0.0), 1.0)
        v[N_CLASSES + 1] = min(max((self.sinr_gnb_db - lo) / (hi - lo), 0.0), 1.0)
        v[N_CLASSES + 2] = min(self.q_enb / self.queue_capacity, 1.0)
        v[N_CLASSES + 3] = min(self.q_gnb / self.queue_capacity, 1.0)
        return v


class BatchQueue:
    """FIFO of packet batches [flow, class, size_bits, enqueue_tti, count].

    Packets that arrive together are identical, so one entry stands for a
    Poisson batch. ``head_sent`` carries the bits already sent of the first
    unfinished packet across TTIs.
    """

    __slots__ = ("capacity", "items", "npkts", "bits", "head_sent")

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.items: deque[list] = deque()
        self.npkts = 0
        self.bits = 0.0
        self.head_sent = 0.0

    def __len__(self) -> int:
        return self.npkts

    def push(self, flow: int, klass: int, size: int, tti: int, n: int) -> int:
        """Enqueue up to ``n`` packets; returns how many were dropped."""
        room = self.capacity - self.npkts
        take = n if n <= room else room
        if take > 0:
            self.items.append([flow, klass, size, tti, take])
            self.npkts += take
            self.bits += take * size
        return n - take

    def serve(self, budget: float) -> list[tuple[int, int, int, int, int]]:
        """Send up to ``budget`` bits; returns completed (flow, class, size, enq_tti, n)."""
        done = []
        items = self.items
        while budget > 0 and items:
            e = items[0]
            flow, klass, size, enq, n = e
            left = n * size - self.head_sent
            if budget >= left:
                budget -= left
                items.popleft()
                self.head_sent = 0.0
                done.append((flow, klass, size, enq, n))
                self.npkts -= n
                self.bits -= left
            else:
                sent = self.head_sent + budget
                k = int(sent // size)
                self.bits -= budget
                budget = 0.0
                self.head_sent = sent - k * size
                if k:
                    e[4] = n - k
                    self.npkts -= k
                    done.append((flow, klass, size, enq, k))
        if not items:
            self.bits = 0.0
            self.head_sent = 0.0
        return done


def water_fill(need, total: int) -> list[int]:
    """Round-robin integer shares of ``total`` RBGs.

    Shares are first capped by per-UE need (max-min fair); RBGs nobody needs
    are then spread evenly over all UEs, so every RBG is used. ``need`` is in
    round-robin order and odd RBGs go to the front of that order.
    """
    need = [int(x) for x in need]
    n = len(need)
    counts = [0] * n
    left = total
    active = [i for i in range(n) if need[i] > 0]
    while left > 0 and active:
        share = left // len(active)
        if share == 0:
            for i in active[:left]:
                counts[i] += 1
            left = 0
            break
        for i in active:
            give = min(need[i] - counts[i], share)
            counts[i] += give
            left -= give
        active = [i for i in active if counts[i] < need[i]]
    if left > 0 and n:
        base, extra = divmod(left, n)
        for i in range(n):
            counts[i] += base + (i < extra)
    return counts


def make_agent(algo: str, cfg: ExperimentConfig, rng: np.random.Generator):
    if algo == "dqn":
        return DQNAgent(STATE_DIM, 2, cfg.dqn.agent_config(), rng)
    if algo == "qlearning":
        q = cfg.qlearning
        from .rl import EpsilonSchedule
        return QLearningAgent(q.discretizer(), q.alpha, q.gamma,
                              EpsilonSchedule(q.eps_start, q.eps_end, q.eps_decay_steps), rng)
    if algo == "heuristic":
        return HeuristicAgent(cfg.heuristic.weights())
    raise ValueError(f"unknown algorithm {algo!r}")


@dataclass
class Pending:
    close_tti: int
    flow: int
    state: SteeringState
    action: int
    bits0: float
    delay0: float
    count0: int


class Window:
    """Counters for one reporting window."""

    __slots__ = ("ttis", "bits", "delay", "count", "cdelay", "ccount", "cbytes", "reward",
                 "nreward", "drops", "cap_viol", "rate_ok", "delay_ok", "generated", "delivered")

    def __init__(self):
        self.ttis = 0
        self.bits = 0.0
        self.delay = 0.0
        self.count = 0
        self.cdelay = [0.0] * N_CLASSES
        self.ccount = [0] * N_CLASSES
        self.cbytes = [[0.0, 0.0] for _ in range(N_CLASSES)]  # [class][rat]
        self.reward = 0.0
        self.nreward = 0
        self.drops = 0
        self.cap_viol = 0
        self.rate_ok = 0
        self.delay_ok = 0
        self.generated = 0
        self.delivered = 0


class World:
    """One drop of the network plus the traffic it carries."""

    def __init__(self, cfg: ExperimentConfig, load_bps: float, seed: int):
        self.cfg = cfg
        self.seed = seed
        self.load_bps = load_bps
        sim = cfg.sim
        self.tti_s = sim.tti_s
        self.period = sim.decision_period
        self.reward_window = sim.reward_window
        topo_ss, chan_ss, traffic_ss, agent_ss = np.random.SeedSequence(seed).spawn(4)
        self.topo_rng = np.random.default_rng(topo_ss)
        self.chan_rng = np.random.default_rng(chan_ss)
        self.traffic_rng = np.random.default_rng(traffic_ss)
        self.agent_rng = np.random.default_rng(agent_ss)

        self._build_topology()
        self.specs = cfg.traffic.specs()
        self.weights = cfg.qos.weights()
        total = load_bps * (len(self.ues) if cfg.traffic.load_mode == "per_ue" else 1)
        self.flows = build_traffic_mix(total, self.specs, len(self.ues), self.tti_s)
        self.rates = np.array([f.rate for f in self.flows])
        self.flow_ue = [f.ue for f in self.flows]
        self.flow_class = [int(f.klass) for f in self.flows]
        self.flow_bits = [f.packet_bits for f in self.flows]
        self.flow_bps = [f.offered_bps(self.tti_s) for f in self.flows]
        for f in self.flows:
            self.ues[f.ue].flows.append(f.flow)
        nf = len(self.flows)
        self.route = [A_LTE] * nf  # action per flow; LTE until the first decision
        # flows with no traffic are disabled and never steered
        self.by_offset = [[f for f in range(nf) if f % self.period == k and self.flows[f].rate > 0]
                          for k in range(self.period)]

        qcap = sim.queue_capacity
        self.queues = [[BatchQueue(qcap), BatchQueue(qcap)] for _ in self.ues]  # [ue][rat]

        # per-flow cumulative service, for reward windows
        self.f_bits = [0.0] * nf
        self.f_delay = [0.0] * nf
        self.f_count = [0] * nf

        self.generated = 0
        self.delivered = 0
        self.dropped = 0
        self.rr_ptr = {bs.id: 0 for bs in self.stations}
        self.tti = 0
        self.decision_log: list[tuple[int, int, int]] = []
        self.pending: deque[Pending] = deque()
        self.w = Window()
        self._measure_initial()

    # -- setup -------------------------------------------------------------
    def _build_topology(self) -> None:
        t = self.cfg.topology
        enb_f, gnb_f = t.enb.carrier_freq_hz, t.gnb.carrier_freq_hz
        if t.swap_carriers:
            enb_f, gnb_f = gnb_f, enb_f
        self.enb = BaseStation(0, RAT.LTE, t.enb.tx_power_w, t.enb.bandwidth_hz, enb_f,
                               tuple(t.enb_position), t.enb.rbg_count)
        self.gnbs = [BaseStation(i + 1, RAT.NR, t.gnb.tx_power_w, t.gnb.bandwidth_hz, gnb_f,
                                 tuple(p), t.gnb.rbg_count)
                     for i, p in enumerate(t.gnb_positions)]
        self.stations = [self.enb, *self.gnbs]
        gpos = np.array([g.position for g in self.gnbs], dtype=float)
        self.ues = []
        for u in range(t.ue_count):
            if t.ue_drop == "hotspot":
                centre, radius = gpos[u % len(self.gnbs)], t.hotspot_radius_m
            else:
                centre, radius = np.asarray(t.enb_position, dtype=float), t.macro_radius_m
            r = radius * math.sqrt(self.topo_rng.random())
            phi = 2 * math.pi * self.topo_rng.random()
            pos = (centre[0] + r * math.cos(phi), centre[1] + r * math.sin(phi))
            nearest = int(np.argmin(np.linalg.norm(gpos - np.array(pos), axis=1)))
            self.ues.append(UserEquipment(u, pos, self.enb.id, self.gnbs[nearest].id))
        n0 = float(dbm_to_watt(t.noise_psd_dbm_hz)) * float(db_to_linear(t.noise_figure_db))
        self.noise_density = n0
        self.radio = RadioMap(self.stations, self.ues, self.topo_rng, n0, t.shadowing_sigma_db)
        # index of each UE's serving BS inside its carrier group, per RAT
        self.serving = np.array([[self.radio.bs_group[ue.lte_bs][1], self.radio.bs_group[ue.nr_bs][1]]
                                 for ue in self.ues], dtype=np.int64).reshape(-1, 2)
        self.rat_group = [self.radio.bs_group[self.enb.id][0], self.radio.bs_group[self.gnbs[0].id][0]]
        if self.rat_group[0] == self.rat_group[1]:
            raise ValueError("LTE and NR must use different carriers")
        # members[rat][b] = UEs served by BS b of that RAT
        self.members = [[[u for u in range(len(self.ues)) if self.serving[u, rat] == b]
                         for b in range(len(self.radio.groups[self.rat_group[rat]]["ids"]))]
                        for rat in (0, 1)]
        self.serving_idx = [np.ascontiguousarray(self.serving[:, 0]), np.ascontiguousarray(self.serving[:, 1])]
        self.sinr_db = np.zeros((len(self.ues), 2))

    def _measure_initial(self) -> None:
        gains = self.radio.draw_fading(self.chan_rng)
        for rat in (0, 1):
            gi = self.rat_group[rat]
            nb = len(self.radio.groups[gi]["ids"])
            owner = -np.ones((nb, self.radio.groups[gi]["nrbg"]), dtype=np.int64)
            self._measure(rat, self.radio.serving_sinr(gains[gi], gi, owner, self.serving_idx[rat]))

    def _measure(self, rat: int, sinr: np.ndarray) -> None:
        """Wide-band SINR (linear mean over all RBGs) of each UE at its serving BS."""
        self.sinr_db[:, rat] = 10.0 * np.log10(sinr.sum(axis=1) / sinr.shape[1])

    def _reset_window(self) -> None:
        self.w = Window()

    # -- state / actions ---------------------------------------------------
    def build_state(self, flow: int) -> SteeringState:
        u = self.flow_ue[flow]
        q = self.queues[u]
        sim = self.cfg.sim
        return SteeringState(self.flow_class[flow], float(self.sinr_db[u, 0]),
                             float(self.sinr_db[u, 1]), float(q[0].npkts), float(q[1].npkts),
                             sim.queue_capacity, tuple(sim.sinr_norm_db))

    def apply_action(self, flow: int, action: int) -> None:
        if action not in (A_LTE, A_5G):
            raise ValueError(f"invalid action {action}")
        self.route[flow] = int(action)

    def inject(self, ue: int, rat: int, flow: int, n: int) -> int:
        """Put ``n`` packets of ``flow`` straight into a queue (scripted scenarios)."""
        dropped = self.queues[ue][rat].push(flow, self.flow_class[flow], self.flow_bits[flow], self.tti, n)
        self.generated += n
        self.dropped += dropped
        self.w.generated += n
        self.w.drops += dropped
        return dropped

    def queued(self) -> int:
        return sum(q.npkts for pair in self.queues for q in pair)

    # -- one TTI -----------------------------------------------------------
    def step(self, agent) -> None:
        tti = self.tti
        w = self.w
        # (1) arrivals
        if len(self.rates):
            counts = self.traffic_rng.poisson(self.rates)
            queues, route = self.queues, self.route
            for f in np.flatnonzero(counts).tolist():
                n = int(counts[f])
                d = queues[self.flow_ue[f]][route[f]].push(f, self.flow_class[f], self.flow_bits[f], tti, n)
                self.generated += n
                self.dropped += d
                w.generated += n
                w.drops += d

        # (2) steering decisions
        for f in self.by_offset[tti % self.period]:
            s = self.build_state(f)
            a = agent.act(s)
            self.apply_action(f, a)
            self.decision_log.append((tti, f, a))
            self.pending.append(Pending(tti + self.reward_window, f, s, a,
                                        self.f_bits[f], self.f_delay[f], self.f_count[f]))

        # (3)-(5) schedule, transmit, account
        gains = self.radio.draw_fading(self.chan_rng)
        demand = [[0.0, 0.0] for _ in self.ues]
        for f, r in enumerate(self.route):
            demand[self.flow_ue[f]][r] += self.flow_bps[f]
        for rat in (0, 1):
            self._serve_rat(rat, gains, tti, demand)

        # (6) rewards, experience, training
        while self.pending and self.pending[0].close_tti <= tti:
            self._close(self.pending.popleft(), agent)
        agent.learn()

        w.ttis += 1
        self.tti += 1

    def schedule(self, rat: int) -> np.ndarray:
        """Round-robin RBG owners (``-1`` idle) for every BS of one RAT."""
        gi = self.rat_group[rat]
        g = self.radio.groups[gi]
        nrbg = g["nrbg"]
        owner = np.full((len(g["ids"]), nrbg), -1, dtype=np.int64)
        est = (g["omega"][0] * self.tti_s * np.log2(1.0 + 10.0 ** (self.sinr_db[:, rat] / 10.0))).tolist()
        queues = self.queues
        for b, members in enumerate(self.members[rat]):
            ues = [u for u in members if queues[u][rat].npkts]
            if not ues:
                continue
            bs_id = g["ids"][b]
            ptr = self.rr_ptr[bs_id] % len(ues)
            self.rr_ptr[bs_id] += 1
            order = ues[ptr:] + ues[:ptr]
            need = [math.ceil(queues[u][rat].bits / max(est[u], 1e-9)) for u in order]
            cnt = water_fill(need, nrbg)
            owner[b] = np.repeat(np.array(order), cnt)
        return owner

    def _serve_rat(self, rat: int, gains_all, tti: int, demand) -> None:
        gi = self.rat_group[rat]
        owner = self.schedule(rat)
        sinr = self.radio.serving_sinr(gains_all[gi], gi, owner, self.serving_idx[rat])
        self._measure(rat, sinr)
        if owner.max() < 0:
            return
        cap = self.radio.ue_capacities(sinr, gi, owner).tolist()
        w = self.w
        tti_s = self.tti_s
        cdelay, ccount, cbytes = w.cdelay, w.ccount, w.cbytes
        f_bits, f_delay, f_count = self.f_bits, self.f_delay, self.f_count
        for u, c in enumerate(cap):
            if c <= 0.0:
                continue
            if demand[u][rat] > c:  # routed demand exceeds link capacity
                w.cap_viol += 1
            for flow, klass, size, enq, n in self.queues[u][rat].serve(c * tti_s):
                d = (tti - enq) * tti_s + size / c
                bits = n * size
                f_bits[flow] += bits
                f_delay[flow] += n * d
                f_count[flow] += n
                self.delivered += n
                w.bits += bits
                w.delay += n * d
                w.count += n
                w.delivered += n
                cdelay[klass] += n * d
                ccount[klass] += n
                cbytes[klass][rat] += bits / 8

    def _close(self, p: Pending, agent) -> None:
        f = p.flow
        win = self.reward_window
        n = self.f_count[f] - p.count0
        delay = (self.f_delay[f] - p.delay0) / n if n else 0.0
        tput = (self.f_bits[f] - p.bits0) / (win * self.tti_s)
        klass = TrafficClass(self.flow_class[f])
        spec = self.specs[klass]
        sample = KpiSample(int(klass), p.action, delay, tput, win)
        r = sample_reward(sample, spec, self.weights[klass], self.cfg.qos.r_cap)
        agent.observe(p.state, p.action, r, self.build_state(f), False)
        w = self.w
        w.reward += r
        w.nreward += 1
        w.rate_ok += int(tput >= spec.t_qos)
        w.delay_ok += int(n > 0 and delay <= spec.d_qos)

    # -- reporting ---------------------------------------------------------
    def kpi_row(self, algorithm: str, window: int, status: str = "ok") -> dict:
        w = self.w
        dur = w.ttis * self.tti_s
        cd = [w.cdelay[k] / w.ccount[k] if w.ccount[k] else 0.0 for k in range(N_CLASSES)]
        nr = w.nreward
        row = dict(
            algorithm=algorithm, seed=self.seed, load_bps=self.load_bps, window=window,
            ttis=w.ttis, status=status,
            throughput_bps=w.bits / dur if dur else 0.0,
            mean_delay_s=w.delay / w.count if w.count else 0.0,
            delay_voice_s=cd[0], delay_video_s=cd[1], delay_gaming_s=cd[2],
            mean_reward=w.reward / nr if nr else 0.0,
            drops=w.drops, capacity_violations=w.cap_viol,
            rate_ok_frac=w.rate_ok / nr if nr else 0.0,
            delay_ok_frac=w.delay_ok / nr if nr else 0.0,
            generated_pkts=w.generated, delivered_pkts=w.delivered,
        )
        for k, name in enumerate(("voice", "video", "gaming")):
            row[f"bytes_{name}_lte"] = w.cbytes[k][0]
            row[f"bytes_{name}_nr"] = w.cbytes[k][1]
        return {c: row[c] for c in KPI_COLUMNS}


def step_tti(world: World, agent, tti: int | None = None) -> dict:
    """Advance one TTI and return the change in the world's counters."""
    if tti is not None and tti != world.tti:
        raise ValueError(f"world is at TTI {world.tti}, not {tti}")
    before = (world.generated, world.delivered, world.dropped, world.w.bits)
    world.step(agent)
    return dict(generated=world.generated - before[0], delivered=world.delivered - before[1],
                dropped=world.dropped - before[2], bits=world.w.bits - before[3])


@dataclass
class RunResult:
    rows: list[dict]
    agent: object
    world: World
    status: str = "ok"
    error: str = ""


def run(cfg: ExperimentConfig, algorithm: str, load_bps: float, seed: int,
        agent=None, ttis: int | None = None, world: World | None = None) -> RunResult:
    """Simulate ``ttis`` TTIs (default ``cfg.sim.ttis``) and collect KPI rows."""
    from .rl import DivergenceError

    world = world or World(cfg, load_bps, seed)
    agent = agent if agent is not None else make_agent(algorithm, cfg, world.agent_rng)
    T = cfg.sim.ttis if ttis is None else ttis
    rw = cfg.sim.report_window
    rows = []
    window = 0
    try:
        for _ in range(T):
            world.step(agent)
            if world.w.ttis == rw:
                rows.append(world.kpi_row(algorithm, window))
                window += 1
                world._reset_window()
    except DivergenceError as e:
        rows.append(world.kpi_row(algorithm, window, status="diverged"))
        return RunResult(rows, agent, world, "diverged", str(e))
    if world.w.ttis:
        rows.append(world.kpi_row(algorithm, window))
        world._reset_window()
    return RunResult(rows, agent, world)
