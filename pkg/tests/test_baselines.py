import itertools
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ratsteer.baselines import (Discretizer, HeuristicAgent, HeuristicWeights, QLearningAgent, QTable,
                                discretize_state, heuristic_decide, heuristic_inputs, heuristic_score,
                                q_update)
from ratsteer.netmodel import RAT
from ratsteer.rl import EpsilonSchedule
from toy_mdp import train, value_iteration


def st_(klass=0, se=-50.0, sg=-50.0, qe=0.0, qg=0.0):
    return SimpleNamespace(klass=klass, sinr_enb_db=se, sinr_gnb_db=sg, q_enb=qe, q_gnb=qg)


# -- heuristic -----------------------------------------------------------------

def test_score_examples():
    w = HeuristicWeights()
    assert heuristic_score(1, 1, 1, 1, w) == 1.0
    assert heuristic_score(0, 0, 0, 0, w) == 0.0


def test_threshold_is_lattice_mean():
    w = HeuristicWeights()
    assert w.threshold == 0.5
    w2 = HeuristicWeights(0.1, 0.2, 0.3, 0.4)
    lattice = [0.1 * a + 0.2 * b + 0.3 * c + 0.4 * d for a, b, c, d in itertools.product((0, 1), repeat=4)]
    assert w2.threshold == pytest.approx(sum(lattice) / 16, rel=1e-12)


def test_decide_examples():
    assert heuristic_decide(0.6, 0.5) == RAT.NR
    assert heuristic_decide(0.5, 0.5) == RAT.LTE
    assert heuristic_decide(0.0, 0.5) == RAT.LTE


@given(st.lists(st.floats(0, 10), min_size=4, max_size=4), st.tuples(*[st.integers(0, 1)] * 4),
       st.floats(0.01, 100))
def test_decision_scale_covariant(ws, bits, c):
    w = HeuristicWeights(*ws)
    wc = HeuristicWeights(*[c * x for x in ws])
    d = heuristic_decide(heuristic_score(*bits, w=w), w.threshold)
    dc = heuristic_decide(heuristic_score(*bits, w=wc), wc.threshold)
    # exact ties can flip under rounding; away from the boundary the decision is invariant
    if abs(heuristic_score(*bits, w=w) - w.threshold) > 1e-9 * max(1.0, sum(ws)):
        assert d == dc


def test_inputs_from_state():
    w = HeuristicWeights()
    x = heuristic_inputs(st_(1, se=12, sg=10.0, qe=51, qg=50), w)
    assert x == dict(l_e=1, l_g=0, ch_e=1, ch_g=1, s_u=1)
    assert heuristic_inputs(st_(0), w)["s_u"] == 0
    assert heuristic_inputs(st_(2), w)["s_u"] == 1


def test_heuristic_agent_rules():
    agent = HeuristicAgent()
    # video, good gNB channel, idle queues: 0.25 + 0.25 = 0.5, not above threshold
    assert agent.act(st_(1, sg=20)) == 0
    # add eNB load: 0.75 > 0.5
    assert agent.act(st_(1, sg=20, qe=100)) == 1
    # voice needs all three other indicators up
    assert agent.act(st_(0, sg=20, qe=100)) == 0
    assert agent.act(st_(0, sg=20, qe=100, qg=100)) == 1


def test_negative_weight_rejected():
    with pytest.raises(ValueError):
        HeuristicWeights(alpha=-0.1)


# -- discretizer ----------------------------------------------------------------

def test_minimum_state_is_key_zero():
    assert discretize_state(st_(0, -100, -100, 0, 0)) == 0


def test_same_bucket_same_key():
    assert discretize_state(st_(1, 3.0, 14.0, 10, 60)) == discretize_state(st_(1, 9.99, 10.0, 49, 199))


def test_exhaustive_sweep_gives_432_keys():
    d = Discretizer()
    sinr_reps = [-5.0, 5.0, 15.0, 25.0]
    q_reps = [0.0, 100.0, 500.0]
    keys = {d(st_(k, a, b, c, e)) for k in range(3) for a in sinr_reps for b in sinr_reps
            for c in q_reps for e in q_reps}
    assert len(keys) == 432 == d.n_states
    assert keys == set(range(432))


def test_row_major_order():
    d = Discretizer()
    assert d(st_(0, -5, -5, 0, 100)) == 1
    assert d(st_(0, -5, -5, 100, 0)) == 3
    assert d(st_(0, -5, 5, 0, 0)) == 9
    assert d(st_(0, 5, -5, 0, 0)) == 36
    assert d(st_(1, -5, -5, 0, 0)) == 144


@given(st.integers(0, 2), st.floats(-200, 200), st.floats(-200, 200), st.floats(0, 1000), st.floats(0, 1000))
def test_discretizer_total(k, a, b, c, e):
    assert 0 <= discretize_state(st_(k, a, b, c, e)) < 432


def test_unsorted_edges_rejected():
    with pytest.raises(ValueError):
        Discretizer(sinr_edges_db=(10.0, 0.0, 20.0))


# -- Q-learning ------------------------------------------------------------------

def test_full_overwrite_and_frozen():
    t = QTable(2, alpha=1.0, gamma=0.9)
    q_update(t, 0, 1, 0.7, 1)
    assert t.values[0, 1] == 0.7
    t0 = QTable(2, alpha=0.0, gamma=0.9)
    q_update(t0, 0, 1, 0.7, 1)
    assert not t0.values.any()


def test_two_step_chain_by_hand():
    t = QTable(2, alpha=0.5, gamma=0.9)
    q_update(t, 1, 0, 0.8, 0)  # Q(1,0) = 0.5 * 0.8 = 0.4
    q_update(t, 0, 1, 0.6, 1)  # Q(0,1) = 0.5 * (0.6 + 0.9 * 0.4) = 0.48
    assert t.values[1, 0] == pytest.approx(0.4)
    assert t.values[0, 1] == pytest.approx(0.48)
    assert t.values.sum() == pytest.approx(0.88)


def test_q_values_stay_bounded():
    rng = np.random.default_rng(0)
    t = QTable(10, alpha=0.3, gamma=0.9)
    for _ in range(20_000):
        q_update(t, int(rng.integers(10)), int(rng.integers(2)), float(rng.uniform(0.01, 0.99)),
                 int(rng.integers(10)))
    assert t.values.min() >= 0.0 and t.values.max() <= 1.0 / (1 - 0.9)


def test_frozen_agent_is_greedy_and_static():
    agent = QLearningAgent(Discretizer(), 0.1, 0.9, EpsilonSchedule(1.0, 1.0, 1), np.random.default_rng(0))
    agent.table.values[5] = [0.0, 1.0]
    agent.frozen = True
    assert all(agent.act(5) == 1 for _ in range(100))
    agent.observe(5, 0, 1.0, 5)
    assert agent.table.values[5].tolist() == [0.0, 1.0]


@pytest.mark.parametrize("seed", range(5))
def test_qlearning_solves_toy_mdp(seed):
    agent = QLearningAgent(Discretizer(), 0.1, 0.9, EpsilonSchedule(1.0, 0.1, 2000), np.random.default_rng(seed))
    assert train(agent, 5000, np.random.default_rng(100 + seed)) == value_iteration().argmax(axis=1).tolist()
