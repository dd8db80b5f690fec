"""The learning building blocks on their own.

Fills a replay memory from a tiny deterministic MDP, trains a Q-network
with minibatch SGD and a periodically synced target network, and checks the
greedy policy against value iteration.

    python3 demos/replay_and_network.py
"""
import numpy as np

from ratsteer.rl import AgentConfig, DQNAgent

# (state, action) -> (next state, reward); the best loop is 0 -> 1 -> 2 -> 3 -> 0
T = {(0, 0): (0, 0.1), (0, 1): (1, 0.0), (1, 0): (0, 0.1), (1, 1): (2, 0.0),
     (2, 0): (3, 0.0), (2, 1): (0, 0.2), (3, 0): (0, 1.0), (3, 1): (3, 0.05)}
gamma = 0.9

q = np.zeros((4, 2))
for _ in range(500):
    q = np.array([[T[s, a][1] + gamma * q[T[s, a][0]].max() for a in range(2)] for s in range(4)])

cfg = AgentConfig(gamma=gamma, lr=1e-2, warmup=200, target_sync=100, eps_decay_steps=2000, eps_end=0.1)
rng = np.random.default_rng(0)
agent = DQNAgent(4, 2, cfg, rng)
eye = np.eye(4)
s = 0
for t in range(5000):
    if t % 50 == 0:
        s = int(rng.integers(4))
    a = agent.act(eye[s])
    s2, r = T[s, a]
    agent.observe(eye[s], a, r, eye[s2])
    agent.learn()
    s = s2

print("value iteration Q*:\n", q.round(3))
print("network Q:\n", agent.main.forward(eye).round(3))
print("greedy policy", [agent.greedy(eye[s]) for s in range(4)], "optimal", q.argmax(axis=1).tolist())
print(f"{agent.train_steps} SGD steps, replay holds {len(agent.memory)} experiences")
