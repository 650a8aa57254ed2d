"""Off-policy actor-critic updates on the recorded transitions.

The actor is the environment's parametric policy (the same weights the
planner optimizes), so the "network" being ascended is whatever smooth
feedback law the environment defines. Only the critic is a neural net.
"""

import numpy as np

from .critic import QNetwork, ReplayBuffer
from .optim import Adam, soft_update


def _flatten(ps):
    return np.concatenate([p.ravel() for p in ps])


def _unflatten(vec, like):
    out, i = [], 0
    for p in like:
        out.append(vec[i:i + p.size].reshape(p.shape))
        i += p.size
    return out


class ModelFreeLearner:
    """DDPG-style updates: critic regression to a soft target, actor ascent.

    The target value bootstraps through the target critic but the current
    actor weights; only the critic keeps a Polyak-averaged copy.
    """

    def __init__(self, env, gamma=0.99, n_batch=64, lr_q=1e-3, lr_a=1e-3,
                 tau=0.01, alpha=0.7, capacity=200_000, rng=None):
        self.env = env
        self.gamma = gamma
        self.n_batch = n_batch
        self.tau = tau
        self.rng = np.random.default_rng() if rng is None else rng
        self.q = QNetwork(env.n_err, env.n_a, err_scale=env.err_scale,
                          action_lo=env.action_lo, action_hi=env.action_hi,
                          rng=self.rng)
        self.q_target = self.q.copy()
        self.buffer = ReplayBuffer(env.n_err, env.n_a, capacity=capacity,
                                   alpha=alpha)
        self.opt_q = Adam(_flatten(self.q.params()).size, lr=lr_q)
        self.opt_a = Adam(env.n_wa, lr=lr_a, scale=env.wa_scale)

    def record_episode(self, traj):
        self.buffer.add_episode(traj.e, traj.a, traj.r)

    def critic_step(self, wa):
        n = min(self.n_batch, len(self.buffer))
        idx = self.buffer.sample(n, self.rng)
        e, a = self.buffer.e[idx], self.buffer.a[idx]
        r, e2 = self.buffer.r[idx], self.buffer.e_next[idx]
        live = ~self.buffer.done[idx]
        a2 = self.env.policy(e2, wa)
        y = r + self.gamma * live * self.q_target.value(e2, a2)
        delta = y - self.q.value(e, a)
        grads = self.q.grads(e, a, -delta / n)
        vec = self.opt_q.step(_flatten(self.q.params()), _flatten(grads))
        self.q.set_params(_unflatten(vec, self.q.params()))
        soft_update(self.q_target.params(), self.q.params(), self.tau)
        self.buffer.update_priorities(idx, delta)
        return float(np.mean(delta * delta))

    def actor_step(self, wa):
        n = min(self.n_batch, len(self.buffer))
        idx = self.buffer.sample(n, self.rng)
        e = self.buffer.e[idx]
        a_pi = self.env.policy(e, wa)
        dqda = self.q.dq_da(e, a_pi)
        G = self.env.dpolicy_dwa(e, wa)
        g = np.einsum("ba,baw->bw", dqda, G).mean(axis=0)
        return self.opt_a.step(wa, -g)      # ascent on q

    def train(self, wa, n_q, n_a):
        """One episode's worth of updates; returns the updated actor weights."""
        if len(self.buffer) == 0:
            return wa
        for _ in range(n_q):
            self.critic_step(wa)
        wa = np.array(wa, dtype=float)
        for _ in range(n_a):
            wa = self.actor_step(wa)
        return wa
