"""Gradient-step machinery shared by the twin, the planner and the critic."""

import numpy as np


class Adam:
    """Adam on a flat parameter vector.

    ``scale`` is an optional per-component step multiplier; it lets one
    learning rate drive parameter vectors whose components span several
    orders of magnitude (the turbine closure constants do). Gradients are
    norm-clipped before the moment updates.
    """

    def __init__(self, n, lr=1e-2, beta1=0.9, beta2=0.999, eps=1e-8,
                 clip=10.0, scale=None):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.clip = clip
        self.scale = np.ones(n) if scale is None else np.asarray(scale, dtype=float)
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.k = 0

    def step(self, w, grad):
        """Return the updated parameter vector (descent direction)."""
        g = np.asarray(grad, dtype=float)
        if self.clip is not None:
            nrm = np.linalg.norm(g)
            if nrm > self.clip:
                g = g * (self.clip / nrm)
        self.k += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * g
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * g * g
        mh = self.m / (1.0 - self.beta1 ** self.k)
        vh = self.v / (1.0 - self.beta2 ** self.k)
        return w - self.lr * self.scale * mh / (np.sqrt(vh) + self.eps)


def soft_update(target, source, tau):
    """Polyak averaging target <- tau*source + (1-tau)*target, in place."""
    for wt, ws in zip(target, source):
        wt *= (1.0 - tau)
        wt += tau * ws
