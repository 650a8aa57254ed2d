"""Action-value network and prioritized replay for the model-free path.

The critic is a small dense net q(e, a) with hand-coded backprop. Writing
the chain rule out keeps the parameter layout as plain numpy arrays, which
the soft target updates and the actor gradient both want, and spares the
package a deep-learning dependency for what is a 2x64 MLP.
"""

import numpy as np


class QNetwork:
    """q(e, a): two tanh layers of 64, linear scalar head.

    Inputs are normalized before the first layer: errors divide by
    ``err_scale``, actions map affinely onto [-1, 1] using the action box
    (identity when the environment declares no box).
    """

    def __init__(self, n_err, n_a, err_scale=None, action_lo=None,
                 action_hi=None, width=64, rng=None):
        rng = np.random.default_rng() if rng is None else rng
        self.n_err = n_err
        self.n_a = n_a
        n_in = n_err + n_a
        self.x_scale = np.ones(n_in)
        self.x_off = np.zeros(n_in)
        if err_scale is not None:
            self.x_scale[:n_err] = np.asarray(err_scale, dtype=float)
        if action_lo is not None:
            lo = np.asarray(action_lo, dtype=float)
            hi = np.asarray(action_hi, dtype=float)
            self.x_scale[n_err:] = 0.5 * (hi - lo)
            self.x_off[n_err:] = 0.5 * (hi + lo)

        def layer(n_out, n_inp):
            lim = 1.0 / np.sqrt(n_inp)
            return (rng.uniform(-lim, lim, (n_out, n_inp)),
                    rng.uniform(-lim, lim, n_out))

        self.W1, self.b1 = layer(width, n_in)
        self.W2, self.b2 = layer(width, width)
        self.W3, self.b3 = layer(1, width)

    def params(self):
        return [self.W1, self.b1, self.W2, self.b2, self.W3, self.b3]

    def set_params(self, ps):
        self.W1, self.b1, self.W2, self.b2, self.W3, self.b3 = \
            [np.array(p, dtype=float) for p in ps]

    def copy(self):
        out = QNetwork.__new__(QNetwork)
        out.n_err, out.n_a = self.n_err, self.n_a
        out.x_scale = self.x_scale.copy()
        out.x_off = self.x_off.copy()
        out.set_params(self.params())
        return out

    def _normalize(self, e, a):
        x = np.concatenate([e, a], axis=1)
        return (x - self.x_off) / self.x_scale

    def _forward(self, x):
        h1 = np.tanh(x @ self.W1.T + self.b1)
        h2 = np.tanh(h1 @ self.W2.T + self.b2)
        q = h2 @ self.W3.T + self.b3
        return q[:, 0], (x, h1, h2)

    def value(self, e, a):
        """q for a batch, shape (B,)."""
        q, _ = self._forward(self._normalize(e, a))
        return q

    def grads(self, e, a, coef):
        """d(sum_i coef_i q_i)/dparams, same layout as params().

        coef carries whatever per-sample weighting the loss needs (e.g.
        -delta_i/n for a squared Bellman residual).
        """
        x = self._normalize(e, a)
        _, (x, h1, h2) = self._forward(x)
        c = np.asarray(coef, dtype=float)[:, None]            # (B,1)
        dW3 = c.T @ h2
        db3 = np.array([c.sum()])
        g2 = (c @ self.W3) * (1.0 - h2 * h2)                  # (B,64)
        dW2 = g2.T @ h1
        db2 = g2.sum(axis=0)
        g1 = (g2 @ self.W2) * (1.0 - h1 * h1)
        dW1 = g1.T @ x
        db1 = g1.sum(axis=0)
        return [dW1, db1, dW2, db2, dW3, db3]

    def dq_da(self, e, a):
        """Per-sample gradient of q w.r.t. the raw action, shape (B, n_a)."""
        x = self._normalize(e, a)
        _, (x, h1, h2) = self._forward(x)
        g2 = self.W3 * (1.0 - h2 * h2)                        # (B,64)
        g1 = (g2 @ self.W2) * (1.0 - h1 * h1)
        dx = g1 @ self.W1                                     # (B, n_in)
        return dx[:, self.n_err:] / self.x_scale[self.n_err:]


class ReplayBuffer:
    """Transition store with priority-proportional sampling.

    Sampling probability is p_i^alpha / sum_k p_k^alpha with
    p_i = |delta_i| + tol. Fresh transitions enter at the current maximum
    priority so each gets replayed at least once with high odds.
    """

    def __init__(self, n_err, n_a, capacity=200_000, alpha=0.7, tol=1e-6):
        self.capacity = capacity
        self.alpha = alpha
        self.tol = tol
        self.e = np.empty((capacity, n_err))
        self.a = np.empty((capacity, n_a))
        self.r = np.empty(capacity)
        self.e_next = np.empty((capacity, n_err))
        self.done = np.zeros(capacity, dtype=bool)
        self.p = np.zeros(capacity)
        self.n = 0
        self._head = 0

    def __len__(self):
        return self.n

    def add(self, e, a, r, e_next, done):
        i = self._head
        self.e[i] = e
        self.a[i] = a
        self.r[i] = r
        self.e_next[i] = e_next
        self.done[i] = done
        self.p[i] = self.p[: self.n].max() if self.n else 1.0
        self._head = (i + 1) % self.capacity
        self.n = min(self.n + 1, self.capacity)

    def add_episode(self, E, A, R):
        """Store the n_t - 1 transitions of one recorded episode.

        E: (n_t, n_err) error features, A: (n_t, n_a), R: (n_t,) rewards.
        The reward credited to (e_k, a_k) is r_{k+1}; the final transition
        is marked terminal.
        """
        n_t = len(R)
        for k in range(n_t - 1):
            self.add(E[k], A[k], R[k + 1], E[k + 1], k == n_t - 2)

    def sample(self, n, rng):
        w = self.p[: self.n] ** self.alpha
        c = np.cumsum(w)
        u = rng.uniform(0.0, c[-1], n)
        return np.searchsorted(c, u, side="left")

    def update_priorities(self, idx, deltas):
        self.p[idx] = np.abs(deltas) + self.tol
