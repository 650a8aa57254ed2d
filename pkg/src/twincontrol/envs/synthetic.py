"""Small analytic environments used to pin down the gradient machinery.

Both have closed-form or cheaply verifiable solutions, so the costate
gradients can be checked against independent integrations to tight
tolerances before the physics environments enter the picture.
"""

import numpy as np

from ..simcore import Environment


class Lin1D(Environment):
    """ds/dt = -s + p with identity closure p = w_p.

    The relaxation target doubles as the closure parameter, which makes
    the identification problem solvable by hand: s(t) = w + (s0 - w)e^-t.
    """

    name = "lin1d"
    n_s = 1
    n_a = 1
    n_z = 1
    n_p = 1
    n_err = 1
    n_wp = 1
    n_wa = 1

    dt = 1e-3
    t_horizon = 2.0

    state_lo = np.array([-1e6])
    state_hi = np.array([1e6])
    wp_truth = np.array([0.5])
    err_scale = np.array([1.0])

    def f(self, t, s, a, z, p):
        return -s + p

    def dfds(self, t, s, a, z, p):
        B = s.shape[0]
        return np.broadcast_to(-np.eye(1), (B, 1, 1))

    def dfda(self, t, s, a, z, p):
        return np.zeros((s.shape[0], 1, 1))

    def dfdp(self, t, s, a, z, p):
        B = s.shape[0]
        return np.broadcast_to(np.eye(1), (B, 1, 1))

    def g(self, t, s, a, z, wp):
        return np.broadcast_to(wp, (s.shape[0], 1))

    def dgds(self, t, s, a, z, wp):
        return np.zeros((s.shape[0], 1, 1))

    def dgda(self, t, s, a, z, wp):
        return np.zeros((s.shape[0], 1, 1))

    def dgdwp(self, t, s, a, z, wp):
        B = s.shape[0]
        return np.broadcast_to(np.eye(1), (B, 1, 1))

    def error(self, t, s):
        return -s

    def derror_ds(self, t, s):
        B = s.shape[0]
        return np.broadcast_to(-np.eye(1), (B, 1, 1))

    def policy(self, e, wa):
        return wa[0] * e

    def dpolicy_de(self, e, wa):
        B = e.shape[0]
        return np.broadcast_to(wa[0] * np.eye(1), (B, 1, 1))

    def dpolicy_dwa(self, e, wa):
        return e[:, :, None].copy()

    def Lp(self, t, s, s_ref):
        d = s[:, 0] - s_ref[0]
        return 0.5 * d * d

    def dLp_ds(self, t, s, s_ref):
        return s - s_ref[None, :]

    def La(self, t, s, a):
        return 0.5 * s[:, 0] ** 2

    def dLa_ds(self, t, s, a):
        return s.copy()

    def dLa_da(self, t, s, a):
        return np.zeros_like(a)

    def reward(self, t, s, a, z):
        return -0.5 * s[:, 0] ** 2

    def nominal_s0(self):
        return np.array([2.0])

    def sample_exo(self, t, rng):
        return np.zeros((len(t), 1))

    def wp_init(self, rng=None):
        return np.array([0.0])


class Osc1D(Environment):
    """Damped double integrator with an action-cost term.

    ds = [v, a - p*v] with closure p = w_p (a damping coefficient), policy
    a = w1*e1 + w2*e2 + w3 on e = [x_ref - x, -v], and cost density
    0.5*(e1^2 + e2^2) + 0.5*ra*a^2. The ra > 0 term exercises the direct
    dL/da contribution to the planning gradient.
    """

    name = "osc1d"
    n_s = 2
    n_a = 1
    n_z = 1
    n_p = 1
    n_err = 2
    n_wp = 1
    n_wa = 3

    dt = 1e-3
    t_horizon = 3.0
    x_ref = 1.0
    ra = 0.1

    state_lo = np.array([-1e6, -1e6])
    state_hi = np.array([1e6, 1e6])
    wp_truth = np.array([0.4])
    err_scale = np.array([1.0, 1.0])

    def f(self, t, s, a, z, p):
        return np.stack([s[:, 1], a[:, 0] - p[:, 0] * s[:, 1]], axis=1)

    def dfds(self, t, s, a, z, p):
        B = s.shape[0]
        J = np.zeros((B, 2, 2))
        J[:, 0, 1] = 1.0
        J[:, 1, 1] = -p[:, 0]
        return J

    def dfda(self, t, s, a, z, p):
        B = s.shape[0]
        J = np.zeros((B, 2, 1))
        J[:, 1, 0] = 1.0
        return J

    def dfdp(self, t, s, a, z, p):
        B = s.shape[0]
        J = np.zeros((B, 2, 1))
        J[:, 1, 0] = -s[:, 1]
        return J

    def g(self, t, s, a, z, wp):
        return np.broadcast_to(wp, (s.shape[0], 1))

    def dgds(self, t, s, a, z, wp):
        return np.zeros((s.shape[0], 1, 2))

    def dgda(self, t, s, a, z, wp):
        return np.zeros((s.shape[0], 1, 1))

    def dgdwp(self, t, s, a, z, wp):
        B = s.shape[0]
        return np.broadcast_to(np.eye(1), (B, 1, 1))

    def error(self, t, s):
        return np.stack([self.x_ref - s[:, 0], -s[:, 1]], axis=1)

    def derror_ds(self, t, s):
        B = s.shape[0]
        return np.broadcast_to(-np.eye(2), (B, 2, 2))

    def policy(self, e, wa):
        return (e @ wa[:2] + wa[2])[:, None]

    def dpolicy_de(self, e, wa):
        B = e.shape[0]
        return np.broadcast_to(wa[:2][None, None, :], (B, 1, 2))

    def dpolicy_dwa(self, e, wa):
        B = e.shape[0]
        J = np.empty((B, 1, 3))
        J[:, 0, :2] = e
        J[:, 0, 2] = 1.0
        return J

    def Lp(self, t, s, s_ref):
        d = s - s_ref[None, :]
        return 0.5 * (d * d).sum(axis=1)

    def dLp_ds(self, t, s, s_ref):
        return s - s_ref[None, :]

    def La(self, t, s, a):
        e = self.error(t, s)
        return 0.5 * (e * e).sum(axis=1) + 0.5 * self.ra * a[:, 0] ** 2

    def dLa_ds(self, t, s, a):
        e = self.error(t, s)
        # dL/ds = e . de/ds = -e
        return -e

    def dLa_da(self, t, s, a):
        return self.ra * a

    def reward(self, t, s, a, z):
        return -self.La(t, s, a)

    def nominal_s0(self):
        return np.array([0.0, 0.0])

    def sample_exo(self, t, rng):
        return np.zeros((len(t), 1))

    def wp_init(self, rng=None):
        return np.array([0.0])
