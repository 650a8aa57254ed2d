"""Fixed-step simulation core: environments, trajectories, rollouts.

Everything downstream (adjoint solves, policy training, the episode loop)
runs on the primitives defined here. Environments expose batched callables:
state/action/disturbance arrays carry a leading ensemble axis ``(B, n)`` and
all derivative evaluations broadcast over it.
"""

from __future__ import annotations

import dataclasses
import io
import numpy as np


class IntegrationError(RuntimeError):
    """Raised when a trajectory leaves the environment's sanity box.

    Carries the failure time and the offending state so callers can log
    where a rollout blew up.
    """

    def __init__(self, t, s, msg=""):
        self.t = float(t)
        self.s = np.asarray(s)
        super().__init__(msg or f"state left sanity box at t={t:.6g}: {self.s}")


def clip_smooth(x, x1, x2):
    """Differentiable squashing of x onto (x1, x2).

    0.5*(tanh(x)+1)*(x2-x1)+x1. Saturates to the box edges for |x| >~ 20.
    """
    return 0.5 * (np.tanh(x) + 1.0) * (x2 - x1) + x1


def d_clip_smooth(x, x1, x2):
    t = np.tanh(x)
    return 0.5 * (1.0 - t * t) * (x2 - x1)


def ema_filter(y, alpha_hat):
    """Exponential smoothing of a sampled signal.

    y_hat[k] = (1-alpha_hat)*y[k] + alpha_hat*y_hat[k-1], seeded with y[0].
    alpha_hat=0 passes the signal through unchanged.
    """
    y = np.asarray(y, dtype=float)
    if not 0.0 <= alpha_hat < 1.0:
        raise ValueError("alpha_hat must lie in [0, 1)")
    out = np.empty_like(y)
    out[0] = y[0]
    for k in range(1, len(y)):
        out[k] = (1.0 - alpha_hat) * y[k] + alpha_hat * out[k - 1]
    return out


def rk4_step(f, t, s, dt, *args):
    """One classical Runge-Kutta step of ds/dt = f(t, s, *args)."""
    k1 = f(t, s, *args)
    k2 = f(t + 0.5 * dt, s + 0.5 * dt * k1, *args)
    k3 = f(t + 0.5 * dt, s + 0.5 * dt * k2, *args)
    k4 = f(t + dt, s + dt * k3, *args)
    return s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


class Environment:
    """Base class for a controlled dynamical system and its twin closure.

    Subclasses fill in the physics. The flow map is
        ds/dt = f(t, s, a, z, p),    p = g(t, s, a, z, w_p)
    with s the state, a the action, z the exogenous input and p the closure
    output. The policy a = pi(e; w_a) acts on error features e = error(t, s).

    All callables are batched: s is (B, n_s), a is (B, n_a), z is (B, n_z),
    p is (B, n_p); Jacobians return (B, rows, cols).
    """

    name = "base"
    n_s = 0
    n_a = 0
    n_z = 0
    n_p = 0
    n_err = 0
    n_wp = 0
    n_wa = 0

    dt = 0.1               # control/sampling interval
    t_horizon = 1.0        # default episode length T_o
    n_substeps = 1

    action_lo = None       # (n_a,)
    action_hi = None
    action_rate = None     # (n_a,) max |da/dt|, or None
    state_lo = None        # (n_s,) sanity box
    state_hi = None

    wp_truth = None        # closure parameters of the real system
    wp_scale = None        # per-component optimizer scale for w_p
    wa_scale = None
    err_scale = None       # (n_err,) critic input normalization
    jp_scale = 1.0         # J_p = jp_scale * trapz(L_p)
    ja_scale = 1.0

    # ---- dynamics ------------------------------------------------------
    def f(self, t, s, a, z, p):
        raise NotImplementedError

    def dfds(self, t, s, a, z, p):
        raise NotImplementedError

    def dfda(self, t, s, a, z, p):
        raise NotImplementedError

    def dfdp(self, t, s, a, z, p):
        raise NotImplementedError

    # ---- closure -------------------------------------------------------
    def g(self, t, s, a, z, wp):
        raise NotImplementedError

    def dgds(self, t, s, a, z, wp):
        raise NotImplementedError

    def dgda(self, t, s, a, z, wp):
        raise NotImplementedError

    def dgdwp(self, t, s, a, z, wp):
        raise NotImplementedError

    def flow_jacobians(self, t, s, a, z, wp):
        """All linearizations of the closed flow map at one point.

        Returns (A_ident, dfda_tot, dfdp, dgdwp) with
        A_ident = df/ds + df/dp dg/ds and dfda_tot = df/da + df/dp dg/da.
        Environments with expensive physics override this with a fused
        kernel; the default composes the individual pieces.
        """
        p = self.g(t, s, a, z, wp)
        dfdp = self.dfdp(t, s, a, z, p)
        A_ident = self.dfds(t, s, a, z, p) + dfdp @ self.dgds(t, s, a, z, wp)
        dfda_tot = self.dfda(t, s, a, z, p) + dfdp @ self.dgda(t, s, a, z, wp)
        return A_ident, dfda_tot, dfdp, self.dgdwp(t, s, a, z, wp)

    # ---- errors and policy --------------------------------------------
    def error(self, t, s):
        raise NotImplementedError

    def derror_ds(self, t, s):
        raise NotImplementedError

    def policy(self, e, wa):
        raise NotImplementedError

    def dpolicy_de(self, e, wa):
        raise NotImplementedError

    def dpolicy_dwa(self, e, wa):
        raise NotImplementedError

    # ---- costs ---------------------------------------------------------
    def Lp(self, t, s, s_ref):
        """Identification loss density; s_ref is the recorded state at t."""
        raise NotImplementedError

    def dLp_ds(self, t, s, s_ref):
        raise NotImplementedError

    def La(self, t, s, a):
        """Control cost density along a virtual trajectory."""
        raise NotImplementedError

    def dLa_ds(self, t, s, a):
        raise NotImplementedError

    def dLa_da(self, t, s, a):
        raise NotImplementedError

    def reward(self, t, s, a, z):
        """Per-step reward fed to the model-free learner."""
        raise NotImplementedError

    # ---- sampling ------------------------------------------------------
    def nominal_s0(self):
        raise NotImplementedError

    def sample_s0(self, rng):
        return self.nominal_s0()

    def sample_exo(self, t, rng):
        """Synthetic disturbance realization of the real system on grid t."""
        raise NotImplementedError

    def wp_init(self, rng=None):
        """Starting closure guess for the twin."""
        raise NotImplementedError

    def wa_init(self):
        return np.zeros(self.n_wa)

    # ---- helpers -------------------------------------------------------
    def time_grid(self, t_horizon=None, dt=None):
        dt = self.dt if dt is None else dt
        T = self.t_horizon if t_horizon is None else t_horizon
        n_t = int(round(T / dt)) + 1
        return dt * np.arange(n_t)

    def check_state(self, s):
        ok = np.isfinite(s).all(axis=-1)
        if self.state_lo is not None:
            ok = ok & (s >= self.state_lo).all(axis=-1) & (s <= self.state_hi).all(axis=-1)
        return ok

    def clip_actions(self, a):
        if self.action_lo is None:
            return a
        return np.clip(a, self.action_lo, self.action_hi)


@dataclasses.dataclass
class Trajectory:
    """Single recorded episode on the control grid."""

    t: np.ndarray       # (n_t,)
    s: np.ndarray       # (n_t, n_s)
    a: np.ndarray       # (n_t, n_a)
    z: np.ndarray       # (n_t, n_z)
    e: np.ndarray       # (n_t, n_err)
    r: np.ndarray       # (n_t,)

    def __post_init__(self):
        n = len(self.t)
        for name in ("s", "a", "z", "e", "r"):
            arr = getattr(self, name)
            if len(arr) != n:
                raise ValueError(f"length mismatch: t has {n} rows, {name} has {len(arr)}")

    @property
    def n_t(self):
        return len(self.t)


@dataclasses.dataclass
class RolloutResult:
    """Batched rollout arrays; leading axis is the ensemble member.

    ``t``/``s`` live on the control grid; ``t_fine``/``s_fine`` on the
    integration grid (identical objects when n_substeps == 1). The costate
    solver needs the fine states: with a stiff plant the backward sweep is
    only stable at the integration step, not the control step.
    """

    t: np.ndarray       # (n_t,)
    s: np.ndarray       # (B, n_t, n_s)
    a: np.ndarray       # (B, n_t, n_a)
    z: np.ndarray       # (B, n_t, n_z)
    e: np.ndarray       # (B, n_t, n_err)
    r: np.ndarray       # (B, n_t)
    t_fine: np.ndarray = None
    s_fine: np.ndarray = None

    def traj(self, i=0):
        return Trajectory(self.t, self.s[i], self.a[i], self.z[i], self.e[i], self.r[i])


def _policy_closed_f(env, wp, wa):
    """Flow map with the policy evaluated inside every integrator stage."""

    def fc(t, s, z):
        e = env.error(t, s)
        a = env.policy(e, wa)
        p = env.g(t, s, a, z, wp)
        return env.f(t, s, a, z, p)

    return fc


def _make_open_driver(fast_f):
    from numba import njit

    @njit(cache=False)
    def drv(t0, s, a, z, wp, h, n_sub, S_f, base):
        for j in range(n_sub):
            tj = t0 + j * h
            k1 = fast_f(tj, s, a, z, wp)
            k2 = fast_f(tj + 0.5 * h, s + (0.5 * h) * k1, a, z, wp)
            k3 = fast_f(tj + 0.5 * h, s + (0.5 * h) * k2, a, z, wp)
            k4 = fast_f(tj + h, s + h * k3, a, z, wp)
            s = s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            S_f[:, base + j + 1, :] = s
        return s

    return drv


def _make_closed_driver(fast_fc):
    from numba import njit

    @njit(cache=False)
    def drv(t0, s, z, wp, wa, h, n_sub, S_f, base):
        for j in range(n_sub):
            tj = t0 + j * h
            k1 = fast_fc(tj, s, z, wp, wa)
            k2 = fast_fc(tj + 0.5 * h, s + (0.5 * h) * k1, z, wp, wa)
            k3 = fast_fc(tj + 0.5 * h, s + (0.5 * h) * k2, z, wp, wa)
            k4 = fast_fc(tj + h, s + h * k3, z, wp, wa)
            s = s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            S_f[:, base + j + 1, :] = s
        return s

    return drv


def _get_drivers(env):
    d = env.__dict__.get("_drivers")
    if d is None:
        fo = getattr(env, "fast_f", None)
        fc = getattr(env, "fast_fc", None)
        d = (None if fo is None else _make_open_driver(fo),
             None if fc is None else _make_closed_driver(fc))
        env.__dict__["_drivers"] = d
    return d


def rollout(env, s0, z, wp, *, actions=None, wa=None, noise=None,
            stage_policy=False, rate_limit=True, dt=None, n_substeps=None,
            check=True, on_divergence="raise"):
    """Integrate the environment forward on the control grid.

    Exactly one action source must be given:
      * ``actions`` -- recorded actions, replayed zero-order-hold (twin
        assimilation replays; shape (n_t, n_a) or (B, n_t, n_a));
      * ``wa`` with ``stage_policy=False`` -- sampled-data feedback: the
        policy is evaluated once per control step, optionally perturbed by
        ``noise`` (n_t, n_a), clipped to the actuator box and rate-limited.
        This is how real episodes run;
      * ``wa`` with ``stage_policy=True`` -- the continuous closed loop used
        by planning: policy re-evaluated at every integrator stage, no
        noise, no rate limiting.

    ``z`` has shape (B, n_t, n_z) or (n_t, n_z). Returns a RolloutResult
    with the per-node states, applied actions, error features and rewards.

    ``on_divergence="truncate"`` returns the valid prefix of the episode
    instead of raising when a state leaves the sanity box (bad policies can
    genuinely crash the plant; the prefix is still usable data).
    """
    if on_divergence not in ("raise", "truncate"):
        raise ValueError(f"unknown on_divergence {on_divergence!r}")
    dt = env.dt if dt is None else dt
    n_substeps = env.n_substeps if n_substeps is None else n_substeps
    z = np.asarray(z, dtype=float)
    if z.ndim == 2:
        z = z[None]
    B, n_t, _ = z.shape
    s0 = np.asarray(s0, dtype=float)
    if s0.ndim == 1:
        s0 = np.broadcast_to(s0, (B, env.n_s)).copy()
    t = dt * np.arange(n_t)
    h = dt / n_substeps
    n_f = (n_t - 1) * n_substeps + 1
    t_fine = h * np.arange(n_f)

    S_f = np.empty((B, n_f, env.n_s))
    A = np.empty((B, n_t, env.n_a))
    E = np.empty((B, n_t, env.n_err))
    R = np.empty((B, n_t))
    S_f[:, 0] = s0
    wp = np.asarray(wp, dtype=float)

    if actions is not None:
        actions = np.asarray(actions, dtype=float)
        if actions.ndim == 2:
            actions = np.broadcast_to(actions, (B,) + actions.shape)

    if stage_policy and wa is None:
        raise ValueError("stage_policy requires wa")
    drv_open, drv_closed = _get_drivers(env)
    if stage_policy and drv_closed is None:
        fc = _policy_closed_f(env, wp, wa)
    if wa is not None:
        wa = np.asarray(wa, dtype=float)

    s = S_f[:, 0].copy()
    a_prev = None
    for k in range(n_t):
        e = env.error(np.full(B, t[k]), s)
        E[:, k] = e
        if actions is not None:
            a = actions[:, k].copy()
        else:
            a = env.policy(e, wa)
            if not stage_policy:
                if noise is not None:
                    a = a + noise[:, k]
                a = env.clip_actions(a)
                if rate_limit and env.action_rate is not None and a_prev is not None:
                    lim = env.action_rate * dt
                    a = a_prev + np.clip(a - a_prev, -lim, lim)
        A[:, k] = a
        a_prev = a
        R[:, k] = env.reward(np.full(B, t[k]), s, a, z[:, k])
        if k == n_t - 1:
            break
        # advance over [t_k, t_{k+1}]; exogenous inputs are held ZOH
        zk = np.ascontiguousarray(z[:, k])
        base = k * n_substeps
        if stage_policy:
            if drv_closed is not None:
                s = drv_closed(t[k], s, zk, wp, wa, h, n_substeps, S_f, base)
            else:
                for j in range(n_substeps):
                    s = rk4_step(fc, t[k] + j * h, s, h, zk)
                    S_f[:, base + j + 1] = s
        else:
            if drv_open is not None:
                s = drv_open(t[k], s, np.ascontiguousarray(a), zk, wp, h,
                             n_substeps, S_f, base)
            else:
                for j in range(n_substeps):
                    s = rk4_step(
                        lambda tt, ss, aa, zz: env.f(tt, ss, aa, zz, env.g(tt, ss, aa, zz, wp)),
                        t[k] + j * h, s, h, a, zk)
                    S_f[:, base + j + 1] = s
        if check:
            ok = env.check_state(s)
            if not ok.all():
                if on_divergence == "truncate":
                    # keep nodes 0..k; fine nodes past t_k may hold garbage
                    n_t, n_f = k + 1, k * n_substeps + 1
                    t, S_f = t[:n_t], S_f[:, :n_f]
                    A, E, R, z = A[:, :n_t], E[:, :n_t], R[:, :n_t], z[:, :n_t]
                    t_fine = t_fine[:n_f]
                    break
                i = int(np.argmin(ok))
                raise IntegrationError(t[k + 1], s[i])

    if n_substeps == 1:
        S = S_f
    else:
        S = np.ascontiguousarray(S_f[:, ::n_substeps])
    return RolloutResult(t, S, A, z, E, R, t_fine=t_fine, s_fine=S_f)


# ---------------------------------------------------------------------------
# episode CSV serialization: header t,s0..,a0..,z0..,e0..,r at 9 sig. digits

def episode_to_csv(traj):
    cols = ["t"]
    cols += [f"s{i}" for i in range(traj.s.shape[1])]
    cols += [f"a{i}" for i in range(traj.a.shape[1])]
    cols += [f"z{i}" for i in range(traj.z.shape[1])]
    cols += [f"e{i}" for i in range(traj.e.shape[1])]
    cols += ["r"]
    buf = io.StringIO()
    buf.write(",".join(cols) + "\n")
    mat = np.column_stack([traj.t, traj.s, traj.a, traj.z, traj.e, traj.r])
    for row in mat:
        buf.write(",".join(f"{v:.9g}" for v in row) + "\n")
    return buf.getvalue()


def save_episode_csv(path, traj):
    with open(path, "w") as fh:
        fh.write(episode_to_csv(traj))


def load_episode_csv(path, n_s=None, n_a=None, n_z=None):
    """Parse an episode CSV back into a Trajectory.

    Column counts come from the header; pass n_s/n_a/n_z to validate them.
    Malformed rows raise ValueError naming the 1-based line number.
    """
    with open(path) as fh:
        header = fh.readline().strip()
        names = header.split(",")
        if names[0] != "t" or names[-1] != "r":
            raise ValueError(f"{path}:1: unexpected header {header!r}")
        counts = {"s": 0, "a": 0, "z": 0, "e": 0}
        for c in names[1:-1]:
            key, idx = c[0], c[1:]
            if key not in counts or not idx.isdigit():
                raise ValueError(f"{path}:1: unexpected column {c!r}")
            counts[key] += 1
        for key, want in (("s", n_s), ("a", n_a), ("z", n_z)):
            if want is not None and counts[key] != want:
                raise ValueError(
                    f"{path}:1: expected {want} {key}-columns, found {counts[key]}")
        rows = []
        for ln, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(names):
                raise ValueError(f"{path}:{ln}: expected {len(names)} fields, got {len(parts)}")
            try:
                rows.append([float(v) for v in parts])
            except ValueError as exc:
                raise ValueError(f"{path}:{ln}: {exc}") from None
    mat = np.asarray(rows)
    i = 1
    t = mat[:, 0]
    s = mat[:, i:i + counts["s"]]; i += counts["s"]
    a = mat[:, i:i + counts["a"]]; i += counts["a"]
    z = mat[:, i:i + counts["z"]]; i += counts["z"]
    e = mat[:, i:i + counts["e"]]; i += counts["e"]
    r = mat[:, -1]
    return Trajectory(t, s, a, z, e, r)
