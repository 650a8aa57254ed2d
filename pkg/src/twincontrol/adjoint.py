"""Costate-based gradients for twin assimilation and policy planning.

Two optimization problems share the machinery:

* identification: J_p(w_p) penalizes the misfit between the twin run under
  the recorded actions and the recorded states, scored at the control
  nodes (that is where measurements exist). The costate absorbs the node
  costs as jumps, one trapezoid weight each.

* planning: J_a(w_a) is the control cost of the policy run continuously on
  the twin, quadratured on the integration grid. Every fine node feeds the
  costate a weighted cost-slope source, and the action-dependence of the
  cost density contributes a direct term next to the costate one.

The backward pass is the discrete adjoint of the forward integrator: it
transposes the linearized RK4 step (stage Jacobians at the interval ends,
averaged at the midpoint) rather than integrating the continuous costate
equation. The distinction matters on trajectories with locally unstable
modes: a separately discretized costate compounds its own truncation
error exponentially through such stretches, while the transposed step
inherits the forward solution's accuracy. The sweep itself is compiled;
the Jacobian fields it consumes are evaluated vectorized over all grid
nodes beforehand.
"""

import numpy as np
from numba import njit

from .simcore import rollout


def _node_weights(t):
    """Trapezoid weights on a uniform grid."""
    dt = t[1] - t[0]
    w = np.full(len(t), dt)
    w[0] = w[-1] = 0.5 * dt
    return w


def trapz_cost(env, res, kind, ref_s=None):
    """Cost functional of a batched rollout, per member (B,).

    kind='identify': state misfit against ref_s, scored at control nodes.
    kind='control': running control cost on the integration grid, with the
    policy implied by the stored fine states (stage-policy rollouts only).
    """
    if kind == "identify":
        t, S = res.t, res.s
        B, n_t, _ = S.shape
        dens = np.empty((B, n_t))
        for k in range(n_t):
            dens[:, k] = env.Lp(t[k], S[:, k], ref_s[k])
        return env.jp_scale * np.trapezoid(dens, t, axis=1)
    if kind != "control":
        raise ValueError(f"unknown cost kind {kind!r}")
    t_f, S_f = res.t_fine, res.s_fine
    B, n_f, n_s = S_f.shape
    tb = np.broadcast_to(t_f, (B, n_f)).reshape(-1)
    sb = S_f.reshape(B * n_f, n_s)
    e = env.error(tb, sb)
    a = env.policy(e, res_wa(res))
    dens = env.La(tb, sb, a).reshape(B, n_f)
    return env.ja_scale * np.trapezoid(dens, t_f, axis=1)


def res_wa(res):
    wa = getattr(res, "_wa", None)
    if wa is None:
        raise ValueError("control cost needs the policy weights; "
                         "use twin_Ja/grad_Ja or set res._wa")
    return wa


@njit(cache=True)
def _sweep(AfR, AfL, src, FpR, FpL, h, lam_max):
    """Transposed linearized RK4 pass over the fine grid.

    Forward step j -> j+1 has stage Jacobians A1 = A_left, A2 = A3 = A_mid
    (node average), A4 = A_right, stage parameter slots F likewise. With
    lam holding dJ/ds_{j+1}, the adjoint stages are

        th4 = lam/6
        th3 = lam/3 + h      A4^T th4
        th2 = lam/3 + (h/2)  A3^T th3
        th1 = lam/6 + (h/2)  A2^T th2

    giving lam_j = lam + h sum_i Ai^T th_i + src_j and the parameter
    accumulation acc += h sum_i Fi^T th_i. src carries the per-node cost
    slopes premultiplied by their quadrature weights.

    lam_max (per member) rescales the costate whenever its norm passes
    that bound. Through a locally unstable stretch (a twin caught in a
    stall runaway) the exact costate grows like the exponential of the
    instability time and buries every healthy node's contribution at
    magnitudes no descent step can use; the bound is set far above any
    stable path so it only engages there.
    """
    B, nf, ns, _ = AfR.shape
    nw = FpR.shape[3]
    lam = np.zeros((B, ns))
    acc = np.zeros((B, nw))
    th1 = np.empty(ns)
    th2 = np.empty(ns)
    th3 = np.empty(ns)
    th4 = np.empty(ns)
    u = np.empty(ns)
    for b in range(B):
        for i in range(ns):
            lam[b, i] = src[b, nf - 1, i]
    for j in range(nf - 2, -1, -1):
        r = j + 1
        for b in range(B):
            for i in range(ns):
                th4[i] = lam[b, i] / 6.0
            for i2 in range(ns):
                s = 0.0
                for i1 in range(ns):
                    s += AfR[b, r, i1, i2] * th4[i1]
                u[i2] = s
            for i in range(ns):
                th3[i] = lam[b, i] / 3.0 + h * u[i]
            for i2 in range(ns):
                s = 0.0
                for i1 in range(ns):
                    s += 0.5 * (AfL[b, j, i1, i2] + AfR[b, r, i1, i2]) * th3[i1]
                u[i2] = s
            for i in range(ns):
                th2[i] = lam[b, i] / 3.0 + 0.5 * h * u[i]
            for i2 in range(ns):
                s = 0.0
                for i1 in range(ns):
                    s += 0.5 * (AfL[b, j, i1, i2] + AfR[b, r, i1, i2]) * th2[i1]
                u[i2] = s
            for i in range(ns):
                th1[i] = lam[b, i] / 6.0 + 0.5 * h * u[i]
            for w in range(nw):
                s = 0.0
                for i in range(ns):
                    fl = FpL[b, j, i, w]
                    fr = FpR[b, r, i, w]
                    s += fl * th1[i] + 0.5 * (fl + fr) * (th2[i] + th3[i]) \
                        + fr * th4[i]
                acc[b, w] += h * s
            for i2 in range(ns):
                s = 0.0
                for i1 in range(ns):
                    al = AfL[b, j, i1, i2]
                    ar = AfR[b, r, i1, i2]
                    s += al * th1[i1] + 0.5 * (al + ar) * (th2[i1] + th3[i1]) \
                        + ar * th4[i1]
                lam[b, i2] += h * s
            for i in range(ns):
                lam[b, i] += src[b, j, i]
            nrm = 0.0
            for i in range(ns):
                nrm += lam[b, i] * lam[b, i]
            nrm = np.sqrt(nrm)
            if nrm > lam_max[b]:
                sc = lam_max[b] / nrm
                for i in range(ns):
                    lam[b, i] *= sc
    return acc


def _lam_bound(src):
    """Costate norm cap per member: 100x the total injected source.

    A stable backward pass is bounded by the summed source norms, so the
    factor leaves any healthy trajectory untouched; only exponential
    blowups through unstable stretches are rescaled.
    """
    return 100.0 * np.linalg.norm(src, axis=2).sum(axis=1)


def _fine_layout(res):
    t_f, S_f = res.t_fine, res.s_fine
    n_tc = len(res.t)
    n_f = len(t_f)
    n_sub = (n_f - 1) // (n_tc - 1) if n_tc > 1 else 1
    return t_f, S_f, n_tc, n_f, n_sub


def backward_pass(env, res, wp, *, mode, ref_s=None, wa=None):
    """Costate solve on a stored rollout; returns the cost gradient.

    mode='identify' gives dJ_p/dw_p (actions replayed zero-order-hold, so
    the Jacobian fields are two-sided at control nodes); mode='control'
    gives dJ_a/dw_a for a stage-policy rollout. Ensemble-averaged.
    """
    if mode not in ("identify", "control"):
        raise ValueError(f"unknown mode {mode!r}")
    t_f, S_f, n_tc, n_f, n_sub = _fine_layout(res)
    B, _, n_s = S_f.shape
    h = t_f[1] - t_f[0]
    sb = S_f.reshape(B * n_f, n_s)
    tb = np.broadcast_to(t_f, (B, n_f)).reshape(-1)
    wp = np.asarray(wp, dtype=float)

    if mode == "identify":
        # node j as right end of an interval carries that interval's held
        # action; as left end the next interval's. The two fields differ
        # only at control nodes.
        idx_R = np.clip((np.arange(n_f) - 1) // n_sub, 0, n_tc - 2)
        idx_L = np.clip(np.arange(n_f) // n_sub, 0, n_tc - 2)

        def fields(idx):
            a = res.a[:, idx].reshape(B * n_f, -1)
            z = res.z[:, idx].reshape(B * n_f, -1)
            A_tot, _, dfdp, dgdwp = env.flow_jacobians(tb, sb, a, z, wp)
            Fp = dfdp @ dgdwp
            return (np.ascontiguousarray(A_tot.reshape(B, n_f, n_s, n_s)),
                    np.ascontiguousarray(Fp.reshape(B, n_f, n_s, -1)))

        AfR, FpR = fields(idx_R)
        AfL, FpL = fields(idx_L)
        # misfit is scored at the control nodes only, so the source array is
        # zero except there
        src = np.zeros((B, n_f, n_s))
        wts = _node_weights(res.t)
        for k in range(n_tc):
            src[:, k * n_sub] = wts[k] * env.dLp_ds(res.t[k], res.s[:, k],
                                                    ref_s[k])
        acc = _sweep(AfR, AfL, src, FpR, FpL, h, _lam_bound(src))
        return env.jp_scale * acc.mean(axis=0)

    wa = np.asarray(wa, dtype=float)
    e = env.error(tb, sb)
    a = env.policy(e, wa)
    da_ds = env.dpolicy_de(e, wa) @ env.derror_ds(tb, sb)
    G = env.dpolicy_dwa(e, wa)
    dLa_da = env.dLa_da(tb, sb, a)
    dLs = env.dLa_ds(tb, sb, a) + np.einsum("ba,bas->bs", dLa_da, da_ds)

    # the exogenous input is held per control interval, so the closed-loop
    # fields are two-sided at control nodes just like the replayed actions
    idx_R = np.clip((np.arange(n_f) - 1) // n_sub, 0, n_tc - 2)
    idx_L = np.clip(np.arange(n_f) // n_sub, 0, n_tc - 2)

    def fields(idx):
        zi = res.z[:, idx].reshape(B * n_f, -1)
        A_ident, dfda_tot, _, _ = env.flow_jacobians(tb, sb, a, zi, wp)
        A_tot = A_ident + dfda_tot @ da_ds
        return (np.ascontiguousarray(A_tot.reshape(B, n_f, n_s, n_s)),
                np.ascontiguousarray((dfda_tot @ G).reshape(B, n_f, n_s, -1)))

    AfR, FpR = fields(idx_R)
    AfL, FpL = fields(idx_L)
    w_f = _node_weights(t_f)
    src = np.ascontiguousarray(dLs.reshape(B, n_f, n_s) * w_f[None, :, None])
    acc = _sweep(AfR, AfL, src, FpR, FpL, h, _lam_bound(src))
    # the cost density also depends on the action directly; that part does
    # not route through the costate
    direct = np.einsum("ba,baw->bw", dLa_da, G).reshape(B, n_f, -1)
    acc += np.trapezoid(direct, t_f, axis=1)
    return env.ja_scale * acc.mean(axis=0)


# ---------------------------------------------------------------------------
# cost wrappers: what finite differences see is exactly what the costate
# pass differentiates

def twin_Jp(env, wp, s0, z, actions, ref_s, dt=None, n_substeps=None):
    res = rollout(env, s0, z, wp, actions=actions, dt=dt, n_substeps=n_substeps)
    return float(trapz_cost(env, res, "identify", ref_s=ref_s).mean())


def twin_Ja(env, wa, wp, s0, z, dt=None, n_substeps=None):
    res = rollout(env, s0, z, wp, wa=wa, stage_policy=True,
                  dt=dt, n_substeps=n_substeps)
    res._wa = np.asarray(wa, dtype=float)
    return float(trapz_cost(env, res, "control").mean())


def grad_Jp(env, wp, s0, z, actions, ref_s, dt=None, n_substeps=None):
    res = rollout(env, s0, z, wp, actions=actions, dt=dt, n_substeps=n_substeps)
    J = float(trapz_cost(env, res, "identify", ref_s=ref_s).mean())
    g = backward_pass(env, res, wp, mode="identify", ref_s=ref_s)
    return J, g


def grad_Ja(env, wa, wp, s0, z, dt=None, n_substeps=None):
    res = rollout(env, s0, z, wp, wa=wa, stage_policy=True,
                  dt=dt, n_substeps=n_substeps)
    res._wa = np.asarray(wa, dtype=float)
    J = float(trapz_cost(env, res, "control").mean())
    g = backward_pass(env, res, wp, mode="control", wa=wa)
    return J, g


def fd_gradient(cost_fn, w, h):
    """Central-difference gradient of a scalar cost, per-component steps h."""
    w = np.asarray(w, dtype=float)
    h = np.broadcast_to(np.asarray(h, dtype=float), w.shape)
    g = np.empty_like(w)
    for i in range(len(w)):
        wp_ = w.copy(); wp_[i] += h[i]
        wm = w.copy(); wm[i] -= h[i]
        g[i] = (cost_fn(wp_) - cost_fn(wm)) / (2.0 * h[i])
    return g
