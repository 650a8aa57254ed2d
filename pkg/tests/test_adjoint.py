"""Costate gradients against independent finite-difference oracles.

The oracle never touches the costate code: it re-integrates the forward
model with scipy's own RK45 at tight tolerance and differences the cost.
"""

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from twincontrol.adjoint import (
    backward_pass,
    fd_gradient,
    grad_Ja,
    grad_Jp,
    trapz_cost,
    twin_Ja,
    twin_Jp,
)
from twincontrol.optim import Adam, soft_update
from twincontrol.simcore import rollout
from twincontrol.envs import get_env


def _lin1d_setup(dt=0.001, T=2.0):
    env = get_env("lin1d")
    t = env.time_grid(T, dt)
    z = np.zeros((len(t), 1))
    ref = rollout(env, env.nominal_s0(), z, env.wp_truth,
                  actions=np.zeros((1, len(t), 1)), dt=dt)
    return env, t, z, ref


def test_jp_gradient_lin1d_vs_quadrature():
    # Closed form: s(t; w) = w + (s0 - w)e^-t, ds/dw = 1 - e^-t.
    # dJ/dw = int (s_w - s_true)(1 - e^-t) dt, evaluated by quadrature.
    env, t, z, ref = _lin1d_setup()
    dt = t[1] - t[0]
    w = np.array([0.2])
    acts = np.zeros((1, len(t), 1))
    res = rollout(env, env.nominal_s0(), z, w, actions=acts, dt=dt)
    g = backward_pass(env, res, w, mode="identify", ref_s=ref.s[0])
    assert g.shape == (1,)

    s0 = 2.0
    sw = w[0] + (s0 - w[0]) * np.exp(-t)
    strue = 0.5 + (s0 - 0.5) * np.exp(-t)
    dsdw = 1.0 - np.exp(-t)
    oracle = np.trapezoid((sw - strue) * dsdw, t)
    assert g[0] == pytest.approx(oracle, rel=1e-5, abs=1e-8)


def test_jp_gradient_lin1d_vs_solve_ivp_fd():
    env, t, z, ref = _lin1d_setup()
    dt = t[1] - t[0]

    def cost(wv):
        sol = solve_ivp(lambda tt, ss: -ss + wv[0], (0, 2.0), [2.0],
                        t_eval=t, rtol=1e-10, atol=1e-12)
        d = sol.y[0] - ref.s[0, :, 0]
        return np.trapezoid(0.5 * d * d, t)

    w = np.array([0.2])
    fd = fd_gradient(cost, w, 1e-5)
    _, g = grad_Jp(env, w, env.nominal_s0(), z, np.zeros((1, len(t), 1)),
                   ref.s[0], dt=dt)
    assert abs(g[0] - fd[0]) <= 1e-5 * max(1.0, abs(fd[0]))


def test_ja_gradient_osc1d_all_weights():
    env = get_env("osc1d")
    dt, T = 0.001, 3.0
    t = env.time_grid(T, dt)
    z = np.zeros((len(t), 1))
    wp = env.wp_truth
    s0 = env.nominal_s0()
    rng = np.random.default_rng(7)
    for trial in range(3):
        wa = rng.uniform(-1, 1, 3)
        _, g = grad_Ja(env, wa, wp, s0, z, dt=dt)
        fd = fd_gradient(lambda w: twin_Ja(env, w, wp, s0, z, dt=dt), wa, 1e-6)
        denom = max(1.0, np.linalg.norm(fd))
        assert np.linalg.norm(g - fd) / denom <= 1e-5, (trial, g, fd)


def test_ja_gradient_direct_action_term_matters():
    # With ra > 0 the direct dL/da term is part of the gradient; dropping it
    # must produce a visibly different (wrong) answer.
    env = get_env("osc1d")
    dt = 0.002
    t = env.time_grid(2.0, dt)
    z = np.zeros((len(t), 1))
    wa = np.array([0.8, -0.3, 0.2])
    _, g_full = grad_Ja(env, wa, env.wp_truth, env.nominal_s0(), z, dt=dt)

    env.ra = 0.0
    _, g_zero = grad_Ja(env, wa, env.wp_truth, env.nominal_s0(), z, dt=dt)
    env.ra = 0.1
    assert np.linalg.norm(g_full - g_zero) > 1e-3


def test_jp_gradient_ensemble_mean():
    # Two identical members must give the same gradient as one.
    env, t, z, ref = _lin1d_setup(dt=0.002, T=1.0)
    dt = 0.002
    w = np.array([0.1])
    acts = np.zeros((2, len(t), 1))
    z2 = np.zeros((2, len(t), 1))
    s0 = np.broadcast_to(env.nominal_s0(), (2, 1))
    res = rollout(env, s0, z2, w, actions=acts, dt=dt)
    g2 = backward_pass(env, res, w, mode="identify", ref_s=ref.s[0])
    res1 = rollout(env, env.nominal_s0(), z, w,
                   actions=np.zeros((1, len(t), 1)), dt=dt)
    g1 = backward_pass(env, res1, w, mode="identify", ref_s=ref.s[0])
    assert np.allclose(g1, g2, rtol=1e-12)


def test_trapz_cost_matches_twin_jp():
    env, t, z, ref = _lin1d_setup(dt=0.002, T=1.0)
    w = np.array([0.3])
    val = twin_Jp(env, w, env.nominal_s0(), z, np.zeros((1, len(t), 1)),
                  ref.s[0], dt=0.002)
    res = rollout(env, env.nominal_s0(), z, w,
                  actions=np.zeros((1, len(t), 1)), dt=0.002)
    val2 = float(trapz_cost(env, res, "identify", ref_s=ref.s[0]).mean())
    assert val == pytest.approx(val2, rel=1e-12)


def test_jp_gradient_substepped():
    # coarse control grid, fine integration grid: the misfit is scored at
    # the control nodes but the costate must run on the fine grid
    env = get_env("lin1d")
    dt, ns = 0.05, 8
    t = env.time_grid(2.0, dt)
    z = np.zeros((len(t), 1))
    acts = np.zeros((1, len(t), 1))
    ref = rollout(env, env.nominal_s0(), z, env.wp_truth, actions=acts,
                  dt=dt, n_substeps=ns)
    w = np.array([0.15])
    fd = fd_gradient(
        lambda wv: twin_Jp(env, wv, env.nominal_s0(), z, acts, ref.s[0],
                           dt=dt, n_substeps=ns), w, 1e-6)
    _, g = grad_Jp(env, w, env.nominal_s0(), z, acts, ref.s[0],
                   dt=dt, n_substeps=ns)
    assert abs(g[0] - fd[0]) <= 1e-5 * max(1.0, abs(fd[0]))


def test_ja_gradient_substepped():
    env = get_env("osc1d")
    dt, ns = 0.05, 10
    t = env.time_grid(2.0, dt)
    z = np.zeros((len(t), 1))
    wa = np.array([0.6, -0.4, 0.3])
    s0 = env.nominal_s0()
    fd = fd_gradient(
        lambda w: twin_Ja(env, w, env.wp_truth, s0, z, dt=dt, n_substeps=ns),
        wa, 1e-6)
    _, g = grad_Ja(env, wa, env.wp_truth, s0, z, dt=dt, n_substeps=ns)
    assert np.linalg.norm(g - fd) / max(1.0, np.linalg.norm(fd)) <= 1e-5


def test_fine_grid_recorded():
    env = get_env("lin1d")
    t = env.time_grid(0.5, 0.1)
    z = np.zeros((len(t), 1))
    res = rollout(env, env.nominal_s0(), z, env.wp_truth,
                  actions=np.zeros((1, len(t), 1)), dt=0.1, n_substeps=4)
    assert res.s_fine.shape == (1, 21, 1)
    assert np.allclose(res.s_fine[:, ::4], res.s)
    assert res.t_fine[1] == pytest.approx(0.025)


# --- Adam ------------------------------------------------------------------

def test_adam_first_step_is_lr_sign():
    opt = Adam(2, lr=0.1)
    w = np.array([1.0, -2.0])
    g = np.array([3.0, -4.0])
    w1 = opt.step(w, g)
    # bias-corrected first step is lr * sign(g) up to eps
    assert np.allclose(w1, w - 0.1 * np.sign(g), atol=1e-6)


def test_adam_frozen_sequence():
    # Hand-checked two-step sequence, pinned numerically (eps included).
    opt = Adam(1, lr=0.5, clip=None)
    w = np.array([2.0])
    w = opt.step(w, np.array([4.0]))
    w1 = 2.0 - 0.5 * 4.0 / (np.sqrt(16.0) + 1e-8)
    assert w[0] == pytest.approx(w1, rel=1e-14)
    w = opt.step(w, np.array([3.0]))
    mh = (0.9 * 0.4 + 0.1 * 3.0) / (1 - 0.9 ** 2)
    vh = (0.999 * 0.016 + 0.001 * 9.0) / (1 - 0.999 ** 2)
    expect = w1 - 0.5 * mh / (np.sqrt(vh) + 1e-8)
    assert w[0] == pytest.approx(expect, rel=1e-12)


def test_adam_per_component_scale():
    opt = Adam(2, lr=1.0, scale=np.array([1.0, 10.0]))
    w = opt.step(np.zeros(2), np.array([1.0, 1.0]))
    assert w[1] == pytest.approx(10.0 * w[0], rel=1e-9)


def test_soft_update():
    tgt = [np.zeros(3)]
    src = [np.ones(3)]
    soft_update(tgt, src, 0.1)
    assert np.allclose(tgt[0], 0.1)
    soft_update(tgt, src, 0.1)
    assert np.allclose(tgt[0], 0.19)


def test_fd_gradient_quadratic():
    g = fd_gradient(lambda w: (w ** 2).sum(), np.array([1.0, -3.0]), 1e-6)
    assert np.allclose(g, [2.0, -6.0], atol=1e-8)
