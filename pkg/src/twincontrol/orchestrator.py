"""Episode loop coupling twin identification with dual-path policy training.

One pass over the loop: run whichever policy is live on the real system
(with exploration noise), push the transitions into the replay memory and
the full trajectory into short-term storage; regress the recorded
disturbance into a mean-plus-fluctuation model; descend the twin's closure
weights on the replayed actions under resampled disturbances; descend the
planner's policy weights through the assimilated twin; then evaluate both
policies on the twin and decide which one faces the plant next.

The swap/clone bookkeeping lives in ``switch_decision`` so the branch
logic can be unit-tested with scripted costs. Both descent loops keep one
Adam instance alive across episodes: each episode continues the same
optimization on fresh data rather than restarting the moment estimates.
"""

import dataclasses
import hashlib
import json
import os
import warnings
from collections import deque

import numpy as np

from .adjoint import grad_Ja, grad_Jp, trapz_cost, twin_Jp
from .envs import get_env
from .exomodels import ExoModel
from .mflearner import ModelFreeLearner
from .optim import Adam
from .simcore import IntegrationError, rollout, save_episode_csv

SCHEMA = "twincontrol-run/1"


# ---------------------------------------------------------------------------
# configuration

@dataclasses.dataclass
class RtConfig:
    """Fully resolved settings for one training run.

    Loop counters follow the per-system defaults in ``LOOP_DEFAULTS``;
    everything is overridable. ``n_eval`` episodes (default: the ensemble
    size) score the live/idle policies on the twin each episode.
    """

    env: str
    t_horizon: float
    dt: float
    n_episodes: int = 20
    n_ens: int = 5              # virtual-episode ensemble size
    n_mem: int = 1              # recorded episodes kept for assimilation
    n_critic: int = 500         # critic regression steps per episode
    n_actor: int = 1000         # replay-side actor steps per episode
    n_twin: int = 15            # closure descent steps per episode
    n_plan: int = 10            # planner descent steps per episode
    patience_swap: int = 2
    patience_clone: int = 3
    tol_swap: float = 1.0
    tol_clone: float = 0.5
    n_eval: int = None
    seed: int = 0
    noise_frac: float = 0.01    # exploration noise, fraction of action span
    jp_stop: float = 1e-6       # early-out for the twin descent
    lr_twin: float = 0.1
    lr_plan: float = 0.1
    lr_critic: float = 1e-3
    lr_actor: float = 1e-3
    gamma: float = 0.99
    tau: float = 0.01
    n_batch: int = 64
    buffer_cap: int = 200_000
    per_alpha: float = 0.7
    n_substeps: int = None      # integrator substeps; None = env default

    def __post_init__(self):
        for name in ("n_episodes", "n_ens", "n_mem"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("n_critic", "n_actor", "n_twin", "n_plan",
                     "patience_swap", "patience_clone"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.tol_swap <= 0 or self.tol_clone <= 0:
            raise ValueError("tolerances must be positive")
        if self.dt <= 0 or self.t_horizon <= 0:
            raise ValueError("dt and t_horizon must be positive")
        if self.n_eval is not None and self.n_eval < 1:
            raise ValueError("n_eval must be >= 1")

    def to_dict(self):
        return dataclasses.asdict(self)


# per-system loop settings: horizon, step, episode budget, ensemble size,
# inner iteration counts, switch patience/tolerances, descent rates
LOOP_DEFAULTS = {
    "turbine": dict(t_horizon=600.0, dt=0.5, n_episodes=20, n_ens=5,
                    n_critic=500, n_actor=1000, n_twin=15, n_plan=10,
                    patience_swap=2, patience_clone=3,
                    tol_swap=1.0, tol_clone=0.5,
                    lr_twin=0.02, lr_plan=0.1),
    "fwmav": dict(t_horizon=5.0, dt=5e-4, n_episodes=20, n_ens=5,
                  n_critic=1000, n_actor=1000, n_twin=15, n_plan=5,
                  patience_swap=4, patience_clone=4,
                  tol_swap=1.0, tol_clone=0.5,
                  lr_twin=0.02, lr_plan=0.1),
    "cryo": dict(t_horizon=432000.0, dt=30.0, n_episodes=20, n_ens=1,
                 n_critic=1000, n_actor=1000, n_twin=30, n_plan=5,
                 patience_swap=4, patience_clone=20,
                 tol_swap=1.0, tol_clone=0.5,
                 lr_twin=0.15, lr_plan=0.1),
    "lin1d": dict(t_horizon=1.0, dt=0.01, n_episodes=5, n_ens=2,
                  n_critic=50, n_actor=50, n_twin=10, n_plan=5,
                  patience_swap=2, patience_clone=3,
                  tol_swap=1.0, tol_clone=0.5,
                  lr_twin=0.1, lr_plan=0.1),
    "osc1d": dict(t_horizon=2.0, dt=0.02, n_episodes=5, n_ens=2,
                  n_critic=50, n_actor=50, n_twin=10, n_plan=5,
                  patience_swap=2, patience_clone=3,
                  tol_swap=1.0, tol_clone=0.5,
                  lr_twin=0.1, lr_plan=0.1),
}


def default_config(env, **overrides):
    """RtConfig with the per-system defaults, fields overridable by name."""
    key = env.lower()
    if key == "cryotank":
        key = "cryo"
    if key not in LOOP_DEFAULTS:
        raise ValueError(f"no default configuration for env '{env}'")
    kw = dict(LOOP_DEFAULTS[key])
    kw.update(overrides)
    return RtConfig(env=key, **kw)


# ---------------------------------------------------------------------------
# switch bookkeeping

@dataclasses.dataclass
class SwitchState:
    live: str = "mf"            # policy facing the plant next episode
    c_swap: int = 0
    c_clone: int = 0

    @property
    def idle(self):
        return "mb" if self.live == "mf" else "mf"


def weight_variation(w_new, w_old):
    """Relative weight movement |w_new - w_old| / |w_new|.

    Scale-free (both arguments multiplied by c != 0 leave it unchanged);
    a frozen zero vector counts as zero movement, a vanishing new vector
    with a nonzero old one as infinite.
    """
    num = float(np.linalg.norm(np.asarray(w_new) - np.asarray(w_old)))
    den = float(np.linalg.norm(np.asarray(w_new)))
    if den == 0.0:
        return 0.0 if num == 0.0 else np.inf
    return num / den


def switch_decision(sw, j_live, j_idle, dw_idle, cfg):
    """One evaluation round of the live/idle arbitration, mutating ``sw``.

    The idle policy scores a hit when its twin cost beats the live one by
    the tolerance factor (strictly, so ties favor the incumbent); enough
    consecutive hits swap the roles. Otherwise the idle policy's weight
    movement is checked: enough consecutive near-frozen episodes clone the
    live weights onto it to kick it off a plateau. Swapping resets both
    counters, cloning only its own; a single round never does both.

    Returns "swap", "clone" or None. The caller applies the weight copy.
    """
    if j_idle < cfg.tol_swap * j_live:
        sw.c_swap += 1
        if sw.c_swap > cfg.patience_swap:
            sw.live = sw.idle
            sw.c_swap = 0
            sw.c_clone = 0
            return "swap"
    else:
        sw.c_swap = 0
        if dw_idle < cfg.tol_clone:
            sw.c_clone += 1
            if sw.c_clone > cfg.patience_clone:
                sw.c_clone = 0
                return "clone"
        else:
            sw.c_clone = 0
    return None


# ---------------------------------------------------------------------------
# episode-loop building blocks

def run_real_episode(env, wa, cfg, rng):
    """Sampled-data closed loop on the real system (truth closure).

    Exploration noise is Gaussian per step, sized as a fraction of the
    actuator span; the rollout truncates instead of raising when a wild
    policy drives the state out of the sanity box, so the surviving prefix
    still feeds the buffers.
    """
    t = env.time_grid(cfg.t_horizon, cfg.dt)
    z = env.sample_exo(t, rng)
    s0 = env.sample_s0(rng)
    if env.action_lo is not None:
        span = np.asarray(env.action_hi) - np.asarray(env.action_lo)
    else:
        span = np.ones(env.n_a)
    noise = cfg.noise_frac * span * rng.standard_normal((1, len(t), env.n_a))
    res = rollout(env, s0, z, env.wp_truth, wa=wa, noise=noise,
                  dt=cfg.dt, n_substeps=cfg.n_substeps,
                  on_divergence="truncate")
    return res.traj(0)


def _ensemble_grad(grad_fn, Z):
    """Mean cost/gradient over ensemble members, dropping divergent ones.

    The batched call is the fast path; on divergence each member runs
    alone and the survivors are averaged. Re-raises when nobody survives.
    """
    try:
        return grad_fn(Z)
    except IntegrationError:
        pass
    Js, gs, err = [], [], None
    for j in range(len(Z)):
        try:
            J, g = grad_fn(Z[j:j + 1])
            Js.append(J)
            gs.append(g)
        except IntegrationError as exc:
            err = exc
    if not Js:
        raise err
    if len(Js) < len(Z):
        warnings.warn(f"dropped {len(Z) - len(Js)} divergent ensemble "
                      f"member(s)", RuntimeWarning)
    return float(np.mean(Js)), np.mean(gs, axis=0)


def assimilate_twin(env, wp, memory, ensembles, cfg, opt):
    """Descend the closure weights on the stored real episodes.

    ``memory`` holds (trajectory, exo model) pairs; ``ensembles`` the
    pre-drawn exogenous realizations per pair, fixed for the whole descent
    so the inner optimization is deterministic. Each iterate replays the
    recorded actions from the recorded initial state and averages the
    costate gradient over members and episodes. Returns the new weights
    and the cost trace (leading entry = cost before any step, trailing
    entry = cost after the last).
    """
    trace = []
    wp_ok = wp
    for n in range(cfg.n_twin):
        Js, gs = [], []
        try:
            for (traj, _exo), Z in zip(memory, ensembles):
                J, g = _ensemble_grad(
                    lambda Zs: grad_Jp(env, wp, traj.s[0], Zs, traj.a,
                                       traj.s, dt=cfg.dt,
                                       n_substeps=cfg.n_substeps), Z)
                Js.append(J)
                gs.append(g)
        except IntegrationError:
            warnings.warn("twin iterate cannot replay the recorded episode; "
                          "reverting to the previous weights", RuntimeWarning)
            return wp_ok, trace
        J = float(np.mean(Js))
        trace.append(J)
        if J < cfg.jp_stop:
            return wp, trace
        wp_ok = wp
        wp = opt.step(wp, np.mean(gs, axis=0))
    try:
        J = float(np.mean([twin_Jp(env, wp, traj.s[0], Z, traj.a, traj.s,
                                   dt=cfg.dt, n_substeps=cfg.n_substeps)
                           for (traj, _exo), Z in zip(memory, ensembles)]))
    except IntegrationError:
        return wp_ok, trace
    trace.append(J)
    return wp, trace


def plan_policy(env, wa, wp, s0, Z, cfg, opt):
    """Descend the policy weights through the twin's closed loop.

    A step that lands the policy somewhere the twin cannot integrate is
    undone (the previous iterate evaluated fine) and the episode's
    planning stops there, so the returned weights always admit a rollout.
    """
    trace = []
    wa_ok = wa
    for n in range(cfg.n_plan):
        try:
            J, g = _ensemble_grad(
                lambda Zs: grad_Ja(env, wa, wp, s0, Zs,
                                   dt=cfg.dt, n_substeps=cfg.n_substeps), Z)
        except IntegrationError:
            warnings.warn("planning iterate diverged on the twin; "
                          "reverting to the previous weights", RuntimeWarning)
            return wa_ok, trace
        trace.append(J)
        wa_ok = wa
        wa = opt.step(wa, g)
    try:
        J = _twin_ja_safe(env, wa, wp, s0, Z, cfg)
    except IntegrationError:
        return wa_ok, trace
    trace.append(J)
    return wa, trace


def _twin_ja_safe(env, wa, wp, s0, Z, cfg):
    res = rollout(env, s0, Z, wp, wa=wa, stage_policy=True,
                  dt=cfg.dt, n_substeps=cfg.n_substeps)
    res._wa = np.asarray(wa, dtype=float)
    return float(trapz_cost(env, res, "control").mean())


def eval_policy_cost(env, wa, wp, s0, z, cfg):
    """Policy cost of one virtual episode, tolerant of early divergence.

    A truncated rollout is scored as the quadrature over the surviving
    prefix plus the terminal cost density held constant over the missing
    horizon, so crashing early never scores better than surviving.
    """
    t_full = cfg.t_horizon
    wa = np.asarray(wa, dtype=float)
    res = rollout(env, s0, z[None], wp, wa=wa, stage_policy=True,
                  dt=cfg.dt, n_substeps=cfg.n_substeps,
                  on_divergence="truncate")
    res._wa = wa
    J = float(trapz_cost(env, res, "control")[0])
    t_end = float(res.t[-1])
    if t_end < t_full - 1e-9 * t_full:
        s_end = res.s[:, -1]
        e_end = env.error(np.full(1, t_end), s_end)
        a_end = env.policy(e_end, wa)
        La = float(env.La(np.full(1, t_end), s_end, a_end)[0])
        J += env.ja_scale * La * (t_full - t_end)
    return J


def evaluate_policies(env, wa_live, wa_idle, wp, exo, cfg, rng):
    """Mean twin cost of both policies over shared evaluation episodes.

    Initial conditions and disturbances are drawn once and reused for
    both policies, so the comparison is paired.
    """
    n = cfg.n_eval if cfg.n_eval is not None else cfg.n_ens
    t = env.time_grid(cfg.t_horizon, cfg.dt)
    draws = [(env.sample_s0(rng), exo.sample(t, rng)) for _ in range(n)]
    j_live = np.mean([eval_policy_cost(env, wa_live, wp, s0, z, cfg)
                      for s0, z in draws])
    j_idle = np.mean([eval_policy_cost(env, wa_idle, wp, s0, z, cfg)
                      for s0, z in draws])
    return float(j_live), float(j_idle)


def policy_surface(env, wa, n=41, span=2.0):
    """Tabulate the policy response over a grid of error features.

    The first two error components sweep +-span times their scale; any
    further components sit at zero. The grid is row-major in (axis0,
    axis1); a one-feature policy gets a singleton second axis so the
    output shape is uniform.
    """
    scl = np.ones(env.n_err) if env.err_scale is None else np.asarray(env.err_scale)
    ax0 = np.linspace(-span * scl[0], span * scl[0], n)
    ax1 = (np.linspace(-span * scl[1], span * scl[1], n)
           if env.n_err >= 2 else np.zeros(1))
    E = np.zeros((len(ax0) * len(ax1), env.n_err))
    E[:, 0] = np.repeat(ax0, len(ax1))
    if env.n_err >= 2:
        E[:, 1] = np.tile(ax1, len(ax0))
    A = env.policy(E, np.asarray(wa, dtype=float))
    return {
        "axes": [ax0.tolist(), ax1.tolist()],
        "actions": [A[:, j].reshape(len(ax0), len(ax1)).tolist()
                    for j in range(env.n_a)],
    }


# ---------------------------------------------------------------------------
# artifact plumbing

def _plain(obj):
    """Recursively convert numpy scalars/arrays for JSON serialization."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if not np.isfinite(v):
            return repr(v)
        return v
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def artifact_digest(artifact):
    """sha256 of the canonical serialization, digest field excluded."""
    body = {k: v for k, v in artifact.items() if k != "digest"}
    blob = json.dumps(_plain(body), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def save_artifact(path, artifact):
    artifact = dict(artifact)
    artifact["digest"] = artifact_digest(artifact)
    with open(path, "w") as fh:
        json.dump(_plain(artifact), fh, sort_keys=True, indent=1)
        fh.write("\n")
    return artifact["digest"]


def load_artifact(path):
    with open(path) as fh:
        art = json.load(fh)
    if art.get("schema") != SCHEMA:
        raise ValueError(f"{path}: unknown artifact schema {art.get('schema')!r}")
    return art


# ---------------------------------------------------------------------------
# the loop

class Orchestrator:
    """Owns the mutable training state and runs the episode loop."""

    def __init__(self, cfg):
        env = get_env(cfg.env)
        self.cfg = cfg
        self.env = env
        self.rng = np.random.default_rng(cfg.seed)
        self.wp = env.wp_init(self.rng)
        self.wa = {"mf": env.wa_init().astype(float),
                   "mb": env.wa_init().astype(float).copy()}
        self.sw = SwitchState(live="mf")
        self.mfl = ModelFreeLearner(
            env, gamma=cfg.gamma, n_batch=cfg.n_batch, lr_q=cfg.lr_critic,
            lr_a=cfg.lr_actor, tau=cfg.tau, alpha=cfg.per_alpha,
            capacity=cfg.buffer_cap, rng=self.rng)
        self.opt_twin = Adam(env.n_wp, lr=cfg.lr_twin, scale=env.wp_scale)
        self.opt_plan = Adam(env.n_wa, lr=cfg.lr_plan, scale=env.wa_scale)
        self.memory = deque(maxlen=cfg.n_mem)   # (trajectory, exo model)
        self.records = []
        self.trajs = []

    def _reset_idle_optimizer(self):
        # cloned weights land far from where the old moments were
        # accumulated; stale curvature there does more harm than good
        cfg, env = self.cfg, self.env
        if self.sw.idle == "mb":
            self.opt_plan = Adam(env.n_wa, lr=cfg.lr_plan, scale=env.wa_scale)
        else:
            self.mfl.opt_a = Adam(env.n_wa, lr=cfg.lr_actor, scale=env.wa_scale)

    def episode(self, i):
        cfg, env, rng = self.cfg, self.env, self.rng
        snap = {k: v.copy() for k, v in self.wa.items()}
        live = self.sw.live

        traj = run_real_episode(env, self.wa[live], cfg, rng)
        ret = float(traj.r.sum())
        ja_real = float(env.ja_scale * np.trapezoid(
            env.La(traj.t, traj.s, traj.a), traj.t))
        self.mfl.record_episode(traj)
        self.wa["mf"] = self.mfl.train(self.wa["mf"], cfg.n_critic, cfg.n_actor)

        rec = {"episode": i, "live": live, "return": ret, "ja_real": ja_real,
               "n_t": traj.n_t, "truncated": traj.n_t < int(round(
                   cfg.t_horizon / cfg.dt)) + 1}

        if traj.n_t >= 4:
            exo = ExoModel().fit(traj.t, traj.z)
            self.memory.append((traj, exo))
        if self.memory:
            ensembles = [np.stack([e.sample(tr.t, rng)
                                   for _ in range(cfg.n_ens)])
                         for tr, e in self.memory]
            self.wp, jp_trace = assimilate_twin(
                env, self.wp, self.memory, ensembles, cfg, self.opt_twin)
            tr_last, exo_last = self.memory[-1]
            self.wa["mb"], ja_trace = plan_policy(
                env, self.wa["mb"], self.wp, tr_last.s[0], ensembles[-1], cfg,
                self.opt_plan)
            j_live, j_idle = evaluate_policies(
                env, self.wa[self.sw.live], self.wa[self.sw.idle], self.wp,
                exo_last, cfg, rng)
            dw_idle = weight_variation(self.wa[self.sw.idle],
                                       snap[self.sw.idle])
            event = switch_decision(self.sw, j_live, j_idle, dw_idle, cfg)
            if event == "clone":
                self.wa[self.sw.idle] = self.wa[self.sw.live].copy()
                self._reset_idle_optimizer()
            rec.update(jp0=jp_trace[0] if jp_trace else None,
                       jp=jp_trace[-1] if jp_trace else None,
                       jp_trace=jp_trace, ja_trace=ja_trace,
                       j_live=j_live, j_idle=j_idle, dw_idle=dw_idle,
                       event=event)
        else:
            # nothing usable was recorded; keep the twin and planner as-is
            rec.update(jp0=None, jp=None, jp_trace=[], ja_trace=[],
                       j_live=None, j_idle=None, dw_idle=None, event=None)

        rec.update(live_next=self.sw.live,
                   wp=self.wp.tolist(),
                   wa_mf=self.wa["mf"].tolist(),
                   wa_mb=self.wa["mb"].tolist())
        self.records.append(rec)
        self.trajs.append(traj)
        return rec

    def run(self):
        for i in range(self.cfg.n_episodes):
            self.episode(i)
        return self.artifact()

    def artifact(self):
        env = self.env
        surfaces = [
            {"policy": tag, "weights": self.wa[tag].tolist(),
             **policy_surface(env, self.wa[tag])}
            for tag in ("mf", "mb")]
        art = {
            "schema": SCHEMA,
            "env": env.name,
            "seed": self.cfg.seed,
            "config": self.cfg.to_dict(),
            "wp_truth": None if env.wp_truth is None else
                        np.asarray(env.wp_truth).tolist(),
            "wp_final": self.wp.tolist(),
            "live_final": self.sw.live,
            "episodes": _plain(self.records),
            "surfaces": surfaces,
        }
        art["digest"] = artifact_digest(art)
        return art


def run_experiment(cfg, out_dir=None):
    """Run the full episode loop; optionally persist artifact + episodes.

    With ``out_dir`` given, writes ``<out>/<env>/<seed>/artifact.json``
    and one ``episode_<i>.csv`` per real episode. Returns the artifact.
    """
    orch = Orchestrator(cfg)
    art = orch.run()
    if out_dir is not None:
        run_dir = os.path.join(out_dir, cfg.env, str(cfg.seed))
        os.makedirs(run_dir, exist_ok=True)
        save_artifact(os.path.join(run_dir, "artifact.json"), art)
        for i, traj in enumerate(orch.trajs):
            save_episode_csv(os.path.join(run_dir, f"episode_{i}.csv"), traj)
    return art
