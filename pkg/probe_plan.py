"""Scratch probe: planner descent on a truth-weight twin, per env.

usage: python3 probe_plan.py <env> <lr1,lr2> <rounds> [seeds]
Each round runs cfg.n_plan planner iterations (one episode's budget)
with a persistent Adam state, then scores the planned policy on the
real system with a fresh exogenous draw.
"""
import sys
import time
import warnings

import numpy as np

from twincontrol.adjoint import trapz_cost
from twincontrol.envs import get_env
from twincontrol.exomodels import ExoModel
from twincontrol.optim import Adam
from twincontrol.orchestrator import default_config, plan_policy, run_real_episode
from twincontrol.simcore import rollout

env_name = sys.argv[1]
lrs = [float(x) for x in sys.argv[2].split(",")]
rounds = int(sys.argv[3])
seeds = [int(x) for x in (sys.argv[4].split(",") if len(sys.argv) > 4 else ["0"])]

for seed in seeds:
    for lr in lrs:
        env = get_env(env_name)
        cfg = default_config(env_name, lr_plan=lr)
        rng = np.random.default_rng(seed)
        traj = run_real_episode(env, env.wa_init(), cfg, rng)
        exo = ExoModel().fit(traj.t, traj.z)
        Z = np.stack([exo.sample(traj.t, rng) for _ in range(cfg.n_ens)])
        wa = env.wa_init().astype(float)
        opt = Adam(env.n_wa, lr=lr, scale=getattr(env, "wa_scale", None))
        wp = env.wp_truth
        t0 = time.time()
        first = last = None
        with warnings.catch_warnings(record=True) as wrec:
            warnings.simplefilter("always")
            for r in range(rounds):
                wa, tr = plan_policy(env, wa, wp, traj.s[0], Z, cfg, opt)
                if tr:
                    if first is None:
                        first = tr[0]
                    last = tr[-1]
        # real-system score of the planned policy, fresh draw
        t = env.time_grid(cfg.t_horizon, cfg.dt)
        z = env.sample_exo(t, rng)
        res = rollout(env, env.sample_s0(rng), z, env.wp_truth, wa=wa,
                      stage_policy=True, dt=cfg.dt, n_substeps=cfg.n_substeps,
                      on_divergence="truncate")
        res._wa = wa
        ja_real = float(trapz_cost(env, res, "control").mean()) \
            if res.t.shape[0] == t.shape[0] else np.inf
        print(f"seed {seed} lr {lr:g}: Ja0={first:.5g} Ja_end={last:.5g} "
              f"real={ja_real:.5g} warn={len(wrec)} t={time.time()-t0:.1f}s")
        print("   wa", np.round(wa, 4))
