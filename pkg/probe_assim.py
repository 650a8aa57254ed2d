"""Tune lr_twin: single-episode assimilation at full per-env settings."""
import sys
import time
import warnings

import numpy as np

from twincontrol.envs import get_env
from twincontrol.exomodels import ExoModel
from twincontrol.optim import Adam
from twincontrol.orchestrator import (RtConfig, assimilate_twin,
                                      default_config, run_real_episode)

env_name = sys.argv[1]
lrs = [float(v) for v in sys.argv[2].split(",")]
seeds = [int(v) for v in sys.argv[3].split(",")] if len(sys.argv) > 3 else [0]

cfg = default_config(env_name)
env = get_env(env_name)
for seed in seeds:
    rng = np.random.default_rng(seed)
    wa0 = env.wa_init()
    traj = run_real_episode(env, wa0, cfg, rng)
    exo = ExoModel().fit(traj.t, traj.z)
    Z = np.stack([exo.sample(traj.t, rng) for _ in range(cfg.n_ens)])
    wp0 = env.wp_init(rng)
    for lr in lrs:
        t0 = time.time()
        opt = Adam(env.n_wp, lr=lr, scale=env.wp_scale)
        with warnings.catch_warnings(record=True) as ws:
            warnings.simplefilter("always")
            wp, tr = assimilate_twin(env, wp0.copy(), [(traj, exo)], [Z],
                                     cfg, opt)
        red = tr[-1] / tr[0] if len(tr) >= 2 else float("nan")
        print(f"seed {seed} lr {lr:g}: J0={tr[0]:.4g} Jend={tr[-1]:.4g} "
              f"red={red:.3e} iters={len(tr)} warn={len(ws)} "
              f"t={time.time()-t0:.1f}s")
        if env_name == "fwmav":
            print("   wp", np.round(wp, 4), "truth", env.wp_truth)
