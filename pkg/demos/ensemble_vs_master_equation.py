"""Averaged trajectories reproduce the deterministic evolution.

Single records are wild: clicks, noise, collapse.  But the ensemble
average over records must land back on the master equation, and this is
the workhorse cross-check for every stochastic engine in the package.
Here the photon-counting unraveling runs at moderate drive, its mean is
overlaid on the deterministic solution, and the built-in consistency
gate (every population within three standard errors at every sampled
time) is evaluated the same way `bellherald check` does it.
"""

import pathlib

import numpy as np

from bellherald.charts import render_series
from bellherald.ensemble import RunConfig, consistency_check, run_ensemble
from bellherald.entangle import GG, populations
from bellherald.lindblad import integrate_me
from bellherald.model import ModelParams, build_operators

OUT = pathlib.Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

cfg = RunConfig(
    engine="jump", alpha=5.0, t_end=3.0, dt=2.5e-4, sample_stride=200,
    n_traj=512, seed=20260819, workers=1,
)
stats = run_ensemble(cfg, write_outputs=False)

ops = build_operators(ModelParams(alpha_mag=cfg.alpha))
_, rhos = integrate_me(ops, np.outer(GG, GG.conj()), cfg.t_end, cfg.dt, sample_stride=cfg.sample_stride)
me_pops = np.array([populations(r) for r in rhos])

worst = np.abs(stats.mean_populations - me_pops).max()
print(f"jump unraveling, alpha=5, N={cfg.n_traj}: max |ensemble mean - deterministic| = {worst:.3e}")

report = consistency_check(cfg)
print(
    f"consistency gate: {'PASS' if report.passed else 'FAIL'} "
    f"(max ratio {report.max_ratio:.2f} of 3 allowed, at t={report.time_at_max:g}, entry {report.entry_at_max})"
)

path = render_series(
    OUT / "ensemble_vs_me.svg",
    f"N={cfg.n_traj} click-record average vs deterministic solution",
    stats.times,
    [
        ("pop |ee>, ensemble", stats.mean_populations[:, 0]),
        ("pop |ee>, deterministic", me_pops[:, 0]),
        ("pop |gg>, ensemble", stats.mean_populations[:, 3]),
        ("pop |gg>, deterministic", me_pops[:, 3]),
    ],
)
print(f"wrote {path}")
