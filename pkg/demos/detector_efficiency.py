"""What imperfect detectors do to the heralded state.

With every photon accounted for, the state inside a heralding window is
pinned at the Bell state |+i>: missing information is the only thing
that can degrade it.  Once the left counter misses a fraction of the
clicks, the conditional state must hedge between "still entangled" and
"already decayed", so the |+i> population inside windows sags over time
at a rate set by the loss.  This script runs the finite-efficiency
engine at several left-detector efficiencies and plots the pooled
in-window |+i> population against time since the opening click.
"""

import pathlib

import numpy as np

from bellherald.charts import render_series
from bellherald.entangle import GG
from bellherald.model import ModelParams, build_operators
from bellherald.trajectories import run_sme_batch

OUT = pathlib.Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

ops = build_operators(ModelParams(alpha_mag=100.0))
rho0 = np.outer(GG, GG.conj())
edges = np.arange(0.0, 2.01, 0.1)
centers = 0.5 * (edges[:-1] + edges[1:])

series = []
for eta_l in (1.0, 0.95, 0.8):
    res = run_sme_batch(ops, rho0, 6.0, 1.25e-4, 20260819, range(24), eta_l, 1.0, sample_stride=80)
    rel_t, pop = [], []
    for b, events in enumerate(res.jump_events):
        birth = None
        for e in events:
            if e.channel != "left":
                continue
            odd = e.post_state_fidelity_plus_i > 0.5
            if birth is not None:
                inside = (res.times >= birth.time) & (res.times < e.time)
                rel_t.append(res.times[inside] - birth.time)
                pop.append(res.populations[b, inside, 1])
                birth = e if odd else None
            elif odd:
                birth = e
    rel_t = np.concatenate(rel_t)
    pop = np.concatenate(pop)
    slope = np.polyfit(rel_t, pop, 1)[0]
    binned = np.full(centers.shape, np.nan)
    for i in range(len(centers)):
        sel = (rel_t >= edges[i]) & (rel_t < edges[i + 1])
        if sel.any():
            binned[i] = pop[sel].mean()
    series.append((f"eta_L = {eta_l:g} (slope {slope:+.3f})", binned))
    print(f"eta_L = {eta_l:4g}: {len(pop):6d} in-window samples, decay slope {slope:+.4f} per 1/Gamma")

keep = ~np.isnan(series[0][1])
path = render_series(
    OUT / "detector_efficiency.svg",
    "in-window |+i> population vs time since herald",
    centers[keep],
    [(label, y[keep]) for label, y in series],
)
print(f"wrote {path}")
print("\nAt eta_L = 1 the window state holds its entanglement; every missed")
print("click turns certainty into hedging and the population decays.")
