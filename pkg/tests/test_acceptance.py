"""End-to-end physics acceptance checks.

Each test prints one PASS/FAIL line (plus per-clause detail) and asserts
every clause at its pinned tolerance.  Three clauses are expected to fail:
they probe regimes where the model itself sets a floor above the pinned
bound, and the measured numbers plus the mechanism are printed rather
than the bounds being loosened.  All runs are seeded and deterministic.
"""

import time

import numpy as np
import pytest
from scipy.linalg import expm

from conftest import random_density, random_state
from bellherald.ensemble import RunConfig, consistency_check, run_ensemble
from bellherald.entangle import (
    EE,
    GG,
    MINUS_I,
    PHI_MINUS,
    PHI_PLUS,
    PLUS_I,
    PSI_MINUS,
    PSI_PLUS,
    concurrence,
    entropy,
    eof,
)
from bellherald.lindblad import g2_left, jump_form_apply, liouvillian_apply, steady_state, superoperator_matrix
from bellherald.model import ModelParams, build_operators, derive_rates
from bellherald.trajectories import (
    hqq_suppression_check,
    run_diffusive_sse,
    run_sme,
    run_sme_batch,
)

SEED = 20260819


def _report(name, clauses):
    """Print one PASS/FAIL line plus a detail line per clause, then assert."""
    ok = all(good for _, good, _ in clauses)
    print(f"\n[acceptance] {name}: {'PASS' if ok else 'FAIL'}")
    for label, good, detail in clauses:
        print(f"  {'ok  ' if good else 'FAIL'} {label}: {detail}")
    assert ok, f"{name}: " + "; ".join(label for label, good, _ in clauses if not good)


def test_decay_rate_formulas():
    t0 = time.perf_counter()
    worst = 0.0
    for g in (0.05, 0.1, 0.28209479177387814, 0.7):
        for kl in (0.0, np.pi / 6, np.pi / 2, 2.0, np.pi):
            r = derive_rates(ModelParams(g=g, kl=kl))
            gsq = g * g
            worst = max(
                worst,
                abs(r.gamma - 4 * np.pi * gsq),
                abs(r.gamma12 - 4 * np.pi * gsq * np.cos(kl)),
                abs(r.omega - 2 * np.pi * gsq * np.sin(kl)),
            )
    el = time.perf_counter() - t0
    _report(
        "decay-rate formulas",
        [
            ("20-point (g, kl) grid vs closed forms", worst <= 1e-12, f"max dev {worst:.2e} (tol 1e-12)"),
            ("runtime < 1 s", el < 1.0, f"{el:.3f} s"),
        ],
    )


def test_liouvillian_routes_agree():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    worst_jump = worst_mat = 0.0
    for kl in (np.pi / 2, 1.0, 2.5):
        params = ModelParams(alpha_mag=30.0, kl=kl)
        ops = build_operators(params)
        lmat = superoperator_matrix(ops)
        tol_scale = derive_rates(params).gamma
        for _ in range(34):
            rho = random_density(rng)
            via_rates = liouvillian_apply(ops, rho)
            via_jumps = jump_form_apply(ops, rho)
            via_matrix = (lmat @ rho.reshape(16)).reshape(4, 4)
            worst_jump = max(worst_jump, np.abs(via_rates - via_jumps).max() / tol_scale)
            worst_mat = max(worst_mat, np.abs(via_rates - via_matrix).max() / tol_scale)
    el = time.perf_counter() - t0
    _report(
        "generator route agreement",
        [
            ("individual-rate form vs collective-jump form, 102 states", worst_jump <= 1e-10,
             f"max dev {worst_jump:.2e} x Gamma (tol 1e-10)"),
            ("assembled superoperator route", worst_mat <= 1e-10, f"max dev {worst_mat:.2e} x Gamma"),
            ("runtime < 1 s", el < 1.0, f"{el:.3f} s"),
        ],
    )


def test_steady_state_approaches_maximal_mixture():
    t0 = time.perf_counter()
    alphas = (25.0, 50.0, 100.0, 200.0)
    devs, concs, offdiags = [], [], []
    eye4 = np.eye(4) / 4
    for a in alphas:
        rho = steady_state(build_operators(ModelParams(alpha_mag=a)))
        devs.append(np.abs(rho - eye4).max())
        concs.append(concurrence(rho))
        offdiags.append(np.abs(rho - np.diag(np.diag(rho))).max())
    el = time.perf_counter() - t0
    decreasing = all(devs[i + 1] < devs[i] for i in range(3))
    # The max element is the drive coherence, first order in Gamma/(g alpha):
    # measured 2.35e-2 at alpha = 25, exact 1/alpha scaling.  The 1e-2 bound
    # is attainable only by the (second-order) population deviation, so this
    # clause documents a floor rather than a defect of the solver; the solve
    # itself is verified against long-time integration elsewhere.
    _report(
        "steady state approaches the maximal mixture",
        [
            ("max deviation from I/4 at alpha=25 <= 1e-2", devs[0] <= 1e-2,
             f"devs {[f'{d:.3e}' for d in devs]} (expected floor ~2.35e-2, first order in 1/alpha)"),
            ("deviation strictly decreasing in alpha", decreasing, f"{[f'{d:.3e}' for d in devs]}"),
            ("concurrence <= 1e-6 at every alpha", max(concs) <= 1e-6, f"max {max(concs):.2e}"),
            ("off-diagonals within the deviation bound",
             all(o <= d + 1e-15 for o, d in zip(offdiags, devs)),
             f"max off-diag {max(offdiags):.3e}"),
            ("runtime < 5 s", el < 5.0, f"{el:.3f} s"),
        ],
    )


def test_heralded_window_quality_at_defaults():
    t0 = time.perf_counter()
    cfg = RunConfig(
        engine="diffusive", alpha=100.0, t_end=20.0, dt=5e-5, sample_stride=200,
        n_traj=128, seed=SEED, workers=1,
    )
    stats = run_ensemble(cfg, write_outputs=False)
    el = time.perf_counter() - t0
    bf = stats.birth_fidelities
    n_bad = int((bf < 0.999).sum())
    # The exchange transient after the opening click spans ~1/(2 g alpha)
    # = 0.018 time units; the first two sampled points per window cover it.
    mask = stats.window_rel_t >= 2 * cfg.dt * cfg.sample_stride
    ent = stats.window_entanglement[mask]
    n_low = int((ent < 0.98).sum())
    dur = stats.mean_window_duration
    # Clauses 1-2 probe a physical floor: homodyne backaction noise pumps a
    # stationary |+i> residual (~1.2e-4 at alpha=100, scaling 1/alpha^2,
    # dt-independent), so clicks firing near nodes of the |ee> amplitude
    # land below 0.999 and seed partially contaminated windows.
    _report(
        "heralded Bell windows at defaults",
        [
            ("every window-opening click lands >= 0.999 on |+i>", n_bad == 0,
             f"{n_bad}/{len(bf)} below (min {bf.min():.4f}, median {np.median(bf):.6f})"),
            ("in-window entanglement >= 0.98 beyond the opening transient", n_low == 0,
             f"{n_low}/{mask.sum()} below ({(ent >= 0.98).mean() * 100:.2f}% pass)"),
            ("mean window duration within 10% of the lifetime 1/Gamma", abs(dur - 1.0) <= 0.1,
             f"{dur:.4f} over {stats.n_windows} windows"),
            ("at least 500 closed windows pooled", stats.n_windows >= 500, f"{stats.n_windows}"),
        ],
    )
    print(f"  [{el:.0f} s]")


def test_trajectory_ensembles_match_master_equation():
    t0 = time.perf_counter()
    base = dict(t_end=4.0, n_traj=2000, seed=SEED, workers=1)
    runs = [
        ("jump alpha=5", RunConfig(engine="jump", alpha=5.0, dt=1e-4, sample_stride=5000, **base)),
        ("diffusive alpha=100", RunConfig(engine="diffusive", alpha=100.0, dt=6.25e-5, sample_stride=8000, **base)),
        ("sme eta=0", RunConfig(engine="sme", alpha=100.0, eta_l=0.0, eta_r=0.0, dt=1.25e-4, sample_stride=4000, **base)),
        ("sme eta=0.5", RunConfig(engine="sme", alpha=100.0, eta_l=0.5, eta_r=0.5, dt=6.25e-5, sample_stride=8000, **base)),
        ("sme eta=0.95", RunConfig(engine="sme", alpha=100.0, eta_l=0.95, eta_r=0.95, dt=6.25e-5, sample_stride=8000, **base)),
        ("sme eta=1", RunConfig(engine="sme", alpha=100.0, eta_l=1.0, eta_r=1.0, dt=6.25e-5, sample_stride=8000, **base)),
    ]
    clauses = []
    for label, cfg in runs:
        rep = consistency_check(cfg)
        clauses.append(
            (f"{label}: mean within 3 SE of the deterministic solution", rep.passed,
             f"max ratio {rep.max_ratio:.3f} at t={rep.time_at_max:g} entry {rep.entry_at_max}")
        )
    el = time.perf_counter() - t0
    _report("trajectory ensembles reproduce the deterministic evolution", clauses)
    print(f"  [{el:.0f} s]")


def test_full_efficiency_sme_matches_pure_unraveling(ops_strong):
    t0 = time.perf_counter()
    sse = run_diffusive_sse(ops_strong, GG, 4.0, 1.25e-4, SEED, sample_stride=10)
    sme = run_sme(ops_strong, np.outer(GG, GG.conj()), 4.0, 1.25e-4, SEED, 1.0, 1.0, sample_stride=10)
    outer = sse.states[:, :, None] * sse.states.conj()[:, None, :]
    dev = np.abs(sme.states - outer).max()
    el = time.perf_counter() - t0
    _report(
        "perfect-efficiency conditional state is the pure projector",
        [
            ("rho_s = |psi><psi| along the full trajectory", dev <= 1e-6, f"max dev {dev:.2e} (tol 1e-6)"),
            ("same click record", [e.time for e in sme.jump_events] == [e.time for e in sse.jump_events],
             f"{len(sme.jump_events)} clicks"),
            ("runtime < 60 s", el < 60.0, f"{el:.1f} s"),
        ],
    )


def test_partial_detection_heralding(ops_strong):
    t0 = time.perf_counter()
    rho0 = np.outer(GG, GG.conj())
    # Left detector only: no homodyne record on the transmitted beam.
    res = run_sme_batch(ops_strong, rho0, 10.0, 1.25e-4, SEED, range(64), 1.0, 0.0, sample_stride=80)
    births = np.array([
        e.post_entanglement
        for events in res.jump_events
        for e in events
        if e.channel == "left" and e.post_state_fidelity_plus_i > 0.5
    ])
    mean_dev = abs(births.mean() - 1.0)

    # Lossy left detector: missed clicks degrade the window state over time.
    res = run_sme_batch(ops_strong, rho0, 10.0, 1.25e-4, SEED, range(48), 0.95, 1.0, sample_stride=80)
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
    slope = np.polyfit(np.concatenate(rel_t), np.concatenate(pop), 1)[0]
    el = time.perf_counter() - t0
    # The first clause has a physical floor: without the homodyne record the
    # conditional state keeps the exchange-leak |+i> population (~1e-4), and
    # formation-entanglement concavity turns contamination x into a loss
    # ~ x log2(1/x), about 3e-3 at alpha = 100.
    _report(
        "heralding under partial detection",
        [
            ("left-only operation: mean herald-time entanglement = 1 within 1e-3", mean_dev <= 1e-3,
             f"|mean-1| = {mean_dev:.2e} over {len(births)} heralds (median {np.median(births):.5f}, min {births.min():.4f})"),
            ("lossy left detector: in-window |+i> population decays", slope < 0.0, f"fit slope {slope:.4f}"),
            ("runtime < 60 s", el < 60.0, f"{el:.1f} s"),
        ],
    )


def test_reflected_g2_anchors(ops_strong):
    t0 = time.perf_counter()
    tau = np.arange(0, 20.0 + 1e-12, 2e-3)
    curve = g2_left(ops_strong, tau)
    v = curve.values
    short = v[tau <= 5.0 + 1e-12]
    # Oscillation frequency from parabolic-refined maxima spacing on [0.05, 2.5].
    lo, hi = np.searchsorted(tau, (0.05, 2.5))
    w = v[lo:hi]
    idx = np.flatnonzero((w[1:-1] > w[:-2]) & (w[1:-1] >= w[2:])) + 1 + lo
    peaks = []
    for i in idx:
        a, b, c = v[i - 1], v[i], v[i + 1]
        peaks.append(tau[i] + 0.5 * (a - c) / (a - 2 * b + c) * 2e-3)
    omega = 2 * np.pi / np.mean(np.diff(peaks))
    params = ops_strong.params
    omega_drive = 2 * params.g * params.alpha_mag
    el = time.perf_counter() - t0
    _report(
        "reflected-photon correlation anchors",
        [
            ("g2(0) = 1 within 2e-2", abs(v[0] - 1.0) <= 2e-2, f"{v[0]:.6f}"),
            ("bounded by 2.02 out to tau = 5/Gamma", short.max() <= 2.02, f"max {short.max():.4f}"),
            ("oscillates at the drive frequency 2 g |alpha| within 5%",
             abs(omega - omega_drive) <= 0.05 * omega_drive,
             f"{omega:.3f} vs {omega_drive:.3f} ({abs(omega / omega_drive - 1) * 100:.2f}% off)"),
            ("g2(20) = 1 within 2e-2", abs(v[-1] - 1.0) <= 2e-2, f"{v[-1]:.6f}"),
            ("runtime < 30 s", el < 30.0, f"{el:.1f} s"),
        ],
    )


def test_entanglement_measure_identities():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    worst_pure = max(
        abs(eof(np.outer(psi, psi.conj())) - entropy(psi))
        for psi in (random_state(rng) for _ in range(1000))
    )
    worst_werner = 0.0
    for p in np.linspace(0.0, 1.0, 21):
        rho = p * np.outer(PSI_MINUS, PSI_MINUS.conj()) + (1 - p) * np.eye(4) / 4
        worst_werner = max(worst_werner, abs(concurrence(rho) - max(0.0, (3 * p - 1) / 2)))

    bell = (PHI_PLUS, PHI_MINUS, PSI_PLUS, PSI_MINUS)
    local = (EE, GG, PLUS_I, MINUS_I)
    recon = max(
        np.abs(sum(np.outer(s, s.conj()) for s in ens) / 4 - np.eye(4) / 4).max()
        for ens in (bell, local)
    )
    s_bell = np.mean([entropy(s) for s in bell])
    s_local = np.mean([entropy(s) for s in local])
    el = time.perf_counter() - t0
    _report(
        "entanglement measure identities",
        [
            ("pure states: formation equals entropy (1000 draws)", worst_pure <= 1e-7, f"max dev {worst_pure:.2e}"),
            ("Werner concurrence max(0,(3p-1)/2)", worst_werner <= 1e-8, f"max dev {worst_werner:.2e}"),
            ("both unravelings reconstruct I/4", recon <= 1e-12, f"max dev {recon:.2e}"),
            ("Bell ensemble mean entanglement 1", abs(s_bell - 1.0) <= 1e-12, f"{s_bell}"),
            ("local ensemble mean entanglement 1/2", abs(s_local - 0.5) <= 1e-12, f"{s_local}"),
            ("runtime < 10 s", el < 10.0, f"{el:.3f} s"),
        ],
    )


def test_exchange_leakage_suppression():
    t0 = time.perf_counter()
    params = ModelParams()
    leaks = hqq_suppression_check(params, [50.0, 100.0, 200.0])
    vals = [leak for _, leak in leaks]
    off = max(leak for _, leak in hqq_suppression_check(params, [50.0, 100.0], exchange_on=False))

    ops = build_operators(params)
    gsq = params.g * params.g
    worst_law = 0.0
    for step in (1e-3, 2e-3, 5e-3, 8e-3, 1e-2):
        u = expm(-1j * ops.h_exchange * step)
        transfer = abs(MINUS_I.conj() @ u @ PLUS_I) ** 2
        worst_law = max(worst_law, abs(transfer - np.sin(2 * np.pi * gsq * step) ** 2))
    el = time.perf_counter() - t0
    _report(
        "drive suppression of the coherent exchange",
        [
            ("per-window leakage non-increasing in alpha", all(vals[i + 1] <= vals[i] for i in range(2)),
             f"{[f'{x:.2e}' for x in vals]}"),
            ("short-time transfer law sin^2(2 pi g^2 dt) to 1e-6", worst_law <= 1e-6, f"max dev {worst_law:.2e}"),
            ("no leakage with the exchange term removed", off <= 1e-8, f"{off:.2e}"),
            ("runtime < 60 s", el < 60.0, f"{el:.1f} s"),
        ],
    )
