"""Stochastic engines: forced-noise unit checks, determinism, scalar vs
batch replay, and the cross-engine equivalences that pin the unraveling
contracts (efficiency-one projector identity, efficiency-zero reduction
to the master equation)."""

import math

import numpy as np
import pytest

from bellherald.entangle import EE, GG, PLUS_I
from bellherald.errors import GuardError, PreconditionError
from bellherald.lindblad import dt_max, integrate_me
from bellherald.model import ModelParams, build_operators
from bellherald.trajectories import (
    diffusive_plan,
    hqq_suppression_check,
    jump_plan,
    run_diffusive_sse,
    run_diffusive_sse_batch,
    run_jump_sse,
    run_jump_sse_batch,
    run_sme,
    run_sme_batch,
    sme_plan,
    step_diffusive_sse,
    step_jump_sse,
    step_sme,
    trajectory_rng,
)


class QueueRng:
    """Hand-scripted noise: uniforms served from a queue, normals fixed."""

    def __init__(self, uniforms, normal=0.0):
        self._u = list(uniforms)
        self._normal = normal

    def random(self, size=None):
        if size is None:
            return self._u.pop(0)
        shape = (size,) if isinstance(size, int) else tuple(size)
        flat = [self._u.pop(0) for _ in range(int(np.prod(shape)))]
        return np.array(flat).reshape(shape)

    def standard_normal(self, size=None):
        if size is None:
            return self._normal
        return np.full(size, self._normal)


class NoClickRng:
    """Real Gaussian increments, but the click uniform never fires."""

    def __init__(self, seed):
        self._g = np.random.default_rng(seed)

    def random(self, size=None):
        return 1.0 - 1e-12 if size is None else np.full(size, 1.0 - 1e-12)

    def standard_normal(self, size=None):
        return self._g.standard_normal(size)


# ---------------------------------------------------------------------------
# rng protocol


def test_trajectory_rng_reproducible_and_independent():
    a = trajectory_rng(42, 7).random(8)
    b = trajectory_rng(42, 7).random(8)
    c = trajectory_rng(42, 8).random(8)
    d = trajectory_rng(43, 7).random(8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_trajectory_rng_range_checks():
    for seed, idx in ((-1, 0), (0, -1), (2**64, 0), (0, 2**64)):
        with pytest.raises(PreconditionError):
            trajectory_rng(seed, idx)


# ---------------------------------------------------------------------------
# plan guards


def test_jump_plan_rejects_large_step_at_strong_drive(ops_strong):
    with pytest.raises(GuardError, match="reduce dt to <="):
        jump_plan(ops_strong, 1e-4)


def test_diffusive_plan_guards(ops_strong, ops_weak):
    with pytest.raises(GuardError, match="strong_drive_guard=False"):
        diffusive_plan(ops_weak, 1e-4)
    # override is honored
    diffusive_plan(ops_weak, 1e-4, strong_drive_guard=False)
    with pytest.raises(GuardError, match="dt_max"):
        diffusive_plan(ops_strong, 1e-3)
    with pytest.raises(PreconditionError):
        diffusive_plan(ops_strong, -1e-4)


def test_sme_plan_rejects_bad_efficiency(ops_strong):
    dt = 1e-4
    with pytest.raises(PreconditionError, match="eta_l"):
        sme_plan(ops_strong, dt, 1.2, 1.0)
    with pytest.raises(PreconditionError, match="eta_r"):
        sme_plan(ops_strong, dt, 1.0, -0.1)


def test_step_sme_plan_efficiency_mismatch(ops_strong):
    plan = sme_plan(ops_strong, 1e-4, 1.0, 1.0)
    rho = np.outer(GG, GG.conj())
    with pytest.raises(PreconditionError, match="efficienc"):
        step_sme(ops_strong, rho, 1e-4, QueueRng([0.5]), 0.5, 1.0, plan=plan)


def test_run_rejects_sub_step_horizon(ops_weak):
    with pytest.raises(PreconditionError):
        run_jump_sse(ops_weak, GG, 1e-6, 1e-3, 1)


# ---------------------------------------------------------------------------
# forced clicks through scripted noise


def test_forced_left_click_lands_on_heralded_bell_state(ops_strong):
    dt = 1e-5
    psi, events = step_jump_sse(ops_strong, EE, dt, QueueRng([0.0, 1.0]))
    assert len(events) == 1
    evt = events[0]
    assert evt.channel == "left"
    assert evt.time == dt
    assert abs(abs(np.vdot(PLUS_I, psi)) ** 2 - 1.0) < 1e-12
    assert abs(evt.post_state_fidelity_plus_i - 1.0) < 1e-12
    assert abs(evt.post_entanglement - 1.0) < 1e-12
    assert evt.pre_state_fidelity_plus_i < 1e-12


def test_forced_left_click_from_bell_state_exits_to_ground(ops_strong):
    dt = 1e-5
    psi, events = step_jump_sse(ops_strong, PLUS_I, dt, QueueRng([0.0, 1.0]))
    assert events[0].channel == "left"
    assert abs(abs(np.vdot(GG, psi)) ** 2 - 1.0) < 1e-12
    assert abs(events[0].pre_state_fidelity_plus_i - 1.0) < 1e-12
    assert abs(events[0].post_state_fidelity_gg - 1.0) < 1e-12


def test_uniform_order_is_left_then_right(ops_weak):
    # the first drawn uniform gates the left channel: with (0, 1) the left
    # detector fires, with (1, 0) the right one does
    dt = 1e-4
    _, events = step_jump_sse(ops_weak, EE, dt, QueueRng([0.0, 1.0]))
    assert [e.channel for e in events] == ["left"]
    _, events = step_jump_sse(ops_weak, EE, dt, QueueRng([1.0, 0.0]))
    assert [e.channel for e in events] == ["right"]


def test_simultaneous_clicks_apply_left_then_right(ops_weak):
    dt = 1e-4
    psi, events = step_jump_sse(ops_weak, EE, dt, QueueRng([0.0, 0.0]))
    assert [e.channel for e in events] == ["left", "right"]
    ops = ops_weak
    phi = ops.j_left @ np.asarray(EE)
    phi = ops.j_right_op @ phi + ops.j_right_offset * phi
    phi = phi / np.linalg.norm(phi)
    assert np.max(np.abs(psi - phi)) < 1e-12


def test_diffusive_step_returns_exact_increment(ops_strong):
    dt = 1e-4
    psi, dxi, clicked = step_diffusive_sse(
        ops_strong, GG, dt, QueueRng([1.0], normal=1.5)
    )
    assert not clicked
    assert dxi == 1.5 * math.sqrt(dt)
    assert abs(np.linalg.norm(psi) - 1.0) < 1e-12


def test_dark_state_pinned_under_no_click_flow():
    # with the exchange term disabled |+i> is an exact eigenvector of the
    # no-click drift and the diffusion operator annihilates it, so noisy
    # no-click evolution cannot move it
    ops = build_operators(ModelParams(alpha_mag=100.0), exchange_on=False)
    dt = 1.25e-4
    plan = diffusive_plan(ops, dt)
    rng = NoClickRng(3)
    psi = PLUS_I.copy()
    for _ in range(2000):
        psi, _, clicked = step_diffusive_sse(ops, psi, dt, rng, plan=plan)
        assert not clicked
    assert abs(abs(np.vdot(PLUS_I, psi)) ** 2 - 1.0) < 1e-8


# ---------------------------------------------------------------------------
# full-run determinism and structure


def test_run_jump_sse_deterministic(ops_weak):
    a = run_jump_sse(ops_weak, GG, 1.0, 1e-3, 99, sample_stride=100)
    b = run_jump_sse(ops_weak, GG, 1.0, 1e-3, 99, sample_stride=100)
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.norms, b.norms)
    assert a.jump_events == b.jump_events
    c = run_jump_sse(ops_weak, GG, 1.0, 1e-3, 99, traj_index=1, sample_stride=100)
    assert not np.array_equal(a.states, c.states)


def test_run_diffusive_sse_record_structure(ops_strong):
    rec = run_diffusive_sse(ops_strong, GG, 0.2, 1.25e-4, 7, sample_stride=160)
    n_steps = 1600
    assert rec.engine == "diffusive"
    assert len(rec.t_grid) == n_steps // 160 + 1
    assert rec.t_grid[0] == 0.0
    assert abs(rec.t_grid[-1] - 0.2) < 1e-12
    assert rec.states.shape == (len(rec.t_grid), 4)
    assert np.allclose(np.linalg.norm(rec.states, axis=1), 1.0, atol=1e-10)
    assert rec.noise.increments.shape == (n_steps,)
    assert np.allclose(rec.populations.sum(axis=1), 1.0, atol=1e-10)
    # sampled window sums of the increments reproduce the raw stream
    assert abs(rec.dxi_window[1:].sum() - rec.noise.increments.sum()) < 1e-12
    ordered = [e.time for e in rec.jump_events]
    assert ordered == sorted(ordered)


def test_noise_record_moments(ops_strong):
    dt = 1.25e-4
    rec = run_diffusive_sse(ops_strong, GG, 0.4, dt, 11)
    xs = rec.noise.increments
    n = len(xs)
    assert n == 3200
    # dxi ~ N(0, dt): mean and variance inside five standard errors
    assert abs(xs.mean()) < 5.0 * math.sqrt(dt / n)
    assert abs(xs.var() - dt) < 5.0 * dt * math.sqrt(2.0 / n)


def test_jump_window_counts_match_event_list(ops_weak):
    rec = run_jump_sse(ops_weak, EE, 2.0, 1e-3, 5, sample_stride=250)
    lefts = sum(1 for e in rec.jump_events if e.channel == "left")
    rights = sum(1 for e in rec.jump_events if e.channel == "right")
    assert int(rec.jump_counts_left.sum()) == lefts
    assert int(rec.jump_counts_right.sum()) == rights


def test_undriven_excited_pair_emits_exactly_two_photons():
    ops = build_operators(ModelParams(alpha_mag=0.0))
    rec = run_jump_sse(ops, EE, 30.0, 1e-3, 12345, sample_stride=3000)
    total = int(rec.jump_counts_left.sum() + rec.jump_counts_right.sum())
    assert total == 2
    assert rec.populations[-1, 3] > 1.0 - 1e-9


# ---------------------------------------------------------------------------
# cross-engine equivalences


def test_sme_at_unit_efficiency_tracks_pure_trajectory(ops_strong):
    dt = 1.25e-4
    seed = 31
    pure = run_diffusive_sse(ops_strong, GG, 0.2, dt, seed, sample_stride=40)
    mixed = run_sme(ops_strong, np.outer(GG, GG.conj()), 0.2, dt, seed, 1.0, 1.0,
                    sample_stride=40)
    assert np.array_equal(pure.t_grid, mixed.t_grid)
    proj = pure.states[:, :, None] * pure.states.conj()[:, None, :]
    assert np.max(np.abs(mixed.states - proj)) < 1e-6
    assert [e.time for e in pure.jump_events] == [e.time for e in mixed.jump_events]


def test_sme_at_zero_efficiency_reduces_to_master_equation(ops_strong):
    dt = 1.25e-4
    rho0 = np.outer(GG, GG.conj())
    rec = run_sme(ops_strong, rho0, 0.25, dt, 77, 0.0, 0.0, sample_stride=400)
    times, states = integrate_me(ops_strong, rho0, 0.25, dt, sample_stride=400)
    assert np.allclose(rec.t_grid, times, atol=1e-12)
    assert np.max(np.abs(rec.states - states)) < 1e-6
    assert len(rec.jump_events) == 0


def test_sme_states_stay_physical(ops_strong):
    rec = run_sme(ops_strong, np.outer(GG, GG.conj()), 0.2, 1.25e-4, 5, 0.5, 0.7,
                  sample_stride=200)
    for rho in rec.states:
        assert abs(np.trace(rho).real - 1.0) < 1e-9
        assert np.max(np.abs(rho - rho.conj().T)) < 1e-10
        assert np.min(np.linalg.eigvalsh(rho)) > -1e-7


# ---------------------------------------------------------------------------
# batch kernels replay the scalar drivers exactly


def test_jump_batch_matches_scalar_replay(ops_weak):
    seed = 314
    idx = [0, 1, 2]
    batch = run_jump_sse_batch(ops_weak, GG, 1.2, 1e-3, seed, idx,
                               sample_stride=300, keep_states=True)
    for b, i in enumerate(idx):
        rec = run_jump_sse(ops_weak, GG, 1.2, 1e-3, seed, traj_index=i,
                           sample_stride=300)
        assert np.max(np.abs(batch.states[b] - rec.states)) < 1e-12
        assert np.array_equal(batch.jump_counts_left[b], rec.jump_counts_left)
        assert np.array_equal(batch.jump_counts_right[b], rec.jump_counts_right)
        assert np.allclose(batch.norms[b], rec.norms, atol=1e-12)
        got = [(e.time, e.channel) for e in batch.jump_events[b]]
        want = [(e.time, e.channel) for e in rec.jump_events]
        assert got == want
        assert np.max(np.abs(batch.final_states[b] - rec.states[-1])) < 1e-12


def test_diffusive_batch_matches_scalar_replay(ops_strong):
    # horizon crosses one noise-chunk boundary (4096 steps per chunk)
    seed = 2718
    dt = 1.25e-4
    idx = [0, 3]
    batch = run_diffusive_sse_batch(ops_strong, GG, 0.65, dt, seed, idx,
                                    sample_stride=400, keep_states=True)
    for b, i in enumerate(idx):
        rec = run_diffusive_sse(ops_strong, GG, 0.65, dt, seed, traj_index=i,
                                sample_stride=400)
        assert np.max(np.abs(batch.states[b] - rec.states)) < 1e-12
        assert np.allclose(batch.dxi_window[b], rec.dxi_window, atol=1e-14)
        assert np.array_equal(batch.jump_counts_left[b], rec.jump_counts_left)
        got = [(e.time, e.channel) for e in batch.jump_events[b]]
        want = [(e.time, e.channel) for e in rec.jump_events]
        assert got == want


def test_sme_batch_matches_scalar_replay(ops_strong):
    seed = 161803
    dt = 1.25e-4
    rho0 = np.outer(GG, GG.conj())
    batch = run_sme_batch(ops_strong, rho0, 0.15, dt, seed, [0, 1], 0.8, 0.6,
                          sample_stride=300, keep_states=True)
    for b, i in enumerate([0, 1]):
        rec = run_sme(ops_strong, rho0, 0.15, dt, seed, 0.8, 0.6, traj_index=i,
                      sample_stride=300)
        assert np.max(np.abs(batch.states[b] - rec.states)) < 1e-12
        assert np.allclose(batch.populations[b], rec.populations, atol=1e-12)
        assert np.allclose(batch.entanglement[b], rec.entanglement, atol=1e-10)


def test_batch_moment_accumulators_are_exact_sums(ops_weak):
    batch = run_jump_sse_batch(ops_weak, GG, 0.5, 1e-3, 55, range(4),
                               sample_stride=125, keep_states=True)
    rhos = batch.states[:, :, :, None] * batch.states.conj()[:, :, None, :]
    assert np.allclose(batch.moment_sum, rhos.sum(axis=0), atol=1e-12)
    assert np.allclose(batch.moment_sq_re, (rhos.real**2).sum(axis=0), atol=1e-12)
    assert np.allclose(batch.moment_sq_im, (rhos.imag**2).sum(axis=0), atol=1e-12)


# ---------------------------------------------------------------------------
# exchange-leakage audit


def test_hqq_suppression_preconditions():
    params = ModelParams(alpha_mag=100.0)
    with pytest.raises(PreconditionError, match="pi/2"):
        hqq_suppression_check(ModelParams(alpha_mag=100.0, kl=1.0), [50.0, 100.0])
    with pytest.raises(PreconditionError, match="increasing"):
        hqq_suppression_check(params, [100.0, 50.0])
    with pytest.raises(PreconditionError, match="increasing"):
        hqq_suppression_check(params, [100.0])
    with pytest.raises(PreconditionError, match=">= 20"):
        hqq_suppression_check(params, [5.0, 100.0])


def test_hqq_suppression_decreases_with_drive():
    rows = hqq_suppression_check(ModelParams(alpha_mag=100.0), [50.0, 100.0],
                                 n_grid=500)
    assert [a for a, _ in rows] == [50.0, 100.0]
    assert rows[0][1] > rows[1][1] > 0.0


def test_hqq_leakage_vanishes_with_exchange_off():
    rows = hqq_suppression_check(ModelParams(alpha_mag=100.0), [50.0, 100.0],
                                 exchange_on=False, n_grid=500)
    assert all(leak <= 1e-8 for _, leak in rows)
