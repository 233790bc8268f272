"""Stochastic unravelings of the two-qubit waveguide master equation.

Three engines produce trajectories whose ensemble average reproduces the
deterministic evolution of ``integrate_me``:

* ``jump`` -- exact photon-counting unraveling: both output channels click
  discretely.  The right channel keeps its full affine jump operator
  (matrix part plus drive offset), so this is the slow, assumption-free
  reference engine, usable at any drive strength the step guard allows.
* ``diffusive`` -- strong-drive hybrid: the transmitted (right) signal is
  dominated by the classical drive and becomes a Gaussian homodyne-like
  record, while the reflected (left) channel keeps clicking.  States stay
  pure.
* ``sme`` -- the same measurement geometry with finite detector
  efficiencies ``eta_l`` / ``eta_r``; the conditional state is a density
  matrix.  At ``eta_l = eta_r = 1`` it follows the diffusive engine
  pathwise; at ``eta_l = eta_r = 0`` it reduces to the deterministic
  master equation.

Noise protocol (frozen: changing any of it changes every seeded result).
Each trajectory draws from an independent Philox stream keyed by
``(master_seed, trajectory_index)``.  Draws happen in blocks of at most
``CHUNK`` steps.  Within a block the diffusive and sme engines draw the
Gaussian increments for the whole block first and the click uniforms
second; the jump engine draws a ``(block, 2)`` uniform array ordered
(left, right).  One Gaussian increment is consumed on every step,
including steps replaced by a click, so engines sharing a seed stay on
the same noise path.

A click replaces the step that contains it: the collapsed state is
computed from the pre-step state and the continuous update for that step
is discarded.  Click probabilities are evaluated on the normalized
pre-step state.  Simultaneous left and right clicks in the jump engine
are applied left first.  Events are stamped with the end time of the
step in which they fired.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import expm

from .entangle import (
    GG,
    MINUS_I,
    PLUS_I,
    POP_BASIS,
    entropy_batch,
    eof_batch,
    populations_batch,
)
from .errors import CheckFailure, GuardError, PreconditionError
from .lindblad import dt_max, sample_steps
from .linalg import validate_density
from .model import ModelOperators, ModelParams, build_operators

__all__ = [
    "CHUNK",
    "JumpEvent",
    "NoiseRecord",
    "TrajectoryRecord",
    "BatchResult",
    "JumpPlan",
    "DiffusivePlan",
    "SmePlan",
    "trajectory_rng",
    "jump_plan",
    "diffusive_plan",
    "sme_plan",
    "step_jump_sse",
    "step_diffusive_sse",
    "step_sme",
    "run_jump_sse",
    "run_diffusive_sse",
    "run_sme",
    "run_jump_sse_batch",
    "run_diffusive_sse_batch",
    "run_sme_batch",
    "hqq_suppression_check",
]

CHUNK = 4096                  # noise-draw block length (part of the stream contract)
_JUMP_PROB_CAP = 0.05         # per-step click probability ceiling
_MIN_STRONG_ALPHA = 20.0      # validity guard for the 1/|alpha| expansion
_TRACE_FLOOR = 1e-14          # conditional-state trace collapse threshold


# ---------------------------------------------------------------------------
# records


@dataclass(frozen=True)
class JumpEvent:
    """One detector click.

    Fidelities are overlaps with the heralded Bell state |+i> and with
    |gg| immediately before and after the collapse; ``post_entanglement``
    is the entropy of entanglement (pure engines) or the entanglement of
    formation (sme engine) of the post-click state, in bits.
    """

    time: float
    channel: str  # "left" | "right"
    pre_state_fidelity_plus_i: float
    post_state_fidelity_plus_i: float
    post_state_fidelity_gg: float
    post_entanglement: float


@dataclass(frozen=True)
class NoiseRecord:
    """Gaussian increments consumed by a run, one per step (empty for the
    jump engine, which uses no diffusive noise)."""

    increments: np.ndarray


@dataclass(frozen=True)
class TrajectoryRecord:
    """Sampled history of a single trajectory.

    ``states`` holds state vectors (n, 4) for the pure engines and
    density matrices (n, 4, 4) for the sme engine.  ``norms`` is the
    pre-renormalization norm (trace for sme) of the step landing on each
    sample; 1 at t = 0.  ``jump_counts_*`` and ``dxi_window`` cover the
    interval since the previous sample.  ``populations`` are projections
    onto {|ee>, |+i>, |-i>, |gg>}; ``entanglement`` is entropy in bits
    for pure states, entanglement of formation for mixed ones.
    """

    engine: str
    master_seed: int
    traj_index: int
    t_grid: np.ndarray
    states: np.ndarray
    norms: np.ndarray
    populations: np.ndarray
    entanglement: np.ndarray
    jump_counts_left: np.ndarray
    jump_counts_right: np.ndarray
    dxi_window: np.ndarray
    jump_events: tuple[JumpEvent, ...]
    noise: NoiseRecord


@dataclass(frozen=True)
class BatchResult:
    """Vectorized ensemble slab: per-trajectory sampled summaries plus the
    running projector moments needed for consistency checking.

    ``moment_sum`` is the sum over the batch of sampled density matrices
    (outer products for pure engines); ``moment_sq_re`` / ``moment_sq_im``
    accumulate elementwise squares of their real and imaginary parts, so
    mean and standard error reduce across batches by plain addition.
    """

    engine: str
    master_seed: int
    traj_indices: np.ndarray
    times: np.ndarray
    norms: np.ndarray
    populations: np.ndarray
    entanglement: np.ndarray
    jump_counts_left: np.ndarray
    jump_counts_right: np.ndarray
    dxi_window: np.ndarray
    jump_events: tuple[tuple[JumpEvent, ...], ...]
    final_states: np.ndarray
    moment_sum: np.ndarray
    moment_sq_re: np.ndarray
    moment_sq_im: np.ndarray
    states: np.ndarray | None = field(default=None, repr=False)


def trajectory_rng(master_seed: int, traj_index: int) -> np.random.Generator:
    """Independent counter-based stream for one trajectory."""
    if master_seed < 0 or master_seed >= 2**64:
        raise PreconditionError(f"master seed {master_seed!r} outside [0, 2^64)")
    if traj_index < 0 or traj_index >= 2**64:
        raise PreconditionError(f"trajectory index {traj_index!r} outside [0, 2^64)")
    return np.random.Generator(np.random.Philox(key=[master_seed, traj_index]))


# ---------------------------------------------------------------------------
# step plans (precomputed per-(ops, dt) matrices plus guard validation)


@dataclass(frozen=True)
class JumpPlan:
    ops: ModelOperators
    dt: float
    m_step: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class DiffusivePlan:
    ops: ModelOperators
    dt: float
    sqrt_dt: float
    e_half: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class SmePlan:
    ops: ModelOperators
    dt: float
    sqrt_dt: float
    eta_l: float
    eta_r: float
    sqrt_eta_r: float
    e_half: np.ndarray = field(repr=False)
    e_half_dag: np.ndarray = field(repr=False)
    g16: np.ndarray = field(repr=False)
    b_dag: np.ndarray = field(repr=False)
    jl_dag: np.ndarray = field(repr=False)


def jump_plan(ops: ModelOperators, dt: float) -> JumpPlan:
    """First-order no-click map plus the per-channel step-size guard."""
    if dt <= 0.0:
        raise PreconditionError(f"dt must be positive, got {dt!r}")
    for name, q in (("left", ops.q_left), ("right", ops.q_right)):
        lam = float(np.linalg.eigvalsh(q)[-1])
        if dt * lam > _JUMP_PROB_CAP * (1.0 + 1e-12):
            raise GuardError(
                f"jump engine: per-step click probability on the {name} channel "
                f"can reach dt*lambda_max = {dt * lam:.3g} > {_JUMP_PROB_CAP}; "
                f"reduce dt to <= {_JUMP_PROB_CAP / lam:.3e}"
            )
    m_step = np.eye(4, dtype=complex) - 1j * dt * ops.h_eff
    return JumpPlan(ops=ops, dt=float(dt), m_step=m_step)


def _strong_drive_guards(ops: ModelOperators, dt: float, strong_drive_guard: bool) -> None:
    if dt <= 0.0:
        raise PreconditionError(f"dt must be positive, got {dt!r}")
    if strong_drive_guard and ops.params.alpha_mag < _MIN_STRONG_ALPHA:
        raise GuardError(
            f"strong-drive unraveling requires |alpha| >= {_MIN_STRONG_ALPHA:g} "
            f"(got {ops.params.alpha_mag:g}); it is derived in a 1/|alpha| "
            "expansion.  Pass strong_drive_guard=False to override."
        )
    bound = dt_max(ops)
    if dt > bound * (1.0 + 1e-12):
        raise GuardError(
            f"step dt = {dt:g} exceeds dt_max = {bound:.6g} "
            "(must resolve the drive rotation and the decay rate); reduce dt"
        )
    lam = float(np.linalg.eigvalsh(ops.q_left)[-1])
    if dt * lam > _JUMP_PROB_CAP * (1.0 + 1e-12):
        raise GuardError(
            f"per-step left-click probability can reach dt*lambda_max = "
            f"{dt * lam:.3g} > {_JUMP_PROB_CAP}; reduce dt to <= "
            f"{_JUMP_PROB_CAP / lam:.3e}"
        )


def diffusive_plan(
    ops: ModelOperators, dt: float, *, strong_drive_guard: bool = True
) -> DiffusivePlan:
    """Half-step drift propagator for the hybrid diffusive engine."""
    _strong_drive_guards(ops, dt, strong_drive_guard)
    e_half = expm(ops.a_drift * (0.5 * dt))
    return DiffusivePlan(ops=ops, dt=float(dt), sqrt_dt=math.sqrt(dt), e_half=e_half)


def sme_plan(
    ops: ModelOperators,
    dt: float,
    eta_l: float,
    eta_r: float,
    *,
    strong_drive_guard: bool = True,
) -> SmePlan:
    """Propagators for the finite-efficiency engine.

    g16 exponentiates the unmonitored feed terms (1-eta_l) J_L . J_L^dag
    and (1-eta_r) B . B^dag as a superoperator on row-major-vectorized
    density matrices; at eta_l = eta_r = 1 it is exactly the identity and
    the step degenerates to the pure diffusive update.
    """
    for name, val in (("eta_l", eta_l), ("eta_r", eta_r)):
        if not 0.0 <= val <= 1.0:
            raise PreconditionError(f"{name} must lie in [0, 1], got {val!r}")
    _strong_drive_guards(ops, dt, strong_drive_guard)
    e_half = expm(ops.a_drift * (0.5 * dt))
    feed = (1.0 - eta_l) * np.kron(ops.j_left, ops.j_left.conj()) + (
        1.0 - eta_r
    ) * np.kron(ops.b_diff, ops.b_diff.conj())
    g16 = expm(dt * feed)
    return SmePlan(
        ops=ops,
        dt=float(dt),
        sqrt_dt=math.sqrt(dt),
        eta_l=float(eta_l),
        eta_r=float(eta_r),
        sqrt_eta_r=math.sqrt(eta_r),
        e_half=e_half,
        e_half_dag=e_half.conj().T.copy(),
        g16=g16,
        b_dag=ops.b_diff.conj().T.copy(),
        jl_dag=ops.j_left.conj().T.copy(),
    )


# ---------------------------------------------------------------------------
# scalar single-step updates (noise passed in explicitly)


def _jump_update(plan: JumpPlan, psi: np.ndarray, u_left: float, u_right: float):
    """One first-order step on a normalized state; a fired channel
    replaces the continuous map.  Returns (state, pre-renorm norm,
    fired_left, fired_right)."""
    ops = plan.ops
    p_left = plan.dt * float(np.vdot(psi, ops.q_left @ psi).real)
    p_right = plan.dt * float(np.vdot(psi, ops.q_right @ psi).real)
    fired_left = bool(u_left < p_left)
    fired_right = bool(u_right < p_right)
    if fired_left or fired_right:
        phi = psi
        if fired_left:
            phi = ops.j_left @ phi
        if fired_right:
            phi = ops.j_right_op @ phi + ops.j_right_offset * phi
    else:
        phi = plan.m_step @ psi
    norm = float(np.linalg.norm(phi))
    if norm <= 0.0:
        raise GuardError("state norm vanished after a click")
    return phi / norm, norm, fired_left, fired_right


def _diffusive_update(plan: DiffusivePlan, psi: np.ndarray, dxi: float, u: float):
    """Strang-split drift around the measurement kick; the quadrature
    expectation is taken at the half step, which keeps the ensemble mean
    on the master equation.  Returns (state, norm, clicked)."""
    ops = plan.ops
    p_left = plan.dt * float(np.vdot(psi, ops.q_left @ psi).real)
    if u < p_left:
        phi = ops.j_left @ psi
        norm = float(np.linalg.norm(phi))
        if norm <= 0.0:
            raise GuardError("state norm vanished after a click")
        return phi / norm, norm, True
    phi = plan.e_half @ psi
    bphi = ops.b_diff @ phi
    n2 = float(np.vdot(phi, phi).real)
    xhat = 2.0 * float(np.vdot(phi, bphi).real) / n2
    coef = xhat * plan.dt + dxi
    phi = plan.e_half @ (phi + coef * bphi)
    norm = float(np.linalg.norm(phi))
    return phi / norm, norm, False


def _sme_update(plan: SmePlan, rho: np.ndarray, dxi: float, u: float):
    """Kraus-factored finite-efficiency step on a normalized density
    matrix.  Returns (state, pre-renorm trace, clicked)."""
    ops = plan.ops
    p = plan.eta_l * plan.dt * float(np.einsum("ij,ji->", rho, ops.q_left).real)
    if u < p:
        sig = ops.j_left @ rho @ plan.jl_dag
        tr = float(np.trace(sig).real)
        if tr < _TRACE_FLOOR:
            raise GuardError(f"click trace collapsed to {tr:.3e} < {_TRACE_FLOOR:g}")
        return 0.5 * (sig + sig.conj().T) / tr, tr, True
    sig = plan.e_half @ rho @ plan.e_half_dag
    sig = (plan.g16 @ sig.reshape(16)).reshape(4, 4)
    tr1 = float(np.trace(sig).real)
    if tr1 < _TRACE_FLOOR:
        raise GuardError(f"trace collapsed to {tr1:.3e} < {_TRACE_FLOOR:g} mid-step")
    xhat = float(np.einsum("ij,ji->", sig, ops.x_quad).real) / tr1
    coef = plan.eta_r * plan.dt * xhat + plan.sqrt_eta_r * dxi
    bsig = ops.b_diff @ sig
    sig = sig + coef * (bsig + sig @ plan.b_dag) + (coef * coef) * (bsig @ plan.b_dag)
    sig = plan.e_half @ sig @ plan.e_half_dag
    tr = float(np.trace(sig).real)
    if tr < _TRACE_FLOOR:
        raise GuardError(
            f"conditional-state trace collapsed to {tr:.3e} < {_TRACE_FLOOR:g}; "
            "reduce dt or revisit the guards"
        )
    return 0.5 * (sig + sig.conj().T) / tr, tr, False


# ---------------------------------------------------------------------------
# event construction


def _fid_pure(target: np.ndarray, psi: np.ndarray) -> float:
    return float(abs(np.vdot(target, psi)) ** 2)


def _pure_event(time: float, channel: str, psi_pre: np.ndarray, psi_post: np.ndarray) -> JumpEvent:
    return JumpEvent(
        time=float(time),
        channel=channel,
        pre_state_fidelity_plus_i=_fid_pure(PLUS_I, psi_pre),
        post_state_fidelity_plus_i=_fid_pure(PLUS_I, psi_post),
        post_state_fidelity_gg=_fid_pure(GG, psi_post),
        post_entanglement=float(entropy_batch(psi_post[None, :])[0]),
    )


def _fid_mixed(target: np.ndarray, rho: np.ndarray) -> float:
    return float((target.conj() @ rho @ target).real)


def _mixed_event(time: float, channel: str, rho_pre: np.ndarray, rho_post: np.ndarray) -> JumpEvent:
    return JumpEvent(
        time=float(time),
        channel=channel,
        pre_state_fidelity_plus_i=_fid_mixed(PLUS_I, rho_pre),
        post_state_fidelity_plus_i=_fid_mixed(PLUS_I, rho_post),
        post_state_fidelity_gg=_fid_mixed(GG, rho_post),
        post_entanglement=float(eof_batch(rho_post[None, :, :])[0]),
    )


# ---------------------------------------------------------------------------
# public single-step API
#
# Draw order per step when called with a live generator: the jump engine
# consumes two uniforms (left, right); the diffusive and sme engines
# consume one standard normal then one uniform.  The run_* drivers use
# the block protocol described in the module docstring instead, so a
# manual step loop sees the same physics but a different noise path.


def step_jump_sse(ops, psi, dt, rng, *, t: float = 0.0, plan: JumpPlan | None = None):
    """One step of the photon-counting engine.

    Returns (state, events) where events is a tuple of zero, one, or two
    JumpEvent entries stamped at t + dt.
    """
    if plan is None:
        plan = jump_plan(ops, dt)
    psi = np.asarray(psi, dtype=complex).reshape(4)
    nrm = float(np.linalg.norm(psi))
    if nrm <= 0.0:
        raise PreconditionError("state vector has zero norm")
    psi = psi / nrm
    u_left = float(rng.random())
    u_right = float(rng.random())
    psi1, _, fired_left, fired_right = _jump_update(plan, psi, u_left, u_right)
    events = []
    if fired_left:
        events.append(_pure_event(t + plan.dt, "left", psi, psi1))
    if fired_right:
        events.append(_pure_event(t + plan.dt, "right", psi, psi1))
    return psi1, tuple(events)


def step_diffusive_sse(ops, psi, dt, rng, *, plan: DiffusivePlan | None = None):
    """One step of the hybrid diffusive engine.

    Accepts an unnormalized state (normalizes first).  Returns
    (state, dxi, clicked); the Gaussian increment is drawn and returned
    even on click steps, where the continuous update it would have driven
    is replaced by the collapse.
    """
    if plan is None:
        plan = diffusive_plan(ops, dt)
    psi = np.asarray(psi, dtype=complex).reshape(4)
    nrm = float(np.linalg.norm(psi))
    if nrm <= 0.0:
        raise PreconditionError("state vector has zero norm")
    psi = psi / nrm
    dxi = float(rng.standard_normal()) * plan.sqrt_dt
    u = float(rng.random())
    psi1, _, clicked = _diffusive_update(plan, psi, dxi, u)
    return psi1, dxi, clicked


def step_sme(ops, rho, dt, rng, eta_l, eta_r, *, plan: SmePlan | None = None):
    """One step of the finite-efficiency engine on a density matrix.

    Returns (state, dxi, clicked) with the same noise convention as
    step_diffusive_sse.
    """
    if plan is None:
        plan = sme_plan(ops, dt, eta_l, eta_r)
    elif plan.eta_l != eta_l or plan.eta_r != eta_r:
        raise PreconditionError("plan efficiencies disagree with the arguments")
    rho = validate_density(rho)
    dxi = float(rng.standard_normal()) * plan.sqrt_dt
    u = float(rng.random())
    rho1, _, clicked = _sme_update(plan, rho, dxi, u)
    return rho1, dxi, clicked


# ---------------------------------------------------------------------------
# single-trajectory drivers


def _resolve_steps(t_end: float, dt: float) -> int:
    n_steps = int(round(t_end / dt))
    if n_steps < 1:
        raise PreconditionError(f"t_end = {t_end!r} is shorter than one step dt = {dt!r}")
    return n_steps


def _normalized_vector(psi0) -> np.ndarray:
    psi = np.asarray(psi0, dtype=complex).reshape(4)
    nrm = float(np.linalg.norm(psi))
    if nrm <= 0.0:
        raise PreconditionError("initial state has zero norm")
    return psi / nrm


def run_jump_sse(
    ops,
    psi0,
    t_end,
    dt,
    seed,
    *,
    traj_index: int = 0,
    sample_stride: int = 1,
    plan: JumpPlan | None = None,
) -> TrajectoryRecord:
    """Integrate one photon-counting trajectory; deterministic in
    (seed, traj_index, dt, n_steps)."""
    if plan is None:
        plan = jump_plan(ops, dt)
    psi = _normalized_vector(psi0)
    n_steps = _resolve_steps(t_end, dt)
    keep = sample_steps(n_steps, sample_stride)
    keep_pos = {int(k): i for i, k in enumerate(keep)}
    n_s = len(keep)

    states = np.empty((n_s, 4), dtype=complex)
    norms = np.empty(n_s)
    jl = np.zeros(n_s, dtype=np.int64)
    jr = np.zeros(n_s, dtype=np.int64)
    states[0] = psi
    norms[0] = 1.0

    rng = trajectory_rng(seed, traj_index)
    events: list[JumpEvent] = []
    count_l = count_r = 0
    for start in range(0, n_steps, CHUNK):
        m = min(CHUNK, n_steps - start)
        u_blk = rng.random((m, 2))
        for j in range(m):
            k = start + j
            psi1, norm, fl, fr = _jump_update(plan, psi, u_blk[j, 0], u_blk[j, 1])
            if fl:
                count_l += 1
                events.append(_pure_event(dt * (k + 1), "left", psi, psi1))
            if fr:
                count_r += 1
                events.append(_pure_event(dt * (k + 1), "right", psi, psi1))
            psi = psi1
            pos = keep_pos.get(k + 1)
            if pos is not None:
                states[pos] = psi
                norms[pos] = norm
                jl[pos] = count_l
                jr[pos] = count_r
                count_l = count_r = 0
    return TrajectoryRecord(
        engine="jump",
        master_seed=int(seed),
        traj_index=int(traj_index),
        t_grid=keep * dt,
        states=states,
        norms=norms,
        populations=populations_batch(states),
        entanglement=entropy_batch(states),
        jump_counts_left=jl,
        jump_counts_right=jr,
        dxi_window=np.zeros(n_s),
        jump_events=tuple(events),
        noise=NoiseRecord(increments=np.empty(0)),
    )


def _draw_pair_block(rng: np.random.Generator, m: int, sqrt_dt: float):
    """Canonical per-block draws for the diffusive and sme engines."""
    dxi = rng.standard_normal(m) * sqrt_dt
    u = rng.random(m)
    return dxi, u


def run_diffusive_sse(
    ops,
    psi0,
    t_end,
    dt,
    seed,
    *,
    traj_index: int = 0,
    sample_stride: int = 1,
    plan: DiffusivePlan | None = None,
    strong_drive_guard: bool = True,
) -> TrajectoryRecord:
    """Integrate one hybrid diffusive trajectory."""
    if plan is None:
        plan = diffusive_plan(ops, dt, strong_drive_guard=strong_drive_guard)
    psi = _normalized_vector(psi0)
    n_steps = _resolve_steps(t_end, dt)
    keep = sample_steps(n_steps, sample_stride)
    keep_pos = {int(k): i for i, k in enumerate(keep)}
    n_s = len(keep)

    states = np.empty((n_s, 4), dtype=complex)
    norms = np.empty(n_s)
    jl = np.zeros(n_s, dtype=np.int64)
    dxi_win = np.zeros(n_s)
    noise = np.empty(n_steps)
    states[0] = psi
    norms[0] = 1.0

    rng = trajectory_rng(seed, traj_index)
    events: list[JumpEvent] = []
    count_l = 0
    acc_dxi = 0.0
    for start in range(0, n_steps, CHUNK):
        m = min(CHUNK, n_steps - start)
        dxi_blk, u_blk = _draw_pair_block(rng, m, plan.sqrt_dt)
        noise[start : start + m] = dxi_blk
        for j in range(m):
            k = start + j
            psi1, norm, clicked = _diffusive_update(plan, psi, dxi_blk[j], u_blk[j])
            acc_dxi += dxi_blk[j]
            if clicked:
                count_l += 1
                events.append(_pure_event(dt * (k + 1), "left", psi, psi1))
            psi = psi1
            pos = keep_pos.get(k + 1)
            if pos is not None:
                states[pos] = psi
                norms[pos] = norm
                jl[pos] = count_l
                dxi_win[pos] = acc_dxi
                count_l = 0
                acc_dxi = 0.0
    return TrajectoryRecord(
        engine="diffusive",
        master_seed=int(seed),
        traj_index=int(traj_index),
        t_grid=keep * dt,
        states=states,
        norms=norms,
        populations=populations_batch(states),
        entanglement=entropy_batch(states),
        jump_counts_left=jl,
        jump_counts_right=np.zeros(n_s, dtype=np.int64),
        dxi_window=dxi_win,
        jump_events=tuple(events),
        noise=NoiseRecord(increments=noise),
    )


def run_sme(
    ops,
    rho0,
    t_end,
    dt,
    seed,
    eta_l,
    eta_r,
    *,
    traj_index: int = 0,
    sample_stride: int = 1,
    plan: SmePlan | None = None,
    strong_drive_guard: bool = True,
) -> TrajectoryRecord:
    """Integrate one finite-efficiency mixed-state trajectory."""
    if plan is None:
        plan = sme_plan(ops, dt, eta_l, eta_r, strong_drive_guard=strong_drive_guard)
    elif plan.eta_l != eta_l or plan.eta_r != eta_r:
        raise PreconditionError("plan efficiencies disagree with the arguments")
    rho = validate_density(rho0)
    n_steps = _resolve_steps(t_end, dt)
    keep = sample_steps(n_steps, sample_stride)
    keep_pos = {int(k): i for i, k in enumerate(keep)}
    n_s = len(keep)

    states = np.empty((n_s, 4, 4), dtype=complex)
    norms = np.empty(n_s)
    jl = np.zeros(n_s, dtype=np.int64)
    dxi_win = np.zeros(n_s)
    noise = np.empty(n_steps)
    states[0] = rho
    norms[0] = 1.0

    rng = trajectory_rng(seed, traj_index)
    events: list[JumpEvent] = []
    count_l = 0
    acc_dxi = 0.0
    for start in range(0, n_steps, CHUNK):
        m = min(CHUNK, n_steps - start)
        dxi_blk, u_blk = _draw_pair_block(rng, m, plan.sqrt_dt)
        noise[start : start + m] = dxi_blk
        for j in range(m):
            k = start + j
            rho1, tr, clicked = _sme_update(plan, rho, dxi_blk[j], u_blk[j])
            acc_dxi += dxi_blk[j]
            if clicked:
                count_l += 1
                events.append(_mixed_event(dt * (k + 1), "left", rho, rho1))
            rho = rho1
            pos = keep_pos.get(k + 1)
            if pos is not None:
                states[pos] = rho
                norms[pos] = tr
                jl[pos] = count_l
                dxi_win[pos] = acc_dxi
                count_l = 0
                acc_dxi = 0.0
    return TrajectoryRecord(
        engine="sme",
        master_seed=int(seed),
        traj_index=int(traj_index),
        t_grid=keep * dt,
        states=states,
        norms=norms,
        populations=populations_batch(states),
        entanglement=eof_batch(states),
        jump_counts_left=jl,
        jump_counts_right=np.zeros(n_s, dtype=np.int64),
        dxi_window=dxi_win,
        jump_events=tuple(events),
        noise=NoiseRecord(increments=noise),
    )


# ---------------------------------------------------------------------------
# vectorized ensemble kernels
#
# Same physics as the scalar updates, marched across a whole batch of
# trajectories per numpy call.  The continuous update is computed for
# every trajectory and clicking rows are then overwritten from their
# pre-step states, which matches the replacement semantics branch for
# branch.  Per-trajectory noise streams and block order are identical to
# the scalar drivers.


class _SampleSink:
    """Accumulates the per-sample summaries shared by all three kernels."""

    def __init__(self, batch: int, n_s: int, state_shape, keep_states: bool):
        self.norms = np.empty((batch, n_s))
        self.populations = np.empty((batch, n_s, 4))
        self.entanglement = np.empty((batch, n_s))
        self.jl = np.zeros((batch, n_s), dtype=np.int64)
        self.jr = np.zeros((batch, n_s), dtype=np.int64)
        self.dxi = np.zeros((batch, n_s))
        self.moment_sum = np.zeros((n_s, 4, 4), dtype=complex)
        self.moment_sq_re = np.zeros((n_s, 4, 4))
        self.moment_sq_im = np.zeros((n_s, 4, 4))
        self.states = (
            np.empty((batch, n_s) + state_shape, dtype=complex) if keep_states else None
        )

    def write(self, pos, rhos, norms, pops, ent, count_l, count_r, acc_dxi, states):
        self.norms[:, pos] = norms
        self.populations[:, pos, :] = pops
        self.entanglement[:, pos] = ent
        self.jl[:, pos] = count_l
        self.jr[:, pos] = count_r
        self.dxi[:, pos] = acc_dxi
        self.moment_sum[pos] = rhos.sum(axis=0)
        self.moment_sq_re[pos] = (rhos.real**2).sum(axis=0)
        self.moment_sq_im[pos] = (rhos.imag**2).sum(axis=0)
        if self.states is not None:
            self.states[:, pos] = states


def _pure_sample(sink, pos, psi, norms, count_l, count_r, acc_dxi):
    rhos = psi[:, :, None] * psi.conj()[:, None, :]
    sink.write(
        pos,
        rhos,
        norms,
        np.abs(psi @ _POP_CONJ_T) ** 2,
        entropy_batch(psi),
        count_l,
        count_r,
        acc_dxi,
        psi,
    )


def _mixed_sample(sink, pos, rho, norms, count_l, count_r, acc_dxi):
    sink.write(
        pos,
        rho,
        norms,
        populations_batch(rho),
        eof_batch(rho),
        count_l,
        count_r,
        acc_dxi,
        rho,
    )


_POP_CONJ_T = POP_BASIS.conj().T.copy()
_PLUS_CONJ = PLUS_I.conj().copy()
_GG_CONJ = GG.conj().copy()


def _batch_norms(phi: np.ndarray) -> np.ndarray:
    return np.sqrt(np.einsum("bi,bi->b", phi.conj(), phi).real)


def run_jump_sse_batch(
    ops,
    psi0,
    t_end,
    dt,
    master_seed,
    traj_indices,
    *,
    sample_stride: int = 1,
    plan: JumpPlan | None = None,
    keep_states: bool = False,
) -> BatchResult:
    """Photon-counting kernel over a batch of trajectory indices."""
    if plan is None:
        plan = jump_plan(ops, dt)
    psi_init = _normalized_vector(psi0)
    n_steps = _resolve_steps(t_end, dt)
    keep = sample_steps(n_steps, sample_stride)
    keep_pos = {int(k): i for i, k in enumerate(keep)}
    indices = np.asarray(list(traj_indices), dtype=np.int64)
    batch = len(indices)
    rngs = [trajectory_rng(master_seed, int(i)) for i in indices]

    m_t = plan.m_step.T.copy()
    ql_t = ops.q_left.T.copy()
    qr_t = ops.q_right.T.copy()
    jl_t = ops.j_left.T.copy()
    jr_t = ops.j_right_op.T.copy()
    offset = ops.j_right_offset

    psi = np.tile(psi_init, (batch, 1))
    sink = _SampleSink(batch, len(keep), (4,), keep_states)
    count_l = np.zeros(batch, dtype=np.int64)
    count_r = np.zeros(batch, dtype=np.int64)
    zeros = np.zeros(batch)
    events: list[list[JumpEvent]] = [[] for _ in range(batch)]
    _pure_sample(sink, 0, psi, np.ones(batch), count_l, count_r, zeros)

    for start in range(0, n_steps, CHUNK):
        m = min(CHUNK, n_steps - start)
        u_blk = np.empty((batch, m, 2))
        for b in range(batch):
            u_blk[b] = rngs[b].random((m, 2))
        for j in range(m):
            k = start + j
            p_l = dt * np.einsum("bi,bi->b", psi.conj(), psi @ ql_t).real
            p_r = dt * np.einsum("bi,bi->b", psi.conj(), psi @ qr_t).real
            fl = u_blk[:, j, 0] < p_l
            fr = u_blk[:, j, 1] < p_r
            phi = psi @ m_t
            fired = fl | fr
            rows = np.nonzero(fired)[0]
            if rows.size:
                pre = psi[rows].copy()
                sub = pre.copy()
                lmask = fl[rows]
                rmask = fr[rows]
                if lmask.any():
                    sub[lmask] = sub[lmask] @ jl_t
                if rmask.any():
                    sub[rmask] = sub[rmask] @ jr_t + offset * sub[rmask]
                phi[rows] = sub
            nrm = _batch_norms(phi)
            if np.any(nrm <= 0.0):
                bad = int(indices[int(np.argmin(nrm))])
                raise GuardError(f"trajectory {bad}: state norm vanished after a click")
            psi = phi / nrm[:, None]
            count_l += fl
            count_r += fr
            if rows.size:
                t_evt = dt * (k + 1)
                post_ent = entropy_batch(psi[rows])
                for n, b in enumerate(rows):
                    pre_fid = float(abs(_PLUS_CONJ @ pre[n]) ** 2)
                    post_fid = float(abs(_PLUS_CONJ @ psi[b]) ** 2)
                    post_gg = float(abs(_GG_CONJ @ psi[b]) ** 2)
                    if fl[b]:
                        events[b].append(
                            JumpEvent(t_evt, "left", pre_fid, post_fid, post_gg, float(post_ent[n]))
                        )
                    if fr[b]:
                        events[b].append(
                            JumpEvent(t_evt, "right", pre_fid, post_fid, post_gg, float(post_ent[n]))
                        )
            pos = keep_pos.get(k + 1)
            if pos is not None:
                _pure_sample(sink, pos, psi, nrm, count_l, count_r, zeros)
                count_l = np.zeros(batch, dtype=np.int64)
                count_r = np.zeros(batch, dtype=np.int64)
    return BatchResult(
        engine="jump",
        master_seed=int(master_seed),
        traj_indices=indices,
        times=keep * dt,
        norms=sink.norms,
        populations=sink.populations,
        entanglement=sink.entanglement,
        jump_counts_left=sink.jl,
        jump_counts_right=sink.jr,
        dxi_window=sink.dxi,
        jump_events=tuple(tuple(e) for e in events),
        final_states=psi.copy(),
        moment_sum=sink.moment_sum,
        moment_sq_re=sink.moment_sq_re,
        moment_sq_im=sink.moment_sq_im,
        states=sink.states,
    )


def run_diffusive_sse_batch(
    ops,
    psi0,
    t_end,
    dt,
    master_seed,
    traj_indices,
    *,
    sample_stride: int = 1,
    plan: DiffusivePlan | None = None,
    keep_states: bool = False,
    strong_drive_guard: bool = True,
) -> BatchResult:
    """Hybrid diffusive kernel over a batch of trajectory indices."""
    if plan is None:
        plan = diffusive_plan(ops, dt, strong_drive_guard=strong_drive_guard)
    psi_init = _normalized_vector(psi0)
    n_steps = _resolve_steps(t_end, dt)
    keep = sample_steps(n_steps, sample_stride)
    keep_pos = {int(k): i for i, k in enumerate(keep)}
    indices = np.asarray(list(traj_indices), dtype=np.int64)
    batch = len(indices)
    rngs = [trajectory_rng(master_seed, int(i)) for i in indices]

    eh_t = plan.e_half.T.copy()
    b_t = ops.b_diff.T.copy()
    ql_t = ops.q_left.T.copy()
    jl_t = ops.j_left.T.copy()

    psi = np.tile(psi_init, (batch, 1))
    sink = _SampleSink(batch, len(keep), (4,), keep_states)
    count_l = np.zeros(batch, dtype=np.int64)
    count_r = np.zeros(batch, dtype=np.int64)
    acc_dxi = np.zeros(batch)
    events: list[list[JumpEvent]] = [[] for _ in range(batch)]
    _pure_sample(sink, 0, psi, np.ones(batch), count_l, count_r, acc_dxi)

    for start in range(0, n_steps, CHUNK):
        m = min(CHUNK, n_steps - start)
        dxi_blk = np.empty((batch, m))
        u_blk = np.empty((batch, m))
        for b in range(batch):
            dxi_blk[b], u_blk[b] = _draw_pair_block(rngs[b], m, plan.sqrt_dt)
        for j in range(m):
            k = start + j
            p_l = dt * np.einsum("bi,bi->b", psi.conj(), psi @ ql_t).real
            click = u_blk[:, j] < p_l
            phi = psi @ eh_t
            bphi = phi @ b_t
            n2 = np.einsum("bi,bi->b", phi.conj(), phi).real
            xhat = 2.0 * np.einsum("bi,bi->b", phi.conj(), bphi).real / n2
            coef = xhat * dt + dxi_blk[:, j]
            phi = (phi + coef[:, None] * bphi) @ eh_t
            rows = np.nonzero(click)[0]
            if rows.size:
                pre = psi[rows].copy()
                phi[rows] = pre @ jl_t
            nrm = _batch_norms(phi)
            if np.any(nrm <= 0.0):
                bad = int(indices[int(np.argmin(nrm))])
                raise GuardError(f"trajectory {bad}: state norm vanished after a click")
            psi = phi / nrm[:, None]
            acc_dxi += dxi_blk[:, j]
            count_l += click
            if rows.size:
                t_evt = dt * (k + 1)
                post_ent = entropy_batch(psi[rows])
                for n, b in enumerate(rows):
                    events[b].append(
                        JumpEvent(
                            t_evt,
                            "left",
                            float(abs(_PLUS_CONJ @ pre[n]) ** 2),
                            float(abs(_PLUS_CONJ @ psi[b]) ** 2),
                            float(abs(_GG_CONJ @ psi[b]) ** 2),
                            float(post_ent[n]),
                        )
                    )
            pos = keep_pos.get(k + 1)
            if pos is not None:
                _pure_sample(sink, pos, psi, nrm, count_l, count_r, acc_dxi)
                count_l = np.zeros(batch, dtype=np.int64)
                acc_dxi = np.zeros(batch)
    return BatchResult(
        engine="diffusive",
        master_seed=int(master_seed),
        traj_indices=indices,
        times=keep * dt,
        norms=sink.norms,
        populations=sink.populations,
        entanglement=sink.entanglement,
        jump_counts_left=sink.jl,
        jump_counts_right=sink.jr,
        dxi_window=sink.dxi,
        jump_events=tuple(tuple(e) for e in events),
        final_states=psi.copy(),
        moment_sum=sink.moment_sum,
        moment_sq_re=sink.moment_sq_re,
        moment_sq_im=sink.moment_sq_im,
        states=sink.states,
    )


def run_sme_batch(
    ops,
    rho0,
    t_end,
    dt,
    master_seed,
    traj_indices,
    eta_l,
    eta_r,
    *,
    sample_stride: int = 1,
    plan: SmePlan | None = None,
    keep_states: bool = False,
    strong_drive_guard: bool = True,
) -> BatchResult:
    """Finite-efficiency kernel over a batch of trajectory indices."""
    if plan is None:
        plan = sme_plan(ops, dt, eta_l, eta_r, strong_drive_guard=strong_drive_guard)
    elif plan.eta_l != eta_l or plan.eta_r != eta_r:
        raise PreconditionError("plan efficiencies disagree with the arguments")
    rho_init = validate_density(rho0)
    n_steps = _resolve_steps(t_end, dt)
    keep = sample_steps(n_steps, sample_stride)
    keep_pos = {int(k): i for i, k in enumerate(keep)}
    indices = np.asarray(list(traj_indices), dtype=np.int64)
    batch = len(indices)
    rngs = [trajectory_rng(master_seed, int(i)) for i in indices]

    eh = plan.e_half
    eh_dag = plan.e_half_dag
    g16_t = plan.g16.T.copy()
    b = ops.b_diff
    b_dag = plan.b_dag
    jl = ops.j_left
    jl_dag = plan.jl_dag
    ql = ops.q_left
    xq = ops.x_quad

    rho = np.tile(rho_init, (batch, 1, 1))
    sink = _SampleSink(batch, len(keep), (4, 4), keep_states)
    count_l = np.zeros(batch, dtype=np.int64)
    count_r = np.zeros(batch, dtype=np.int64)
    acc_dxi = np.zeros(batch)
    events: list[list[JumpEvent]] = [[] for _ in range(batch)]
    _mixed_sample(sink, 0, rho, np.ones(batch), count_l, count_r, acc_dxi)

    for start in range(0, n_steps, CHUNK):
        m = min(CHUNK, n_steps - start)
        dxi_blk = np.empty((batch, m))
        u_blk = np.empty((batch, m))
        for idx in range(batch):
            dxi_blk[idx], u_blk[idx] = _draw_pair_block(rngs[idx], m, plan.sqrt_dt)
        for j in range(m):
            k = start + j
            p = plan.eta_l * dt * np.einsum("bij,ji->b", rho, ql).real
            click = u_blk[:, j] < p
            sig = np.matmul(np.matmul(eh, rho), eh_dag)
            sig = (sig.reshape(batch, 16) @ g16_t).reshape(batch, 4, 4)
            tr1 = np.trace(sig, axis1=1, axis2=2).real
            if np.any(tr1 < _TRACE_FLOOR):
                bad = int(indices[int(np.argmin(tr1))])
                raise GuardError(
                    f"trajectory {bad}: trace collapsed below {_TRACE_FLOOR:g} mid-step"
                )
            xhat = np.einsum("bij,ji->b", sig, xq).real / tr1
            coef = plan.eta_r * dt * xhat + plan.sqrt_eta_r * dxi_blk[:, j]
            bsig = np.matmul(b, sig)
            sig = (
                sig
                + coef[:, None, None] * (bsig + np.matmul(sig, b_dag))
                + (coef**2)[:, None, None] * np.matmul(bsig, b_dag)
            )
            sig = np.matmul(np.matmul(eh, sig), eh_dag)
            rows = np.nonzero(click)[0]
            if rows.size:
                pre = rho[rows].copy()
                sig[rows] = np.matmul(np.matmul(jl, pre), jl_dag)
            tr = np.trace(sig, axis1=1, axis2=2).real
            if np.any(tr < _TRACE_FLOOR):
                bad = int(indices[int(np.argmin(tr))])
                raise GuardError(
                    f"trajectory {bad}: conditional-state trace collapsed to "
                    f"{tr.min():.3e} at t = {dt * (k + 1):.6g}; reduce dt"
                )
            rho = 0.5 * (sig + sig.conj().transpose(0, 2, 1)) / tr[:, None, None]
            acc_dxi += dxi_blk[:, j]
            count_l += click
            if rows.size:
                t_evt = dt * (k + 1)
                post_ent = eof_batch(rho[rows])
                for n, idx in enumerate(rows):
                    events[idx].append(
                        JumpEvent(
                            t_evt,
                            "left",
                            float((_PLUS_CONJ @ pre[n] @ PLUS_I).real),
                            float((_PLUS_CONJ @ rho[idx] @ PLUS_I).real),
                            float((_GG_CONJ @ rho[idx] @ GG).real),
                            float(post_ent[n]),
                        )
                    )
            pos = keep_pos.get(k + 1)
            if pos is not None:
                _mixed_sample(sink, pos, rho, tr, count_l, count_r, acc_dxi)
                count_l = np.zeros(batch, dtype=np.int64)
                acc_dxi = np.zeros(batch)
    return BatchResult(
        engine="sme",
        master_seed=int(master_seed),
        traj_indices=indices,
        times=keep * dt,
        norms=sink.norms,
        populations=sink.populations,
        entanglement=sink.entanglement,
        jump_counts_left=sink.jl,
        jump_counts_right=sink.jr,
        dxi_window=sink.dxi,
        jump_events=tuple(tuple(e) for e in events),
        final_states=rho.copy(),
        moment_sum=sink.moment_sum,
        moment_sq_re=sink.moment_sq_re,
        moment_sq_im=sink.moment_sq_im,
        states=sink.states,
    )


# ---------------------------------------------------------------------------
# exchange-interaction leakage audit


def hqq_suppression_check(
    params: ModelParams,
    alpha_list,
    *,
    exchange_on: bool = True,
    n_grid: int = 2000,
) -> list[tuple[float, float]]:
    """Measure how strongly the qubit-qubit exchange term leaks the
    heralded state |+i> into its partner |-i> during one window.

    For each drive amplitude the no-click drift flow (the deterministic
    part of the diffusive engine; the diffusion operator annihilates
    |+i> exactly, so noise cannot contribute) is evolved from |+i> over
    one mean window 1/Gamma, and the maximum |-i> population is recorded.
    Returns [(alpha, leakage), ...] and raises CheckFailure if the
    leakage fails to be non-increasing in alpha.
    """
    alphas = [float(a) for a in alpha_list]
    if abs(params.kl - math.pi / 2.0) > 1e-12:
        raise PreconditionError("leakage audit is defined at kl = pi/2")
    if len(alphas) < 2 or any(b <= a for a, b in zip(alphas, alphas[1:])):
        raise PreconditionError("alpha_list must be strictly increasing with >= 2 entries")
    if alphas[0] < _MIN_STRONG_ALPHA:
        raise PreconditionError(f"all amplitudes must be >= {_MIN_STRONG_ALPHA:g}")

    rows: list[tuple[float, float]] = []
    for amp in alphas:
        ops = build_operators(replace(params, alpha_mag=amp), exchange_on=exchange_on)
        w, v = np.linalg.eig(ops.a_drift)
        c0 = np.linalg.solve(v, PLUS_I)
        t_grid = np.linspace(0.0, 1.0 / ops.rates.gamma, n_grid)
        amps = v @ (np.exp(np.outer(w, t_grid)) * c0[:, None])
        n2 = np.einsum("it,it->t", amps.conj(), amps).real
        leak = np.abs(MINUS_I.conj() @ amps) ** 2 / n2
        rows.append((amp, float(leak.max())))

    for (a0, l0), (a1, l1) in zip(rows, rows[1:]):
        if l1 > l0 + 1e-12:
            raise CheckFailure(
                f"exchange leakage grew with drive: alpha {a0:g} -> {a1:g} "
                f"gives {l0:.3e} -> {l1:.3e}"
            )
    return rows
