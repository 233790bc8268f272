"""Deterministic master-equation evolution, steady state, and reflected g2.

Two algebraically equivalent assemblies of the same Liouvillian are kept:
the rates form (individual + cooperative decay channels) used by the
integrator, and the jump form (left/right detector channels, the right one
affine in the drive amplitude). Their agreement on random inputs is a
pinned contract, so the pair acts as a standing cross-check rather than
dead code.

Time evolution is classical fixed-step RK4 on the vectorized density
matrix; the steady state comes from the null space of the 16x16
superoperator with a trace-constraint row, not from long-time integration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GuardError, PreconditionError
from .linalg import herm_defect, validate_density
from .model import ModelOperators

__all__ = [
    "dt_max",
    "sample_steps",
    "liouvillian_apply",
    "jump_form_apply",
    "superoperator_matrix",
    "integrate_me",
    "steady_state",
    "G2Curve",
    "g2_left",
]

_RESYM_EVERY = 1000        # steps between Hermiticity re-symmetrizations
_HERM_DRIFT_TOL = 1e-9     # beyond this the integrator refuses to continue


def dt_max(ops: ModelOperators) -> float:
    """Largest allowed integrator step: resolves both the fast drive
    rotation (angular frequency 2 g |alpha|) and the decay rate."""
    p = ops.params
    bound = 0.01 / ops.rates.gamma
    if p.alpha_mag > 0.0:
        bound = min(bound, 0.01 / (2.0 * p.g * p.alpha_mag))
    return bound


def sample_steps(n_steps: int, stride: int) -> np.ndarray:
    """Step indices retained by a sampled run: every stride-th step from 0,
    always including the final step."""
    if n_steps < 0 or stride < 1:
        raise PreconditionError(f"bad sampling ({n_steps=}, {stride=})")
    idx = np.arange(0, n_steps + 1, stride)
    if idx[-1] != n_steps:
        idx = np.append(idx, n_steps)
    return idx


def _apply_rates(ops: ModelOperators, mat: np.ndarray) -> np.ndarray:
    """Rates-form Liouvillian on an arbitrary (not necessarily Hermitian)
    matrix. Linear; no validation."""
    r = ops.rates
    h = ops.h_drive + ops.h_exchange
    out = -1j * (h @ mat - mat @ h)
    pairs = (
        (r.gamma, ops.sm1, ops.sp1),
        (r.gamma, ops.sm2, ops.sp2),
        (r.gamma12, ops.sm1, ops.sp2),
        (r.gamma12, ops.sm2, ops.sp1),
    )
    for rate, lower, raise_ in pairs:
        if rate == 0.0:
            continue
        qq = raise_ @ lower
        out += rate * (lower @ mat @ raise_) - 0.5 * rate * (qq @ mat + mat @ qq)
    return out


def liouvillian_apply(ops: ModelOperators, rho: np.ndarray, *, validate: bool = True) -> np.ndarray:
    """d rho / dt in the rates form. With validate=True the input must
    satisfy the density-matrix invariants."""
    if validate:
        rho = validate_density(rho)
    return _apply_rates(ops, np.asarray(rho, dtype=complex))


def jump_form_apply(ops: ModelOperators, rho: np.ndarray, *, validate: bool = True) -> np.ndarray:
    """d rho / dt assembled from the detector channels instead: Hamiltonian
    h_jump plus dissipators of j_left and the affine j_right."""
    if validate:
        rho = validate_density(rho)
    rho = np.asarray(rho, dtype=complex)
    h = ops.h_jump
    out = -1j * (h @ rho - rho @ h)
    jl = ops.j_left
    out += jl @ rho @ jl.conj().T - 0.5 * (ops.q_left @ rho + rho @ ops.q_left)
    op = ops.j_right_op
    s = ops.j_right_offset
    feed = op @ rho @ op.conj().T
    feed += s * rho @ op.conj().T + np.conj(s) * op @ rho + (abs(s) ** 2) * rho
    out += feed - 0.5 * (ops.q_right @ rho + rho @ ops.q_right)
    return out


def superoperator_matrix(ops: ModelOperators) -> np.ndarray:
    """The 16x16 matrix of the Liouvillian acting on row-major vec(rho)."""
    cols = np.empty((16, 16), dtype=complex)
    for i in range(4):
        for j in range(4):
            basis = np.zeros((4, 4), dtype=complex)
            basis[i, j] = 1.0
            cols[:, 4 * i + j] = _apply_rates(ops, basis).reshape(16)
    return cols


def integrate_me(
    ops: ModelOperators,
    rho0: np.ndarray,
    t_end: float,
    dt: float,
    sample_stride: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Evolve rho0 under the master equation; return (times, states).

    states has shape (n_samples, 4, 4); times are in units of inverse
    rate. dt must not exceed dt_max(ops).
    """
    bound = dt_max(ops)
    if dt <= 0.0 or dt > bound * (1.0 + 1e-12):
        raise GuardError(
            f"step dt = {dt:g} exceeds the stability bound dt_max = {bound:.6g} "
            "(must resolve the drive rotation and the decay rate)"
        )
    rho = validate_density(rho0)
    n_steps = int(round(t_end / dt))
    if n_steps < 0:
        raise PreconditionError(f"negative t_end {t_end!r}")
    keep = sample_steps(n_steps, sample_stride)
    keep_set = set(int(k) for k in keep)

    lmat = superoperator_matrix(ops)
    x = rho.reshape(16).copy()
    out = np.empty((len(keep), 4, 4), dtype=complex)
    pos = 0
    if 0 in keep_set:
        out[pos] = rho
        pos += 1
    for step in range(1, n_steps + 1):
        k1 = lmat @ x
        k2 = lmat @ (x + 0.5 * dt * k1)
        k3 = lmat @ (x + 0.5 * dt * k2)
        k4 = lmat @ (x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if step % _RESYM_EVERY == 0:
            m = x.reshape(4, 4)
            drift = herm_defect(m)
            if drift > _HERM_DRIFT_TOL:
                raise GuardError(
                    f"Hermiticity drift {drift:.3e} beyond {_HERM_DRIFT_TOL:g} "
                    f"at step {step}; integration is unstable"
                )
            x = (0.5 * (m + m.conj().T)).reshape(16)
        if step in keep_set:
            out[pos] = x.reshape(4, 4)
            pos += 1
    final_trace = float(np.trace(out[-1]).real)
    if abs(final_trace - 1.0) > 1e-8:
        raise GuardError(f"trace drifted to {final_trace:.12g} over the run")
    times = keep * dt
    return times, out


def steady_state(ops: ModelOperators) -> np.ndarray:
    """Unique stationary state from the superoperator null space.

    Raises GuardError when the null space is degenerate (dimension != 1),
    reporting the dimension found.
    """
    lmat = superoperator_matrix(ops)
    svals = np.linalg.svd(lmat, compute_uv=False)
    tol = max(float(svals[0]), 1.0) * 1e-10
    null_dim = int(np.sum(svals < tol))
    if null_dim != 1:
        raise GuardError(
            f"Liouvillian null space has dimension {null_dim}; "
            "the steady state is not unique for these parameters"
        )

    trace_row = np.zeros(16, dtype=complex)
    trace_row[[0, 5, 10, 15]] = 1.0
    x = None
    for row in range(15, -1, -1):
        a = lmat.copy()
        a[row] = trace_row
        b = np.zeros(16, dtype=complex)
        b[row] = 1.0
        try:
            cand = np.linalg.solve(a, b)
        except np.linalg.LinAlgError:
            continue
        # one round of iterative refinement
        cand = cand + np.linalg.solve(a, b - a @ cand)
        if np.all(np.isfinite(cand.view(float))):
            x = cand
            break
    if x is None:  # pragma: no cover - null_dim == 1 guarantees a usable row
        raise GuardError("steady-state linear solve failed on every pivot row")

    rho = x.reshape(4, 4)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    resid = float(np.max(np.abs(_apply_rates(ops, rho))))
    limit = 1e-10 * ops.rates.gamma
    if resid > limit:
        raise GuardError(
            f"steady-state residual {resid:.3e} exceeds {limit:.3e}"
        )
    low = float(np.min(np.linalg.eigvalsh(rho)))
    if low < -1e-8:
        raise GuardError(f"steady state has eigenvalue {low:.3e} below -1e-8")
    return rho


@dataclass(frozen=True)
class G2Curve:
    """Normalized two-time intensity correlation of the reflected light."""

    tau_grid: np.ndarray
    values: np.ndarray


def g2_left(ops: ModelOperators, tau_grid: np.ndarray) -> G2Curve:
    """g2 of the left (reflected) channel at stationarity.

    The zero-delay value is the normally ordered quartic flux ratio; for
    tau > 0 the conditioned state j_left rho_inf j_left+ (normalized) is
    propagated under the master equation and its reflected flux read out
    (regression rule). Raises GuardError when the stationary reflected
    flux vanishes (undriven system).
    """
    tau = np.asarray(tau_grid, dtype=float)
    if tau.ndim != 1 or len(tau) == 0 or tau[0] < 0.0 or np.any(np.diff(tau) <= 0.0):
        raise PreconditionError("tau_grid must be 1d, non-negative, strictly increasing")
    rho_inf = steady_state(ops)
    flux = float(np.trace(ops.q_left @ rho_inf).real)
    if flux <= 1e-12 * ops.rates.gamma:
        raise GuardError(
            "stationary reflected flux is zero (no drive); g2 is undefined"
        )
    jl = ops.j_left
    conditioned = jl @ rho_inf @ jl.conj().T / flux

    lmat = superoperator_matrix(ops)
    h = 0.9 * dt_max(ops)

    def rk4(x: np.ndarray, step: float) -> np.ndarray:
        k1 = lmat @ x
        k2 = lmat @ (x + 0.5 * step * k1)
        k3 = lmat @ (x + 0.5 * step * k2)
        k4 = lmat @ (x + step * k3)
        return x + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    q16 = ops.q_left.reshape(16)
    x = conditioned.reshape(16).copy()
    t = 0.0
    values = np.empty(len(tau))
    for k, target in enumerate(tau):
        remaining = target - t
        n_full = int(remaining / h)
        for _ in range(n_full):
            x = rk4(x, h)
        t += n_full * h
        left = target - t
        if left > 1e-15:
            x = rk4(x, left)
            t = target
        # Tr[Q rho] with row-major vecs and Hermitian Q is vdot(vec Q, vec rho)
        values[k] = np.vdot(q16, x).real / flux

    if np.any(values < -1e-9) or not np.all(np.isfinite(values)):
        raise GuardError("g2 propagation produced negative or non-finite values")
    return G2Curve(tau_grid=tau, values=np.maximum(values, 0.0))
