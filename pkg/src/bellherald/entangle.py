"""Entanglement measures, Bell-state constants, and level populations.

Entropy and entanglement of formation are in bits (log base 2). The
population basis used throughout the trajectory output is the ladder basis
{|ee>, |+i>, |-i>, |gg>}, where |+i> and |-i> are the circularly phased
Bell states (|ge> +- i|eg>)/sqrt(2): at kl = pi/2 the collective lowering
operators single one of them out as a dark state, which is what makes the
heralding scheme work.

Complex conjugation (in the spin-flip construction) is taken in the fixed
computational basis {|ee>, |eg>, |ge>, |gg>}; the spin-flip matrix
sigma_y x sigma_y is real symmetric in that basis.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import PreconditionError
from .linalg import eig_general4, eig_hermitian, partial_trace, validate_density

__all__ = [
    "PHI_PLUS",
    "PHI_MINUS",
    "PSI_PLUS",
    "PSI_MINUS",
    "PLUS_I",
    "MINUS_I",
    "SYM",
    "ANTISYM",
    "EE",
    "GG",
    "POP_BASIS",
    "binary_entropy",
    "entropy",
    "entropy_batch",
    "concurrence",
    "concurrence_batch",
    "eof",
    "eof_from_concurrence",
    "eof_batch",
    "populations",
    "populations_batch",
    "bell_fidelity",
]

_RT2 = 1.0 / math.sqrt(2.0)


def _state(vals) -> np.ndarray:
    v = np.array(vals, dtype=complex)
    v.setflags(write=False)
    return v


EE = _state([1, 0, 0, 0])
GG = _state([0, 0, 0, 1])
PHI_PLUS = _state([_RT2, 0, 0, _RT2])        # (|gg> + |ee>)/sqrt2
PHI_MINUS = _state([-_RT2, 0, 0, _RT2])      # (|gg> - |ee>)/sqrt2
PSI_PLUS = _state([0, _RT2, _RT2, 0])        # (|ge> + |eg>)/sqrt2
PSI_MINUS = _state([0, -_RT2, _RT2, 0])      # (|ge> - |eg>)/sqrt2
PLUS_I = _state([0, 1j * _RT2, _RT2, 0])     # (|ge> + i|eg>)/sqrt2
MINUS_I = _state([0, -1j * _RT2, _RT2, 0])   # (|ge> - i|eg>)/sqrt2
SYM = _state([0, _RT2, _RT2, 0])             # (|eg> + |ge>)/sqrt2
ANTISYM = _state([0, _RT2, -_RT2, 0])        # (|eg> - |ge>)/sqrt2

# Rows project onto {|ee>, |+i>, |-i>, |gg>}, the trajectory population basis.
POP_BASIS = np.stack([EE, PLUS_I, MINUS_I, GG])
POP_BASIS.setflags(write=False)

# sigma_y x sigma_y in the computational basis (real symmetric).
_SIGMA_Y = np.array([[0.0, -1j], [1j, 0.0]], dtype=complex)
SPIN_FLIP = np.kron(_SIGMA_Y, _SIGMA_Y).real.astype(complex)
SPIN_FLIP.setflags(write=False)


def binary_entropy(p: float) -> float:
    """h(p) = -p log2 p - (1-p) log2 (1-p), with 0 log 0 = 0.

    Accepts values a hair outside [0, 1] from floating-point noise.
    """
    if not -1e-9 <= p <= 1.0 + 1e-9:
        raise PreconditionError(f"binary_entropy argument {p!r} outside [0, 1]")
    p = min(max(p, 0.0), 1.0)
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -(p * math.log2(p) + (1.0 - p) * math.log2(1.0 - p))


def entropy(psi: np.ndarray) -> float:
    """Von Neumann entropy (bits) of one qubit of a pure two-qubit state."""
    psi = np.asarray(psi, dtype=complex).reshape(4)
    nrm = float(np.linalg.norm(psi))
    if abs(nrm - 1.0) > 1e-9:
        raise PreconditionError(f"entropy expects a normalized state, norm {nrm:.12g}")
    psi = psi / nrm
    reduced = partial_trace(np.outer(psi, psi.conj()), keep=1)
    vals = eig_hermitian(reduced)
    s = 0.0
    for lam in vals:
        lam = float(min(max(lam, 0.0), 1.0))
        if lam > 0.0:
            s -= lam * math.log2(lam)
    return float(min(max(s, 0.0), 1.0))


def entropy_batch(psis: np.ndarray) -> np.ndarray:
    """Entropy for a stack of pure states, shape (n, 4) -> (n,).

    Closed form through the reduced 2x2 eigenvalues; no per-state loop.
    """
    psis = np.asarray(psis, dtype=complex).reshape(-1, 4)
    nrm2 = np.einsum("ni,ni->n", psis.conj(), psis).real
    a, b, c, d = psis[:, 0], psis[:, 1], psis[:, 2], psis[:, 3]
    r00 = (np.abs(a) ** 2 + np.abs(b) ** 2) / nrm2
    r11 = (np.abs(c) ** 2 + np.abs(d) ** 2) / nrm2
    off = (a * c.conj() + b * d.conj()) / nrm2
    disc = np.sqrt(np.maximum(0.25 - (r00 * r11 - np.abs(off) ** 2), 0.0))
    lam = np.clip(0.5 + disc, 0.0, 1.0)
    out = np.zeros_like(lam)
    interior = (lam > 0.0) & (lam < 1.0)
    lo = 1.0 - lam[interior]
    hi = lam[interior]
    out[interior] = -(hi * np.log2(hi) + lo * np.log2(lo))
    return np.clip(out, 0.0, 1.0)


def concurrence(rho: np.ndarray) -> float:
    """Wootters concurrence of a two-qubit density matrix.

    C = max(0, l1 - l2 - l3 - l4) with l_i the descending square roots of
    the eigenvalues of rho (sy x sy) rho* (sy x sy). Tiny negative
    eigenvalue noise is clamped to zero before the square root.
    """
    rho = validate_density(rho)
    flipped = SPIN_FLIP @ rho.conj() @ SPIN_FLIP
    lam = eig_general4(rho @ flipped).real
    lam = np.sqrt(np.maximum(lam, 0.0))
    lam.sort()
    c = lam[3] - lam[2] - lam[1] - lam[0]
    return float(min(max(c, 0.0), 1.0))


def concurrence_batch(rhos: np.ndarray) -> np.ndarray:
    """Concurrence for a stack of density matrices, shape (n, 4, 4) -> (n,).

    Uses the singular-value form: with rho = V D V+, the Wootters square
    roots equal the singular values of sqrt(D) V+ (sy x sy) conj(V) sqrt(D),
    which needs only a Hermitian eigendecomposition and an SVD (both
    batched) instead of a non-symmetric eigenproblem per state. Agrees
    with the scalar route to near machine precision (pinned in tests).
    """
    rhos = np.asarray(rhos, dtype=complex).reshape(-1, 4, 4)
    rhos = 0.5 * (rhos + np.conj(np.swapaxes(rhos, 1, 2)))
    w, v = np.linalg.eigh(rhos)
    root = np.sqrt(np.maximum(w, 0.0))
    core = np.einsum("nji,jk,nkl->nil", v.conj(), SPIN_FLIP, v.conj())
    z = root[:, :, None] * core * root[:, None, :]
    sig = np.linalg.svd(z, compute_uv=False)
    c = sig[:, 0] - sig[:, 1] - sig[:, 2] - sig[:, 3]
    return np.clip(c, 0.0, 1.0)


def eof_from_concurrence(c: float) -> float:
    """Entanglement of formation (bits) as a function of concurrence."""
    c = float(min(max(c, 0.0), 1.0))
    return binary_entropy(0.5 * (1.0 + math.sqrt(max(1.0 - c * c, 0.0))))


def eof(rho: np.ndarray) -> float:
    """Entanglement of formation (bits) of a two-qubit density matrix."""
    return eof_from_concurrence(concurrence(rho))


def eof_batch(rhos: np.ndarray) -> np.ndarray:
    c = concurrence_batch(rhos)
    arg = np.clip(0.5 * (1.0 + np.sqrt(np.clip(1.0 - c * c, 0.0, 1.0))), 0.5, 1.0)
    out = np.zeros_like(arg)
    interior = arg < 1.0
    hi = arg[interior]
    lo = 1.0 - hi
    out[interior] = -(hi * np.log2(hi) + lo * np.log2(lo))
    return np.clip(out, 0.0, 1.0)


def populations(state: np.ndarray) -> np.ndarray:
    """Projections onto {|ee>, |+i>, |-i>, |gg>}; sums to 1.

    Accepts a pure state (4,) or a density matrix (4, 4); either is
    normalized defensively before projecting.
    """
    state = np.asarray(state, dtype=complex)
    if state.shape == (4,):
        amps = POP_BASIS.conj() @ state
        p = np.abs(amps) ** 2
        total = float(np.vdot(state, state).real)
    elif state.shape == (4, 4):
        p = np.einsum("bi,ij,bj->b", POP_BASIS.conj(), state, POP_BASIS).real
        total = float(np.trace(state).real)
    else:
        raise PreconditionError(f"populations expects (4,) or (4,4), got {state.shape}")
    if total <= 0.0:
        raise PreconditionError("state has non-positive norm or trace")
    return p / total


def populations_batch(states: np.ndarray) -> np.ndarray:
    """Batched populations: (n, 4) pure states or (n, 4, 4) densities -> (n, 4)."""
    states = np.asarray(states, dtype=complex)
    if states.ndim == 2 and states.shape[1] == 4:
        amps = states @ POP_BASIS.conj().T
        p = np.abs(amps) ** 2
        total = np.einsum("ni,ni->n", states.conj(), states).real
    elif states.ndim == 3 and states.shape[1:] == (4, 4):
        p = np.einsum("bi,nij,bj->nb", POP_BASIS.conj(), states, POP_BASIS).real
        total = np.trace(states, axis1=1, axis2=2).real
    else:
        raise PreconditionError(f"unsupported batch shape {states.shape}")
    return p / total[:, None]


def bell_fidelity(state: np.ndarray, target: np.ndarray) -> float:
    """Overlap with a reference pure state: |<t|psi>|^2 or <t|rho|t>."""
    state = np.asarray(state, dtype=complex)
    target = np.asarray(target, dtype=complex).reshape(4)
    if state.shape == (4,):
        val = abs(np.vdot(target, state)) ** 2 / float(np.vdot(state, state).real)
    elif state.shape == (4, 4):
        val = float((target.conj() @ state @ target).real) / float(np.trace(state).real)
    else:
        raise PreconditionError(f"bell_fidelity expects (4,) or (4,4), got {state.shape}")
    return float(min(max(val, 0.0), 1.0))
