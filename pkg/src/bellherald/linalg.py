"""Dense complex linear algebra for the fixed two-qubit problem.

Everything in this package lives in dimensions 2 and 4. The computational
basis is ordered {|ee>, |eg>, |ge>, |gg>} with qubit 1 the first tensor
factor and |e> = (1, 0) within each qubit. All phase conventions downstream
assume this ordering; it is defined here and nowhere else.
"""

from __future__ import annotations

import numpy as np

from .errors import GuardError, PreconditionError

__all__ = [
    "dag",
    "normalize",
    "herm_defect",
    "require_hermitian",
    "validate_density",
    "partial_trace",
    "eig_hermitian",
    "eig_general4",
]


def dag(mat: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return mat.conj().T


def normalize(vec: np.ndarray) -> np.ndarray:
    """Return vec scaled to unit Euclidean norm.

    Raises PreconditionError on a zero (or numerically zero) vector, since
    a normalized state no longer exists at that point.
    """
    nrm = float(np.linalg.norm(vec))
    if not np.isfinite(nrm) or nrm < 1e-300:
        raise PreconditionError("cannot normalize a zero or non-finite vector")
    return vec / nrm


def herm_defect(mat: np.ndarray) -> float:
    """Max elementwise deviation of mat from its own adjoint."""
    return float(np.max(np.abs(mat - mat.conj().T)))


def require_hermitian(mat: np.ndarray, tol: float, what: str = "matrix") -> None:
    d = herm_defect(mat)
    if d > tol:
        raise PreconditionError(
            f"{what} is not Hermitian within {tol:g} (defect {d:.3e})"
        )


def validate_density(
    rho: np.ndarray,
    *,
    herm_tol: float = 1e-9,
    trace_tol: float = 1e-9,
    eig_floor: float = -1e-8,
    what: str = "density matrix",
) -> np.ndarray:
    """Check the density-matrix invariants and return a hermitized copy.

    Raises PreconditionError when rho is not Hermitian within herm_tol,
    its trace is not 1 within trace_tol, or an eigenvalue sits below
    eig_floor.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise PreconditionError(f"{what} must be 4x4, got {rho.shape}")
    require_hermitian(rho, herm_tol, what)
    tr = float(np.trace(rho).real)
    if abs(tr - 1.0) > trace_tol:
        raise PreconditionError(f"{what} trace {tr:.12g} is not 1 within {trace_tol:g}")
    rho = 0.5 * (rho + rho.conj().T)
    low = float(np.min(np.linalg.eigvalsh(rho)))
    if low < eig_floor:
        raise PreconditionError(f"{what} has eigenvalue {low:.3e} below {eig_floor:g}")
    return rho


def partial_trace(rho: np.ndarray, keep: int) -> np.ndarray:
    """Reduced 2x2 state of one qubit from a 4x4 two-qubit density matrix.

    keep = 1 traces out qubit 2 (the second tensor factor); keep = 2 traces
    out qubit 1. Input must be Hermitian within 1e-10 with trace within
    1e-10 of 1.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise PreconditionError(f"partial_trace expects a 4x4 matrix, got {rho.shape}")
    require_hermitian(rho, 1e-10, "density matrix")
    tr = complex(np.trace(rho))
    if abs(tr - 1.0) > 1e-10:
        raise PreconditionError(f"density matrix trace {tr:.12g} is not 1 within 1e-10")
    if keep not in (1, 2):
        raise PreconditionError(f"keep must be 1 or 2, got {keep!r}")
    blocks = rho.reshape(2, 2, 2, 2)
    if keep == 1:
        out = np.einsum("ikjk->ij", blocks)
    else:
        out = np.einsum("kikj->ij", blocks)
    return 0.5 * (out + out.conj().T)


def eig_hermitian(mat: np.ndarray, vectors: bool = False):
    """Real eigenvalues of a Hermitian 2x2 or 4x4 matrix, ascending.

    With vectors=True also returns the unitary V with mat = V diag(w) V+.
    Input must be Hermitian within 1e-9.
    """
    mat = np.asarray(mat, dtype=complex)
    if mat.shape not in ((2, 2), (4, 4)):
        raise PreconditionError(f"eig_hermitian expects 2x2 or 4x4, got {mat.shape}")
    require_hermitian(mat, 1e-9)
    try:
        if vectors:
            w, v = np.linalg.eigh(mat)
            return w, v
        return np.linalg.eigvalsh(mat)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise GuardError(f"Hermitian eigenvalue iteration failed: {exc}") from exc


def eig_general4(mat: np.ndarray) -> np.ndarray:
    """The four complex eigenvalues of a general 4x4 matrix (unordered).

    Raises GuardError if the QR iteration fails to converge, and
    PreconditionError on non-finite input.
    """
    mat = np.asarray(mat, dtype=complex)
    if mat.shape != (4, 4):
        raise PreconditionError(f"eig_general4 expects a 4x4 matrix, got {mat.shape}")
    if not np.all(np.isfinite(mat.view(float))):
        raise PreconditionError("eig_general4 requires finite entries")
    try:
        return np.linalg.eigvals(mat)
    except np.linalg.LinAlgError as exc:
        raise GuardError(f"eigenvalue QR iteration did not converge: {exc}") from exc
