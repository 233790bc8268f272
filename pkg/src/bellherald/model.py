"""Physical parameters and the 4x4 operators of the driven qubit pair.

Two qubits sit in a 1d waveguide a distance L apart, both driven by a
classical coherent tone of amplitude alpha entering from the left. The
waveguide mediates a coherent exchange coupling and correlated decay; the
outgoing field separates into a left-moving (reflected) channel and a
right-moving (transmitted) channel that also carries the drive.

All operators are built in the fixed basis {|ee>, |eg>, |ge>, |gg>}
(see linalg). Units: hbar = 1; with the default coupling 1/sqrt(4 pi) the
single-qubit decay rate is 1 and time is measured in its inverse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError

__all__ = [
    "DEFAULT_COUPLING",
    "ModelParams",
    "DerivedRates",
    "ModelOperators",
    "derive_rates",
    "build_operators",
]

# Coupling that makes the single-qubit decay rate exactly 1.
DEFAULT_COUPLING = 1.0 / math.sqrt(4.0 * math.pi)

_SIGMA_MINUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
_ID2 = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class ModelParams:
    """Physical inputs.

    g: qubit-waveguide coupling, units sqrt(rate).
    alpha_mag, theta: modulus and phase of the drive amplitude.
    kl: dimensionless propagation phase k*L between the qubits (radians).
    eta_l, eta_r: detection efficiencies of the left (reflection) and
        right (transmission) detectors, in [0, 1].
    """

    g: float = DEFAULT_COUPLING
    alpha_mag: float = 100.0
    theta: float = 0.0
    kl: float = math.pi / 2.0
    eta_l: float = 1.0
    eta_r: float = 1.0

    def __post_init__(self) -> None:
        vals = (self.g, self.alpha_mag, self.theta, self.kl, self.eta_l, self.eta_r)
        if not all(math.isfinite(v) for v in vals):
            raise PreconditionError("all model parameters must be finite")
        if self.g <= 0.0:
            raise PreconditionError(f"coupling g must be positive, got {self.g}")
        if self.alpha_mag < 0.0:
            raise PreconditionError(f"alpha_mag must be >= 0, got {self.alpha_mag}")
        for name in ("eta_l", "eta_r"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise PreconditionError(f"{name} must lie in [0, 1], got {v}")

    @property
    def alpha(self) -> complex:
        return self.alpha_mag * complex(math.cos(self.theta), math.sin(self.theta))


@dataclass(frozen=True)
class DerivedRates:
    """Decay and exchange rates fixed by (g, kl)."""

    gamma: float        # individual decay rate of each qubit, 4 pi g^2
    gamma12: float      # cooperative decay, 4 pi g^2 cos(kl)
    omega: float        # coherent exchange strength, 2 pi g^2 sin(kl)


def derive_rates(params: ModelParams) -> DerivedRates:
    gsq = params.g * params.g
    return DerivedRates(
        gamma=4.0 * math.pi * gsq,
        gamma12=4.0 * math.pi * gsq * math.cos(params.kl),
        omega=2.0 * math.pi * gsq * math.sin(params.kl),
    )


def _frozen(mat: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(mat, dtype=complex)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ModelOperators:
    """Immutable bundle of all 4x4 operators for one parameter set.

    j_right is affine: the matrix part j_right_op acts on the state while
    j_right_offset (i alpha / sqrt(2 pi)) multiplies the identity; the two
    are stored separately because the diffusive engine needs the matrix
    part on its own. q_right and h_eff include the offset fully expanded.
    """

    params: ModelParams
    rates: DerivedRates
    exchange_on: bool

    sm1: np.ndarray = field(repr=False, default=None)
    sp1: np.ndarray = field(repr=False, default=None)
    sm2: np.ndarray = field(repr=False, default=None)
    sp2: np.ndarray = field(repr=False, default=None)
    c_minus: np.ndarray = field(repr=False, default=None)
    c_plus: np.ndarray = field(repr=False, default=None)
    h_drive: np.ndarray = field(repr=False, default=None)
    h_exchange: np.ndarray = field(repr=False, default=None)
    h_jump: np.ndarray = field(repr=False, default=None)
    h_eff: np.ndarray = field(repr=False, default=None)
    j_left: np.ndarray = field(repr=False, default=None)
    j_right_op: np.ndarray = field(repr=False, default=None)
    j_right_offset: complex = 0.0j
    b_diff: np.ndarray = field(repr=False, default=None)
    x_quad: np.ndarray = field(repr=False, default=None)
    q_left: np.ndarray = field(repr=False, default=None)
    q_right: np.ndarray = field(repr=False, default=None)
    a_drift: np.ndarray = field(repr=False, default=None)


def build_operators(params: ModelParams, *, exchange_on: bool = True) -> ModelOperators:
    """Assemble every operator the integrators and engines need.

    exchange_on=False zeroes the coherent exchange Hamiltonian everywhere
    it appears (used by the exchange-leakage diagnostics); the dissipative
    rates are untouched.
    """
    rates = derive_rates(params)
    g = params.g
    alpha = params.alpha
    phase = complex(math.cos(params.kl), math.sin(params.kl))  # e^{+i kl}
    root2pi = math.sqrt(2.0 * math.pi)

    sm1 = np.kron(_SIGMA_MINUS, _ID2)
    sm2 = np.kron(_ID2, _SIGMA_MINUS)
    sp1 = sm1.conj().T
    sp2 = sm2.conj().T

    c_minus = sm1 + np.conj(phase) * sm2
    c_plus = c_minus.conj().T

    h_drive = g * alpha * c_plus + g * np.conj(alpha) * c_minus
    h_exchange = rates.omega * (sp1 @ sm2 + sp2 @ sm1)
    if not exchange_on:
        h_exchange = np.zeros((4, 4), dtype=complex)
    h_jump = h_exchange + 0.5 * h_drive

    j_left = root2pi * g * (sm1 + phase * sm2)
    j_right_op = root2pi * g * c_minus
    j_right_offset = 1j * alpha / root2pi

    q_left = j_left.conj().T @ j_left
    # (Op + s)+(Op + s) with Op the matrix part and s the scalar offset.
    s = j_right_offset
    q_right = (
        j_right_op.conj().T @ j_right_op
        + np.conj(s) * j_right_op
        + s * j_right_op.conj().T
        + (abs(s) ** 2) * np.eye(4, dtype=complex)
    )

    h_eff = h_jump - 0.5j * (q_left + q_right)

    # Diffusion operator of the strong-drive limit and its measured
    # quadrature; the drive phase rotates the detected field so that the
    # homodyne record couples to this particular combination.
    eitheta = complex(math.cos(params.theta), math.sin(params.theta))
    b_diff = -1j * np.conj(eitheta) * root2pi * g * c_minus
    x_quad = b_diff + b_diff.conj().T

    # No-click drift generator of the diffusive engine: full drive and
    # exchange, both dissipators' norm decay, no noise, no feeds.
    a_drift = (
        -1j * (h_drive + h_exchange)
        - math.pi * g * g * (c_plus @ c_minus)
        - 0.5 * q_left
    )

    return ModelOperators(
        params=params,
        rates=rates,
        exchange_on=exchange_on,
        sm1=_frozen(sm1),
        sp1=_frozen(sp1),
        sm2=_frozen(sm2),
        sp2=_frozen(sp2),
        c_minus=_frozen(c_minus),
        c_plus=_frozen(c_plus),
        h_drive=_frozen(h_drive),
        h_exchange=_frozen(h_exchange),
        h_jump=_frozen(h_jump),
        h_eff=_frozen(h_eff),
        j_left=_frozen(j_left),
        j_right_op=_frozen(j_right_op),
        j_right_offset=j_right_offset,
        b_diff=_frozen(b_diff),
        x_quad=_frozen(x_quad),
        q_left=_frozen(q_left),
        q_right=_frozen(q_right),
        a_drift=_frozen(a_drift),
    )
