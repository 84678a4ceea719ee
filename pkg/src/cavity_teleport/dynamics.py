"""Conditional (no-click) evolution and quantum-jump channels.

Rates are angular frequencies in rad/us and times are in us.  Each
atom-cavity pair only couples ``|e,0>`` with ``|g,1>``; every other pair
configuration just decays at a fixed rate, so the no-jump propagator is
assembled from 2x2 blocks instead of a dense matrix exponential.

Pair configurations are indexed ``level*2 + n``:
``f0, f1, g0, g1, e0, e1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from . import hilbert as hs

TWO_PI = 2.0 * math.pi

# pair-configuration indices
F0, F1, G0, G1, E0, E1 = range(6)


class OverdampedRegime(ValueError):
    """Raised when g^2 <= (kappa - gamma)^2 / 16, where beta is not real."""


@dataclass(frozen=True)
class SystemParams:
    """Physical rates (rad/us) and detector efficiency.

    ``omega_raman`` and ``delta_raman`` describe the classical Raman drive
    and are only needed by :func:`cavity_teleport.pulses.raman_model`.
    """

    g: float
    kappa: float
    gamma: float
    eta: float = 1.0
    omega_raman: float | None = None
    delta_raman: float | None = None
    beta: float = field(init=False, repr=False)

    def __post_init__(self):
        if not self.g > 0:
            raise ValueError(f"coupling g must be positive, got {self.g}")
        if self.kappa < 0 or self.gamma < 0:
            raise ValueError("decay rates must be nonnegative")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"detector efficiency must lie in [0, 1], got {self.eta}")
        object.__setattr__(self, "beta", beta(self))

    @classmethod
    def from_mhz(cls, g_mhz, kappa_mhz, gamma_mhz, eta=1.0,
                 omega_over_g=None, delta_over_omega=None) -> "SystemParams":
        """Build from ordinary frequencies in MHz (multiplied by 2*pi)."""
        g = TWO_PI * g_mhz
        omega = None if omega_over_g is None else omega_over_g * g
        delta = None if (omega is None or delta_over_omega is None) else delta_over_omega * omega
        return cls(g=g, kappa=TWO_PI * kappa_mhz, gamma=TWO_PI * gamma_mhz, eta=eta,
                   omega_raman=omega, delta_raman=delta)

    @classmethod
    def cesium(cls, eta: float = 0.6) -> "SystemParams":
        """Cs trapped-atom reference values: g, kappa, Gamma = 2pi x (34, 4.1, 2.6) MHz."""
        return cls.from_mhz(34.0, 4.1, 2.6, eta=eta, omega_over_g=300.0, delta_over_omega=10.0)

    def replace(self, **changes) -> "SystemParams":
        kw = dict(g=self.g, kappa=self.kappa, gamma=self.gamma, eta=self.eta,
                  omega_raman=self.omega_raman, delta_raman=self.delta_raman)
        kw.update(changes)
        return SystemParams(**kw)


def beta(params) -> float:
    """Damped vacuum-Rabi frequency ``sqrt(g^2 - (kappa-gamma)^2/16)``."""
    disc = params.g ** 2 - (params.kappa - params.gamma) ** 2 / 16.0
    if disc <= 0.0:
        raise OverdampedRegime(
            f"g^2 = {params.g ** 2:.6g} <= (kappa-gamma)^2/16 = "
            f"{(params.kappa - params.gamma) ** 2 / 16.0:.6g}"
        )
    return math.sqrt(disc)


# --- Hamiltonian -------------------------------------------------------------

def conditional_hamiltonian(params: SystemParams) -> np.ndarray:
    """Non-Hermitian generator of no-click evolution on the 36-dim space."""
    h = np.zeros((hs.DIM, hs.DIM), dtype=complex)
    for j in (1, 2):
        a = hs.annihilation(j)
        sp = hs.raising(j)
        h += params.g * (a @ sp + a.conj().T @ sp.conj().T)
        h -= 0.5j * params.kappa * hs.number(j)
        h -= 0.5j * params.gamma * hs.excited_projector(j)
    return h


def pair_hamiltonian(params: SystemParams) -> np.ndarray:
    """6x6 conditional Hamiltonian of one atom-cavity pair."""
    h = np.zeros((6, 6), dtype=complex)
    h[E0, G1] = h[G1, E0] = params.g
    h[F1, F1] = -0.5j * params.kappa
    h[G1, G1] = -0.5j * params.kappa
    h[E0, E0] = -0.5j * params.gamma
    h[E1, E1] = -0.5j * (params.kappa + params.gamma)
    return h


def pair_decay_rates(params: SystemParams) -> np.ndarray:
    """Total jump rate carried by each pair configuration."""
    k, gm = params.kappa, params.gamma
    return np.array([0.0, k, 0.0, k, gm, k + gm])


def pair_propagator(params: SystemParams, t) -> np.ndarray:
    """``exp(-i H_pair t)`` for scalar or array ``t``; shape ``t.shape + (6, 6)``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("propagation time must be nonnegative")
    k, gm, b = params.kappa, params.gamma, params.beta
    skew = (k - gm) / (4.0 * b)
    env = np.exp(-(k + gm) * t / 4.0)
    c, s = np.cos(b * t), np.sin(b * t)
    u = np.zeros(t.shape + (6, 6), dtype=complex)
    u[..., F0, F0] = 1.0
    u[..., G0, G0] = 1.0
    u[..., F1, F1] = np.exp(-k * t / 2.0)
    u[..., E1, E1] = np.exp(-(k + gm) * t / 2.0)
    u[..., E0, E0] = env * (c + skew * s)
    u[..., G1, G1] = env * (c - skew * s)
    off = -1j * (params.g / b) * env * s
    u[..., E0, G1] = off
    u[..., G1, E0] = off
    return u


def no_jump_propagator(params: SystemParams, t: float) -> np.ndarray:
    """36x36 no-click propagator ``exp(-i H_con t)``."""
    if t < 0:
        raise ValueError("propagation time must be nonnegative")
    u = pair_propagator(params, t)
    return np.kron(u, u)


def _pair_scalar(params: SystemParams, t: float) -> np.ndarray:
    k, gm, b = params.kappa, params.gamma, params.beta
    skew = (k - gm) / (4.0 * b)
    env = math.exp(-(k + gm) * t / 4.0)
    c, s = math.cos(b * t), math.sin(b * t)
    off = -1j * (params.g / b) * env * s
    u = np.zeros(36, dtype=complex)
    u[[0, 7, 14, 21, 22, 27, 28, 35]] = (1.0, math.exp(-k * t / 2.0), 1.0, env * (c - skew * s),
                                         off, off, env * (c + skew * s), env * env)
    return u.reshape(6, 6)


def evolve(params: SystemParams, psi: np.ndarray, t) -> np.ndarray:
    """Apply the no-jump propagator to ``psi`` without forming 36x36 matrices.

    The state is reshaped to a 6x6 (pair 1 x pair 2) array and evolved as
    ``U psi U^T``.  With array ``t`` the result has shape ``t.shape + (36,)``.
    """
    m = np.asarray(psi).reshape(6, 6)
    if np.ndim(t) == 0:
        if t < 0:
            raise ValueError("propagation time must be nonnegative")
        u = _pair_scalar(params, float(t))
        return (u @ m @ u.T).reshape(hs.DIM)
    u = pair_propagator(params, t)
    out = u @ m @ np.swapaxes(u, -1, -2)
    return out.reshape(np.shape(t) + (hs.DIM,))


def jump_rate(params: SystemParams, psi: np.ndarray) -> float:
    """Total instantaneous jump rate ``<psi| sum_k C_k^dag C_k |psi>``."""
    m = np.asarray(psi).reshape(6, 6)
    p = m.real ** 2 + m.imag ** 2
    w = pair_decay_rates(params)
    return float(w @ (p.sum(axis=1) + p.sum(axis=0)))


# --- closed-form single-pair dynamics -----------------------------------------

def rabi_e0(params: SystemParams, t: float) -> tuple[complex, complex]:
    """Amplitudes on ``|e,0>`` and ``|g,1>`` after no-click evolution of ``|e,0>``."""
    if t < 0:
        raise ValueError("propagation time must be nonnegative")
    b = beta(params)
    env = math.exp(-(params.kappa + params.gamma) * t / 4.0)
    amp_e0 = env * (math.cos(b * t) + (params.kappa - params.gamma) / (4.0 * b) * math.sin(b * t))
    amp_g1 = -1j * (params.g / b) * env * math.sin(b * t)
    return complex(amp_e0), amp_g1


def solve_t1(params: SystemParams, xtol: float = 1e-16) -> float:
    """First time at which the excited amplitude of ``|e,0>`` vanishes.

    Solves ``cos(bt) + (kappa-gamma)/(4b) sin(bt) = 0`` on ``(0, pi/b]``;
    the bracket form stays regular where the tangent form blows up.
    """
    b = beta(params)
    skew = (params.kappa - params.gamma) / (4.0 * b)

    def bracket(t):
        return math.cos(b * t) + skew * math.sin(b * t)

    return brentq(bracket, 0.0, math.pi / b, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200)


# --- jump channels ------------------------------------------------------------

class Channel(Enum):
    DPLUS = "D+"
    DMINUS = "D-"
    SPONT1 = "spont1"
    SPONT2 = "spont2"

    @property
    def is_detector(self) -> bool:
        return self in (Channel.DPLUS, Channel.DMINUS)

    @property
    def sign(self) -> int:
        if self is Channel.DPLUS:
            return 1
        if self is Channel.DMINUS:
            return -1
        raise ValueError(f"{self} is not a detector port")


@dataclass(frozen=True)
class JumpChannel:
    label: Channel
    collapse_op: np.ndarray


def jump_channels(params: SystemParams) -> list[JumpChannel]:
    """Rate-weighted collapse operators for both detector ports and free-space emission."""
    a1, a2 = hs.annihilation(1), hs.annihilation(2)
    rk = math.sqrt(params.kappa / 2.0)
    rg = math.sqrt(params.gamma)
    return [
        JumpChannel(Channel.DPLUS, rk * (a1 + a2)),
        JumpChannel(Channel.DMINUS, rk * (a1 - a2)),
        JumpChannel(Channel.SPONT1, rg * hs.lowering(1)),
        JumpChannel(Channel.SPONT2, rg * hs.lowering(2)),
    ]


def jump(channel: JumpChannel, psi: np.ndarray) -> np.ndarray:
    """Apply a collapse operator; the result is left unnormalized."""
    return hs.apply(channel.collapse_op, psi)


def channel_weights(params: SystemParams, psi: np.ndarray) -> np.ndarray:
    """Squared norms ``||C_k psi||^2`` in the order D+, D-, spont1, spont2.

    Computed on the 6x6 pair reshaping, without building 36x36 matrices.
    """
    m = np.asarray(psi).reshape(hs.N_LEVELS, 2, hs.N_LEVELS, 2)
    c1 = np.zeros_like(m)
    c2 = np.zeros_like(m)
    c1[:, 0, :, :] = m[:, 1, :, :]
    c2[:, :, :, 0] = m[:, :, :, 1]
    half_k = params.kappa / 2.0
    w_plus = half_k * np.sum(np.abs(c1 + c2) ** 2)
    w_minus = half_k * np.sum(np.abs(c1 - c2) ** 2)
    w_s1 = params.gamma * np.sum(np.abs(m[hs.Level.E]) ** 2)
    w_s2 = params.gamma * np.sum(np.abs(m[:, :, hs.Level.E]) ** 2)
    return np.array([w_plus, w_minus, w_s1, w_s2])


def apply_jump(params: SystemParams, label: Channel, psi: np.ndarray) -> np.ndarray:
    """Structured (matrix-free) collapse; agrees with :func:`jump` on ``jump_channels``."""
    m = np.asarray(psi).reshape(hs.N_LEVELS, 2, hs.N_LEVELS, 2)
    out = np.zeros_like(m)
    if label.is_detector:
        r = math.sqrt(params.kappa / 2.0)
        out[:, 0, :, :] += r * m[:, 1, :, :]
        out[:, :, :, 0] += label.sign * r * m[:, :, :, 1]
    elif label is Channel.SPONT1:
        out[hs.Level.G] = math.sqrt(params.gamma) * m[hs.Level.E]
    else:
        out[:, :, hs.Level.G] = math.sqrt(params.gamma) * m[:, :, hs.Level.E]
    return out.reshape(hs.DIM)


def detector_projection(label: Channel, psi: np.ndarray) -> np.ndarray:
    """Beam-splitter output mode ``(a1 +/- a2)/sqrt(2)`` applied to ``psi``, without the rate factor.

    Conditional states built with this map keep the squared norm of the
    no-click probability bookkeeping (it never exceeds 1 within the
    one-photon truncation) and carry the bare interference amplitudes.
    """
    if not label.is_detector:
        raise ValueError(f"{label} is not a detector port")
    m = np.asarray(psi).reshape(hs.N_LEVELS, 2, hs.N_LEVELS, 2)
    out = np.zeros_like(m)
    r = math.sqrt(0.5)
    out[:, 0, :, :] += r * m[:, 1, :, :]
    out[:, :, :, 0] += label.sign * r * m[:, :, :, 1]
    return out.reshape(hs.DIM)
