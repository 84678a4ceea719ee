"""Closed-form figures of merit: success probability, mistimed fidelity, timing budget."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dynamics import SystemParams, beta
from .protocol import InputState, ProtocolSchedule
from .pulses import raman_model

#: below this value of exp(-(kappa+gamma) t_d / 2) the long-window limit is used
LONG_WINDOW = 1e-6


def success_probability(params: SystemParams, schedule: ProtocolSchedule) -> float:
    """Success probability for a second-stage window ``t_d`` (ideal detectors).

    The bracket is evaluated exactly as
    ``cos^2(b t) + ((k-G)^2 + 4 g^2)/(4 b^2) sin^2(b t) + (k-G)/(4b) sin(2 b t)``.
    """
    b = beta(params)
    k, gm, g = params.kappa, params.gamma, params.g
    prefactor = 0.5 * math.exp(-(k + gm) * schedule.t1 / 2.0)
    td = schedule.t_d
    if math.isinf(td):
        return prefactor
    decay = math.exp(-(k + gm) * td / 2.0)
    if decay < LONG_WINDOW:
        return prefactor
    bt = b * td
    bracket = (math.cos(bt) ** 2
               + ((k - gm) ** 2 + 4.0 * g ** 2) / (4.0 * b ** 2) * math.sin(bt) ** 2
               + (k - gm) / (4.0 * b) * math.sin(2.0 * bt))
    return prefactor * (1.0 - decay * bracket)


def success_with_detector(params: SystemParams, schedule: ProtocolSchedule) -> float:
    return params.eta ** 2 * success_probability(params, schedule)


@dataclass(frozen=True)
class MistimedCoefficients:
    A: complex
    B: complex
    C: complex
    D: complex
    E: complex
    eps1: complex
    eps2_plus: complex
    eps2_minus: complex
    eps3_plus: complex
    eps3_minus: complex

    def eps(self, sign: int) -> tuple[complex, complex, complex]:
        if sign > 0:
            return self.eps1, self.eps2_plus, self.eps3_plus
        return self.eps1, self.eps2_minus, self.eps3_minus


def mistimed_coefficients(params: SystemParams, schedule: ProtocolSchedule,
                          inp: InputState) -> MistimedCoefficients:
    b = beta(params)
    k, gm, g = params.kappa, params.gamma, params.g
    skew = (k - gm) / (4.0 * b)
    tt = schedule.t1 + schedule.dt1

    def damped(t, trig):
        # an infinite window is meaningful only when something decays
        if math.isinf(t):
            if k + gm > 0:
                return 0.0
            raise ValueError("infinite window with kappa = gamma = 0")
        return math.exp(-(k + gm) * t / 4.0) * trig(b * t)

    def rabi(x):
        return math.cos(x) + skew * math.sin(x)

    A = damped(tt, rabi)
    B = 1j * (g / b) * damped(tt, math.sin)
    C = -1j * (g / b) * damped(schedule.tau1, math.sin)
    D = damped(schedule.t2, rabi)
    E = -1j * (g / b) * damped(schedule.t2, math.sin)
    eps1 = B * E * math.exp(-k * schedule.tau1 / 2.0) if k > 0 else B * E
    s_plus, s_minus = inp.c_g + inp.c_f, inp.c_g - inp.c_f
    return MistimedCoefficients(
        A=complex(A), B=B, C=C, D=complex(D), E=E, eps1=eps1,
        eps2_plus=s_plus * A * C * D * E, eps2_minus=s_minus * A * C * D * E,
        eps3_plus=s_plus * A * C * E ** 2, eps3_minus=s_minus * A * C * E ** 2,
    )


class MistimedResult(NamedTuple):
    fidelity: float
    rho: np.ndarray


def mistimed_state(coeffs: MistimedCoefficients, inp: InputState, sign: int) -> np.ndarray:
    """Atom-2 density matrix (``f, g, e`` basis) left by a mistimed first interaction.

    A coherent part ``eps1 * target + eps2 |e>`` plus an incoherent ``|g>``
    admixture of weight ``|eps2|^2 + 2|eps3|^2``.
    """
    e1, e2, e3 = coeffs.eps(sign)
    w_coh = abs(e1) ** 2 + abs(e2) ** 2
    w_g = abs(e2) ** 2 + 2.0 * abs(e3) ** 2
    total = w_coh + w_g
    if total == 0.0:
        raise ZeroDivisionError("all mistiming coefficients vanish")
    phi = np.array([e1 * inp.c_f, e1 * inp.c_g, e2], dtype=complex) / math.sqrt(w_coh)
    rho = w_coh * np.outer(phi, phi.conj())
    rho[1, 1] += w_g
    return rho / total


def fidelity_mistimed(params: SystemParams, schedule: ProtocolSchedule, inp: InputState,
                      sign: int = 1) -> MistimedResult:
    """Fidelity for the branch whose first click came from ``D+`` (sign=+1) or ``D-``."""
    c = mistimed_coefficients(params, schedule, inp)
    e1, e2, e3 = c.eps(sign)
    a1, a2, a3 = abs(e1) ** 2, abs(e2) ** 2, abs(e3) ** 2
    den = a1 + 2.0 * a2 + 2.0 * a3
    if den == 0.0:
        raise ZeroDivisionError("all mistiming coefficients vanish")
    f = (a1 + (a2 + 2.0 * a3) * abs(inp.c_g) ** 2) / den
    return MistimedResult(f, mistimed_state(c, inp, sign))


class FidelitySummary(NamedTuple):
    plus: float
    minus: float

    @property
    def average(self) -> float:
        return 0.5 * (self.plus + self.minus)


def branch_fidelities(params, schedule, inp) -> FidelitySummary:
    return FidelitySummary(fidelity_mistimed(params, schedule, inp, +1).fidelity,
                           fidelity_mistimed(params, schedule, inp, -1).fidelity)


def fidelity_scan(params: SystemParams, schedule: ProtocolSchedule, inp: InputState,
                  tau1_values, t2_values, sign: int = 1) -> np.ndarray:
    """Mistimed fidelity on a (tau1, t2) grid; rows follow ``tau1_values``."""
    out = np.empty((len(tau1_values), len(t2_values)))
    for i, tau1 in enumerate(tau1_values):
        for j, t2 in enumerate(t2_values):
            s = schedule.with_(tau1=float(tau1), t2=float(t2))
            out[i, j] = fidelity_mistimed(params, s, inp, sign).fidelity
    return out


def cavity_branching_fraction(params: SystemParams) -> float:
    """Probability that an excitation starting in ``|e,0>`` leaves through the cavity.

    ``kappa * int_0^inf |<g,1|U(t)|e,0>|^2 dt`` in closed form; tends to
    ``kappa / (kappa + gamma)`` for strong coupling.
    """
    b = beta(params)
    a = (params.kappa + params.gamma) / 2.0
    if a == 0.0:
        return math.nan
    return 2.0 * params.kappa * params.g ** 2 / (a * (a * a + 4.0 * b * b))


@dataclass(frozen=True)
class TimingBudget:
    rows: tuple[tuple[str, float], ...]

    @property
    def total(self) -> float:
        return float(sum(d for _, d in self.rows))

    def as_dict(self) -> dict:
        return {"stages": [{"stage": s, "duration_us": d} for s, d in self.rows],
                "total_us": self.total}


def timing_budget(params: SystemParams, schedule: ProtocolSchedule,
                  include_raman: bool = True) -> TimingBudget:
    """Durations of every stage; Raman transfers counted once for the swap and once for the remap."""
    rows = [("first_interaction", schedule.t1 + schedule.dt1)]
    raman = raman_model(params).duration if include_raman else 0.0
    if include_raman:
        rows.append(("raman_swap", raman))
    rows += [("detect_1", schedule.tau1), ("purge", schedule.tau2)]
    if include_raman:
        rows.append(("remap", raman))
    rows += [("second_interaction", schedule.t2), ("detect_2", schedule.t_d)]
    return TimingBudget(tuple(rows))

