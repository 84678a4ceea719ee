"""Teleportation sequence: preparation, two interaction/detection cycles, correction.

Protocol clock (all times in us)::

    interaction  t1 + dt1      atoms exchange excitations with the cavities
    raman swap   instantaneous f <-> g on both atoms
    detect 1     tau1          exactly one click expected
    purge        tau2          no click allowed
    remap        instantaneous g1 -> e1, f1 -> g1, g2 -> e2
    detect 2     t_d           exactly one click expected (interaction is live)

The analytic pipeline pins the first click at the end of ``detect 1`` and the
second at ``t2`` into ``detect 2``; the trajectory sampler draws them at
random.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np

from . import dynamics as dy
from . import hilbert as hs
from . import pulses as pl
from .dynamics import Channel, SystemParams

PURGE_WARN = 0.01
PURGE_ERROR = 0.1


class Stage(str, Enum):
    PREPARED = "prepared"
    FIRST_INTERACTION = "first_interaction"
    RAMAN_SWAP = "raman_swap"
    FIRST_CLICK = "first_click"
    PURGE = "purge"
    REMAP = "remap"
    SECOND_INTERACTION = "second_interaction"
    SECOND_CLICK = "second_click"


class Status(str, Enum):
    SUCCESS = "success"
    DISCARDED = "discarded"


class Pattern(str, Enum):
    SAME = "same_detector"
    DIFFERENT = "different_detector"


class InsufficientPurge(ValueError):
    """Residual photon amplitude after the purge window is too large."""


@dataclass(frozen=True)
class InputState:
    """Unknown state ``c_f|f> + c_g|g>`` of atom 1."""

    c_f: complex
    c_g: complex

    def __post_init__(self):
        object.__setattr__(self, "c_f", complex(self.c_f))
        object.__setattr__(self, "c_g", complex(self.c_g))
        n = abs(self.c_f) ** 2 + abs(self.c_g) ** 2
        if abs(n - 1.0) > hs.EPS_NUM:
            raise ValueError(f"input state is not normalized: |c_f|^2 + |c_g|^2 = {n!r}")

    @classmethod
    def random(cls, rng: np.random.Generator) -> "InputState":
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        v /= np.linalg.norm(v)
        return cls(v[0], v[1])

    def target(self) -> np.ndarray:
        """The same state written on atom 2 (``f, g, e`` basis)."""
        return np.array([self.c_f, self.c_g, 0.0], dtype=complex)


@dataclass(frozen=True)
class ProtocolSchedule:
    t1: float
    tau1: float
    tau2: float
    t2: float
    t_d: float
    dt1: float = 0.0

    def __post_init__(self):
        for name in ("t1", "tau1", "tau2", "t2", "t_d"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"schedule time {name} must be nonnegative")
        if self.t1 + self.dt1 < 0:
            raise ValueError("t1 + dt1 must be nonnegative")

    @classmethod
    def default(cls, params: SystemParams, dt1_frac: float = 0.0, **overrides) -> "ProtocolSchedule":
        """Order-of-magnitude schedule: tau1 = 2/kappa, tau2 = 20/kappa, t_d = 20/(kappa+gamma), t2 = t1.

        ``overrides`` that are None fall back to the defaults.
        """
        t1 = overrides.get("t1")
        if t1 is None:
            t1 = dy.solve_t1(params)
        vals = dict(
            t1=t1,
            dt1=dt1_frac * t1,
            tau1=_ratio(2.0, params.kappa),
            tau2=_ratio(20.0, params.kappa),
            t2=t1,
            t_d=_ratio(20.0, params.kappa + params.gamma),
        )
        for key, value in overrides.items():
            if key not in vals:
                raise TypeError(f"unknown schedule field {key!r}")
            if value is not None:
                vals[key] = value
        return cls(**vals)

    @property
    def interaction_time(self) -> float:
        return self.t1 + self.dt1

    def with_(self, **changes) -> "ProtocolSchedule":
        return replace(self, **changes)


def _ratio(num: float, rate: float) -> float:
    return num / rate if rate > 0 else math.inf


def purge_residual(params: SystemParams, schedule: ProtocolSchedule) -> float:
    """Amplitude factor ``exp(-kappa tau2 / 2)`` left on an undetected photon."""
    if params.kappa == 0.0:
        return 1.0  # nothing drains, whatever tau2 is
    return math.exp(-params.kappa * schedule.tau2 / 2.0)


def check_purge(params: SystemParams, schedule: ProtocolSchedule, strict: bool = False) -> float:
    r = purge_residual(params, schedule)
    if strict and r > PURGE_ERROR:
        raise InsufficientPurge(f"exp(-kappa tau2/2) = {r:.3g} > {PURGE_ERROR}")
    if r > PURGE_WARN:
        warnings.warn(f"purge window too short: exp(-kappa tau2/2) = {r:.3g}", stacklevel=3)
    return r


@dataclass(frozen=True)
class ClickRecord:
    detector: Channel
    time: float
    cycle: int
    stage: str


@dataclass
class ProtocolOutcome:
    status: Status
    final_atom2: np.ndarray | None = None
    weight: float = 0.0
    fidelity: float = 0.0
    pattern: Pattern | None = None
    detectors: tuple[Channel, Channel] | None = None
    extras: dict = field(default_factory=dict)


# --- preparation ---------------------------------------------------------------

def prepare(inp: InputState) -> np.ndarray:
    """``(c_f|f1> + c_g|e1>)|0> (|e2> + |f2>)|0> / sqrt(2)``; atom 1 already excited."""
    # pair order f0 f1 g0 g1 e0 e1
    pair1 = np.array([inp.c_f, 0.0, 0.0, 0.0, inp.c_g, 0.0], dtype=complex)
    pair2 = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0], dtype=complex) / math.sqrt(2.0)
    return np.outer(pair1, pair2).reshape(hs.DIM)


def _signs(branch) -> tuple[Channel, Channel]:
    out = []
    for b in branch:
        if isinstance(b, Channel):
            if not b.is_detector:
                raise ValueError(f"{b} is not a detector port")
            out.append(b)
        elif b in (1, "+"):
            out.append(Channel.DPLUS)
        elif b in (-1, "-"):
            out.append(Channel.DMINUS)
        else:
            raise ValueError(f"bad detector choice {b!r}")
    if len(out) != 2:
        raise ValueError("branch needs one detector per cycle")
    return out[0], out[1]


# --- analytic pipeline ---------------------------------------------------------

def analytic_checkpoints(params: SystemParams, schedule: ProtocolSchedule, inp: InputState,
                         branch=(1, 1)) -> list[tuple[Stage, np.ndarray]]:
    """Unnormalized conditional state after each protocol stage.

    Clicks apply the bare beam-splitter mode ``(a1 +/- a2)/sqrt(2)``, so the
    squared norms never increase along the list.  The last entry (second
    click) is normalized.
    """
    check_purge(params, schedule, strict=True)
    d1, d2 = _signs(branch)
    out = []
    psi = prepare(inp)
    out.append((Stage.PREPARED, psi))
    psi = dy.evolve(params, psi, schedule.interaction_time)
    out.append((Stage.FIRST_INTERACTION, psi))
    psi = pl.apply_sequence(pl.SWAP_BOTH, psi)
    out.append((Stage.RAMAN_SWAP, psi))
    psi = dy.detector_projection(d1, dy.evolve(params, psi, schedule.tau1))
    out.append((Stage.FIRST_CLICK, psi))
    psi = dy.evolve(params, psi, schedule.tau2)
    out.append((Stage.PURGE, psi))
    psi = pl.apply_sequence(pl.REMAP, psi)
    hs.check_truncation(psi)
    out.append((Stage.REMAP, psi))
    psi = dy.evolve(params, psi, schedule.t2)
    out.append((Stage.SECOND_INTERACTION, psi))
    psi = dy.detector_projection(d2, psi)
    if hs.norm_sq(psi) == 0.0:
        raise ValueError("second click has zero amplitude on this branch")
    out.append((Stage.SECOND_CLICK, hs.normalize(psi)))
    return out


def pattern_of(d1: Channel, d2: Channel) -> Pattern:
    return Pattern.SAME if d1 is d2 else Pattern.DIFFERENT


def classical_correction(pattern: Pattern) -> pl.PulseSpec | None:
    if pattern is Pattern.SAME:
        return None
    if pattern is Pattern.DIFFERENT:
        return pl.PHASE_FIX
    raise ValueError(f"no correction defined for {pattern!r}")


def correct_and_score(psi: np.ndarray, pattern: Pattern, inp: InputState) -> tuple[np.ndarray, float]:
    """Apply the correction and return atom 2's reduced state with its fidelity."""
    fix = classical_correction(pattern)
    if fix is not None:
        psi = pl.apply_pulse(fix, psi)
    rho = hs.reduce_to_atom2(psi)
    rho = rho / np.trace(rho).real
    return rho, hs.fidelity(inp.target(), rho)


def _panels(length: float, scale: float, nodes: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule on ``[0, length]`` with panels no wider than ``scale``."""
    if not math.isfinite(length):
        raise ValueError("cannot integrate over an infinite detection window")
    if length == 0.0:
        return np.zeros(0), np.zeros(0)
    n_panels = max(1, math.ceil(length / scale))
    x, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(0.0, length, n_panels + 1)
    half = np.diff(edges) / 2.0
    mid = (edges[:-1] + edges[1:]) / 2.0
    t = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wt = (half[:, None] * w[None, :]).ravel()
    return t, wt


def _kron_pair(params, t):
    u = dy.pair_propagator(params, t)
    return np.einsum("...ij,...kl->...ikjl", u, u).reshape(np.shape(t) + (hs.DIM, hs.DIM))


def pattern_probabilities(params: SystemParams, schedule: ProtocolSchedule,
                          inp: InputState) -> dict[tuple[Channel, Channel], float]:
    """Probability of each successful click record, integrated over click times.

    Only paths without spontaneous emission are counted; each of the two
    recorded photons is registered with probability ``eta``.  Both click
    times are integrated with composite Gauss-Legendre rules over panels of
    width ``1/beta``.
    """
    scale = 1.0 / params.beta
    chans = (Channel.DPLUS, Channel.DMINUS)
    phi0 = pl.apply_sequence(pl.SWAP_BOTH, dy.evolve(params, prepare(inp), schedule.interaction_time))

    # second cycle: quadratic form over the click time in (0, t_d]
    t2, w2 = _panels(schedule.t_d, scale)
    u_in = _kron_pair(params, t2)
    u_out = _kron_pair(params, schedule.t_d - t2)
    remap = np.eye(hs.DIM, dtype=complex)
    for spec in pl.REMAP:
        remap = pl.pulse_unitary(spec) @ remap
    forms = {}
    for d2 in chans:
        c = next(ch.collapse_op for ch in dy.jump_channels(params) if ch.label is d2)
        m = u_out @ c @ u_in @ remap
        forms[d2] = np.einsum("k,kji,kjl->il", w2, m.conj(), m)

    # first cycle: click time in (0, tau1], then the purge window
    t1, w1 = _panels(schedule.tau1, scale)
    before = dy.evolve(params, phi0, t1)
    probs = {}
    for d1 in chans:
        after = np.array([dy.apply_jump(params, d1, v) for v in before])
        after = np.array([dy.evolve(params, v, schedule.tau1 - tc + schedule.tau2)
                          for v, tc in zip(after, t1)])
        for d2 in chans:
            q = np.einsum("ki,ij,kj->k", after.conj(), forms[d2], after).real
            probs[(d1, d2)] = params.eta ** 2 * float(w1 @ q)
    return probs


def run_analytic(params: SystemParams, schedule: ProtocolSchedule, inp: InputState,
                 with_weights: bool = True) -> list[ProtocolOutcome]:
    """One outcome per (first, second) detector pair plus the discarded remainder.

    States and fidelities use the pinned click times; weights are the
    click-time-integrated probabilities from :func:`pattern_probabilities`.
    """
    probs = pattern_probabilities(params, schedule, inp) if with_weights else {}
    outcomes = []
    for d1 in (Channel.DPLUS, Channel.DMINUS):
        for d2 in (Channel.DPLUS, Channel.DMINUS):
            final = analytic_checkpoints(params, schedule, inp, (d1, d2))[-1][1]
            pat = pattern_of(d1, d2)
            rho, fid = correct_and_score(final, pat, inp)
            outcomes.append(ProtocolOutcome(
                status=Status.SUCCESS, final_atom2=rho, weight=probs.get((d1, d2), math.nan),
                fidelity=fid, pattern=pat, detectors=(d1, d2),
            ))
    total = sum(o.weight for o in outcomes)
    outcomes.append(ProtocolOutcome(status=Status.DISCARDED, weight=1.0 - total))
    return outcomes


def branch_fidelity(outcomes: Sequence[ProtocolOutcome], first: Channel) -> float:
    """Fidelity of the success outcome with the given first-cycle detector (same-detector pattern)."""
    for o in outcomes:
        if o.status is Status.SUCCESS and o.detectors == (first, first):
            return o.fidelity
    raise KeyError(first)
