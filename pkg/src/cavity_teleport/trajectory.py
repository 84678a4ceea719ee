"""Monte-Carlo quantum-jump simulation of the full protocol.

Each trajectory evolves under the no-click generator until its squared norm
drops to a uniform random threshold, then applies one collapse chosen in
proportion to ``||C_k psi||^2``.  Detector-port collapses produce a recorded
click with probability ``eta``; free-space emissions are never recorded.
Protocol decisions use the click record only.

Trajectory ``i`` of an ensemble draws from a Philox stream keyed by
``(seed, i)``, so ensembles are reproducible independent of how they are
split across worker processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import dynamics as dy
from . import hilbert as hs
from . import pulses as pl
from .dynamics import Channel, SystemParams
from .protocol import (ClickRecord, InputState, ProtocolOutcome, ProtocolSchedule, Stage, Status,
                       analytic_checkpoints, check_purge, correct_and_score, pattern_of, prepare)

ROOT_XTOL = 1e-12
_CHANNELS = (Channel.DPLUS, Channel.DMINUS, Channel.SPONT1, Channel.SPONT2)


class ConditioningUnreachable(RuntimeError):
    """The requested event pattern has zero probability."""


@dataclass(frozen=True)
class TrajectoryConfig:
    seed: int = 0
    n_traj: int = 1000
    dt_max: float | None = None
    record_checkpoints: bool = False

    def __post_init__(self):
        if self.n_traj < 1:
            raise ValueError("n_traj must be at least 1")
        if self.dt_max is not None and not self.dt_max > 0:
            raise ValueError("dt_max must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def step(self, params: SystemParams) -> float:
        if self.dt_max is not None:
            return self.dt_max
        scales = [0.1 / params.beta]
        if params.kappa > 0:
            scales.append(0.1 / params.kappa)
        return min(scales)


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream for trajectory ``index``: Philox keyed by ``(seed, index)``."""
    return np.random.Generator(np.random.Philox(key=int(seed) | (int(index) << 64)))


@dataclass
class JumpEvent:
    time: float
    channel: Channel
    threshold: float
    norm_sq: float


def _windows(schedule: ProtocolSchedule):
    """(name, duration, cycle) for timed windows; None marks a pulse group."""
    return (
        ("interaction", schedule.interaction_time, 1),
        pl.SWAP_BOTH,
        ("detect_1", schedule.tau1, 1),
        ("purge", schedule.tau2, 1),
        pl.REMAP,
        ("detect_2", schedule.t_d, 2),
    )


def find_jump_time(params: SystemParams, psi: np.ndarray, threshold: float, length: float,
                   dt_max: float, xtol: float = ROOT_XTOL) -> float:
    """Time at which the no-jump squared norm of ``psi`` falls to ``threshold``.

    Requires ``||psi||^2 > threshold >= ||U(length) psi||^2``.  A bracket
    of width ``dt_max`` is located on a grid (scanned in growing vectorized
    chunks), then refined by Newton steps on the norm, whose derivative is
    minus the total jump rate, falling back to bisection whenever a step
    leaves the bracket.
    """
    lo = 0.0
    chunk = 32
    while True:
        grid = lo + dt_max * np.arange(1, chunk + 1)
        grid = grid[grid < length]
        grid = np.append(grid, min(lo + dt_max * (chunk + 1), length))
        states = dy.evolve(params, psi, grid)
        norms = np.einsum("ki,ki->k", states.conj(), states).real
        below = np.nonzero(norms <= threshold)[0]
        if below.size:
            k = below[0]
            hi, f_hi = grid[k], norms[k] - threshold
            if k > 0:
                lo, f_lo = grid[k - 1], norms[k - 1] - threshold
            else:
                f_lo = hs.norm_sq(dy.evolve(params, psi, lo)) - threshold
            break
        lo = grid[-1]
        chunk *= 2

    # secant start inside the bracket, then safeguarded Newton
    t = lo + (hi - lo) * f_lo / (f_lo - f_hi) if f_lo > f_hi else 0.5 * (lo + hi)
    for _ in range(200):
        state = dy.evolve(params, psi, t)
        f = hs.norm_sq(state) - threshold
        if f > 0:
            lo = t
        else:
            hi = t
        rate = dy.jump_rate(params, state)
        t_new = t + f / rate if rate > 0 else math.inf
        if not lo < t_new < hi:
            t_new = 0.5 * (lo + hi)
        if abs(t_new - t) < xtol or hi - lo < xtol:
            return t_new
        t = t_new
    return 0.5 * (lo + hi)


def _choose_channel(params, psi, u: float) -> Channel:
    w = dy.channel_weights(params, psi)
    total = w.sum()
    if total <= 0:
        raise RuntimeError("jump requested on a state with zero decay rate")
    k = int(np.searchsorted(np.cumsum(w) / total, u, side="right"))
    return _CHANNELS[min(k, 3)]


def sample_trajectory(params: SystemParams, schedule: ProtocolSchedule, inp: InputState,
                      rng: np.random.Generator, config: TrajectoryConfig | None = None,
                      jump_log: list | None = None) -> tuple[ProtocolOutcome, list[ClickRecord]]:
    """Simulate one run of the protocol and classify it from its click record."""
    config = config or TrajectoryConfig()
    dt_max = config.step(params)
    psi = prepare(inp)
    threshold = 1.0 - rng.random()
    clicks: list[ClickRecord] = []
    counts = {"spont": 0, "cavity": 0}
    checkpoints = {}
    clock = 0.0

    for item in _windows(schedule):
        if not isinstance(item[0], str):
            psi = pl.apply_sequence(item, psi)
            if item is pl.REMAP:
                hs.check_truncation(psi, tol=1e-6)
            continue
        name, length, cycle = item
        if not math.isfinite(length):
            raise ValueError(f"window {name} has infinite duration")
        t = 0.0
        while True:
            end = dy.evolve(params, psi, length - t)
            if hs.norm_sq(end) > threshold:
                psi = end
                break
            dt = find_jump_time(params, psi, threshold, length - t, dt_max)
            psi = dy.evolve(params, psi, dt)
            t += dt
            channel = _choose_channel(params, psi, rng.random())
            if jump_log is not None:
                jump_log.append(JumpEvent(clock + t, channel, threshold, hs.norm_sq(psi)))
            psi = hs.normalize(dy.apply_jump(params, channel, psi))
            threshold = 1.0 - rng.random()
            if channel.is_detector:
                counts["cavity"] += 1
                if rng.random() < params.eta:
                    clicks.append(ClickRecord(channel, clock + t, cycle, name))
            else:
                counts["spont"] += 1
        clock += length
        if config.record_checkpoints:
            checkpoints[name] = hs.normalize(psi)

    outcome = _classify(psi, clicks, inp)
    outcome.extras.update(counts)
    if config.record_checkpoints:
        outcome.extras["checkpoints"] = checkpoints
    return outcome, clicks


def _classify(psi, clicks, inp) -> ProtocolOutcome:
    by_stage = {"interaction": [], "detect_1": [], "purge": [], "detect_2": []}
    for c in clicks:
        by_stage[c.stage].append(c)
    ok = (not by_stage["interaction"] and len(by_stage["detect_1"]) == 1
          and not by_stage["purge"] and len(by_stage["detect_2"]) == 1)
    if not ok:
        return ProtocolOutcome(status=Status.DISCARDED)
    d1, d2 = by_stage["detect_1"][0].detector, by_stage["detect_2"][0].detector
    pat = pattern_of(d1, d2)
    rho, fid = correct_and_score(hs.normalize(psi), pat, inp)
    return ProtocolOutcome(status=Status.SUCCESS, final_atom2=rho, weight=1.0, fidelity=fid,
                           pattern=pat, detectors=(d1, d2))


# --- ensembles -----------------------------------------------------------------

@dataclass
class EnsembleResult:
    n_traj: int
    n_success: int
    n_discarded: int
    success_rate: float
    success_rate_se: float
    mean_success_fidelity: float
    mean_success_fidelity_se: float
    min_success_fidelity: float
    click_pattern_histogram: dict = field(default_factory=dict)
    spont_emission_count: int = 0
    cavity_emission_count: int = 0

    @property
    def cavity_fraction(self) -> float:
        """Share of all emissions that left through a cavity (recorded or not)."""
        total = self.spont_emission_count + self.cavity_emission_count
        return self.cavity_emission_count / total if total else math.nan

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cavity_fraction"] = self.cavity_fraction
        return d


def _pattern_key(outcome: ProtocolOutcome) -> str:
    d1, d2 = outcome.detectors
    return d1.value + d2.value


def _run_indices(args) -> list[tuple]:
    params, schedule, inp, config, start, stop = args
    rows = []
    for i in range(start, stop):
        out, _ = sample_trajectory(params, schedule, inp, trajectory_rng(config.seed, i), config)
        key = _pattern_key(out) if out.status is Status.SUCCESS else ""
        rows.append((out.status is Status.SUCCESS, out.fidelity, key,
                     out.extras["spont"], out.extras["cavity"]))
    return rows


def run_ensemble(params: SystemParams, schedule: ProtocolSchedule, inp: InputState,
                 config: TrajectoryConfig, workers: int = 1) -> EnsembleResult:
    """Run ``config.n_traj`` independent trajectories and aggregate them.

    Rows are gathered in trajectory order before reduction, so the result
    is bit-identical for any ``workers``.
    """
    n = config.n_traj
    if workers <= 1:
        rows = _run_indices((params, schedule, inp, config, 0, n))
    else:
        bounds = np.linspace(0, n, min(workers * 4, n) + 1).astype(int)
        jobs = [(params, schedule, inp, config, int(a), int(b))
                for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = [r for chunk in pool.map(_run_indices, jobs) for r in chunk]
    return summarize(rows)


def summarize(rows: list[tuple]) -> EnsembleResult:
    n = len(rows)
    success = np.array([r[0] for r in rows], dtype=bool)
    fid = np.array([r[1] for r in rows], dtype=float)[success]
    n_s = int(success.sum())
    rate = n_s / n
    hist: dict[str, int] = {}
    for r in rows:
        if r[0]:
            hist[r[2]] = hist.get(r[2], 0) + 1
    return EnsembleResult(
        n_traj=n,
        n_success=n_s,
        n_discarded=n - n_s,
        success_rate=rate,
        success_rate_se=math.sqrt(rate * (1.0 - rate) / n),
        mean_success_fidelity=float(fid.mean()) if n_s else math.nan,
        mean_success_fidelity_se=float(fid.std(ddof=1) / math.sqrt(n_s)) if n_s > 1 else math.nan,
        min_success_fidelity=float(fid.min()) if n_s else math.nan,
        click_pattern_histogram=dict(sorted(hist.items())),
        spont_emission_count=int(sum(r[3] for r in rows)),
        cavity_emission_count=int(sum(r[4] for r in rows)),
    )


# --- conditioned comparison against the analytic pipeline ------------------------

_COMPARED = (Stage.FIRST_INTERACTION, Stage.FIRST_CLICK, Stage.PURGE,
             Stage.SECOND_INTERACTION, Stage.SECOND_CLICK)


def _stepwise(params, psi, length, dt_max):
    """No-jump evolution in sub-steps of at most ``dt_max``, renormalizing after each."""
    n = max(1, math.ceil(length / dt_max))
    step = length / n
    for _ in range(n):
        psi = dy.evolve(params, psi, step)
        nn = hs.norm_sq(psi)
        if nn == 0.0:
            raise ConditioningUnreachable("no-click evolution has zero probability")
        psi = psi / math.sqrt(nn)
    return psi


def _forced_jump(channel: dy.JumpChannel, psi):
    out = dy.jump(channel, psi)
    if hs.norm_sq(out) == 0.0:
        raise ConditioningUnreachable(f"{channel.label.value} click has zero amplitude")
    return hs.normalize(out)


def checkpoint_compare(params: SystemParams, schedule: ProtocolSchedule, inp: InputState,
                       branch=(Channel.DPLUS, Channel.DPLUS),
                       config: TrajectoryConfig | None = None) -> list[tuple[Stage, float]]:
    """Fidelity between a conditioned trajectory and the analytic checkpoint at each stage.

    The trajectory is forced through the pinned event pattern: first click at
    the end of the first detection window, second click at ``t2``, no
    spontaneous emission.  It is propagated in normalized ``dt_max``
    sub-steps with the 36x36 collapse matrices, independently of the
    single-shot analytic composition.
    """
    config = config or TrajectoryConfig()
    dt_max = config.step(params)
    check_purge(params, schedule, strict=True)
    channels = {ch.label: ch for ch in dy.jump_channels(params)}
    d1, d2 = branch
    traj = {}
    psi = prepare(inp)
    psi = _stepwise(params, psi, schedule.interaction_time, dt_max)
    traj[Stage.FIRST_INTERACTION] = psi
    for spec in pl.SWAP_BOTH:
        psi = pl.pulse_unitary(spec) @ psi
    psi = _stepwise(params, psi, schedule.tau1, dt_max)
    psi = _forced_jump(channels[d1], psi)
    traj[Stage.FIRST_CLICK] = psi
    psi = _stepwise(params, psi, schedule.tau2, dt_max)
    traj[Stage.PURGE] = psi
    for spec in pl.REMAP:
        psi = pl.pulse_unitary(spec) @ psi
    psi = _stepwise(params, psi, schedule.t2, dt_max)
    traj[Stage.SECOND_INTERACTION] = psi
    traj[Stage.SECOND_CLICK] = _forced_jump(channels[d2], psi)

    analytic = dict(analytic_checkpoints(params, schedule, inp, (d1, d2)))
    return [(stage, hs.state_fidelity(traj[stage], analytic[stage])) for stage in _COMPARED]
