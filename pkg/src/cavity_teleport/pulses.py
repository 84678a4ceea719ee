"""Instantaneous single-atom transformations and the Raman-drive estimate.

All pulses act on one atom only and are applied as ideal unitaries.  Level
ordering within an atom is ``f, g, e``; a matrix column holds the image of
the corresponding basis level.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from . import hilbert as hs
from .hilbert import Level


class PulseKind(Enum):
    RAMAN_SWAP = "raman_swap"        # f -> g, g -> -f
    EXCITE_G_TO_E = "excite_g_to_e"  # g -> e, e -> -g
    MAP_F_TO_G = "map_f_to_g"        # atom 1 only; same action as the swap
    MAP_G_TO_E = "map_g_to_e"        # atom 1 only; same action as the excitation
    PHASE_FIX_F = "phase_fix_f"      # atom 2 only; f -> -f


_ATOM1_ONLY = {PulseKind.MAP_F_TO_G, PulseKind.MAP_G_TO_E}
_ATOM2_ONLY = {PulseKind.PHASE_FIX_F}


@dataclass(frozen=True)
class PulseSpec:
    kind: PulseKind
    atom: int

    def __post_init__(self):
        if self.atom not in (1, 2):
            raise ValueError(f"atom must be 1 or 2, got {self.atom}")
        if self.kind in _ATOM1_ONLY and self.atom != 1:
            raise ValueError(f"{self.kind.value} is defined on atom 1 only")
        if self.kind in _ATOM2_ONLY and self.atom != 2:
            raise ValueError(f"{self.kind.value} is defined on atom 2 only")


def _swap_fg() -> np.ndarray:
    m = np.zeros((3, 3), dtype=complex)
    m[Level.G, Level.F] = 1.0
    m[Level.F, Level.G] = -1.0
    m[Level.E, Level.E] = 1.0
    return m


def _excite_ge() -> np.ndarray:
    # unit coefficient on g -> e, so c_g|g> becomes c_g|e> unchanged
    m = np.zeros((3, 3), dtype=complex)
    m[Level.E, Level.G] = 1.0
    m[Level.G, Level.E] = -1.0
    m[Level.F, Level.F] = 1.0
    return m


def atom_matrix(kind: PulseKind) -> np.ndarray:
    """3x3 single-atom unitary for a pulse kind."""
    if kind in (PulseKind.RAMAN_SWAP, PulseKind.MAP_F_TO_G):
        return _swap_fg()
    if kind in (PulseKind.EXCITE_G_TO_E, PulseKind.MAP_G_TO_E):
        return _excite_ge()
    if kind is PulseKind.PHASE_FIX_F:
        return np.diag([-1.0, 1.0, 1.0]).astype(complex)
    raise ValueError(f"unknown pulse kind {kind!r}")


def pulse_unitary(spec: PulseSpec) -> np.ndarray:
    """Embed the pulse on the full 36-dim space."""
    m = atom_matrix(spec.kind)
    return hs.embed(atom1=m) if spec.atom == 1 else hs.embed(atom2=m)


def apply_pulse(spec: PulseSpec, psi: np.ndarray) -> np.ndarray:
    """Apply a pulse by contracting the 3x3 matrix into the atom's tensor slot."""
    m = atom_matrix(spec.kind)
    t = np.asarray(psi).reshape(3, 2, 3, 2)
    if spec.atom == 1:
        out = np.einsum("ab,bmcn->amcn", m, t)
    else:
        out = np.einsum("cd,amdn->amcn", m, t)
    return out.reshape(hs.DIM)


# protocol pulse groups
SWAP_BOTH = (PulseSpec(PulseKind.RAMAN_SWAP, 1), PulseSpec(PulseKind.RAMAN_SWAP, 2))
REMAP = (
    PulseSpec(PulseKind.MAP_G_TO_E, 1),
    PulseSpec(PulseKind.MAP_F_TO_G, 1),
    PulseSpec(PulseKind.EXCITE_G_TO_E, 2),
)
PHASE_FIX = PulseSpec(PulseKind.PHASE_FIX_F, 2)


def apply_sequence(specs, psi: np.ndarray) -> np.ndarray:
    for spec in specs:
        psi = apply_pulse(spec, psi)
    return psi


class RamanEstimate(NamedTuple):
    lam: float
    duration: float
    leakage: float


def raman_model(params) -> RamanEstimate:
    """Effective Raman coupling, swap duration and cavity-exchange leakage.

    ``lam = omega**2 / delta``; the swap takes ``pi / (2 lam)`` and the
    probability of an atom-cavity exchange during it is about
    ``(g pi / (2 lam))**2``.
    """
    omega, delta = params.omega_raman, params.delta_raman
    if omega is None or delta is None or omega <= 0 or delta <= 0:
        raise ValueError("Raman drive needs positive omega_raman and delta_raman")
    lam = omega ** 2 / delta
    if delta / omega < 10:
        warnings.warn(f"detuning/Rabi ratio {delta / omega:.3g} < 10: adiabatic "
                      "elimination of the intermediate level is questionable", stacklevel=2)
    if lam / params.g < 10:
        warnings.warn(f"Raman coupling / g = {lam / params.g:.3g} < 10: cavity exchange "
                      "during the swap is not negligible", stacklevel=2)
    duration = math.pi / (2.0 * lam)
    leakage = (params.g * duration) ** 2
    return RamanEstimate(lam, duration, leakage)
