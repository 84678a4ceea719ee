"""State-vector and operator algebra on the two-atom, two-cavity product space.

Each atom has three levels ordered ``f, g, e`` and each cavity mode is
truncated to at most one photon, so the composite space has
3 * 2 * 3 * 2 = 36 dimensions.  The tensor ordering is
``(atom1, cavity1, atom2, cavity2)``; the index of ``|a1, n1, a2, n2>`` is
``((a1*2 + n1)*3 + a2)*2 + n2``.

States, operators and density matrices are plain numpy arrays.  Conditional
states produced by no-detection evolution are sub-normalized; their squared
norm is the accumulated no-click probability.
"""

from __future__ import annotations

from enum import IntEnum
from typing import NamedTuple

import numpy as np

DIM = 36
PAIR_DIM = 6
N_LEVELS = 3
N_PHOTONS = 2

#: tolerance for algebraic identity checks in 36-dim double precision
EPS_NUM = 1e-10


class Level(IntEnum):
    F = 0
    G = 1
    E = 2


class TruncationError(RuntimeError):
    """Amplitude would be routed to a cavity state with two photons."""


class BasisLabel(NamedTuple):
    atom1: Level
    n1: int
    atom2: Level
    n2: int


def flat_index(label: BasisLabel | tuple) -> int:
    a1, n1, a2, n2 = label
    if not (0 <= int(a1) < N_LEVELS and 0 <= int(a2) < N_LEVELS):
        raise ValueError(f"invalid atomic level in {label!r}")
    if n1 not in (0, 1) or n2 not in (0, 1):
        raise ValueError(f"photon number out of truncated range in {label!r}")
    return ((int(a1) * 2 + n1) * 3 + int(a2)) * 2 + n2


def label_of(index: int) -> BasisLabel:
    if not 0 <= index < DIM:
        raise ValueError(f"index {index} outside 0..{DIM - 1}")
    rest, n2 = divmod(index, 2)
    rest, a2 = divmod(rest, 3)
    a1, n1 = divmod(rest, 2)
    return BasisLabel(Level(a1), n1, Level(a2), n2)


def ket(a1, n1, a2, n2) -> np.ndarray:
    """Basis ket ``|a1, n1, a2, n2>``; levels may be given as ``Level`` or 'f'/'g'/'e'."""
    psi = np.zeros(DIM, dtype=complex)
    psi[flat_index((_level(a1), n1, _level(a2), n2))] = 1.0
    return psi


def _level(x) -> Level:
    if isinstance(x, str):
        return Level[x.upper()]
    return Level(x)


def atom_ket(level) -> np.ndarray:
    v = np.zeros(N_LEVELS, dtype=complex)
    v[_level(level)] = 1.0
    return v


# --- single-factor operators -------------------------------------------------

def _photon_annihilation() -> np.ndarray:
    return np.array([[0, 1], [0, 0]], dtype=complex)


def _atom_transition(to, frm) -> np.ndarray:
    m = np.zeros((N_LEVELS, N_LEVELS), dtype=complex)
    m[_level(to), _level(frm)] = 1.0
    return m


def embed(atom1=None, cav1=None, atom2=None, cav2=None) -> np.ndarray:
    """Kronecker product of single-factor operators, identity where omitted."""
    factors = [
        np.eye(N_LEVELS) if atom1 is None else atom1,
        np.eye(N_PHOTONS) if cav1 is None else cav1,
        np.eye(N_LEVELS) if atom2 is None else atom2,
        np.eye(N_PHOTONS) if cav2 is None else cav2,
    ]
    out = factors[0]
    for f in factors[1:]:
        out = np.kron(out, f)
    return out.astype(complex)


def annihilation(j: int) -> np.ndarray:
    """Truncated cavity annihilation operator ``a_j``."""
    a = _photon_annihilation()
    return embed(cav1=a) if j == 1 else embed(cav2=a) if j == 2 else _bad_site(j)


def raising(j: int) -> np.ndarray:
    """Atomic raising operator ``S_j^+ = |e_j><g_j|``."""
    s = _atom_transition("e", "g")
    return embed(atom1=s) if j == 1 else embed(atom2=s) if j == 2 else _bad_site(j)


def lowering(j: int) -> np.ndarray:
    return raising(j).conj().T


def excited_projector(j: int) -> np.ndarray:
    p = _atom_transition("e", "e")
    return embed(atom1=p) if j == 1 else embed(atom2=p) if j == 2 else _bad_site(j)


def number(j: int) -> np.ndarray:
    a = annihilation(j)
    return a.conj().T @ a


def _bad_site(j):
    raise ValueError(f"site index must be 1 or 2, got {j}")


# --- algebra -----------------------------------------------------------------

def apply(op: np.ndarray, psi: np.ndarray) -> np.ndarray:
    op = np.asarray(op)
    psi = np.asarray(psi)
    if op.ndim != 2 or op.shape[1] != psi.shape[0]:
        raise ValueError(f"dimension mismatch: operator {op.shape} on state {psi.shape}")
    return op @ psi


def inner(psi: np.ndarray, phi: np.ndarray) -> complex:
    """``<psi|phi>``, conjugate-linear in the first argument."""
    psi = np.asarray(psi)
    phi = np.asarray(phi)
    if psi.shape != phi.shape:
        raise ValueError(f"shape mismatch {psi.shape} vs {phi.shape}")
    return complex(np.vdot(psi, phi))


def norm_sq(psi: np.ndarray) -> float:
    return float(np.vdot(psi, psi).real)


def normalize(psi: np.ndarray) -> np.ndarray:
    n = np.sqrt(norm_sq(psi))
    if n == 0.0:
        raise ZeroDivisionError("cannot normalize the zero vector")
    return psi / n


def is_hermitian(m: np.ndarray, atol: float = EPS_NUM) -> bool:
    return bool(np.allclose(m, m.conj().T, atol=atol, rtol=0))


def is_unitary(m: np.ndarray, atol: float = EPS_NUM) -> bool:
    return bool(np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=atol, rtol=0))


def density(psi: np.ndarray) -> np.ndarray:
    return np.outer(psi, np.conj(psi))


def reduce_to_atom2(state: np.ndarray) -> np.ndarray:
    """Partial trace over atom 1 and both cavities.

    Accepts either a 36-vector or a 36x36 density matrix and returns the
    3x3 reduced density matrix of atom 2 in the ``f, g, e`` basis.  The
    trace of the input is preserved, so sub-normalized states stay
    sub-normalized.
    """
    state = np.asarray(state)
    if state.shape == (DIM,):
        t = state.reshape(PAIR_DIM, N_LEVELS, N_PHOTONS)
        return np.einsum("ian,ibn->ab", t, t.conj())
    if state.shape == (DIM, DIM):
        t = state.reshape(PAIR_DIM, N_LEVELS, N_PHOTONS, PAIR_DIM, N_LEVELS, N_PHOTONS)
        return np.einsum("ianibn->ab", t)
    raise ValueError(f"expected a 36-vector or 36x36 matrix, got shape {state.shape}")


def fidelity(target: np.ndarray, rho: np.ndarray) -> float:
    """Overlap ``<target|rho|target> / tr(rho)`` of a pure target with ``rho``."""
    target = np.asarray(target)
    rho = np.asarray(rho)
    tr = np.trace(rho).real
    if tr <= 0.0:
        raise ValueError("density matrix has zero trace")
    nt = norm_sq(target)
    if abs(nt - 1.0) > EPS_NUM:
        raise ValueError(f"target must be normalized (norm^2 = {nt})")
    f = (np.vdot(target, rho @ target)).real / tr
    return float(min(max(f, 0.0), 1.0))


def state_fidelity(psi: np.ndarray, phi: np.ndarray) -> float:
    """Phase-insensitive overlap of two (possibly unnormalized) pure states."""
    return abs(np.vdot(psi, phi)) ** 2 / (norm_sq(psi) * norm_sq(phi))


def two_excitation_weight(psi: np.ndarray) -> float:
    """Squared amplitude on ``|e_j, 1_j>`` configurations.

    Those kets are the only ones whose Jaynes-Cummings partner lies outside
    the one-photon truncation.
    """
    t = np.asarray(psi).reshape(N_LEVELS, N_PHOTONS, N_LEVELS, N_PHOTONS)
    w1 = np.sum(np.abs(t[Level.E, 1]) ** 2)
    w2 = np.sum(np.abs(t[:, :, Level.E, 1]) ** 2)
    return float(w1 + w2)


def check_truncation(psi: np.ndarray, tol: float = 1e-9) -> None:
    """Raise ``TruncationError`` if the relative ``|e,1>`` weight exceeds ``tol``."""
    total = norm_sq(psi)
    if total == 0.0:
        return
    w = two_excitation_weight(psi) / total
    if w > tol:
        raise TruncationError(
            f"relative weight {w:.3e} on |e,1> exceeds {tol:.1e}; "
            "dynamics would populate two-photon cavity states"
        )
