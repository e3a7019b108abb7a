"""Named two-qubit bases, dense coding, and the tables behind the attack.

Outcome indices of the attack basis are fixed as ``0: Psi-, 1: Phi+, 2: Omega,
3: Gamma``. Every table in this module is keyed on those indices.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .qsim import (
    ALGEBRAIC_TOL,
    BELL_VECTORS,
    H,
    I,
    I_SIGMA_Y,
    SIGMA_X,
    SIGMA_Z,
    BellLabel,
    compose,
)

PSI_MINUS, PHI_PLUS, OMEGA, GAMMA = range(4)
EVE_LABELS = ("psi-", "phi+", "omega", "gamma")


class TwoBits(NamedTuple):
    hi: int
    lo: int

    def __str__(self):
        return f"{self.hi}{self.lo}"


@dataclass(frozen=True)
class FourStateBasis:
    label: str
    names: tuple[str, ...]
    # One basis vector per row, in |particle1 particle2> order.
    matrix: np.ndarray

    def __post_init__(self):
        gram = self.matrix.conj() @ self.matrix.T
        if np.max(np.abs(gram - np.eye(4))) > ALGEBRAIC_TOL:
            raise ValueError(f"{self.label} vectors are not orthonormal")
        self.matrix.setflags(write=False)

    @property
    def vectors(self) -> list[np.ndarray]:
        return list(self.matrix)

    def index(self, name: str) -> int:
        return self.names.index(name)


BELL_ORDER = (BellLabel.PHI_PLUS, BellLabel.PHI_MINUS, BellLabel.PSI_PLUS, BellLabel.PSI_MINUS)


@lru_cache(maxsize=None)
def bell_basis() -> FourStateBasis:
    """Phi+, Phi-, Psi+, Psi- in that order."""
    return FourStateBasis(
        "Bell",
        tuple(b.value for b in BELL_ORDER),
        np.array([BELL_VECTORS[b] for b in BELL_ORDER]),
    )


@lru_cache(maxsize=None)
def eve_basis() -> FourStateBasis:
    omega = 0.5 * np.array([1, -1, -1, -1], dtype=complex)
    gamma = 0.5 * np.array([1, 1, 1, -1], dtype=complex)
    return FourStateBasis(
        "EveBE",
        EVE_LABELS,
        np.array([BELL_VECTORS[BellLabel.PSI_MINUS], BELL_VECTORS[BellLabel.PHI_PLUS], omega, gamma]),
    )


# -- dense coding ---------------------------------------------------------

_DENSE_GATES = {
    TwoBits(0, 0): I,
    TwoBits(0, 1): SIGMA_X,
    TwoBits(1, 0): I_SIGMA_Y,
    TwoBits(1, 1): SIGMA_Z,
}


def dense_encode(msg) -> np.ndarray:
    """Gate on particle 1 that writes the two-bit message into a shared Bell pair."""
    return _DENSE_GATES[TwoBits(*msg)]


def on_particle1(g: np.ndarray) -> np.ndarray:
    return np.kron(g, I)


@lru_cache(maxsize=None)
def dense_decode_table(initial: BellLabel = BellLabel.PHI_PLUS) -> dict[BellLabel, TwoBits]:
    """Bell outcome -> message, derived by applying each encoding to ``initial``.

    Only the Phi+ case is tabulated by hand anywhere; the other starting states
    are worked out here by brute force and checked for being a bijection.
    """
    start = BELL_VECTORS[initial]
    table = {}
    for msg, g in _DENSE_GATES.items():
        out = on_particle1(g) @ start
        overlaps = [abs(np.vdot(BELL_VECTORS[b], out)) for b in BELL_ORDER]
        hit = int(np.argmax(overlaps))
        if abs(overlaps[hit] - 1) > ALGEBRAIC_TOL:
            raise AssertionError(f"encoding {msg} does not land on a Bell state")
        table[BELL_ORDER[hit]] = msg
    if len(table) != 4:
        raise AssertionError(f"dense coding from {initial} is not injective")
    return table


def dense_decode(outcome: BellLabel, initial: BellLabel = BellLabel.PHI_PLUS) -> TwoBits:
    return dense_decode_table(initial)[outcome]


# -- attack tables --------------------------------------------------------

_ATTACK_DECODE = {
    PSI_MINUS: TwoBits(0, 0),
    PHI_PLUS: TwoBits(1, 0),
    OMEGA: TwoBits(0, 1),
    GAMMA: TwoBits(1, 1),
}

_REPLAY_GATES = {
    PSI_MINUS: I,
    PHI_PLUS: I_SIGMA_Y,
    OMEGA: H,
    GAMMA: compose(H, I_SIGMA_Y),
}
for _g in _REPLAY_GATES.values():
    _g.setflags(write=False)


def attack_decode(outcome: int) -> TwoBits:
    """Eve's outcome index -> (key bit, basis bit)."""
    return _ATTACK_DECODE[outcome]


def attack_replay_gate(outcome: int) -> np.ndarray:
    return _REPLAY_GATES[outcome]


def combined_encoding(key_bit: int, basis_bit: int) -> np.ndarray:
    """Key operation first (I or i*sigma_y), then basis operation (I or H)."""
    return compose(H if basis_bit else I, I_SIGMA_Y if key_bit else I)
