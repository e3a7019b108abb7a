"""Eavesdroppers that sit on the quantum channel.

An adversary sees each quantum transmission through a tap method that takes
the in-flight qubit ids and returns the ids actually delivered. It can read
the classical board but has no way to write to it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .primitives import attack_decode, attack_replay_gate, eve_basis
from .qsim import BellLabel, Heap


class AdversaryKind(str, enum.Enum):
    NONE = "none"
    PASSIVE = "passive"
    INTERCEPT_RESEND = "intercept-resend"
    DENSE_CODING = "dense-coding"


class Adversary:
    """Pass-through taps. Subclasses override the transmissions they attack."""

    kind = AdversaryKind.NONE

    def __init__(self):
        self.board = None

    def attach(self, board_view) -> None:
        self.board = board_view

    def center_to_alice(self, heap: Heap, qubits: list[int]) -> list[int]:
        return qubits

    def alice_to_bob(self, heap: Heap, qubits: list[int]) -> list[int]:
        return qubits

    def bob_to_center(self, heap: Heap, qubits: list[int]) -> list[int]:
        return qubits

    def inferred(self):
        """``(key_and_hash, b1)`` as guessed by the adversary; either may be None."""
        return None, None


class NoAdversary(Adversary):
    pass


class PassiveListen(Adversary):
    """Touches no qubit; keeps whatever was on the board when asked."""

    kind = AdversaryKind.PASSIVE

    def seen(self):
        return self.board.records if self.board is not None else ()


@dataclass
class EveState:
    q_e: list[int] = field(default_factory=list)
    stored_legal: list[int] = field(default_factory=list)
    outcomes: list[int] = field(default_factory=list)
    inferred_key_hash: np.ndarray | None = None
    inferred_b1: np.ndarray | None = None


def eve_extract(outcomes) -> tuple[np.ndarray, np.ndarray]:
    """Bitwise decode of attack-basis outcomes into (K||h, B1)."""
    pairs = [attack_decode(o) for o in outcomes]
    kh = np.array([p.hi for p in pairs], dtype=np.uint8)
    b1 = np.array([p.lo for p in pairs], dtype=np.uint8)
    return kh, b1


class DenseCoding(Adversary):
    """Fake-signal attack: hand Alice halves of Psi- pairs, read her encoding off
    with a joint measurement, then replay the same operation on the real qubits."""

    kind = AdversaryKind.DENSE_CODING

    def __init__(self):
        super().__init__()
        self.state = EveState()

    def center_to_alice(self, heap, qubits):
        return self.prepare_and_substitute(heap, qubits)

    def alice_to_bob(self, heap, qubits):
        return self.measure_and_replay(heap, qubits)

    def prepare_and_substitute(self, heap: Heap, qubits: list[int]) -> list[int]:
        st = self.state
        st.stored_legal = list(qubits)
        fake = []
        for _ in qubits:
            q1, q2 = heap.new_epr_pair(BellLabel.PSI_MINUS)
            fake.append(q1)
            st.q_e.append(q2)
        return fake

    def measure_and_replay(self, heap: Heap, qubits: list[int]) -> list[int]:
        st = self.state
        basis = eve_basis()
        for q_alice, q_eve, legal in zip(qubits, st.q_e, st.stored_legal):
            outcome = heap.measure_pair_in_basis(q_alice, q_eve, basis)
            st.outcomes.append(outcome)
            heap.apply_gate(legal, attack_replay_gate(outcome))
        st.inferred_key_hash, st.inferred_b1 = eve_extract(st.outcomes)
        return list(st.stored_legal)

    def inferred(self):
        return self.state.inferred_key_hash, self.state.inferred_b1


class InterceptResend(Adversary):
    """Measure every qubit of Alice's output in Z and resend the observed basis state."""

    kind = AdversaryKind.INTERCEPT_RESEND

    def __init__(self):
        super().__init__()
        self.bits: list[int] = []

    def alice_to_bob(self, heap, qubits):
        out = []
        for q in qubits:
            bit = heap.measure_computational(q)
            self.bits.append(bit)
            out.append(heap.new_qubit(bit))
        return out

    def inferred(self):
        return np.array(self.bits, dtype=np.uint8), None


ADVERSARIES = {
    AdversaryKind.NONE: NoAdversary,
    AdversaryKind.PASSIVE: PassiveListen,
    AdversaryKind.INTERCEPT_RESEND: InterceptResend,
    AdversaryKind.DENSE_CODING: DenseCoding,
}


def make_adversary(kind) -> Adversary:
    return ADVERSARIES[AdversaryKind(kind)]()


@dataclass
class AttackReport:
    kind: AdversaryKind
    detected: bool
    disturbance: float
    key_bit_accuracy: float | None = None
    key_exact_match: bool | None = None
    b1_bit_accuracy: float | None = None
    # Positions whose attack pair survived Alice's shuffle intact are "fixed";
    # the countermeasure statistics are taken over the others.
    nonfixed_positions: int = 0
    nonfixed_key_correct: int = 0
    nonfixed_outcomes: tuple[int, ...] = ()
    bob_bit_errors: int = 0
    n: int = 0


def build_report(transcript, adversary: Adversary) -> AttackReport:
    """Score the adversary's guesses against what Alice actually used."""
    kh = transcript.key_and_hash
    u = transcript.params.u
    detected = transcript.verdict.value == "reject"
    bob_errors = int(np.count_nonzero(transcript.bob_key_and_hash != kh))
    report = AttackReport(
        kind=adversary.kind,
        detected=detected,
        disturbance=transcript.disturbance,
        bob_bit_errors=bob_errors,
        n=len(kh),
    )
    guess_kh, guess_b1 = adversary.inferred()
    if guess_kh is not None:
        hits = guess_kh == kh
        report.key_bit_accuracy = float(hits.mean())
        report.key_exact_match = bool(hits[:u].all())
        if transcript.alice_perm is not None:
            moved = transcript.alice_perm != np.arange(len(kh))
        else:
            moved = np.zeros(len(kh), dtype=bool)
        report.nonfixed_positions = int(moved.sum())
        report.nonfixed_key_correct = int(hits[moved].sum())
        if isinstance(adversary, DenseCoding):
            report.nonfixed_outcomes = tuple(
                int(o) for o, mv in zip(adversary.state.outcomes, moved) if mv
            )
    if guess_b1 is not None:
        report.b1_bit_accuracy = float((guess_b1 == transcript.b1).mean())
    return report
