"""Pure-state simulator over entanglement islands.

Every live qubit belongs to exactly one island, a small state vector over the
qubits that are (possibly) entangled with it. Islands are merged only when a
joint measurement needs two of them, so a register of 64 Bell pairs costs 64
four-amplitude vectors instead of one 2^128 vector.

Amplitude ordering inside an island follows its qubit list: the first qubit is
the most significant bit, so a two-qubit island ``[a, b]`` stores the
amplitudes of ``|00>, |01>, |10>, |11>`` over ``|a b>``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

MAX_ISLAND_QUBITS = 8
ALGEBRAIC_TOL = 1e-12
NUMERIC_TOL = 1e-9

_S = 1 / np.sqrt(2)

I = np.array([[1, 0], [0, 1]], dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
# Real form i*sigma_y, as used for the key-bit encoding.
I_SIGMA_Y = np.array([[0, 1], [-1, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = _S * np.array([[1, 1], [1, -1]], dtype=complex)

for _g in (I, SIGMA_X, I_SIGMA_Y, SIGMA_Z, H):
    _g.setflags(write=False)


class QuantumError(Exception):
    """Raised on misuse of the simulator (dead qubits, oversized islands)."""


class BellLabel(enum.Enum):
    PHI_PLUS = "phi+"
    PHI_MINUS = "phi-"
    PSI_PLUS = "psi+"
    PSI_MINUS = "psi-"


BELL_VECTORS = {
    BellLabel.PHI_PLUS: _S * np.array([1, 0, 0, 1], dtype=complex),
    BellLabel.PHI_MINUS: _S * np.array([1, 0, 0, -1], dtype=complex),
    BellLabel.PSI_PLUS: _S * np.array([0, 1, 1, 0], dtype=complex),
    BellLabel.PSI_MINUS: _S * np.array([0, 1, -1, 0], dtype=complex),
}
for _v in BELL_VECTORS.values():
    _v.setflags(write=False)


def gate_constants() -> dict[str, np.ndarray]:
    """The five single-qubit matrices used by the protocols and by dense coding."""
    return {
        "I": I,
        "SigmaX": SIGMA_X,
        "ISigmaY": I_SIGMA_Y,
        "SigmaZ": SIGMA_Z,
        "H": H,
    }


def is_unitary(m: np.ndarray, tol: float = NUMERIC_TOL) -> bool:
    m = np.asarray(m)
    return bool(np.max(np.abs(m @ m.conj().T - np.eye(m.shape[0]))) <= tol)


def compose(outer: np.ndarray, inner: np.ndarray) -> np.ndarray:
    """Gate that applies ``inner`` first, then ``outer``."""
    g = np.asarray(outer) @ np.asarray(inner)
    if not is_unitary(g):
        raise QuantumError("composition of non-unitary gates")
    return g


def _phase_factor(s1: np.ndarray, s2: np.ndarray) -> complex:
    k = int(np.argmax(np.abs(s2)))
    if abs(s2[k]) == 0:
        return 1.0 + 0j
    c = s1[k] / s2[k]
    return c / abs(c) if abs(c) > 0 else 1.0 + 0j


def phase_distance(s1, s2) -> float:
    """``||s1 - c*s2||`` with the unit scalar ``c`` read off the largest component of ``s2``."""
    s1 = np.asarray(s1, dtype=complex).ravel()
    s2 = np.asarray(s2, dtype=complex).ravel()
    if s1.shape != s2.shape:
        raise ValueError(f"dimension mismatch: {s1.shape[0]} vs {s2.shape[0]}")
    return float(np.linalg.norm(s1 - _phase_factor(s1, s2) * s2))


def equal_up_to_global_phase(s1, s2, tol: float = NUMERIC_TOL) -> bool:
    return phase_distance(s1, s2) <= tol


@dataclass
class Island:
    qubits: list[int]
    # Tensor of shape (2,) * len(qubits), axes in qubit-list order.
    state: np.ndarray

    @property
    def amps(self) -> np.ndarray:
        return self.state.reshape(-1)


@dataclass
class Heap:
    """Register of live qubits grouped into islands, with its own seeded RNG.

    Qubit ids are plain integers, unique over the lifetime of the heap.
    Measured qubits are removed; touching them afterwards raises
    :class:`QuantumError`.
    """

    seed: int | None = None
    rng: np.random.Generator = field(init=False, repr=False)
    _islands: dict[int, Island] = field(default_factory=dict, init=False, repr=False)
    _next_id: int = field(default=0, init=False, repr=False)

    def __post_init__(self):
        self.rng = np.random.default_rng(self.seed)

    # -- allocation -------------------------------------------------------

    def _fresh(self) -> int:
        q = self._next_id
        self._next_id += 1
        return q

    def _register(self, qubits: list[int], state: np.ndarray) -> Island:
        isl = Island(list(qubits), state)
        for q in qubits:
            self._islands[q] = isl
        return isl

    def new_qubit(self, bit: int = 0) -> int:
        if bit not in (0, 1):
            raise ValueError(f"bit must be 0 or 1, got {bit!r}")
        q = self._fresh()
        state = np.zeros(2, dtype=complex)
        state[bit] = 1.0
        self._register([q], state)
        return q

    def new_epr_pair(self, which: BellLabel = BellLabel.PSI_MINUS) -> tuple[int, int]:
        """Two fresh qubits in the named Bell state; the first id is particle 1."""
        q1, q2 = self._fresh(), self._fresh()
        self._register([q1, q2], BELL_VECTORS[which].reshape(2, 2).copy())
        return q1, q2

    def prepare(self, amps) -> list[int]:
        """Fresh island holding an arbitrary normalized state over ``log2(len(amps))`` qubits."""
        amps = np.asarray(amps, dtype=complex).ravel()
        k = int(round(np.log2(amps.size)))
        if 2**k != amps.size or not 1 <= k <= MAX_ISLAND_QUBITS:
            raise QuantumError(f"cannot prepare a state with {amps.size} amplitudes")
        if abs(np.vdot(amps, amps).real - 1) > NUMERIC_TOL:
            raise QuantumError("state is not normalized")
        qs = [self._fresh() for _ in range(k)]
        self._register(qs, amps.reshape((2,) * k).copy())
        return qs

    # -- inspection -------------------------------------------------------

    def island(self, q: int) -> Island:
        try:
            return self._islands[q]
        except KeyError:
            raise QuantumError(f"qubit {q} is not live") from None

    def is_live(self, q: int) -> bool:
        return q in self._islands

    @property
    def islands(self) -> list[Island]:
        seen = {}
        for isl in self._islands.values():
            seen[id(isl)] = isl
        return list(seen.values())

    @property
    def live_qubits(self) -> list[int]:
        return sorted(self._islands)

    def state_of(self, qubits) -> np.ndarray:
        """Amplitudes over ``qubits`` in the given order.

        The qubits must make up whole islands; a product of several islands is
        allowed.
        """
        qubits = list(qubits)
        isls = []
        for q in qubits:
            isl = self.island(q)
            if all(isl is not o for o in isls):
                isls.append(isl)
        covered = [q for isl in isls for q in isl.qubits]
        if sorted(covered) != sorted(qubits):
            raise QuantumError("requested qubits do not form whole islands")
        psi = isls[0].state
        for isl in isls[1:]:
            psi = np.multiply.outer(psi, isl.state)
        perm = [covered.index(q) for q in qubits]
        return np.transpose(psi, perm).reshape(-1).copy()

    def density_matrix(self, q: int) -> np.ndarray:
        """Reduced 2x2 density matrix of a single qubit."""
        isl = self.island(q)
        ax = isl.qubits.index(q)
        m = np.moveaxis(isl.state, ax, 0).reshape(2, -1)
        return m @ m.conj().T

    # -- evolution --------------------------------------------------------

    def apply_gate(self, q: int, g: np.ndarray) -> None:
        isl = self.island(q)
        ax = isl.qubits.index(q)
        if len(isl.qubits) == 1:
            isl.state = g @ isl.state
            return
        out = np.tensordot(g, isl.state, axes=([1], [ax]))
        isl.state = np.moveaxis(out, 0, ax)

    def _merge(self, a: Island, b: Island) -> Island:
        if a is b:
            return a
        total = len(a.qubits) + len(b.qubits)
        if total > MAX_ISLAND_QUBITS:
            raise QuantumError(
                f"merged island would hold {total} qubits (limit {MAX_ISLAND_QUBITS})"
            )
        return self._register(a.qubits + b.qubits, np.multiply.outer(a.state, b.state))

    def _collapse(self, isl: Island, measured: list[int], rows: np.ndarray) -> int:
        """Sample one row of ``rows`` (shape outcomes x rest) by Born rule and keep the residual."""
        probs = np.einsum("ij,ij->i", rows.conj(), rows).real
        # Rounding residue on forbidden branches.
        probs[probs < 1e-14] = 0.0
        total = probs.sum()
        probs = probs / total
        r = self.rng.random()
        outcome = min(int(np.searchsorted(np.cumsum(probs), r, side="right")), len(probs) - 1)
        # Never land on a zero-probability branch through rounding at the edges.
        while probs[outcome] == 0:
            outcome -= 1
        for q in measured:
            del self._islands[q]
        rest = [q for q in isl.qubits if q not in measured]
        if rest:
            residual = rows[outcome] / np.sqrt(probs[outcome] * total)
            isl.qubits = rest
            isl.state = residual.reshape((2,) * len(rest))
        return outcome

    def measure_computational(self, q: int) -> int:
        isl = self.island(q)
        ax = isl.qubits.index(q)
        rows = np.moveaxis(isl.state, ax, 0).reshape(2, -1)
        return self._collapse(isl, [q], rows)

    def _pair_rows(self, q1: int, q2: int, basis) -> tuple[Island, np.ndarray]:
        if q1 == q2:
            raise QuantumError("cannot measure a qubit jointly with itself")
        isl = self._merge(self.island(q1), self.island(q2))
        i1, i2 = isl.qubits.index(q1), isl.qubits.index(q2)
        t = np.moveaxis(isl.state, (i1, i2), (0, 1)).reshape(4, -1)
        vecs = np.asarray(getattr(basis, "matrix", basis), dtype=complex)
        return isl, vecs.conj() @ t

    def pair_probabilities(self, q1: int, q2: int, basis) -> np.ndarray:
        """Born probabilities of each basis outcome on ``(q1, q2)``, without measuring.

        The two islands are merged as a side effect; the joint state is unchanged.
        """
        _, rows = self._pair_rows(q1, q2, basis)
        return np.einsum("ij,ij->i", rows.conj(), rows).real

    def measure_pair_in_basis(self, q1: int, q2: int, basis) -> int:
        """Projective measurement of ``(q1, q2)`` onto four orthonormal vectors.

        ``basis`` is a 4x4 array (one basis vector per row) or anything with a
        ``matrix`` attribute of that form; vectors are written in the
        ``|q1 q2>`` order. Returns the index of the observed vector.
        """
        isl, rows = self._pair_rows(q1, q2, basis)
        return self._collapse(isl, [q1, q2], rows)
