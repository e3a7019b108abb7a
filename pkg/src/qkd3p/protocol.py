"""Honest-center (QKDP-I) and untrusted-center (QKDP-II) three-party sessions.

A session is a straight-line run of the parties' steps over an ideal quantum
channel. Each quantum transmission passes through a tap owned by the
adversary; the classical board is append-only and the adversary only ever
sees a read-only view of it.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .adversary import Adversary, AttackReport, NoAdversary, build_report
from .primitives import combined_encoding
from .qsim import H, Heap

log = logging.getLogger(__name__)

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1

MAX_N = 4096


class Variant(str, enum.Enum):
    QKDP1 = "qkdp1"
    QKDP2 = "qkdp2"


class Verdict(str, enum.Enum):
    ACCEPT = "accept"
    REJECT = "reject"


# -- classical helpers ----------------------------------------------------


def as_bits(bits) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.uint8).ravel()
    if arr.size and arr.max() > 1:
        raise ValueError("bit strings may only contain 0 and 1")
    return arr


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h


def checksum(key, m: int) -> np.ndarray:
    """m-bit check value of ``key``.

    The key is packed MSB-first into bytes (last byte zero-padded), hashed
    with 64-bit FNV-1a, and the low ``m`` bits are returned MSB-first.
    """
    if not 1 <= m <= 64:
        raise ValueError(f"checksum width must be in 1..64, got {m}")
    digest = fnv1a64(np.packbits(as_bits(key)).tobytes()) & ((1 << m) - 1)
    return np.array([(digest >> (m - 1 - i)) & 1 for i in range(m)], dtype=np.uint8)


ChecksumFn = Callable[[np.ndarray, int], np.ndarray]


def permute(seq, perm) -> list:
    """Reorder so that position ``j`` of the result holds ``seq[perm[j]]``."""
    return [seq[p] for p in perm]


def unpermute(seq, perm) -> list:
    out = [None] * len(perm)
    for j, p in enumerate(perm):
        out[p] = seq[j]
    return out


def check_permutation(perm, n: int) -> np.ndarray:
    perm = np.asarray(perm, dtype=np.int64)
    if perm.shape != (n,) or not np.array_equal(np.sort(perm), np.arange(n)):
        raise ValueError(f"not a permutation of 0..{n - 1}")
    return perm


# -- parameters and records -----------------------------------------------


@dataclass(frozen=True)
class ProtocolParams:
    n: int = 64
    u: int = 48
    m: int = 16
    variant: Variant = Variant.QKDP1
    countermeasure_shuffle: bool = False
    base_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.u < 1 or self.m < 1:
            raise ValueError("u and m must both be at least 1")
        if self.u + self.m != self.n:
            raise ValueError(f"u + m must equal n ({self.u} + {self.m} != {self.n})")
        if self.n > MAX_N:
            raise ValueError(f"n must be at most {MAX_N}")
        if not 0 <= self.base_seed < 2**64:
            raise ValueError("base_seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class BoardRecord:
    sender: str
    kind: str
    payload: tuple


class ClassicalBoard:
    """Append-only public log. Everyone can read it; only parties can append."""

    def __init__(self):
        self._records: list[BoardRecord] = []

    def post(self, sender: str, kind: str, payload=()) -> None:
        if isinstance(payload, np.ndarray):
            payload = tuple(int(x) for x in payload)
        elif not isinstance(payload, tuple):
            payload = (payload,)
        self._records.append(BoardRecord(sender, kind, payload))

    @property
    def records(self) -> tuple[BoardRecord, ...]:
        return tuple(self._records)

    def view(self) -> "BoardView":
        return BoardView(self)


class BoardView:
    """Read-only window onto a :class:`ClassicalBoard`."""

    __slots__ = ("_board",)

    def __init__(self, board: ClassicalBoard):
        self._board = board

    @property
    def records(self) -> tuple[BoardRecord, ...]:
        return self._board.records

    def find(self, kind: str) -> BoardRecord | None:
        for rec in self._board.records:
            if rec.kind == kind:
                return rec
        return None

    def __len__(self):
        return len(self._board.records)


@dataclass
class SessionTranscript:
    params: ProtocolParams
    key: np.ndarray
    hash: np.ndarray
    b1: np.ndarray
    r2: np.ndarray
    b2: np.ndarray
    bob_perm: np.ndarray
    # Alice's private pre-encoding shuffle; None unless the countermeasure is on.
    alice_perm: np.ndarray | None
    board: tuple[BoardRecord, ...] = ()
    c_prime: np.ndarray | None = None
    bob_key: np.ndarray | None = None
    bob_hash: np.ndarray | None = None
    verdict: Verdict | None = None
    disturbance: float = 0.0

    @property
    def key_and_hash(self) -> np.ndarray:
        return np.concatenate([self.key, self.hash])

    @property
    def bob_key_and_hash(self) -> np.ndarray:
        return np.concatenate([self.bob_key, self.bob_hash])

    @property
    def key_match(self) -> bool:
        return self.bob_key is not None and np.array_equal(self.bob_key, self.key)


@dataclass
class PartyRandomness:
    key: np.ndarray
    b1: np.ndarray
    r2: np.ndarray
    b2: np.ndarray
    bob_perm: np.ndarray
    alice_perm: np.ndarray
    hash: np.ndarray | None = None

    @classmethod
    def draw(cls, rng: np.random.Generator, n: int, u: int) -> "PartyRandomness":
        # Fixed draw order, independent of variant and countermeasure, so that
        # toggling either leaves the other strings untouched.
        key = rng.integers(0, 2, u, dtype=np.uint8)
        b1 = rng.integers(0, 2, n, dtype=np.uint8)
        r2 = rng.integers(0, 2, n, dtype=np.uint8)
        b2 = rng.integers(0, 2, n, dtype=np.uint8)
        bob_perm = rng.permutation(n)
        alice_perm = rng.permutation(n)
        return cls(key, b1, r2, b2, bob_perm, alice_perm)


# -- party operations -----------------------------------------------------


def _check_len(name: str, seq, n: int):
    if len(seq) != n:
        raise ValueError(f"{name} has length {len(seq)}, expected {n}")


_COMBINED = {(k, b): combined_encoding(k, b) for k in (0, 1) for b in (0, 1)}


def alice_encode(heap: Heap, qubits: Sequence[int], key_and_hash, b1, perm=None) -> list[int]:
    """Encode K||h and B1 into the qubits; returns the sequence Alice sends on.

    With ``perm`` the received sequence is first reordered (the shuffle
    countermeasure), then position ``i`` gets the combined gate for bit ``i``.
    """
    n = len(qubits)
    _check_len("K||h", key_and_hash, n)
    _check_len("B1", b1, n)
    qs = list(qubits)
    if perm is not None:
        qs = permute(qs, check_permutation(perm, n))
    for q, k, b in zip(qs, key_and_hash, b1):
        if k or b:
            heap.apply_gate(q, _COMBINED[int(k), int(b)])
    return qs


def bob_encode_qkdp1(heap: Heap, qubits: Sequence[int], r2, b2) -> list[int]:
    n = len(qubits)
    _check_len("R2", r2, n)
    _check_len("B2", b2, n)
    for q, r, b in zip(qubits, r2, b2):
        if r or b:
            heap.apply_gate(q, _COMBINED[int(r), int(b)])
    return list(qubits)


def center_recover_and_measure(heap: Heap, qubits: Sequence[int], basis_correction) -> np.ndarray:
    """Undo the H layer where ``basis_correction`` is 1, then measure everything in Z."""
    _check_len("basis correction", basis_correction, len(qubits))
    out = np.empty(len(qubits), dtype=np.uint8)
    for i, (q, c) in enumerate(zip(qubits, basis_correction)):
        if c:
            heap.apply_gate(q, H)
        out[i] = heap.measure_computational(q)
    return out


def _split_and_verify(kh: np.ndarray, u: int, m: int, checksum_fn: ChecksumFn):
    key, h = kh[:u].copy(), kh[u:].copy()
    _check_len("recovered K||h", kh, u + m)
    ok = np.array_equal(checksum_fn(key, m), h)
    return (Verdict.ACCEPT if ok else Verdict.REJECT), key, h


def bob_finalize_qkdp1(c_prime, r2, u: int, m: int, checksum_fn: ChecksumFn = checksum):
    """Returns ``(verdict, key, hash)`` recovered as R2 xor C'."""
    c_prime, r2 = as_bits(c_prime), as_bits(r2)
    _check_len("R2", r2, len(c_prime))
    return _split_and_verify(c_prime ^ r2, u, m, checksum_fn)


def bob_recover_shuffle_qkdp2(heap: Heap, qubits: Sequence[int], b1, perm) -> list[int]:
    n = len(qubits)
    _check_len("B1", b1, n)
    for q, b in zip(qubits, b1):
        if b:
            heap.apply_gate(q, H)
    return permute(list(qubits), check_permutation(perm, n))


def bob_finalize_qkdp2(c_prime, perm, u: int, m: int, checksum_fn: ChecksumFn = checksum):
    c_prime = as_bits(c_prime)
    perm = check_permutation(perm, len(c_prime))
    kh = np.array(unpermute(list(c_prime), perm), dtype=np.uint8)
    return _split_and_verify(kh, u, m, checksum_fn)


# -- orchestration --------------------------------------------------------


def _trace_distances(rhos: np.ndarray, sigmas: np.ndarray) -> np.ndarray:
    return 0.5 * np.abs(np.linalg.eigvalsh(rhos - sigmas)).sum(axis=1)


def honest_forward_states(rand: PartyRandomness, params: ProtocolParams) -> np.ndarray:
    """Density matrices of the Q2 qubits an undisturbed channel would deliver to Bob."""
    heap = Heap(0)
    q1 = [heap.new_qubit(0) for _ in range(params.n)]
    kh = np.concatenate([rand.key, rand.hash])
    perm = rand.alice_perm if params.countermeasure_shuffle else None
    q2 = alice_encode(heap, q1, kh, rand.b1, perm)
    return np.array([heap.density_matrix(q) for q in q2])


def session_seeds(seed: int) -> tuple[list[int], list[int]]:
    """Seed material for the parties' classical RNG and for the quantum heap."""
    return [seed, 0], [seed, 1]


def run_session(
    params: ProtocolParams,
    adversary: Adversary | None = None,
    checksum_fn: ChecksumFn = checksum,
) -> tuple[SessionTranscript, AttackReport]:
    """Run one full session of ``params.variant`` with ``adversary`` on the quantum channel."""
    adversary = adversary if adversary is not None else NoAdversary()
    n, u, m = params.n, params.u, params.m
    party_seed, heap_seed = session_seeds(params.base_seed)
    rand = PartyRandomness.draw(np.random.default_rng(party_seed), n, u)
    rand.hash = checksum_fn(rand.key, m)
    kh = np.concatenate([rand.key, rand.hash])

    heap = Heap(heap_seed)
    board = ClassicalBoard()
    adversary.attach(board.view())
    alice_perm = rand.alice_perm if params.countermeasure_shuffle else None
    tr = SessionTranscript(
        params=params,
        key=rand.key,
        hash=rand.hash,
        b1=rand.b1,
        r2=rand.r2 if params.variant is Variant.QKDP1 else np.zeros(n, dtype=np.uint8),
        b2=rand.b2 if params.variant is Variant.QKDP1 else np.zeros(n, dtype=np.uint8),
        bob_perm=rand.bob_perm if params.variant is Variant.QKDP2 else np.arange(n),
        alice_perm=alice_perm,
    )

    # Step 1: the center's |0> sequence, through the first tap.
    q1 = [heap.new_qubit(0) for _ in range(n)]
    q1 = adversary.center_to_alice(heap, q1)

    # Step 2: Alice's encoding, through the second tap.
    q2 = alice_encode(heap, q1, kh, rand.b1, alice_perm)
    q2 = adversary.alice_to_bob(heap, q2)
    forwarded = np.array([heap.density_matrix(q) for q in q2])
    tr.disturbance = float(_trace_distances(forwarded, honest_forward_states(rand, params)).max())

    if params.variant is Variant.QKDP1:
        q3 = bob_encode_qkdp1(heap, q2, rand.r2, rand.b2)
        q3 = adversary.bob_to_center(heap, q3)
        board.post("center", "ack")
        board.post("alice", "B1", rand.b1)
        board.post("bob", "B2", rand.b2)
        c_prime = center_recover_and_measure(heap, q3, rand.b1 ^ rand.b2)
        board.post("center", "C'", c_prime)
        verdict, bob_key, bob_hash = bob_finalize_qkdp1(c_prime, rand.r2, u, m, checksum_fn)
    else:
        board.post("alice", "B1", rand.b1)
        q3 = bob_recover_shuffle_qkdp2(heap, q2, rand.b1, rand.bob_perm)
        q3 = adversary.bob_to_center(heap, q3)
        c_prime = center_recover_and_measure(heap, q3, np.zeros(n, dtype=np.uint8))
        board.post("center", "C'", c_prime)
        verdict, bob_key, bob_hash = bob_finalize_qkdp2(c_prime, rand.bob_perm, u, m, checksum_fn)
    board.post("bob", "success", int(verdict is Verdict.ACCEPT))

    tr.board = board.records
    tr.c_prime = c_prime
    tr.bob_key, tr.bob_hash, tr.verdict = bob_key, bob_hash, verdict
    log.debug("session seed=%d verdict=%s", params.base_seed, verdict.value)
    return tr, build_report(tr, adversary)
