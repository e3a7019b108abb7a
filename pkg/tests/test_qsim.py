import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qkd3p.primitives import bell_basis, eve_basis
from qkd3p.qsim import (
    BELL_VECTORS,
    H,
    I,
    I_SIGMA_Y,
    BellLabel,
    Heap,
    QuantumError,
    compose,
    equal_up_to_global_phase,
    gate_constants,
)

S = 1 / np.sqrt(2)
KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)


def random_state(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_unitary(rng):
    q, r = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


# -- gates ----------------------------------------------------------------


@pytest.mark.parametrize("name", ["I", "SigmaX", "ISigmaY", "SigmaZ", "H"])
def test_gate_constants_are_unitary(name):
    g = gate_constants()[name]
    assert np.max(np.abs(g @ g.conj().T - np.eye(2))) <= 1e-12


def test_gate_constants_match_printed_matrices():
    g = gate_constants()
    assert np.array_equal(g["ISigmaY"], [[0, 1], [-1, 0]])
    assert np.array_equal(g["SigmaX"], [[0, 1], [1, 0]])
    assert np.array_equal(g["SigmaZ"], [[1, 0], [0, -1]])
    assert np.allclose(g["H"] * np.sqrt(2), [[1, 1], [1, -1]], atol=1e-15)


def test_gate_actions_on_basis_kets():
    assert np.allclose(I_SIGMA_Y @ KET0, -KET1)
    assert np.allclose(H @ KET0, S * np.array([1, 1]))
    psi = random_state(np.random.default_rng(0), 2)
    assert np.array_equal(I @ psi, psi)


def test_compose():
    assert np.allclose(compose(H, I_SIGMA_Y) @ KET0, -S * np.array([1, -1]))
    assert np.allclose(compose(H, H), I, atol=1e-15)
    assert np.array_equal(compose(I, H), H)


def test_compose_rejects_non_unitary():
    with pytest.raises(QuantumError):
        compose(np.array([[1, 1], [0, 1]]), I)


# -- allocation -----------------------------------------------------------


def test_new_qubit_basis_states():
    h = Heap(0)
    assert np.array_equal(h.state_of([h.new_qubit(0)]), KET0)
    assert np.array_equal(h.state_of([h.new_qubit(1)]), KET1)
    with pytest.raises(ValueError):
        h.new_qubit(2)


def test_many_fresh_qubits_are_disjoint_islands():
    h = Heap(0)
    qs = [h.new_qubit(0) for _ in range(64)]
    assert len(set(qs)) == 64
    assert len(h.islands) == 64
    assert all(len(isl.qubits) == 1 for isl in h.islands)


@pytest.mark.parametrize(
    "which, amps",
    [
        (BellLabel.PSI_MINUS, [0, S, -S, 0]),
        (BellLabel.PHI_PLUS, [S, 0, 0, S]),
        (BellLabel.PSI_PLUS, [0, S, S, 0]),
        (BellLabel.PHI_MINUS, [S, 0, 0, -S]),
    ],
)
def test_new_epr_pair(which, amps):
    h = Heap(0)
    a, b = h.new_epr_pair(which)
    state = h.state_of([a, b])
    assert np.allclose(state, amps, atol=1e-15)
    assert abs(np.linalg.norm(state) - 1) < 1e-12


# -- gates on islands -----------------------------------------------------


def test_isigmay_on_psi_minus_gives_phi_plus():
    h = Heap(0)
    a, b = h.new_epr_pair(BellLabel.PSI_MINUS)
    h.apply_gate(a, I_SIGMA_Y)
    state = h.state_of([a, b])
    # Oracle: (iσy ⊗ I) applied to the 4-vector.
    oracle = np.kron(I_SIGMA_Y, I) @ BELL_VECTORS[BellLabel.PSI_MINUS]
    assert np.allclose(state, oracle)
    assert np.allclose(state, -S * np.array([1, 0, 0, 1]))
    assert equal_up_to_global_phase(state, BELL_VECTORS[BellLabel.PHI_PLUS])


def test_h_on_psi_minus_gives_omega():
    h = Heap(0)
    a, b = h.new_epr_pair(BellLabel.PSI_MINUS)
    h.apply_gate(a, H)
    omega = eve_basis().matrix[2]
    assert equal_up_to_global_phase(h.state_of([a, b]), omega, 1e-12)


def test_gate_on_second_particle_uses_right_axis():
    h = Heap(0)
    a, b = h.new_epr_pair(BellLabel.PHI_PLUS)
    h.apply_gate(b, I_SIGMA_Y)
    oracle = np.kron(I, I_SIGMA_Y) @ BELL_VECTORS[BellLabel.PHI_PLUS]
    assert np.allclose(h.state_of([a, b]), oracle)
    # Reordering the request swaps the tensor factors.
    assert np.allclose(h.state_of([b, a]), np.kron(I_SIGMA_Y, I) @ BELL_VECTORS[BellLabel.PHI_PLUS])


def test_identity_gate_leaves_state_alone():
    h = Heap(0)
    a, b = h.new_epr_pair(BellLabel.PSI_PLUS)
    before = h.state_of([a, b])
    h.apply_gate(b, I)
    assert np.array_equal(h.state_of([a, b]), before)


def test_dead_qubit_raises():
    h = Heap(0)
    q = h.new_qubit(0)
    h.measure_computational(q)
    with pytest.raises(QuantumError):
        h.apply_gate(q, H)
    with pytest.raises(QuantumError):
        h.measure_computational(q)
    with pytest.raises(QuantumError):
        h.apply_gate(12345, H)


def test_norm_preserved_for_random_gate_state_pairs():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        h = Heap(0)
        k = int(rng.integers(1, 5))
        qs = h.prepare(random_state(rng, 2**k))
        h.apply_gate(qs[int(rng.integers(k))], random_unitary(rng))
        worst = max(worst, abs(np.linalg.norm(h.state_of(qs)) - 1))
    assert worst <= 1e-9


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_apply_gate_matches_kron_oracle(k, seed):
    rng = np.random.default_rng(seed)
    psi = random_state(rng, 2**k)
    g = random_unitary(rng)
    target = int(rng.integers(k))
    h = Heap(0)
    qs = h.prepare(psi)
    h.apply_gate(qs[target], g)
    full = np.array([[1]], dtype=complex)
    for i in range(k):
        full = np.kron(full, g if i == target else I)
    assert np.allclose(h.state_of(qs), full @ psi, atol=1e-12)


# -- computational measurement ---------------------------------------------


def test_measure_eigenstate():
    h = Heap(3)
    for _ in range(50):
        assert h.measure_computational(h.new_qubit(1)) == 1


def test_measure_plus_state_frequency():
    h = Heap(11)
    zeros = 0
    for _ in range(10_000):
        q = h.new_qubit(0)
        h.apply_gate(q, H)
        zeros += h.measure_computational(q) == 0
    assert abs(zeros / 10_000 - 0.5) <= 0.02


@pytest.mark.parametrize("which", list(BellLabel))
def test_bell_pair_correlations(which):
    h = Heap(5)
    equal = which in (BellLabel.PHI_PLUS, BellLabel.PHI_MINUS)
    for _ in range(500):
        a, b = h.new_epr_pair(which)
        x = h.measure_computational(a)
        # The partner collapses to a definite basis state.
        assert np.allclose(np.abs(h.state_of([b])), [1 - x, x] if equal else [x, 1 - x])
        y = h.measure_computational(b)
        assert (x == y) == equal


def test_measurement_removes_qubit_and_keeps_partner_normalized():
    h = Heap(0)
    a, b = h.new_epr_pair(BellLabel.PSI_MINUS)
    h.measure_computational(a)
    assert not h.is_live(a)
    assert h.is_live(b)
    assert abs(np.linalg.norm(h.state_of([b])) - 1) < 1e-12


# -- pair measurement -----------------------------------------------------


def test_pair_in_basis_element_is_certain():
    h = Heap(0)
    for _ in range(20):
        a, b = h.new_epr_pair(BellLabel.PHI_PLUS)
        assert h.measure_pair_in_basis(a, b, eve_basis()) == 1


def test_pair_measurement_rejects_bad_ids():
    h = Heap(0)
    a, b = h.new_epr_pair()
    with pytest.raises(QuantumError):
        h.measure_pair_in_basis(a, a, eve_basis())
    h.measure_pair_in_basis(a, b, eve_basis())
    with pytest.raises(QuantumError):
        h.measure_pair_in_basis(a, b, eve_basis())


def _brute_pair_probs(psi_a, psi_b, basis):
    """Probabilities for measuring (first qubit of A, first qubit of B) on A ⊗ B.

    Builds the 16-amplitude joint state by hand, reorders to (a1, b1, a2, b2)
    and projects each basis vector against the leading two qubits.
    """
    joint = np.kron(psi_a, psi_b).reshape(2, 2, 2, 2)  # a1 a2 b1 b2
    joint = joint.transpose(0, 2, 1, 3).reshape(4, 4)  # (a1 b1), (a2 b2)
    return np.array([np.linalg.norm(v.conj() @ joint) ** 2 for v in basis])


def test_halves_of_two_psi_minus_pairs_are_uniform():
    psi = BELL_VECTORS[BellLabel.PSI_MINUS]
    probs = _brute_pair_probs(psi, psi, eve_basis().matrix)
    assert np.allclose(probs, 0.25, atol=1e-12)

    h = Heap(0)
    a1, a2 = h.new_epr_pair()
    b1, b2 = h.new_epr_pair()
    assert np.allclose(h.pair_probabilities(a1, b1, eve_basis()), 0.25, atol=1e-12)

    counts = np.zeros(4)
    h = Heap(99)
    for _ in range(10_000):
        a1, _ = h.new_epr_pair()
        b1, _ = h.new_epr_pair()
        counts[h.measure_pair_in_basis(a1, b1, eve_basis())] += 1
    assert np.all(np.abs(counts / 10_000 - 0.25) <= 0.02)


def test_pair_probabilities_match_brute_force_for_many_configs():
    rng = np.random.default_rng(31337)
    bases = [eve_basis().matrix, bell_basis().matrix]
    worst = 0.0
    for _ in range(1000):
        psi_a, psi_b = random_state(rng, 4), random_state(rng, 4)
        basis = bases[int(rng.integers(2))]
        h = Heap(0)
        qa = h.prepare(psi_a)
        qb = h.prepare(psi_b)
        probs = h.pair_probabilities(qa[0], qb[0], basis)
        worst = max(worst, np.max(np.abs(probs - _brute_pair_probs(psi_a, psi_b, basis))))
    assert worst <= 1e-12


@pytest.mark.slow
def test_pair_sampling_frequencies_match_brute_force():
    rng = np.random.default_rng(4242)
    for cfg in range(20):
        psi_a, psi_b = random_state(rng, 4), random_state(rng, 4)
        oracle = _brute_pair_probs(psi_a, psi_b, eve_basis().matrix)
        h = Heap(cfg)
        counts = np.zeros(4)
        for _ in range(10_000):
            qa = h.prepare(psi_a)
            qb = h.prepare(psi_b)
            counts[h.measure_pair_in_basis(qa[0], qb[0], eve_basis())] += 1
            h.measure_computational(qa[1])
            h.measure_computational(qb[1])
        assert np.all(np.abs(counts / 10_000 - oracle) <= 0.02), cfg


def test_pair_measurement_residual_is_swapped_entanglement():
    h = Heap(8)
    a1, a2 = h.new_epr_pair(BellLabel.PSI_MINUS)
    b1, b2 = h.new_epr_pair(BellLabel.PSI_MINUS)
    h.measure_pair_in_basis(a1, b1, bell_basis())
    rest = h.state_of([a2, b2])
    assert abs(np.linalg.norm(rest) - 1) < 1e-12
    # Measuring two halves in the Bell basis leaves the partners in a Bell state.
    overlaps = np.abs(bell_basis().matrix.conj() @ rest)
    assert np.isclose(overlaps.max(), 1.0)


def test_island_size_cap():
    h = Heap(0)
    big = h.prepare(np.eye(2**8)[0])
    other = h.prepare(np.eye(2)[0])
    with pytest.raises(QuantumError):
        h.measure_pair_in_basis(big[0], other[0], eve_basis())


# -- phase helper ---------------------------------------------------------


def test_equal_up_to_global_phase():
    psi = random_state(np.random.default_rng(1), 4)
    assert equal_up_to_global_phase(psi, -psi)
    assert equal_up_to_global_phase(psi, 1j * psi)
    assert not equal_up_to_global_phase(KET0, KET1)
    with pytest.raises(ValueError):
        equal_up_to_global_phase(KET0, psi)


def test_h_on_psi_minus_is_minus_omega_exactly():
    out = np.kron(H, I) @ BELL_VECTORS[BellLabel.PSI_MINUS]
    assert np.allclose(out, -eve_basis().matrix[2], atol=1e-15)
    assert equal_up_to_global_phase(out, eve_basis().matrix[2])


# -- determinism ----------------------------------------------------------


def _script(seed):
    h = Heap(seed)
    out = []
    for i in range(200):
        a, b = h.new_epr_pair(BellLabel.PSI_MINUS)
        c, d = h.new_epr_pair(BellLabel.PHI_PLUS)
        h.apply_gate(a, H)
        out.append(h.measure_pair_in_basis(a, c, eve_basis()))
        out.append(h.measure_computational(b))
        out.append(h.measure_computational(d))
    return out


def test_same_seed_same_outcomes():
    assert _script(123) == _script(123)
    assert _script(123) != _script(124)
