import math

import numpy as np
import pytest

from weakmeas.errors import DimensionMismatch, DimensionTooLarge, NotNormalized, SingularWeakValue
from weakmeas.fisher import quantum_fisher_pure
from weakmeas.qcore import QuantumState, ket0, phase_free_distance
from weakmeas.qubitsim import (
    Circuit,
    Gate,
    branch_pointers,
    branch_qfi,
    branch_qfi_linear,
    eta,
    ghz_state,
    interaction_circuit,
    linearized_branch_pointers,
    postselect_circuit,
    postselected_state,
    postselection_angles,
    prepare_ghz_circuit,
    product_baseline_fisher,
    protocol_circuit,
    rejected_state,
    run_protocol,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex)
TILTED = QuantumState([np.cos(0.4), np.exp(0.3j) * np.sin(0.4)])


def _magnetizations(n):
    # sum of sigma_z eigenvalues for each big-endian basis index
    bits = (np.arange(2**n)[:, None] >> np.arange(n - 1, -1, -1)) & 1
    return n - 2 * bits.sum(axis=1)


def _oracle_branches(n, phi, A_w, pointer):
    """Dense statevector reference: GHZ, exp(-i phi sum sigma_z x sigma_x), project on the two records."""
    A_w = complex(A_w)
    ghz = np.zeros(2**n, dtype=complex)
    ghz[0] = ghz[-1] = 1 / np.sqrt(2)
    joint = np.kron(ghz, pointer.amplitudes).reshape(2**n, 2)
    for idx, m in enumerate(_magnetizations(n)):
        u = np.cos(phi * m) * np.eye(2) - 1j * np.sin(phi * m) * SX
        joint[idx] = u @ joint[idx]
    f = np.zeros(2**n, dtype=complex)
    f[0], f[-1] = n + A_w.conjugate(), n - A_w.conjugate()
    f /= np.linalg.norm(f)
    r = np.zeros(2**n, dtype=complex)
    r[0], r[-1] = -(n - A_w), n + A_w
    r /= np.linalg.norm(r)
    return f.conj() @ joint, r.conj() @ joint


def _same_ray(a, b):
    ov = np.vdot(a, b)
    return 1 - abs(ov) ** 2 / (np.vdot(a, a).real * np.vdot(b, b).real)


@pytest.mark.parametrize("n", [1, 2, 5])
def test_ghz_preparation(n):
    circ, state = prepare_ghz_circuit(n)
    assert state.fidelity(ghz_state(n)) == pytest.approx(1, abs=1e-12)
    assert circ.count("CNOT") == n - 1
    assert circ.run().fidelity(ghz_state(n)) == pytest.approx(1, abs=1e-12)


def test_ghz_on_larger_register_leaves_pointer_alone():
    circ, _ = prepare_ghz_circuit(3, total_qubits=4)
    out = circ.run().amplitudes.reshape(8, 2)
    assert np.abs(out[:, 1]).max() < 1e-15


def test_interaction_is_identity_at_zero_coupling():
    u = interaction_circuit(3, 0.0).unitary()
    assert phase_free_distance(u, np.eye(16)) < 1e-14


@pytest.mark.parametrize("n,phi", [(1, 0.37), (3, 0.01), (3, -1.2), (4, 1e-3)])
def test_interaction_decomposition_is_exact(n, phi):
    # the target is diagonal in the system basis: exp(-i phi m sigma_x) on the pointer
    target = np.zeros((2 ** (n + 1),) * 2, dtype=complex)
    for idx, m in enumerate(_magnetizations(n)):
        block = np.cos(phi * m) * np.eye(2) - 1j * np.sin(phi * m) * SX
        target[2 * idx : 2 * idx + 2, 2 * idx : 2 * idx + 2] = block
    assert phase_free_distance(interaction_circuit(n, phi).unitary(), target) <= 1e-12


def test_angles_for_two_qubits():
    alpha, beta = postselection_angles(2, 20)
    assert alpha == pytest.approx(-2 * math.atan(18 / 22), abs=1e-14)
    assert alpha == pytest.approx(-1.3714590218125, abs=1e-12)
    # arg((2 - 20) / (2 + 20)) = pi
    assert beta == pytest.approx(-1.5 * math.pi, abs=1e-14)


def test_angles_large_weak_value_limit():
    alpha, _ = postselection_angles(3, 1e9)
    assert alpha == pytest.approx(-math.pi / 2, abs=1e-8)


def test_singular_weak_value():
    with pytest.raises(SingularWeakValue):
        postselection_angles(2, 2)
    with pytest.raises(SingularWeakValue):
        postselect_circuit(3, -3)


@pytest.mark.parametrize("n", [1, 2, 3, 6])
@pytest.mark.parametrize("A_w", [5, 20, 100, 20 + 10j, -7j])
def test_postselection_rotation_maps_target_states(n, A_w):
    circ = postselect_circuit(n, A_w)
    zeros = QuantumState.basis(0, (2,) * n)
    ones = QuantumState.basis(2**n - 1, (2,) * n)
    assert circ.run(postselected_state(n, A_w)).fidelity(zeros) == pytest.approx(1, abs=1e-10)
    assert circ.run(rejected_state(n, A_w)).fidelity(ones) == pytest.approx(1, abs=1e-10)


def test_postselected_and_rejected_are_orthogonal():
    assert abs(postselected_state(4, 20 + 10j).inner(rejected_state(4, 20 + 10j))) < 1e-15


def test_zero_coupling_probability_and_pointer():
    for n, A in [(1, 5), (2, 20), (4, 7 + 3j)]:
        b0, b1 = run_protocol(n, 0.0, A)
        assert b0.probability == pytest.approx(n**2 / (n**2 + abs(A) ** 2), abs=1e-12)
        assert b0.pointer_state.fidelity(ket0) == pytest.approx(1, abs=1e-12)
        assert b1.pointer_state.fidelity(ket0) == pytest.approx(1, abs=1e-12)


def test_two_qubit_weights():
    e0, e1 = eta(2, 0.01, 20)
    # 4 cos^2(0.02) + 400 sin^2(0.02) and its complement
    assert e0 == pytest.approx(4.158378881126367, abs=1e-12)
    assert e1 == pytest.approx(399.8416211188736, abs=1e-10)
    b0, b1 = run_protocol(2, 0.01, 20)
    assert b0.probability == pytest.approx(0.010293017032491004, abs=1e-12)
    assert b0.eta0 == e0 and b0.eta1 == e1


def test_weak_regime_probability():
    b0, _ = run_protocol(3, 1e-5, 30)
    assert b0.probability == pytest.approx(9 / 909, rel=1e-4)


@pytest.mark.parametrize("n", range(1, 9))
@pytest.mark.parametrize("phi", [0.0, 1e-3, 1e-2])
@pytest.mark.parametrize("A_w", [5, 20, 100, 20 + 10j])
def test_circuit_matches_closed_form(n, phi, A_w):
    pointer = TILTED
    if A_w == n:
        # the postselected state is |0...0> itself; no rotation angles exist, but the closed form still holds
        with pytest.raises(SingularWeakValue):
            run_protocol(n, phi, A_w, pointer)
        d0, d1, _, _ = branch_pointers(n, phi, A_w, pointer)
        o0, o1 = _oracle_branches(n, phi, A_w, pointer)
        e0, e1 = eta(n, phi, A_w, pointer)
        assert np.vdot(o0, o0).real == pytest.approx(e0 / (e0 + e1), abs=1e-10)
        assert _same_ray(o0, d0) < 1e-10 and _same_ray(o1, d1) < 1e-10
        return
    b0, b1 = run_protocol(n, phi, A_w, pointer)
    e0, e1 = eta(n, phi, A_w, pointer)
    assert b0.probability == pytest.approx(e0 / (e0 + e1), abs=1e-10)
    assert b1.probability == pytest.approx(e1 / (e0 + e1), abs=1e-10)
    assert b0.probability + b1.probability == pytest.approx(1, abs=1e-12)
    d0, d1, _, _ = branch_pointers(n, phi, A_w, pointer)
    assert np.vdot(d0, d0).real == pytest.approx(e0, rel=1e-10)
    assert np.vdot(d1, d1).real == pytest.approx(e1, rel=1e-10)
    assert _same_ray(b0.pointer_state.amplitudes, d0) < 1e-10
    assert _same_ray(b1.pointer_state.amplitudes, d1) < 1e-10
    # independent dense statevector reference
    o0, o1 = _oracle_branches(n, phi, A_w, pointer)
    assert np.vdot(o0, o0).real == pytest.approx(b0.probability, abs=1e-10)
    assert np.vdot(o1, o1).real == pytest.approx(b1.probability, abs=1e-10)
    assert _same_ray(o0, d0) < 1e-10 and _same_ray(o1, d1) < 1e-10


def test_protocol_validation():
    with pytest.raises(NotNormalized):
        run_protocol(2, 0.01, 20, QuantumState([1, 1]))
    with pytest.raises(DimensionMismatch):
        run_protocol(2, 0.01, 20, QuantumState.basis(0, (3,)))
    with pytest.raises(DimensionTooLarge):
        run_protocol(16, 0.01, 20)


@pytest.mark.parametrize("n,A_w", [(1, 5), (2, 20), (3, 20 + 10j), (5, 100)])
def test_linearization_error_is_second_order(n, A_w):
    ratios = []
    for idx in (0, 1):
        errs = []
        for phi in (2e-4, 1e-4):
            exact = branch_pointers(n, phi, A_w, TILTED)[idx]
            approx = linearized_branch_pointers(n, phi, A_w, TILTED)[idx]
            errs.append(np.linalg.norm(exact - approx))
        ratios.append(errs[0] / errs[1])
    assert ratios[0] == pytest.approx(4, rel=0.3)
    assert ratios[1] == pytest.approx(4, rel=0.3)


def test_branch_derivatives_match_finite_differences():
    h = 1e-6
    for k in range(2):
        _, _, *dd = branch_pointers(3, 0.02, 20 + 10j, TILTED)
        plus = branch_pointers(3, 0.02 + h, 20 + 10j, TILTED)[k]
        minus = branch_pointers(3, 0.02 - h, 20 + 10j, TILTED)[k]
        assert np.allclose(dd[k], (plus - minus) / (2 * h), atol=1e-7)


def test_branch_qfi_example():
    assert branch_qfi(3, 1e-4, 100) == pytest.approx(35.964, abs=1e-3)
    assert branch_qfi_linear(3, 1e-4, 100) == pytest.approx(35.964, abs=1e-3)


def test_branch_qfi_against_pure_state_qfi():
    # weighted QFI = p0 * pure-state QFI of the normalized branch pointer, with a numerical derivative
    n, phi, A_w, h = 3, 1e-4, 100, 1e-7

    def normalized(p):
        d0 = branch_pointers(n, p, A_w)[0]
        return d0 / np.linalg.norm(d0)

    psi = normalized(phi)
    dpsi = (normalized(phi + h) - normalized(phi - h)) / (2 * h)
    p0 = run_protocol(n, phi, A_w)[0].probability
    qfi = quantum_fisher_pure(QuantumState(psi), dpsi)
    assert p0 * qfi == pytest.approx(branch_qfi(n, phi, A_w), rel=1e-5)


@pytest.mark.parametrize("n", [1, 2, 4, 7])
def test_equal_weighting(n):
    phi = 1e-4
    assert branch_qfi_linear(n, phi, n) == pytest.approx(2 * n**2 * (1 - n**2 * phi**2), rel=1e-12)
    assert branch_qfi(n, phi, n) == pytest.approx(2 * n**2 * (1 - n**2 * phi**2), rel=1e-2)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
@pytest.mark.parametrize("A_w", [20, 50, 100 + 30j])
def test_branch_qfi_closed_form(n, A_w):
    for phi in (1e-4, 1e-3 / n):
        if abs(A_w) * phi > 0.05:
            continue
        assert branch_qfi(n, phi, A_w) == pytest.approx(branch_qfi_linear(n, phi, A_w), rel=0.01)


def test_large_weak_value_approaches_heisenberg():
    for n in (2, 4, 6):
        assert branch_qfi(n, 1e-8, 1e4) == pytest.approx(4 * n**2, rel=1e-4)


def test_product_baseline_is_linear_in_n():
    vals = [product_baseline_fisher(n, 1e-4, 50 * n) for n in (1, 2, 3, 4)]
    for n, v in zip((1, 2, 3, 4), vals):
        assert v == pytest.approx(4 * n, rel=0.1)


def test_text_round_trip():
    circ = protocol_circuit(3, 0.0123, 20 + 10j)
    text = circ.to_text()
    back = Circuit.from_text(4, text)
    assert back.to_text() == text
    assert np.array_equal(back.unitary(), circ.unitary())
    assert text.splitlines()[0] == "RX 0 -1.5707963267948966"
    assert "CRX 3 0 -0.0492" in text


def test_text_parsing_skips_comments_and_rejects_garbage():
    c = Circuit.from_text(2, "# header\nCNOT 1 0\n\nRZ 0 0.5\n")
    assert [g.kind for g in c.gates] == ["CNOT", "RZ"]
    with pytest.raises(ValueError):
        Circuit.from_text(2, "SWAP 0 1")


def test_gate_validation():
    with pytest.raises(ValueError):
        Gate("CNOT", (0,))
    with pytest.raises(ValueError):
        Gate("CNOT", (0,), control=0)
    with pytest.raises(ValueError):
        Circuit(2, (Gate("RX", (2,), angle=0.1),))
    with pytest.raises(ValueError):
        Gate("CUSTOM", (0,), matrix=np.array([[1, 1], [0, 1]])).to_text()


def test_custom_gate_has_no_text_form():
    g = Gate("CUSTOM", (0,), matrix=np.array([[0, 1], [1, 0]]))
    with pytest.raises(ValueError):
        g.to_text()


def test_batched_apply_matches_columns():
    circ = protocol_circuit(2, 0.05, 20)
    rng = np.random.default_rng(0)
    block = rng.normal(size=(8, 3)) + 1j * rng.normal(size=(8, 3))
    out = circ.apply(block)
    for j in range(3):
        assert np.allclose(out[:, j], circ.apply(block[:, j]))
