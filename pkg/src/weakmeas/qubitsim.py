"""Gate-level simulation of the entangled qubit weak-measurement protocol.

Qubits ``0..n-1`` are the system, qubit ``n`` is the pointer.  Amplitudes are
big-endian: qubit 0 is the most significant bit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import atan, pi, sqrt
from typing import NamedTuple, Optional

import numpy as np

from .errors import DimensionMismatch, DimensionTooLarge, NotNormalized, SingularWeakValue
from .entangle import EnsembleConfig, collective_observable
from .fisher import per_branch_fisher, weighted_qfi
from .qcore import SX, QuantumState, ket0, ket_plus, sigma_x, sigma_z, tensor_power
from .weakvalue import WeakMeasurementSetup, optimal_postselection_for_weak_value

MAX_SYSTEM_QUBITS = 15
UNITARY_TOL = 1e-12

_P0 = np.diag([1.0, 0.0]).astype(complex)
_P1 = np.diag([0.0, 1.0]).astype(complex)
_X = SX


def rx(theta):
    """exp(-i theta sigma_x / 2)."""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def rz(theta):
    """exp(-i theta sigma_z / 2)."""
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


@dataclass(frozen=True, eq=False)
class Gate:
    kind: str  # CNOT, RX, RZ, CRX or CUSTOM
    targets: tuple
    control: Optional[int] = None
    angle: Optional[float] = None
    matrix: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if self.kind not in ("CNOT", "RX", "RZ", "CRX", "CUSTOM"):
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.kind in ("CNOT", "CRX") and self.control is None:
            raise ValueError(f"{self.kind} needs a control qubit")
        if self.kind in ("RX", "RZ", "CRX") and self.angle is None:
            raise ValueError(f"{self.kind} needs an angle")
        if self.control is not None and self.control in self.targets:
            raise ValueError("control and target coincide")
        if self.kind == "CUSTOM":
            m = np.asarray(self.matrix, dtype=complex)
            if m.shape != (2 ** len(self.targets),) * 2:
                raise DimensionMismatch("custom gate matrix does not match its targets")
            if np.abs(m.conj().T @ m - np.eye(m.shape[0])).max() > UNITARY_TOL:
                raise ValueError("custom gate is not unitary")
            object.__setattr__(self, "matrix", m)

    @property
    def qubits(self):
        return ((self.control,) if self.control is not None else ()) + self.targets

    def local_matrix(self):
        """Matrix on ``self.qubits`` (control first)."""
        if self.kind == "RX":
            return rx(self.angle)
        if self.kind == "RZ":
            return rz(self.angle)
        if self.kind == "CNOT":
            return np.kron(_P0, np.eye(2)) + np.kron(_P1, _X)
        if self.kind == "CRX":
            return np.kron(_P0, np.eye(2)) + np.kron(_P1, rx(self.angle))
        return self.matrix

    def to_text(self):
        if self.kind == "CUSTOM":
            raise ValueError("custom unitaries have no text form")
        parts = [self.kind, str(self.targets[0])]
        if self.control is not None:
            parts.append(str(self.control))
        if self.angle is not None:
            parts.append(repr(float(self.angle)))
        return " ".join(parts)

    @classmethod
    def from_text(cls, line):
        tok = line.split()
        kind = tok[0].upper()
        target = (int(tok[1]),)
        if kind == "CNOT":
            return cls(kind, target, control=int(tok[2]))
        if kind == "CRX":
            return cls(kind, target, control=int(tok[2]), angle=float(tok[3]))
        if kind in ("RX", "RZ"):
            return cls(kind, target, angle=float(tok[2]))
        raise ValueError(f"cannot parse gate line {line!r}")


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    gates: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if any(q < 0 or q >= self.num_qubits for q in g.qubits):
                raise ValueError(f"gate {g.kind} acts outside {self.num_qubits} qubits")

    def __add__(self, other):
        if other.num_qubits != self.num_qubits:
            raise DimensionMismatch("circuits act on different qubit counts")
        return Circuit(self.num_qubits, self.gates + other.gates)

    def count(self, kind):
        return sum(g.kind == kind for g in self.gates)

    def to_text(self):
        return "".join(g.to_text() + "\n" for g in self.gates)

    @classmethod
    def from_text(cls, num_qubits, text):
        lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        return cls(num_qubits, tuple(Gate.from_text(ln) for ln in lines))

    def apply(self, amplitudes):
        """Run the circuit on a state vector, or on each column of a ``(2**q, m)`` array."""
        psi = np.array(amplitudes, dtype=complex)
        q = self.num_qubits
        batch = psi.shape[1:] if psi.ndim > 1 else ()
        if psi.shape[0] != 2**q:
            raise DimensionMismatch(f"expected {2**q} amplitudes, got {psi.shape[0]}")
        t = psi.reshape((2,) * q + batch)
        for g in self.gates:
            t = _apply_gate(t, g, q)
        return t.reshape((2**q,) + batch)

    def run(self, state=None):
        if state is None:
            state = QuantumState.basis(0, (2,) * self.num_qubits)
        return QuantumState(self.apply(state.amplitudes), (2,) * self.num_qubits)

    def unitary(self):
        return self.apply(np.eye(2**self.num_qubits, dtype=complex))


def _apply_gate(t, gate, q):
    qs = list(gate.qubits)
    k = len(qs)
    rest = [i for i in range(t.ndim) if i not in qs]
    moved = np.transpose(t, qs + rest)
    shape = moved.shape
    out = (gate.local_matrix() @ moved.reshape(2**k, -1)).reshape(shape)
    return np.transpose(out, np.argsort(qs + rest))


def _check_n(n):
    if not 1 <= n <= MAX_SYSTEM_QUBITS:
        raise DimensionTooLarge(f"n = {n} outside 1..{MAX_SYSTEM_QUBITS}")


def _cnot_chain(n):
    return tuple(Gate("CNOT", (k,), control=0) for k in range(1, n))


def prepare_ghz_circuit(n, total_qubits=None):
    """Circuit taking |0...0> to (|0>^n + |1>^n)/sqrt(2) on the first ``n`` qubits.

    Qubit 0 is rotated to |+> by RX(-pi/2) then RZ(-pi/2); a CNOT fan-out copies it.
    Returns ``(circuit, state)`` with the state on the ``n`` system qubits.
    """
    _check_n(n)
    total = total_qubits or n
    gates = (Gate("RX", (0,), angle=-pi / 2), Gate("RZ", (0,), angle=-pi / 2)) + _cnot_chain(n)
    circ = Circuit(total, gates)
    state = Circuit(n, gates).run().with_phase_convention()
    return circ, state


def ghz_state(n):
    v = np.zeros(2**n, dtype=complex)
    v[0] = v[-1] = 1 / sqrt(2)
    return QuantumState(v, (2,) * n)


def interaction_circuit(n, phi):
    """Exact gate form of prod_k exp(-i phi sigma_z^(k) sigma_x^(pointer)).

    Each system qubit controls an RX(-4 phi) on the pointer; a final RX(2 n phi)
    restores the |0> branch.  Pointer is qubit ``n``.
    """
    gates = tuple(Gate("CRX", (n,), control=k, angle=-4 * phi) for k in range(n))
    return Circuit(n + 1, gates + (Gate("RX", (n,), angle=2 * n * phi),))


class PostselectionCircuitAngles(NamedTuple):
    alpha: float
    beta: float


def postselection_angles(n, A_w):
    """Rotation angles of the single-qubit stage of the postselection circuit."""
    A_w = complex(A_w)
    if abs(A_w - n) < 1e-12 or abs(A_w + n) < 1e-12:
        raise SingularWeakValue(f"A_w = {A_w} equals +-n; postselected state is a basis state")
    alpha = -2 * atan(abs(n - A_w) / abs(n + A_w))
    beta = -pi / 2 - np.angle((n - A_w.conjugate()) / (n + A_w.conjugate()))
    return PostselectionCircuitAngles(float(alpha), float(beta))


def postselected_state(n, A_w):
    """(n + A_w*)|0>^n + (n - A_w*)|1>^n, normalized."""
    a = n + complex(A_w).conjugate()
    b = n - complex(A_w).conjugate()
    v = np.zeros(2**n, dtype=complex)
    v[0], v[-1] = a, b
    return QuantumState(v / np.linalg.norm(v), (2,) * n)


def rejected_state(n, A_w):
    """(n + A_w)|1>^n - (n - A_w)|0>^n, normalized; orthogonal to ``postselected_state``."""
    v = np.zeros(2**n, dtype=complex)
    v[0], v[-1] = -(n - complex(A_w)), n + complex(A_w)
    return QuantumState(v / np.linalg.norm(v), (2,) * n)


def postselect_circuit(n, A_w, total_qubits=None):
    """Circuit mapping the postselected state to |0>^n and its orthogonal partner to |1>^n.

    CNOT fan-in, RZ(beta - pi) and RX(-alpha) on qubit 0, then CNOT fan-out.
    Reading all zeros afterwards is the postselection.
    """
    _check_n(n)
    alpha, beta = postselection_angles(n, A_w)
    chain = _cnot_chain(n)
    gates = chain + (Gate("RZ", (0,), angle=beta - pi), Gate("RX", (0,), angle=-alpha)) + chain
    return Circuit(total_qubits or n, gates)


def protocol_circuit(n, phi, A_w):
    """GHZ preparation, weak interaction and postselection rotation on n+1 qubits."""
    prep, _ = prepare_ghz_circuit(n, n + 1)
    return prep + interaction_circuit(n, phi) + postselect_circuit(n, A_w, n + 1)


def _sx_mean(pointer_init):
    d = pointer_init.amplitudes
    return float(np.vdot(d, SX @ d).real)


def eta(n, phi, A_w, pointer_init=ket0):
    """Unnormalized branch weights (eta0, eta1) of the all-zeros and all-ones records."""
    A_w = complex(A_w)
    c2, s2 = np.cos(n * phi) ** 2, np.sin(n * phi) ** 2
    cross = n * A_w.imag * np.sin(2 * n * phi) * _sx_mean(pointer_init)
    a2 = abs(A_w) ** 2
    return float(n * n * c2 + a2 * s2 + cross), float(a2 * c2 + n * n * s2 - cross)


def branch_pointers(n, phi, A_w, pointer_init=ket0):
    """Unnormalized pointer states of both branches and their phi-derivatives.

    Branch 0: (n cos n phi - i A_w sin n phi sigma_x)|D>.
    Branch 1: (A_w* cos n phi + i n sin n phi sigma_x)|D>.
    Their squared norms are eta0 and eta1.
    """
    A_w = complex(A_w)
    d = pointer_init.amplitudes
    xd = SX @ d
    c, s = np.cos(n * phi), np.sin(n * phi)
    d0 = n * c * d - 1j * A_w * s * xd
    d1 = A_w.conjugate() * c * d + 1j * n * s * xd
    dd0 = n * (-n * s * d - 1j * A_w * c * xd)
    dd1 = n * (-A_w.conjugate() * s * d + 1j * n * c * xd)
    return d0, d1, dd0, dd1


def linearized_branch_pointers(n, phi, A_w, pointer_init=ket0):
    """First-order forms of both unnormalized branch pointers.

    n (I - i A_w phi sigma_x)|D> and A_w* (I + i n^2 phi / A_w* sigma_x)|D>, scaled
    like ``branch_pointers`` so the two can be subtracted directly.
    """
    A_w = complex(A_w)
    d = pointer_init.amplitudes
    xd = SX @ d
    return n * (d - 1j * A_w * phi * xd), A_w.conjugate() * d + 1j * n * n * phi * xd


class BranchResult(NamedTuple):
    label: str
    pointer_state: QuantumState
    probability: float
    eta0: float
    eta1: float


def run_protocol(n, phi, A_w, pointer_init=ket0):
    """Simulate the full circuit and return the all-zeros and all-ones branch results."""
    _check_n(n)
    if pointer_init.dim != 2:
        raise DimensionMismatch("pointer must be a qubit")
    if not pointer_init.is_normalized():
        raise NotNormalized("pointer_init is not normalized")
    circ = protocol_circuit(n, phi, A_w)
    start = np.zeros(2**n, dtype=complex)
    start[0] = 1.0
    out = circ.apply(np.kron(start, pointer_init.amplitudes)).reshape(2**n, 2)
    e0, e1 = eta(n, phi, A_w, pointer_init)
    results = []
    for label, row in (("0" * n, 0), ("1" * n, 2**n - 1)):
        ptr = out[row]
        p = float(np.vdot(ptr, ptr).real)
        state = QuantumState(ptr / sqrt(p)) if p > 1e-300 else QuantumState(np.zeros(2))
        results.append(BranchResult(label, state, p, e0, e1))
    return tuple(results)


def branch_qfi(n, phi, A_w, pointer_init=ket0):
    """Probability-weighted QFI (in phi) of the all-zeros branch pointer."""
    d0, _, dd0, _ = branch_pointers(n, phi, A_w, pointer_init)
    total = sum(eta(n, phi, A_w, pointer_init))
    return weighted_qfi(d0 / sqrt(total), dd0 / sqrt(total))


def branch_qfi_linear(n, phi, A_w):
    """4 n^2 |A_w|^2 (1 - |A_w|^2 phi^2) / (n^2 + |A_w|^2)."""
    a2 = abs(complex(A_w)) ** 2
    return 4 * n * n * a2 * (1 - a2 * phi * phi) / (n * n + a2)


def product_baseline_fisher(n, phi, A_w, pointer_init=ket0):
    """Dominant-branch information for the uncorrelated input |+>^n at weak value ``A_w``.

    Same collective coupling and pointer as the entangled protocol, but the
    system starts in a product state; this is the standard-quantum-limit reference.
    """
    cfg = EnsembleConfig(n, sigma_z)
    A = collective_observable(cfg)
    psi = QuantumState(tensor_power(ket_plus, n).amplitudes, cfg.dims)
    psi_f, _ = optimal_postselection_for_weak_value(psi, A, A_w)
    setup = WeakMeasurementSetup(phi, A, sigma_x, psi, pointer_init, psi_f)
    return per_branch_fisher(setup).per_branch[0].information
