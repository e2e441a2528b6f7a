"""Classical and quantum Fisher information for postselected weak measurements."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import (
    BasisNotOrthonormal,
    BasisNotPovm,
    DimensionMismatch,
    InconsistentDerivative,
    NotNormalized,
)
from .qcore import MAX_EIG_DIM, HermitianObservable, QuantumState, expectation, variance

ZERO_PROB = 1e-300
FD_STEP = 1e-6


@dataclass(frozen=True, eq=False)
class OutcomeDistribution:
    probabilities: np.ndarray
    derivative: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        dp = np.asarray(self.derivative, dtype=float)
        if p.shape != dp.shape:
            raise DimensionMismatch("probabilities and derivative differ in length")
        if (p < -1e-12).any() or abs(p.sum() - 1.0) > 1e-10:
            raise ValueError(f"not a probability distribution (sum {p.sum()!r})")
        if abs(dp.sum()) > 1e-8:
            raise InconsistentDerivative(f"derivatives sum to {dp.sum():.3e}, expected 0")
        object.__setattr__(self, "probabilities", np.clip(p, 0.0, None))
        object.__setattr__(self, "derivative", dp)


def classical_fisher(dist):
    """Sum of (dp)^2 / p over outcomes with p >= 1e-300."""
    p, dp = dist.probabilities, dist.derivative
    live = p >= ZERO_PROB
    if (np.abs(dp[~live]) >= ZERO_PROB).any():
        raise InconsistentDerivative("nonzero derivative on a zero-probability outcome")
    return float(np.sum(dp[live] ** 2 / p[live]))


def _amps(x):
    return x.amplitudes if isinstance(x, QuantumState) else np.asarray(x, dtype=complex)


def quantum_fisher_pure(state, derivative):
    """4(<dPhi|dPhi> - |<Phi|dPhi>|^2) for a normalized pure state."""
    phi, dphi = _amps(state), _amps(derivative)
    if abs(np.vdot(phi, phi).real - 1.0) > 1e-10:
        raise NotNormalized(f"state norm^2 = {np.vdot(phi, phi).real}")
    q = 4.0 * (np.vdot(dphi, dphi).real - abs(np.vdot(phi, dphi)) ** 2)
    return max(float(q), 0.0)


def weighted_qfi(d, dd):
    """Probability-weighted QFI ||D||^2 * QFI(D/||D||) of an unnormalized branch state.

    Equals 4(<dD|dD> - |<D|dD>|^2 / <D|D>); zero when the branch vanishes.
    """
    d, dd = _amps(d), _amps(dd)
    p = np.vdot(d, d).real
    if p < ZERO_PROB:
        return 0.0
    return max(float(4.0 * (np.vdot(dd, dd).real - abs(np.vdot(d, dd)) ** 2 / p)), 0.0)


def state_derivative(fn, g, step=FD_STEP):
    """d/dg of ``fn(g)`` (a state or amplitude array) by Richardson-extrapolated central differences."""
    def central(h):
        return (_amps(fn(g + h)) - _amps(fn(g - h))) / (2 * h)

    coarse = central(step)
    fine = central(step / 2)
    return (4 * fine - coarse) / 3


def evolution_qfi(H, phi):
    """QFI of exp(-i g H)|phi> at g = 0 from the analytic derivative -iH|phi>."""
    H = H if isinstance(H, HermitianObservable) else HermitianObservable(H)
    return quantum_fisher_pure(phi, -1j * (H.matrix @ phi.amplitudes))


# -- POVMs ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PovmSet:
    elements: tuple

    def __post_init__(self):
        els = tuple(np.array(e, dtype=complex) for e in self.elements)
        if not els:
            raise BasisNotPovm("empty POVM")
        d = els[0].shape[0]
        total = np.zeros((d, d), dtype=complex)
        for e in els:
            if e.shape != (d, d):
                raise BasisNotPovm("POVM elements differ in shape")
            if np.abs(e - e.conj().T).max() > 1e-12:
                raise BasisNotPovm("POVM element is not Hermitian")
            if np.linalg.eigvalsh(e).min() < -1e-12:
                raise BasisNotPovm("POVM element is not positive semidefinite")
            total += e
        if np.abs(total - np.eye(d)).max() > 1e-10:
            raise BasisNotPovm("POVM elements do not sum to the identity")
        object.__setattr__(self, "elements", els)

    @property
    def dim(self):
        return self.elements[0].shape[0]

    def probabilities(self, state):
        psi = _amps(state)
        return np.array([np.vdot(psi, e @ psi).real for e in self.elements])

    def distribution(self, state, derivative):
        """Outcome probabilities and their derivatives for a normalized state and its derivative."""
        psi, dpsi = _amps(state), _amps(derivative)
        p = self.probabilities(psi)
        dp = np.array([2 * np.vdot(dpsi, e @ psi).real for e in self.elements])
        return OutcomeDistribution(p, dp)

    @classmethod
    def projective(cls, basis):
        return cls(tuple(np.outer(_amps(b), _amps(b).conj()) for b in basis))


def random_povm(dim, outcomes, rng):
    """Random POVM: E_i = S^{-1/2} M_i S^{-1/2} with M_i random positive and S = sum M_i."""
    ms = []
    for _ in range(outcomes):
        z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        ms.append(z @ z.conj().T)
    s = sum(ms)
    w, v = np.linalg.eigh(s)
    s_inv_half = (v / np.sqrt(w)) @ v.conj().T
    els = []
    for m in ms:
        e = s_inv_half @ m @ s_inv_half
        els.append((e + e.conj().T) / 2)
    return PovmSet(tuple(els))


# -- postselected weak measurement -------------------------------------------------


def no_postselection_qfi(setup):
    """4(<A^2><F^2> - (<A><F>)^2): QFI of the joint state without postselection."""
    a, f = setup.system_obs.matrix, setup.pointer_obs.matrix
    psi, d = setup.psi_i, setup.pointer_init
    a2 = expectation(psi, a @ a).real
    f2 = expectation(d, f @ f).real
    return 4.0 * (a2 * f2 - (expectation(psi, a).real * expectation(d, f).real) ** 2)


def complete_basis(first, tol=1e-10):
    """Orthonormal basis whose first vector is ``first``, completed by Gram-Schmidt on the standard basis."""
    v0 = _amps(first)
    d = v0.size
    basis = [v0 / np.linalg.norm(v0)]
    for i in range(d):
        if len(basis) == d:
            break
        w = np.zeros(d, dtype=complex)
        w[i] = 1.0
        for _ in range(2):
            for b in basis:
                w -= np.vdot(b, w) * b
        nw = np.linalg.norm(w)
        if nw > tol:
            basis.append(w / nw)
    return np.column_stack(basis)


def _basis_matrix(branch_basis, dim):
    if isinstance(branch_basis, np.ndarray) and branch_basis.ndim == 2:
        B = branch_basis.astype(complex)
    else:
        B = np.column_stack([_amps(b) for b in branch_basis])
    if B.shape[0] != dim:
        raise DimensionMismatch("branch basis lives in the wrong space")
    if np.abs(B.conj().T @ B - np.eye(B.shape[1])).max() > 1e-10:
        raise BasisNotOrthonormal("branch basis is not orthonormal")
    return B


class BranchFisher(NamedTuple):
    label: int
    probability: float  # |<f_k|psi_i>|^2
    weak_value: Optional[complex]  # None when <f_k|psi_i> vanishes
    information: float  # probability-weighted first-order information
    exact_information: Optional[float]  # P_k * QFI of the exactly collapsed pointer


@dataclass(frozen=True)
class FisherReport:
    classical: float  # Fisher information of the postselection outcome distribution
    quantum: float  # QFI without postselection
    per_branch: list = field(default_factory=list)
    sum_over_branches: float = 0.0

    @property
    def exact_sum_over_branches(self):
        vals = [b.exact_information for b in self.per_branch]
        return None if any(v is None for v in vals) else float(sum(vals))

    def dominant(self):
        return max(self.per_branch, key=lambda b: b.information)


def _exact_branch_states(setup, B):
    """Exact collapsed pointer states and their g-derivatives for every branch, or None if too large."""
    A, F = setup.system_obs, setup.pointer_obs
    if A.dim > MAX_EIG_DIM or F.dim > MAX_EIG_DIM:
        return None
    ea, ef = A.eigensystem, F.eigensystem
    g = setup.coupling
    ca = ea.vectors.conj().T @ setup.psi_i.amplitudes
    cf = ef.vectors.conj().T @ setup.pointer_init.amplitudes
    af = np.outer(ea.values, ef.values)
    coef = np.exp(-1j * g * af) * np.outer(ca, cf)
    # rows: system (in A eigenbasis) -> rotate to computational, project on branches
    sys_to_branch = B.conj().T @ ea.vectors
    d = sys_to_branch @ coef @ ef.vectors.T
    dd = sys_to_branch @ (-1j * af * coef) @ ef.vectors.T
    return d, dd


def per_branch_fisher(setup, branch_basis=None):
    """First-order (and, where feasible, exact) Fisher information carried by each postselection branch.

    The default basis is ``setup.psi_f`` completed to an orthonormal basis.
    """
    psi = setup.psi_i.amplitudes
    if branch_basis is None:
        if setup.psi_f is None:
            raise ValueError("no branch basis given and setup has no postselected state")
        B = complete_basis(setup.psi_f)
    else:
        B = _basis_matrix(branch_basis, setup.psi_i.dim)
    A, F, D = setup.system_obs.matrix, setup.pointer_obs.matrix, setup.pointer_init
    g = setup.coupling
    f_mean = expectation(D, F).real
    f2 = expectation(D, F @ F).real
    f_var = variance(D, F)

    overlaps = B.conj().T @ psi
    amps = B.conj().T @ (A @ psi)  # P_s |A_w|^2 = |<f|A|i>|^2 stays finite at zero overlap
    exact = _exact_branch_states(setup, B)

    branches = []
    for k in range(B.shape[1]):
        o, c = overlaps[k], amps[k]
        weight = abs(c) ** 2
        if abs(o) > 1e-12:
            aw = c / o
            info = 4 * weight * (f_var - f2 * (2 * g * aw.imag * f_mean + g**2 * abs(aw) ** 2 * f2))
        else:
            aw = None
            info = 4 * weight * f_var
        ex = weighted_qfi(exact[0][k], exact[1][k]) if exact is not None else None
        branches.append(BranchFisher(k, float(abs(o) ** 2), aw, float(info), ex))

    classical = classical_fisher(_branch_distribution(setup, overlaps, amps, exact))
    total = float(sum(b.information for b in branches))
    return FisherReport(classical, no_postselection_qfi(setup), branches, total)


def _branch_distribution(setup, overlaps, amps, exact):
    if exact is not None:
        d, dd = exact
        p = np.sum(np.abs(d) ** 2, axis=1)
        dp = 2 * np.sum((d.conj() * dd).real, axis=1)
        return OutcomeDistribution(p / p.sum(), dp)
    # first-order joint state (1 - i g A(x)F)|psi>|D>, renormalized
    F, D = setup.pointer_obs.matrix, setup.pointer_init
    g = setup.coupling
    f_mean = expectation(D, F).real
    f2 = expectation(D, F @ F).real
    cross = (amps * overlaps.conj()).imag
    raw = np.abs(overlaps) ** 2 + 2 * g * cross * f_mean + g**2 * np.abs(amps) ** 2 * f2
    draw = 2 * cross * f_mean + 2 * g * np.abs(amps) ** 2 * f2
    norm = raw.sum()
    dnorm = draw.sum()
    return OutcomeDistribution(raw / norm, draw / norm - raw * dnorm / norm**2)


class SumRule(NamedTuple):
    lhs: float
    rhs: float
    deficit: float


def sum_rule_check(setup, branch_basis=None):
    """Compare the summed branch information with 4<A^2>Var(F); the deficit is O(g)."""
    report = per_branch_fisher(setup, branch_basis)
    a = setup.system_obs.matrix
    rhs = 4 * expectation(setup.psi_i, a @ a).real * variance(setup.pointer_init, setup.pointer_obs)
    return SumRule(report.sum_over_branches, rhs, rhs - report.sum_over_branches)


def optimal_branch_information(setup, A_w):
    """Best single-branch information at weak value ``A_w`` with an unbiased pointer:
    4 Var(A) <F^2> (1 - |g A_w|^2 <F^2>)."""
    F = setup.pointer_obs.matrix
    f2 = expectation(setup.pointer_init, F @ F).real
    var_a = variance(setup.psi_i, setup.system_obs)
    return 4 * var_a * f2 * (1 - abs(setup.coupling * complex(A_w)) ** 2 * f2)
