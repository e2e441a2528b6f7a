"""Dense finite-dimensional quantum mechanics: pure states, Hermitian observables,
tensor products, a complex Jacobi eigensolver, and postselection.

Amplitudes are stored big-endian: the first tensor factor is the most
significant index, so ``|0> (x) |1>`` is ``(0, 1, 0, 0)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import prod, sqrt
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    DimensionTooLarge,
    NonHermitian,
    NotNormalized,
    ZeroOverlap,
)

MAX_EIG_DIM = 64
MAX_STATE_DIM = 2**16
HERMITIAN_TOL = 1e-12
NORM_TOL = 1e-12
DEGENERACY_TOL = 1e-10


def _frozen(a):
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class QuantumState:
    amplitudes: np.ndarray
    dims: tuple = ()

    def __post_init__(self):
        amps = _frozen(np.ravel(self.amplitudes))
        dims = tuple(int(d) for d in self.dims) if self.dims else (amps.size,)
        if prod(dims) != amps.size:
            raise DimensionMismatch(f"dims {dims} do not match {amps.size} amplitudes")
        if amps.size > MAX_STATE_DIM:
            raise DimensionTooLarge(f"{amps.size} amplitudes exceeds {MAX_STATE_DIM}")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "dims", dims)

    @classmethod
    def basis(cls, index, dims):
        dims = (dims,) if np.isscalar(dims) else tuple(dims)
        amps = np.zeros(prod(dims), dtype=complex)
        amps[index] = 1.0
        return cls(amps, dims)

    @property
    def dim(self):
        return self.amplitudes.size

    @property
    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def is_normalized(self, tol=NORM_TOL):
        return abs(self.norm**2 - 1.0) <= tol

    def normalize(self):
        n = self.norm
        if n < 1e-300:
            raise ZeroOverlap("cannot normalize the zero vector")
        return QuantumState(self.amplitudes / n, self.dims)

    def inner(self, other):
        """<self|other>."""
        _check_same_dim(self.dim, other.dim)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def fidelity(self, other):
        """|<a|b>| for normalized states; insensitive to global phase."""
        return abs(self.inner(other))

    def with_phase_convention(self, tol=1e-12):
        """Rotate the global phase so the first non-negligible amplitude is real positive."""
        amps = self.amplitudes
        big = np.flatnonzero(np.abs(amps) > tol * max(1.0, np.abs(amps).max(initial=0.0)))
        if big.size == 0:
            return self
        a0 = amps[big[0]]
        return QuantumState(amps * (abs(a0) / a0), self.dims)

    def __len__(self):
        return self.dim

    def __repr__(self):
        return f"QuantumState(dims={self.dims}, amplitudes={np.round(self.amplitudes, 6)})"


class SpectrumSummary(NamedTuple):
    a_max: float
    a_min: float
    v_max: QuantumState
    v_min: QuantumState
    delta: float


class Eigensystem(NamedTuple):
    values: np.ndarray  # ascending
    vectors: np.ndarray  # columns
    summary: SpectrumSummary
    sweeps: int


@dataclass(frozen=True, eq=False)
class HermitianObservable:
    matrix: np.ndarray
    dims: tuple = ()

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatch(f"observable must be square, got shape {m.shape}")
        scale = max(1.0, float(np.abs(m).max(initial=0.0)))
        if np.abs(m - m.conj().T).max(initial=0.0) > HERMITIAN_TOL * scale:
            raise NonHermitian("matrix differs from its conjugate transpose")
        dims = tuple(int(d) for d in self.dims) if self.dims else (m.shape[0],)
        if prod(dims) != m.shape[0]:
            raise DimensionMismatch(f"dims {dims} do not match matrix size {m.shape[0]}")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self):
        return self.matrix.shape[0]

    @cached_property
    def eigensystem(self):
        return eig_hermitian(self)

    @property
    def eigenpairs(self):
        es = self.eigensystem
        return [(float(es.values[i]), QuantumState(es.vectors[:, i])) for i in range(self.dim)]

    @property
    def spectrum(self):
        return self.eigensystem.summary

    def __matmul__(self, other):
        if isinstance(other, QuantumState):
            _check_same_dim(self.dim, other.dim)
            return QuantumState(self.matrix @ other.amplitudes, other.dims)
        return NotImplemented

    def __repr__(self):
        return f"HermitianObservable(dims={self.dims})"


SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)

sigma_x = HermitianObservable(SX)
sigma_y = HermitianObservable(SY)
sigma_z = HermitianObservable(SZ)

ket0 = QuantumState([1, 0])
ket1 = QuantumState([0, 1])
ket_plus = QuantumState(np.array([1, 1]) / sqrt(2))
ket_minus = QuantumState(np.array([1, -1]) / sqrt(2))


def _check_same_dim(a, b):
    if a != b:
        raise DimensionMismatch(f"dimension {a} != {b}")


def _as_matrix(obs):
    return obs.matrix if isinstance(obs, HermitianObservable) else np.asarray(obs, dtype=complex)


# -- eigensolver ---------------------------------------------------------------


def jacobi_eigh(a, tol=1e-14, max_sweeps=100):
    """Cyclic complex Jacobi diagonalization of a Hermitian matrix.

    Returns ``(values, vectors, sweeps)`` with values ascending and
    eigenvectors in the columns of ``vectors``.
    """
    a = np.array(a, dtype=complex)
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    scale = max(1.0, float(np.linalg.norm(a)))
    sweeps = 0
    for sweeps in range(max_sweeps + 1):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * scale or sweeps == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag <= 1e-300:
                    continue
                ph = apq / mag
                tau = (a[q, q].real - a[p, p].real) / (2.0 * mag)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + sqrt(1.0 + tau * tau))
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c
                phc = ph.conjugate()
                # A <- J^H A J with J = diag(1, e^{-i phi}) . [[c, s], [-s, c]] on (p, q)
                ap = a[:, p].copy()
                aq = a[:, q]
                a[:, p] = c * ap - s * phc * aq
                a[:, q] = s * ap + c * phc * aq
                rp = a[p, :].copy()
                rq = a[q, :]
                a[p, :] = c * rp - s * ph * rq
                a[q, :] = s * rp + c * ph * rq
                a[p, q] = a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                vp = v[:, p].copy()
                vq = v[:, q]
                v[:, p] = c * vp - s * phc * vq
                v[:, q] = s * vp + c * phc * vq
    values = np.diag(a).real.copy()
    order = np.argsort(values, kind="stable")
    values, v = values[order], v[:, order]
    v = _reorthonormalize_clusters(values, v)
    return values, v, sweeps


def _reorthonormalize_clusters(values, v):
    n = values.size
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and values[stop] - values[stop - 1] < DEGENERACY_TOL:
            stop += 1
        if stop - start > 1:
            for i in range(start, stop):
                for _ in range(2):
                    for j in range(start, i):
                        v[:, i] -= np.vdot(v[:, j], v[:, i]) * v[:, j]
                v[:, i] /= np.linalg.norm(v[:, i])
        start = stop
    for i in range(n):
        v[:, i] = QuantumState(v[:, i]).with_phase_convention().amplitudes
    return v


def eig_hermitian(m):
    """Full eigendecomposition plus extreme-eigenvalue summary of ``m``."""
    mat = _as_matrix(m)
    if not isinstance(m, HermitianObservable):
        m = HermitianObservable(mat)
    if m.dim > MAX_EIG_DIM:
        raise DimensionTooLarge(f"eigendecomposition limited to dimension {MAX_EIG_DIM}, got {m.dim}")
    values, vectors, sweeps = jacobi_eigh(m.matrix)
    summary = SpectrumSummary(
        a_max=float(values[-1]),
        a_min=float(values[0]),
        v_max=QuantumState(vectors[:, -1]),
        v_min=QuantumState(vectors[:, 0]),
        delta=float(values[-1] - values[0]),
    )
    return Eigensystem(values, vectors, summary, sweeps)


# -- expectation values -----------------------------------------------------------


def expectation(state, obs):
    """<psi|O|psi> as a complex number."""
    mat = _as_matrix(obs)
    _check_same_dim(state.dim, mat.shape[0])
    if not state.is_normalized(1e-10):
        raise NotNormalized(f"state norm {state.norm}")
    psi = state.amplitudes
    return complex(np.vdot(psi, mat @ psi))


def variance(state, obs):
    mat = _as_matrix(obs)
    _check_same_dim(state.dim, mat.shape[0])
    psi = state.amplitudes
    o_psi = mat @ psi
    mean = np.vdot(psi, o_psi).real
    second = np.vdot(o_psi, o_psi).real
    return max(second - mean * mean, 0.0)


# -- tensor structure -------------------------------------------------------------


def tensor(a, b, *more):
    """Kronecker product of states or observables, left factor most significant."""
    out = _tensor2(a, b)
    for c in more:
        out = _tensor2(out, c)
    return out


def _tensor2(a, b):
    if isinstance(a, QuantumState) and isinstance(b, QuantumState):
        return QuantumState(np.kron(a.amplitudes, b.amplitudes), a.dims + b.dims)
    if isinstance(a, HermitianObservable) and isinstance(b, HermitianObservable):
        return HermitianObservable(np.kron(a.matrix, b.matrix), a.dims + b.dims)
    raise TypeError("tensor operands must both be states or both be observables")


def tensor_power(x, n):
    out = x
    for _ in range(n - 1):
        out = _tensor2(out, x)
    return out


def embed(op, factors, dims):
    """Lift ``op`` acting on ``factors`` (in that order) to the full space ``dims``."""
    op = _as_matrix(op)
    dims = tuple(dims)
    factors = list(factors)
    rest = [i for i in range(len(dims)) if i not in factors]
    d_f = prod(dims[i] for i in factors)
    d_r = prod(dims[i] for i in rest)
    if op.shape != (d_f, d_f):
        raise DimensionMismatch(f"operator shape {op.shape} does not match factors {factors}")
    full = np.kron(op, np.eye(d_r, dtype=complex))
    perm = factors + rest
    k = len(dims)
    full = full.reshape([dims[i] for i in perm] * 2)
    inv = np.argsort(perm)
    full = full.transpose(list(inv) + [k + i for i in inv])
    return full.reshape(prod(dims), prod(dims))


def apply_local(state, op, factors):
    """Apply a matrix acting on ``factors`` of ``state`` without building the full operator."""
    op = _as_matrix(op)
    factors = list(factors)
    dims = state.dims
    k = len(dims)
    local = [dims[i] for i in factors]
    psi = state.amplitudes.reshape(dims)
    rest = [i for i in range(k) if i not in factors]
    psi = psi.transpose(factors + rest).reshape(prod(local), -1)
    psi = (op @ psi).reshape(local + [dims[i] for i in rest])
    psi = psi.transpose(np.argsort(factors + rest))
    return QuantumState(psi.reshape(-1), dims)


class PostselectionResult(NamedTuple):
    collapsed: QuantumState
    probability: float


def postselect(joint, target, factors, allow_zero=False):
    """Project ``target`` onto ``factors`` of ``joint``.

    Returns the unnormalized collapsed state on the remaining factors together
    with the postselection probability.  Raises ``ZeroOverlap`` when the
    probability is below 1e-300 unless ``allow_zero``.
    """
    factors = list(factors)
    dims = joint.dims
    want = tuple(dims[i] for i in factors)
    if want != target.dims and prod(want) != target.dim:
        raise DimensionMismatch(f"target dims {target.dims} do not match factors {want}")
    rest = [i for i in range(len(dims)) if i not in factors]
    psi = joint.amplitudes.reshape(dims).transpose(factors + rest).reshape(target.dim, -1)
    collapsed = target.amplitudes.conj() @ psi
    rest_dims = tuple(dims[i] for i in rest) or (1,)
    prob = float(np.vdot(collapsed, collapsed).real)
    if prob < 1e-300 and not allow_zero:
        raise ZeroOverlap("target is orthogonal to the joint state on the selected factors")
    return PostselectionResult(QuantumState(collapsed, rest_dims), prob)


# -- time evolution ---------------------------------------------------------------


def unitary_exp(generator, angle):
    """exp(-i * angle * G) from the eigendecomposition of G."""
    if not isinstance(generator, HermitianObservable):
        generator = HermitianObservable(generator)
    es = generator.eigensystem
    v = es.vectors
    return (v * np.exp(-1j * angle * es.values)) @ v.conj().T


def evolve_exp(state, generator, angle):
    """Apply exp(-i * angle * G) to ``state``."""
    if not isinstance(generator, HermitianObservable):
        generator = HermitianObservable(generator)
    _check_same_dim(state.dim, generator.dim)
    return QuantumState(unitary_exp(generator, angle) @ state.amplitudes, state.dims)


def random_state(dim, rng):
    z = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return QuantumState(z / np.linalg.norm(z))


def random_hermitian(dim, rng, scale=1.0):
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return HermitianObservable(scale * (z + z.conj().T) / 2)


def phase_free_distance(u, v):
    """min over theta of ||u - e^{i theta} v||_F."""
    u = np.asarray(u)
    v = np.asarray(v)
    tr = np.vdot(v, u)
    ph = tr / abs(tr) if abs(tr) > 0 else 1.0
    return float(np.linalg.norm(u - ph * v))
