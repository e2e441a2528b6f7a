"""n-copy collective observables and GHZ-type pre/postselections."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import sqrt
from typing import NamedTuple

import numpy as np

from .errors import DegenerateExtremesWarning, DimensionTooLarge, ProbabilityOutOfRange
from .qcore import (
    DEGENERACY_TOL,
    MAX_STATE_DIM,
    HermitianObservable,
    QuantumState,
    apply_local,
    embed,
    tensor_power,
)

# dense collective observables are capped at this many matrix elements (n <= 8 qubits)
MAX_COLLECTIVE_ELEMENTS = 2**16


@dataclass(frozen=True, eq=False)
class EnsembleConfig:
    copies: int
    single_obs: HermitianObservable
    phase: float = 0.0

    def __post_init__(self):
        if not isinstance(self.single_obs, HermitianObservable):
            object.__setattr__(self, "single_obs", HermitianObservable(self.single_obs))
        if self.copies < 1:
            raise ValueError("copies must be >= 1")
        if self.joint_dim > MAX_STATE_DIM:
            raise DimensionTooLarge(f"joint dimension {self.joint_dim} exceeds {MAX_STATE_DIM}")

    @property
    def joint_dim(self):
        return self.single_obs.dim**self.copies

    @property
    def dims(self):
        return (self.single_obs.dim,) * self.copies


class ExtremeStates(NamedTuple):
    a_max: float
    a_min: float
    v_max: QuantumState
    v_min: QuantumState


def extreme_eigenstates(A):
    """Largest/smallest eigenpairs of ``A``; ties resolved toward the lowest basis index."""
    es = A.eigensystem
    vals, vecs = es.values, es.vectors

    def pick(target):
        cluster = np.flatnonzero(np.abs(vals - target) < DEGENERACY_TOL)
        if cluster.size == 1:
            return QuantumState(vecs[:, cluster[0]])
        warnings.warn(
            f"eigenvalue {target:.6g} is {cluster.size}-fold degenerate; using lowest-index eigenvector",
            DegenerateExtremesWarning,
            stacklevel=3,
        )
        sub = vecs[:, cluster]
        for i in range(A.dim):
            proj = sub @ sub[i].conj()
            if np.linalg.norm(proj) > 1e-8:
                return QuantumState(proj / np.linalg.norm(proj)).with_phase_convention()
        raise AssertionError("unreachable: eigenspace spans no basis direction")

    return ExtremeStates(float(vals[-1]), float(vals[0]), pick(vals[-1]), pick(vals[0]))


def collective_observable(cfg):
    """Sum over copies of ``I (x) ... (x) A (x) ... (x) I``."""
    d = cfg.joint_dim
    if d * d > MAX_COLLECTIVE_ELEMENTS:
        raise DimensionTooLarge(f"dense collective observable of dimension {d} exceeds cap")
    total = np.zeros((d, d), dtype=complex)
    for k in range(cfg.copies):
        total += embed(cfg.single_obs.matrix, [k], cfg.dims)
    return HermitianObservable(total, cfg.dims)


def collective_apply(cfg, state):
    """A^(n)|psi> without forming the dense collective matrix."""
    out = np.zeros(state.dim, dtype=complex)
    for k in range(cfg.copies):
        out += apply_local(state, cfg.single_obs.matrix, [k]).amplitudes
    return QuantumState(out, state.dims)


def _two_component(cfg, c_max, c_min):
    ext = extreme_eigenstates(cfg.single_obs)
    hi = tensor_power(ext.v_max, cfg.copies).amplitudes
    lo = tensor_power(ext.v_min, cfg.copies).amplitudes
    v = c_max * hi + c_min * lo
    return QuantumState(v / np.linalg.norm(v), cfg.dims)


def ghz_initial_state(cfg):
    """(|a_max>^n + e^{i theta}|a_min>^n)/sqrt(2), the variance-maximizing input."""
    return _two_component(cfg, 1.0, np.exp(1j * cfg.phase))


def ghz_variance(cfg):
    """n^2 (a_max - a_min)^2 / 4."""
    ext = extreme_eigenstates(cfg.single_obs)
    return cfg.copies**2 * (ext.a_max - ext.a_min) ** 2 / 4.0


def partial_ghz_variance(cfg, alpha, beta):
    """Variance of A^(n) on alpha|a_max>^n + beta|a_min>^n."""
    ext = extreme_eigenstates(cfg.single_obs)
    wa, wb = abs(alpha) ** 2, abs(beta) ** 2
    norm = wa + wb
    wa, wb = wa / norm, wb / norm
    n = cfg.copies
    return n**2 * (wa * ext.a_max**2 + wb * ext.a_min**2 - (wa * ext.a_max + wb * ext.a_min) ** 2)


def optimal_entangled_postselection(cfg, A_w):
    """Postselection on the GHZ input maximizing the success probability at weak value ``A_w``."""
    ext = extreme_eigenstates(cfg.single_obs)
    n = cfg.copies
    aw_c = np.conj(complex(A_w))
    c_max = -(n * ext.a_min - aw_c)
    c_min = np.exp(1j * cfg.phase) * (n * ext.a_max - aw_c)
    return _two_component(cfg, c_max, c_min).with_phase_convention()


def fixed_probability_entangled_postselection(cfg, p_s):
    """Postselection on the GHZ input with overlap probability ``p_s`` and maximal weak value."""
    p_s = float(p_s)
    if not 0.0 < p_s <= 1.0:
        raise ProbabilityOutOfRange(f"p_s = {p_s} not in (0, 1]")
    a = sqrt(p_s / 2)
    b = sqrt((1 - p_s) / 2)
    return _two_component(cfg, a + b, np.exp(1j * cfg.phase) * (a - b))


class ProductBaseline(NamedTuple):
    exact: float
    linear: float


def product_baseline_probability(n, p1):
    """Chance that at least one of n uncorrelated copies is postselected."""
    return ProductBaseline(1.0 - (1.0 - p1) ** n, n * p1)
