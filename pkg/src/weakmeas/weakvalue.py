"""Weak values, first-order pointer shifts, and optimal pre/postselection."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import sqrt
from typing import Optional

import numpy as np

from .errors import (
    DegenerateTarget,
    DimensionMismatch,
    LinearResponseWarning,
    NotNormalized,
    OrthogonalPostselection,
    ProbabilityOutOfRange,
    ZeroVariance,
)
from .qcore import (
    HermitianObservable,
    QuantumState,
    evolve_exp,
    expectation,
    postselect,
    tensor,
    variance,
)

OVERLAP_TOL = 1e-12
VARIANCE_TOL = 1e-12
LINEAR_REGIME = 0.1


def _obs(a):
    return a if isinstance(a, HermitianObservable) else HermitianObservable(a)


@dataclass(frozen=True, eq=False)
class WeakMeasurementSetup:
    """System/pointer pair coupled through ``exp(-i g A (x) F)``."""

    coupling: float
    system_obs: HermitianObservable
    pointer_obs: HermitianObservable
    psi_i: QuantumState
    pointer_init: QuantumState
    psi_f: Optional[QuantumState] = None

    def __post_init__(self):
        object.__setattr__(self, "system_obs", _obs(self.system_obs))
        object.__setattr__(self, "pointer_obs", _obs(self.pointer_obs))
        for name in ("psi_i", "pointer_init"):
            if not getattr(self, name).is_normalized():
                raise NotNormalized(f"{name} is not normalized")
        if self.system_obs.dim != self.psi_i.dim:
            raise DimensionMismatch("system observable and psi_i dimensions differ")
        if self.pointer_obs.dim != self.pointer_init.dim:
            raise DimensionMismatch("pointer observable and pointer_init dimensions differ")
        if self.psi_f is not None and self.psi_f.dim != self.psi_i.dim:
            raise DimensionMismatch("psi_f and psi_i dimensions differ")

    def with_postselection(self, psi_f):
        return WeakMeasurementSetup(
            self.coupling, self.system_obs, self.pointer_obs, self.psi_i, self.pointer_init, psi_f
        )

    def with_coupling(self, g):
        return WeakMeasurementSetup(
            g, self.system_obs, self.pointer_obs, self.psi_i, self.pointer_init, self.psi_f
        )


def weak_value(psi_i, psi_f, A):
    """<f|A|i> / <f|i>."""
    A = _obs(A)
    overlap = psi_f.inner(psi_i)
    if abs(overlap) <= OVERLAP_TOL:
        raise OrthogonalPostselection(f"|<f|i>| = {abs(overlap):.3e}; weak value diverges")
    return psi_f.inner(A @ psi_i) / overlap


def pointer_shift_linear_response(setup, M, A_w):
    """First-order shift of <M> on the pointer after postselection with weak value ``A_w``.

    g Im(A_w) (<{F,M}> - 2<F><M>) + i g Re(A_w) <[F,M]>, all on the initial pointer.
    """
    M = _obs(M)
    F = setup.pointer_obs.matrix
    D = setup.pointer_init
    if M.dim != D.dim:
        raise DimensionMismatch("M and pointer dimensions differ")
    g = setup.coupling
    A_w = complex(A_w)
    if abs(g * A_w) > LINEAR_REGIME:
        warnings.warn(f"g|A_w| = {abs(g * A_w):.3g} is outside the linear regime", LinearResponseWarning, stacklevel=2)
    m = M.matrix
    anti = expectation(D, F @ m + m @ F)
    comm = expectation(D, F @ m - m @ F)
    shift = g * A_w.imag * (anti - 2 * expectation(D, F) * expectation(D, m)) + 1j * g * A_w.real * comm
    return float(shift.real)


def exact_pointer_shift(setup, M):
    """<M> on the exactly collapsed pointer minus <M> on the initial pointer."""
    if setup.psi_f is None:
        raise ValueError("setup has no postselected state")
    joint = tensor(setup.psi_i, setup.pointer_init)
    gen = tensor(setup.system_obs, setup.pointer_obs)
    joint = evolve_exp(joint, gen, setup.coupling)
    collapsed, _ = postselect(joint, setup.psi_f, range(len(setup.psi_i.dims)))
    m = _obs(M).matrix
    d_f = collapsed.normalize()
    return float(expectation(d_f, m).real - expectation(setup.pointer_init, m).real)


def max_postselection_probability(psi_i, A, A_w):
    """Closed form of the best achievable postselection probability for a given weak value."""
    A = _obs(A)
    mean = expectation(psi_i, A.matrix).real
    second = expectation(psi_i, A.matrix @ A.matrix).real
    var = max(second - mean * mean, 0.0)
    A_w = complex(A_w)
    return var / (second - 2 * mean * A_w.real + abs(A_w) ** 2)


def optimal_postselection_for_weak_value(psi_i, A, A_w):
    """Postselected state realizing ``A_w`` with the largest success probability.

    Returns ``(psi_f, p_max)``.  ``psi_f`` is the component of ``psi_i``
    orthogonal to ``(A - A_w)|psi_i>``, normalized and phase-fixed.
    """
    A = _obs(A)
    if variance(psi_i, A) <= VARIANCE_TOL:
        raise ZeroVariance("initial state is an eigenstate of A")
    psi = psi_i.amplitudes
    v = A.matrix @ psi - complex(A_w) * psi
    vv = np.vdot(v, v).real
    if vv <= 1e-300:
        raise DegenerateTarget("(A - A_w)|psi_i> vanishes")
    f = psi - v * (np.vdot(v, psi) / vv)
    p = np.vdot(f, f).real
    if p <= 1e-300:
        raise DegenerateTarget("psi_i lies entirely along (A - A_w)|psi_i>")
    psi_f = QuantumState(f / sqrt(p), psi_i.dims).with_phase_convention()
    return psi_f, float(p)


def optimal_weak_value_for_probability(psi_i, A, p_s):
    """Postselected state with overlap probability ``p_s`` maximizing the weak value.

    Returns ``(psi_f, aw_max)`` with ``aw_max = <A> + sqrt((1 - p_s)/p_s Var(A))``.
    """
    A = _obs(A)
    p_s = float(p_s)
    if not 0.0 < p_s <= 1.0:
        raise ProbabilityOutOfRange(f"p_s = {p_s} not in (0, 1]")
    var = variance(psi_i, A)
    if var <= VARIANCE_TOL:
        raise ZeroVariance("initial state is an eigenstate of A")
    psi = psi_i.amplitudes
    mean = np.vdot(psi, A.matrix @ psi).real
    perp = (A.matrix @ psi - mean * psi) / sqrt(var)
    f = sqrt(p_s) * psi + sqrt(1.0 - p_s) * perp
    psi_f = QuantumState(f, psi_i.dims).with_phase_convention()
    aw_max = mean + sqrt((1.0 - p_s) / p_s * var)
    return psi_f, float(aw_max)
