"""Readout errors on the postselection record, majority voting, and their cost.

Every system qubit is read independently: a true 0 reads as 1 with
probability ``q01`` and a true 1 reads as 0 with probability ``q10``.
A record is accepted as all-zeros when at most ``k`` of its bits read 1
(``k = 0`` without voting).
"""
from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass
from math import comb, sqrt, tan
from typing import NamedTuple, Optional

import numpy as np

from .errors import DegenerateInput, DimensionMismatch, ProbabilityOutOfRange, VoteThresholdWarning
from .fisher import PovmSet
from .qcore import SX, ket0
from .qubitsim import branch_pointers, eta

MC_CHUNK = 1 << 16


@dataclass(frozen=True)
class ReadoutErrorModel:
    q01: float  # P(read 1 | true 0)
    q10: float  # P(read 0 | true 1)

    def __post_init__(self):
        for name in ("q01", "q10"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ProbabilityOutOfRange(f"{name} = {v} not in [0, 1)")

    @classmethod
    def symmetric(cls, q):
        return cls(q, q)


@dataclass(frozen=True)
class MajorityVoteRule:
    n: int
    k: int

    def __post_init__(self):
        if self.n < 1 or self.k < 0:
            raise ValueError("need n >= 1 and k >= 0")
        if 2 * self.k > self.n:
            raise ValueError(f"k = {self.k} exceeds n/2 = {self.n / 2}; not a majority vote")
        if 2 * self.k == self.n:
            warnings.warn(
                f"k = n/2 = {self.k}: a record with {self.k} ones is accepted as all-zeros",
                VoteThresholdWarning,
                stacklevel=3,
            )


def _threshold(n, vote):
    if vote is None:
        return 0
    if vote.n != n:
        raise DimensionMismatch(f"vote rule is for n = {vote.n}, not {n}")
    return vote.k


class Acceptance(NamedTuple):
    true_zeros: float  # P(accept as all-zeros | true all-zeros)
    true_ones: float  # P(accept as all-zeros | true all-ones)


def acceptance_probabilities(n, model, vote=None):
    """Chance that a record is accepted as all-zeros, given each true pattern."""
    k = _threshold(n, vote)
    s0 = sum(comb(n, j) * (1 - model.q01) ** (n - j) * model.q01**j for j in range(k + 1))
    s1 = sum(comb(n, j) * model.q10 ** (n - j) * (1 - model.q10) ** j for j in range(k + 1))
    return Acceptance(s0, s1)


def error_rate(n, p0, p1, model, vote=None):
    """Fraction of accepted all-zeros records that truly came from the all-ones branch."""
    if abs(p0 + p1 - 1.0) > 1e-10:
        raise ProbabilityOutOfRange(f"p0 + p1 = {p0 + p1}")
    s0, s1 = acceptance_probabilities(n, model, vote)
    den = p0 * s0 + p1 * s1
    if den < 1e-300:
        raise DegenerateInput("no record is ever accepted")
    return p1 * s1 / den


def _linear_branch_probs(n, A_w):
    a2 = abs(complex(A_w)) ** 2
    return n * n / (n * n + a2), a2 / (n * n + a2)


def error_rate_scaling(n, A_w, model):
    """Error rate with p0/p1 = n^2/|A_w|^2, and its super-exponential approximation
    |A_w|^2 n^-2 ((1-q01)/q10)^-n."""
    p0, p1 = _linear_branch_probs(n, A_w)
    exact = error_rate(n, p0, p1, model)
    if model.q10 == 0.0:
        return exact, 0.0
    approx = abs(complex(A_w)) ** 2 / n**2 * ((1 - model.q01) / model.q10) ** (-n)
    return exact, approx


def error_rate_plateau(n, phi, model):
    """Large-|A_w| limit of the error rate: (1 + ((1-q01)/q10)^n tan^2(n phi))^-1."""
    if model.q10 == 0.0:
        return 0.0
    return 1.0 / (1.0 + ((1 - model.q01) / model.q10) ** n * tan(n * phi) ** 2)


def loss_rate(n, model, vote=None):
    """Fraction of true all-zeros records that are not accepted."""
    return 1.0 - acceptance_probabilities(n, model, vote).true_zeros


def correction_factor(n, eta0, eta1, model, vote=None):
    """Factor by which misread records shrink the mean pointer shift of the accepted set."""
    if eta0 < 0 or eta1 < 0 or eta0 + eta1 <= 0:
        raise DegenerateInput("eta0, eta1 must be nonnegative and not both zero")
    p0 = eta0 / (eta0 + eta1)
    p1 = eta1 / (eta0 + eta1)
    s0, s1 = acceptance_probabilities(n, model, vote)
    den = p0 * s0 + p1 * s1
    if den < 1e-300:
        raise DegenerateInput("no record is ever accepted")
    return p0 * (s0 - s1) / den


def branch_sx_shifts(n, phi, A_w, pointer_init=ket0):
    """Change of <sigma_x> on the pointer in the all-zeros and all-ones branches.

    Signs follow directly from the collapsed branch states: for Im A_w > 0 the
    all-zeros branch moves toward +sigma_x, matching the linear weak-value response.
    """
    e0, e1 = eta(n, phi, A_w, pointer_init)
    d = pointer_init.amplitudes
    var_x = 1.0 - np.vdot(d, SX @ d).real ** 2
    num = n * np.sin(2 * n * phi) * complex(A_w).imag * var_x
    return num / e0, -num / e1


def corrected_pointer_shift(n, phi, A_w, pointer_init=ket0, model=None, vote=None):
    """Mean sigma_x shift of the pointer over accepted records, misreads included."""
    model = model or ReadoutErrorModel(0.0, 0.0)
    e0, e1 = eta(n, phi, A_w, pointer_init)
    shift0, _ = branch_sx_shifts(n, phi, A_w, pointer_init)
    return float(correction_factor(n, e0, e1, model, vote) * shift0)


def fisher_factor(n, A_w, model, vote=None):
    """Fraction of the pointer's Fisher information surviving readout errors (phi = 0)."""
    s0, s1 = acceptance_probabilities(n, model, vote)
    a2 = abs(complex(A_w)) ** 2
    den = n * n * s0 + a2 * s1
    if den < 1e-300:
        raise DegenerateInput("no record is ever accepted")
    return n * n * (s0 - s1) ** 2 / den


class PovmFisher(NamedTuple):
    information: float  # with readout errors
    error_free: float
    factor: float


def _outcome_weights(n, phi, A_w, pointer_init, povm, s0, s1):
    """h_j and d h_j / d phi for every POVM outcome on accepted records."""
    d0, d1, dd0, dd1 = branch_pointers(n, phi, A_w, pointer_init)
    total = n * n + abs(complex(A_w)) ** 2  # eta0 + eta1 does not depend on phi
    h = np.empty(len(povm.elements))
    dh = np.empty_like(h)
    for j, e in enumerate(povm.elements):
        v0, v1 = np.vdot(d0, e @ d0).real, np.vdot(d1, e @ d1).real
        g0, g1 = 2 * np.vdot(dd0, e @ d0).real, 2 * np.vdot(dd1, e @ d1).real
        h[j] = (s0 * v0 + s1 * v1) / total
        dh[j] = (s0 * g0 + s1 * g1) / total
    return h, dh


def _fisher_sum(h, dh):
    live = h > 1e-300
    return float(np.sum(dh[live] ** 2 / h[live]))


def povm_fisher_with_errors(n, A_w, pointer_init, povm, model, vote=None, phi=0.0):
    """Fisher information about phi from a pointer POVM on accepted records.

    ``phi = 0`` is the standard evaluation point; other values are an
    extension for sensitivity studies and are exact, not first-order.
    """
    if not isinstance(povm, PovmSet):
        povm = PovmSet(tuple(povm))
    if povm.dim != 2:
        raise DimensionMismatch("pointer POVM must act on a qubit")
    s0, s1 = acceptance_probabilities(n, model, vote)
    info = _fisher_sum(*_outcome_weights(n, phi, A_w, pointer_init, povm, s0, s1))
    clean = _fisher_sum(*_outcome_weights(n, phi, A_w, pointer_init, povm, 1.0, 0.0))
    return PovmFisher(info, clean, info / clean if clean > 0 else float("nan"))


@dataclass(frozen=True)
class CorrectionReport:
    error_rate: float
    loss_rate: float
    gamma: float
    fisher_factor: float
    plateau: Optional[float]
    trials: Optional[int] = None
    seed: Optional[int] = None
    error_rate_se: Optional[float] = None
    loss_rate_se: Optional[float] = None
    gamma_se: Optional[float] = None

    JSON_FIELDS = ("error_rate", "loss_rate", "gamma", "fisher_factor", "plateau", "trials", "seed")

    def to_dict(self):
        d = asdict(self)
        return {k: d[k] for k in self.JSON_FIELDS}

    def to_json(self):
        return json.dumps(self.to_dict())


def correction_report(n, phi, A_w, model, vote=None, pointer_init=ket0):
    """Analytic error rate, loss rate, gamma, Fisher factor and plateau at one operating point."""
    e0, e1 = eta(n, phi, A_w, pointer_init)
    p0, p1 = e0 / (e0 + e1), e1 / (e0 + e1)
    plateau = error_rate_plateau(n, phi, model) if vote is None and 0 < n * phi < np.pi / 2 else None
    return CorrectionReport(
        error_rate=error_rate(n, p0, p1, model, vote),
        loss_rate=loss_rate(n, model, vote),
        gamma=correction_factor(n, e0, e1, model, vote),
        fisher_factor=fisher_factor(n, A_w, model, vote),
        plateau=plateau,
    )


def _stream(seed, index):
    """Philox4x64 generator keyed by (seed, stream index)."""
    key = (int(seed) & (2**64 - 1)) | (int(index) << 64)
    return np.random.Generator(np.random.Philox(key=key))


def monte_carlo_readout(n, phi, A_w, pointer_init=ket0, model=None, vote=None, trials=10**6, seed=0):
    """Sample branches and bit flips record by record and tally the empirical rates.

    Trials are split into fixed chunks of 65536, each drawn from its own
    counter-based stream keyed by ``(seed, chunk index)``, so the result
    depends only on ``seed`` and ``trials``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    model = model or ReadoutErrorModel(0.0, 0.0)
    k = _threshold(n, vote)
    e0, e1 = eta(n, phi, A_w, pointer_init)
    p0 = e0 / (e0 + e1)
    n0 = acc0 = acc1 = 0
    for chunk, start in enumerate(range(0, trials, MC_CHUNK)):
        m = min(MC_CHUNK, trials - start)
        rng = _stream(seed, chunk)
        true_zero = rng.random(m) < p0
        u = rng.random((m, n))
        # a true 0 reads 1 with prob q01; a true 1 reads 1 unless flipped (prob q10)
        ones = np.where(true_zero[:, None], u < model.q01, u >= model.q10).sum(axis=1)
        accepted = ones <= k
        n0 += int(true_zero.sum())
        acc0 += int((accepted & true_zero).sum())
        acc1 += int((accepted & ~true_zero).sum())
    n1 = trials - n0
    n_acc = acc0 + acc1
    err = acc1 / n_acc if n_acc else float("nan")
    loss = 1.0 - acc0 / n0 if n0 else float("nan")
    # gamma = p0 (S0 - S1) / P(accept); p0 S1 is estimated as (#accepted ones) * eta0 / eta1
    gamma = (acc0 - acc1 * e0 / e1) / n_acc if n_acc and e1 > 0 else float("nan")
    s0 = acc0 / n0 if n0 else float("nan")
    s1 = acc1 / n1 if n1 else 0.0
    a2 = abs(complex(A_w)) ** 2
    ff = n * n * (s0 - s1) ** 2 / (n * n * s0 + a2 * s1) if n0 else float("nan")
    err_se = sqrt(err * (1 - err) / n_acc) if n_acc else float("nan")
    return CorrectionReport(
        error_rate=err,
        loss_rate=loss,
        gamma=gamma,
        fisher_factor=ff,
        plateau=None,
        trials=trials,
        seed=seed,
        error_rate_se=err_se,
        loss_rate_se=sqrt(loss * (1 - loss) / n0) if n0 else float("nan"),
        gamma_se=err_se / (1 - p0) if p0 < 1 else float("nan"),
    )
