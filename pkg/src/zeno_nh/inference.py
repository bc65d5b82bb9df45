"""Identifying the occupied Zeno subspace from the photocount.

Each subspace n emits detections as a Poisson process with rate |c_n|^2,
so the unconditioned count distribution is a Poisson mixture weighted by
the block populations, and Bayes' rule inverts one observed count into a
posterior over subspaces.  All likelihood work is done in log space; at
gamma t ~ 100 the raw counts reach 10^4 and the pmfs underflow otherwise.

The textbook Poisson likelihood carries the count exponent m; a 2m variant
is available behind the `exponent` flag for comparison with the squared
form that appears in some derivations.  The default is m.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .exceptions import ValidationError
from .rng import TrajectoryRng
from .trajectories import DetectionRecord

#: default confidence factor: ">>" read as five standard deviations, 5^2
DEFAULT_CONFIDENCE = 25.0


@dataclass(frozen=True)
class SubspaceHypothesis:
    """One candidate subspace: detection rate |c_n|^2 and prior weight.

    Prior weights need not be normalized; posteriors are invariant under
    joint rescaling.
    """

    rate: float
    prior: float

    def __post_init__(self):
        if self.rate < 0:
            raise ValidationError("rate", f"must be >= 0, got {self.rate}")
        if self.prior < 0:
            raise ValidationError("prior", f"must be >= 0, got {self.prior}")


@dataclass
class Posterior:
    probabilities: np.ndarray
    count: int
    time: float


def _prior_weights(hypotheses: list[SubspaceHypothesis]) -> np.ndarray:
    priors = np.array([h.prior for h in hypotheses], dtype=np.float64)
    total = priors.sum()
    if total <= 0:
        raise ValidationError("priors", "at least one prior must be positive")
    return priors / total


def uniform_hypotheses(rates) -> list[SubspaceHypothesis]:
    rates = list(rates)
    p = 1.0 / len(rates)
    return [SubspaceHypothesis(rate=float(r), prior=p) for r in rates]


def _log_poisson(m: int, mean: float, exponent: str) -> float:
    if mean == 0.0:
        return 0.0 if m == 0 else -np.inf
    mult = 1.0 if exponent == "m" else 2.0
    return mult * m * np.log(mean) - mean - gammaln(m + 1)


def detection_distribution(
    hypotheses: list[SubspaceHypothesis],
    block_weights,
    m: int,
    t: float,
) -> float:
    """P(m, t) = sum_n Poisson(m; |c_n|^2 t) Tr rho_nn."""
    if t <= 0:
        raise ValidationError("t", "must be > 0")
    if m < 0:
        raise ValidationError("m", "must be >= 0")
    w = np.asarray(block_weights, dtype=np.float64)
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValidationError("block_weights", f"must sum to 1, got {w.sum()!r}")
    logs = []
    for h, weight in zip(hypotheses, w):
        if weight <= 0:
            continue
        logs.append(np.log(weight) + _log_poisson(m, h.rate * t, "m"))
    if not logs:
        return 0.0
    return float(np.exp(logsumexp(logs)))


def bayes_update(
    hypotheses: list[SubspaceHypothesis],
    m: int,
    t: float,
    exponent: str = "m",
) -> Posterior:
    """Posterior p(c_n | m) over hypotheses after observing m counts by t."""
    if exponent not in ("m", "2m"):
        raise ValidationError("exponent", f"must be 'm' or '2m', got {exponent!r}")
    priors = _prior_weights(hypotheses)
    logs = np.full(len(hypotheses), -np.inf)
    for i, h in enumerate(hypotheses):
        if priors[i] == 0.0:
            continue
        logs[i] = np.log(priors[i]) + _log_poisson(m, h.rate * t, exponent)
    if np.all(np.isinf(logs)):
        warnings.warn("all hypothesis likelihoods underflowed; returning the prior")
        return Posterior(priors.copy(), m, t)
    probs = np.exp(logs - logsumexp(logs[np.isfinite(logs)]))
    probs[~np.isfinite(logs)] = 0.0
    probs /= probs.sum()
    return Posterior(probs, m, t)


def distinguishability_time(
    hypotheses: list[SubspaceHypothesis],
    target: int = 0,
    confidence: float = DEFAULT_CONFIDENCE,
) -> np.ndarray:
    """Time to tell the target rate from each competitor.

    t_n = confidence * max(|c_0|^2, |c_n|^2) / (|c_0|^2 - |c_n|^2)^2, which
    folds both deviation conditions through the max.  The confidence factor
    calibrates how strongly separated the count distributions must be; the
    default 25 reads the separation requirement as five standard
    deviations.  Equal rates give inf (structurally indistinguishable).
    """
    r0 = hypotheses[target].rate
    out = np.empty(len(hypotheses))
    for i, h in enumerate(hypotheses):
        if i == target:
            out[i] = 0.0
            continue
        gap = r0 - h.rate
        if gap == 0.0:
            out[i] = np.inf
        else:
            out[i] = confidence * max(r0, h.rate) / gap**2
    return out


def simulate_poisson_record(rate: float, t_final: float, seed: int) -> DetectionRecord:
    """Constant-rate detection record from the package RNG (exponential gaps)."""
    rng = TrajectoryRng(seed)
    times = []
    t = 0.0
    if rate > 0:
        while True:
            t += rng.exponential(rate)
            if t > t_final:
                break
            times.append(t)
    return DetectionRecord(np.asarray(times), t_final)


def posterior_series(
    hypotheses: list[SubspaceHypothesis],
    record: DetectionRecord,
    times,
    exponent: str = "m",
) -> np.ndarray:
    """Posterior per hypothesis evaluated on a grid from one record."""
    times = np.asarray(times, dtype=np.float64)
    counts = record.counts_at(times)
    out = np.empty((times.size, len(hypotheses)))
    priors = _prior_weights(hypotheses)
    for row, (t, m) in enumerate(zip(times, counts)):
        if t <= 0:
            out[row] = priors
            continue
        out[row] = bayes_update(hypotheses, int(m), float(t), exponent).probabilities
    return out
