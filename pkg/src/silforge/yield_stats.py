"""Poisson emitter-creation statistics and placement-spread analysis.

Occupancy-based expectation-value estimation uses only the empty-site
count: lambda_hat = -ln(n_empty / n_sites). That matches the arithmetic of
counting written sites (9 occupied of 30 gives -ln(21/30) ~ 0.357) and is
robust to miscounting how many emitters share an occupied site.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence, Tuple

import numpy as np
from scipy.stats import beta as _beta

from ._validation import as_points_array, check_min_samples
from .constants import DEFAULT_CONFIDENCE
from .errors import (
    AllSitesOccupied,
    EmptyCurve,
    InsufficientData,
    NegativeRadius,
    SpecInvalid,
)
from .models import RayleighFit, YieldEstimate

__all__ = [
    "PoissonOutcomes",
    "poisson_pmf",
    "estimate_lambda_from_occupancy",
    "PlanResult",
    "plan_pulse_energy",
    "DisplacementStats",
    "displacement_stats",
    "fit_rayleigh",
]


class PoissonOutcomes(NamedTuple):
    """Probabilities of creating zero, exactly one, or multiple emitters."""

    p_zero: float
    p_one: float
    p_multi: float


def poisson_pmf(lam: float) -> PoissonOutcomes:
    """Outcome probabilities of a Poisson(lam) writing attempt.

    ``P(0) = exp(-lam)``, ``P(1) = lam*exp(-lam)``, ``P(>1)`` the rest;
    the three sum to 1 to machine precision. ``lam`` must be >= 0.
    """
    if not (np.isfinite(lam) and lam >= 0):
        raise SpecInvalid(f"lambda must be >= 0, got {lam}")
    p0 = math.exp(-lam)
    p1 = lam * p0
    # -expm1(-lam) = 1 - exp(-lam) without cancellation at small lam
    p_multi = -math.expm1(-lam) - p1
    return PoissonOutcomes(p0, p1, max(p_multi, 0.0))


def estimate_lambda_from_occupancy(
    n_sites: int, n_empty: int, confidence: float = DEFAULT_CONFIDENCE
) -> YieldEstimate:
    """Poisson expectation value per site from an occupancy count.

    MLE ``lambda_hat = -ln(n_empty / n_sites)``; the confidence interval is
    the exact (Clopper-Pearson) binomial interval on the empty fraction
    mapped through -ln, which flips the bound order.

    Raises
    ------
    AllSitesOccupied
        When ``n_empty == 0``: the MLE is unbounded, no estimate is returned.
    """
    if n_sites < 1:
        raise SpecInvalid("n_sites must be >= 1")
    if not 0 <= n_empty <= n_sites:
        raise SpecInvalid("need 0 <= n_empty <= n_sites")
    if not 0.0 < confidence < 1.0:
        raise SpecInvalid("confidence must be in (0, 1)")
    if n_empty == 0:
        raise AllSitesOccupied(
            f"all {n_sites} sites occupied: lambda estimate unbounded"
        )
    lam = -math.log(n_empty / n_sites)
    alpha = 1.0 - confidence
    k, n = n_empty, n_sites
    p_low = _beta.ppf(alpha / 2.0, k, n - k + 1) if k > 0 else 0.0
    p_high = _beta.ppf(1.0 - alpha / 2.0, k + 1, n - k) if k < n else 1.0
    return YieldEstimate(
        lam=lam,
        ci_low=-math.log(p_high),
        ci_high=-math.log(p_low),
        n_sites=int(n_sites),
        n_empty=int(n_empty),
        confidence=float(confidence),
    )


class PlanResult(NamedTuple):
    """Recommended writing point and its predicted outcome split."""

    energy: float
    lam: float
    outcomes: PoissonOutcomes
    multi_fraction: float
    constraint_met: bool


def _multi_fraction(outcomes: PoissonOutcomes) -> float:
    created = outcomes.p_one + outcomes.p_multi
    # lam = 0 creates nothing, so it carries no multi-emitter risk
    return outcomes.p_multi / created if created > 0 else 0.0


def plan_pulse_energy(
    yield_curve: Sequence[Tuple[float, float]], constraint_max_multi: float
) -> PlanResult:
    """Pick the writing energy maximizing P(1) under a multi-emitter cap.

    Parameters
    ----------
    yield_curve : sequence of (energy_nj, lam)
        Calibrated writing yield per pulse energy. Candidates are the given
        grid points; ordering is irrelevant.
    constraint_max_multi : float
        Maximum tolerated fraction P(>1) / (P(1) + P(>1)) among sites that
        received any emitter, in (0, 1].

    Returns
    -------
    PlanResult
        The energy maximizing P(1) among points satisfying the constraint;
        if no point satisfies it, the point minimizing the multi fraction,
        with ``constraint_met=False``.
    """
    points = [(float(e), float(l)) for e, l in yield_curve]
    if not points:
        raise EmptyCurve("yield curve has no points")
    if not 0.0 < constraint_max_multi <= 1.0:
        raise SpecInvalid("constraint_max_multi must be in (0, 1]")
    for e, lam in points:
        if lam < 0:
            raise SpecInvalid(f"lambda must be >= 0, got {lam} at E={e}")

    evaluated = []
    for e, lam in points:
        out = poisson_pmf(lam)
        evaluated.append((e, lam, out, _multi_fraction(out)))

    admissible = [row for row in evaluated if row[3] <= constraint_max_multi]
    if admissible:
        # deterministic tie-breaks: highest P(1), then lowest multi fraction,
        # then lowest energy
        best = max(admissible, key=lambda r: (r[2].p_one, -r[3], -r[0]))
        return PlanResult(best[0], best[1], best[2], best[3], True)
    best = min(evaluated, key=lambda r: (r[3], -r[2].p_one, r[0]))
    return PlanResult(best[0], best[1], best[2], best[3], False)


class DisplacementStats(NamedTuple):
    """Per-axis moments and radial distances of a displacement cloud."""

    mean: Tuple[float, float]
    std: Tuple[float, float]
    radial: np.ndarray


def displacement_stats(points) -> DisplacementStats:
    """Mean, sample standard deviation, and radial spread of (dx, dy) points.

    Radial distances are measured from the collective mean position, which
    is what a Rayleigh model of placement scatter expects. Standard
    deviations use the n-1 normalization.
    """
    pts = as_points_array(points)
    check_min_samples(pts.shape[0], 2, "displacement stats")
    mean = pts.mean(axis=0)
    std = pts.std(axis=0, ddof=1)
    radial = np.hypot(pts[:, 0] - mean[0], pts[:, 1] - mean[1])
    return DisplacementStats(
        mean=(float(mean[0]), float(mean[1])),
        std=(float(std[0]), float(std[1])),
        radial=radial,
    )


def fit_rayleigh(radial) -> RayleighFit:
    """Maximum-likelihood Rayleigh scale of radial distances.

    ``sigma_hat = sqrt(sum(r^2) / (2N))`` — exact, no iteration — with the
    log-likelihood at the optimum. Scale-equivariant: scaling the radii by
    s scales sigma_hat by s.

    Raises
    ------
    NegativeRadius
        Any radius below zero.
    InsufficientData
        Fewer than 2 samples, or all radii zero (sigma would be 0).
    """
    r = np.asarray(radial, dtype=float)
    if r.ndim != 1:
        raise SpecInvalid("radial must be a 1D sequence")
    if not np.all(np.isfinite(r)):
        raise SpecInvalid("radial contains non-finite values")
    check_min_samples(r.size, 2, "rayleigh fit")
    if np.any(r < 0):
        raise NegativeRadius(f"negative radius {r[r < 0][0]}")
    sum_sq = float(np.sum(r**2))
    if sum_sq == 0.0:
        raise InsufficientData("all radii are zero: scale is degenerate")
    n = r.size
    sigma = math.sqrt(sum_sq / (2.0 * n))
    # log f(r) = log r - 2 log sigma - r^2 / (2 sigma^2); an isolated zero
    # radius honestly drives the log-likelihood to -inf (density 0 at r=0)
    with np.errstate(divide="ignore"):
        log_r = np.log(r)
    log_like = float(
        np.sum(log_r) - 2.0 * n * math.log(sigma) - sum_sq / (2.0 * sigma**2)
    )
    return RayleighFit(sigma=sigma, n_samples=int(n), log_likelihood=log_like)
