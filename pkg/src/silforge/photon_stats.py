"""Second-order correlation analysis and emitter power-saturation fitting.

g2 histograms are built from all cross-channel event pairs within the delay
window (not start-stop), normalized by r0 * r1 * bin_width * duration so
that uncorrelated streams give g2 = 1 at every delay. The zero-delay value
is the central-bin estimate with Poisson counting error; no dip model is
fitted.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import least_squares

from ._validation import check_min_samples, unpack_samples
from .errors import (
    EmptyStream,
    FitNotConverged,
    InsufficientData,
    MissingChannel,
    RhoOutOfRange,
    SpecInvalid,
)
from .models import G2Histogram, PhotonStream, PowerSaturationFit

__all__ = [
    "build_g2",
    "CorrectedG2",
    "g2_background_correct",
    "mix_g2_with_background",
    "EmitterClassification",
    "classify_emitter_count",
    "fit_power_saturation",
    "EnhancementFactors",
    "enhancement_factors",
]

_PAIR_CHUNK = 1 << 16


def build_g2(
    stream: PhotonStream, bin_width_ps: float, max_delay_ps: float
) -> G2Histogram:
    """Histogram of channel-1 minus channel-0 delays, normalized to g2.

    Bin centers sit at integer multiples of ``bin_width_ps`` from -K to +K
    with ``K = floor(max_delay_ps / bin_width_ps)``; each bin is half-open
    ``[c - w/2, c + w/2)``. The normalization constant per bin is
    ``N0 * N1 * bin_width / duration``.

    Raises
    ------
    EmptyStream
        No events at all.
    MissingChannel
        Events on only one channel.
    """
    if bin_width_ps <= 0:
        raise SpecInvalid("bin_width_ps must be > 0")
    if max_delay_ps < bin_width_ps:
        raise SpecInvalid("max_delay_ps must be >= bin_width_ps")
    if len(stream) == 0:
        raise EmptyStream("stream has no events")
    t0 = stream.times_ps[stream.channels == 0]
    t1 = stream.times_ps[stream.channels == 1]
    if t0.size == 0 or t1.size == 0:
        missing = 0 if t0.size == 0 else 1
        raise MissingChannel(f"no events on channel {missing}")

    k_max = int(math.floor(max_delay_ps / bin_width_ps))
    n_bins = 2 * k_max + 1
    half_window = (k_max + 0.5) * bin_width_ps
    counts = np.zeros(n_bins, dtype=np.int64)

    # all-pairs within the window, chunked over channel-0 events; the
    # result is independent of the chunking (each pair counted once)
    for start in range(0, t0.size, _PAIR_CHUNK):
        chunk = t0[start : start + _PAIR_CHUNK]
        lo = np.searchsorted(t1, chunk - half_window, side="left")
        hi = np.searchsorted(t1, chunk + half_window, side="left")
        sizes = hi - lo
        total = int(sizes.sum())
        if total == 0:
            continue
        starts = np.cumsum(sizes) - sizes
        flat = np.arange(total, dtype=np.int64)
        flat += np.repeat(lo.astype(np.int64) - starts, sizes)
        delays = t1[flat] - np.repeat(chunk, sizes)
        idx = np.floor(delays / bin_width_ps + k_max + 0.5).astype(np.int64)
        counts += np.bincount(idx, minlength=n_bins)

    rate0 = t0.size / stream.duration_ps
    rate1 = t1.size / stream.duration_ps
    norm = rate0 * rate1 * bin_width_ps * stream.duration_ps
    delays_axis = (np.arange(n_bins) - k_max) * float(bin_width_ps)
    return G2Histogram(
        bin_width_ps=float(bin_width_ps),
        delays_ps=delays_axis,
        normalized=counts / norm,
        raw_coincidences=counts,
        normalization_constant=float(norm),
    )


class CorrectedG2(NamedTuple):
    """Background-corrected g2 value; ``clamped`` marks a negative
    pre-clamp result (raw value within noise of pure background)."""

    value: float
    clamped: bool


def g2_background_correct(g2_raw: float, rho: float) -> CorrectedG2:
    """Remove Poissonian background from a raw g2 value.

    ``rho`` is the signal fraction S/(S+B). The corrected value is
    ``(g2_raw - (1 - rho^2)) / rho^2``, the exact inverse of mixing a
    signal of known g2 with uncorrelated background; results below zero
    are clamped to zero and flagged.
    """
    if not (np.isfinite(rho) and 0.0 < rho <= 1.0):
        raise RhoOutOfRange(f"rho must be in (0, 1], got {rho}")
    if not (np.isfinite(g2_raw) and g2_raw >= 0):
        raise SpecInvalid(f"g2_raw must be >= 0, got {g2_raw}")
    value = (g2_raw - (1.0 - rho * rho)) / (rho * rho)
    if value < 0.0:
        return CorrectedG2(0.0, True)
    return CorrectedG2(float(value), False)


def mix_g2_with_background(g2_true: float, rho: float) -> float:
    """Forward mixing model: ``1 - rho^2 * (1 - g2_true)``.

    The algebraic inverse of :func:`g2_background_correct`; exposed so the
    round trip can be exercised directly.
    """
    if not (np.isfinite(rho) and 0.0 < rho <= 1.0):
        raise RhoOutOfRange(f"rho must be in (0, 1], got {rho}")
    return 1.0 - rho * rho * (1.0 - g2_true)


class EmitterClassification(NamedTuple):
    """Emitter-count verdict from a zero-delay g2 value."""

    kind: str                    # "Single" | "Few" | "NotSingle"
    n_estimate: Optional[int]    # estimated emitter count for "Few"


def classify_emitter_count(g2_zero: float) -> EmitterClassification:
    """Classify a spot from its g2(0).

    ``g2(0) <= 0.5`` certifies a single emitter (boundary inclusive);
    between 0.5 and 1 the N-emitter model ``g2(0) = 1 - 1/N`` inverts to
    ``N = 1 / (1 - g2(0))``, rounded half-up; at or above 1 the spot is
    not photon-number subpoissonian at all.
    """
    if not (np.isfinite(g2_zero) and g2_zero >= 0):
        raise SpecInvalid(f"g2_zero must be >= 0, got {g2_zero}")
    if g2_zero <= 0.5:
        return EmitterClassification("Single", 1)
    if g2_zero < 1.0:
        n_est = int(math.floor(1.0 / (1.0 - g2_zero) + 0.5))
        return EmitterClassification("Few", n_est)
    return EmitterClassification("NotSingle", None)


def _power_model(p: np.ndarray, i_sat: float, p_sat: float, slope: float):
    return i_sat * p / (p + p_sat) + slope * p


def fit_power_saturation(
    samples: Sequence[Tuple[float, float]], fix_background: bool = False
) -> PowerSaturationFit:
    """Least-squares fit of C(P) = i_sat*P/(P + p_sat) + slope*P.

    Parameters
    ----------
    samples : sequence of (power_mw, counts_per_s)
        Excitation sweep; needs points below and above the knee.
    fix_background : bool
        Pin the linear background slope to zero.

    Raises
    ------
    InsufficientData
        Fewer than 4 samples or powers spanning less than a factor 2.
    FitNotConverged
        Optimizer failure.
    """
    p, c, _ = unpack_samples(samples, 2, 2, "power saturation fit") + [None]
    check_min_samples(p.size, 4, "power saturation fit")
    if np.any(p <= 0):
        raise InsufficientData("powers must be > 0")
    if p.max() / p.min() < 2.0:
        raise InsufficientData(
            f"powers must span at least a factor 2, got {p.max() / p.min():.3g}"
        )
    if np.any(c < 0):
        raise InsufficientData("count rates must be >= 0")

    i0 = max(float(c.max()), 1e-9)
    # knee guess: power where counts reach half the apparent plateau
    half = 0.5 * i0
    above = np.nonzero(c >= half)[0]
    p0 = float(p[above[0]]) if above.size else float(np.median(p))
    p0 = min(max(p0, p.min() * 0.5), p.max())

    if fix_background:
        def residuals(theta):
            i_sat, p_sat = np.exp(theta)
            return _power_model(p, i_sat, p_sat, 0.0) - c

        sol = least_squares(
            residuals, np.log([i0, p0]), method="lm",
            xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=20000,
        )
    else:
        def residuals(theta):
            i_sat, p_sat = np.exp(theta[:2])
            return _power_model(p, i_sat, p_sat, theta[2]) - c

        sol = least_squares(
            residuals, np.concatenate([np.log([i0, p0]), [0.0]]),
            bounds=([-np.inf, -np.inf, 0.0], [np.inf, np.inf, np.inf]),
            method="trf", xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=20000,
        )
    if not sol.success or not np.all(np.isfinite(sol.x)):
        raise FitNotConverged(f"power saturation fit: {sol.message}")

    i_sat, p_sat = np.exp(sol.x[:2])
    slope = float(sol.x[2]) if not fix_background else 0.0
    n_params = 2 if fix_background else 3
    errs = _cov_errors(sol, dof=p.size - n_params)
    i_err = i_sat * errs[0]
    p_err = p_sat * errs[1]
    slope_err = float(errs[2]) if not fix_background else 0.0
    return PowerSaturationFit(
        i_sat=float(i_sat),
        p_sat=float(p_sat),
        background_slope=slope,
        i_sat_err=float(i_err),
        p_sat_err=float(p_err),
        background_slope_err=slope_err,
        rss=float(np.sum(sol.fun**2)),
    )


def _cov_errors(sol, dof: int) -> np.ndarray:
    jac = sol.jac
    gram = jac.T @ jac
    try:
        cov = np.linalg.inv(gram)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(gram)
    chi2 = float(np.sum(sol.fun**2))
    scale = chi2 / dof if dof > 0 else 1.0
    var = np.clip(np.diag(cov) * scale, 0.0, None)
    return np.sqrt(var)


class EnhancementFactors(NamedTuple):
    """Collection / excitation comparison of two power-saturation fits."""

    collection_enhancement: float
    collection_enhancement_err: float
    power_intensification: float
    power_intensification_err: float


def enhancement_factors(
    sil: PowerSaturationFit, bulk: PowerSaturationFit
) -> EnhancementFactors:
    """Brightness and excitation-efficiency gain of one emitter over another.

    ``collection_enhancement = i_sat(sil) / i_sat(bulk)`` and
    ``power_intensification = p_sat(bulk) / p_sat(sil)``; uncertainties are
    propagated in quadrature from the fit errors. Rescaling both detectors'
    efficiency by a common factor leaves both ratios unchanged.
    """
    ce = sil.i_sat / bulk.i_sat
    ce_err = ce * math.hypot(
        sil.i_sat_err / sil.i_sat, bulk.i_sat_err / bulk.i_sat
    )
    pi_ = bulk.p_sat / sil.p_sat
    pi_err = pi_ * math.hypot(
        bulk.p_sat_err / bulk.p_sat, sil.p_sat_err / sil.p_sat
    )
    return EnhancementFactors(float(ce), float(ce_err), float(pi_), float(pi_err))
