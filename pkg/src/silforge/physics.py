"""Closed-form writing-physics models and the saturation-curve fit.

Covers the multiphoton-ionization intensity threshold, the pulse-energy
threshold it implies for a focused beam, the pulse-energy saturation model
of written-defect brightness, and the photon-energy multiple implied by a
fitted exponent.
"""

from __future__ import annotations

import math
from typing import Sequence, Tuple

import numpy as np
from scipy.optimize import least_squares

from ._validation import check_min_samples, check_positive, unpack_samples
from .constants import EV_TO_JOULE, WRITE_PHOTON_ENERGY_EV
from .errors import FitNotConverged, InsufficientData
from .models import BeamParams, MaterialConstants, SaturationFitParams

__all__ = [
    "keldysh_intensity_threshold",
    "threshold_pulse_energy",
    "saturation_model",
    "fit_saturation_model",
    "effective_process_energy",
]


def keldysh_intensity_threshold(constants: MaterialConstants) -> float:
    """Intensity (W/m^2) below which multiphoton ionization dominates.

    Evaluates ``m * c * n * eps0 * E_g * omega^2 / e^2`` with the bandgap
    converted from eV to joules.

    Note: with the documented material constants for 4H-SiC this evaluates
    to about 2.7e17 W/m^2. The commonly quoted threshold for the same
    constants is 1.38e17 W/m^2 — a factor ~2 apart. The formula here is the
    literal one; the discrepancy is documented, not silently absorbed.
    """
    c = constants
    bandgap_j = c.bandgap_ev * EV_TO_JOULE
    return (
        c.effective_mass
        * c.speed_of_light
        * c.refractive_index
        * c.vacuum_permittivity
        * bandgap_j
        * c.laser_angular_frequency**2
        / c.electron_charge**2
    )


def threshold_pulse_energy(intensity: float, beam: BeamParams) -> float:
    """Pulse energy (J) delivering ``intensity`` over the focal spot.

    ``E = I * pi * w^2 * tau`` for beam waist w and pulse duration tau.
    """
    check_positive(intensity, "intensity")
    return intensity * math.pi * beam.beam_waist**2 * beam.pulse_duration


def saturation_model(energy_nj, params: SaturationFitParams):
    """Brightness of written defects vs pulse energy: a*E^n / (1 + k*E^n).

    Vectorized over ``energy_nj`` (nJ); returns counts/s. Monotone
    nondecreasing in E, with plateau a/k for k > 0.
    """
    e = np.asarray(energy_nj, dtype=float)
    if np.any(e < 0):
        raise InsufficientData("pulse energy must be >= 0")
    en = np.power(e, params.exponent)
    out = params.amplitude * en / (1.0 + params.saturation_param * en)
    return out if out.ndim else float(out)


def _saturation_initial_guess(e: np.ndarray, i: np.ndarray) -> np.ndarray:
    """Log-parametrized start: exponent from the log-log slope of the three
    lowest-energy points, amplitude from that intercept, k from the plateau."""
    order = np.argsort(e)
    e3, i3 = e[order[:3]], i[order[:3]]
    pos = i3 > 0
    if pos.sum() >= 2:
        slope, intercept = np.polyfit(np.log(e3[pos]), np.log(i3[pos]), 1)
    else:
        slope, intercept = 1.0, np.log(max(i.max(), 1.0))
    n0 = float(np.clip(slope, 0.2, 15.0))
    a0 = float(np.exp(np.clip(intercept, -50.0, 50.0)))
    k0 = max(a0 / max(i.max(), 1e-12), 1e-9)
    return np.log([a0, n0, k0])


def fit_saturation_model(
    samples: Sequence[Tuple[float, ...]],
) -> SaturationFitParams:
    """Weighted nonlinear least-squares fit of the saturation model.

    Parameters
    ----------
    samples : sequence of (E_nj, counts_per_s) or (E_nj, counts_per_s, sigma)
        Pulse-energy sweep. When the third column is present the fit is
        inverse-variance weighted, otherwise unweighted.

    Returns
    -------
    SaturationFitParams
        With per-parameter standard errors from the fit covariance (scaled
        by reduced chi-square) and the residual sum of squares.

    Raises
    ------
    InsufficientData
        Fewer than 4 samples, or energies spanning less than a factor 2.
    FitNotConverged
        Optimizer failure or singular covariance.

    Notes
    -----
    Levenberg-Marquardt on log(a), log(n), log(k) keeps all three
    parameters positive across the decades they span.
    """
    e, i, sigma = unpack_samples(samples, 2, 3, "saturation fit")
    check_min_samples(e.size, 4, "saturation fit")
    if np.any(e <= 0):
        raise InsufficientData("pulse energies must be > 0")
    if e.max() / e.min() < 2.0:
        raise InsufficientData(
            f"energies must span at least a factor 2, got {e.max() / e.min():.3g}"
        )
    if sigma is None:
        weights = np.ones_like(i)
    else:
        if np.any(sigma <= 0):
            raise InsufficientData("sigma values must be > 0")
        weights = 1.0 / sigma

    def residuals(theta):
        a, n, k = np.exp(theta)
        en = np.power(e, n)
        model = a * en / (1.0 + k * en)
        return (model - i) * weights

    theta0 = _saturation_initial_guess(e, i)
    sol = least_squares(
        residuals, theta0, method="lm", xtol=1e-14, ftol=1e-14, gtol=1e-14,
        max_nfev=20000,
    )
    if not sol.success or not np.all(np.isfinite(sol.x)):
        raise FitNotConverged(f"saturation fit: {sol.message}")
    a, n, k = np.exp(sol.x)

    # rss is what the optimizer minimized: weighted when sigmas were given
    rss = float(np.sum(sol.fun**2))
    errs = _delta_method_errors(sol, dof=e.size - 3)
    # errors of (a, n, k) from errors of their logs: sigma_x = x * sigma_logx
    a_err, n_err, k_err = np.array([a, n, k]) * errs
    return SaturationFitParams(
        amplitude=float(a),
        exponent=float(n),
        saturation_param=float(k),
        amplitude_err=float(a_err),
        exponent_err=float(n_err),
        saturation_param_err=float(k_err),
        rss=rss,
    )


def _delta_method_errors(sol, dof: int) -> np.ndarray:
    """Standard errors of the fitted log-parameters from J^T J, scaled by
    reduced chi-square when there are spare degrees of freedom."""
    jac = sol.jac
    try:
        cov = np.linalg.inv(jac.T @ jac)
    except np.linalg.LinAlgError as exc:
        raise FitNotConverged(f"singular covariance: {exc}") from None
    chi2 = float(np.sum(sol.fun**2))
    scale = chi2 / dof if dof > 0 else 1.0
    var = np.diag(cov) * scale
    if np.any(var < 0) or not np.all(np.isfinite(var)):
        raise FitNotConverged("covariance not positive definite")
    return np.sqrt(var)


def effective_process_energy(
    exponent: float,
    exponent_err: float = 0.0,
    photon_energy_ev: float = WRITE_PHOTON_ENERGY_EV,
) -> Tuple[float, float]:
    """Total absorbed energy implied by a fitted power-law exponent.

    Returns ``(exponent * E_photon, exponent_err * E_photon)`` in eV; the
    exponent counts photons of the writing laser.
    """
    check_positive(exponent, "exponent")
    if exponent_err < 0:
        raise InsufficientData("exponent_err must be >= 0")
    return exponent * photon_energy_ev, exponent_err * photon_energy_ev
