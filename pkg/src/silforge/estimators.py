"""Estimator-style wrappers over the functional fitting core.

These follow the scikit-learn conventions (no work in ``__init__``,
``fit`` returns ``self``, fitted attributes carry a trailing underscore,
``get_params``/``set_params`` for free via ``BaseEstimator``) so the fits
can sit inside pipelines and grid searches. Each wrapper delegates to the
corresponding function; nothing here adds numerics.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted, column_or_1d

from . import image_analysis, photon_stats, physics, yield_stats
from ._validation import as_points_array

__all__ = [
    "SaturationCurve",
    "PowerSaturationCurve",
    "CircleEdge",
    "EllipseEdge",
    "GaussianSpot",
    "RayleighScale",
]


def _stack_samples(x, y, sigma=None) -> np.ndarray:
    x = column_or_1d(np.asarray(x, dtype=float).reshape(-1))
    y = column_or_1d(np.asarray(y, dtype=float).reshape(-1))
    cols = [x, y]
    if sigma is not None:
        cols.append(column_or_1d(np.asarray(sigma, dtype=float).reshape(-1)))
    return np.column_stack(cols)


class SaturationCurve(BaseEstimator):
    """Power-law saturation fit of site brightness versus pulse energy."""

    def fit(self, energy_nj, counts, sigma=None):
        samples = _stack_samples(energy_nj, counts, sigma)
        self.params_ = physics.fit_saturation_model(samples)
        self.amplitude_ = self.params_.amplitude
        self.exponent_ = self.params_.exponent
        self.saturation_param_ = self.params_.saturation_param
        self.exponent_err_ = self.params_.exponent_err
        self.rss_ = self.params_.rss
        return self

    def predict(self, energy_nj):
        check_is_fitted(self, "params_")
        e = np.asarray(energy_nj, dtype=float)
        return physics.saturation_model(e, self.params_)


class PowerSaturationCurve(BaseEstimator):
    """Emitter count-rate saturation versus excitation power.

    Parameters
    ----------
    fix_background : bool
        Pin the linear background slope to zero instead of fitting it.
    """

    def __init__(self, fix_background: bool = False):
        self.fix_background = fix_background

    def fit(self, power_mw, counts):
        samples = _stack_samples(power_mw, counts)
        self.params_ = photon_stats.fit_power_saturation(
            samples, fix_background=self.fix_background
        )
        self.i_sat_ = self.params_.i_sat
        self.p_sat_ = self.params_.p_sat
        self.background_slope_ = self.params_.background_slope
        return self

    def predict(self, power_mw):
        check_is_fitted(self, "params_")
        p = np.asarray(power_mw, dtype=float)
        f = self.params_
        return f.i_sat * p / (p + f.p_sat) + f.background_slope * p


class CircleEdge(BaseEstimator):
    """Algebraic circle fit to (x, y) edge points."""

    def fit(self, X, y=None):
        pts = as_points_array(X, "X")
        self.fit_ = image_analysis.fit_circle_algebraic(pts)
        self.center_ = self.fit_.center
        self.radius_ = self.fit_.radius
        self.residual_ = self.fit_.residual
        return self


class EllipseEdge(BaseEstimator):
    """Direct ellipse fit to (x, y) edge points; radius is the geometric
    mean of the semi-axes."""

    def fit(self, X, y=None):
        pts = as_points_array(X, "X")
        self.fit_ = image_analysis.fit_ellipse(pts)
        self.center_ = self.fit_.center
        self.radius_ = self.fit_.radius
        self.residual_ = self.fit_.residual
        self.eccentricity_ = self.fit_.metadata["eccentricity"]
        return self


class GaussianSpot(BaseEstimator):
    """Elliptical 2D Gaussian plus flat background fit to sampled counts."""

    def fit(self, X, y):
        pts = as_points_array(X, "X")
        values = column_or_1d(np.asarray(y, dtype=float).reshape(-1))
        out = image_analysis.fit_gaussian2d(pts[:, 0], pts[:, 1], values)
        mx, my, sx, sy, amp, bg = out
        self.center_ = (mx, my)
        self.widths_ = (sx, sy)
        self.amplitude_ = amp
        self.background_ = bg
        return self

    def predict(self, X):
        check_is_fitted(self, "center_")
        pts = as_points_array(X, "X")
        mx, my = self.center_
        sx, sy = self.widths_
        dx = (pts[:, 0] - mx) / sx
        dy = (pts[:, 1] - my) / sy
        return self.amplitude_ * np.exp(-0.5 * (dx**2 + dy**2)) + self.background_


class RayleighScale(BaseEstimator):
    """Maximum-likelihood Rayleigh scale of radial displacements."""

    def fit(self, radial, y=None):
        r = column_or_1d(np.asarray(radial, dtype=float).reshape(-1))
        self.fit_ = yield_stats.fit_rayleigh(r)
        self.sigma_ = self.fit_.sigma
        self.n_samples_ = self.fit_.n_samples
        self.log_likelihood_ = self.fit_.log_likelihood
        return self

    def score_samples(self, radial):
        """Per-sample log density under the fitted Rayleigh law."""
        check_is_fitted(self, "sigma_")
        r = np.asarray(radial, dtype=float)
        s2 = self.sigma_**2
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(
                r > 0, np.log(r / s2) - r**2 / (2.0 * s2), -np.inf
            )
