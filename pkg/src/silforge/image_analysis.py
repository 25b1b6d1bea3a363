"""SIL-edge detection, emitter localization, and PSF width extraction.

Three independent routes to the SIL center: an algebraic circle fit, a
direct ellipse fit (both on ring points extracted from the map), and a
profile method fitting the two edge-fluorescence peaks a line cut makes
through the ring. Emitters are localized by 2D Gaussian least squares.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Optional, Tuple

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import find_peaks

from ._validation import as_points_array
from .constants import DEFAULT_MAGNIFICATION, FWHM_PER_SIGMA
from .errors import (
    CollinearPoints,
    DegenerateConic,
    FitNotConverged,
    InsufficientPoints,
    NoPeak,
    NonPositiveFactor,
    PeaksNotFound,
    SpecInvalid,
)
from .models import EmitterFit, PLMap, SilFit

__all__ = [
    "fit_circle_algebraic",
    "fit_ellipse",
    "extract_ring_points",
    "detect_sil_profile",
    "detect_sil",
    "locate_emitter",
    "fit_gaussian2d",
    "magnification_correct",
    "emitter_sil_displacement",
    "PsfWidths",
    "extract_psf_widths",
]


# --------------------------------------------------------------- circle fit

def fit_circle_algebraic(points) -> SilFit:
    """Algebraic (Kåsa) least-squares circle through noisy edge points.

    Solves the linear system for x^2 + y^2 + D x + E y + F = 0 about the
    point centroid, which makes the fit exactly translation- and
    rotation-equivariant. ``residual`` is the RMS radial misfit divided by
    the radius.

    Raises
    ------
    InsufficientPoints
        Fewer than 3 points.
    CollinearPoints
        Rank-deficient system or nonpositive squared radius.
    """
    pts = as_points_array(points)
    if pts.shape[0] < 3:
        raise InsufficientPoints(f"circle fit needs >= 3 points, got {pts.shape[0]}")
    centroid = pts.mean(axis=0)
    q = pts - centroid
    a_mat = np.column_stack([q[:, 0], q[:, 1], np.ones(len(q))])
    rhs = -(q[:, 0] ** 2 + q[:, 1] ** 2)
    sol, _, rank, _ = np.linalg.lstsq(a_mat, rhs, rcond=None)
    if rank < 3:
        raise CollinearPoints("points are collinear (rank-deficient circle system)")
    d_coef, e_coef, f_coef = sol
    cx, cy = -d_coef / 2.0, -e_coef / 2.0
    r_sq = cx * cx + cy * cy - f_coef
    if not (np.isfinite(r_sq) and r_sq > 0):
        raise CollinearPoints("degenerate circle: nonpositive squared radius")
    radius = math.sqrt(r_sq)
    dist = np.hypot(q[:, 0] - cx, q[:, 1] - cy)
    residual = float(np.sqrt(np.mean((dist - radius) ** 2)) / radius)
    return SilFit(
        center=(cx + centroid[0], cy + centroid[1]),
        radius=float(radius),
        method="circle",
        residual=residual,
    )


# -------------------------------------------------------------- ellipse fit

_C1_INV = np.array([[0.0, 0.0, 0.5], [0.0, -1.0, 0.0], [0.5, 0.0, 0.0]])


def fit_ellipse(points) -> SilFit:
    """Direct least-squares conic fit constrained to an ellipse.

    Partitioned scatter-matrix formulation of the ellipse-specific fit:
    the quadratic part is an eigenvector of the reduced matrix satisfying
    4ac - b^2 > 0, so the result is an ellipse by construction.
    ``SilFit.radius`` is the geometric mean of the semi-axes; semi-axes
    and eccentricity are reported in ``metadata``.

    Raises
    ------
    InsufficientPoints
        Fewer than 5 points.
    DegenerateConic
        Rank-deficient design (e.g. repeated points) or no valid ellipse.
    """
    pts = as_points_array(points)
    if pts.shape[0] < 5:
        raise InsufficientPoints(f"ellipse fit needs >= 5 points, got {pts.shape[0]}")
    centroid = pts.mean(axis=0)
    x, y = (pts - centroid).T

    d1 = np.column_stack([x * x, x * y, y * y])
    d2 = np.column_stack([x, y, np.ones_like(x)])
    design = np.hstack([d1, d2])
    if np.linalg.matrix_rank(design) < 5:
        raise DegenerateConic("design matrix rank < 5 (points not in general position)")
    s1 = d1.T @ d1
    s2 = d1.T @ d2
    s3 = d2.T @ d2
    try:
        t_mat = -np.linalg.solve(s3, s2.T)
    except np.linalg.LinAlgError:
        raise DegenerateConic("singular linear subsystem") from None
    reduced = _C1_INV @ (s1 + s2 @ t_mat)
    eigvals, eigvecs = np.linalg.eig(reduced)

    quad = None
    for idx in range(3):
        vec = eigvecs[:, idx]
        if np.any(np.abs(vec.imag) > 1e-9):
            continue
        v = vec.real
        if 4.0 * v[0] * v[2] - v[1] ** 2 > 0.0:
            quad = v
            break
    if quad is None:
        raise DegenerateConic("no elliptical solution among eigenvectors")
    conic = np.concatenate([quad, t_mat @ quad])
    a, b, c, d, e, f = conic

    m = np.array([[2.0 * a, b], [b, 2.0 * c]])
    try:
        cx, cy = np.linalg.solve(m, [-d, -e])
    except np.linalg.LinAlgError:
        raise DegenerateConic("conic has no finite center") from None
    # conic value at the center collapses to f + (d*cx + e*cy)/2
    f_center = f + 0.5 * (d * cx + e * cy)
    quad_mat = np.array([[a, b / 2.0], [b / 2.0, c]])
    evals, _ = np.linalg.eigh(quad_mat)
    with np.errstate(divide="ignore", invalid="ignore"):
        axes_sq = -f_center / evals
    if not np.all(np.isfinite(axes_sq)) or np.any(axes_sq <= 0):
        raise DegenerateConic("conic is not a real ellipse")
    semi = np.sqrt(axes_sq)
    semi_major, semi_minor = float(semi.max()), float(semi.min())
    eccentricity = math.sqrt(1.0 - (semi_minor / semi_major) ** 2)

    u = pts - (centroid + np.array([cx, cy]))
    ell_r = np.sqrt(np.einsum("ni,ij,nj->n", u, quad_mat, u) / -f_center)
    residual = float(np.sqrt(np.mean((ell_r - 1.0) ** 2)))
    return SilFit(
        center=(cx + centroid[0], cy + centroid[1]),
        radius=float(math.sqrt(semi_major * semi_minor)),
        method="ellipse",
        residual=residual,
        metadata={
            "semi_major": semi_major,
            "semi_minor": semi_minor,
            "eccentricity": eccentricity,
        },
    )


# ------------------------------------------------------- ring-point extraction

def extract_ring_points(plmap: PLMap, n_sectors: int = 72) -> np.ndarray:
    """Edge points of the fluorescing ring for the circle/ellipse fits.

    Thresholds the map at background + 3*noise (or 10% of the dynamic
    range when noiseless), finds the dominant radius about the rough
    centroid, and returns one intensity-weighted point per angular sector
    inside the radial band [0.6, 1.4] * r_peak. Sector boundaries are
    offset half a sector so the axis directions fall mid-sector.

    Raises
    ------
    PeaksNotFound
        No ring structure above the detection threshold.
    """
    if n_sectors < 8:
        raise SpecInvalid("n_sectors must be >= 8")
    v = plmap.counts
    bg = float(np.median(v))
    noise = 1.4826 * float(np.median(np.abs(v - bg)))
    span = float(v.max()) - bg
    if span <= 0:
        raise PeaksNotFound("map is flat: no ring structure")
    thresh = bg + max(3.0 * noise, 0.10 * span)
    mask = v >= thresh
    if not np.any(mask):
        raise PeaksNotFound("no pixels above the ring detection threshold")

    xs = plmap.x_coords()[None, :].repeat(plmap.rows, axis=0)
    ys = plmap.y_coords()[:, None].repeat(plmap.cols, axis=1)
    w = np.clip(v - bg, 0.0, None) * mask
    w_sum = w.sum()
    xc = float((w * xs).sum() / w_sum)
    yc = float((w * ys).sum() / w_sum)

    r = np.hypot(xs - xc, ys - yc)
    r_masked = r[mask]
    w_masked = w[mask]
    n_bins = max(8, int(np.ceil(r_masked.max() / plmap.pixel_size)))
    hist, edges = np.histogram(
        r_masked, bins=n_bins, range=(0.0, r_masked.max()), weights=w_masked
    )
    r_peak = 0.5 * (edges[np.argmax(hist)] + edges[np.argmax(hist) + 1])
    if r_peak <= 0:
        raise PeaksNotFound("ring radius estimate collapsed to zero")

    band = mask & (np.abs(r - r_peak) <= 0.4 * r_peak)
    if not np.any(band):
        raise PeaksNotFound("no pixels in the radial band around the ring")
    theta = np.arctan2(ys - yc, xs - xc)
    width = 2.0 * math.pi / n_sectors
    sector = (np.floor((theta + math.pi - width / 2.0) / width).astype(int)) % n_sectors

    points = []
    wb = np.clip(v - bg, 0.0, None)
    for s in range(n_sectors):
        sel = band & (sector == s)
        if not np.any(sel):
            continue
        ws = wb[sel]
        total = ws.sum()
        if total <= 0:
            continue
        points.append(((ws * xs[sel]).sum() / total, (ws * ys[sel]).sum() / total))
    if len(points) < 6:
        raise PeaksNotFound(f"only {len(points)} ring sectors detected")
    return np.asarray(points, dtype=float)


# -------------------------------------------------------------- 1D peak fits

def _fit_gaussian1d(x: np.ndarray, v: np.ndarray, center0: float, sigma0: float):
    """LM fit of amp*exp(-(x-mu)^2/(2 s^2)) + bg; amp and s kept positive
    through log parametrization. Returns (mu, sigma, amp, bg, rms)."""
    amp0 = max(float(v.max() - np.median(v)), 1e-9)
    bg0 = float(np.median(v))
    sigma0 = max(float(sigma0), np.diff(x).min() / 4.0)

    def residuals(theta):
        log_amp, mu, log_sig, bg = theta
        return np.exp(log_amp) * np.exp(
            -((x - mu) ** 2) / (2.0 * np.exp(2.0 * log_sig))
        ) + bg - v

    theta0 = np.array([np.log(amp0), center0, np.log(sigma0), bg0])
    sol = least_squares(
        residuals, theta0, method="lm", xtol=1e-14, ftol=1e-14, gtol=1e-14,
        max_nfev=10000,
    )
    if not sol.success or not np.all(np.isfinite(sol.x)):
        raise FitNotConverged(f"1D Gaussian fit: {sol.message}")
    amp = float(np.exp(sol.x[0]))
    mu = float(sol.x[1])
    sigma = float(np.exp(sol.x[2]))
    bg = float(sol.x[3])
    rms = float(np.sqrt(np.mean(sol.fun**2)))
    return mu, sigma, amp, bg, rms


def _profile_ring_crossings(coords: np.ndarray, values: np.ndarray):
    """Locate and fit the two outermost ring peaks along one profile.

    Returns ((mu_left, mu_right), mean normalized fit rms). Peaks must
    clear background + 3*noise; the two outermost qualifying peaks are
    taken as the ring crossings (anything between them, e.g. an emitter,
    is ignored).
    """
    bg = float(np.median(values))
    noise = 1.4826 * float(np.median(np.abs(values - bg)))
    span = float(values.max()) - bg
    if span <= 0:
        raise PeaksNotFound("profile is flat")
    height = bg + max(3.0 * noise, 0.10 * span)
    smooth = np.convolve(values, np.ones(3) / 3.0, mode="same")
    peaks, props = find_peaks(smooth, height=height)
    if peaks.size < 2:
        raise PeaksNotFound(
            f"found {peaks.size} peak(s) above background + 3 sigma, need 2"
        )
    left, right = int(peaks.min()), int(peaks.max())

    step = float(np.diff(coords).min())
    results = []
    for pk in (left, right):
        # estimate the peak's own width from its half-height extent
        half = (smooth[pk] + bg) / 2.0
        lo = pk
        while lo > 0 and values[lo] > half:
            lo -= 1
        hi = pk
        while hi < values.size - 1 and values[hi] > half:
            hi += 1
        sigma0 = max((hi - lo) * step / FWHM_PER_SIGMA, step / 2.0)
        w = max(4, int(round(3.0 * sigma0 / step)))
        sl = slice(max(0, pk - w), min(values.size, pk + w + 1))
        mu, sigma, amp, _, rms = _fit_gaussian1d(
            coords[sl], values[sl], coords[pk], sigma0
        )
        results.append((mu, rms / max(amp, 1e-12)))
    (mu_l, res_l), (mu_r, res_r) = results
    if mu_r <= mu_l:
        raise PeaksNotFound("ring peaks collapsed onto each other")
    return (mu_l, mu_r), 0.5 * (res_l + res_r)


def detect_sil_profile(
    plmap: PLMap, row: Optional[int] = None, col: Optional[int] = None
) -> SilFit:
    """SIL center and radius from edge-fluorescence peaks along line cuts.

    With a single ``row`` (or ``col``), the fit uses that one profile: the
    in-line center coordinate is the midpoint of the two ring peaks, the
    cross coordinate is the line's own position, and the radius is half
    the peak separation (exact only if the line passes through the
    center). With both (the default: the central row and column), the two
    chords are combined exactly: each profile supplies one center
    coordinate, and the radius follows from the chord half-width h and the
    line's offset from center via r^2 = h^2 + offset^2.

    Raises
    ------
    PeaksNotFound
        Fewer than two ring peaks at >= 3 sigma above background.
    """
    if row is None and col is None:
        row = plmap.rows // 2
        col = plmap.cols // 2
    if row is not None and not 0 <= row < plmap.rows:
        raise SpecInvalid(f"row {row} outside map")
    if col is not None and not 0 <= col < plmap.cols:
        raise SpecInvalid(f"col {col} outside map")

    xs = plmap.x_coords()
    ys = plmap.y_coords()
    meta = {}

    row_mid = row_half = None
    if row is not None:
        (mu_l, mu_r), res_row = _profile_ring_crossings(xs, plmap.counts[row, :])
        row_mid = 0.5 * (mu_l + mu_r)
        row_half = 0.5 * (mu_r - mu_l)
        meta["row"] = {"index": int(row), "peaks": (mu_l, mu_r)}
    col_mid = col_half = None
    if col is not None:
        (mu_b, mu_t), res_col = _profile_ring_crossings(ys, plmap.counts[:, col])
        col_mid = 0.5 * (mu_b + mu_t)
        col_half = 0.5 * (mu_t - mu_b)
        meta["col"] = {"index": int(col), "peaks": (mu_b, mu_t)}

    if row is not None and col is not None:
        center = (row_mid, col_mid)
        # exact chord geometry: each line may miss the center, but its
        # offset from the center is known from the other profile
        dy = ys[row] - col_mid
        dx = xs[col] - row_mid
        r_row = math.hypot(row_half, dy)
        r_col = math.hypot(col_half, dx)
        radius = 0.5 * (r_row + r_col)
        residual = 0.5 * (res_row + res_col)
    elif row is not None:
        center = (row_mid, float(ys[row]))
        radius = row_half
        residual = res_row
    else:
        center = (float(xs[col]), col_mid)
        radius = col_half
        residual = res_col
    return SilFit(
        center=center, radius=float(radius), method="profile",
        residual=float(residual), metadata=meta,
    )


def detect_sil(plmap: PLMap, method: str = "circle", n_sectors: int = 72):
    """Run one SIL-center method, or all three.

    ``method`` is one of ``circle``, ``ellipse``, ``profile``, ``all``;
    with ``all`` a dict of the three fits is returned.
    """
    if method == "profile":
        return detect_sil_profile(plmap)
    if method in ("circle", "ellipse"):
        points = extract_ring_points(plmap, n_sectors=n_sectors)
        return fit_circle_algebraic(points) if method == "circle" else fit_ellipse(points)
    if method == "all":
        return {m: detect_sil(plmap, m, n_sectors) for m in ("circle", "ellipse", "profile")}
    raise SpecInvalid(f"unknown method {method!r}")


# ------------------------------------------------------- emitter localization

def fit_gaussian2d(x: np.ndarray, y: np.ndarray, values: np.ndarray):
    """2D Gaussian + constant background least squares on scattered samples.

    Returns (x0, y0, sigma_x, sigma_y, amplitude, background). Amplitude
    and widths stay positive via log parametrization; initialization from
    the background-subtracted centroid and second moments.
    """
    x = np.asarray(x, float).ravel()
    y = np.asarray(y, float).ravel()
    v = np.asarray(values, float).ravel()
    if not (x.size == y.size == v.size) or x.size < 7:
        raise SpecInvalid("need >= 7 samples of matching length for a 2D Gaussian")

    bg0 = float(np.percentile(v, 20))
    w = np.clip(v - bg0, 0.0, None)
    w_sum = w.sum()
    if w_sum <= 0:
        raise NoPeak("no signal above background estimate")
    x0 = float((w * x).sum() / w_sum)
    y0 = float((w * y).sum() / w_sum)
    span_x = max(x.max() - x.min(), 1e-9)
    span_y = max(y.max() - y.min(), 1e-9)
    sx0 = math.sqrt(max(float((w * (x - x0) ** 2).sum() / w_sum), 1e-18))
    sy0 = math.sqrt(max(float((w * (y - y0) ** 2).sum() / w_sum), 1e-18))
    sx0 = min(max(sx0, span_x / 50.0), span_x)
    sy0 = min(max(sy0, span_y / 50.0), span_y)
    amp0 = max(float(v.max() - bg0), 1e-9)

    def residuals(theta):
        log_amp, mx, my, log_sx, log_sy, bg = theta
        model = np.exp(log_amp) * np.exp(
            -((x - mx) ** 2) / (2.0 * np.exp(2.0 * log_sx))
            - ((y - my) ** 2) / (2.0 * np.exp(2.0 * log_sy))
        ) + bg
        return model - v

    theta0 = np.array([np.log(amp0), x0, y0, np.log(sx0), np.log(sy0), bg0])
    sol = least_squares(
        residuals, theta0, method="lm", xtol=1e-14, ftol=1e-14, gtol=1e-14,
        max_nfev=20000,
    )
    if not sol.success or not np.all(np.isfinite(sol.x)):
        raise FitNotConverged(f"2D Gaussian fit: {sol.message}")
    amp = float(np.exp(sol.x[0]))
    mx, my = float(sol.x[1]), float(sol.x[2])
    sx, sy = float(np.exp(sol.x[3])), float(np.exp(sol.x[4]))
    bg = float(sol.x[5])
    return mx, my, sx, sy, amp, max(bg, 0.0)


def _roi_window(plmap: PLMap, roi) -> Tuple[slice, slice]:
    """Pixel window whose centers fall inside the (x0, y0, x1, y1) µm box."""
    x0, y0, x1, y1 = (float(v) for v in roi)
    if x1 < x0:
        x0, x1 = x1, x0
    if y1 < y0:
        y0, y1 = y1, y0
    px = plmap.pixel_size
    j0 = max(0, int(math.ceil(x0 / px - 1e-9)))
    j1 = min(plmap.cols - 1, int(math.floor(x1 / px + 1e-9)))
    i0 = max(0, int(math.ceil(y0 / px - 1e-9)))
    i1 = min(plmap.rows - 1, int(math.floor(y1 / px + 1e-9)))
    if j0 > j1 or i0 > i1:
        raise SpecInvalid("ROI selects no pixels")
    return slice(i0, i1 + 1), slice(j0, j1 + 1)


def _window_noise(window: np.ndarray):
    """Background level and robust noise sigma from the window border."""
    if window.shape[0] >= 3 and window.shape[1] >= 3:
        border = np.concatenate(
            [window[0, :], window[-1, :], window[1:-1, 0], window[1:-1, -1]]
        )
    else:
        border = window.ravel()
    bg = float(np.median(border))
    noise = 1.4826 * float(np.median(np.abs(border - bg)))
    return bg, noise


def locate_emitter(plmap: PLMap, roi) -> EmitterFit:
    """Sub-pixel emitter localization by 2D Gaussian fit inside an ROI.

    ``roi`` is an (x0, y0, x1, y1) box in µm containing one dominant spot.

    Raises
    ------
    NoPeak
        No local maximum above background + 3*noise in the ROI.
    FitNotConverged
        Optimizer failure.
    """
    rows, cols = _roi_window(plmap, roi)
    window = plmap.counts[rows, cols]
    if window.size < 9:
        raise SpecInvalid("ROI too small for a Gaussian fit (need >= 3x3 pixels)")
    bg, noise = _window_noise(window)
    if float(window.max()) - bg <= 3.0 * noise:
        raise NoPeak("no peak above background + 3 sigma in ROI")

    xs = plmap.x_coords()[cols]
    ys = plmap.y_coords()[rows]
    gx, gy = np.meshgrid(xs, ys)
    mx, my, sx, sy, amp, bg_fit = fit_gaussian2d(gx, gy, window)
    return EmitterFit(
        center=(mx, my),
        widths=(sx, sy),
        amplitude=amp,
        background=bg_fit,
        method="gaussian2d",
    )


# ------------------------------------------------------------- displacement

def magnification_correct(apparent_offset, factor: float) -> Tuple[float, float]:
    """Undo the apparent magnification of in-SIL distances.

    Component-wise division by ``factor`` (> 0). The default factor for a
    hemispherical SIL equals the material refractive index.
    """
    if not (np.isfinite(factor) and factor > 0):
        raise NonPositiveFactor(f"magnification factor must be > 0, got {factor}")
    dx, dy = float(apparent_offset[0]), float(apparent_offset[1])
    return dx / factor, dy / factor


def emitter_sil_displacement(
    sil: SilFit, emitter: EmitterFit, magnification: float = DEFAULT_MAGNIFICATION
) -> Tuple[float, float]:
    """True emitter offset from the SIL center, magnification-corrected."""
    raw = (emitter.center[0] - sil.center[0], emitter.center[1] - sil.center[1])
    return magnification_correct(raw, magnification)


# ------------------------------------------------------------------ PSF cuts

class PsfWidths(NamedTuple):
    lateral_fwhm_nm: float
    axial_fwhm_nm: float


def _cut_fit_sigma(coords: np.ndarray, values: np.ndarray) -> float:
    bg = float(np.median(values))
    noise = 1.4826 * float(np.median(np.abs(values - bg)))
    peak = int(np.argmax(values))
    if float(values[peak]) - bg <= 3.0 * noise:
        raise NoPeak("cut has no peak above background + 3 sigma")
    step = float(np.diff(coords).min())
    half = (float(values[peak]) + bg) / 2.0
    lo = peak
    while lo > 0 and values[lo] > half:
        lo -= 1
    hi = peak
    while hi < values.size - 1 and values[hi] > half:
        hi += 1
    sigma0 = max((hi - lo) * step / FWHM_PER_SIGMA, step / 2.0)
    _, sigma, _, _, _ = _fit_gaussian1d(coords, values, float(coords[peak]), sigma0)
    return sigma


def extract_psf_widths(map_xy: PLMap, map_xz: PLMap, roi=None) -> PsfWidths:
    """Lateral and axial FWHM of an emitter from its two section maps.

    1D Gaussians are fitted to the line cuts through the spot maximum: the
    lateral width averages the x and y cuts of the lateral map, the axial
    width is the cut along the row axis of the axial section (whose rows
    sample z). FWHM = 2.3548 sigma, returned in nm.
    """
    widths = {}
    for name, m in (("xy", map_xy), ("xz", map_xz)):
        if roi is not None:
            rows, cols = _roi_window(m, roi)
        else:
            rows, cols = slice(0, m.rows), slice(0, m.cols)
        window = m.counts[rows, cols]
        i_rel, j_rel = np.unravel_index(int(np.argmax(window)), window.shape)
        i_max, j_max = rows.start + int(i_rel), cols.start + int(j_rel)
        along_cols = _cut_fit_sigma(m.x_coords()[cols], m.counts[i_max, cols])
        along_rows = _cut_fit_sigma(m.y_coords()[rows], m.counts[rows, j_max])
        widths[name] = (along_cols, along_rows)

    sigma_lat = 0.5 * (widths["xy"][0] + widths["xy"][1])
    sigma_ax = widths["xz"][1]  # rows of the axial section sample z
    return PsfWidths(
        lateral_fwhm_nm=FWHM_PER_SIGMA * sigma_lat * 1e3,
        axial_fwhm_nm=FWHM_PER_SIGMA * sigma_ax * 1e3,
    )
