"""Domain types shared by all analysis and simulation modules.

All types are immutable after construction and validate their invariants
eagerly, raising a distinct error per violation. Coordinate convention for
maps: pixel ``(i, j)`` is centered at ``x = j * pixel_size``,
``y = i * pixel_size`` (micrometres), so row index runs along y and column
index along x.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    ChannelOutOfRange,
    NegativeCount,
    NonPositivePixelSize,
    NonRectangular,
    SpecInvalid,
)

__all__ = [
    "PLMap",
    "PhotonStream",
    "MaterialConstants",
    "BeamParams",
    "SaturationFitParams",
    "SilFit",
    "EmitterFit",
    "YieldEstimate",
    "RayleighFit",
    "G2Histogram",
    "PowerSaturationFit",
    "ZplLine",
    "ZplCatalog",
    "EmitterSpec",
    "SceneSpec",
    "HbtSpec",
    "validate_map",
]


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class PLMap:
    """2D grid of photon counts with pixel pitch, the unit of image analysis.

    Parameters
    ----------
    rows, cols : int
        Grid extent; must match ``counts.shape``.
    pixel_size : float
        Pixel pitch in micrometres per pixel.
    counts : ndarray
        ``rows x cols`` array of nonnegative, finite reals (counts or
        counts per second; units travel in the file header, not here).
    origin_label : str
        Free-text sample / site identifier, e.g. ``"T30"``.
    """

    rows: int
    cols: int
    pixel_size: float
    counts: np.ndarray
    origin_label: str = ""

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=float)
        if counts.ndim != 2:
            raise NonRectangular(f"counts must be 2D, got ndim={counts.ndim}")
        if counts.shape != (self.rows, self.cols):
            raise NonRectangular(
                f"counts shape {counts.shape} != ({self.rows}, {self.cols})"
            )
        if self.rows < 1 or self.cols < 1:
            raise NonRectangular("map must have at least one row and column")
        if not np.all(np.isfinite(counts)):
            raise NegativeCount("counts must be finite")
        if np.any(counts < 0):
            raise NegativeCount("counts must be >= 0")
        if not (np.isfinite(self.pixel_size) and self.pixel_size > 0):
            raise NonPositivePixelSize(f"pixel_size={self.pixel_size}")
        object.__setattr__(self, "counts", _freeze(counts))

    def x_coords(self) -> np.ndarray:
        """Pixel-center x positions (µm), one per column."""
        return np.arange(self.cols) * self.pixel_size

    def y_coords(self) -> np.ndarray:
        """Pixel-center y positions (µm), one per row."""
        return np.arange(self.rows) * self.pixel_size

    def __eq__(self, other):
        if not isinstance(other, PLMap):
            return NotImplemented
        return (
            self.rows == other.rows
            and self.cols == other.cols
            and self.pixel_size == other.pixel_size
            and self.origin_label == other.origin_label
            and np.array_equal(self.counts, other.counts)
        )


def validate_map(raw_grid, pixel_size: float, origin_label: str = "") -> PLMap:
    """Build a validated :class:`PLMap` from a raw nested sequence or array.

    Raises
    ------
    NonRectangular
        If rows have unequal lengths.
    NegativeCount
        On negative or non-finite entries.
    NonPositivePixelSize
        If the pitch is not > 0.
    """
    if isinstance(raw_grid, np.ndarray):
        grid = np.asarray(raw_grid, dtype=float)
        if grid.ndim != 2:
            raise NonRectangular(f"expected 2D grid, got ndim={grid.ndim}")
    else:
        rows = [list(r) for r in raw_grid]
        if not rows:
            raise NonRectangular("empty grid")
        width = len(rows[0])
        for i, r in enumerate(rows):
            if len(r) != width:
                raise NonRectangular(f"row {i} has length {len(r)}, expected {width}")
        grid = np.asarray(rows, dtype=float)
    return PLMap(
        rows=grid.shape[0],
        cols=grid.shape[1],
        pixel_size=float(pixel_size),
        counts=grid,
        origin_label=origin_label,
    )


@dataclass(frozen=True, eq=False)
class PhotonStream:
    """Timestamped two-channel detection events for correlation analysis.

    ``channels`` and ``times_ps`` are parallel arrays; times are nonnegative
    integer picoseconds, sorted nondecreasing, all within ``duration_ps``.
    A stream may be empty or single-channel; correlation analysis raises at
    the use site in that case.
    """

    channels: np.ndarray
    times_ps: np.ndarray
    duration_ps: int

    def __post_init__(self):
        ch = np.asarray(self.channels)
        t = np.asarray(self.times_ps)
        if ch.shape != t.shape or ch.ndim != 1:
            raise SpecInvalid("channels and times_ps must be parallel 1D arrays")
        if not np.issubdtype(t.dtype, np.integer):
            # accept exact float integers, reject fractional times
            tf = np.asarray(t, dtype=float)
            if not np.all(tf == np.floor(tf)):
                raise SpecInvalid("times_ps must be integers (picoseconds)")
            t = tf.astype(np.int64)
        else:
            t = t.astype(np.int64)
        ch = ch.astype(np.int8)
        if ch.size and not np.all((ch == 0) | (ch == 1)):
            bad = int(ch[(ch != 0) & (ch != 1)][0])
            raise ChannelOutOfRange(f"channel {bad} not in {{0, 1}}")
        if t.size:
            if t[0] < 0:
                raise SpecInvalid("negative timestamp")
            if np.any(np.diff(t) < 0):
                raise SpecInvalid("timestamps must be sorted nondecreasing")
            if t[-1] > self.duration_ps:
                raise SpecInvalid("timestamp beyond stream duration")
        if self.duration_ps <= 0:
            raise SpecInvalid("duration_ps must be > 0")
        object.__setattr__(self, "channels", _freeze(ch))
        object.__setattr__(self, "times_ps", _freeze(t))
        object.__setattr__(self, "duration_ps", int(self.duration_ps))

    def __len__(self):
        return int(self.channels.size)

    def events(self):
        """Iterate events as (channel, time_ps) tuples."""
        for c, t in zip(self.channels, self.times_ps):
            yield int(c), int(t)

    def __eq__(self, other):
        if not isinstance(other, PhotonStream):
            return NotImplemented
        return (
            self.duration_ps == other.duration_ps
            and np.array_equal(self.channels, other.channels)
            and np.array_equal(self.times_ps, other.times_ps)
        )


def _require_positive(obj, names):
    for name in names:
        v = getattr(obj, name)
        if not (np.isfinite(v) and v > 0):
            raise SpecInvalid(f"{type(obj).__name__}.{name} must be > 0, got {v}")


def _require_nonnegative(obj, names):
    for name in names:
        v = getattr(obj, name)
        if not (np.isfinite(v) and v >= 0):
            raise SpecInvalid(f"{type(obj).__name__}.{name} must be >= 0, got {v}")


@dataclass(frozen=True)
class MaterialConstants:
    """Symbol set of the multiphoton-ionization intensity threshold.

    Fields carry SI units except the bandgap, which is in eV to match how
    bandgaps are tabulated; the threshold formula converts internally.
    """

    effective_mass: float          # kg (symbol m)
    refractive_index: float        # dimensionless (symbol n)
    bandgap_ev: float              # eV (symbol E_g)
    laser_angular_frequency: float  # rad/s (symbol omega)
    electron_charge: float         # C (symbol e)
    vacuum_permittivity: float     # F/m (symbol eps0)
    speed_of_light: float          # m/s (symbol c)

    def __post_init__(self):
        _require_positive(self, [f.name for f in self.__dataclass_fields__.values()])


@dataclass(frozen=True)
class BeamParams:
    """Focused writing-beam geometry: waist (m) and pulse duration (s)."""

    beam_waist: float
    pulse_duration: float

    def __post_init__(self):
        _require_positive(self, ["beam_waist", "pulse_duration"])


@dataclass(frozen=True)
class SaturationFitParams:
    """Parameters of the pulse-energy saturation model a*E^n / (1 + k*E^n).

    ``amplitude`` is in counts/s per (nJ)^n, ``exponent`` dimensionless,
    ``saturation_param`` in (nJ)^-n. ``rss`` is the residual sum of squares
    of the fit that produced the parameters (0 for hand-built params).
    """

    amplitude: float
    exponent: float
    saturation_param: float
    amplitude_err: float = 0.0
    exponent_err: float = 0.0
    saturation_param_err: float = 0.0
    rss: float = 0.0

    def __post_init__(self):
        _require_positive(self, ["amplitude", "exponent"])
        _require_nonnegative(
            self,
            ["saturation_param", "amplitude_err", "exponent_err",
             "saturation_param_err", "rss"],
        )


_SIL_METHODS = ("circle", "ellipse", "profile")


@dataclass(frozen=True)
class SilFit:
    """Geometric result of a SIL-edge fit: center (µm), radius (µm).

    ``residual`` is a dimensionless goodness measure (RMS radial misfit over
    radius for the point fits). Method-specific extras such as ellipse
    eccentricity live in ``metadata``.
    """

    center: tuple
    radius: float
    method: str
    residual: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in _SIL_METHODS:
            raise SpecInvalid(f"method must be one of {_SIL_METHODS}")
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise SpecInvalid(f"radius must be > 0, got {self.radius}")
        object.__setattr__(
            self, "center", (float(self.center[0]), float(self.center[1]))
        )


_EMITTER_METHODS = ("gaussian2d", "circle")


@dataclass(frozen=True)
class EmitterFit:
    """Localized emitter spot: center and Gaussian sigma widths in µm."""

    center: tuple
    widths: tuple
    amplitude: float
    background: float
    method: str = "gaussian2d"

    def __post_init__(self):
        if self.method not in _EMITTER_METHODS:
            raise SpecInvalid(f"method must be one of {_EMITTER_METHODS}")
        if not all(np.isfinite(w) and w > 0 for w in self.widths):
            raise SpecInvalid(f"widths must be > 0, got {self.widths}")
        _require_positive(self, ["amplitude"])
        _require_nonnegative(self, ["background"])
        object.__setattr__(
            self, "center", (float(self.center[0]), float(self.center[1]))
        )
        object.__setattr__(
            self, "widths", (float(self.widths[0]), float(self.widths[1]))
        )


@dataclass(frozen=True)
class YieldEstimate:
    """Poisson expectation value of emitters per site with confidence bounds."""

    lam: float
    ci_low: float
    ci_high: float
    n_sites: int
    n_empty: int
    confidence: float = 0.95

    def __post_init__(self):
        if not (0 <= self.ci_low <= self.lam <= self.ci_high):
            raise SpecInvalid(
                f"need 0 <= ci_low <= lambda <= ci_high, got "
                f"({self.ci_low}, {self.lam}, {self.ci_high})"
            )
        if not (0 <= self.n_empty <= self.n_sites):
            raise SpecInvalid("need 0 <= n_empty <= n_sites")


@dataclass(frozen=True)
class RayleighFit:
    """Maximum-likelihood Rayleigh scale of radial displacements (µm)."""

    sigma: float
    n_samples: int
    log_likelihood: float

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise SpecInvalid(f"sigma must be > 0, got {self.sigma}")


@dataclass(frozen=True, eq=False)
class G2Histogram:
    """Normalized second-order correlation histogram.

    ``delays_ps`` are bin centers on a symmetric, strictly increasing grid
    about zero; ``normalized[i] = raw_coincidences[i] / normalization_constant``.
    """

    bin_width_ps: float
    delays_ps: np.ndarray
    normalized: np.ndarray
    raw_coincidences: np.ndarray
    normalization_constant: float

    def __post_init__(self):
        d = np.asarray(self.delays_ps, dtype=float)
        g = np.asarray(self.normalized, dtype=float)
        raw = np.asarray(self.raw_coincidences)
        if not (d.ndim == 1 and d.shape == g.shape == raw.shape):
            raise SpecInvalid("delays, normalized, raw must be parallel 1D arrays")
        if d.size == 0 or np.any(np.diff(d) <= 0):
            raise SpecInvalid("delays must be strictly increasing")
        if not np.allclose(d, -d[::-1], atol=1e-9):
            raise SpecInvalid("delay grid must be symmetric about zero")
        if self.normalization_constant <= 0:
            raise SpecInvalid("normalization_constant must be > 0")
        if np.any(raw < 0) or np.any(g < 0):
            raise SpecInvalid("coincidences must be >= 0")
        if not np.allclose(g, raw / self.normalization_constant, rtol=1e-12, atol=0):
            raise SpecInvalid("normalized values inconsistent with raw counts")
        object.__setattr__(self, "delays_ps", _freeze(d))
        object.__setattr__(self, "normalized", _freeze(g))
        object.__setattr__(self, "raw_coincidences", _freeze(raw.astype(np.int64)))

    @property
    def zero_index(self) -> int:
        """Index of the bin centered at zero delay."""
        return int(self.delays_ps.size // 2)

    @property
    def g2_zero(self) -> float:
        """Central-bin g2 value."""
        return float(self.normalized[self.zero_index])

    @property
    def g2_zero_err(self) -> float:
        """Poisson counting error of the central bin."""
        n = float(self.raw_coincidences[self.zero_index])
        return float(np.sqrt(n) / self.normalization_constant)


@dataclass(frozen=True)
class PowerSaturationFit:
    """Two-level power-saturation fit C(P) = i_sat*P/(P + p_sat) + slope*P.

    ``i_sat`` is the saturated count rate (counts/s), ``p_sat`` the
    saturation excitation power (mW), ``background_slope`` in counts/s/mW.
    """

    i_sat: float
    p_sat: float
    background_slope: float = 0.0
    i_sat_err: float = 0.0
    p_sat_err: float = 0.0
    background_slope_err: float = 0.0
    rss: float = 0.0

    def __post_init__(self):
        _require_positive(self, ["i_sat", "p_sat"])
        _require_nonnegative(
            self,
            ["background_slope", "i_sat_err", "p_sat_err",
             "background_slope_err", "rss"],
        )


@dataclass(frozen=True)
class ZplLine:
    label: str
    wavelength_nm: float
    tolerance_nm: float

    def __post_init__(self):
        if not self.label:
            raise SpecInvalid("catalog label must be nonempty")
        _require_positive(self, ["wavelength_nm", "tolerance_nm"])


@dataclass(frozen=True)
class ZplCatalog:
    """Ordered catalog of known zero-phonon lines; labels are unique."""

    entries: tuple

    def __post_init__(self):
        entries = tuple(
            e if isinstance(e, ZplLine) else ZplLine(*e) for e in self.entries
        )
        labels = [e.label for e in entries]
        if len(set(labels)) != len(labels):
            raise SpecInvalid("catalog labels must be unique")
        object.__setattr__(self, "entries", entries)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class EmitterSpec:
    """Ground-truth emitter for the simulator: 3D position (µm), peak
    expected counts, lateral and axial Gaussian sigmas (µm)."""

    position: tuple           # (x, y, z) µm
    peak: float               # expected counts at center
    sigma_lat: float          # µm
    sigma_ax: float           # µm

    def __post_init__(self):
        if len(self.position) != 3:
            raise SpecInvalid("emitter position must be (x, y, z)")
        _require_positive(self, ["peak", "sigma_lat", "sigma_ax"])
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))


_PLANES = ("xy", "xz")


@dataclass(frozen=True)
class SceneSpec:
    """Synthetic confocal scene: SIL ring plus emitters over two backgrounds.

    The rendered grid has ``rows x cols`` pixels at ``pixel_size`` µm pitch.
    ``plane`` selects a lateral ("xy", at height z = plane_offset) or axial
    ("xz", at depth y = plane_offset) section; the ring and the two
    background levels are drawn only on lateral sections. ``shot_noise``
    toggles per-pixel Poisson sampling of the expected counts.
    """

    sil_center: tuple          # (x, y) µm
    sil_radius: float          # µm
    ring_amplitude: float      # counts
    ring_width: float          # µm
    interface_background: float  # counts outside the SIL
    inner_background: float      # counts inside the SIL
    emitters: tuple            # of EmitterSpec
    pixel_size: float          # µm
    seed: int
    rows: int
    cols: int
    plane: str = "xy"
    plane_offset: float = 0.0
    shot_noise: bool = True
    label: str = ""

    def __post_init__(self):
        _require_positive(self, ["sil_radius", "ring_width", "pixel_size"])
        _require_nonnegative(
            self, ["ring_amplitude", "interface_background", "inner_background"]
        )
        if self.rows < 1 or self.cols < 1:
            raise SpecInvalid("rows and cols must be >= 1")
        if self.plane not in _PLANES:
            raise SpecInvalid(f"plane must be one of {_PLANES}")
        emitters = tuple(
            e if isinstance(e, EmitterSpec) else EmitterSpec(*e)
            for e in self.emitters
        )
        object.__setattr__(self, "emitters", emitters)
        object.__setattr__(
            self, "sil_center", (float(self.sil_center[0]), float(self.sil_center[1]))
        )
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True)
class HbtSpec:
    """Spec for a synthetic two-detector photon stream.

    ``n_emitters`` identical antibunched emitters at ``rate_per_emitter``
    counts/s each, plus a Poissonian background, split 50/50 onto two
    channels. ``antibunching_ns`` is the same-emitter dead time.
    """

    n_emitters: int
    rate_per_emitter: float    # counts/s
    background_rate: float     # counts/s
    antibunching_ns: float     # ns
    duration_s: float          # s
    seed: int

    def __post_init__(self):
        if self.n_emitters < 0:
            raise SpecInvalid("n_emitters must be >= 0")
        _require_nonnegative(self, ["rate_per_emitter", "background_rate"])
        _require_positive(self, ["antibunching_ns", "duration_s"])
        if self.n_emitters > 0 and self.rate_per_emitter > 0:
            # dead-time construction requires rate * dead_time < 1
            if self.rate_per_emitter * self.antibunching_ns * 1e-9 >= 1.0:
                raise SpecInvalid("rate_per_emitter * antibunching dead time >= 1")
        if self.n_emitters == 0 and self.background_rate == 0:
            raise SpecInvalid("no emitters and no background: empty stream")
        object.__setattr__(self, "seed", int(self.seed))
