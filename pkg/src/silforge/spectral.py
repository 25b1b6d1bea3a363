"""Zero-phonon line identification against a catalog of known lines."""

from __future__ import annotations

from typing import NamedTuple, Optional

import numpy as np

from ._validation import as_float_array
from .constants import DEFAULT_ZPL_CATALOG, INSTRUMENT_WINDOW_NM
from .errors import InsufficientData, SpecInvalid
from .models import ZplCatalog

__all__ = ["ZplMatch", "classify_zpl", "peak_wavelength"]


class ZplMatch(NamedTuple):
    """Outcome of matching a measured wavelength against a line catalog."""

    label: Optional[str]
    distance_nm: Optional[float]
    in_window: bool

    @property
    def matched(self) -> bool:
        return self.label is not None


def classify_zpl(
    wavelength_nm: float,
    catalog: ZplCatalog = DEFAULT_ZPL_CATALOG,
    window_nm=INSTRUMENT_WINDOW_NM,
) -> ZplMatch:
    """Match a measured peak wavelength to the nearest catalog line.

    A line matches when the absolute distance is within that line's
    tolerance; ties go to the smaller distance. ``in_window`` reports
    whether the wavelength falls inside the instrument passband at all,
    independent of whether any line matched.
    """
    wl = float(wavelength_nm)
    if not np.isfinite(wl) or wl <= 0:
        raise SpecInvalid("wavelength must be positive and finite")
    lo, hi = window_nm
    in_window = lo <= wl <= hi

    best_label = None
    best_distance = None
    for line in catalog:
        d = abs(wl - line.wavelength_nm)
        if d <= line.tolerance_nm and (best_distance is None or d < best_distance):
            best_label = line.label
            best_distance = d
    return ZplMatch(label=best_label, distance_nm=best_distance, in_window=in_window)


def peak_wavelength(wavelengths_nm, intensities) -> float:
    """Wavelength of the highest sample of a spectrum (no interpolation)."""
    wl = as_float_array(wavelengths_nm, "wavelengths_nm")
    inten = as_float_array(intensities, "intensities")
    if wl.size != inten.size:
        raise SpecInvalid("wavelengths and intensities differ in length")
    if wl.size == 0:
        raise InsufficientData("empty spectrum")
    return float(wl[int(np.argmax(inten))])
