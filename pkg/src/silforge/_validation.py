"""Small input-validation helpers shared across modules."""

from __future__ import annotations

import numpy as np

from .errors import InsufficientData, SpecInvalid


def as_float_array(x, name: str, ndim: int = 1) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim != ndim:
        raise SpecInvalid(f"{name} must be {ndim}D, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise SpecInvalid(f"{name} contains non-finite values")
    return a


def as_points_array(points, name: str = "points") -> np.ndarray:
    """Coerce to an (n, 2) float array of finite (x, y) pairs."""
    a = np.asarray(points, dtype=float)
    if a.ndim != 2 or a.shape[1] != 2:
        raise SpecInvalid(f"{name} must be a sequence of (x, y) pairs")
    if not np.all(np.isfinite(a)):
        raise SpecInvalid(f"{name} contains non-finite values")
    return a


def check_positive(value, name: str) -> float:
    v = float(value)
    if not (np.isfinite(v) and v > 0):
        raise SpecInvalid(f"{name} must be > 0, got {value}")
    return v


def check_nonnegative(value, name: str) -> float:
    v = float(value)
    if not (np.isfinite(v) and v >= 0):
        raise SpecInvalid(f"{name} must be >= 0, got {value}")
    return v


def check_min_samples(n: int, minimum: int, what: str):
    if n < minimum:
        raise InsufficientData(f"{what}: need >= {minimum} samples, got {n}")


def unpack_samples(samples, n_cols_min: int, n_cols_max: int, what: str):
    """Split an iterable of fixed-width tuples into column arrays.

    Accepts rows of any width in [n_cols_min, n_cols_max] as long as all
    rows agree; returns one float array per column (missing trailing
    columns come back as None).
    """
    rows = [tuple(map(float, r)) for r in samples]
    if not rows:
        raise InsufficientData(f"{what}: no samples")
    width = len(rows[0])
    if not (n_cols_min <= width <= n_cols_max):
        raise SpecInvalid(
            f"{what}: rows must have {n_cols_min}..{n_cols_max} fields, got {width}"
        )
    if any(len(r) != width for r in rows):
        raise SpecInvalid(f"{what}: rows have inconsistent field counts")
    arr = np.asarray(rows, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise SpecInvalid(f"{what}: non-finite sample values")
    cols = [arr[:, i] for i in range(width)]
    cols += [None] * (n_cols_max - width)
    return cols
