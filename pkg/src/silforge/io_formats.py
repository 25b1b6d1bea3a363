"""Plain-text file formats and JSON reports.

Three line-oriented text formats, each with a versioned magic line:

``.plmap``   count maps     ``# plmap v1`` then rows/cols/pixel_size_um/label
             headers, a blank line, and one whitespace-separated row of
             counts per line.
``.hbt``     photon streams ``# hbt v1`` then duration_ps, followed by one
             ``channel,time_ps`` pair per line.
``.zplcat``  line catalogs  ``# zplcat v1`` then ``label = wavelength tol``
             lines; blank lines and ``#`` comments are skipped.

Floats are written with 17 significant digits so a write/read cycle is
bit-exact. Reports are JSON dicts with floats rounded to 12 significant
digits and NaN/inf rejected outright.
"""

from __future__ import annotations

import json
import math
import warnings
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ._version import __version__
from .errors import (
    ChannelOutOfRange,
    DimensionMismatch,
    EmptyStream,
    MalformedHeader,
    SpecInvalid,
    UnsortedStreamWarning,
)
from .models import PhotonStream, PLMap, ZplCatalog, ZplLine, validate_map

__all__ = [
    "read_map", "write_map", "read_stream", "write_stream",
    "read_catalog", "write_catalog",
    "make_report", "dumps_report", "write_report", "read_report",
]

MAP_MAGIC = "# plmap v1"
STREAM_MAGIC = "# hbt v1"
CATALOG_MAGIC = "# zplcat v1"

_PathLike = Union[str, Path]


def _read_lines(path: _PathLike):
    return Path(path).read_text().splitlines()


def _header_value(lines, index: int, key: str) -> str:
    """Value of a rigid `key=value` header expected at a fixed line."""
    if index >= len(lines):
        raise MalformedHeader(f"line {index + 1}: expected '{key}=...', got end of file")
    line = lines[index]
    if not line.startswith(key + "="):
        raise MalformedHeader(f"line {index + 1}: expected '{key}=...', got {line!r}")
    return line[len(key) + 1:]


def _header_int(lines, index: int, key: str) -> int:
    raw = _header_value(lines, index, key)
    try:
        return int(raw)
    except ValueError:
        raise MalformedHeader(f"line {index + 1}: {key} is not an integer: {raw!r}") from None


def _header_float(lines, index: int, key: str) -> float:
    raw = _header_value(lines, index, key)
    try:
        return float(raw)
    except ValueError:
        raise MalformedHeader(f"line {index + 1}: {key} is not a number: {raw!r}") from None


def _check_magic(lines, expected: str, path) -> None:
    if not lines or lines[0].strip() != expected:
        got = lines[0].strip() if lines else "<empty>"
        raise MalformedHeader(
            f"{path}: line 1: expected magic {expected!r}, got {got!r}"
        )


# -------------------------------------------------------------------- PL maps

def write_map(plmap: PLMap, path: _PathLike) -> None:
    out = [
        MAP_MAGIC,
        f"rows={plmap.rows}",
        f"cols={plmap.cols}",
        f"pixel_size_um={plmap.pixel_size:.17g}",
        f"label={plmap.origin_label}",
        "",
    ]
    for row in plmap.counts:
        out.append(" ".join(f"{v:.17g}" for v in row))
    Path(path).write_text("\n".join(out) + "\n")


def read_map(path: _PathLike) -> PLMap:
    lines = _read_lines(path)
    _check_magic(lines, MAP_MAGIC, path)
    rows = _header_int(lines, 1, "rows")
    cols = _header_int(lines, 2, "cols")
    pixel_size = _header_float(lines, 3, "pixel_size_um")
    label = _header_value(lines, 4, "label")
    if len(lines) < 6 or lines[5].strip() != "":
        raise MalformedHeader("line 6: expected blank separator line")

    data = []
    for offset, line in enumerate(lines[6:]):
        n_line = offset + 7
        if line.strip() == "":
            continue
        tokens = line.split()
        if len(tokens) != cols:
            raise DimensionMismatch(
                f"line {n_line}: expected {cols} values, got {len(tokens)}"
            )
        try:
            data.append([float(t) for t in tokens])
        except ValueError:
            raise MalformedHeader(f"line {n_line}: unparseable count value") from None
    if len(data) != rows:
        raise DimensionMismatch(
            f"expected {rows} data rows, found {len(data)}"
        )
    return validate_map(data, pixel_size, origin_label=label)


# --------------------------------------------------------------- HBT streams

def write_stream(stream: PhotonStream, path: _PathLike) -> None:
    out = [STREAM_MAGIC, f"duration_ps={stream.duration_ps}"]
    for c, t in zip(stream.channels, stream.times_ps):
        out.append(f"{c},{t}")
    Path(path).write_text("\n".join(out) + "\n")


def read_stream(path: _PathLike) -> PhotonStream:
    text = Path(path).read_text()
    if text.strip() == "":
        raise EmptyStream(f"{path}: empty stream file")
    lines = text.splitlines()
    _check_magic(lines, STREAM_MAGIC, path)
    duration_ps = _header_int(lines, 1, "duration_ps")

    channels = []
    times = []
    for offset, line in enumerate(lines[2:]):
        n_line = offset + 3
        if line.strip() == "":
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise MalformedHeader(
                f"line {n_line}: expected 'channel,time_ps', got {line!r}"
            )
        try:
            c = int(parts[0])
            t = int(parts[1])
        except ValueError:
            raise MalformedHeader(f"line {n_line}: unparseable event") from None
        if c not in (0, 1):
            raise ChannelOutOfRange(f"line {n_line}: channel {c} not in {{0, 1}}")
        channels.append(c)
        times.append(t)

    ch = np.asarray(channels, dtype=np.int8)
    ts = np.asarray(times, dtype=np.int64)
    if ts.size > 1 and np.any(np.diff(ts) < 0):
        warnings.warn(
            f"{path}: timestamps out of order; sorting",
            UnsortedStreamWarning,
            stacklevel=2,
        )
        order = np.argsort(ts, kind="stable")
        ch = ch[order]
        ts = ts[order]
    return PhotonStream(channels=ch, times_ps=ts, duration_ps=duration_ps)


# ------------------------------------------------------------- line catalogs

def write_catalog(catalog: ZplCatalog, path: _PathLike) -> None:
    out = [CATALOG_MAGIC]
    for line in catalog:
        out.append(
            f"{line.label} = {line.wavelength_nm:.17g} {line.tolerance_nm:.17g}"
        )
    Path(path).write_text("\n".join(out) + "\n")


def read_catalog(path: _PathLike) -> ZplCatalog:
    lines = _read_lines(path)
    _check_magic(lines, CATALOG_MAGIC, path)
    entries = []
    for offset, line in enumerate(lines[1:]):
        n_line = offset + 2
        stripped = line.strip()
        if stripped == "" or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise MalformedHeader(f"line {n_line}: expected 'label = wavelength tol'")
        label, _, rhs = stripped.partition("=")
        parts = rhs.split()
        if len(parts) != 2:
            raise MalformedHeader(
                f"line {n_line}: expected two numbers after '=', got {len(parts)}"
            )
        try:
            wavelength = float(parts[0])
            tolerance = float(parts[1])
        except ValueError:
            raise MalformedHeader(f"line {n_line}: unparseable number") from None
        entries.append(ZplLine(label=label.strip(), wavelength_nm=wavelength,
                               tolerance_nm=tolerance))
    return ZplCatalog(entries=tuple(entries))


# ------------------------------------------------------------------- reports

def _round_floats(obj):
    """Recursively coerce to JSON-safe values, rounding floats to 12
    significant digits; NaN and infinities are rejected."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if not math.isfinite(f):
            raise SpecInvalid("report values must be finite")
        return float(f"{f:.12g}")
    if isinstance(obj, np.ndarray):
        return _round_floats(obj.tolist())
    if isinstance(obj, dict):
        return {str(k): _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    raise SpecInvalid(f"unsupported report value type: {type(obj).__name__}")


def make_report(tool: str, inputs: dict, results: dict,
                ground_truth: Optional[dict] = None) -> dict:
    """Assemble the standard report dict emitted by every CLI command."""
    report = {
        "tool": tool,
        "version": __version__,
        "inputs": _round_floats(inputs),
        "results": _round_floats(results),
    }
    if ground_truth is not None:
        report["ground_truth"] = _round_floats(ground_truth)
    return report


def dumps_report(report: dict) -> str:
    return json.dumps(_round_floats(report), indent=2, allow_nan=False)


def write_report(report: dict, path: _PathLike) -> None:
    Path(path).write_text(dumps_report(report) + "\n")


def read_report(path: _PathLike) -> dict:
    with open(path) as fh:
        return json.load(fh)
