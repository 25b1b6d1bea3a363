"""Seeded Monte Carlo generators: synthetic maps, photon streams, write
arrays, and saturation sweeps — the ground-truth oracle for every analysis
operation.

All generators are pure functions of their spec including the seed; equal
specs give bit-identical output. Substreams are split off a single seed
sequence per spec, so per-emitter generation could run in parallel without
changing the result.
"""

from __future__ import annotations

import math
from typing import Optional, Tuple

import numpy as np

from ._validation import as_float_array, check_nonnegative
from .errors import SpecInvalid
from .models import (
    EmitterSpec,
    HbtSpec,
    PhotonStream,
    PLMap,
    SaturationFitParams,
    SceneSpec,
)
from .physics import saturation_model

__all__ = [
    "render_expected",
    "render_map",
    "simulate_hbt",
    "simulate_write_array",
    "simulate_saturation_sweep",
    "scene_spec_from_dict",
    "scene_spec_to_dict",
    "hbt_spec_from_dict",
    "hbt_spec_to_dict",
]


# ------------------------------------------------------------------ PL maps

def render_expected(spec: SceneSpec) -> np.ndarray:
    """Noise-free expected counts of a scene.

    Lateral ("xy") sections: inner/interface background split at the SIL
    radius, a Gaussian ring shell at the radius, plus a 3D Gaussian per
    emitter sampled at height z = plane_offset. Axial ("xz") sections
    sample the plane y = plane_offset with a flat inner background and the
    emitters only (rows run along z, columns along x).
    """
    xs = np.arange(spec.cols) * spec.pixel_size
    ys = np.arange(spec.rows) * spec.pixel_size
    gx, gy = np.meshgrid(xs, ys)

    if spec.plane == "xy":
        cx, cy = spec.sil_center
        r = np.hypot(gx - cx, gy - cy)
        expected = np.where(r < spec.sil_radius,
                            spec.inner_background, spec.interface_background)
        expected = expected + spec.ring_amplitude * np.exp(
            -((r - spec.sil_radius) ** 2) / (2.0 * spec.ring_width**2)
        )
        for em in spec.emitters:
            ex, ey, ez = em.position
            dz = spec.plane_offset - ez
            expected = expected + em.peak * np.exp(
                -((gx - ex) ** 2 + (gy - ey) ** 2) / (2.0 * em.sigma_lat**2)
                - dz**2 / (2.0 * em.sigma_ax**2)
            )
    else:  # xz section: gy is the axial coordinate
        expected = np.full((spec.rows, spec.cols), float(spec.inner_background))
        for em in spec.emitters:
            ex, ey, ez = em.position
            dy = spec.plane_offset - ey
            expected = expected + em.peak * np.exp(
                -((gx - ex) ** 2 + dy**2) / (2.0 * em.sigma_lat**2)
                - ((gy - ez) ** 2) / (2.0 * em.sigma_ax**2)
            )
    return expected


def render_map(spec: SceneSpec) -> Tuple[PLMap, dict]:
    """Render a scene to a map plus a ground-truth manifest.

    With ``shot_noise`` the expected counts are Poisson-sampled per pixel;
    otherwise they are returned exactly. The manifest records every true
    parameter of the scene under ``ground_truth``.
    """
    expected = render_expected(spec)
    if spec.shot_noise:
        rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
        counts = rng.poisson(expected).astype(float)
    else:
        counts = expected
    plmap = PLMap(
        rows=spec.rows,
        cols=spec.cols,
        pixel_size=spec.pixel_size,
        counts=counts,
        origin_label=spec.label,
    )
    from .io_formats import make_report

    manifest = make_report(
        tool="simulate-map",
        inputs={"seed": spec.seed, "shot_noise": spec.shot_noise},
        results={
            "rows": spec.rows,
            "cols": spec.cols,
            "total_counts": float(counts.sum()),
            "max_count": float(counts.max()),
        },
        ground_truth=scene_spec_to_dict(spec),
    )
    return plmap, manifest


# -------------------------------------------------------------- HBT streams

def _emitter_arrivals(rng, rate: float, duration_s: float, dead_time_s: float):
    """Antibunched arrivals on [0, duration): renewal process with gap
    dead_time + Exp(1/lam_raw), lam_raw = r/(1 - r*dead_time), which keeps
    the mean rate exactly r while forbidding same-emitter pairs closer
    than the dead time."""
    lam_raw = rate / (1.0 - rate * dead_time_s)
    mean_events = rate * duration_s
    n_draw = int(mean_events + 10.0 * math.sqrt(mean_events + 1.0) + 10.0)
    gaps = dead_time_s + rng.exponential(1.0 / lam_raw, n_draw)
    # the first arrival carries no dead-time history
    gaps[0] = rng.exponential(1.0 / lam_raw)
    times = np.cumsum(gaps)
    while times[-1] < duration_s:
        extra = dead_time_s + rng.exponential(1.0 / lam_raw, max(16, n_draw // 10))
        times = np.concatenate([times, times[-1] + np.cumsum(extra)])
    return times[times < duration_s]


def simulate_hbt(spec: HbtSpec) -> PhotonStream:
    """Two-channel photon stream of N identical antibunched emitters plus
    Poissonian background, split 50/50 by a beamsplitter.

    Deterministic given the seed: every emitter, the background, and the
    channel assignment draw from independent substreams of one seed
    sequence, so the output does not depend on generation order.
    """
    duration_ps = int(round(spec.duration_s * 1e12))
    root = np.random.SeedSequence(spec.seed)
    children = root.spawn(spec.n_emitters + 2)

    parts = []
    for i in range(spec.n_emitters):
        if spec.rate_per_emitter == 0:
            break
        rng = np.random.default_rng(children[i])
        parts.append(
            _emitter_arrivals(
                rng,
                spec.rate_per_emitter,
                spec.duration_s,
                spec.antibunching_ns * 1e-9,
            )
        )
    if spec.background_rate > 0:
        rng = np.random.default_rng(children[spec.n_emitters])
        n_bg = int(rng.poisson(spec.background_rate * spec.duration_s))
        parts.append(np.sort(rng.uniform(0.0, spec.duration_s, n_bg)))

    if parts:
        times_s = np.sort(np.concatenate(parts), kind="stable")
    else:
        times_s = np.empty(0)
    ch_rng = np.random.default_rng(children[spec.n_emitters + 1])
    channels = ch_rng.integers(0, 2, size=times_s.size).astype(np.int8)
    times_ps = np.floor(times_s * 1e12).astype(np.int64)
    return PhotonStream(
        channels=channels, times_ps=times_ps, duration_ps=duration_ps
    )


# ------------------------------------------------------------- write arrays

def simulate_write_array(n_sites: int, lam: float, seed: int) -> np.ndarray:
    """Independent Poisson(lam) emitter count per written site."""
    if n_sites < 1:
        raise SpecInvalid("n_sites must be >= 1")
    check_nonnegative(lam, "lambda")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    return rng.poisson(lam, n_sites).astype(np.int64)


# --------------------------------------------------------- saturation sweeps

def simulate_saturation_sweep(
    params: SaturationFitParams,
    energies_nj,
    noise_fraction: float,
    seed: int,
) -> np.ndarray:
    """Saturation-model sweep with multiplicative Gaussian noise.

    Returns an (n, 3) array of (E_nj, counts, sigma) rows with
    ``sigma = noise_fraction * model``; at ``noise_fraction = 0`` the
    counts equal the model exactly (and the sigma column is zero — drop it
    before fitting noiseless data).
    """
    e = as_float_array(energies_nj, "energies_nj")
    check_nonnegative(noise_fraction, "noise_fraction")
    model = np.asarray(saturation_model(e, params), dtype=float)
    sigma = noise_fraction * model
    if noise_fraction > 0:
        rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
        values = model * (1.0 + noise_fraction * rng.standard_normal(e.size))
    else:
        values = model.copy()
    return np.column_stack([e, values, sigma])


# ------------------------------------------------------------- dict plumbing

_SCENE_REQUIRED = {
    "sil_center", "sil_radius", "ring_amplitude", "ring_width",
    "interface_background", "inner_background", "emitters", "pixel_size",
    "rows", "cols",
}
_SCENE_OPTIONAL = {
    "seed": None, "plane": "xy", "plane_offset": 0.0, "shot_noise": True,
    "label": "",
}


def scene_spec_from_dict(data: dict, seed: Optional[int] = None) -> SceneSpec:
    """Build a SceneSpec from parsed JSON; ``seed`` overrides the file's."""
    unknown = set(data) - _SCENE_REQUIRED - set(_SCENE_OPTIONAL)
    if unknown:
        raise SpecInvalid(f"unknown scene keys: {sorted(unknown)}")
    missing = _SCENE_REQUIRED - set(data)
    if missing:
        raise SpecInvalid(f"missing scene keys: {sorted(missing)}")
    merged = {**_SCENE_OPTIONAL, **data}
    if seed is not None:
        merged["seed"] = seed
    if merged["seed"] is None:
        raise SpecInvalid("scene needs a seed (file key or --seed)")
    emitters = tuple(
        EmitterSpec(
            position=tuple(em["position"]),
            peak=em["peak"],
            sigma_lat=em["sigma_lat"],
            sigma_ax=em["sigma_ax"],
        )
        for em in merged["emitters"]
    )
    return SceneSpec(
        sil_center=tuple(merged["sil_center"]),
        sil_radius=merged["sil_radius"],
        ring_amplitude=merged["ring_amplitude"],
        ring_width=merged["ring_width"],
        interface_background=merged["interface_background"],
        inner_background=merged["inner_background"],
        emitters=emitters,
        pixel_size=merged["pixel_size"],
        seed=merged["seed"],
        rows=merged["rows"],
        cols=merged["cols"],
        plane=merged["plane"],
        plane_offset=merged["plane_offset"],
        shot_noise=bool(merged["shot_noise"]),
        label=merged["label"],
    )


def scene_spec_to_dict(spec: SceneSpec) -> dict:
    return {
        "sil_center": list(spec.sil_center),
        "sil_radius": spec.sil_radius,
        "ring_amplitude": spec.ring_amplitude,
        "ring_width": spec.ring_width,
        "interface_background": spec.interface_background,
        "inner_background": spec.inner_background,
        "emitters": [
            {
                "position": list(em.position),
                "peak": em.peak,
                "sigma_lat": em.sigma_lat,
                "sigma_ax": em.sigma_ax,
            }
            for em in spec.emitters
        ],
        "pixel_size": spec.pixel_size,
        "seed": spec.seed,
        "rows": spec.rows,
        "cols": spec.cols,
        "plane": spec.plane,
        "plane_offset": spec.plane_offset,
        "shot_noise": spec.shot_noise,
        "label": spec.label,
    }


_HBT_REQUIRED = {
    "n_emitters", "rate_per_emitter", "background_rate", "antibunching_ns",
    "duration_s",
}


def hbt_spec_from_dict(data: dict, seed: Optional[int] = None) -> HbtSpec:
    unknown = set(data) - _HBT_REQUIRED - {"seed"}
    if unknown:
        raise SpecInvalid(f"unknown hbt keys: {sorted(unknown)}")
    missing = _HBT_REQUIRED - set(data)
    if missing:
        raise SpecInvalid(f"missing hbt keys: {sorted(missing)}")
    resolved = seed if seed is not None else data.get("seed")
    if resolved is None:
        raise SpecInvalid("hbt spec needs a seed (file key or --seed)")
    return HbtSpec(
        n_emitters=int(data["n_emitters"]),
        rate_per_emitter=data["rate_per_emitter"],
        background_rate=data["background_rate"],
        antibunching_ns=data["antibunching_ns"],
        duration_s=data["duration_s"],
        seed=resolved,
    )


def hbt_spec_to_dict(spec: HbtSpec) -> dict:
    return {
        "n_emitters": spec.n_emitters,
        "rate_per_emitter": spec.rate_per_emitter,
        "background_rate": spec.background_rate,
        "antibunching_ns": spec.antibunching_ns,
        "duration_s": spec.duration_s,
        "seed": spec.seed,
    }
