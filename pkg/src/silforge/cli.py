"""Command-line interface.

Every command emits a JSON report ({tool, version, inputs, results}) to
stdout or to ``--out``; simulation commands write the data artifact to
``--out`` and the ground-truth manifest to ``--manifest`` instead. Exit
codes: 0 success, 1 analysis error (one message on stderr), 2 usage error.

``--plot-data DIR`` saves plottable curves as CSV files into DIR and lists
them in the report. ``g2`` and ``detect-sil`` accept ``--batch DIR`` to
process every ``*.hbt`` / ``*.plmap`` file in a directory concurrently,
writing ``<stem>.report.json`` next to each input; the thread count is
capped by the ``SILFORGE_THREADS`` environment variable (0 or unset picks
the CPU count).
"""

from __future__ import annotations

import functools
import json
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from ._version import __version__
from .constants import DEFAULT_MAGNIFICATION, DEFAULT_ZPL_CATALOG, FWHM_PER_SIGMA
from .errors import (
    AllSitesOccupied,
    DimensionMismatch,
    InsufficientData,
    MalformedHeader,
    SilforgeError,
)
from .image_analysis import (
    detect_sil,
    extract_ring_points,
    locate_emitter,
    magnification_correct,
)
from .io_formats import (
    dumps_report,
    make_report,
    read_catalog,
    read_map,
    read_report,
    read_stream,
    write_map,
    write_report,
    write_stream,
)
from .models import PowerSaturationFit, SilFit
from .photon_stats import (
    build_g2,
    classify_emitter_count,
    enhancement_factors,
    fit_power_saturation,
    g2_background_correct,
)
from .physics import effective_process_energy, fit_saturation_model, saturation_model
from .simulate import (
    hbt_spec_from_dict,
    hbt_spec_to_dict,
    render_map,
    scene_spec_from_dict,
    simulate_hbt,
    simulate_write_array,
)
from .spectral import classify_zpl
from .yield_stats import (
    displacement_stats,
    estimate_lambda_from_occupancy,
    fit_rayleigh,
    plan_pulse_energy,
)

_OUT_OPT = click.option(
    "--out", type=click.Path(dir_okay=False), default=None,
    help="Write the JSON report here instead of stdout.",
)
_PLOT_OPT = click.option(
    "--plot-data", "plot_dir", type=click.Path(file_okay=False), default=None,
    help="Directory for CSV plot data.",
)


def _silforge_errors(fn):
    """Convert analysis errors to exit code 1 with a clean message."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except SilforgeError as exc:
            raise click.ClickException(str(exc)) from exc

    return wrapper


def _emit(report: dict, out) -> None:
    if out is None:
        click.echo(dumps_report(report))
    else:
        write_report(report, out)


def _load_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _load_table(path, min_cols: int, max_cols: int) -> np.ndarray:
    """Numeric table from text: comma or whitespace separated, '#' comments."""
    rows = []
    width = None
    for n, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        tokens = stripped.replace(",", " ").split()
        try:
            values = [float(t) for t in tokens]
        except ValueError:
            raise MalformedHeader(f"{path}: line {n}: unparseable number") from None
        if not (min_cols <= len(values) <= max_cols):
            raise DimensionMismatch(
                f"{path}: line {n}: expected {min_cols}-{max_cols} columns, "
                f"got {len(values)}"
            )
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise DimensionMismatch(f"{path}: line {n}: ragged columns")
        rows.append(values)
    if not rows:
        raise InsufficientData(f"{path}: no data rows")
    return np.asarray(rows, dtype=float)


def _write_plot_csv(plot_dir, name: str, header: str, columns) -> str:
    """Write parallel columns as CSV under plot_dir; returns the path."""
    directory = Path(plot_dir)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / name
    lines = [f"# {header}"]
    for row in zip(*columns):
        lines.append(",".join(f"{v:.12g}" for v in row))
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def _parse_roi(value: str):
    parts = value.split(",")
    if len(parts) != 4:
        raise click.BadParameter("expected x0,y0,x1,y1")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise click.BadParameter("expected four numbers x0,y0,x1,y1") from None


def _worker_count() -> int:
    raw = os.environ.get("SILFORGE_THREADS", "0")
    try:
        cap = int(raw)
    except ValueError:
        cap = 0
    if cap <= 0:
        return os.cpu_count() or 1
    return cap


def _run_batch(directory, pattern: str, worker) -> None:
    paths = sorted(Path(directory).glob(pattern))
    if not paths:
        raise click.ClickException(f"no {pattern} files in {directory}")
    failures = 0
    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        futures = [(p, pool.submit(worker, p)) for p in paths]
        for path, future in futures:
            try:
                future.result()
                click.echo(f"{path.name}: ok")
            except SilforgeError as exc:
                failures += 1
                click.echo(f"{path.name}: {exc}", err=True)
    if failures:
        raise click.ClickException(f"{failures} of {len(paths)} inputs failed")


def _require_single_target(option_value, option_name: str, batch) -> None:
    if batch is None and option_value is None:
        raise click.UsageError(f"either {option_name} or --batch is required")
    if batch is not None and option_value is not None:
        raise click.UsageError(f"{option_name} and --batch are mutually exclusive")


@click.group(name="silforge")
@click.version_option(__version__, prog_name="silforge")
def main():
    """Laser-written quantum-emitter analysis toolkit."""


# ------------------------------------------------------------------ simulate

@main.command("simulate-map")
@click.option("--spec", "spec_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="Scene spec JSON.")
@click.option("--seed", type=int, required=True, help="RNG seed (overrides the file's).")
@click.option("--out", type=click.Path(dir_okay=False), required=True,
              help="Output map file (.plmap).")
@click.option("--manifest", "manifest_path", type=click.Path(dir_okay=False),
              default=None, help="Ground-truth manifest path (default: stdout).")
@_silforge_errors
def simulate_map_cmd(spec_path, seed, out, manifest_path):
    """Render a synthetic confocal map from a scene spec."""
    spec = scene_spec_from_dict(_load_json(spec_path), seed=seed)
    plmap, manifest = render_map(spec)
    write_map(plmap, out)
    _emit(manifest, manifest_path)


@main.command("simulate-hbt")
@click.option("--spec", "spec_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="HBT spec JSON.")
@click.option("--seed", type=int, required=True, help="RNG seed (overrides the file's).")
@click.option("--out", type=click.Path(dir_okay=False), required=True,
              help="Output stream file (.hbt).")
@click.option("--manifest", "manifest_path", type=click.Path(dir_okay=False),
              default=None, help="Ground-truth manifest path (default: stdout).")
@_silforge_errors
def simulate_hbt_cmd(spec_path, seed, out, manifest_path):
    """Simulate a two-channel photon timestamp stream."""
    hbt = hbt_spec_from_dict(_load_json(spec_path), seed=seed)
    stream = simulate_hbt(hbt)
    write_stream(stream, out)
    manifest = make_report(
        tool="simulate-hbt",
        inputs={"spec": str(spec_path), "seed": seed, "out": str(out)},
        results={
            "n_events": len(stream),
            "n_channel0": int(np.sum(stream.channels == 0)),
            "n_channel1": int(np.sum(stream.channels == 1)),
            "duration_ps": stream.duration_ps,
        },
        ground_truth=hbt_spec_to_dict(hbt),
    )
    _emit(manifest, manifest_path)


@main.command("simulate-array")
@click.option("--sites", type=int, required=True, help="Number of written sites.")
@click.option("--lambda", "lam", type=float, required=True,
              help="Mean emitters per site (Poisson).")
@click.option("--seed", type=int, required=True, help="RNG seed.")
@_OUT_OPT
@_silforge_errors
def simulate_array_cmd(sites, lam, seed, out):
    """Draw per-site emitter counts and re-estimate the yield from them."""
    counts = simulate_write_array(sites, lam, seed)
    n_empty = int(np.sum(counts == 0))
    results = {
        "counts": counts.tolist(),
        "n_sites": sites,
        "n_empty": n_empty,
        "n_single": int(np.sum(counts == 1)),
        "n_multi": int(np.sum(counts > 1)),
    }
    try:
        est = estimate_lambda_from_occupancy(sites, n_empty)
        results["lambda_hat"] = est.lam
        results["lambda_ci"] = [est.ci_low, est.ci_high]
    except AllSitesOccupied:
        results["lambda_hat"] = None
        results["lambda_ci"] = None
    report = make_report(
        tool="simulate-array",
        inputs={"sites": sites, "lambda": lam, "seed": seed},
        results=results,
        ground_truth={"lambda": lam},
    )
    _emit(report, out)


# ------------------------------------------------------------------- fitting

@main.command("fit-saturation")
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="CSV of E_nJ,counts[,sigma] rows.")
@_PLOT_OPT
@_OUT_OPT
@_silforge_errors
def fit_saturation_cmd(data_path, plot_dir, out):
    """Fit the pulse-energy saturation model and the process energy."""
    table = _load_table(data_path, 2, 3)
    params = fit_saturation_model(table)
    energy_ev, energy_err_ev = effective_process_energy(
        params.exponent, params.exponent_err
    )
    results = {
        "amplitude": params.amplitude,
        "amplitude_err": params.amplitude_err,
        "exponent": params.exponent,
        "exponent_err": params.exponent_err,
        "saturation_param": params.saturation_param,
        "saturation_param_err": params.saturation_param_err,
        "rss": params.rss,
        "process_energy_ev": energy_ev,
        "process_energy_err_ev": energy_err_ev,
    }
    if plot_dir is not None:
        grid = np.geomspace(table[:, 0].min(), table[:, 0].max(), 200)
        curve = np.asarray(saturation_model(grid, params))
        results["plot_files"] = [_write_plot_csv(
            plot_dir, f"{Path(data_path).stem}_saturation_curve.csv",
            "energy_nj,counts", (grid, curve),
        )]
    report = make_report(
        tool="fit-saturation", inputs={"data": str(data_path)}, results=results
    )
    _emit(report, out)


@main.command("fit-power-saturation")
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="CSV of power_mW,counts_per_s rows.")
@click.option("--fix-background", is_flag=True,
              help="Pin the linear background slope to zero.")
@_PLOT_OPT
@_OUT_OPT
@_silforge_errors
def fit_power_saturation_cmd(data_path, fix_background, plot_dir, out):
    """Fit emitter count-rate saturation versus excitation power."""
    table = _load_table(data_path, 2, 2)
    fit = fit_power_saturation(table, fix_background=fix_background)
    results = {
        "i_sat": fit.i_sat,
        "i_sat_err": fit.i_sat_err,
        "p_sat": fit.p_sat,
        "p_sat_err": fit.p_sat_err,
        "background_slope": fit.background_slope,
        "background_slope_err": fit.background_slope_err,
        "rss": fit.rss,
    }
    if plot_dir is not None:
        grid = np.linspace(0.0, table[:, 0].max(), 200)
        curve = fit.i_sat * grid / (grid + fit.p_sat) + fit.background_slope * grid
        results["plot_files"] = [_write_plot_csv(
            plot_dir, f"{Path(data_path).stem}_power_curve.csv",
            "power_mw,counts_per_s", (grid, curve),
        )]
    report = make_report(
        tool="fit-power-saturation",
        inputs={"data": str(data_path), "fix_background": fix_background},
        results=results,
    )
    _emit(report, out)


@main.command("enhance")
@click.option("--sil", "sil_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="fit-power-saturation report of the SIL emitter.")
@click.option("--bulk", "bulk_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="fit-power-saturation report of the bulk emitter.")
@_OUT_OPT
@_silforge_errors
def enhance_cmd(sil_path, bulk_path, out):
    """Brightness and excitation gain of a SIL emitter over a bulk one."""
    factors = enhancement_factors(
        _power_fit_from_report(sil_path), _power_fit_from_report(bulk_path)
    )
    report = make_report(
        tool="enhance",
        inputs={"sil": str(sil_path), "bulk": str(bulk_path)},
        results=dict(factors._asdict()),
    )
    _emit(report, out)


def _power_fit_from_report(path) -> PowerSaturationFit:
    results = read_report(path).get("results", {})
    try:
        return PowerSaturationFit(
            i_sat=results["i_sat"],
            p_sat=results["p_sat"],
            background_slope=results.get("background_slope", 0.0),
            i_sat_err=results.get("i_sat_err", 0.0),
            p_sat_err=results.get("p_sat_err", 0.0),
            background_slope_err=results.get("background_slope_err", 0.0),
        )
    except KeyError as exc:
        raise MalformedHeader(
            f"{path}: not a fit-power-saturation report (missing {exc})"
        ) from None


# ------------------------------------------------------------------- imaging

def _sil_fit_dict(fit: SilFit) -> dict:
    out = {
        "center_um": list(fit.center),
        "radius_um": fit.radius,
        "method": fit.method,
        "residual": fit.residual,
    }
    out.update(fit.metadata)
    return out


def _detect_sil_report(path, method: str, plot_dir) -> dict:
    plmap = read_map(path)
    result = detect_sil(plmap, method=method)
    if isinstance(result, dict):
        results = {name: _sil_fit_dict(fit) for name, fit in result.items()}
    else:
        results = _sil_fit_dict(result)
    if plot_dir is not None:
        points = extract_ring_points(plmap)
        results["plot_files"] = [_write_plot_csv(
            plot_dir, f"{Path(path).stem}_ring_points.csv",
            "x_um,y_um", (points[:, 0], points[:, 1]),
        )]
    return make_report(
        tool="detect-sil",
        inputs={"map": str(path), "method": method},
        results=results,
    )


@main.command("detect-sil")
@click.option("--map", "map_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Input map (.plmap).")
@click.option("--method", type=click.Choice(["circle", "ellipse", "profile", "all"]),
              default="circle", show_default=True)
@click.option("--batch", "batch_dir", type=click.Path(exists=True, file_okay=False),
              default=None, help="Process every *.plmap in this directory instead.")
@_PLOT_OPT
@_OUT_OPT
@_silforge_errors
def detect_sil_cmd(map_path, method, batch_dir, plot_dir, out):
    """Locate the SIL footprint in a confocal map."""
    _require_single_target(map_path, "--map", batch_dir)
    if batch_dir is not None:
        def worker(path: Path) -> None:
            write_report(
                _detect_sil_report(path, method, plot_dir),
                path.with_suffix(".report.json"),
            )

        _run_batch(batch_dir, "*.plmap", worker)
        return
    _emit(_detect_sil_report(Path(map_path), method, plot_dir), out)


@main.command("locate-emitter")
@click.option("--map", "map_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="Input map (.plmap).")
@click.option("--roi", required=True, metavar="X0,Y0,X1,Y1",
              help="Search box in µm.")
@_OUT_OPT
@_silforge_errors
def locate_emitter_cmd(map_path, roi, out):
    """Fit one emitter spot inside an ROI to sub-pixel precision."""
    box = _parse_roi(roi)
    fit = locate_emitter(read_map(map_path), box)
    results = {
        "center_um": list(fit.center),
        "sigma_um": list(fit.widths),
        "fwhm_nm": [w * FWHM_PER_SIGMA * 1e3 for w in fit.widths],
        "amplitude": fit.amplitude,
        "background": fit.background,
        "method": fit.method,
    }
    report = make_report(
        tool="locate-emitter",
        inputs={"map": str(map_path), "roi": list(box)},
        results=results,
    )
    _emit(report, out)


def _center_from_report(path, kind: str):
    results = read_report(path).get("results", {})
    if "center_um" in results:
        return results["center_um"]
    # method=all reports nest one block per fit method
    for block in results.values():
        if isinstance(block, dict) and "center_um" in block:
            return block["center_um"]
    raise MalformedHeader(f"{path}: no center_um in {kind} report")


@main.command("displace")
@click.option("--sil", "sil_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="detect-sil report.")
@click.option("--emitter", "emitter_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="locate-emitter report.")
@click.option("--magnification", type=float, default=DEFAULT_MAGNIFICATION,
              show_default=True, help="Apparent-to-true demagnification factor.")
@_OUT_OPT
@_silforge_errors
def displace_cmd(sil_path, emitter_path, magnification, out):
    """Magnification-corrected emitter offset from the SIL center."""
    sil_center = _center_from_report(sil_path, "detect-sil")
    emitter_center = _center_from_report(emitter_path, "locate-emitter")
    raw = (emitter_center[0] - sil_center[0], emitter_center[1] - sil_center[1])
    dx, dy = magnification_correct(raw, magnification)
    report = make_report(
        tool="displace",
        inputs={
            "sil": str(sil_path),
            "emitter": str(emitter_path),
            "magnification": magnification,
        },
        results={
            "dx_um": dx,
            "dy_um": dy,
            "radial_um": float(np.hypot(dx, dy)),
        },
    )
    _emit(report, out)


# ------------------------------------------------------------------- photons

def _g2_report(path, bin_ps: float, max_delay_ps: float, rho, plot_dir) -> dict:
    stream = read_stream(path)
    hist = build_g2(stream, bin_ps, max_delay_ps)
    g2_zero = hist.g2_zero
    results = {
        "g2_zero": g2_zero,
        "g2_zero_err": hist.g2_zero_err,
        "bin_ps": bin_ps,
        "n_bins": int(hist.delays_ps.size),
        "total_pairs": int(hist.raw_coincidences.sum()),
    }
    decisive = g2_zero
    if rho is not None:
        corrected = g2_background_correct(g2_zero, rho)
        results["rho"] = rho
        results["g2_zero_corrected"] = corrected.value
        results["correction_clamped"] = corrected.clamped
        decisive = corrected.value
    verdict = classify_emitter_count(decisive)
    results["classification"] = verdict.kind
    results["n_emitters_estimate"] = verdict.n_estimate
    if plot_dir is not None:
        results["plot_files"] = [_write_plot_csv(
            plot_dir, f"{Path(path).stem}_g2.csv",
            "delay_ps,g2,raw_coincidences",
            (hist.delays_ps, hist.normalized, hist.raw_coincidences),
        )]
    return make_report(
        tool="g2",
        inputs={
            "stream": str(path),
            "bin_ps": bin_ps,
            "max_delay_ps": max_delay_ps,
        },
        results=results,
    )


@main.command("g2")
@click.option("--stream", "stream_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Input stream (.hbt).")
@click.option("--bin-ps", type=float, required=True, help="Histogram bin width (ps).")
@click.option("--max-delay-ps", type=float, required=True,
              help="Largest |delay| histogrammed (ps).")
@click.option("--rho", type=float, default=None,
              help="Signal fraction S/(S+B) for background correction.")
@click.option("--batch", "batch_dir", type=click.Path(exists=True, file_okay=False),
              default=None, help="Process every *.hbt in this directory instead.")
@_PLOT_OPT
@_OUT_OPT
@_silforge_errors
def g2_cmd(stream_path, bin_ps, max_delay_ps, rho, batch_dir, plot_dir, out):
    """Zero-delay photon correlation and emitter-count verdict."""
    _require_single_target(stream_path, "--stream", batch_dir)
    if batch_dir is not None:
        def worker(path: Path) -> None:
            write_report(
                _g2_report(path, bin_ps, max_delay_ps, rho, plot_dir),
                path.with_suffix(".report.json"),
            )

        _run_batch(batch_dir, "*.hbt", worker)
        return
    _emit(_g2_report(Path(stream_path), bin_ps, max_delay_ps, rho, plot_dir), out)


# ----------------------------------------------------------------- statistics

@main.command("rayleigh")
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="CSV of dx_um,dy_um displacement rows.")
@_OUT_OPT
@_silforge_errors
def rayleigh_cmd(data_path, out):
    """Displacement statistics and Rayleigh scale of (dx, dy) data."""
    table = _load_table(data_path, 2, 2)
    stats = displacement_stats(table)
    fit = fit_rayleigh(stats.radial)
    report = make_report(
        tool="rayleigh",
        inputs={"data": str(data_path)},
        results={
            "mean_um": list(stats.mean),
            "std_um": list(stats.std),
            "sigma_um": fit.sigma,
            "n_samples": fit.n_samples,
            "log_likelihood": fit.log_likelihood,
        },
    )
    _emit(report, out)


@main.command("plan-yield")
@click.option("--curve", "curve_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="CSV of energy_nJ,lambda calibration rows.")
@click.option("--max-multi", type=float, required=True,
              help="Maximum tolerated multi-emitter fraction among created sites.")
@_OUT_OPT
@_silforge_errors
def plan_yield_cmd(curve_path, max_multi, out):
    """Pick the writing energy maximizing single-emitter probability."""
    curve = _load_table(curve_path, 2, 2)
    plan = plan_pulse_energy(curve, max_multi)
    report = make_report(
        tool="plan-yield",
        inputs={"curve": str(curve_path), "max_multi": max_multi},
        results={
            "energy_nj": plan.energy,
            "lambda": plan.lam,
            "p_zero": plan.outcomes.p_zero,
            "p_one": plan.outcomes.p_one,
            "p_multi": plan.outcomes.p_multi,
            "multi_fraction": plan.multi_fraction,
            "constraint_met": plan.constraint_met,
        },
    )
    _emit(report, out)


@main.command("classify-zpl")
@click.option("--wavelength-nm", type=float, required=True,
              help="Measured ZPL wavelength (nm).")
@click.option("--catalog", "catalog_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Line catalog (.zplcat); defaults to the built-in one.")
@_OUT_OPT
@_silforge_errors
def classify_zpl_cmd(wavelength_nm, catalog_path, out):
    """Match a ZPL wavelength against a line catalog."""
    catalog = read_catalog(catalog_path) if catalog_path else DEFAULT_ZPL_CATALOG
    match = classify_zpl(wavelength_nm, catalog)
    report = make_report(
        tool="classify-zpl",
        inputs={
            "wavelength_nm": wavelength_nm,
            "catalog": str(catalog_path) if catalog_path else "builtin",
        },
        results={
            "label": match.label,
            "distance_nm": match.distance_nm,
            "in_window": match.in_window,
            "matched": match.matched,
        },
    )
    _emit(report, out)


if __name__ == "__main__":
    main()
