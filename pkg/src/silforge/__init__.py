"""Analysis toolkit for laser-written quantum emitters in solid
immersion lenses: write-threshold physics, Poisson yield statistics,
photon correlations, and sub-diffraction image registration, plus seeded
simulators that generate every input the analyses consume.
"""

from ._version import __version__
from .constants import (
    DEFAULT_MAGNIFICATION,
    DEFAULT_MATERIAL,
    DEFAULT_ZPL_CATALOG,
    FWHM_PER_SIGMA,
    PLANAR_BEAM,
    SIL_BEAM,
)
from .errors import SilforgeError
from .image_analysis import (
    detect_sil,
    detect_sil_profile,
    emitter_sil_displacement,
    extract_psf_widths,
    extract_ring_points,
    fit_circle_algebraic,
    fit_ellipse,
    fit_gaussian2d,
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
    write_catalog,
    write_map,
    write_report,
    write_stream,
)
from .models import (
    BeamParams,
    EmitterFit,
    EmitterSpec,
    G2Histogram,
    HbtSpec,
    MaterialConstants,
    PhotonStream,
    PLMap,
    PowerSaturationFit,
    RayleighFit,
    SaturationFitParams,
    SceneSpec,
    SilFit,
    YieldEstimate,
    ZplCatalog,
    ZplLine,
    validate_map,
)
from .photon_stats import (
    build_g2,
    classify_emitter_count,
    enhancement_factors,
    fit_power_saturation,
    g2_background_correct,
    mix_g2_with_background,
)
from .physics import (
    effective_process_energy,
    fit_saturation_model,
    keldysh_intensity_threshold,
    saturation_model,
    threshold_pulse_energy,
)
from .simulate import (
    hbt_spec_from_dict,
    render_expected,
    render_map,
    scene_spec_from_dict,
    simulate_hbt,
    simulate_saturation_sweep,
    simulate_write_array,
)
from .spectral import classify_zpl, peak_wavelength
from .yield_stats import (
    displacement_stats,
    estimate_lambda_from_occupancy,
    fit_rayleigh,
    plan_pulse_energy,
    poisson_pmf,
)

__all__ = [
    "__version__",
    # constants
    "DEFAULT_MAGNIFICATION", "DEFAULT_MATERIAL", "DEFAULT_ZPL_CATALOG",
    "FWHM_PER_SIGMA", "PLANAR_BEAM", "SIL_BEAM",
    # errors
    "SilforgeError",
    # models
    "BeamParams", "EmitterFit", "EmitterSpec", "G2Histogram", "HbtSpec",
    "MaterialConstants", "PhotonStream", "PLMap", "PowerSaturationFit",
    "RayleighFit", "SaturationFitParams", "SceneSpec", "SilFit",
    "YieldEstimate", "ZplCatalog", "ZplLine", "validate_map",
    # physics
    "keldysh_intensity_threshold", "threshold_pulse_energy",
    "saturation_model", "fit_saturation_model", "effective_process_energy",
    # yield statistics
    "poisson_pmf", "estimate_lambda_from_occupancy", "plan_pulse_energy",
    "displacement_stats", "fit_rayleigh",
    # photon statistics
    "build_g2", "g2_background_correct", "mix_g2_with_background",
    "classify_emitter_count", "fit_power_saturation", "enhancement_factors",
    # imaging
    "fit_circle_algebraic", "fit_ellipse", "extract_ring_points",
    "detect_sil", "detect_sil_profile", "fit_gaussian2d", "locate_emitter",
    "magnification_correct", "emitter_sil_displacement",
    "extract_psf_widths",
    # spectral
    "classify_zpl", "peak_wavelength",
    # simulation
    "render_expected", "render_map", "simulate_hbt", "simulate_write_array",
    "simulate_saturation_sweep", "scene_spec_from_dict", "hbt_spec_from_dict",
    # io
    "read_map", "write_map", "read_stream", "write_stream",
    "read_catalog", "write_catalog", "make_report", "dumps_report",
    "read_report", "write_report",
]
