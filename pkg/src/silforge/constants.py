"""Default constants: material/beam parameters, conventions, catalogs."""

from scipy import constants as _codata

from .models import BeamParams, MaterialConstants, ZplCatalog, ZplLine

ELECTRON_MASS_KG = _codata.m_e
ELEMENTARY_CHARGE_C = _codata.e
VACUUM_PERMITTIVITY_F_PER_M = _codata.epsilon_0
SPEED_OF_LIGHT_M_PER_S = _codata.c
EV_TO_JOULE = _codata.e

# 4H-SiC written with a 790 nm femtosecond laser: effective electron mass
# 0.37 m_e, refractive index 2.6, bandgap 3.23 eV, angular frequency
# 2.4e15 rad/s.
DEFAULT_MATERIAL = MaterialConstants(
    effective_mass=0.37 * ELECTRON_MASS_KG,
    refractive_index=2.6,
    bandgap_ev=3.23,
    laser_angular_frequency=2.4e15,
    electron_charge=ELEMENTARY_CHARGE_C,
    vacuum_permittivity=VACUUM_PERMITTIVITY_F_PER_M,
    speed_of_light=SPEED_OF_LIGHT_M_PER_S,
)

# focal spots of the writing objective: planar surface vs through-SIL
PLANAR_BEAM = BeamParams(beam_waist=350e-9, pulse_duration=250e-15)
SIL_BEAM = BeamParams(beam_waist=190e-9, pulse_duration=250e-15)

# photon energy of the 790 nm writing laser (hc/lambda)
WRITE_PHOTON_ENERGY_EV = 1.57

# geometric magnification of apparent in-SIL distances for a hemispherical
# solid immersion lens equals the refractive index
DEFAULT_MAGNIFICATION = 2.6

# scan pitch of the analysis confocal maps (µm/pixel)
DEFAULT_PIXEL_SIZE_UM = 0.13

# full width at half maximum per Gaussian sigma
FWHM_PER_SIGMA = 2.3548

DEFAULT_CONFIDENCE = 0.95

# spectrometer sensitivity window for zero-phonon-line identification (nm)
INSTRUMENT_WINDOW_NM = (858.0, 985.0)

# silicon-vacancy zero-phonon lines in 4H-SiC: V1' and V1 at the h site,
# V2 at the k site; +-2 nm reflects integer-nm line positions
DEFAULT_ZPL_CATALOG = ZplCatalog(
    entries=(
        ZplLine("V1'", 858.0, 2.0),
        ZplLine("V1", 861.0, 2.0),
        ZplLine("V2", 916.0, 2.0),
    )
)
