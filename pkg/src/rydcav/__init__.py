"""rydcav: simulation and fitting for a Rydberg-atom / microwave-resonator
interface.

The package propagates pulse sequences through a damped resonator mode,
drives a two-level atom via the two-photon Bloch equations in the frame
rotating at twice the carrier, produces Rabi traces and cavity-filtered
Ramsey spectra, and extracts physical parameters by error-weighted nonlinear
least squares.
"""

from .bloch import (
    AtomParams,
    BlochState,
    BlochTrajectory,
    bloch_rhs,
    evolve,
    evolve_final_states,
    population_upper,
)
from .datasets import read_dataset, write_dataset
from .errors import (
    CarrierMismatchError,
    ConfigError,
    DataFormatError,
    FlatSpectrumError,
    GridTooCoarseError,
    ModelEvaluationError,
    NoResolvablePeakError,
    RydcavError,
    SingularNormalMatrixError,
)
from .experiment import (
    RabiTrace,
    RamseyConfig,
    Spectrum,
    calibrate_drive_amplitude,
    fringe_fwhm,
    fringe_maxima,
    ramsey_frequency_grid,
    simulate_rabi_trace,
    simulate_ramsey_spectrum,
)
from .fitting import (
    FitProblem,
    FitResult,
    estimate_rabi_params,
    estimate_ramsey_guess,
    fit_rabi,
    fit_ramsey_spectrum,
    generate_synthetic_spectrum,
    least_squares,
)
from .models import RabiParams, generalized_rabi, rabi_population
from .resonator import (
    FieldTrace,
    Pulse,
    PulseSequence,
    ResonatorMode,
    default_ring_down_tail,
    field_envelope_scan,
    lorentzian_power_response,
    pulse_spectral_width,
    reference_field_full_ode,
    simulate_field,
    steady_state_amplitude,
)

__version__ = "0.1.0"

__all__ = [
    "AtomParams",
    "BlochState",
    "BlochTrajectory",
    "CarrierMismatchError",
    "ConfigError",
    "DataFormatError",
    "FieldTrace",
    "FitProblem",
    "FitResult",
    "FlatSpectrumError",
    "GridTooCoarseError",
    "ModelEvaluationError",
    "NoResolvablePeakError",
    "Pulse",
    "PulseSequence",
    "RabiParams",
    "RabiTrace",
    "RamseyConfig",
    "ResonatorMode",
    "RydcavError",
    "SingularNormalMatrixError",
    "Spectrum",
    "bloch_rhs",
    "calibrate_drive_amplitude",
    "default_ring_down_tail",
    "estimate_rabi_params",
    "estimate_ramsey_guess",
    "evolve",
    "evolve_final_states",
    "field_envelope_scan",
    "fit_rabi",
    "fit_ramsey_spectrum",
    "fringe_fwhm",
    "fringe_maxima",
    "generalized_rabi",
    "generate_synthetic_spectrum",
    "least_squares",
    "lorentzian_power_response",
    "population_upper",
    "pulse_spectral_width",
    "rabi_population",
    "ramsey_frequency_grid",
    "read_dataset",
    "reference_field_full_ode",
    "simulate_field",
    "simulate_rabi_trace",
    "simulate_ramsey_spectrum",
    "steady_state_amplitude",
    "write_dataset",
    "__version__",
]
