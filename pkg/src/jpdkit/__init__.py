"""Simulation and fitting toolkit for flux-tunable Josephson parametric devices.

Forward models (flux-tunable resonance frequencies, ideal reflection,
squeezed-vacuum variances), a synthetic instrument-response generator, and
the inverse pipeline: circle-fit quality-factor extraction, flux-map
fitting, and joint squeezing/purity model fitting.
"""

__version__ = "0.1.0"

from .constants import (CONSTANTS, PhysConstants, dbm_to_watts,
                        photon_number_from_power, planck_occupation,
                        watts_to_dbm)
from .devices import (FluxCalibration, JpaModelParams, JpcModelParams,
                      ResonatorParams, ideal_reflection, jpa_frequency,
                      jpc_frequency, jrm_inductance, reflection_circle,
                      resonator_rates, squid_inductance)
from .simulate import (ComplexTrace, DistortionParams, SweepGrid, add_noise,
                       apply_distortion, simulate_reflection, synth_background,
                       synth_grid)
from .optimize import Bounds, FitResult, least_squares, minimize_simplex
from .circlefit import (CircleGeom, ReflectionFitReport, background_divide,
                        correct_delay, estimate_delay, extract_kappa_ext,
                        fit_circle, fit_phase, fit_reflection, normalize_offres,
                        refine_delay)
from .fluxfit import (FluxMapPoint, JunctionDerived, fit_jpa_flux, fit_jpc_flux,
                      flux_from_control, jpa_tunability, jpc_tunability,
                      junction_derived)
from .squeezing import (SqueezedStateMetrics, SqueezingParams, fit_squeezing,
                        gain_from_chi, metrics, metrics_from_chi, model_curve,
                        output_variances, pump_noise)

__all__ = [name for name in dir() if not name.startswith("_")]
