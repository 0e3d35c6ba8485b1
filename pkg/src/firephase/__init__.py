"""Spectral analysis toolkit for noisy integrate-and-fire oscillators."""

from .errors import (
    AtDiscontinuity,
    ConditionError,
    ConfigError,
    DegenerateInterval,
    FirephaseError,
    HorizonExceeded,
    MassDeficit,
    NoConvergence,
    NoCrossing,
    NonTransversal,
    NumericalError,
    PredictionInvalid,
)
from .model import ConditionReport, SifModel, model_from_json, model_loads
from .periodic import Constant, FiniteFourier, PeriodicFn, Sinusoid
from .detmap import (
    LimitSpectrum,
    OrbitRecord,
    ReturnMap,
    ReturnMapReport,
    analyze,
    crossing_time,
    find_discontinuities,
    find_orbits,
    hit_time,
    map_derivative,
    predict_spectrum,
)
from .fptd import (
    FptdGrid,
    GaussianFptd,
    closed_form_bm,
    gaussian_approx,
    slope_b1,
    solve_volterra,
    transition_density_q,
    wrap_density,
)
from .markov import TransitionMatrix, build_matrix, spectrum, stationary
from .mc import HitSample, SimConfig, sample_phase_chain, simulate_hit
from .presets import PRESETS, fig1_model, get_preset

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
