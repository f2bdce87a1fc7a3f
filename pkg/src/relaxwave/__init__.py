"""Traveling waves of the relaxing McKean (piecewise-linear FitzHugh-Nagumo)
system and their spectral stability via the Evans function."""

__version__ = "0.1.0"

from .errors import (
    ClassificationError,
    CoalescentRoots,
    ConfigError,
    DegenerateCubic,
    DomainTooSmall,
    InvalidParams,
    NonRealResult,
    NoTravelingWave,
    ProfileError,
    RelaxwaveError,
    WaveLost,
    ZeroOnContour,
)
from .poly import CharRoots, CubicCoeffs, ModelParams, alpha_roots, char_poly_alpha, char_poly_beta, solve_cubic
from .profile import WaveProfile, build_profile, existence_check, h_function, solve_s, wave_at_speed
from .speed import SpeedCurve, find_fold, solve_c_for_a, trace_curve
from .evans import (
    EvansContext,
    HalfRingContour,
    WindingResult,
    evans,
    evans_determinant,
    lambda_curves,
    nyquist_export,
    stability_verdict,
    winding_number,
)
from .simulate import SimConfig, SimRun, simulate

__all__ = [name for name in dir() if not name.startswith("_")]
