"""Two-photon interference: analytic model, Monte Carlo and fitting."""

from .analytic import (
    analytic_g2_same_port,
    beam_splitter_probabilities,
    convolve_irf,
    convolved_g2_zero,
    expected_area_ratio,
    expected_window_ratio,
    visibility,
)
from .histogram import CorrelationHistogram, extract_g2_zero, g2_at_zero, merge
from .models import DetectionModel, EmitterModel, TpiConfig
from .montecarlo import simulate_tpi

__all__ = [
    "EmitterModel",
    "DetectionModel",
    "TpiConfig",
    "CorrelationHistogram",
    "analytic_g2_same_port",
    "beam_splitter_probabilities",
    "convolve_irf",
    "convolved_g2_zero",
    "expected_area_ratio",
    "expected_window_ratio",
    "visibility",
    "simulate_tpi",
    "extract_g2_zero",
    "g2_at_zero",
    "merge",
]
