"""Closed-form correlation model for two sources at one splitter output.

The interfering photon pair exits through the same port with probability
``(1 + M K(tau)) / 2`` where ``K(tau) = exp(-2|tau|/tau_eff) cos(dw tau)``.
Occasional second photons (set by each emitter's purity) add uncorrelated
pairs.  Normalised to the side peaks this gives::

    g2(tau) = c0 + c1 * M * K(tau)

with ``c0 = c1 = 1/2`` for ideal single photons.  Measured histograms see
``g2`` weighted by the emission-delay distribution and blurred by the
instrument response.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import constants
from scipy.ndimage import convolve1d

from .models import DetectionModel, EmitterModel, TpiConfig

__all__ = [
    "HBAR_EV_PS",
    "ResolutionError",
    "tpi_coefficients",
    "coherence_kernel",
    "beam_splitter_probabilities",
    "analytic_g2_same_port",
    "delay_density",
    "irf_kernel",
    "convolve_irf",
    "convolved_g2",
    "convolved_g2_zero",
    "expected_area_ratio",
    "expected_window_ratio",
    "visibility",
    "BracketRow",
    "irf_bracket_report",
]

HBAR_EV_PS = constants.hbar / constants.e * 1e12
FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


class ResolutionError(ValueError):
    pass


def _angular_detuning(cfg: TpiConfig) -> float:
    return cfg.detuning * 1e-6 / HBAR_EV_PS  # rad/ps


def _tau_eff(cfg: TpiConfig) -> float:
    a, b = cfg.emitters
    return 2.0 / (1.0 / a.coherence_tau_c + 1.0 / b.coherence_tau_c)


def tpi_coefficients(cfg: TpiConfig) -> tuple[float, float]:
    """(c0, c1) of ``g2 = c0 + c1 M K`` for the configured purities."""
    pa, pb = (e.multiphoton for e in cfg.emitters)
    side = ((2.0 + pa + pb) / 4.0) ** 2
    c1 = 0.125 / side
    c0 = (0.125 + (2 * pa + 2 * pb + pa * pb) / 8.0) / side
    return c0, c1


def coherence_kernel(tau, cfg: TpiConfig) -> np.ndarray:
    tau = np.asarray(tau, dtype=np.float64)
    return np.exp(-2.0 * np.abs(tau) / _tau_eff(cfg)) * np.cos(_angular_detuning(cfg) * tau)


def beam_splitter_probabilities(tau, cfg: TpiConfig):
    """(same-port, split) probabilities for the interfering pair at delay ``tau``."""
    same = 0.5 * (1.0 + cfg.mode_overlap * coherence_kernel(tau, cfg))
    return same, 1.0 - same


def _with_background(r, b: float):
    return (r + b) / (1.0 + b)


def analytic_g2_same_port(tau, cfg: TpiConfig):
    """Side-peak-normalised correlation at one output, before detector blur."""
    tau = np.asarray(tau, dtype=np.float64)
    if cfg.single_source:
        r = np.full_like(tau, cfg.emitters[0].purity_g2)
    else:
        c0, c1 = tpi_coefficients(cfg)
        r = c0 + c1 * cfg.mode_overlap * coherence_kernel(tau, cfg)
    r = _with_background(r, cfg.background)
    return float(r) if r.ndim == 0 else r


def delay_density(tau, a: EmitterModel, b: EmitterModel) -> np.ndarray:
    """Density of ``t_a - t_b`` for exponential emission times."""
    tau = np.asarray(tau, dtype=np.float64)
    ta, tb = a.lifetime_tau1, b.lifetime_tau1
    return np.where(tau >= 0, np.exp(-tau / ta), np.exp(tau / tb)) / (ta + tb)


def irf_kernel(dt: float, det: DetectionModel, combined: bool = True) -> np.ndarray:
    """Sampled, unit-sum timing-jitter kernel on a grid of step ``dt``.

    ``combined`` gives the response of a start/stop pair (two detectors),
    otherwise that of one detector.
    """
    fwhm = det.irf_fwhm
    if det.irf_shape == "gaussian":
        sigma = fwhm * FWHM_TO_SIGMA * (math.sqrt(2.0) if combined else 1.0)
        half = int(math.ceil(6.0 * sigma / dt))
        x = np.arange(-half, half + 1) * dt
        k = np.exp(-0.5 * (x / sigma) ** 2)
    else:
        b = fwhm / (2.0 * math.log(2.0))  # Laplace scale per detector
        half = int(math.ceil(25.0 * b / dt))
        x = np.arange(-half, half + 1) * dt
        u = np.abs(x) / b
        k = (1.0 + u) * np.exp(-u) if combined else np.exp(-u)
    return k / k.sum()


def _uniform_step(tau) -> float:
    tau = np.asarray(tau, dtype=np.float64)
    if tau.ndim != 1 or tau.size < 2:
        raise ValueError("need a 1-D grid with at least two samples")
    d = np.diff(tau)
    if not np.allclose(d, d[0], rtol=1e-9, atol=0):
        raise ValueError("curve must be sampled on a uniform grid")
    return float(d[0])


def convolve_irf(tau, values, det: DetectionModel) -> np.ndarray:
    """Blur a sampled curve with the two-detector response.

    The grid must be at least four times finer than the histogram bins.
    Edges are extended with their end values, so constants stay constant.
    """
    dt = _uniform_step(tau)
    if dt > det.bin_width / 4.0 + 1e-12:
        raise ResolutionError(
            f"sampling step {dt} ps is coarser than bin_width/4 = {det.bin_width / 4} ps"
        )
    k = irf_kernel(dt, det)
    return convolve1d(np.asarray(values, dtype=np.float64), k[::-1], mode="nearest")


def _grid(det: DetectionModel, half: float, step: float | None = None) -> np.ndarray:
    step = det.bin_width / 8.0 if step is None else step
    n = int(math.ceil(half / step))
    return np.arange(-n, n + 1) * step


def convolved_g2(tau_half: float, cfg: TpiConfig, det: DetectionModel):
    """Instrument-blurred ``g2(tau)`` on a fine grid over ``[-tau_half, tau_half]``."""
    tau = _grid(det, tau_half)
    return tau, convolve_irf(tau, analytic_g2_same_port(tau, cfg), det)


def convolved_g2_zero(cfg: TpiConfig, det: DetectionModel) -> float:
    tau, y = convolved_g2(3000.0, cfg, det)
    return float(y[len(tau) // 2])


def expected_area_ratio(cfg: TpiConfig) -> float:
    """Zero-delay peak area over side-peak area, exact for this model."""
    if cfg.single_source:
        return float(_with_background(cfg.emitters[0].purity_g2, cfg.background))
    a, b = cfg.emitters
    ta, tb = a.lifetime_tau1, b.lifetime_tau1
    k, w = 2.0 / _tau_eff(cfg), _angular_detuning(cfg)
    # integral of delay_density * kernel, one half-line per emitter lifetime
    overlap = sum((1 / t + k) / ((1 / t + k) ** 2 + w**2) for t in (ta, tb)) / (ta + tb)
    c0, c1 = tpi_coefficients(cfg)
    return float(_with_background(c0 + c1 * cfg.mode_overlap * overlap, cfg.background))


def expected_window_ratio(cfg: TpiConfig, det: DetectionModel, halfwidth: float) -> float:
    """Counts in ``|tau| <= halfwidth`` relative to the same window on a side peak.

    Uses the a-b emission-delay density for all pairs, which is exact when
    both emitters share one lifetime.
    """
    a, b = cfg.emitters
    span = halfwidth + 12.0 * max(a.lifetime_tau1, b.lifetime_tau1)
    tau = _grid(det, span)
    dens = delay_density(tau, a, b)
    num = convolve_irf(tau, dens * analytic_g2_same_port(tau, cfg), det)
    den = convolve_irf(tau, dens, det)
    sel = np.abs(tau) <= halfwidth
    return float(num[sel].sum() / den[sel].sum())


def visibility(g2_on: float, g2_off: float) -> float:
    """Raw interference visibility ``(g2_on - g2_off) / g2_off``."""
    if g2_off == 0:
        raise ZeroDivisionError("g2_off must be non-zero")
    return (g2_on - g2_off) / g2_off


@dataclass(frozen=True)
class BracketRow:
    irf_shape: str
    background: float
    g2_on: float
    g2_off: float
    distance: float  # Euclidean distance to the target pair


def irf_bracket_report(
    target_on: float = 0.879,
    target_off: float = 0.508,
    tau_c: float = 72.0,
    irf_fwhm: float = 99.0,
    off_detuning: float = 100.0,
    purity_g2: float = 0.007,
) -> list[BracketRow]:
    """Blurred zero-delay values for each IRF shape, with and without a floor.

    For each shape the floor is either zero or the value that lifts the
    off-resonant level exactly onto ``target_off``.  Rows come back sorted,
    closest to the targets first.
    """
    em = EmitterModel(coherence_tau_c=tau_c, purity_g2=purity_g2)
    on = TpiConfig((em, em), 0.0, 1.0)
    off = TpiConfig((em, em), off_detuning, 1.0)
    rows = []
    for shape in ("gaussian", "exponential"):
        det = DetectionModel(irf_fwhm=irf_fwhm, irf_shape=shape)
        base_off = convolved_g2_zero(off, det)
        floor = max(0.0, (target_off - base_off) / (1.0 - target_off))
        for b in sorted({0.0, floor}):
            g_on = convolved_g2_zero(TpiConfig((em, em), 0.0, 1.0, b), det)
            g_off = convolved_g2_zero(TpiConfig((em, em), off_detuning, 1.0, b), det)
            d = math.hypot(g_on - target_on, g_off - target_off)
            rows.append(BracketRow(shape, b, g_on, g_off, d))
    return sorted(rows, key=lambda r: r.distance)
