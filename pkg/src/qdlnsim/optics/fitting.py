"""Least-squares fit of the blurred correlation model to a measured histogram.

Two stages.  The stacked side peaks fix the peak scale and the emitter
lifetime (they carry no interference).  The zero-delay peak is then fitted
with ``g2(tau) = c0 + a * exp(-2|tau|/tau_c) * cos(dw tau)`` under the same
envelope and instrument response, so ``c0 + a`` is the deconvolved
zero-delay value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .analytic import HBAR_EV_PS, convolve_irf, irf_kernel
from .histogram import CorrelationHistogram, extract_g2_zero
from .models import DetectionModel

__all__ = ["FitResult", "fit_model"]

SUBSAMPLE = 8


@dataclass(frozen=True)
class FitResult:
    g2_zero: float  # deconvolved, c0 + a
    g2_zero_err: float
    g2_zero_convolved: float  # model peak as the instrument sees it
    tau_c: float  # ps
    tau_c_err: float
    amplitude: float
    baseline: float  # c0
    lifetime: float  # ps, from the side peaks
    area_ratio: float
    area_ratio_err: float
    fit_residual: float  # reduced chi-square of the central fit
    converged: bool
    tau_c_identifiable: bool
    message: str = ""

    def to_mapping(self) -> dict:
        return {k: (bool(v) if isinstance(v, (bool, np.bool_)) else v) for k, v in self.__dict__.items()}


class _BinnedModel:
    """Blurred envelope * ratio, integrated over histogram bins within ``+-half``."""

    def __init__(self, det: DetectionModel, half_bins: int, detuning: float):
        self.det = det
        self.bw = det.bin_width
        self.h = self.bw / SUBSAMPLE
        pad = (irf_kernel(self.h, det).size // 2 + 1) // SUBSAMPLE + 1
        self.n_core = 2 * half_bins + 1
        n_all = self.n_core + 2 * pad
        centers = (np.arange(n_all) - n_all // 2) * self.bw
        sub = ((np.arange(SUBSAMPLE) + 0.5) / SUBSAMPLE - 0.5) * self.bw
        self.tau = (centers[:, None] + sub[None, :]).ravel()
        self.pad = pad
        self.dw = detuning * 1e-6 / HBAR_EV_PS

    def _bins(self, density):
        y = convolve_irf(self.tau, density, self.det).reshape(-1, SUBSAMPLE).mean(axis=1)
        return y[self.pad : self.pad + self.n_core] * self.bw

    def envelope(self, tau1):
        return np.exp(-np.abs(self.tau) / tau1) / (2.0 * tau1)

    def side(self, scale, tau1):
        return scale * self._bins(self.envelope(tau1))

    def ratio(self, c0, amp, tau_c):
        t = self.tau
        return c0 + amp * np.exp(-2.0 * np.abs(t) / tau_c) * np.cos(self.dw * t)

    def center(self, scale, tau1, c0, amp, tau_c):
        return scale * self._bins(self.envelope(tau1) * self.ratio(c0, amp, tau_c))


def _sigma(y):
    return np.sqrt(np.maximum(y, 1.0))


def _errors(res, n_data: int):
    dof = max(n_data - res.x.size, 1)
    chi2 = float(np.sum(res.fun**2)) / dof
    try:
        cov = np.linalg.inv(res.jac.T @ res.jac) * chi2
        err = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        cov = np.full((res.x.size, res.x.size), np.nan)
        err = np.full(res.x.size, np.nan)
    return chi2, cov, err


def fit_model(
    h: CorrelationHistogram,
    det: DetectionModel,
    detuning: float = 0.0,
    fit_halfwidth: float | None = None,
    max_nfev: int = 200,
) -> FitResult:
    """Fit the blurred model to the zero-delay peak of ``h``.

    ``detuning`` (ueV) is held fixed.  ``fit_halfwidth`` defaults to three
    fitted lifetimes, capped at a third of the repetition period.  When the
    optimiser stops without converging the best point so far is returned
    with ``converged=False``.
    """
    if (h.bin_width, h.rep_period, h.n_side) != (det.bin_width, det.rep_period, det.n_side):
        raise ValueError("histogram binning does not match the detection model")
    per = h.bins_per_period
    mid = per // 2
    peaks = h.counts.reshape(2 * h.n_side + 1, per).astype(np.float64)
    side_sum = np.delete(peaks, h.n_side, axis=0).sum(axis=0)
    n_side_peaks = 2 * h.n_side
    if side_sum.sum() <= 0:
        raise ValueError("histogram has no side-peak counts")

    # stage 1: lifetime and scale from the stacked side peaks
    hb = int(per // 3) // 2
    full = _BinnedModel(det, hb, detuning)
    s_obs = side_sum[mid - hb : mid + hb + 1]
    s_sig = _sigma(s_obs)
    area = side_sum.sum()
    offsets = np.abs(np.arange(-hb, hb + 1)) * det.bin_width
    tau_guess = max(float(np.sum(s_obs * offsets) / s_obs.sum()), 10.0)  # mean |tau| of a Laplace
    r1 = least_squares(
        lambda p: (full.side(p[0], p[1]) - s_obs) / s_sig,
        x0=[area, tau_guess],
        bounds=([0.0, 1.0], [np.inf, h.rep_period / 4.0]),
        x_scale=[area, tau_guess],
        max_nfev=max_nfev,
    )
    scale, tau1 = r1.x[0] / n_side_peaks, r1.x[1]

    # stage 2: zero-delay peak under that envelope
    half = min(3.0 * tau1, h.rep_period / 3.0) if fit_halfwidth is None else fit_halfwidth
    kb = int(half // det.bin_width)
    model = _BinnedModel(det, kb, detuning)
    c_obs = peaks[h.n_side, mid - kb : mid + kb + 1]
    c_sig = _sigma(c_obs)
    area_est = extract_g2_zero(h)
    x0 = [area_est.value, 0.3, min(100.0, tau1)]
    lo = [0.0, 0.0, 1.0]
    hi = [3.0, 3.0, 2.0 * tau1]
    r2 = least_squares(
        lambda p: (model.center(scale, tau1, *p) - c_obs) / c_sig,
        x0=x0,
        bounds=(lo, hi),
        x_scale=[0.1, 0.1, 10.0],
        max_nfev=max_nfev,
    )
    chi2, cov, err = _errors(r2, c_obs.size)
    c0, amp, tau_c = (float(v) for v in r2.x)
    g0_err = float(math.sqrt(max(cov[0, 0] + cov[1, 1] + 2 * cov[0, 1], 0.0))) if np.all(np.isfinite(cov)) else float("nan")

    # blurred zero-delay value, as a ratio to the blurred envelope
    num = model.center(1.0, tau1, c0, amp, tau_c)
    den = model.side(1.0, tau1)
    g_conv = float(num[kb] / den[kb])

    at_bound = tau_c <= lo[2] * 1.01 or tau_c >= hi[2] * 0.99
    identifiable = bool(
        amp > 0
        and np.isfinite(err[1])
        and err[1] > 0
        and amp / err[1] > 5.0
        and np.isfinite(err[2])
        and err[2] < 0.5 * tau_c
        and not at_bound
    )
    converged = bool(r1.status > 0 and r2.status > 0)
    return FitResult(
        g2_zero=c0 + amp,
        g2_zero_err=g0_err,
        g2_zero_convolved=g_conv,
        tau_c=tau_c,
        tau_c_err=float(err[2]),
        amplitude=amp,
        baseline=c0,
        lifetime=float(tau1),
        area_ratio=area_est.value,
        area_ratio_err=area_est.error,
        fit_residual=chi2,
        converged=converged,
        tau_c_identifiable=identifiable,
        message=r2.message,
    )
