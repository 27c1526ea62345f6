"""Pulse-by-pulse Monte Carlo of the interference and HBT measurement.

Per pulse each emitter fires one photon at an exponentially distributed
time, plus a second one with its multi-photon probability.  The first two
photons interfere: they share an output port with the probability from
:func:`~qdlnsim.optics.analytic.beam_splitter_probabilities`, otherwise they
split.  Second photons choose a port at random.  Photons leaving the
watched port hit one of two detectors with equal odds and pick up timing
jitter.

Pulses are simulated in blocks laid out on a ring, so every delay lag sees
the same number of pulse pairs.  Block ``k`` draws from its own stream
``SeedSequence(seed, spawn_key=(k,))``, which makes a run over blocks
``[0, K)`` identical to the merge of runs over any partition of that range.
"""

from __future__ import annotations

import math

import numpy as np

from .analytic import FWHM_TO_SIGMA, beam_splitter_probabilities
from .histogram import CorrelationHistogram
from .models import DetectionModel, TpiConfig

__all__ = ["BLOCK_PULSES", "MIN_PULSES", "simulate_tpi", "simulate_block"]

BLOCK_PULSES = 1 << 16
MIN_PULSES = 10_000


def _jitter(rng, n: int, det: DetectionModel) -> np.ndarray:
    if det.irf_shape == "gaussian":
        return rng.normal(0.0, det.irf_fwhm * FWHM_TO_SIGMA, n)
    return rng.laplace(0.0, det.irf_fwhm / (2.0 * math.log(2.0)), n)


def _emit(rng, n: int, cfg: TpiConfig):
    """Photons reaching the watched port: (pulse index, emission time) arrays."""
    a, b = cfg.emitters
    idx = np.arange(n)
    ta = rng.exponential(a.lifetime_tau1, n)
    extra_a = rng.random(n) < a.multiphoton
    ta2 = rng.exponential(a.lifetime_tau1, n)

    if cfg.single_source:
        # straight into the HBT, no splitter in front
        return np.concatenate([idx, idx[extra_a]]), np.concatenate([ta, ta2[extra_a]])

    tb = rng.exponential(b.lifetime_tau1, n)
    extra_b = rng.random(n) < b.multiphoton
    tb2 = rng.exponential(b.lifetime_tau1, n)

    p_same, _ = beam_splitter_probabilities(ta - tb, cfg)
    same = rng.random(n) < p_same
    coin = rng.random(n) < 0.5
    both_here = same & coin  # bunched into the watched port
    a_here = both_here | (~same & coin)  # split, with a on the watched side
    b_here = both_here | (~same & ~coin)
    a2_here = extra_a & (rng.random(n) < 0.5)
    b2_here = extra_b & (rng.random(n) < 0.5)

    pulses = np.concatenate([idx[a_here], idx[b_here], idx[a2_here], idx[b2_here]])
    times = np.concatenate([ta[a_here], tb[b_here], ta2[a2_here], tb2[b2_here]])
    return pulses, times


def _pair_delays(t1, t2, ring: float, lo: float, hi: float):
    """All ``t2 - t1`` in ``[lo, hi)`` with ``t2`` wrapped around a ring of length ``ring``."""
    t2 = np.sort(np.concatenate([t2 - ring, t2, t2 + ring]))
    left = np.searchsorted(t2, t1 + lo, side="left")
    right = np.searchsorted(t2, t1 + hi, side="left")
    n = right - left
    total = int(n.sum())
    if total == 0:
        return np.empty(0)
    starts = np.repeat(left - np.cumsum(n) + n, n)
    j = starts + np.arange(total)
    return t2[j] - np.repeat(t1, n)


def simulate_block(cfg: TpiConfig, det: DetectionModel, n: int, seed: int, block: int):
    """Counts and accepted-pair total for one ring of ``n`` pulses."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))
    pulses, t_emit = _emit(rng, n, cfg)
    t = pulses * det.rep_period + t_emit + _jitter(rng, t_emit.size, det)
    ring = n * det.rep_period
    t = np.mod(t, ring)
    to_first = rng.random(t.size) < 0.5
    t1, t2 = t[to_first], t[~to_first]

    n_bins = det.n_bins
    lo = (-(n_bins // 2) - 0.5) * det.bin_width
    hi = lo + n_bins * det.bin_width
    d = _pair_delays(t1, t2, ring, lo, hi)
    k = np.floor((d - lo) / det.bin_width).astype(np.int64)
    np.clip(k, 0, n_bins - 1, out=k)  # guards a rounding spill at the top edge
    return np.bincount(k, minlength=n_bins), int(d.size)


def simulate_tpi(
    cfg: TpiConfig,
    det: DetectionModel,
    n_pulses: int,
    seed: int,
    first_block: int = 0,
    block_pulses: int = BLOCK_PULSES,
) -> CorrelationHistogram:
    """Coincidence histogram for ``n_pulses`` excitation pulses.

    Pulses are cut into blocks of ``block_pulses``; any remainder joins the
    last block.  ``first_block`` offsets the stream index so that disjoint
    pieces of one long run can be computed separately and merged.
    """
    if cfg.background != 0:
        raise ValueError("the simulator has no background model; set background=0")
    if n_pulses < MIN_PULSES:
        raise ValueError(f"n_pulses must be at least {MIN_PULSES}")
    min_ring = 2 * det.n_side + 2
    if block_pulses < max(min_ring, MIN_PULSES // 10):
        raise ValueError("block_pulses too small for the correlation window")
    det.check_emitters(*(cfg.emitters[:1] if cfg.single_source else cfg.emitters))

    n_blocks = max(1, n_pulses // block_pulses)
    sizes = [block_pulses] * n_blocks
    sizes[-1] += n_pulses - n_blocks * block_pulses

    counts = np.zeros(det.n_bins, dtype=np.int64)
    accepted = 0
    for k, n in enumerate(sizes):
        c, m = simulate_block(cfg, det, n, seed, first_block + k)
        counts += c
        accepted += m
    meta = {"seed": int(seed), "first_block": int(first_block)}
    return CorrelationHistogram(
        counts, det.bin_width, det.rep_period, det.n_side, accepted, n_pulses, meta
    )

