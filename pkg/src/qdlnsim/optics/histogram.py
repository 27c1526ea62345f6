"""Binned start/stop coincidences and the pulsed-g2 readouts taken from them."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .models import DetectionModel

__all__ = [
    "CorrelationHistogram",
    "G2Estimate",
    "HistogramFormatError",
    "merge",
    "peak_areas",
    "extract_g2_zero",
    "g2_at_zero",
]


class HistogramFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CorrelationHistogram:
    """Coincidence counts on bins centred at ``(i - n_bins // 2) * bin_width``.

    ``total_pairs`` is the number of detector pairs the simulator accepted
    into the window; it always equals ``counts.sum()``.
    """

    counts: np.ndarray
    bin_width: float
    rep_period: float
    n_side: int
    total_pairs: int
    n_pulses: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 1 or not np.issubdtype(c.dtype, np.integer):
            raise ValueError("counts must be a 1-D integer array")
        if np.any(c < 0):
            raise ValueError("counts must be non-negative")
        per = self.rep_period / self.bin_width
        if abs(per - round(per)) > 1e-9 or c.size != (2 * self.n_side + 1) * round(per):
            raise ValueError("bin layout does not match rep_period and n_side")
        c = c.astype(np.int64)
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @classmethod
    def empty(cls, det: DetectionModel) -> "CorrelationHistogram":
        return cls(np.zeros(det.n_bins, dtype=np.int64), det.bin_width, det.rep_period, det.n_side, 0)

    @property
    def bins_per_period(self) -> int:
        return int(round(self.rep_period / self.bin_width))

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.counts.size) - self.counts.size // 2) * self.bin_width

    @property
    def normalization(self) -> float:
        """Mean side-peak area."""
        areas = peak_areas(self)
        return float(np.delete(areas, self.n_side).mean())

    def normalized(self) -> np.ndarray:
        return self.counts / self.normalization

    # --- serialization ----------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_center_ps", "counts"])
        for x, n in zip(self.centers.tolist(), self.counts.tolist()):
            w.writerow([repr(float(x)), n])
        return buf.getvalue()

    def metadata(self) -> dict:
        norm = self.normalization
        return {
            "bin_width_ps": float(self.bin_width),
            "rep_period_ps": float(self.rep_period),
            "n_side": int(self.n_side),
            "total_pairs": int(self.total_pairs),
            "n_pulses": int(self.n_pulses),
            "normalization": float(norm),
            **self.meta,
        }

    def metadata_json(self) -> str:
        return json.dumps(self.metadata(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_csv(cls, csv_text: str, metadata_text: str) -> "CorrelationHistogram":
        try:
            meta = json.loads(metadata_text)
        except json.JSONDecodeError as exc:
            raise HistogramFormatError(f"bad histogram metadata: {exc}") from None
        rows = list(csv.reader(io.StringIO(csv_text)))
        if not rows or rows[0] != ["bin_center_ps", "counts"]:
            raise HistogramFormatError("line 1: expected header bin_center_ps,counts")
        counts = []
        for line, row in enumerate(rows[1:], start=2):
            try:
                counts.append(int(row[1]))
            except (IndexError, ValueError):
                raise HistogramFormatError(f"line {line}: malformed row") from None
        try:
            extra = {
                k: v
                for k, v in meta.items()
                if k not in {"bin_width_ps", "rep_period_ps", "n_side", "total_pairs", "n_pulses", "normalization"}
            }
            return cls(
                np.array(counts, dtype=np.int64),
                float(meta["bin_width_ps"]),
                float(meta["rep_period_ps"]),
                int(meta["n_side"]),
                int(meta["total_pairs"]),
                int(meta.get("n_pulses", 0)),
                extra,
            )
        except KeyError as exc:
            raise HistogramFormatError(f"metadata is missing {exc}") from None


def merge(a: CorrelationHistogram, b: CorrelationHistogram) -> CorrelationHistogram:
    if (a.bin_width, a.rep_period, a.n_side) != (b.bin_width, b.rep_period, b.n_side):
        raise ValueError("cannot merge histograms with different binning")
    return CorrelationHistogram(
        a.counts + b.counts,
        a.bin_width,
        a.rep_period,
        a.n_side,
        a.total_pairs + b.total_pairs,
        a.n_pulses + b.n_pulses,
        {k: v for k, v in a.meta.items() if b.meta.get(k) == v},
    )


def peak_areas(h: CorrelationHistogram) -> np.ndarray:
    """Counts per repetition period, from delay ``-n_side*T`` to ``+n_side*T``."""
    return h.counts.reshape(2 * h.n_side + 1, h.bins_per_period).sum(axis=1)


@dataclass(frozen=True)
class G2Estimate:
    value: float
    error: float  # one sigma, Poisson


def _ratio(center: float, sides: np.ndarray, min_side: int) -> G2Estimate:
    if sides.size < 2 * min_side:
        raise ValueError(f"need at least {min_side} side peaks per side, got {sides.size // 2}")
    s_tot = float(sides.sum())
    if s_tot <= 0:
        raise ValueError("side peaks are empty; cannot normalise")
    mean = s_tot / sides.size
    value = center / mean
    rel = math.sqrt((1.0 / center if center > 0 else 0.0) + 1.0 / s_tot)
    err = value * rel if center > 0 else 1.0 / mean  # one-count bound
    return G2Estimate(value, err)


def extract_g2_zero(h: CorrelationHistogram, min_side: int = 5) -> G2Estimate:
    """Zero-delay peak area over mean side-peak area."""
    areas = peak_areas(h)
    return _ratio(float(areas[h.n_side]), np.delete(areas, h.n_side), min_side)


def g2_at_zero(h: CorrelationHistogram, halfwidth: float, min_side: int = 5) -> G2Estimate:
    """Like :func:`extract_g2_zero` but over ``|tau| <= halfwidth`` of each peak only."""
    per = h.bins_per_period
    k = int(math.floor(halfwidth / h.bin_width + 1e-9))
    if k >= per // 2:
        raise ValueError("halfwidth must be below half a repetition period")
    peaks = h.counts.reshape(2 * h.n_side + 1, per)
    mid = per // 2
    win = peaks[:, mid - k : mid + k + 1].sum(axis=1)
    return _ratio(float(win[h.n_side]), np.delete(win, h.n_side), min_side)
