"""Multi-channel spectral alignment under a linear tuning model.

Each channel tunes as ``E(V) = e0 + rate * V`` over ``[v_min, v_max]``.
Bringing channels into resonance is then a one-dimensional maximum-overlap
problem on their reachable energy intervals, solved exactly by sweeping the
interval endpoints.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field

import numpy as np
import yaml

__all__ = [
    "QDChannel",
    "EnsembleSpec",
    "AlignmentResult",
    "ChannelFileError",
    "REFERENCE_ENSEMBLE",
    "sample_ensemble",
    "reachable_interval",
    "voltage_for",
    "max_depth_regions",
    "max_overlap_window",
    "align_channels",
    "pair_resonance",
    "read_channels_csv",
    "write_channels_csv",
]

UEV = 1e-6
CSV_HEADER = ["id", "e0_eV", "rate_ueV_per_V", "vmin", "vmax"]


@dataclass(frozen=True)
class QDChannel:
    id: int
    e0: float  # eV at V = 0
    rate: float  # ueV/V
    v_min: float = -100.0
    v_max: float = 100.0

    def __post_init__(self):
        if not (self.v_min < self.v_max):
            raise ValueError(f"channel {self.id}: v_min must be below v_max")
        if not np.isfinite(self.rate):
            raise ValueError(f"channel {self.id}: rate must be finite")
        if not (1.2 < self.e0 < 1.5):
            raise ValueError(f"channel {self.id}: e0={self.e0} eV outside (1.2, 1.5)")

    def energy(self, v: float) -> float:
        return self.e0 + self.rate * UEV * v


@dataclass(frozen=True)
class EnsembleSpec:
    n: int = 20
    center: float = 1.3496  # eV
    sigma_inhomogeneous: float = 1.3e-4  # eV
    rate_mean: float = -4.1  # ueV/V
    rate_spread: float = 0.4  # ueV/V
    v_limit: float = 100.0  # V
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("ensemble needs n >= 1")
        if self.sigma_inhomogeneous < 0 or self.rate_spread < 0:
            raise ValueError("spreads must be non-negative")
        if self.v_limit <= 0:
            raise ValueError("v_limit must be positive")


# 20 channels, 0.82 meV mean full-range shift over +-100 V around 1.3496 eV.
# The two spreads are synthetic; they were chosen so that the mean common
# overlap window over many seeds comes out near 0.32 meV.
REFERENCE_ENSEMBLE = EnsembleSpec()


def sample_ensemble(spec: EnsembleSpec) -> list[QDChannel]:
    rng = np.random.default_rng(spec.seed)
    e0 = rng.normal(spec.center, spec.sigma_inhomogeneous, spec.n)
    rate = rng.normal(spec.rate_mean, spec.rate_spread, spec.n)
    return [
        QDChannel(i, float(e0[i]), float(rate[i]), -spec.v_limit, spec.v_limit)
        for i in range(spec.n)
    ]


def reachable_interval(ch: QDChannel) -> tuple[float, float]:
    a, b = ch.energy(ch.v_min), ch.energy(ch.v_max)
    return (a, b) if a <= b else (b, a)


def voltage_for(ch: QDChannel, target: float) -> float:
    """Smallest-|V| bias bringing the channel as close as possible to ``target``."""
    slope = ch.rate * UEV
    if slope == 0:
        return float(np.clip(0.0, ch.v_min, ch.v_max))
    return float(np.clip((target - ch.e0) / slope, ch.v_min, ch.v_max))


@dataclass
class AlignmentResult:
    target: float  # eV
    voltages: dict[int, float]
    aligned_ids: set[int]
    residuals: dict[int, float]  # |E(V) - target| in eV
    tolerance: float
    window: tuple[float, float] = field(default=(np.nan, np.nan))

    @property
    def count(self) -> int:
        return len(self.aligned_ids)

    def to_mapping(self) -> dict:
        return {
            "target_eV": float(self.target),
            "tolerance_eV": float(self.tolerance),
            "aligned_count": self.count,
            "target_window_eV": [float(self.window[0]), float(self.window[1])],
            "channels": [
                {
                    "id": int(i),
                    "voltage_V": float(self.voltages[i]),
                    "residual_eV": float(self.residuals[i]),
                    "aligned": i in self.aligned_ids,
                }
                for i in sorted(self.voltages)
            ],
        }

    def to_text(self) -> str:
        return yaml.safe_dump(self.to_mapping(), sort_keys=False)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "voltage_V", "residual_ueV", "aligned"])
        for i in sorted(self.voltages):
            w.writerow([i, repr(self.voltages[i]), repr(self.residuals[i] / UEV), int(i in self.aligned_ids)])
        return buf.getvalue()


def max_depth_regions(intervals) -> tuple[int, list[tuple[float, float]]]:
    """Deepest overlap of closed intervals.

    Returns the depth and every maximal ``[lo, hi]`` region attaining it.
    Sorting the 2n endpoints makes this O(n log n).
    """
    if not intervals:
        return 0, []
    # starts sort before ends at the same coordinate: intervals are closed
    events = sorted([(lo, 0) for lo, _ in intervals] + [(hi, 1) for _, hi in intervals])
    depth = best = 0
    for x, kind in events:
        depth += 1 if kind == 0 else -1
        best = max(best, depth)
    regions = []
    depth = 0
    start = None
    for x, kind in events:
        if kind == 0:
            depth += 1
            if depth == best:
                start = x
        else:
            if depth == best and start is not None:
                regions.append((start, x))
                start = None
            depth -= 1
    return best, regions


def max_overlap_window(channels) -> tuple[float, float, int]:
    """Widest region covered by the largest number of reachable intervals."""
    depth, regions = max_depth_regions([reachable_interval(c) for c in channels])
    lo, hi = max(regions, key=lambda r: r[1] - r[0])
    return lo, hi, depth


def _cost(channels, t):
    v = [voltage_for(c, t) for c in channels]
    res = [abs(c.energy(x) - t) for c, x in zip(channels, v)]
    return sum(res), sum(abs(x) for x in v), v, res


def align_channels(channels, tolerance: float) -> AlignmentResult:
    """Pick the target energy that brings the most channels within ``tolerance``.

    Ties go first to the smallest total residual (exact resonance where the
    intervals allow it), then to the smallest total |V|.  Voltages always
    stay inside each channel's limits.
    """
    channels = list(channels)
    if not channels:
        raise ValueError("need at least one channel")
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    reach = [reachable_interval(c) for c in channels]
    expanded = [(lo - tolerance, hi + tolerance) for lo, hi in reach]
    depth, regions = max_depth_regions(expanded)

    best = None
    for L, U in regions:
        members = [c for c, (lo, hi) in zip(channels, expanded) if lo <= L and U <= hi]
        cands = {L, U}
        for c, (lo, hi) in zip(channels, reach):
            if c in members:
                cands.update((lo, hi, c.e0))
        for t in sorted(min(max(x, L), U) for x in cands):
            res_sum, v_sum, _, _ = _cost(members, t)
            key = (res_sum, v_sum, t)
            if best is None or key < best[0]:
                best = (key, t, (L, U))
    _, target, window = best

    voltages, residuals, aligned = {}, {}, set()
    for c, (lo, hi) in zip(channels, expanded):
        v = voltage_for(c, target)
        voltages[c.id] = v
        residuals[c.id] = abs(c.energy(v) - target)
        # membership on the widened interval, so a residual that rounds a few
        # ulps over the tolerance does not drop a channel the sweep counted
        if lo <= target <= hi:
            aligned.add(c.id)
    return AlignmentResult(target, voltages, aligned, residuals, tolerance, window)


def pair_resonance(a: QDChannel, b: QDChannel):
    """Voltages (V_a, V_b) putting both channels at one energy with the smallest
    max(|V_a|, |V_b|), or ``None`` when their reachable intervals are disjoint.
    """
    (alo, ahi), (blo, bhi) = reachable_interval(a), reachable_interval(b)
    lo, hi = max(alo, blo), min(ahi, bhi)
    if lo > hi:
        return None

    def cost(t):
        return max(abs(voltage_for(a, t)), abs(voltage_for(b, t)))

    cands = [lo, hi, a.e0, b.e0]
    ra, rb = abs(a.rate), abs(b.rate)
    if ra > 0 and rb > 0:
        # where the two |V| lines cross, on either side of the midpoint
        cands.append((a.e0 * rb + b.e0 * ra) / (ra + rb))
        if ra != rb:
            cands.append((a.e0 * rb - b.e0 * ra) / (rb - ra))
    t = min((min(max(x, lo), hi) for x in cands), key=lambda x: (cost(x), x))
    return voltage_for(a, t), voltage_for(b, t)


class ChannelFileError(ValueError):
    pass


def read_channels_csv(text: str) -> list[QDChannel]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ChannelFileError("line 1: empty channel file") from None
    if [h.strip() for h in header] != CSV_HEADER:
        raise ChannelFileError(f"line 1: expected header {','.join(CSV_HEADER)}")
    out = []
    for row in reader:
        line = reader.line_num
        if not row or all(not x.strip() for x in row):
            continue
        if len(row) != len(CSV_HEADER):
            raise ChannelFileError(f"line {line}: expected {len(CSV_HEADER)} fields, got {len(row)}")
        try:
            out.append(
                QDChannel(int(row[0]), float(row[1]), float(row[2]), float(row[3]), float(row[4]))
            )
        except ValueError as exc:
            raise ChannelFileError(f"line {line}: {exc}") from None
    if not out:
        raise ChannelFileError("no channels in file")
    ids = [c.id for c in out]
    if len(set(ids)) != len(ids):
        raise ChannelFileError("duplicate channel ids")
    return out


def write_channels_csv(channels) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for c in channels:
        w.writerow([c.id, repr(c.e0), repr(c.rate), repr(c.v_min), repr(c.v_max)])
    return buf.getvalue()


def _subset_oracle_count(channels, tolerance) -> int:
    """Largest subset whose tolerance-widened intervals share a point (2^n search)."""
    exp = [(lo - tolerance, hi + tolerance) for lo, hi in map(reachable_interval, channels)]
    for k in range(len(channels), 0, -1):
        for sub in itertools.combinations(exp, k):
            if max(s[0] for s in sub) <= min(s[1] for s in sub):
                return k
    return 0
