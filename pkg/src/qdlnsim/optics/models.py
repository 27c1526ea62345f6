"""Parameter records for the two-photon interference engine.

Times are in ps, energies in eV, detuning in ueV.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = ["EmitterModel", "DetectionModel", "TpiConfig", "multiphoton_probability"]

IRF_SHAPES = ("gaussian", "exponential")


def multiphoton_probability(g: float) -> float:
    """Two-photon probability ``p`` per pulse for an HBT zero-delay area ``g``.

    A pulse holds one photon, or two with probability ``p``; then
    ``g = 2p / (1 + p)^2``, which caps ``g`` at 1/2.
    """
    if not 0.0 <= g <= 0.5:
        raise ValueError(f"purity g2={g} is outside [0, 0.5], the one-or-two photon range")
    # conjugate form of ((1 - g) - sqrt(1 - 2g)) / g, free of cancellation
    return g / ((1.0 - g) + math.sqrt(1.0 - 2.0 * g))


@dataclass(frozen=True)
class EmitterModel:
    energy: float = 1.3496  # eV
    lifetime_tau1: float = 600.0  # ps; synthetic default
    coherence_tau_c: float = 72.0  # ps
    purity_g2: float = 0.007

    def __post_init__(self):
        if not (self.lifetime_tau1 > 0 and self.coherence_tau_c > 0):
            raise ValueError("emitter times must be positive")
        if self.coherence_tau_c > 2.0 * self.lifetime_tau1:
            raise ValueError(
                f"coherence time {self.coherence_tau_c} ps exceeds the 2*T1 limit "
                f"({2 * self.lifetime_tau1} ps)"
            )
        if not 0.0 <= self.purity_g2 <= 1.0:
            raise ValueError("purity_g2 must lie in [0, 1]")

    @property
    def multiphoton(self) -> float:
        return multiphoton_probability(self.purity_g2)


@dataclass(frozen=True)
class DetectionModel:
    """Timing chain of the HBT measurement.

    The correlation window spans ``2 * n_side + 1`` repetition periods
    centred on zero delay, and ``rep_period`` must be a whole number of bins
    so every peak covers the same bins.
    """

    irf_fwhm: float = 99.0  # ps, per detector
    bin_width: float = 8.0  # ps
    rep_period: float = 13160.0  # ps, ~76 MHz
    n_side: int = 5
    irf_shape: str = "gaussian"

    def __post_init__(self):
        if not self.irf_fwhm > 0:
            raise ValueError("irf_fwhm must be positive")
        if not self.bin_width > 0:
            raise ValueError("bin_width must be positive")
        ratio = self.rep_period / self.bin_width
        if not (self.rep_period > 0 and abs(ratio - round(ratio)) < 1e-9):
            raise ValueError("rep_period must be a positive multiple of bin_width")
        if self.n_side < 1:
            raise ValueError("need at least one side peak per side")
        if self.irf_shape not in IRF_SHAPES:
            raise ValueError(f"irf_shape must be one of {IRF_SHAPES}")

    @property
    def window(self) -> float:
        return (2 * self.n_side + 1) * self.rep_period

    @property
    def bins_per_period(self) -> int:
        return int(round(self.rep_period / self.bin_width))

    @property
    def n_bins(self) -> int:
        return (2 * self.n_side + 1) * self.bins_per_period

    def check_emitters(self, *emitters: EmitterModel) -> None:
        for e in emitters:
            if not self.rep_period > 4.0 * e.lifetime_tau1:
                raise ValueError(
                    f"rep_period {self.rep_period} ps must exceed 4x lifetime {e.lifetime_tau1} ps"
                )


@dataclass(frozen=True)
class TpiConfig:
    """Two emitters meeting on a 50:50 splitter, one output watched by an HBT.

    ``single_source=True`` drops the second emitter and sends the first
    straight to the HBT (an autocorrelation/purity measurement).
    ``background`` is an uncorrelated floor relative to the side-peak level;
    only the analytic model and the fit know about it.
    """

    emitters: tuple[EmitterModel, EmitterModel] = (EmitterModel(), EmitterModel())
    detuning: float = 0.0  # ueV
    mode_overlap: float = 0.756
    background: float = 0.0
    single_source: bool = False

    def __post_init__(self):
        if len(self.emitters) != 2:
            raise ValueError("a TPI config needs exactly two emitters")
        if not 0.0 <= self.mode_overlap <= 1.0:
            raise ValueError("mode_overlap must lie in [0, 1]")
        if not (self.background >= 0 and math.isfinite(self.background)):
            raise ValueError("background must be finite and non-negative")
        if not math.isfinite(self.detuning):
            raise ValueError("detuning must be finite")
