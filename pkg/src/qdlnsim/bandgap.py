"""Strain-induced GaAs band-gap shift and the voltage/angle sweeps built on it.

The gap shift follows the Pikus-Bir result without spin-orbit coupling::

    dE = (a_c + a_v) * eps_h - sqrt(|Q|^2 + |R|^2)
    Q  = -b/2 * (eps_xx + eps_yy - 2 eps_zz)
    R  = sqrt(3)/2 * b * (eps_xx - eps_yy) - i d eps_xy

``eps_xy`` in R is the tensor shear, i.e. half of the engineering Voigt
entry carried by :class:`~qdlnsim.piezo.StrainVoigt`.

Energies are eV internally; rates are reported in ueV/V.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .materials import DeformationPotentials, MaterialSet
from .piezo import ElectrodeGeometry, Orientation, StrainVoigt, strain_from_voltage

log = logging.getLogger(__name__)

__all__ = [
    "BandgapShift",
    "SweepCurve",
    "CalibrationError",
    "CalibrationResult",
    "hydrostatic",
    "q_epsilon",
    "r_epsilon",
    "shear_term",
    "bandgap_shift",
    "shift_at",
    "shift_parts",
    "unit_rate",
    "shift_vs_theta",
    "shift_vs_voltage",
    "fit_rate",
    "find_critical_angle",
    "extremum_angle",
    "calibrate",
    "calibrate_transfer",
    "calibrate_to_max_shift",
]

UEV = 1e-6  # eV per ueV


@dataclass(frozen=True)
class BandgapShift:
    delta_e: float  # eV, negative = redshift

    def __float__(self):
        return float(self.delta_e)

    @property
    def ueV(self) -> float:
        return self.delta_e / UEV


class CalibrationError(ValueError):
    pass


def _eps(eps) -> np.ndarray:
    return eps.eps if isinstance(eps, StrainVoigt) else np.asarray(eps, dtype=np.float64)


def hydrostatic(eps) -> float:
    e = _eps(eps)
    return float(e[0] + e[1] + e[2])


def q_epsilon(eps, p: DeformationPotentials) -> float:
    e = _eps(eps)
    return float(-p.b / 2.0 * (e[0] + e[1] - 2.0 * e[2]))


def r_epsilon(eps, p: DeformationPotentials) -> complex:
    e = _eps(eps)
    shear_xy = 0.5 * e[5]  # engineering -> tensor
    return complex(np.sqrt(3.0) / 2.0 * p.b * (e[0] - e[1]), -p.d * shear_xy)


def shear_term(eps, p: DeformationPotentials) -> float:
    """The non-negative seminorm ``sqrt(|Q|^2 + |R|^2)``."""
    return float(np.hypot(abs(q_epsilon(eps, p)), abs(r_epsilon(eps, p))))


def bandgap_shift(eps, p: DeformationPotentials) -> BandgapShift:
    return BandgapShift((p.a_c + p.a_v) * hydrostatic(eps) - shear_term(eps, p))


def shift_at(m: MaterialSet, theta: float, v_p: float, geom=ElectrodeGeometry()) -> float:
    """Gap shift in eV at one (theta, V) point."""
    eps = strain_from_voltage(m, Orientation(theta), v_p, geom)
    return bandgap_shift(eps, m.potentials).delta_e


def shift_parts(m: MaterialSet, theta: float, v_p: float, geom=ElectrodeGeometry()):
    """(hydrostatic part, shear part) of the shift, in eV.

    The first is odd in V and the second even, since strain is linear in V.
    Their sum is :func:`shift_at`.
    """
    eps = strain_from_voltage(m, Orientation(theta), v_p, geom)
    p = m.potentials
    return (p.a_c + p.a_v) * hydrostatic(eps), -shear_term(eps, p)


def unit_rate(m: MaterialSet, theta: float, geom=ElectrodeGeometry()) -> float:
    """Slope dE/dV at V -> 0+ in eV/V.

    The shift is positively homogeneous of degree one in V, so the value at
    +1 V is the one-sided derivative exactly.
    """
    return shift_at(m, theta, 1.0, geom)


@dataclass(frozen=True, eq=False)
class SweepCurve:
    axis: str  # "theta" or "voltage"
    unit: str  # "deg" or "V"
    x: np.ndarray
    delta_e: np.ndarray  # eV

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.delta_e, dtype=np.float64)
        if x.ndim != 1 or x.shape != y.shape or x.size == 0:
            raise ValueError("sweep needs matching, non-empty 1-D x and delta_e")
        if np.any(np.diff(x) <= 0):
            raise ValueError("sweep axis must be strictly increasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "delta_e", y)

    @property
    def points(self):
        return list(zip(self.x.tolist(), self.delta_e.tolist()))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"{self.axis}_{self.unit}", "delta_e_ueV"])
        for x, y in zip(self.x, self.delta_e):
            w.writerow([repr(float(x)), repr(float(y / UEV))])
        return buf.getvalue()


def _grid(values, what: str) -> np.ndarray:
    g = np.asarray(values, dtype=np.float64).ravel()
    if g.size == 0:
        raise ValueError(f"{what} grid is empty")
    if np.any(np.diff(g) <= 0):
        raise ValueError(f"{what} grid must be strictly increasing")
    return g


def shift_vs_theta(m: MaterialSet, v_p: float, geom, theta_grid) -> SweepCurve:
    th = _grid(theta_grid, "theta")
    return SweepCurve("theta", "deg", th, np.array([shift_at(m, t, v_p, geom) for t in th]))


def shift_vs_voltage(m: MaterialSet, theta: float, v_grid, geom) -> SweepCurve:
    v = _grid(v_grid, "voltage")
    return SweepCurve("voltage", "V", v, np.array([shift_at(m, theta, x, geom) for x in v]))


def fit_rate(curve: SweepCurve) -> float:
    """Least-squares slope of a voltage sweep, in ueV/V."""
    if curve.x.size < 2:
        raise ValueError("need at least two points to fit a rate")
    slope = np.polyfit(curve.x, curve.delta_e, 1)[0]
    return float(slope / UEV)


def find_critical_angle(
    m: MaterialSet, geom=ElectrodeGeometry(), step: float = 0.1, refine: bool = True
) -> float:
    """Angle in [0, 180] deg where the small-signal tuning rate vanishes (min |dE/dV|)."""
    grid = np.arange(0.0, 180.0 + step / 2, step)
    rates = np.abs([unit_rate(m, t, geom) for t in grid])
    k = int(np.argmin(rates))
    best = float(grid[k])
    if refine:
        lo, hi = max(0.0, best - step), min(180.0, best + step)
        res = minimize_scalar(
            lambda t: abs(unit_rate(m, t, geom)),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-6},
        )
        if res.fun <= rates[k]:
            best = float(res.x)
    return best


def extremum_angle(m: MaterialSet, v_p: float = 100.0, geom=ElectrodeGeometry(), step: float = 0.1) -> float:
    """Angle in [0, 180] deg of the largest |dE| at fixed bias."""
    grid = np.arange(0.0, 180.0 + step / 2, step)
    y = np.array([shift_at(m, t, v_p, geom) for t in grid])
    return float(grid[int(np.argmax(np.abs(y)))])


@dataclass(frozen=True)
class CalibrationResult:
    materials: MaterialSet
    eta: float
    required_eta: float
    model_rate_unit: float  # ueV/V at eta = 1
    residual: float  # measured - calibrated model, ueV/V


def _branch_rate(m: MaterialSet, theta, geom, v_range, n_points) -> float:
    v = np.linspace(v_range[0], v_range[1], n_points)
    return fit_rate(shift_vs_voltage(m, theta, v, geom))


def calibrate(
    m: MaterialSet,
    theta: float,
    measured_rate: float,
    geom=ElectrodeGeometry(),
    v_range=(-200.0, 200.0),
    n_points: int = 41,
) -> CalibrationResult:
    """Choose the strain-transfer factor so the swept slope matches a measurement.

    ``measured_rate`` is in ueV/V and refers to a least-squares fit over
    ``v_range``.  The model slope is linear in eta, so eta is a ratio; it is
    capped at 1 and the leftover mismatch is reported as ``residual``.
    """
    if v_range[1] <= v_range[0]:
        raise ValueError("v_range must be increasing")
    raw = _branch_rate(m.with_strain_transfer(1.0), theta, geom, v_range, n_points)
    if abs(raw) < 1e-9:
        raise CalibrationError(f"model tuning rate vanishes at theta={theta} deg")
    required = float(measured_rate / raw)
    if required <= 0:
        raise CalibrationError(
            f"measured rate {measured_rate} ueV/V has the opposite sign to the model ({raw:.4g} ueV/V)"
        )
    eta = min(required, 1.0)
    residual = float(measured_rate - eta * raw)
    if required > 1.0:
        log.warning(
            "calibration needs eta=%.3g > 1; keeping eta=1, residual %.4g ueV/V", required, residual
        )
    return CalibrationResult(m.with_strain_transfer(eta), eta, required, raw, residual)


def calibrate_transfer(
    m: MaterialSet,
    theta: float,
    measured_rate: float,
    geom=ElectrodeGeometry(),
    v_range=(-200.0, 200.0),
    n_points: int = 41,
) -> MaterialSet:
    return calibrate(m, theta, measured_rate, geom, v_range, n_points).materials


def calibrate_to_max_shift(
    m: MaterialSet,
    measured_shift: float,
    v_range=(0.0, 100.0),
    geom=ElectrodeGeometry(),
) -> tuple[CalibrationResult, float]:
    """Calibrate against the largest shift seen over many orientations.

    ``measured_shift`` (eV, magnitude) is the biggest |E(v_hi) - E(v_lo)|
    among devices of all angles; it is matched to the model's largest
    one-sided shift, found at :func:`extremum_angle`.  Returns the
    calibration and that angle.
    """
    theta = extremum_angle(m, v_range[1] if v_range[1] != 0 else v_range[0], geom)
    span = v_range[1] - v_range[0]
    raw_shift = shift_at(m, theta, v_range[1], geom) - shift_at(m, theta, v_range[0], geom)
    rate = float(np.sign(raw_shift)) * abs(measured_shift) / span / UEV
    return calibrate(m, theta, rate, geom, v_range), theta
