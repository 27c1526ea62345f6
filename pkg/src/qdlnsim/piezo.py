"""Piezoelectric strain in the GaAs waveguide from the electrode bias.

Frames
------
Crystal frame (X, Y, Z): LiNbO3 axes, Z = c.  The film is X-cut, so X is
the surface normal.

Device frame (x, y, z): x along the waveguide, y in-plane across the
electrode gap (the direction of the field for positive bias), z = X, the
surface normal and the GaAs [001] growth axis.  The GaAs cube axes are
taken parallel to the device axes.

At theta = 0 the waveguide runs along the crystal Y axis and positive bias
drives the field along -Z.  Positive theta turns the waveguide from +Y
toward -Z, i.e. the device frame is rotated by theta about -X.

Strain is kept in engineering Voigt form (xx, yy, zz, yz, xz, xy) with the
shear entries equal to twice the tensor components.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .materials import MaterialSet, PiezoTensorVoigt

__all__ = [
    "Orientation",
    "ElectrodeGeometry",
    "StrainVoigt",
    "StrainRangeError",
    "MOUNTING",
    "VOIGT_PAIRS",
    "passive_rotation_matrix",
    "bond_strain_matrix",
    "bond_stress_matrix",
    "strain_voigt_to_tensor",
    "strain_tensor_to_voigt",
    "piezo_voigt_to_tensor",
    "piezo_tensor_to_voigt",
    "rotate_piezo",
    "field_from_voltage",
    "strain_from_voltage",
]

# Voigt index -> tensor index pair
VOIGT_PAIRS = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))

# rows: device x, y, z at theta = 0, written in crystal (X, Y, Z) coordinates
MOUNTING = np.array(
    [
        [0.0, -1.0, 0.0],
        [0.0, 0.0, -1.0],
        [1.0, 0.0, 0.0],
    ]
)

STRAIN_SANITY_BOUND = 1e-2


class StrainRangeError(ValueError):
    pass


@dataclass(frozen=True)
class Orientation:
    """Waveguide angle relative to crystal +Y, in degrees, kept in [0, 360)."""

    theta: float

    def __post_init__(self):
        theta = float(self.theta)
        if not np.isfinite(theta):
            raise ValueError("orientation angle must be finite")
        theta = theta % 360.0
        if theta == 360.0:  # -1e-17 % 360.0 rounds up
            theta = 0.0
        object.__setattr__(self, "theta", theta)

    @property
    def radians(self) -> float:
        return np.deg2rad(self.theta)


@dataclass(frozen=True)
class ElectrodeGeometry:
    gap: float = 5e-6  # m

    def __post_init__(self):
        if not (self.gap > 0 and np.isfinite(self.gap)):
            raise ValueError(f"electrode gap must be positive, got {self.gap}")


@dataclass(frozen=True, eq=False)
class StrainVoigt:
    eps: np.ndarray

    def __post_init__(self):
        eps = np.array(self.eps, dtype=np.float64).reshape(6)
        if not np.all(np.isfinite(eps)):
            raise StrainRangeError("strain has non-finite components")
        if np.max(np.abs(eps)) >= STRAIN_SANITY_BOUND:
            raise StrainRangeError(
                f"strain component {np.max(np.abs(eps)):.3g} outside the device regime "
                f"(|eps| < {STRAIN_SANITY_BOUND:g})"
            )
        eps.setflags(write=False)
        object.__setattr__(self, "eps", eps)

    def __iter__(self):
        return iter(self.eps)

    def __getitem__(self, i):
        return self.eps[i]

    @property
    def xx(self):
        return self.eps[0]

    @property
    def yy(self):
        return self.eps[1]

    @property
    def zz(self):
        return self.eps[2]

    @property
    def yz(self):
        return self.eps[3]

    @property
    def xz(self):
        return self.eps[4]

    @property
    def xy(self):
        return self.eps[5]


def _as_theta(orientation) -> Orientation:
    return orientation if isinstance(orientation, Orientation) else Orientation(orientation)


def passive_rotation_matrix(orientation) -> np.ndarray:
    """Matrix A with ``v_device = A @ v_crystal``.

    Accepts an :class:`Orientation` or a bare angle in degrees.
    """
    t = _as_theta(orientation).radians
    c, s = np.cos(t), np.sin(t)
    turn = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return turn @ MOUNTING


def _check_orthogonal(A: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if A.shape != (3, 3):
        raise ValueError(f"rotation must be 3x3, got {A.shape}")
    if not np.allclose(A @ A.T, np.eye(3), atol=tol, rtol=0.0):
        raise ValueError("matrix is not orthogonal")
    return A


def _bond_blocks(A):
    # cyclic index trick: Voigt 4,5,6 <-> pairs (1,2), (2,0), (0,1)
    i = np.arange(3)
    i1, i2 = (i + 1) % 3, (i + 2) % 3
    K1 = A**2
    K2 = A[:, i1] * A[:, i2]
    K3 = A[i1, :] * A[i2, :]
    K4 = A[np.ix_(i1, i1)] * A[np.ix_(i2, i2)] + A[np.ix_(i1, i2)] * A[np.ix_(i2, i1)]
    return K1, K2, K3, K4


def bond_strain_matrix(A) -> np.ndarray:
    """6x6 Bond matrix N with ``eps' = N @ eps`` for engineering Voigt strain."""
    K1, K2, K3, K4 = _bond_blocks(_check_orthogonal(A))
    return np.block([[K1, K2], [2.0 * K3, K4]])


def bond_stress_matrix(A) -> np.ndarray:
    """6x6 Bond matrix M with ``sigma' = M @ sigma``."""
    K1, K2, K3, K4 = _bond_blocks(_check_orthogonal(A))
    return np.block([[K1, 2.0 * K2], [K3, K4]])


def strain_voigt_to_tensor(eps) -> np.ndarray:
    e = np.asarray(eps, dtype=np.float64)
    return np.array(
        [
            [e[0], 0.5 * e[5], 0.5 * e[4]],
            [0.5 * e[5], e[1], 0.5 * e[3]],
            [0.5 * e[4], 0.5 * e[3], e[2]],
        ]
    )


def strain_tensor_to_voigt(t) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    return np.array([t[0, 0], t[1, 1], t[2, 2], 2 * t[1, 2], 2 * t[0, 2], 2 * t[0, 1]])


def piezo_voigt_to_tensor(e) -> np.ndarray:
    e = np.asarray(e, dtype=np.float64)
    out = np.zeros((3, 3, 3))
    for J, (j, k) in enumerate(VOIGT_PAIRS):
        out[:, j, k] = e[:, J]
        out[:, k, j] = e[:, J]
    return out


def piezo_tensor_to_voigt(t) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    return np.stack([t[:, j, k] for j, k in VOIGT_PAIRS], axis=1)


def rotate_piezo(e_c: PiezoTensorVoigt, orientation) -> PiezoTensorVoigt:
    """Device-frame stress constants ``A e N^-1`` for the X-cut film."""
    A = passive_rotation_matrix(orientation)
    N = bond_strain_matrix(A)
    # N is a rotation representation, so it can't be singular
    assert abs(np.linalg.det(N)) > 1e-12
    e_dev = np.linalg.solve(N.T, e_c.e.T).T
    return PiezoTensorVoigt(A @ e_dev, check_3m=False)


def field_from_voltage(v_p: float, geom: ElectrodeGeometry = ElectrodeGeometry()) -> np.ndarray:
    """Uniform gap field (V/m) in device coordinates."""
    return np.array([0.0, float(v_p) / geom.gap, 0.0])


def raw_strain(m: MaterialSet, orientation, v_p: float, geom: ElectrodeGeometry) -> np.ndarray:
    """Strain before the sanity check: ``-eta * s @ e'^T @ F``."""
    e_dev = rotate_piezo(m.piezo_c_axis, orientation).e
    field = field_from_voltage(v_p, geom)
    return -m.strain_transfer * (m.compliance.s @ (e_dev.T @ field))


def strain_from_voltage(
    m: MaterialSet, orientation, v_p: float, geom: ElectrodeGeometry = ElectrodeGeometry()
) -> StrainVoigt:
    return StrainVoigt(raw_strain(m, orientation, v_p, geom))
