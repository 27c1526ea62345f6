"""Material constants for the GaAs / X-cut LiNbO3 hybrid waveguide.

Everything downstream takes a :class:`MaterialSet`; nothing else in the
package hard-codes a physical constant of the materials.  Constants are
read from a YAML file (see ``data/default_materials.yaml`` for the schema)
and validated against the crystal-symmetry sparsity patterns on load.

Units: compliance in 1/Pa, piezoelectric stress constants in C/m^2,
deformation potentials in eV.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

__all__ = [
    "MaterialsError",
    "ElasticCompliance",
    "PiezoTensorVoigt",
    "DeformationPotentials",
    "MaterialSet",
    "cubic_compliance",
    "trigonal_3m_piezo",
    "load_materials",
    "load_materials_file",
    "dump_materials",
    "default_materials",
    "DEFAULT_CONFIG",
]

DEFAULT_CONFIG = "default_materials.yaml"


class MaterialsError(ValueError):
    """Raised for malformed or physically invalid material constants."""


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    arr.setflags(write=False)
    return arr


def cubic_compliance(s11: float, s12: float, s44: float) -> np.ndarray:
    """6x6 compliance matrix of a cubic crystal (Voigt order xx,yy,zz,yz,xz,xy)."""
    s = np.zeros((6, 6))
    s[:3, :3] = s12
    s[0, 0] = s[1, 1] = s[2, 2] = s11
    s[3, 3] = s[4, 4] = s[5, 5] = s44
    return s


def trigonal_3m_piezo(e15: float, e22: float, e31: float, e33: float) -> np.ndarray:
    """3x6 piezoelectric stress tensor of a 3m crystal, 3-axis along c."""
    return np.array(
        [
            [0.0, 0.0, 0.0, 0.0, e15, -e22],
            [-e22, e22, 0.0, e15, 0.0, 0.0],
            [e31, e31, e33, 0.0, 0.0, 0.0],
        ]
    )


def _pattern_mismatch(actual: np.ndarray, expected: np.ndarray):
    """First (i, j) where two matrices differ bit-for-bit, or None."""
    bad = np.argwhere(actual != expected)
    return None if bad.size == 0 else tuple(int(k) for k in bad[0])


@dataclass(frozen=True, eq=False)
class ElasticCompliance:
    """Cubic elastic compliance ``s`` (1/Pa)."""

    s: np.ndarray

    def __post_init__(self):
        s = _frozen(self.s)
        if s.shape != (6, 6):
            raise MaterialsError(f"compliance must be 6x6, got shape {s.shape}")
        if not np.all(np.isfinite(s)):
            raise MaterialsError("compliance has non-finite entries")
        asym = np.argwhere(s != s.T)
        if asym.size:
            i, j = (int(k) for k in asym[0])
            raise MaterialsError(
                f"compliance not symmetric: s[{i}][{j}]={s[i, j]!r} != s[{j}][{i}]={s[j, i]!r}"
            )
        bad = _pattern_mismatch(s, cubic_compliance(*self.independent(s)))
        if bad is not None:
            i, j = bad
            raise MaterialsError(
                f"compliance violates the cubic pattern at s[{i}][{j}]={s[i, j]!r}"
            )
        if s[0, 0] <= 0 or s[3, 3] <= 0:
            raise MaterialsError("compliance requires s11 > 0 and s44 > 0")
        object.__setattr__(self, "s", s)

    @staticmethod
    def independent(s: np.ndarray) -> tuple[float, float, float]:
        return float(s[0, 0]), float(s[0, 1]), float(s[3, 3])

    @property
    def s11(self) -> float:
        return float(self.s[0, 0])

    @property
    def s12(self) -> float:
        return float(self.s[0, 1])

    @property
    def s44(self) -> float:
        return float(self.s[3, 3])

    @classmethod
    def cubic(cls, s11: float, s12: float, s44: float) -> "ElasticCompliance":
        return cls(cubic_compliance(s11, s12, s44))

    def __eq__(self, other):
        if not isinstance(other, ElasticCompliance):
            return NotImplemented
        return np.array_equal(self.s, other.s)


@dataclass(frozen=True, eq=False)
class PiezoTensorVoigt:
    """Piezoelectric stress constants ``e`` (3x6, C/m^2).

    With ``check_3m=True`` the matrix must follow the trigonal 3m pattern of
    c-axis LiNbO3.  Rotated tensors carry ``check_3m=False``.
    """

    e: np.ndarray
    check_3m: bool = True

    def __post_init__(self):
        e = _frozen(self.e)
        if e.shape != (3, 6):
            raise MaterialsError(f"piezo tensor must be 3x6, got shape {e.shape}")
        if not np.all(np.isfinite(e)):
            raise MaterialsError("piezo tensor has non-finite entries")
        if self.check_3m:
            bad = _pattern_mismatch(e, trigonal_3m_piezo(*self.independent(e)))
            if bad is not None:
                i, j = bad
                raise MaterialsError(
                    f"piezo tensor violates the 3m pattern at e[{i}][{j}]={e[i, j]!r}"
                )
        object.__setattr__(self, "e", e)

    @staticmethod
    def independent(e: np.ndarray) -> tuple[float, float, float, float]:
        return float(e[0, 4]), float(e[1, 1]), float(e[2, 0]), float(e[2, 2])

    @classmethod
    def trigonal(cls, e15, e22, e31, e33) -> "PiezoTensorVoigt":
        return cls(trigonal_3m_piezo(e15, e22, e31, e33))

    def __eq__(self, other):
        if not isinstance(other, PiezoTensorVoigt):
            return NotImplemented
        return np.array_equal(self.e, other.e)


@dataclass(frozen=True)
class DeformationPotentials:
    """GaAs deformation potentials in eV.

    Sign convention: the hydrostatic gap shift is ``(a_c + a_v) * eps_h``,
    so ``a_c + a_v`` is the total gap deformation potential (about -8.3 eV).
    """

    a_c: float
    a_v: float
    b: float
    d: float

    def __post_init__(self):
        for name in ("a_c", "a_v", "b", "d"):
            v = float(getattr(self, name))
            if not np.isfinite(v):
                raise MaterialsError(f"deformation potential {name} is not finite")
            object.__setattr__(self, name, v)
        if self.b >= 0 or self.d >= 0:
            raise MaterialsError(
                f"GaAs shear potentials must be negative (b={self.b}, d={self.d})"
            )


@dataclass(frozen=True)
class MaterialSet:
    compliance: ElasticCompliance
    piezo_c_axis: PiezoTensorVoigt
    potentials: DeformationPotentials
    strain_transfer: float = 1.0

    def __post_init__(self):
        eta = float(self.strain_transfer)
        if not (0.0 < eta <= 1.0):
            raise MaterialsError(f"strain_transfer must lie in (0, 1], got {eta}")
        object.__setattr__(self, "strain_transfer", eta)

    def with_strain_transfer(self, eta: float) -> "MaterialSet":
        return dataclasses.replace(self, strain_transfer=eta)


# --- config parsing ---------------------------------------------------------


def _section(tree: Mapping[str, Any], path: str) -> Mapping[str, Any]:
    node: Any = tree
    for key in path.split("."):
        if not isinstance(node, Mapping) or key not in node:
            raise MaterialsError(f"missing config key: {path}")
        node = node[key]
    if not isinstance(node, Mapping):
        raise MaterialsError(f"config key {path} must be a section")
    return node


def _number(section: Mapping[str, Any], key: str, where: str) -> float:
    if key not in section:
        raise MaterialsError(f"missing config key: {where}.{key}")
    value = section[key]
    if isinstance(value, bool):
        raise MaterialsError(f"{where}.{key} must be a number, got {value!r}")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise MaterialsError(f"{where}.{key} must be a number, got {value!r}") from None


def _matrix(value: Any, shape: tuple[int, int], where: str) -> np.ndarray:
    try:
        arr = np.array(
            [[float(x) for x in row] for row in value], dtype=np.float64
        )
    except (TypeError, ValueError):
        raise MaterialsError(f"{where} must be a numeric matrix") from None
    if arr.shape != shape:
        raise MaterialsError(f"{where} must have shape {shape}, got {arr.shape}")
    return arr


def materials_from_mapping(tree: Mapping[str, Any]) -> MaterialSet:
    if not isinstance(tree, Mapping):
        raise MaterialsError("config root must be a mapping")

    comp = _section(tree, "gaas.compliance")
    if "matrix" in comp:
        s = _matrix(comp["matrix"], (6, 6), "gaas.compliance.matrix")
    else:
        w = "gaas.compliance"
        s = cubic_compliance(_number(comp, "s11", w), _number(comp, "s12", w), _number(comp, "s44", w))

    pz = _section(tree, "linbo3.piezo")
    if "matrix" in pz:
        e = _matrix(pz["matrix"], (3, 6), "linbo3.piezo.matrix")
    else:
        w = "linbo3.piezo"
        e = trigonal_3m_piezo(*(_number(pz, k, w) for k in ("e15", "e22", "e31", "e33")))

    dp = _section(tree, "gaas.deformation_potentials")
    w = "gaas.deformation_potentials"
    potentials = DeformationPotentials(*(_number(dp, k, w) for k in ("a_c", "a_v", "b", "d")))

    eta = 1.0
    if "interface" in tree:
        eta = _number(_section(tree, "interface"), "strain_transfer", "interface")

    return MaterialSet(ElasticCompliance(s), PiezoTensorVoigt(e), potentials, eta)


def load_materials(config_text: str) -> MaterialSet:
    """Parse YAML config text into a validated :class:`MaterialSet`."""
    try:
        tree = yaml.safe_load(config_text)
    except yaml.YAMLError as exc:
        raise MaterialsError(f"cannot parse materials config: {exc}") from None
    return materials_from_mapping(tree)


def load_materials_file(path: str | Path) -> MaterialSet:
    return load_materials(Path(path).read_text())


def materials_to_mapping(m: MaterialSet) -> dict:
    """Inverse of :func:`materials_from_mapping` (full matrices, so it is lossless)."""
    p = m.potentials
    return {
        "gaas": {
            "compliance": {"matrix": m.compliance.s.tolist()},
            "deformation_potentials": {"a_c": p.a_c, "a_v": p.a_v, "b": p.b, "d": p.d},
        },
        "linbo3": {"piezo": {"matrix": m.piezo_c_axis.e.tolist()}},
        "interface": {"strain_transfer": m.strain_transfer},
    }


def dump_materials(m: MaterialSet) -> str:
    # PyYAML writes floats with repr(), which round-trips float64 exactly
    return yaml.safe_dump(materials_to_mapping(m), sort_keys=False)


def shipped_config_text() -> str:
    return resources.files("qdlnsim.data").joinpath(DEFAULT_CONFIG).read_text()


def default_materials() -> MaterialSet:
    """Literature constants, identical to the shipped ``default_materials.yaml``.

    GaAs compliance from the stiffness C11=118.8, C12=53.8, C44=59.4 GPa;
    LiNbO3 stress constants from Warner et al. (1967); deformation
    potentials from Vurgaftman et al. (2001).
    """
    return MaterialSet(
        compliance=ElasticCompliance.cubic(1.17e-11, -3.66e-12, 1.68e-11),
        piezo_c_axis=PiezoTensorVoigt.trigonal(3.7, 2.5, 0.2, 1.3),
        potentials=DeformationPotentials(a_c=-7.17, a_v=-1.16, b=-2.0, d=-4.8),
        strain_transfer=1.0,
    )
