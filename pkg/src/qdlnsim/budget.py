"""Photon throughput from emitter to detector, and coincidence rates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping

import yaml

from .materials import MaterialsError, shipped_config_text

__all__ = [
    "STAGES",
    "EfficiencyChain",
    "end_to_end",
    "coincidence_rate",
    "BudgetConfig",
    "budget_from_mapping",
    "load_budget",
    "default_budget",
]

STAGES = ("beta_factor", "taper", "propagation", "mmi_split", "grating", "filter", "detector")


def _check_eff(name: str, v: float) -> float:
    v = float(v)
    if not (0.0 < v <= 1.0):
        raise ValueError(f"stage {name} efficiency must lie in (0, 1], got {v}")
    return v


@dataclass(frozen=True)
class EfficiencyChain:
    """Stage efficiencies in (0, 1]; propagation is given as a loss and a length.

    Any stage left as ``None`` is absent, which is the same as a lossless one.
    """

    beta_factor: float | None = None
    taper: float | None = None
    propagation_db_per_mm: float = 0.0
    propagation_mm: float = 0.0
    mmi_split: float | None = None
    grating: float | None = None
    filter: float | None = None
    detector: float | None = None
    extra: dict = field(default_factory=dict)  # any further named stages

    def __post_init__(self):
        for name in ("beta_factor", "taper", "mmi_split", "grating", "filter", "detector"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, _check_eff(name, v))
        if self.propagation_mm < 0:
            raise ValueError("propagation length must be non-negative")
        if self.propagation_db_per_mm < 0:
            raise ValueError("propagation loss must be non-negative")
        object.__setattr__(self, "extra", {k: _check_eff(k, v) for k, v in self.extra.items()})

    @property
    def propagation(self) -> float:
        return 10.0 ** (-self.propagation_db_per_mm * self.propagation_mm / 10.0)

    def stages(self) -> dict[str, float]:
        out = {}
        for name in STAGES:
            v = self.propagation if name == "propagation" else getattr(self, name)
            if v is not None:
                out[name] = v
        out.update(self.extra)
        return out

    def with_stage(self, name: str, value: float) -> "EfficiencyChain":
        if name in STAGES and name != "propagation":
            return replace(self, **{name: value})
        return replace(self, extra={**self.extra, name: value})


def end_to_end(chain: EfficiencyChain) -> float:
    """Product of all stage efficiencies."""
    return math.prod(chain.stages().values())


def coincidence_rate(
    pulse_rate: float, chain_a: EfficiencyChain, chain_b: EfficiencyChain, same_port_prob: float
) -> float:
    """Expected coincidences per second (Hz)."""
    if pulse_rate < 0:
        raise ValueError("pulse_rate must be non-negative")
    if not 0.0 <= same_port_prob <= 1.0:
        raise ValueError("same_port_prob must lie in [0, 1]")
    return pulse_rate * end_to_end(chain_a) * end_to_end(chain_b) * same_port_prob


@dataclass(frozen=True)
class BudgetConfig:
    pulse_rate: float  # Hz
    chains: dict[str, EfficiencyChain]


def _chain(name: str, node: Mapping[str, Any], db_per_mm: float) -> EfficiencyChain:
    if not isinstance(node, Mapping):
        raise MaterialsError(f"budget.chains.{name} must be a section")
    known = {"beta_factor", "taper", "mmi_split", "grating", "filter", "detector", "propagation_mm"}
    kwargs, extra = {}, {}
    for k, v in node.items():
        try:
            v = float(v)
        except (TypeError, ValueError):
            raise MaterialsError(f"budget.chains.{name}.{k} must be a number, got {v!r}") from None
        (kwargs if k in known else extra)[k] = v
    try:
        return EfficiencyChain(propagation_db_per_mm=db_per_mm, extra=extra, **kwargs)
    except ValueError as exc:
        raise MaterialsError(f"budget.chains.{name}: {exc}") from None


def budget_from_mapping(tree: Mapping[str, Any]) -> BudgetConfig:
    node = tree.get("budget") if isinstance(tree, Mapping) else None
    if not isinstance(node, Mapping):
        raise MaterialsError("missing config key: budget")
    try:
        rate = float(node["pulse_rate_hz"])
        db = float(node.get("propagation_db_per_mm", 0.0))
        chains = node["chains"]
    except KeyError as exc:
        raise MaterialsError(f"missing config key: budget.{exc.args[0]}") from None
    except (TypeError, ValueError):
        raise MaterialsError("budget numbers must be numeric") from None
    if not isinstance(chains, Mapping) or not chains:
        raise MaterialsError("budget.chains must be a non-empty section")
    return BudgetConfig(rate, {str(k): _chain(str(k), v, db) for k, v in chains.items()})


def load_budget(config_text: str) -> BudgetConfig:
    try:
        tree = yaml.safe_load(config_text)
    except yaml.YAMLError as exc:
        raise MaterialsError(f"cannot parse config: {exc}") from None
    return budget_from_mapping(tree)


def default_budget() -> BudgetConfig:
    return load_budget(shipped_config_text())
