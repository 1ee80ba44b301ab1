"""Binary-defect model of angle-of-attack (AOA) sensors.

AOA values are normalised to [0, 1].  A sensor is defective with probability
``f``; a defective sensor reads a fresh uniform value on [0, 1] each time it is
sampled, a healthy one reads the true AOA exactly.

Scalar functions take any stream exposing ``.random()`` (``random.Random`` or
``numpy.random.Generator``).  ``sample_panels`` is the vectorised counterpart
used by the Monte Carlo estimators.
"""
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class FaultModel:
    defect_probability: float

    def __post_init__(self):
        if not 0.0 <= self.defect_probability <= 1.0:
            raise ValueError(f"defect probability must lie in [0, 1], got {self.defect_probability!r}")


@dataclass(frozen=True)
class ThresholdConfig:
    """Trigger threshold ``a`` and optional disagreement threshold ``d``."""

    trigger_threshold: float
    disagreement_threshold: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.trigger_threshold < 1.0:
            raise ValueError(f"trigger threshold must lie in (0, 1), got {self.trigger_threshold!r}")
        d = self.disagreement_threshold
        if d is not None and not 0.0 < d < 1.0:
            raise ValueError(f"disagreement threshold must lie in (0, 1), got {d!r}")


@dataclass(frozen=True)
class PanelSample:
    true_aoa: float
    defect_mask: Tuple[bool, ...]
    readings: Tuple[float, ...]

    def __post_init__(self):
        if len(self.readings) != len(self.defect_mask) or not self.readings:
            raise ValueError("readings and defect_mask must have equal, non-zero length")
        _check_aoa(self.true_aoa)
        for r in self.readings:
            _check_aoa(r)
        for bad, r in zip(self.defect_mask, self.readings):
            if not bad and r != self.true_aoa:
                raise ValueError("a non-defective sensor must read the true AOA exactly")

    @property
    def n(self) -> int:
        return len(self.readings)


def _check_aoa(x: float) -> None:
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"normalised AOA must lie in [0, 1], got {x!r}")


def draw_defect_mask(fault: FaultModel, n: int, rng) -> List[bool]:
    if n < 1:
        raise ValueError(f"sensor count must be >= 1, got {n}")
    f = fault.defect_probability
    return [rng.random() < f for _ in range(n)]


def read_sensor(true_aoa: float, defective: bool, rng) -> float:
    _check_aoa(true_aoa)
    if defective:
        return float(rng.random())
    return true_aoa


def sample_panel(true_aoa: float, fault: FaultModel, n: int, rng) -> PanelSample:
    _check_aoa(true_aoa)
    mask = draw_defect_mask(fault, n, rng)
    return panel_from_mask(true_aoa, mask, rng)


def panel_from_mask(true_aoa: float, mask: Sequence[bool], rng) -> PanelSample:
    """Read every sensor once given a fixed defect mask."""
    readings = tuple(read_sensor(true_aoa, bad, rng) for bad in mask)
    return PanelSample(true_aoa, tuple(bool(b) for b in mask), readings)


def sample_panels(true_aoa: np.ndarray, fault: FaultModel, n: int,
                  rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorised ``sample_panel``: one panel per entry of ``true_aoa``.

    Returns ``(mask, readings)`` with shape ``(len(true_aoa), n)``.
    """
    if n < 1:
        raise ValueError(f"sensor count must be >= 1, got {n}")
    true_aoa = np.asarray(true_aoa, dtype=np.float64)
    m = true_aoa.shape[0]
    mask = rng.random((m, n)) < fault.defect_probability
    noise = rng.random((m, n))
    readings = np.where(mask, noise, true_aoa[:, None])
    return mask, readings
