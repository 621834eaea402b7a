"""SLE parameters and the exponents derived from kappa."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass


class Variant(enum.Enum):
    RADIAL = "radial"
    CHORDAL = "chordal"
    TWO_SIDED = "two-sided"
    CUSTOM = "custom"

    @classmethod
    def parse(cls, name: str) -> "Variant":
        key = name.strip().lower().replace("_", "-")
        aliases = {"two-sided-radial": "two-sided", "twosided": "two-sided"}
        return cls(aliases.get(key, key))


@dataclass(frozen=True)
class SleParams:
    kappa: float
    variant: Variant
    beta: float

    @property
    def a(self) -> float:
        return 2.0 / self.kappa

    @property
    def alpha(self) -> float:
        return 8.0 / self.kappa - 1.0

    @property
    def b(self) -> float:
        """Boundary scaling exponent (3a - 1)/2."""
        return (3.0 * self.a - 1.0) / 2.0

    @property
    def d(self) -> float:
        # informational only; 1 + kappa/8 is the trace dimension for kappa < 8
        return 1.0 + self.kappa / 8.0

    @property
    def absorbing(self) -> bool:
        """True when the angle process can hit {0, pi} in finite time."""
        return self.beta < 0.5

    def to_dict(self) -> dict:
        return {"kappa": self.kappa, "variant": self.variant.value, "beta": self.beta}


def variant_beta(kappa: float, variant: Variant) -> float:
    a = 2.0 / kappa
    if variant is Variant.RADIAL:
        return a
    if variant is Variant.CHORDAL:
        return 1.0 - 2.0 * a
    if variant is Variant.TWO_SIDED:
        return 2.0 * a
    raise ValueError("custom variant needs an explicit beta")


def make_params(kappa: float, variant: Variant | str = Variant.RADIAL,
                beta: float | None = None) -> SleParams:
    """Build :class:`SleParams`; ``beta`` is only used for ``Variant.CUSTOM``."""
    if isinstance(variant, str):
        variant = Variant.parse(variant)
    kappa = float(kappa)
    if not (0.0 < kappa < 8.0) or not math.isfinite(kappa):
        raise ValueError(f"kappa must lie in (0, 8), got {kappa}")
    if variant is Variant.CUSTOM:
        if beta is None or not math.isfinite(beta):
            raise ValueError("custom variant needs a finite beta")
        return SleParams(kappa, variant, float(beta))
    if beta is not None and not math.isclose(beta, variant_beta(kappa, variant)):
        raise ValueError(f"beta={beta} inconsistent with variant {variant.value}")
    return SleParams(kappa, variant, variant_beta(kappa, variant))


def green_exponent_weight(theta: float, params: SleParams) -> float:
    """Two-sided radial Green's function (sin theta)^(4a-1), constant set to 1."""
    if not (0.0 < theta < math.pi):
        raise ValueError(f"theta must lie in (0, pi), got {theta}")
    return math.sin(theta) ** (4.0 * params.a - 1.0)


def chordal_partition_weight(theta1: float, theta2: float, params: SleParams) -> float:
    """Chordal partition function |sin(theta1 - theta2)|^(1-3a) in the disk."""
    s = abs(math.sin(theta1 - theta2))
    if s < 1e-300:
        raise ValueError("partition function is singular at coincident points")
    return s ** (1.0 - 3.0 * params.a)
