"""Scaled Majda model algebra: flux, ignition, end states and classification."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, replace

import numpy as np


class OutsidePhysicalRange(ValueError):
    """Raised when (q, u_plus) lies outside the admissible set."""


class DetonationClass(enum.Enum):
    STRONG = "Strong"
    WEAK = "Weak"
    CHAPMAN_JOUGUET = "ChapmanJouguet"
    NOT_A_DETONATION = "NotADetonation"


CJ_TOL = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the scaled model (wave speed and viscosity are 1)."""

    q: float = 0.499
    D: float = 1.0
    E_A: float = 1.0
    u_ig: float = 0.1
    u_plus: float = 0.0
    s: float = 1.0
    B: float = 1.0

    def validate(self) -> None:
        """Raise ValueError/OutsidePhysicalRange naming the first violated invariant."""
        for name in ("q", "D", "E_A", "u_ig", "u_plus", "s", "B"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.s != 1.0 or self.B != 1.0:
            raise ValueError("scaled parameters require s = 1 and B = 1")
        if self.D <= 0:
            raise ValueError(f"D must be positive (got {self.D})")
        if self.E_A <= 0:
            raise ValueError(f"E_A must be positive (got {self.E_A})")
        if self.u_plus < 0:
            raise OutsidePhysicalRange(f"u_plus must be >= 0 (got {self.u_plus})")
        qmax = 0.5 * (self.u_plus - 1.0) ** 2
        if not (0.0 <= self.q < qmax) or self.u_plus >= 1.0:
            raise OutsidePhysicalRange(
                f"q = {self.q} outside the physical range 0 <= q < (u_plus - 1)^2 / 2 = {qmax}"
            )
        u_minus = burned_state(self.q, self.u_plus)
        if u_minus <= self.u_plus:
            raise OutsidePhysicalRange(
                f"degenerate end states: u_minus = u_plus = {u_minus} (zero heat release)"
            )
        if not (self.u_plus < self.u_ig < u_minus):
            raise ValueError(
                f"ignition threshold u_ig = {self.u_ig} must lie in (u_plus, u_minus) = "
                f"({self.u_plus}, {u_minus})"
            )

    def with_(self, **changes) -> ModelParams:
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> ModelParams:
        return cls(**{k: float(data[k]) for k in ("q", "D", "E_A", "u_ig", "u_plus", "s", "B") if k in data})

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> ModelParams:
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class EndStates:
    u_minus: float
    u_plus: float
    z_minus: float = 0.0
    z_plus: float = 1.0

    @property
    def a_minus(self) -> float:
        return flux_prime(self.u_minus)

    @property
    def a_plus(self) -> float:
        return flux_prime(self.u_plus)

    @classmethod
    def from_params(cls, params: ModelParams) -> EndStates:
        return cls(u_minus=burned_state(params.q, params.u_plus), u_plus=params.u_plus)


def flux(u):
    return 0.5 * u * u


def flux_prime(u):
    return u


def ignition(u, params: ModelParams):
    """Arrhenius ignition function, identically zero at or below u_ig."""
    if np.ndim(u) == 0:
        t = u - params.u_ig
        return math.exp(-params.E_A / t) if t > 0 else 0.0
    u = np.asarray(u, dtype=float)
    t = u - params.u_ig
    out = np.zeros_like(t)
    m = t > 0
    out[m] = np.exp(-params.E_A / t[m])
    return out


def ignition_prime(u, params: ModelParams):
    if np.ndim(u) == 0:
        t = u - params.u_ig
        return math.exp(-params.E_A / t) * params.E_A / (t * t) if t > 0 else 0.0
    u = np.asarray(u, dtype=float)
    t = u - params.u_ig
    out = np.zeros_like(t)
    m = t > 0
    out[m] = np.exp(-params.E_A / t[m]) * params.E_A / t[m] ** 2
    return out


def rh_residual(u_minus: float, u_plus: float, q: float) -> float:
    return 0.5 * (u_plus**2 - u_minus**2) - (u_plus - u_minus) - q


def burned_state(q: float, u_plus: float) -> float:
    """Weak-branch burned state solving the scaled Rankine-Hugoniot condition."""
    disc = 1.0 - 2.0 * (q + u_plus * (1.0 - 0.5 * u_plus))
    if disc < 0:
        raise OutsidePhysicalRange(
            f"(q={q}, u_plus={u_plus}) outside the physical range: negative discriminant {disc}"
        )
    return 1.0 - math.sqrt(disc)


def cj_speed(q: float, u_plus: float) -> float:
    """Chapman-Jouguet speed for the Burgers flux (unscaled variables)."""
    a = u_plus + q
    return a + math.sqrt(max(a * a - u_plus * u_plus, 0.0))


def classify(s: float, a_minus: float, a_plus: float) -> DetonationClass:
    if s > a_plus and abs(a_minus - s) <= CJ_TOL:
        return DetonationClass.CHAPMAN_JOUGUET
    if s > a_minus and s > a_plus:
        return DetonationClass.WEAK
    if a_minus > s > a_plus:
        return DetonationClass.STRONG
    return DetonationClass.NOT_A_DETONATION


@dataclass(frozen=True)
class RawParams:
    """Unscaled model parameters (before the speed/viscosity normalization)."""

    s: float
    B: float
    k: float
    q: float
    D: float
    u_plus: float
    u_ig: float
    E_A: float


def scale(raw: RawParams) -> tuple[ModelParams, float]:
    """Normalize to unit speed and viscosity; returns (params, scaled k).

    The state variable is divided by s, so every quantity carrying state
    units (q, u_plus, u_ig, E_A) is divided by s as well.
    """
    if raw.s <= 0 or raw.B <= 0:
        raise ValueError("scaling needs s > 0 and B > 0")
    params = ModelParams(
        q=raw.q / raw.s,
        D=raw.D / raw.B,
        E_A=raw.E_A / raw.s,
        u_ig=raw.u_ig / raw.s,
        u_plus=raw.u_plus / raw.s,
    )
    return params, raw.k * raw.B / raw.s**2
