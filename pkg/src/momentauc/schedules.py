"""Step-size schedules, indexed by the 1-based count of gradient rounds."""
from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class ConstantStep:
    eta: float

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")

    def __call__(self, t: int) -> float:
        return self.eta

    def to_dict(self) -> dict:
        return {"kind": "constant", "eta": self.eta}


@dataclass(frozen=True)
class InverseTimeStep:
    """eta_t = 1 / (lam * t), the strongly-convex OGD schedule."""

    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")

    def __call__(self, t: int) -> float:
        return 1.0 / (self.lam * t)

    def to_dict(self) -> dict:
        return {"kind": "inverse", "lam": self.lam}


@dataclass(frozen=True)
class HorizonStep:
    """Constant eta = 1 / (4 + lam + sqrt((4 + lam)^2 + (4 + lam) lam T L*)).

    Tuned for the square loss when the horizon T and the hindsight optimal
    cumulative loss L* are known in advance.
    """

    lam: float
    horizon: int
    l_star: float

    def __post_init__(self):
        if not self.lam > 0 or self.horizon < 1 or self.l_star < 0:
            raise ValueError("need lam > 0, horizon >= 1, l_star >= 0")

    @property
    def eta(self) -> float:
        a = 4.0 + self.lam
        return 1.0 / (a + math.sqrt(a * a + a * self.lam * self.horizon * self.l_star))

    def __call__(self, t: int) -> float:
        return self.eta

    def to_dict(self) -> dict:
        return {"kind": "horizon", "lam": self.lam, "horizon": self.horizon, "l_star": self.l_star}


def schedule_from_dict(d: dict):
    kind = d["kind"]
    if kind == "constant":
        return ConstantStep(d["eta"])
    if kind == "inverse":
        return InverseTimeStep(d["lam"])
    if kind == "horizon":
        return HorizonStep(d["lam"], d["horizon"], d["l_star"])
    raise ValueError(f"unknown schedule kind {kind!r}")
