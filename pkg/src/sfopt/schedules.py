"""Learning-rate schedules eta_t, evaluated at 1-based step indices."""

from __future__ import annotations

import math

from .exceptions import OutOfHorizon

__all__ = ["ConstantSchedule", "CosineSchedule", "make_schedule"]


def _check_step(t: int) -> int:
    t = int(t)
    if t < 1:
        raise ValueError(f"step index must be >= 1, got {t}")
    return t


class ConstantSchedule:
    """eta_t = eta0 for every step."""

    kind = "constant"

    def __init__(self, eta0: float = 1.0):
        if not (eta0 > 0.0):
            raise ValueError(f"eta0 must be positive, got {eta0}")
        self.eta0 = float(eta0)

    def __call__(self, t: int) -> float:
        _check_step(t)
        return self.eta0

    def __repr__(self):
        return f"ConstantSchedule(eta0={self.eta0})"


class CosineSchedule:
    """Cosine annealing over a fixed horizon of T steps.

    eta_t = eta0 * (1 + cos(pi * (t - 1) / T)) / 2, so eta_1 = eta0 and
    eta_{T+1} = 0.  Evaluating past step T + 1 raises :class:`OutOfHorizon`;
    a run that outlives its schedule is a config bug, not something to guess
    around.
    """

    kind = "cosine"

    def __init__(self, eta0: float, horizon: int):
        if not (eta0 > 0.0):
            raise ValueError(f"eta0 must be positive, got {eta0}")
        horizon = int(horizon)
        if horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {horizon}")
        self.eta0 = float(eta0)
        self.horizon = horizon

    def __call__(self, t: int) -> float:
        t = _check_step(t)
        if t > self.horizon + 1:
            raise OutOfHorizon(f"step {t} past cosine horizon {self.horizon}")
        return self.eta0 * 0.5 * (1.0 + math.cos(math.pi * (t - 1) / self.horizon))

    def __repr__(self):
        return f"CosineSchedule(eta0={self.eta0}, horizon={self.horizon})"


def make_schedule(kind: str, eta0: float, horizon: int | None = None):
    """Build a schedule from its config-file spelling."""
    if kind == "constant":
        return ConstantSchedule(eta0)
    if kind == "cosine":
        if horizon is None:
            raise ValueError("cosine schedule needs a horizon")
        return CosineSchedule(eta0, horizon)
    raise ValueError(f"unknown schedule kind {kind!r}")
