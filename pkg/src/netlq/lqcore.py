"""Plant and cost definitions plus the backward gain/weight recursions
that define the certainty-equivalence control laws.

Time runs t = 0..T with a terminal state at T+1.  The gain arrays are
0-based over t = 0..T; ``beta`` and ``alpha`` carry the two boundary
entries at index T+1 (beta[T+1] = 1, alpha[T+1] = 0).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .gauss import Normal


@dataclass(frozen=True)
class PlantParams:
    """Scalar linear plant x_{t+1} = a x_t + u_t + w_t over t = 0..T."""

    a: float
    sigma_w: float
    x0: Normal
    T: int

    def __post_init__(self):
        if not math.isfinite(self.a):
            raise ValueError("plant gain a must be finite")
        if not (self.sigma_w >= 0.0) or math.isinf(self.sigma_w):
            raise ValueError("sigma_w must be finite and >= 0")
        if not isinstance(self.T, int) or self.T < 0:
            raise ValueError("horizon end T must be an integer >= 0")


@dataclass(frozen=True)
class CostParams:
    """Weights of the quadratic performance cost plus the communication
    multiplier m used by the priced channel models.

    q = 0 is accepted (the aggregate-squared-error special case) even
    though the cost definition states q > 0.
    """

    p: float
    q: float
    m: float = 0.0

    def __post_init__(self):
        if not (self.p > 0.0) or math.isinf(self.p):
            raise ValueError("p must be finite and > 0")
        if not (self.q >= 0.0) or math.isinf(self.q):
            raise ValueError("q must be finite and >= 0")
        if not (self.m >= 0.0) or math.isinf(self.m):
            raise ValueError("m must be finite and >= 0")


@dataclass(frozen=True)
class GainSchedule:
    """Backward-recursion coefficients.

    k_star[t]  control gain, t = 0..T
    beta[t]    value-function weight, t = 0..T+1 (beta[T+1] = 1)
    lam[t]     distortion weight, t = 0..T
    alpha[t]   accumulated weight, t = 0..T+1 (alpha[T+1] = 0)
    """

    k_star: tuple[float, ...]
    beta: tuple[float, ...]
    lam: tuple[float, ...]
    alpha: tuple[float, ...]

    @property
    def T(self) -> int:
        return len(self.k_star) - 1

    def to_json_dict(self) -> dict:
        return {
            "k_star": list(self.k_star),
            "beta": list(self.beta),
            "lambda": list(self.lam),
            "alpha": list(self.alpha),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_json_dict(), **kwargs)

    @classmethod
    def from_json_dict(cls, d: dict) -> "GainSchedule":
        return cls(
            k_star=tuple(d["k_star"]),
            beta=tuple(d["beta"]),
            lam=tuple(d["lambda"]),
            alpha=tuple(d["alpha"]),
        )


def gain_schedule(plant: PlantParams, cost: CostParams) -> GainSchedule:
    """Run the backward recursion for k*, beta, lambda, alpha.

    beta_{T+1} = 1, alpha_{T+1} = 0 and, going backwards,

        k*_i    = a beta_{i+1} / (q + beta_{i+1})
        beta_i  = p + a^2 q beta_{i+1} / (q + beta_{i+1})
        lam_i   = a^2 beta_{i+1}^2 / (q + beta_{i+1})
        alpha_i = beta_{i+1} + alpha_{i+1}
    """
    a, p, q = plant.a, cost.p, cost.q
    T = plant.T
    beta = [0.0] * (T + 2)
    alpha = [0.0] * (T + 2)
    k_star = [0.0] * (T + 1)
    lam = [0.0] * (T + 1)
    beta[T + 1] = 1.0
    alpha[T + 1] = 0.0
    for i in range(T, -1, -1):
        bn = beta[i + 1]
        k_star[i] = a * bn / (q + bn)
        lam[i] = a * a * bn * bn / (q + bn)
        beta[i] = p + a * a * q * bn / (q + bn)
        alpha[i] = bn + alpha[i + 1]
    return GainSchedule(tuple(k_star), tuple(beta), tuple(lam), tuple(alpha))


def ce_control(schedule: GainSchedule, t: int, xhat: float) -> float:
    """Certainty-equivalence control -k*_t xhat for 0 <= t <= T."""
    if not 0 <= t <= schedule.T:
        raise IndexError(f"time index {t} outside 0..{schedule.T}")
    return -schedule.k_star[t] * xhat


def stage_cost(
    x: float,
    u: float,
    cost: CostParams,
    *,
    terminal: bool = False,
    initial: bool = False,
) -> float:
    """One stage of the quadratic performance cost.

    Interior stages contribute p x^2 + q u^2.  The terminal state
    contributes x^2 with no control term.  The time-0 stage carries no
    state term (the state sum starts at t = 1), so ``initial`` charges
    q u^2 only.
    """
    if terminal:
        return x * x
    if initial:
        return cost.q * u * u
    return cost.p * x * x + cost.q * u * u
