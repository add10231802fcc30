"""Encoders and channel models: quantizers, the control-free transform
and its encoder wrapper, event-trigger silence envelopes, and the
communication-cost accounting for the priced channel variants.

Cell boundary convention: cells are right-closed, so quantize(x) = i
iff x lies in (theta_{i-1}, theta_i] with theta_0 = -inf and
theta_N = +inf.  Boundaries carry no mass for continuous inputs; the
fixed rule keeps tests deterministic.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

from .gauss import Interval


@dataclass(frozen=True)
class Quantizer:
    """Finite quantizer defined by N-1 strictly increasing thresholds.

    Labels are 1..N.  N = 1 (no thresholds) is the one-cell,
    no-information quantizer.
    """

    thresholds: tuple[float, ...]

    def __post_init__(self):
        th = tuple(float(t) for t in self.thresholds)
        object.__setattr__(self, "thresholds", th)
        for t in th:
            if not math.isfinite(t):
                raise ValueError("thresholds must be finite")
        if any(b <= a for a, b in zip(th, th[1:])):
            raise ValueError("thresholds must be strictly increasing")

    @property
    def n_cells(self) -> int:
        return len(self.thresholds) + 1

    def cell(self, label: int) -> Interval:
        """Cell (theta_{i-1}, theta_i] for label i in 1..N."""
        if not 1 <= label <= self.n_cells:
            raise IndexError(f"label {label} outside 1..{self.n_cells}")
        lo = -math.inf if label == 1 else self.thresholds[label - 2]
        hi = math.inf if label == self.n_cells else self.thresholds[label - 1]
        return Interval(lo, hi)

    def cells(self) -> list[Interval]:
        return [self.cell(i) for i in range(1, self.n_cells + 1)]

    def apply(self, x: float) -> int:
        return bisect_left(self.thresholds, x) + 1

    def shifted(self, c: float) -> "Quantizer":
        """Quantizer with every threshold translated by c."""
        return Quantizer(tuple(t + c for t in self.thresholds))


def quantize(qz: Quantizer, x: float) -> int:
    """Cell label of x under the right-closed boundary convention."""
    return qz.apply(x)


@dataclass(frozen=True)
class InnovationTracker:
    """Running accumulated effect of past controls.

    After t updates with controls u_0..u_{t-1}, ``accumulated`` equals
    sum_j a^{t-1-j} u_j, so zeta_t = x_t - accumulated satisfies
    zeta_{t+1} = a zeta_t + w_t.
    """

    a: float
    accumulated: float = 0.0


def innovation_step(tr: InnovationTracker, u: float) -> InnovationTracker:
    """Advance the tracker by one applied control."""
    return InnovationTracker(tr.a, tr.a * tr.accumulated + u)


def innovation_encode(qz: Quantizer, tr: InnovationTracker, zeta: float) -> int:
    """Encode the control-free state; pathwise equal to quantizing the
    raw state x_t = zeta_t + accumulated with the same cells."""
    return qz.apply(zeta + tr.accumulated)


@dataclass(frozen=True)
class SilenceEnvelope:
    """Per-time silence intervals for t = 1..T.

    A transmission occurs exactly when x_t falls outside interval_t; in
    the exactly-one-sample regime a sample is forced at t = T if none
    has occurred.
    """

    intervals: tuple[Interval, ...]

    @property
    def T(self) -> int:
        return len(self.intervals)

    def interval_at(self, t: int) -> Interval:
        if not 1 <= t <= self.T:
            raise IndexError(f"time {t} outside 1..{self.T}")
        return self.intervals[t - 1]


@dataclass(frozen=True)
class EnvelopeDecision:
    sample: bool
    value: float | None = None


SILENCE = EnvelopeDecision(False, None)


def envelope_decide(
    env: SilenceEnvelope, t: int, x: float, already_sampled: bool
) -> EnvelopeDecision:
    """SAMPLE(x) on envelope exit (or forced at t = T), else SILENCE."""
    if not 1 <= t <= env.T:
        raise IndexError(f"time {t} outside 1..{env.T}")
    if already_sampled:
        return SILENCE
    if not env.interval_at(t).contains(x) or t == env.T:
        return EnvelopeDecision(True, x)
    return SILENCE


# ---------------------------------------------------------------------------
# Channel models and communication cost accounting
# ---------------------------------------------------------------------------


class _Infeasible:
    """Sentinel for a violated hard channel constraint (the +inf branch
    of the communication cost).  A value, not an exception."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INFEASIBLE"

    def __bool__(self):
        return False


INFEASIBLE = _Infeasible()


@dataclass(frozen=True)
class FixedRate:
    """Fixed-alphabet channel: hard per-time rate, zero explicit cost."""

    N: int

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("alphabet size N must be >= 1")


@dataclass(frozen=True)
class VariableRate:
    """Alphabet size chosen per time; log2 rates priced by m, with a
    per-time cap eta_bar and an average-rate cap R over the horizon."""

    eta_bar: int
    rate_cap: float
    m: float = 0.0

    def __post_init__(self):
        if self.eta_bar < 1:
            raise ValueError("eta_bar must be >= 1")
        if self.rate_cap < 0 or self.rate_cap > math.log2(self.eta_bar) + 1e-12:
            raise ValueError("need 0 <= rate_cap <= log2(eta_bar)")
        if self.m < 0:
            raise ValueError("m must be >= 0")


@dataclass(frozen=True)
class EventTriggered:
    """Real-valued samples at encoder-chosen times, with a hard budget
    on the total sample count and a per-sample price m."""

    sample_budget: int
    m: float = 0.0

    def __post_init__(self):
        if self.sample_budget < 0:
            raise ValueError("sample budget must be >= 0")
        if self.m < 0:
            raise ValueError("m must be >= 0")


def _phi_square(iota: float) -> float:
    return iota * iota


@dataclass(frozen=True)
class AdditiveNoise:
    """Analog channel z = iota + chi with amplitude cap, average-power
    cap, and per-use price m * phi(iota); phi defaults to the square."""

    sigma_chi: float
    amp_cap: float
    power_cap: float
    m: float = 0.0
    phi: Callable[[float], float] = field(default=_phi_square, compare=False)

    def __post_init__(self):
        if self.sigma_chi < 0:
            raise ValueError("sigma_chi must be >= 0")
        if self.amp_cap < 0 or self.power_cap < 0 or self.m < 0:
            raise ValueError("caps and m must be >= 0")


ChannelSpec = Union[FixedRate, VariableRate, EventTriggered, AdditiveNoise]

CommCost = Union[float, _Infeasible]


def comm_cost(spec: ChannelSpec, usage: Sequence[float]) -> CommCost:
    """Communication cost of one realized usage log.

    The log holds one entry per time t = 0..T: alphabet sizes for
    VariableRate, 0/1 sample indicators for EventTriggered, channel
    input values for AdditiveNoise (FixedRate ignores the log).  Hard
    constraint violations return INFEASIBLE; caps are checked on the
    realized totals of the run.
    """
    if isinstance(spec, FixedRate):
        return 0.0

    if isinstance(spec, VariableRate):
        total = 0.0
        for eta in usage:
            if eta < 1 or eta > spec.eta_bar:
                return INFEASIBLE
            total += math.log2(eta)
        if total > spec.rate_cap * len(usage) + 1e-12:
            return INFEASIBLE
        return spec.m * total

    if isinstance(spec, EventTriggered):
        count = 0
        for s in usage:
            if s not in (0, 1):
                raise ValueError("event-triggered usage entries must be 0 or 1")
            count += s
        if count > spec.sample_budget:
            return INFEASIBLE
        return spec.m * count

    if isinstance(spec, AdditiveNoise):
        total = 0.0
        for iota in usage:
            if abs(iota) > spec.amp_cap:
                return INFEASIBLE
            total += spec.phi(iota)
        if total > spec.power_cap * len(usage) + 1e-12:
            return INFEASIBLE
        return spec.m * total

    raise TypeError(f"unknown channel spec: {spec!r}")
