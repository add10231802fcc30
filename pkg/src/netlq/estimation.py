"""Posterior inference of the state from quantized observations.

Closed forms cover the two-step problem (joint conditioning on the
time-0 and time-1 cells); a seeded particle filter is the general
fallback for longer horizons and doubles as an independent oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .coding import Quantizer
from .gauss import EMPTY_PROB, Interval, Normal, trunc_moments, two_step_cell_integrals
from .lqcore import PlantParams


@dataclass(frozen=True)
class CellPosterior:
    """Mass and conditional moments of x_1 on one joint cell event
    {x_0 in cell0, x_1 in cell1}."""

    prob: float
    mean: float
    second_moment: float
    cell0: Interval
    cell1: Interval

    @property
    def is_empty(self) -> bool:
        return self.prob < EMPTY_PROB

    @property
    def variance(self) -> float:
        return self.second_moment - self.mean * self.mean


@dataclass(frozen=True)
class TwoStepPosterior:
    """Grid of cell posteriors: rows index the time-0 symbol, columns
    the time-1 symbol.  Row marginals and E[x_0 | z_0] come along for
    the w-bar and error-variance reductions."""

    cells: tuple[tuple[CellPosterior, ...], ...]
    row_probs: tuple[float, ...]
    x0_cell_means: tuple[float, ...]
    a: float
    u0: float

    @property
    def n_rows(self) -> int:
        return len(self.cells)

    @property
    def n_cols(self) -> int:
        return len(self.cells[0])

    def row(self, i: int) -> tuple[CellPosterior, ...]:
        return self.cells[i - 1]

    def row_is_empty(self, i: int) -> bool:
        return self.row_probs[i - 1] < EMPTY_PROB

    def cond_probs(self, i: int) -> np.ndarray:
        """P[z_1 = j | z_0 = i] for j = 1..N1."""
        if self.row_is_empty(i):
            raise ValueError(f"time-0 cell {i} carries no mass")
        p = np.array([c.prob for c in self.row(i)])
        return p / self.row_probs[i - 1]


def two_step_posterior(
    plant: PlantParams, u0: float, qz0: Quantizer, qz1: Quantizer
) -> TwoStepPosterior:
    """Joint cell posteriors of x_1 = a x_0 + u_0 + w_0 under the two
    quantizers.  Empty cells are flagged (NaN conditional moments)."""
    rows = []
    row_probs = []
    x0_means = []
    for c0 in qz0.cells():
        tm0 = trunc_moments(plant.x0, c0)
        row_probs.append(tm0.prob)
        x0_means.append(tm0.mean)
        row = []
        for c1 in qz1.cells():
            p, d1, d2 = two_step_cell_integrals(
                plant.x0, plant.a, u0, plant.sigma_w, c0, c1
            )
            if p < EMPTY_PROB:
                row.append(CellPosterior(0.0, math.nan, math.nan, c0, c1))
            else:
                row.append(CellPosterior(p, d1 / p, d2 / p, c0, c1))
        rows.append(tuple(row))
    return TwoStepPosterior(
        cells=tuple(rows),
        row_probs=tuple(row_probs),
        x0_cell_means=tuple(x0_means),
        a=plant.a,
        u0=u0,
    )


def _per_row_controls(
    posterior: TwoStepPosterior, u0: Union[float, Sequence[float], None]
) -> list[float]:
    if u0 is None:
        u0 = posterior.u0
    if isinstance(u0, (int, float)):
        return [float(u0)] * posterior.n_rows
    vals = [float(v) for v in u0]
    if len(vals) != posterior.n_rows:
        raise ValueError("need one control per time-0 cell")
    return vals


def wbar_moments(
    posterior: TwoStepPosterior,
    x0hat: Union[float, Sequence[float], None] = None,
    u0: Union[float, Sequence[float], None] = None,
) -> list[float]:
    """E[wbar_0^2 | z_0 = i] for each time-0 symbol i.

    wbar_0 = E[x_1 | z_0, z_1] - E[x_1 | z_0] with
    E[x_1 | z_0] = a x0hat + u_0.  By default x0hat is the posterior's
    own E[x_0 | z_0 = i]; pass explicit values (scalar or per-row) to
    probe mismatched estimates.  Empty rows yield NaN.
    """
    if x0hat is None:
        xh = list(posterior.x0_cell_means)
    elif isinstance(x0hat, (int, float)):
        xh = [float(x0hat)] * posterior.n_rows
    else:
        xh = [float(v) for v in x0hat]
    u = _per_row_controls(posterior, u0)

    out = []
    for i in range(1, posterior.n_rows + 1):
        if posterior.row_is_empty(i):
            out.append(math.nan)
            continue
        pred = posterior.a * xh[i - 1] + u[i - 1]
        pj = posterior.cond_probs(i)
        val = 0.0
        for j, cell in enumerate(posterior.row(i)):
            if cell.is_empty:
                continue
            dev = cell.mean - pred
            val += pj[j] * dev * dev
        out.append(val)
    return out


def filter_error_variance(posterior: TwoStepPosterior) -> list[float]:
    """E[(x_1 - E[x_1|z_0,z_1])^2 | z_0 = i]: the conditional-variance
    mixture over the time-1 symbol, per time-0 symbol."""
    out = []
    for i in range(1, posterior.n_rows + 1):
        if posterior.row_is_empty(i):
            out.append(math.nan)
            continue
        pj = posterior.cond_probs(i)
        val = 0.0
        for j, cell in enumerate(posterior.row(i)):
            if cell.is_empty:
                continue
            val += pj[j] * cell.variance
        out.append(val)
    return out


# ---------------------------------------------------------------------------
# Particle posterior for general horizons
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParticleCloud:
    """Weighted particle representation of a filtering posterior."""

    particles: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if self.particles.shape != self.weights.shape:
            raise ValueError("particles and weights must align")

    @property
    def ess(self) -> float:
        return 1.0 / float(np.sum(self.weights**2))

    @property
    def mean(self) -> float:
        return float(np.dot(self.weights, self.particles))

    @property
    def variance(self) -> float:
        m = self.mean
        return float(np.dot(self.weights, (self.particles - m) ** 2))


class ObservationConflictError(RuntimeError):
    """All particles fell outside an observed cell: the observation
    sequence is inconsistent with the model (or n_particles too small)."""


def _systematic_resample(particles, weights, rng):
    n = len(particles)
    positions = (rng.random() + np.arange(n)) / n
    cumulative = np.cumsum(weights)
    cumulative[-1] = 1.0
    idx = np.searchsorted(cumulative, positions)
    return particles[idx]


def particle_posterior(
    plant: PlantParams,
    controls: Union[Sequence[float], Callable[[int, float], float]],
    encoders: Sequence[Quantizer],
    observations: Sequence[int],
    n_particles: int,
    seed: int,
) -> ParticleCloud:
    """Particle approximation of E[x_t | z_0..z_t] after ``len(observations) - 1``
    steps.

    ``encoders[t]`` quantizes the raw state x_t; quantized observations
    have indicator likelihoods, so the weight update keeps exactly the
    particles inside the observed cell.  Systematic resampling triggers
    when the effective sample size drops below n/2.  Controls are either
    a realized sequence u_0..u_{t-1} or a callable (t, xhat_t) -> u_t
    evaluated on the running cloud mean.

    Deterministic for a fixed seed: all randomness flows from one
    counter-based stream in a fixed draw order.
    """
    if n_particles < 1:
        raise ValueError("n_particles must be >= 1")
    if len(observations) != len(encoders):
        raise ValueError("need one encoder per observation")
    rng = np.random.Generator(np.random.Philox(key=seed))

    if plant.x0.sigma == 0.0:
        x = np.full(n_particles, plant.x0.mu)
    else:
        x = plant.x0.mu + plant.x0.sigma * rng.standard_normal(n_particles)
    w = np.full(n_particles, 1.0 / n_particles)

    callable_controls = callable(controls)

    for t, z in enumerate(observations):
        cell = encoders[t].cell(z)
        inside = (x > cell.lo) & (x <= cell.hi)
        w = w * inside
        total = w.sum()
        if total <= 0.0:
            raise ObservationConflictError(
                f"no particle mass left in observed cell at t={t}"
            )
        w = w / total
        cloud = ParticleCloud(x, w)
        if cloud.ess < n_particles / 2:
            x = _systematic_resample(x, w, rng)
            w = np.full(n_particles, 1.0 / n_particles)
        if t < len(observations) - 1:
            if callable_controls:
                u = float(controls(t, float(np.dot(w, x))))
            else:
                u = float(controls[t])
            noise = (
                plant.sigma_w * rng.standard_normal(n_particles)
                if plant.sigma_w > 0.0
                else 0.0
            )
            x = plant.a * x + u + noise

    return ParticleCloud(x, w)
