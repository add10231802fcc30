"""Seeded closed-loop Monte Carlo: plant + encoder + channel +
controller over the horizon, accumulating the quadratic cost plus the
channel's communication cost.

Determinism contract: for a fixed (scenario, n_paths, seed) the result
is bit-identical regardless of worker count.  Paths draw their variates
from counter-based streams keyed by a fixed-size chunk index, workers
write disjoint slices of preallocated arrays, and the final reduction
is a single fixed-order pairwise summation.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence, Union

import numpy as np
from scipy.special import ndtri

from .coding import (
    INFEASIBLE,
    AdditiveNoise,
    ChannelSpec,
    EventTriggered,
    FixedRate,
    Quantizer,
    SilenceEnvelope,
    VariableRate,
)
from .envelope import PREDICTOR_LINEAR, ZOH, _pre_sample_controls
from .estimation import two_step_posterior
from .gauss import Normal, trunc_moments
from .lqcore import CostParams, GainSchedule, PlantParams, gain_schedule

CHUNK = 8192  # fixed chunk size; part of the reproducibility contract


def resolve_threads() -> int:
    """Worker cap from NETLQ_THREADS, defaulting to machine parallelism."""
    env = os.environ.get("NETLQ_THREADS")
    if env:
        n = int(env)
        if n < 1:
            raise ValueError("NETLQ_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


class ScenarioError(ValueError):
    """Invalid scenario wiring."""


# ---------------------------------------------------------------------------
# Scenario vocabulary
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseLaw:
    """Zero-mean process-noise law with std sigma_w, sampled by inverse
    CDF from uniforms so that counter-based streams stay reproducible.
    ``custom`` maps uniforms in (0,1) to zero-mean unit-variance values.
    """

    kind: str = "gaussian"  # gaussian | uniform | laplace | custom
    custom: Callable[[np.ndarray], np.ndarray] | None = field(
        default=None, compare=False
    )

    def standardized(self, u: np.ndarray) -> np.ndarray:
        if self.kind == "gaussian":
            return ndtri(u)
        if self.kind == "uniform":
            return math.sqrt(12.0) * (u - 0.5)
        if self.kind == "laplace":
            # inverse CDF of unit-variance Laplace
            b = 1.0 / math.sqrt(2.0)
            return np.where(
                u < 0.5, b * np.log(2.0 * u), -b * np.log(2.0 * (1.0 - u))
            )
        if self.kind == "custom":
            if self.custom is None:
                raise ScenarioError("custom noise law needs a transform")
            return self.custom(u)
        raise ScenarioError(f"unknown noise law {self.kind!r}")


@dataclass(frozen=True)
class QuantizedEncoder:
    """Per-time quantizers for t = 0..T.  With ``innovation`` the cells
    are expressed in the control-free coordinate and the realized cells
    translate with the accumulated control."""

    quantizers: tuple[Quantizer, ...]
    innovation: bool = False


@dataclass(frozen=True)
class EnvelopeEncoder:
    envelope: SilenceEnvelope


@dataclass(frozen=True)
class CompanderEncoder:
    """Affine compander on the control-free state: iota = gain * zeta.
    Channel inputs beyond the amplitude cap make the path infeasible
    under the additive-noise channel accounting."""

    gain: float


@dataclass(frozen=True)
class CEController:
    """u_t = -k*_t xhat_{t|t} with the exact conditional-mean estimator
    for the supported wirings."""


@dataclass(frozen=True)
class FixedU0ThenCE:
    u0: float


@dataclass(frozen=True)
class OpenLoopController:
    controls: tuple[float, ...]


@dataclass(frozen=True)
class EnvelopeController:
    regime: str  # predictor_linear | zoh
    kappa: float | None = None


EncoderConfig = Union[QuantizedEncoder, EnvelopeEncoder, CompanderEncoder]
ControllerConfig = Union[
    CEController, FixedU0ThenCE, OpenLoopController, EnvelopeController
]


@dataclass(frozen=True)
class Scenario:
    plant: PlantParams
    cost: CostParams
    channel: ChannelSpec
    encoder: EncoderConfig
    controller: ControllerConfig
    noise: NoiseLaw = NoiseLaw()

    def __post_init__(self):
        _plan_runner(self)  # validate the wiring eagerly


@dataclass(frozen=True)
class RunResult:
    mean_cost: float
    std_error: float
    n_paths: int
    comm_cost_mean: float
    infeasible_fraction: float
    seed: int

    def to_json_dict(self) -> dict:
        return {
            "mean_cost": self.mean_cost,
            "std_error": self.std_error,
            "n_paths": self.n_paths,
            "comm_cost_mean": self.comm_cost_mean,
            "infeasible_fraction": self.infeasible_fraction,
            "seed": self.seed,
        }


# ---------------------------------------------------------------------------
# Path generation
# ---------------------------------------------------------------------------


def _chunk_uniforms(seed: int, chunk_idx: int, n_rows: int, n_vars: int) -> np.ndarray:
    """Uniforms for one chunk from its own counter stream (the high
    counter word indexes the chunk, so streams are disjoint)."""
    bits = np.random.Philox(key=seed, counter=[0, 0, 0, chunk_idx])
    u = np.random.Generator(bits).random((n_rows, n_vars))
    return np.clip(u, 1e-16, 1.0 - 1e-16)


def _draw_paths(
    scenario: Scenario, seed: int, chunk_idx: int, n_rows: int
) -> tuple[np.ndarray, np.ndarray]:
    """(x0 values, noise matrix w[t] for t = 0..T) for one chunk."""
    plant = scenario.plant
    T = plant.T
    u = _chunk_uniforms(seed, chunk_idx, n_rows, T + 2)
    x0 = plant.x0.mu + plant.x0.sigma * ndtri(u[:, 0])
    w = plant.sigma_w * scenario.noise.standardized(u[:, 1:])
    return x0, w


# ---------------------------------------------------------------------------
# Runners, one per supported wiring
# ---------------------------------------------------------------------------


def _channel_fixed_cost(scenario: Scenario, alphabet_sizes: Sequence[int]):
    """Deterministic comm cost for quantized encoders (same every
    path).  Returns (cost, infeasible flag)."""
    from .coding import comm_cost

    ch = scenario.channel
    if isinstance(ch, FixedRate):
        if max(alphabet_sizes) > ch.N:
            raise ScenarioError(
                f"quantizer alphabet {max(alphabet_sizes)} exceeds channel size {ch.N}"
            )
        return 0.0, False
    if isinstance(ch, VariableRate):
        c = comm_cost(ch, list(alphabet_sizes))
        if c is INFEASIBLE:
            return math.nan, True
        return float(c), False
    raise ScenarioError("quantized encoder needs a fixed- or variable-rate channel")


def _runner_two_epoch_known_x0(scenario: Scenario):
    """T = 1, known initial state, quantizer at t = 1."""
    plant, cost = scenario.plant, scenario.cost
    sched = gain_schedule(plant, cost)
    enc: QuantizedEncoder = scenario.encoder
    x0 = plant.x0.mu

    if isinstance(scenario.controller, FixedU0ThenCE):
        u0 = scenario.controller.u0
    elif isinstance(scenario.controller, CEController):
        u0 = -sched.k_star[0] * x0
    elif isinstance(scenario.controller, OpenLoopController):
        u0 = scenario.controller.controls[0]
    else:
        raise ScenarioError("unsupported controller for this wiring")
    open_loop = (
        scenario.controller.controls
        if isinstance(scenario.controller, OpenLoopController)
        else None
    )

    qz1 = enc.quantizers[1]
    if enc.innovation:
        qz1 = qz1.shifted(u0)
    law = Normal(plant.a * x0 + u0, plant.sigma_w)
    cell_means = np.array(
        [
            trunc_moments(law, c).mean if not trunc_moments(law, c).is_empty else 0.0
            for c in qz1.cells()
        ]
    )
    comm, comm_infeasible = _channel_fixed_cost(
        scenario, [q.n_cells for q in enc.quantizers]
    )
    thresholds = np.asarray(qz1.thresholds)

    def run(x0s, w):
        x1 = plant.a * x0s + u0 + w[:, 0]
        labels = np.searchsorted(thresholds, x1, side="left")
        xhat1 = cell_means[labels]
        u1 = open_loop[1] if open_loop is not None else -sched.k_star[1] * xhat1
        x2 = plant.a * x1 + u1 + w[:, 1]
        c = cost.q * u0 * u0 + cost.p * x1 * x1 + cost.q * u1 * u1 + x2 * x2
        return c, np.full(len(x0s), comm), np.full(len(x0s), comm_infeasible)

    return run


def _runner_two_epoch_random_x0(scenario: Scenario):
    """T = 1, random initial state, quantizers at t = 0 and t = 1,
    certainty-equivalence controls from the exact cell posteriors."""
    plant, cost = scenario.plant, scenario.cost
    sched = gain_schedule(plant, cost)
    enc: QuantizedEncoder = scenario.encoder
    qz0 = enc.quantizers[0]

    x0_means = np.array([trunc_moments(plant.x0, c).mean for c in qz0.cells()])
    u0_by_row = -sched.k_star[0] * x0_means
    qz1_by_row = []
    xhat1_by_row = []
    for i, u0 in enumerate(u0_by_row, start=1):
        qz1 = enc.quantizers[1].shifted(u0) if enc.innovation else enc.quantizers[1]
        post = two_step_posterior(plant, float(u0), qz0, qz1)
        means = np.array(
            [0.0 if c.is_empty else c.mean for c in post.row(i)]
        )
        qz1_by_row.append(np.asarray(qz1.thresholds))
        xhat1_by_row.append(means)
    comm, comm_infeasible = _channel_fixed_cost(
        scenario, [q.n_cells for q in enc.quantizers]
    )
    th0 = np.asarray(qz0.thresholds)

    def run(x0s, w):
        z0 = np.searchsorted(th0, x0s, side="left")
        u0 = u0_by_row[z0]
        x1 = plant.a * x0s + u0 + w[:, 0]
        xhat1 = np.empty_like(x1)
        for i in range(qz0.n_cells):
            mask = z0 == i
            if not mask.any():
                continue
            labels = np.searchsorted(qz1_by_row[i], x1[mask], side="left")
            xhat1[mask] = xhat1_by_row[i][labels]
        u1 = -sched.k_star[1] * xhat1
        x2 = plant.a * x1 + u1 + w[:, 1]
        c = cost.q * u0 * u0 + cost.p * x1 * x1 + cost.q * u1 * u1 + x2 * x2
        return c, np.full(len(x0s), comm), np.full(len(x0s), comm_infeasible)

    return run


def _runner_predictor(scenario: Scenario):
    """No-information loop: one-cell quantizers at every time, so the
    control sequence is deterministic (CE on the predictor mean, a
    given open-loop sequence, or fixed u0 then CE)."""
    plant, cost = scenario.plant, scenario.cost
    sched = gain_schedule(plant, cost)
    T = plant.T
    ctrl = scenario.controller
    m = np.zeros(T + 1)
    u = np.zeros(T + 1)
    m[0] = plant.x0.mu
    for t in range(T + 1):
        if isinstance(ctrl, OpenLoopController):
            u[t] = ctrl.controls[t]
        elif isinstance(ctrl, FixedU0ThenCE) and t == 0:
            u[t] = ctrl.u0
        elif isinstance(ctrl, (CEController, FixedU0ThenCE)):
            u[t] = -sched.k_star[t] * m[t]
        else:
            raise ScenarioError("unsupported controller for the no-information loop")
        if t < T:
            m[t + 1] = plant.a * m[t] + u[t]
    enc: QuantizedEncoder = scenario.encoder
    comm, comm_infeasible = _channel_fixed_cost(
        scenario, [q.n_cells for q in enc.quantizers]
    )

    def run(x0s, w):
        n = len(x0s)
        x = x0s.copy()
        c = np.zeros(n)
        for t in range(T + 1):
            c += cost.q * u[t] * u[t]
            x = plant.a * x + u[t] + w[:, t]
            c += (cost.p if t + 1 <= T else 1.0) * x * x
        return c, np.full(n, comm), np.full(n, comm_infeasible)

    return run


def _runner_envelope(scenario: Scenario):
    """Event-triggered one-sample loop under the hold or predictor
    regime (independent of the closed-form envelope evaluator)."""
    plant, cost = scenario.plant, scenario.cost
    if plant.x0.sigma != 0.0:
        raise ScenarioError("envelope wiring assumes a known initial state")
    ctrl: EnvelopeController = scenario.controller
    ch = scenario.channel
    if not isinstance(ch, EventTriggered):
        raise ScenarioError("envelope encoder needs an event-triggered channel")
    if ch.sample_budget < 1:
        raise ScenarioError("one-sample regime needs a budget of at least 1")
    sched = gain_schedule(plant, cost)
    env: SilenceEnvelope = scenario.encoder.envelope
    T = plant.T
    if env.T != T:
        raise ScenarioError(f"envelope must cover t = 1..{T}")
    u_pre, _ = _pre_sample_controls(plant, sched, ctrl.regime, ctrl.kappa)

    def run(x0s, w):
        n = len(x0s)
        x = x0s.copy()
        c = np.zeros(n)
        sampled = np.zeros(n, dtype=bool)
        xhat = np.zeros(n)
        for t in range(T + 1):
            if t >= 1:
                c += cost.p * x * x
                iv = env.interval_at(t)
                newly = ~sampled & ((t == T) | (x <= iv.lo) | (x > iv.hi))
                xhat = np.where(newly, x, xhat)
                sampled |= newly
            u = np.where(sampled, -sched.k_star[t] * xhat, u_pre[t] if t < T else 0.0)
            c += cost.q * u * u
            x = plant.a * x + u + w[:, t]
            xhat = plant.a * xhat + np.where(sampled, u, 0.0)
        c += x * x  # terminal state
        comm = np.full(n, ch.m * 1.0)
        return c, comm, np.zeros(n, dtype=bool)

    return run


def _runner_compander(scenario: Scenario):
    """Additive-noise channel with an affine innovation compander
    (iota = gain * zeta) and the exact scalar filter for that linear
    observation.  Channel inputs beyond the amplitude or average-power
    caps mark the path infeasible.  Takes channel noise as a third
    argument (extra variate columns are reserved in the chunk driver).
    """
    plant, cost = scenario.plant, scenario.cost
    ch = scenario.channel
    if not isinstance(ch, AdditiveNoise):
        raise ScenarioError("compander encoder needs an additive-noise channel")
    if not isinstance(scenario.controller, CEController):
        raise ScenarioError("compander wiring supports the CE controller")
    sched = gain_schedule(plant, cost)
    g = scenario.encoder.gain
    T = plant.T
    phi = np.vectorize(ch.phi, otypes=[float])

    # filter gains for zeta with observation z = g zeta + chi
    var_pred = plant.x0.variance
    gains = []
    for _ in range(T + 1):
        s = g * g * var_pred + ch.sigma_chi**2
        gains.append(g * var_pred / s if s > 0 else 0.0)
        var_post = (1.0 - gains[-1] * g) * var_pred
        var_pred = plant.a**2 * var_post + plant.sigma_w**2

    def run(x0s, w, chi):
        n = len(x0s)
        x = x0s.copy()
        zeta_hat = np.full(n, plant.x0.mu)
        acc = np.zeros(n)
        c = np.zeros(n)
        power = np.zeros(n)
        amp_bad = np.zeros(n, dtype=bool)
        for t in range(T + 1):
            iota = g * (x - acc)
            amp_bad |= np.abs(iota) > ch.amp_cap
            power += phi(iota)
            z = iota + chi[:, t]
            zeta_hat = zeta_hat + gains[t] * (z - g * zeta_hat)
            u = -sched.k_star[t] * (zeta_hat + acc)
            c += cost.q * u * u
            x = plant.a * x + u + w[:, t]
            acc = plant.a * acc + u
            zeta_hat = plant.a * zeta_hat
            c += (cost.p if t + 1 <= T else 1.0) * x * x
        infeasible = amp_bad | (power > ch.power_cap * (T + 1) + 1e-12)
        return c, ch.m * power, infeasible

    return run


def _plan_runner(scenario: Scenario):
    plant = scenario.plant
    enc = scenario.encoder
    if isinstance(enc, EnvelopeEncoder):
        if not isinstance(scenario.controller, EnvelopeController):
            raise ScenarioError("envelope encoder needs the envelope controller")
        return "envelope"
    if isinstance(enc, CompanderEncoder):
        return "compander"
    if isinstance(enc, QuantizedEncoder):
        if len(enc.quantizers) != plant.T + 1:
            raise ScenarioError(
                f"need one quantizer per time 0..{plant.T}, got {len(enc.quantizers)}"
            )
        if all(q.n_cells == 1 for q in enc.quantizers):
            return "predictor"
        if plant.T == 1 and plant.x0.sigma == 0.0 and enc.quantizers[0].n_cells == 1:
            return "two_epoch_known_x0"
        if (
            plant.T == 1
            and plant.x0.sigma > 0.0
            and isinstance(scenario.controller, CEController)
        ):
            return "two_epoch_random_x0"
        raise ScenarioError(
            "quantized wiring supports the two-epoch studies (T = 1) and the "
            "no-information loop; longer quantized horizons need the particle "
            "estimator, which is out of the simulator's vectorized contract"
        )
    raise ScenarioError(f"unknown encoder config {enc!r}")


_RUNNERS = {
    "two_epoch_known_x0": _runner_two_epoch_known_x0,
    "two_epoch_random_x0": _runner_two_epoch_random_x0,
    "predictor": _runner_predictor,
    "envelope": _runner_envelope,
    "compander": _runner_compander,
}


# ---------------------------------------------------------------------------
# Drivers
# ---------------------------------------------------------------------------


def _simulate_chunk(scenario, runner_kind, runner, seed, chunk_idx, n_rows):
    plant = scenario.plant
    T = plant.T
    if runner_kind == "compander":
        u = _chunk_uniforms(seed, chunk_idx, n_rows, 2 * (T + 1) + 1)
        x0 = plant.x0.mu + plant.x0.sigma * ndtri(u[:, 0])
        w = plant.sigma_w * scenario.noise.standardized(u[:, 1 : T + 2])
        chi = scenario.channel.sigma_chi * ndtri(u[:, T + 2 :])
        return runner(x0, w, chi)
    x0, w = _draw_paths(scenario, seed, chunk_idx, n_rows)
    return runner(x0, w)


def simulate(
    scenario: Scenario, n_paths: int, seed: int, n_workers: int | None = None
) -> RunResult:
    """Monte Carlo estimate of the expected total cost.

    Per-path cost is the quadratic stage cost plus the channel's
    communication cost; paths violating a hard channel constraint are
    counted in ``infeasible_fraction`` and excluded from the mean so it
    stays finite.  Bit-reproducible for fixed inputs at any worker
    count.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    kind = _plan_runner(scenario)
    runner = _RUNNERS[kind](scenario)
    n_workers = n_workers if n_workers is not None else resolve_threads()

    costs = np.empty(n_paths)
    comm = np.empty(n_paths)
    bad = np.empty(n_paths, dtype=bool)
    n_chunks = (n_paths + CHUNK - 1) // CHUNK

    def work(ci: int):
        lo = ci * CHUNK
        hi = min(lo + CHUNK, n_paths)
        c, cc, b = _simulate_chunk(scenario, kind, runner, seed, ci, hi - lo)
        costs[lo:hi] = c
        comm[lo:hi] = cc
        bad[lo:hi] = b

    if n_workers <= 1 or n_chunks == 1:
        for ci in range(n_chunks):
            work(ci)
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(work, range(n_chunks)))

    ok = ~bad
    n_ok = int(np.sum(ok))
    if n_ok == 0:
        return RunResult(math.nan, math.nan, n_paths, math.nan, 1.0, seed)
    total = costs + comm
    total_ok = np.where(ok, total, 0.0)
    mean = float(np.sum(total_ok) / n_ok)
    var = float(np.sum(np.where(ok, (total - mean) ** 2, 0.0)) / max(n_ok - 1, 1))
    return RunResult(
        mean_cost=mean,
        std_error=math.sqrt(var / n_ok),
        n_paths=n_paths,
        comm_cost_mean=float(np.sum(np.where(ok, comm, 0.0)) / n_ok),
        infeasible_fraction=float(np.sum(bad) / n_paths),
        seed=seed,
    )


def _replace_path(obj, path: Sequence[str], value):
    """dataclasses.replace along a dotted attribute path."""
    if len(path) == 1:
        return replace(obj, **{path[0]: value})
    child = getattr(obj, path[0])
    return replace(obj, **{path[0]: _replace_path(child, path[1:], value)})


def scenario_with(scenario: Scenario, axis: str, value) -> Scenario:
    """Scenario with one scalar field replaced, e.g. 'controller.u0'."""
    parts = axis.split(".")
    try:
        return _replace_path(scenario, parts, value)
    except (AttributeError, TypeError) as exc:
        raise ScenarioError(f"unknown scenario axis {axis!r}") from exc


def derived_seed(seed: int, index: int) -> int:
    """Stable per-value seed for sweeps."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def sweep(
    scenario: Scenario,
    axis: str,
    values: Sequence[float],
    n_paths: int,
    seed: int,
    n_workers: int | None = None,
) -> list[RunResult]:
    """Independent simulate calls along one scalar scenario axis, each
    with its own derived seed."""
    out = []
    for i, v in enumerate(values):
        sc = scenario_with(scenario, axis, v)
        out.append(simulate(sc, n_paths, derived_seed(seed, i), n_workers))
    return out
