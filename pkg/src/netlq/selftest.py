"""Fast invariant suite behind the ``selftest`` subcommand.

Each check is a quick, self-contained verification of a library
invariant (closed forms against quadrature or Monte Carlo, recursion
fixed points, determinism).  The full pytest suite is stricter and
slower; this battery must pass on any correct build in well under a
minute.
"""

from __future__ import annotations

import json
import math

import numpy as np
from scipy.integrate import quad
from scipy.special import ndtr

from .coding import (
    EventTriggered,
    FixedRate,
    InnovationTracker,
    Quantizer,
    VariableRate,
    comm_cost,
    innovation_encode,
    innovation_step,
)
from .estimation import two_step_posterior
from .gauss import Interval, Normal, owen_xgG, owen_xgg, trunc_moments
from .lqcore import CostParams, PlantParams, gain_schedule
from .sim import (
    FixedU0ThenCE,
    QuantizedEncoder,
    Scenario,
    simulate,
)


def _check_owen_vs_quadrature():
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(100):
        A = float(rng.uniform(-3, 3))
        B = float(rng.uniform(-3, 3))
        lo, hi = sorted(rng.uniform(-5, 5, 2))
        got = owen_xgG(A, B, Interval(lo, hi))
        ref = quad(
            lambda x: x * math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi) * ndtr(A - B * x),
            lo, hi, epsabs=1e-13,
        )[0]
        worst = max(worst, abs(got - ref))
        got = owen_xgg(A, B, Interval(lo, hi))
        ref = quad(
            lambda x: x
            * math.exp(-0.5 * x * x)
            * math.exp(-0.5 * (A - B * x) ** 2)
            / (2 * math.pi),
            lo, hi, epsabs=1e-13,
        )[0]
        worst = max(worst, abs(got - ref))
    assert worst < 1e-10, f"owen integrals off by {worst}"


def _check_trunc_partition():
    law = Normal(0.4, 1.3)
    edges = [-math.inf, -2.0, -0.5, 0.1, 1.7, math.inf]
    total_p = 0.0
    total_m = 0.0
    for lo, hi in zip(edges, edges[1:]):
        tm = trunc_moments(law, Interval(lo, hi))
        total_p += tm.prob
        total_m += tm.prob * tm.mean
    assert abs(total_p - 1.0) < 1e-12, total_p
    assert abs(total_m - law.mu) < 1e-12, total_m


def _check_gain_special_cases():
    s = gain_schedule(PlantParams(1.3, 1.0, Normal(0, 1), 6), CostParams(1.0, 0.0))
    assert all(abs(b - 1.0) < 1e-12 for b in s.beta)
    assert all(abs(l - 1.3**2) < 1e-12 for l in s.lam)
    s = gain_schedule(PlantParams(1.0, 1.0, Normal(0, 1), 6), CostParams(0.5, 1.0))
    assert all(abs(b - 1.0) < 1e-12 for b in s.beta)


def _check_innovation_equivalence():
    rng = np.random.default_rng(7)
    qz = Quantizer((-1.0, 0.3, 2.0))
    for _ in range(2000):
        a = float(rng.uniform(-1.5, 1.5))
        x = float(rng.normal())
        tr = InnovationTracker(a)
        for _t in range(4):
            zeta = x - tr.accumulated
            assert innovation_encode(qz, tr, zeta) == qz.apply(x)
            u = float(rng.normal())
            x = a * x + u + float(rng.normal())
            tr = innovation_step(tr, u)


def _check_comm_cost_branches():
    assert comm_cost(FixedRate(4), [4, 4]) == 0.0
    assert comm_cost(EventTriggered(1), [0, 1, 0]) == 0.0
    from .coding import INFEASIBLE

    assert comm_cost(EventTriggered(1), [1, 1, 0]) is INFEASIBLE
    assert comm_cost(VariableRate(4, 2.0, m=1.0), [2, 4]) == 3.0


def _check_posterior_tower():
    plant = PlantParams(1.0, 1.0, Normal(0.2, 0.9), 1)
    post = two_step_posterior(plant, -0.4, Quantizer((0.0,)), Quantizer((0.5,)))
    total_p = sum(c.prob for row in post.cells for c in row)
    total_m = sum(c.prob * c.mean for row in post.cells for c in row)
    assert abs(total_p - 1.0) < 1e-10
    assert abs(total_m - (plant.a * 0.2 - 0.4)) < 1e-8


def _check_sim_determinism():
    plant = PlantParams(1.0, 0.7, Normal(2.0, 0.0), 1)
    sc = Scenario(
        plant,
        CostParams(0.01, 0.01),
        FixedRate(3),
        QuantizedEncoder((Quantizer(()), Quantizer((-1.6, 1.6)))),
        FixedU0ThenCE(-1.0),
    )
    r1 = simulate(sc, 20000, seed=5, n_workers=1)
    r2 = simulate(sc, 20000, seed=5, n_workers=4)
    assert json.dumps(r1.to_json_dict()) == json.dumps(r2.to_json_dict())


CHECKS = [
    ("owen-closed-forms-vs-quadrature", _check_owen_vs_quadrature),
    ("truncated-moment-partition", _check_trunc_partition),
    ("gain-recursion-special-cases", _check_gain_special_cases),
    ("innovation-encoding-pathwise-equality", _check_innovation_equivalence),
    ("communication-cost-branches", _check_comm_cost_branches),
    ("two-step-posterior-tower-property", _check_posterior_tower),
    ("simulator-worker-determinism", _check_sim_determinism),
]


def run(verbose: bool = False) -> int:
    """Run every check; returns the number of failures."""
    failures = 0
    for name, fn in CHECKS:
        try:
            fn()
        except AssertionError as exc:
            failures += 1
            if verbose:
                print(f"FAIL {name}: {exc}")
        else:
            if verbose:
                print(f"PASS {name}")
    return failures
