"""Scalar Gaussian analytics: densities, truncated moments, and the
closed-form integrals behind two-step cell conditioning.

Everything here is exact up to floating point (CDFs from erfc-grade
routines, bivariate rectangle probabilities via Owen's T function).
Intervals are extended-real; all formulas take limits analytically at
infinite endpoints.  A standard deviation of zero denotes a point mass
and is handled by explicit branches, never by epsilon inflation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import ndtr, owens_t

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# Cells with less probability mass than this are treated as empty: their
# conditional moments are undefined (NaN) and flagged.
EMPTY_PROB = 1e-300


def _g(x: float) -> float:
    """Standard normal density; 0 at infinite arguments."""
    if math.isinf(x):
        return 0.0
    return INV_SQRT_2PI * math.exp(-0.5 * x * x)


def _G(x: float) -> float:
    """Standard normal CDF; saturates to 0/1 at infinite arguments."""
    if x == -math.inf:
        return 0.0
    if x == math.inf:
        return 1.0
    return float(ndtr(x))


def _xg(x: float) -> float:
    """x * g(x) with the tail limit 0 at x = +/-inf."""
    if math.isinf(x):
        return 0.0
    return x * _g(x)


def std_pdf_cdf(x: float) -> tuple[float, float]:
    """Standard normal density and CDF at x."""
    return _g(x), _G(x)


@dataclass(frozen=True)
class Normal:
    """Scalar normal law; sigma = 0 is an exact point mass at mu."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not math.isfinite(self.mu):
            raise ValueError(f"mu must be finite, got {self.mu}")
        if not (self.sigma >= 0.0) or math.isinf(self.sigma):
            raise ValueError(f"sigma must be finite and >= 0, got {self.sigma}")

    @property
    def variance(self) -> float:
        return self.sigma * self.sigma

    def pdf(self, x: float) -> float:
        if self.sigma == 0.0:
            raise ValueError("point mass has no density")
        return _g((x - self.mu) / self.sigma) / self.sigma


@dataclass(frozen=True)
class Interval:
    """Extended-real interval (lo, hi].  Membership is right-closed to
    match the quantizer cell convention; the boundary carries no mass
    for continuous laws, but point masses need the fixed rule."""

    lo: float
    hi: float

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise ValueError("interval endpoints must not be NaN")
        if self.lo > self.hi:
            raise ValueError(f"need lo <= hi, got ({self.lo}, {self.hi})")

    def contains(self, x: float) -> bool:
        return self.lo < x <= self.hi

    @property
    def is_degenerate(self) -> bool:
        return self.lo == self.hi

    def intersect(self, other: "Interval") -> "Interval | None":
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        if lo > hi:
            return None
        return Interval(lo, hi)


FULL_LINE = Interval(-math.inf, math.inf)


@dataclass(frozen=True)
class TruncatedMoments:
    """Mass and first two conditional moments of a law on a cell.

    When ``prob`` underflows (empty cell) the conditional moments are
    NaN and callers must check ``is_empty`` before using them.
    """

    prob: float
    mean: float
    second_moment: float

    @property
    def is_empty(self) -> bool:
        return self.prob < EMPTY_PROB

    @property
    def variance(self) -> float:
        return self.second_moment - self.mean * self.mean


_EMPTY_MOMENTS = TruncatedMoments(0.0, math.nan, math.nan)


def trunc_moments(n: Normal, cell: Interval) -> TruncatedMoments:
    """P[X in cell], E[X | cell], E[X^2 | cell] for X ~ n."""
    if n.sigma == 0.0:
        if cell.contains(n.mu):
            return TruncatedMoments(1.0, n.mu, n.mu * n.mu)
        return _EMPTY_MOMENTS

    a = (cell.lo - n.mu) / n.sigma
    b = (cell.hi - n.mu) / n.sigma
    # Evaluate the mass on the side where ndtr does not lose precision.
    if a == -math.inf or b <= 0.0 or a <= -b:
        prob = _G(b) - _G(a)
    else:
        prob = _G(-a) - _G(-b)
    if prob < EMPTY_PROB:
        return TruncatedMoments(max(prob, 0.0), math.nan, math.nan)

    dg = _g(a) - _g(b)
    mean = n.mu + n.sigma * dg / prob
    second = (
        n.mu * n.mu
        + n.variance
        + 2.0 * n.mu * n.sigma * dg / prob
        + n.variance * (_xg(a) - _xg(b)) / prob
    )
    return TruncatedMoments(prob, mean, second)


# ---------------------------------------------------------------------------
# Indefinite integrals of x g(x) G(A - Bx) and x g(x) g(A - Bx)
# ---------------------------------------------------------------------------


def _owen_xgG_antideriv(A: float, B: float, x: float) -> float:
    """Antiderivative of x g(x) G(A - Bx), with analytic limits at
    infinite x and saturated behaviour for infinite A."""
    s1 = math.sqrt(1.0 + B * B)
    gA = _g(A / s1) if math.isfinite(A) else 0.0

    if gA == 0.0:
        # G(A - Bx) is constant 0 or 1 over the whole line.
        sat = _G(A) if B == 0.0 else (1.0 if A > 0 else 0.0)
        if math.isinf(x):
            return 0.0
        return -sat * _g(x)

    if x == math.inf:
        return -(B / s1) * gA
    if x == -math.inf:
        return 0.0
    return -(B / s1) * gA * _G(x * s1 - A * B / s1) - _G(A - B * x) * _g(x)


def owen_xgG(A: float, B: float, cell: Interval) -> float:
    """Integral of x g(x) G(A - Bx) over the cell (closed form)."""
    if cell.is_degenerate:
        return 0.0
    return _owen_xgG_antideriv(A, B, cell.hi) - _owen_xgG_antideriv(A, B, cell.lo)


def _owen_xgg_antideriv(A: float, B: float, x: float) -> float:
    """Antiderivative of x g(x) g(A - Bx)."""
    s2 = 1.0 + B * B
    s1 = math.sqrt(s2)
    gA = _g(A / s1) if math.isfinite(A) else 0.0
    if gA == 0.0:
        return 0.0
    if x == math.inf:
        return (A * B / (s2 * s1)) * gA
    if x == -math.inf:
        return 0.0
    y = x * s1 - A * B / s1
    return -(1.0 / s2) * gA * _g(y) + (A * B / (s2 * s1)) * gA * _G(y)


def owen_xgg(A: float, B: float, cell: Interval) -> float:
    """Integral of x g(x) g(A - Bx) over the cell (closed form)."""
    if cell.is_degenerate:
        return 0.0
    return _owen_xgg_antideriv(A, B, cell.hi) - _owen_xgg_antideriv(A, B, cell.lo)


# ---------------------------------------------------------------------------
# Bivariate normal rectangle probability
# ---------------------------------------------------------------------------


def _owens_t_term(x: float, num: float, s: float) -> float:
    """Owen's T(x, num / (x s)) with the x = 0 limit handled.

    T(0, a) = arctan(a) / (2 pi), so the a -> +/-inf limit is +/-1/4.
    """
    if x == 0.0:
        if num == 0.0:
            return 0.0
        return math.copysign(0.25, num)
    return float(owens_t(x, num / (x * s)))


def std_bvn_cdf(h: float, k: float, rho: float) -> float:
    """P[Z1 <= h, Z2 <= k] for standard bivariate normal with
    correlation rho, via Owen's T function."""
    if not -1.0 <= rho <= 1.0:
        raise ValueError(f"correlation out of range: {rho}")
    if h == -math.inf or k == -math.inf:
        return 0.0
    if h == math.inf:
        return _G(k)
    if k == math.inf:
        return _G(h)
    if rho == 1.0:
        return _G(min(h, k))
    if rho == -1.0:
        return max(0.0, _G(h) + _G(k) - 1.0)
    if h == 0.0 and k == 0.0:
        return 0.25 + math.asin(rho) / (2.0 * math.pi)

    s = math.sqrt(1.0 - rho * rho)
    hk = h * k
    delta = 0.0 if (hk > 0.0 or (hk == 0.0 and h + k >= 0.0)) else 0.5
    val = (
        0.5 * (_G(h) + _G(k))
        - _owens_t_term(h, k - rho * h, s)
        - _owens_t_term(k, h - rho * k, s)
        - delta
    )
    return min(1.0, max(0.0, val))


def bvn_rect_prob(cell_x: Interval, cell_y: Interval, rho: float) -> float:
    """P[X in cell_x, Y in cell_y] for standardized jointly normal X, Y."""
    p = (
        std_bvn_cdf(cell_x.hi, cell_y.hi, rho)
        - std_bvn_cdf(cell_x.lo, cell_y.hi, rho)
        - std_bvn_cdf(cell_x.hi, cell_y.lo, rho)
        + std_bvn_cdf(cell_x.lo, cell_y.lo, rho)
    )
    return min(1.0, max(0.0, p))


# ---------------------------------------------------------------------------
# Two-step joint cell integrals
# ---------------------------------------------------------------------------


def _h_bracket(Abar: float, Alow: float, B: float, x: float) -> float:
    """h(x) = x g(x) (G(Abar - Bx) - G(Alow - Bx)), 0 at infinite x."""
    if math.isinf(x):
        return 0.0
    return x * _g(x) * (_G(Abar - B * x) - _G(Alow - B * x))


def _single_step_integrals(
    x1_law: Normal, cell1: Interval
) -> tuple[float, float, float]:
    """(P, D1, D2) when conditioning on the second-step cell only."""
    tm = trunc_moments(x1_law, cell1)
    if tm.is_empty:
        return 0.0, 0.0, 0.0
    return tm.prob, tm.prob * tm.mean, tm.prob * tm.second_moment


def two_step_cell_integrals(
    x0: Normal,
    a: float,
    u0: float,
    sigma_w: float,
    cell0: Interval,
    cell1: Interval,
) -> tuple[float, float, float]:
    """Joint cell mass and partial moments of the one-step-ahead state.

    For x1 = a x0 + u0 + w0 with w0 ~ N(0, sigma_w^2) independent of x0,
    returns

        P  = P[x0 in cell0, x1 in cell1]
        D1 = E[x1   restricted to that joint event]
        D2 = E[x1^2 restricted to that joint event]

    The general case reduces to one-dimensional integrals of
    g(s) (G(Abar - Bs) - G(Alow - Bs)) terms; the mass uses the exact
    bivariate rectangle probability and the first/second moments use the
    closed-form antiderivatives above.  Degenerate laws (sigma = 0 on
    either coordinate) take explicit point-mass branches.

    An empty joint cell yields (0, 0, 0).
    """
    if sigma_w < 0.0:
        raise ValueError("sigma_w must be >= 0")
    if x0.sigma == 0.0 and sigma_w == 0.0:
        x1 = a * x0.mu + u0
        if cell0.contains(x0.mu) and cell1.contains(x1):
            return 1.0, x1, x1 * x1
        return 0.0, 0.0, 0.0

    if x0.sigma == 0.0:
        if not cell0.contains(x0.mu):
            return 0.0, 0.0, 0.0
        return _single_step_integrals(Normal(a * x0.mu + u0, sigma_w), cell1)

    if sigma_w == 0.0:
        # x1 is a deterministic map of x0; intersect the cells.
        if a == 0.0:
            if not cell1.contains(u0):
                return 0.0, 0.0, 0.0
            tm = trunc_moments(x0, cell0)
            return tm.prob, u0 * tm.prob, u0 * u0 * tm.prob
        lo, hi = (cell1.lo - u0) / a, (cell1.hi - u0) / a
        if a < 0.0:
            lo, hi = hi, lo
        mapped = cell0.intersect(Interval(lo, hi))
        if mapped is None:
            return 0.0, 0.0, 0.0
        tm = trunc_moments(x0, mapped)
        if tm.is_empty:
            return 0.0, 0.0, 0.0
        p = tm.prob
        d1 = p * (a * tm.mean + u0)
        d2 = p * (a * a * tm.second_moment + 2.0 * a * u0 * tm.mean + u0 * u0)
        return p, d1, d2

    # General case: both coordinates have spread.
    sig1 = math.hypot(a * x0.sigma, sigma_w)  # std of x1
    mu1 = a * x0.mu + u0
    rho = a * x0.sigma / sig1
    sbar = x0.sigma * sigma_w / sig1  # std of x0 given x1

    std0 = Interval((cell0.lo - x0.mu) / x0.sigma, (cell0.hi - x0.mu) / x0.sigma)
    std1 = Interval((cell1.lo - mu1) / sig1, (cell1.hi - mu1) / sig1)

    p = bvn_rect_prob(std0, std1, rho)
    if p < EMPTY_PROB:
        return 0.0, 0.0, 0.0

    Abar = (cell0.hi - x0.mu) / sbar
    Alow = (cell0.lo - x0.mu) / sbar
    B = a * x0.sigma / sigma_w

    # I1 = int s g(s) (G(Abar - Bs) - G(Alow - Bs)) ds over std1
    i1 = owen_xgG(Abar, B, std1) - owen_xgG(Alow, B, std1)
    # I2 = int s^2 g(s) (...) ds, from d[h]/ds = g(...) - s^2 g(...) - B s g(dg)
    i2 = (
        p
        - B * (owen_xgg(Abar, B, std1) - owen_xgg(Alow, B, std1))
        - (_h_bracket(Abar, Alow, B, std1.hi) - _h_bracket(Abar, Alow, B, std1.lo))
    )

    d1 = mu1 * p + sig1 * i1
    d2 = mu1 * mu1 * p + 2.0 * mu1 * sig1 * i1 + sig1 * sig1 * i2
    return p, d1, d2
