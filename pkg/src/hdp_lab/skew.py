"""Skew Brownian motion: coupled walk simulation, local time, exact marginals.

The coupled object is the triple (B, B^theta, L) on one grid, where B^theta
solves dB^theta = dB + theta dL with L its symmetric local time at 0, so that

    B^theta_t = x0 + B_t + theta * L_t

holds exactly at every node by construction.  The simulator is a skew random
walk with Donsker scaling: at state 0 the walk steps +/- sqrt(h) with
probabilities beta_plus / beta_minus, elsewhere symmetrically; L accumulates
sqrt(h) per visit to 0; the driver is *defined* by the identity above.

Implementation note: instead of stepping the chain state by state, we draw a
symmetric walk S and flip the sign of each excursion from 0 independently
(+ with probability beta_plus).  Conditional on |S|, the excursion signs of
the skew walk are exactly i.i.d. beta_+/- coin flips, so the flipped walk has
the same law as the sequential chain while vectorizing over steps.  The
sequential chain is kept (module stats, exit_probability) and the two are
cross-checked in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .core import Path, SeedSpec, TimeGrid

__all__ = [
    "SkewCoefficients",
    "CoupledSkewPath",
    "simulate_skew_pair",
    "local_time_occupation",
    "oscillating_from_skew",
    "skew_transition_sample",
    "skew_density",
    "skew_cdf",
    "sample_skew_with_local_time",
]


def gauss_pdf(t: float, x):
    """Density of N(0, t) at x."""
    return np.exp(-np.square(x) / (2.0 * t)) / math.sqrt(2.0 * math.pi * t)


@dataclass(frozen=True)
class SkewCoefficients:
    """Coefficient bundle attached to a skewness parameter theta in [-1, 1].

    sigma and beta are the oscillating diffusion coefficient and its
    reciprocal, r and s the straightening/unstraightening maps with
    s(r(x)) = x; beta(0) = 1/2 and sigma(0) = 2 by the sign(0) = 0 convention.
    """

    theta: float

    def __post_init__(self) -> None:
        if not (-1.0 <= self.theta <= 1.0):
            raise ValueError(f"theta must lie in [-1, 1], got {self.theta}")
        object.__setattr__(self, "theta", float(self.theta))

    @property
    def beta_plus(self) -> float:
        return (1.0 + self.theta) / 2.0

    @property
    def beta_minus(self) -> float:
        return (1.0 - self.theta) / 2.0

    @property
    def kappa(self) -> float:
        return (1.0 - self.theta**2) / 2.0

    def beta(self, x):
        """(1 + theta*sign x)/2; jumps across 0, beta(0) = 1/2."""
        return (1.0 + self.theta * np.sign(x)) / 2.0

    def sigma(self, x):
        """2/(1 + theta*sign x) = 1/beta; infinite on the unreachable side at |theta| = 1."""
        with np.errstate(divide="ignore"):
            return np.true_divide(2.0, 1.0 + self.theta * np.sign(x))

    def r(self, x):
        """x * beta(x): maps the oscillating process back to the skew one."""
        return x * self.beta(x)

    def s(self, x):
        """x * sigma(x): maps the skew process to the oscillating one."""
        return x * self.sigma(x)


@dataclass(frozen=True)
class CoupledSkewPath:
    """The jointly simulated triple (driver B, skew B^theta, local time L)."""

    grid: TimeGrid
    driver_B: Path
    skew_B: Path
    local_time_L: Path
    theta: float
    x0: float


def simulate_skew_pair(theta: float, x0: float, grid: TimeGrid, seed: SeedSpec) -> CoupledSkewPath:
    """Simulate the coupled (driver, skew walk, local time) triple on ``grid``.

    The start is snapped to the walk's sqrt(h) lattice (recorded in the
    returned ``x0``), since the scheme only touches 0 exactly when started on
    the lattice; the snap moves the start by at most sqrt(h)/2.

    L counts sqrt(h) per *arrival* at 0 (nodes k >= 1 with walk value 0).
    Under this convention the theta = +/-1 cases reduce exactly to
    driver minus running minimum / maximum.
    """
    coeffs = SkewCoefficients(theta)  # validates theta
    rng = seed.generator()
    n = grid.n_steps
    root_h = math.sqrt(grid.h)
    m0 = int(round(x0 / root_h))
    x0_used = m0 * root_h

    steps = rng.integers(0, 2, size=n, dtype=np.int64) * 2 - 1
    s_lattice = np.empty(n + 1, dtype=np.int64)
    s_lattice[0] = m0
    np.cumsum(steps, out=s_lattice[1:])
    s_lattice[1:] += m0

    zero_nodes = np.flatnonzero(s_lattice == 0)
    if theta == 0.0 or zero_nodes.size == 0:
        w_lattice = s_lattice.astype(np.float64)
    else:
        flips = np.where(rng.random(zero_nodes.size) < coeffs.beta_plus, 1.0, -1.0)
        # excursion index at node k = number of zeros at nodes <= k;
        # index 0 = the stretch before the first zero, which keeps S's own sign
        exc = np.searchsorted(zero_nodes, np.arange(n + 1), side="right")
        signs = np.concatenate(([1.0], flips))[exc]
        w_lattice = np.where(exc == 0, s_lattice, signs * np.abs(s_lattice))

    skew_values = w_lattice * root_h
    arrivals = np.zeros(n + 1)
    arrivals[1:] = np.cumsum(s_lattice[1:] == 0)
    local_time = arrivals * root_h
    driver_values = skew_values - x0_used - theta * local_time

    return CoupledSkewPath(
        grid=grid,
        driver_B=Path(grid, driver_values),
        skew_B=Path(grid, skew_values),
        local_time_L=Path(grid, local_time),
        theta=coeffs.theta,
        x0=x0_used,
    )


def local_time_occupation(path: Path, epsilon: float) -> Path:
    """Occupation-time estimate of the local time at 0: (1/2eps) * time in [-eps, eps].

    Left-endpoint rule with midpoint counting on the band boundary: nodes with
    |X| < eps weigh 1, nodes with |X| = eps weigh 1/2.  The boundary has
    measure zero for diffusive input, but on lattice walks with eps a lattice
    multiple the plain indicator would overweight the band by half a site on
    each side (a ~25% bias at eps = 2*sqrt(h)).
    """
    if not epsilon > 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    absx = np.abs(path.values[:-1])
    weights = 0.5 * (absx <= epsilon) + 0.5 * (absx < epsilon)
    estimate = np.empty(path.grid.n_steps + 1)
    estimate[0] = 0.0
    np.cumsum(weights, out=estimate[1:])
    estimate[1:] *= path.grid.h / (2.0 * epsilon)
    return Path(path.grid, estimate)


def oscillating_from_skew(coupled: CoupledSkewPath) -> Path:
    """Transform the skew path to the oscillating one: Y = s(B^theta).

    r(Y) recovers skew_B node-wise.  At |theta| = 1 the map is finite only on
    the side the skew path actually lives on; values on the degenerate side
    (possible only for starts there) are rejected.
    """
    coeffs = SkewCoefficients(coupled.theta)
    y = coeffs.s(coupled.skew_B.values)
    if not np.all(np.isfinite(y)):
        raise ValueError(
            "oscillating transform is infinite where sigma degenerates "
            f"(theta = {coupled.theta}, path visits the unreachable half-line)"
        )
    return Path(coupled.grid, y)


def skew_transition_sample(theta, x_start, t, seed: SeedSpec, size=None):
    """Exact draw(s) from the time-t skew-BM marginal started at x_start.

    Two stages, no discretization error: |B^theta_t| is reflected BM from
    |x_start|, i.e. |N(|x_start|, t)|; conditionally on its value rho the sign
    is + with probability (1 + theta*exp(-2*rho*|x_start|/t)) /
    (1 + exp(-2*rho*|x_start|/t)).  Starts below 0 are handled through the
    mirror symmetry (theta, x) -> (-theta, -x).

    With ``size=None`` returns a float, otherwise an ndarray of that shape.
    """
    SkewCoefficients(theta)
    if not t > 0.0:
        raise ValueError(f"t must be positive, got {t}")
    rng = seed.generator()
    mirrored = x_start < 0
    a = abs(x_start)
    th = -theta if mirrored else theta

    n = 1 if size is None else size
    rho = np.abs(a + math.sqrt(t) * rng.standard_normal(n))
    damp = np.exp(-2.0 * rho * a / t)
    p_plus = (1.0 + th * damp) / (1.0 + damp)
    draws = np.where(rng.random(n) < p_plus, rho, -rho)
    if mirrored:
        draws = -draws
    return float(draws[0]) if size is None else draws


def skew_chain_terminals(theta, grid: TimeGrid, seed: SeedSpec, n_paths: int):
    """Terminal skew-BM values from 0 by chaining exact one-step transitions.

    Runs ``n_paths`` paths through every node of ``grid`` in lockstep; each
    step draws the next value from the same two-stage transition law as
    :func:`skew_transition_sample` (reflected shifted-normal modulus, then a
    sign with the damped-skewness probability), with the mirror handled per
    path through the current sign.  The terminal law is exact at any step
    count -- no scheme bias and no sqrt(h) value lattice, which matters for
    distribution-level tests on the terminal.
    """
    coeffs = SkewCoefficients(theta)
    if n_paths < 1:
        raise ValueError(f"n_paths must be positive, got {n_paths}")
    rng = seed.generator()
    h = grid.h
    root_h = math.sqrt(h)
    x = np.zeros(n_paths)
    for _ in range(grid.n_steps):
        side = np.where(x >= 0.0, 1.0, -1.0)
        xa = np.abs(x)
        rho = np.abs(xa + root_h * rng.standard_normal(n_paths))
        damp = np.exp(-2.0 * rho * xa / h)
        p_plus = (1.0 + side * coeffs.theta * damp) / (1.0 + damp)
        x = side * np.where(rng.random(n_paths) < p_plus, rho, -rho)
    return x


def skew_density(theta, t, b):
    """Time-t marginal density of skew BM from 0: (1 + theta*sign b) * phi_t(b)."""
    SkewCoefficients(theta)
    if not t > 0.0:
        raise ValueError(f"t must be positive, got {t}")
    return (1.0 + theta * np.sign(b)) * gauss_pdf(t, b)


def skew_cdf(theta, t, b):
    """Cumulative distribution of the time-t skew-BM marginal from 0."""
    SkewCoefficients(theta)
    if not t > 0.0:
        raise ValueError(f"t must be positive, got {t}")
    b = np.asarray(b, dtype=float)
    z = ndtr(b / math.sqrt(t))
    out = np.where(b <= 0, (1.0 - theta) * z, (1.0 - theta) / 2.0 + (1.0 + theta) * (z - 0.5))
    return float(out) if out.ndim == 0 else out


def sample_skew_with_local_time(theta, t, seed: SeedSpec, size=None):
    """Exact joint draw(s) of (B^theta_t, L_t) for the skew BM started at 0.

    The sum M = |B^theta_t| + L_t is Maxwell distributed (sqrt(t) times a
    chi with 3 degrees of freedom), and conditionally on M the skew value is
    uniform on (0, M) with probability beta_plus and uniform on (-M, 0)
    otherwise; L = M - |B^theta|.  Returns a pair (b, l).
    """
    coeffs = SkewCoefficients(theta)
    if not t > 0.0:
        raise ValueError(f"t must be positive, got {t}")
    rng = seed.generator()
    n = 1 if size is None else size
    m = math.sqrt(t) * np.sqrt(np.sum(np.square(rng.standard_normal((3, n))), axis=0))
    u = rng.random(n)
    sign = np.where(rng.random(n) < coeffs.beta_plus, 1.0, -1.0)
    b = sign * u * m
    l = m - np.abs(b)
    if size is None:
        return float(b[0]), float(l[0])
    return b, l
