"""Closed forms: joint densities, mean square displacement, reversed drifts.

Everything here is exact-formula work for the skew Brownian motion B^theta
started at 0, its symmetric local time L, the oscillating process
Y = s(B^theta), and the time reversal of the pair (Y, B) over a horizon T.

Sign conventions: the formulas are stated for theta > 0 in the references
they implement; negative theta is reached through the mirror symmetry
(theta, y, z) -> (-theta, -y, -z), under which the reversed drift is odd and
the joint density invariant.  The implementations below apply to all
theta != 0 directly, with the support wedge { (r(y) - z)/theta > 0 } and an
absolute value on the Gaussian-argument factor carrying the mirror.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Path, SeedSpec, TimeGrid
from .skew import SkewCoefficients, gauss_pdf

__all__ = [
    "ReversedDrift",
    "IntegrabilityFlags",
    "joint_density_BL",
    "joint_density_YB",
    "msd",
    "reversed_drift_y",
    "reversed_drift_z",
    "reversed_drift_reflected",
    "simulate_reversed_pair",
    "simulate_reversed_ensemble",
    "heat_check_density",
    "integrability_conditions",
]


def joint_density_BL(theta, t, w0, b, l):
    """Joint density of (B^theta_t, L_t) started at w0, at (b, l) with l > 0.

    2*beta(b) * (l + |w0| + |b|) / sqrt(2 pi t^3) * exp(-(l + |w0| + |b|)^2 / (2t)).

    For w0 != 0 the law also has an atom at l = 0 (paths that never reach 0);
    this function evaluates only the absolutely continuous l > 0 part.
    """
    coeffs = SkewCoefficients(theta)
    if not t > 0.0:
        raise ValueError(f"t must be positive, got {t}")
    l_arr = np.asarray(l, dtype=float)
    if np.any(l_arr <= 0.0):
        raise ValueError("l must be positive (the density's continuous part lives on l > 0)")
    m = l_arr + abs(w0) + np.abs(b)
    out = 2.0 * coeffs.beta(b) * m / math.sqrt(2.0 * math.pi * t**3) * np.exp(
        -np.square(m) / (2.0 * t)
    )
    return float(out) if out.ndim == 0 else out


def joint_density_YB(theta, t, y, z):
    """Joint density of (Y_t, B_t) started at 0, with Y = s(B^theta).

    (2 beta^2(y) / (theta^2 sqrt(2 pi t^3))) * |2 y beta^2(y) - z|
        * exp(-(2 y beta^2(y) - z)^2 / (2 theta^2 t))

    on the support wedge (r(y) - z)/theta > 0, zero outside.  The absolute
    value makes the theta < 0 mirror exact; for theta > 0 the factor is
    positive on the wedge anyway.
    """
    coeffs = SkewCoefficients(theta)
    if theta == 0.0:
        raise ValueError("theta = 0 degenerates the joint law to the line y = 2z")
    if not t > 0.0:
        raise ValueError(f"t must be positive, got {t}")
    y_arr = np.asarray(y, dtype=float)
    z_arr = np.asarray(z, dtype=float)
    beta = coeffs.beta(y_arr)
    m = 2.0 * y_arr * np.square(beta) - z_arr
    support = (coeffs.r(y_arr) - z_arr) / theta > 0.0
    dens = (
        2.0
        * np.square(beta)
        / (theta**2 * math.sqrt(2.0 * math.pi * t**3))
        * np.abs(m)
        * np.exp(-np.square(m) / (2.0 * theta**2 * t))
    )
    out = np.where(support, dens, 0.0)
    return float(out) if out.ndim == 0 else out


def msd(alpha: float, theta: float, t: float) -> float:
    """Variance of the power-transformed skew value X_t = ((1-a) B^theta_t)^(1/(1-a)), X_0 = 0.

    (2 t (1-alpha)^2)^(1/(1-alpha)) * [ Gamma((3-alpha)/(2(1-alpha))) / sqrt(pi)
                                        - theta^2 Gamma((2-alpha)/(2(1-alpha)))^2 / pi ].

    Both bracket terms carry their Gaussian-moment normalization; dropping
    the 1/pi on the second would give a negative value at (alpha, theta) =
    (0, 1), where the true answer is Var|B_1| = 1 - 2/pi.  Even in theta;
    scales exactly like t^(1/(1-alpha)).
    """
    if not (-1.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie strictly inside (-1, 1), got {alpha}")
    SkewCoefficients(theta)
    if not t > 0.0:
        raise ValueError(f"t must be positive, got {t}")
    q = 1.0 / (1.0 - alpha)
    second_moment = math.gamma(q + 0.5) / math.sqrt(math.pi)
    first_moment_sq = math.gamma((q + 1.0) / 2.0) ** 2 / math.pi
    return (2.0 * t * (1.0 - alpha) ** 2) ** q * (second_moment - theta**2 * first_moment_sq)


def _require_wedge(coeffs: SkewCoefficients, y: float, z: float) -> None:
    if (coeffs.r(y) - z) / coeffs.theta <= 0.0:
        raise ValueError(
            f"(y, z) = ({y}, {z}) lies outside the support wedge "
            f"(r(y) - z)/theta > 0 for theta = {coeffs.theta}"
        )


def reversed_drift_y(theta: float, T: float, s: float, y: float, z: float) -> float:
    """Drift of the reversed oscillating coordinate at reversed time s in [0, T].

    (theta sign y / beta(y)) * (1/(2 y beta^2(y) - z) - (2 y beta^2(y) - z)/(theta^2 (T - s)))

    on {y != 0, (r(y)-z)/theta > 0}; returns 0 at y = 0 and s = T by convention.
    """
    coeffs = SkewCoefficients(theta)
    if theta == 0.0:
        raise ValueError("reversed drift requires theta != 0")
    if not T > 0.0:
        raise ValueError(f"T must be positive, got {T}")
    if not (0.0 <= s <= T):
        raise ValueError(f"s must lie in [0, T], got {s}")
    if y == 0.0:
        return 0.0
    _require_wedge(coeffs, y, z)
    if s == T:
        return 0.0
    beta = float(coeffs.beta(y))
    m = 2.0 * y * beta**2 - z
    return (theta * math.copysign(1.0, y) / beta) * (1.0 / m - m / (theta**2 * (T - s)))


def reversed_drift_z(theta: float, T: float, s: float, y: float, z: float) -> float:
    """Drift of the reversed driver coordinate: reversed_drift_y / sigma(y)."""
    coeffs = SkewCoefficients(theta)
    b_y = reversed_drift_y(theta, T, s, y, z)
    return b_y * float(coeffs.beta(y))  # 1/sigma = beta


@dataclass(frozen=True)
class ReversedDrift:
    """Drift pair of the reversed (Y, B) dynamics over horizon T."""

    theta: float
    T: float

    def b_y(self, s: float, y: float, z: float) -> float:
        return reversed_drift_y(self.theta, self.T, s, y, z)

    def b_z(self, s: float, y: float, z: float) -> float:
        return reversed_drift_z(self.theta, self.T, s, y, z)


def reversed_drift_reflected(s: float, z: float) -> float:
    """Drift z/s of time-reversed reflected Brownian motion (z >= 0, s > 0)."""
    if not s > 0.0:
        raise ValueError(f"s must be positive, got {s}")
    if z < 0.0:
        raise ValueError(f"z must be nonnegative, got {z}")
    return z / s


def _drift_vec(theta: float, T: float, s: float, y: np.ndarray, z: np.ndarray, m_floor: float):
    """Vectorized (b_y, b_z, clamped-count) for theta in (0, 1); y = 0 maps to drift 0."""
    sgn = np.sign(y)
    beta = (1.0 + theta * sgn) / 2.0
    m = 2.0 * y * np.square(beta) - z
    clamped = int(np.count_nonzero(m < m_floor))
    m = np.maximum(m, m_floor)
    b_y = np.where(
        sgn == 0.0,
        0.0,
        (theta * sgn / beta) * (1.0 / m - m / (theta**2 * (T - s))),
    )
    return b_y, b_y * beta, clamped


def _reversed_euler(theta, T, y0, z0, grid, rng, record):
    """Shared-noise Euler of the reversed pair for theta in (0, 1), vectorized over paths.

    The driver increment is computed first and the y update uses
    sigma(y) * (driver increment), so the degenerate relation
    dY = sigma(Y) dB holds exactly per step.  The 1/(2 y beta^2 - z) drift
    factor is floored at a tiny positive value: the term is repulsive
    (Bessel-like), so excursions against the wedge boundary are pushed back;
    clamp counts are returned for diagnostics.
    """
    n = grid.n_steps
    h = grid.h
    root_h = math.sqrt(h)
    y = np.array(np.atleast_1d(y0), dtype=float).copy()
    z = np.array(np.atleast_1d(z0), dtype=float).copy()
    m_floor = 1e-8 * theta * math.sqrt(T)
    clamped = 0
    if record:
        ys = np.empty((n + 1, y.size))
        zs = np.empty((n + 1, y.size))
        ys[0] = y
        zs[0] = z
    for k in range(n):
        b_y, b_z, c = _drift_vec(theta, T, k * h, y, z, m_floor)
        clamped += c
        d_driver = b_z * h + root_h * rng.standard_normal(y.size)
        sigma = 2.0 / (1.0 + theta * np.sign(y))
        y = y + sigma * d_driver
        z = z + d_driver
        if record:
            ys[k + 1] = y
            zs[k + 1] = z
    if record:
        return ys, zs, clamped
    return y, z, clamped


def _reflected_reversed_euler(T, y0, z0, grid, rng, record):
    """Reflected (theta = 1) reversal: drift w/(T-s), reflection by absolute value.

    w is the reflected coordinate; the driver coordinate z accumulates the
    same unreflected increments, so w - z grows by the reflection overshoots
    (the discrete local time).
    """
    n = grid.n_steps
    h = grid.h
    root_h = math.sqrt(h)
    w = np.array(np.atleast_1d(y0), dtype=float).copy()
    z = np.array(np.atleast_1d(z0), dtype=float).copy()
    if record:
        ws = np.empty((n + 1, w.size))
        zs = np.empty((n + 1, w.size))
        ws[0] = w
        zs[0] = z
    for k in range(n):
        remaining = T - k * h
        increment = (w / remaining) * h + root_h * rng.standard_normal(w.size)
        w = np.abs(w + increment)
        z = z + increment
        if record:
            ws[k + 1] = w
            zs[k + 1] = z
    if record:
        return ws, zs, 0
    return w, z, 0


def _check_reversal_inputs(theta, T, grid):
    SkewCoefficients(theta)
    if theta == 0.0:
        raise ValueError("time reversal machinery requires theta != 0")
    if not T > 0.0:
        raise ValueError(f"T must be positive, got {T}")
    if grid.t_end > T + 1e-12:
        raise ValueError(f"reversed grid horizon {grid.t_end} exceeds T = {T}")


def simulate_reversed_pair(
    theta: float, T: float, terminal, grid: TimeGrid, seed: SeedSpec
) -> tuple[Path, Path]:
    """Euler path of the reversed pair (Y-bar, B-bar) from a forward terminal (y, z).

    Reversed time runs over ``grid`` (t_end <= T); the state at reversed time
    s has the law of the forward pair at T - s when the terminal is drawn
    from the forward law at T.  The terminal must lie strictly inside the
    support wedge.  |theta| = 1 dispatches to the reflected variant (drift
    w/(T-s), reflection by absolute value); theta < 0 runs the mirrored
    theta > 0 system and negates.

    The drift pair governs the dynamics away from y = 0 only; the scheme
    carries no boundary local-time exchange, so ensemble marginals drift
    from the forward law on horizon scales once paths hit 0.  For
    distribution-level work use :func:`reversed_pair_bridge`.
    """
    _check_reversal_inputs(theta, T, grid)
    y0, z0 = (float(terminal[0]), float(terminal[1]))
    coeffs = SkewCoefficients(theta)
    _require_wedge(coeffs, y0, z0)
    rng = seed.generator()
    flip = theta < 0.0
    th, a, b = (-theta, -y0, -z0) if flip else (theta, y0, z0)
    if th == 1.0:
        if a < 0.0:
            raise ValueError("reflected reversal needs a terminal on the reachable half-line")
        ys, zs, _ = _reflected_reversed_euler(T, a, b, grid, rng, record=True)
    else:
        ys, zs, _ = _reversed_euler(th, T, a, b, grid, rng, record=True)
    sgn = -1.0 if flip else 1.0
    return Path(grid, sgn * ys[:, 0]), Path(grid, sgn * zs[:, 0])


def simulate_reversed_ensemble(
    theta: float,
    T: float,
    terminal_y: np.ndarray,
    terminal_z: np.ndarray,
    grid: TimeGrid,
    seed: SeedSpec,
):
    """Terminal-slice ensemble version of :func:`simulate_reversed_pair`.

    Takes arrays of per-path forward terminals, runs all reversed paths in
    lockstep on one grid with one seed, and returns (y_final, z_final,
    clamp_fraction) at reversed time t_end; clamp_fraction is the fraction
    of Euler sub-steps on which the wedge floor engaged.  The same boundary
    caveat as :func:`simulate_reversed_pair` applies; law-faithful ensembles
    come from :func:`reversed_bridge_ensemble`.
    """
    _check_reversal_inputs(theta, T, grid)
    terminal_y = np.asarray(terminal_y, dtype=float)
    terminal_z = np.asarray(terminal_z, dtype=float)
    if terminal_y.shape != terminal_z.shape or terminal_y.ndim != 1:
        raise ValueError("terminal_y and terminal_z must be 1-d arrays of equal length")
    rng = seed.generator()
    flip = theta < 0.0
    th = -theta if flip else theta
    a = -terminal_y if flip else terminal_y
    b = -terminal_z if flip else terminal_z
    if th == 1.0:
        if np.any(a < 0.0):
            raise ValueError("reflected reversal needs terminals on the reachable half-line")
        y, z, clamped = _reflected_reversed_euler(T, a, b, grid, rng, record=False)
    else:
        y, z, clamped = _reversed_euler(th, T, a, b, grid, rng, record=False)
    sgn = -1.0 if flip else 1.0
    frac = clamped / (grid.n_steps * terminal_y.size)
    return sgn * y, sgn * z, frac


def _reversed_bridge_core(theta, b0, grid, rng, capture_step, record):
    """Bridge-to-zero reversal for theta >= 0, vectorized over paths.

    The modulus runs the exact Gaussian bridge recursion from |b0| down to 0
    over the grid; each step draws the exact local time spent at 0 given the
    step endpoints (an atom at 0 plus a shifted-Gaussian tail), and every
    step that charges local time re-draws the excursion sign with the skew
    split.  Returns recorded (skew, local-time) node arrays, or the captured
    slice plus total local time.
    """
    n = grid.n_steps
    h = grid.h
    horizon = grid.t_end
    m = b0.size
    g = b0.copy()
    sign = np.where(b0 >= 0.0, 1.0, -1.0)
    beta_plus = (1.0 + theta) / 2.0
    ell = np.zeros(m)
    if record:
        skew_nodes = np.empty((n + 1, m))
        ell_nodes = np.empty((n + 1, m))
        skew_nodes[0] = b0
        ell_nodes[0] = 0.0
    cap_skew = b0.copy() if capture_step == 0 else None
    cap_ell = np.zeros(m) if capture_step == 0 else None
    for k in range(n):
        rem = horizon - k * h
        # the final step has rem = h up to rounding; pin the ratio so the
        # bridge lands on 0 exactly instead of within sqrt(eps) of it
        ratio = max((rem - h) / rem, 0.0) if k < n - 1 else 0.0
        g_new = g * ratio + math.sqrt(h * ratio) * rng.standard_normal(m)
        gap2 = np.square(g_new - g)
        amp = np.abs(g) + np.abs(g_new)
        tail = np.sqrt(gap2 - 2.0 * h * np.log(1.0 - rng.random(m)))
        step_ell = np.maximum(0.0, tail - amp)
        fresh = np.where(rng.random(m) < beta_plus, 1.0, -1.0)
        sign = np.where(step_ell > 0.0, fresh, sign)
        ell += step_ell
        g = g_new
        if record:
            skew_nodes[k + 1] = sign * np.abs(g)
            ell_nodes[k + 1] = ell
        if capture_step == k + 1:
            cap_skew = sign * np.abs(g)
            cap_ell = ell.copy()
    if record:
        return skew_nodes, ell_nodes
    return cap_skew, cap_ell, ell


def reversed_pair_bridge(
    theta: float, terminal_skew: float, grid: TimeGrid, seed: SeedSpec
) -> tuple[Path, Path]:
    """Law-exact reversed pair (Y-bar, B-bar) on [0, t_end] from a terminal skew value.

    Conditioned on the forward skew value at time t_end, the reversed skew
    coordinate is a bridge to 0: its modulus follows the exact Gaussian
    bridge recursion, local time at 0 is drawn exactly per step, and the
    excursion sign refreshes with the skew split at every zero passage.  The
    driver coordinate is the skew value minus theta times the *remaining*
    local time, so it ends at 0, the forward start.  Marginals are exact in
    law at the grid nodes; theta < 0 runs the mirrored system and negates.

    Unlike :func:`simulate_reversed_pair` this spans the full horizon (the
    remaining local time needs the whole bridge) and needs no drift floor.
    """
    coeffs = SkewCoefficients(theta)
    b = float(terminal_skew)
    if not math.isfinite(b):
        raise ValueError(f"terminal_skew must be finite, got {terminal_skew}")
    flip = theta < 0.0
    th, b0 = (-theta, -b) if flip else (theta, b)
    if th == 1.0 and b0 < 0.0:
        raise ValueError("|theta| = 1 keeps the skew value on one half-line; terminal is unreachable")
    rng = seed.generator()
    skew_nodes, ell_nodes = _reversed_bridge_core(
        th, np.array([b0]), grid, rng, capture_step=None, record=True
    )
    skew = skew_nodes[:, 0]
    remaining = ell_nodes[-1, 0] - ell_nodes[:, 0]
    driver = skew - th * remaining
    sgn = -1.0 if flip else 1.0
    return Path(grid, coeffs.s(sgn * skew)), Path(grid, sgn * driver)


def reversed_bridge_ensemble(
    theta: float,
    terminal_skew: np.ndarray,
    grid: TimeGrid,
    seed: SeedSpec,
    capture_step: int,
):
    """Ensemble version of :func:`reversed_pair_bridge`, sliced at one node.

    Runs all reversed paths in lockstep over the full grid and returns
    ``(y, z, local_time_total)``: the (Y-bar, B-bar) values at node
    ``capture_step`` and each path's total boundary local time (whose law is
    that of the forward local time at t_end -- handy for cross-checks).
    """
    coeffs = SkewCoefficients(theta)
    terminal_skew = np.asarray(terminal_skew, dtype=float)
    if terminal_skew.ndim != 1 or terminal_skew.size == 0:
        raise ValueError("terminal_skew must be a nonempty 1-d array")
    if not 0 <= int(capture_step) <= grid.n_steps:
        raise ValueError(f"capture_step must lie in [0, {grid.n_steps}], got {capture_step}")
    flip = theta < 0.0
    th = -theta if flip else theta
    b0 = -terminal_skew if flip else terminal_skew
    if th == 1.0 and np.any(b0 < 0.0):
        raise ValueError("|theta| = 1 keeps the skew value on one half-line; terminal is unreachable")
    rng = seed.generator()
    cap_skew, cap_ell, ell_total = _reversed_bridge_core(
        th, b0.copy(), grid, rng, capture_step=int(capture_step), record=False
    )
    driver = cap_skew - th * (ell_total - cap_ell)
    sgn = -1.0 if flip else 1.0
    return coeffs.s(sgn * cap_skew), sgn * driver, ell_total


def heat_check_density(theta: float, u: float, y: float, z: float, fd_step: float) -> float:
    """Relative residual of the joint-density heat identity at one point.

    Central finite differences approximate d/du p and the spatial operator
    (sigma^2(y)/2) d_yy p + sigma(y) d_yz p + (1/2) d_zz p of the (Y, B)
    joint density p(u, y, z); the identity equates them.  Returns
    |L p - d_u p| / |d_u p|.  The full 3x3 stencil must stay inside the
    wedge, off y = 0, and at positive times.
    """
    if not fd_step > 0.0:
        raise ValueError(f"fd_step must be positive, got {fd_step}")
    if not u - fd_step > 0.0:
        raise ValueError("u - fd_step must stay positive")
    if abs(y) <= fd_step:
        raise ValueError("stencil would cross y = 0; pick |y| > fd_step")
    coeffs = SkewCoefficients(theta)
    for yy in (y - fd_step, y, y + fd_step):
        for zz in (z - fd_step, z, z + fd_step):
            if (coeffs.r(yy) - zz) / theta <= 0.0:
                raise ValueError(
                    f"stencil point ({yy}, {zz}) leaves the support wedge"
                )

    d = fd_step
    p = lambda uu, yy, zz: joint_density_YB(theta, uu, yy, zz)
    du = (p(u + d, y, z) - p(u - d, y, z)) / (2.0 * d)
    p0 = p(u, y, z)
    dyy = (p(u, y + d, z) - 2.0 * p0 + p(u, y - d, z)) / d**2
    dzz = (p(u, y, z + d) - 2.0 * p0 + p(u, y, z - d)) / d**2
    dyz = (
        p(u, y + d, z + d) - p(u, y + d, z - d) - p(u, y - d, z + d) + p(u, y - d, z - d)
    ) / (4.0 * d**2)
    sigma = float(coeffs.sigma(y))
    spatial = 0.5 * sigma**2 * dyy + sigma * dyz + 0.5 * dzz
    if du == 0.0:
        raise ValueError("d/du p vanishes at this point; pick another evaluation point")
    return abs(spatial - du) / abs(du)


@dataclass(frozen=True)
class IntegrabilityFlags:
    """Local-integrability verdicts for the three integrals in the Ito form."""

    ito_integrand_ok: bool
    drift_lebesgue_ok: bool
    drift_pv_ok: bool


def integrability_conditions(alpha: float) -> IntegrabilityFlags:
    """Which integrals of the Ito form exist for this alpha.

    The forward integrand |x|^(2 alpha) and the principal-value drift are
    locally manageable for every alpha > -1; the plain Lebesgue drift needs
    alpha > 0.
    """
    if not (-1.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie strictly inside (-1, 1), got {alpha}")
    return IntegrabilityFlags(
        ito_integrand_ok=alpha > -1.0,
        drift_lebesgue_ok=alpha > 0.0,
        drift_pv_ok=alpha > -1.0,
    )
