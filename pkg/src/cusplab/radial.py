"""Purely radial machinery.

Three independent pieces live here:

* the one-parameter ODE family psi' = ((n+1)(e^{psi+a} + b))^{1/(n+1)}
  behind the rotation-invariant Einstein metrics, integrated in its
  first-order (monotone) form so the conserved combination
  (psi')^{n+1}/(n+1) - e^{psi+a} is available as a free invariant,
* the formal power series psi = C_1 x + C_2 x^2 + ... obtained by matching
  orders in the radial equation; the recursion is triangular with pivot
  (k-1)(k+n+1) and its limit is the closed form -(n+1) log(1 + c x),
* the variation-of-parameters kernel for the zero torus mode, built from
  the homogeneous solutions x and x^{-n-1}.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConfigError, DecayPreconditionError, NumericalError
from .grid import RadialGrid


@dataclass(frozen=True)
class CalabiTrajectory:
    """Solution samples of the radial Einstein ODE.

    t_nodes are decreasing (toward the cusp); psi_prime is evaluated from
    the first-order equation, so the first integral is conserved by
    construction and accuracy is judged by the second-order residual.
    """

    n: int
    a: float
    b: float
    t_nodes: np.ndarray
    psi: np.ndarray
    psi_prime: np.ndarray
    breakdown_t: float | None = None

    def first_integral(self) -> np.ndarray:
        return self.psi_prime ** (self.n + 1) / (self.n + 1) - np.exp(self.psi + self.a)

    def first_integral_drift(self) -> float:
        fi = self.first_integral()
        scale = max(1.0, abs(self.b))
        return float(np.max(np.abs(fi - self.b)) / scale)

    def ode_residual(self) -> float:
        """Residual of (psi')^{n-1} psi'' = e^{psi+a} with a finite-difference
        psi'', sup-normalized by the largest forcing value (the forcing decays
        exponentially along the cusp, so pointwise normalization would just
        measure roundoff there).  Interior nodes only."""
        t = self.t_nodes
        dt = t[1] - t[0]
        psi_pp = np.gradient(self.psi_prime, dt, edge_order=2)
        rhs = np.exp(self.psi + self.a)
        res = self.psi_prime ** (self.n - 1) * psi_pp - rhs
        return float(np.max(np.abs(res[2:-2])) / np.max(rhs))


def integrate_calabi(
    n: int,
    a: float,
    b: float,
    t0: float,
    t_end: float,
    tol: float = 1e-12,
    psi0: float = 0.0,
    num_nodes: int = 800,
) -> CalabiTrajectory:
    """Integrate psi' = ((n+1)(e^{psi+a} + b))^{1/(n+1)} from t0 down to t_end.

    For b < 0 the admissible interval has a finite lower bound; integration
    stops there and records the breakdown t-value.
    """
    if t_end >= t0:
        raise ConfigError("t_end must be below t0 (integration runs toward the cusp)")
    if np.exp(psi0 + a) + b <= 0:
        raise ConfigError("initial value violates positivity of the conserved level")

    p = n + 1

    def rhs(t, y):
        lvl = np.exp(y[0] + a) + b
        return [(p * lvl) ** (1.0 / p)]

    events = None
    if b < 0:
        floor = -0.5 * b  # stop when e^{psi+a} has eaten half the margin

        def near_breakdown(t, y):
            return (np.exp(y[0] + a) + b) - floor

        near_breakdown.terminal = True
        near_breakdown.direction = -1
        events = [near_breakdown]

    t_nodes = np.linspace(t0, t_end, num_nodes)
    sol = solve_ivp(
        rhs,
        (t0, t_end),
        [psi0],
        method="DOP853",
        rtol=tol,
        atol=tol,
        t_eval=t_nodes,
        events=events,
        dense_output=False,
    )
    if not sol.success and sol.status != 1:
        raise NumericalError(f"radial ODE integration failed: {sol.message}")
    breakdown = None
    if sol.status == 1 and events is not None:
        breakdown = float(sol.t_events[0][0])
    t_used = sol.t
    psi = sol.y[0]
    psi_prime = np.array([rhs(t, [y])[0] for t, y in zip(t_used, psi)])
    if np.any(psi_prime <= 0):
        raise NumericalError("psi' lost positivity along the trajectory")
    return CalabiTrajectory(n, a, b, t_used, psi, psi_prime, breakdown)


def cone_angle(n: int, b: float):
    """Cone angle 2 pi ((n+1) b)^{1/(n+1)} of the conical family, together
    with an empirical slope limit from a long integration (Aitken-accelerated
    psi' at t = -20, -40, -80)."""
    if b <= 0:
        raise ConfigError(f"need b > 0, got {b}")
    c = ((n + 1) * b) ** (1.0 / (n + 1))
    traj = integrate_calabi(n, 0.0, b, t0=-1.0, t_end=-80.0, tol=1e-12, psi0=0.0)
    probes = []
    for t_probe in (-20.0, -40.0, -80.0):
        idx = int(np.argmin(np.abs(traj.t_nodes - t_probe)))
        probes.append(traj.psi_prime[idx])
    p0, p1, p2 = probes
    denom = p2 - 2.0 * p1 + p0
    if abs(denom) > 1e-14 * max(1.0, abs(p2)):
        empirical = p2 - (p2 - p1) ** 2 / denom
    else:
        empirical = p2
    return 2.0 * np.pi * c, float(empirical)


def radial_volume_ratio(n: int, x, psi, psi_x, psi_xx):
    """(n+1+x psi')^{n-1} (n+1+x(x psi)'') / (n+1)^n for a radial potential.

    Derivatives are passed explicitly so closed forms stay exact; grid
    callers supply finite differences.
    """
    x = np.asarray(x, dtype=float)
    f1 = n + 1 + x * psi_x
    f2 = n + 1 + 2.0 * x * psi_x + x**2 * psi_xx
    if np.any(f1 <= 0) or np.any(f2 <= 0):
        raise NumericalError("volume ratio degenerate: a metric factor lost positivity")
    return f1 ** (n - 1) * f2 / (n + 1) ** n


def volume_ratio_on_grid(n: int, grid: RadialGrid, psi_values, order: int = 2):
    px, pxx = grid.deriv_x(np.asarray(psi_values, dtype=float), order)
    return radial_volume_ratio(n, grid.x, psi_values, px, pxx)


# --- formal power series ---


@dataclass(frozen=True)
class PowerSeries:
    """Truncated solution psi = sum_{k>=1} C_k x^k of the radial equation."""

    n: int
    coeffs: np.ndarray  # coeffs[k] is C_k, coeffs[0] unused (= 0)

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1


def _series_mul(u: list, v: list, K: int) -> list:
    out = [u[0] * v[0] * 0] * (K + 1)
    for i, ui in enumerate(u):
        if ui == 0:
            continue
        for j in range(min(len(v), K + 1 - i)):
            out[i + j] += ui * v[j]
    return out


def _q_compose(u: list, n: int, K: int) -> list:
    """q(u) = log(1 + u/(n+1)) - u/(n+1) as a truncated series in x.

    u has no constant term, so powers of u/(n+1) up to K suffice.  Works on
    any field (floats or Fractions).
    """
    from fractions import Fraction

    inv = Fraction(1, n + 1) if isinstance(u[1], Fraction) else 1.0 / (n + 1)
    y = [ui * inv for ui in u]
    out = [y[0] * 0] * (K + 1)
    power = list(y)
    for mdeg in range(2, K + 1):
        power = _series_mul(power, y, K)
        sgn = 1 if mdeg % 2 == 0 else -1
        coef = Fraction(-sgn, mdeg) if isinstance(u[1], Fraction) else -sgn / mdeg
        for i in range(K + 1):
            out[i] += coef * power[i]
    return out


@lru_cache(maxsize=32)
def _unit_coefficients(n: int, K: int):
    """Exact coefficients D_k of the formal solution with D_1 = 1.

    The radial equation is invariant under rescaling x, so the general
    solution is C_k = D_k c1^k.  Computed once in rational arithmetic; the
    triangular pivot (k-1)(k+n+1) never vanishes for k >= 2.
    """
    from fractions import Fraction

    D = [Fraction(0)] * (K + 1)
    D[1] = Fraction(1)
    for k in range(2, K + 1):
        u = [i * D[i] for i in range(K + 1)]
        v = [i * (i + 1) * D[i] for i in range(K + 1)]
        rhs = _q_compose(u, n, K)
        rhs2 = _q_compose(v, n, K)
        val = -(n + 1) * ((n - 1) * rhs[k] + rhs2[k])
        D[k] = val / ((k - 1) * (k + n + 1))
    return tuple(D)


def expand_formal(n: int, c1: float, K: int) -> PowerSeries:
    """Coefficients C_2..C_K from order matching; C_1 given.

    Matching the x^k coefficient gives (k-1)(k+n+1) C_k on the linear side
    and a polynomial in C_1..C_{k-1} on the nonlinear side, so the system
    is triangular and never singular for k >= 2.
    """
    if K < 1:
        raise ConfigError(f"need K >= 1, got {K}")
    D = _unit_coefficients(n, K)
    C = np.zeros(K + 1)
    for k in range(1, K + 1):
        C[k] = float(D[k]) * c1**k
    return PowerSeries(n, C)


def series_equation_residual(series: PowerSeries) -> float:
    """Max |coefficient| of (linear side - nonlinear side) through order K;
    zero for a solution."""
    n = series.n
    C = list(series.coeffs.astype(float))
    K = series.order
    lhs = [(k - 1.0) * (k + n + 1.0) * C[k] for k in range(K + 1)]
    u = [k * C[k] for k in range(K + 1)]
    v = [k * (k + 1.0) * C[k] for k in range(K + 1)]
    q1 = _q_compose(u, n, K)
    q2 = _q_compose(v, n, K)
    rhs = [-(n + 1) * ((n - 1) * q1[k] + q2[k]) for k in range(K + 1)]
    return float(max(abs(l - r) for l, r in zip(lhs, rhs)))


def tangent_cone_coefficients(n: int, c: float, K: int) -> np.ndarray:
    """Taylor coefficients of -(n+1) log(1 + c x) through order K."""
    k = np.arange(K + 1, dtype=float)
    out = np.zeros(K + 1)
    out[1:] = (n + 1) * (-c) ** k[1:] / k[1:]
    return out


# --- zero-mode kernel ---


def interval_integrals(s: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-interval integrals of y ds on a uniform grid, 4th order.

    Each interval integrates the cubic through its four nearest nodes, so
    the error varies smoothly from node to node (no odd/even sawtooth) and
    stays harmless under second differences.
    """
    nn = len(s)
    if nn < 4:
        raise ConfigError("cumulative integral needs at least 4 nodes")
    h = s[1] - s[0]
    seg = np.empty(nn - 1, dtype=y.dtype)
    seg[1:-1] = (h / 24.0) * (-y[:-3] + 13.0 * y[1:-2] + 13.0 * y[2:-1] - y[3:])
    seg[0] = (h / 24.0) * (9.0 * y[0] + 19.0 * y[1] - 5.0 * y[2] + y[3])
    seg[-1] = (h / 24.0) * (y[-4] - 5.0 * y[-3] + 19.0 * y[-2] + 9.0 * y[-1])
    return seg


def cumulative_integral(s: np.ndarray, y: np.ndarray) -> np.ndarray:
    """int_{s_0}^{s_i} y ds, accumulated from the first node."""
    seg = interval_integrals(s, y)
    out = np.zeros(len(s), dtype=y.dtype)
    np.cumsum(seg, out=out[1:])
    return out


def reverse_cumulative_integral(s: np.ndarray, y: np.ndarray) -> np.ndarray:
    """int_{s_i}^{s_end} y ds, accumulated from the last node so that values
    near the far end keep full relative accuracy (no large-sum cancellation)."""
    seg = interval_integrals(s, y)
    out = np.zeros(len(s), dtype=y.dtype)
    out[:-1] = np.cumsum(seg[::-1])[::-1]
    return out


def _power_fit(x_tail: np.ndarray, g_tail: np.ndarray) -> float:
    """Log-log slope of |g| on the deepest nodes."""
    mask = np.abs(g_tail) > 0
    if mask.sum() < 2:
        return np.inf  # identically zero tail: any decay rate works
    lx = np.log(x_tail[mask])
    lg = np.log(np.abs(g_tail[mask]))
    slope = np.polyfit(lx, lg, 1)[0]
    return float(slope)


def radial_rep_l0(
    n: int,
    grid: RadialGrid,
    g0: np.ndarray,
    u_x0: float,
    check_decay: bool = True,
):
    """Solution of x^2 u'' + (n+1) x u' - (n+1) u = g0 with value u_x0 at the
    boundary node and decay at x -> 0, by variation of parameters on the
    homogeneous solutions x and x^{-n-1}.

    g0 must decay at least like x^{1+eps}; the below-grid tails of the two
    kernel integrals are estimated from a fitted power of the deepest nodes.
    """
    g0 = np.asarray(g0, dtype=float)
    if g0.shape != (len(grid),):
        raise ConfigError("g0 must be sampled on the grid")
    x = grid.x
    s = grid.s
    x0 = grid.x0
    gmax = float(np.max(np.abs(g0)))

    tail_p = np.inf
    tail_P = 0.0
    tail_Q = 0.0
    if gmax > 0 and abs(g0[-1]) > 1e-13 * gmax:
        tail_p = _power_fit(x[-6:], g0[-6:])
        if check_decay and tail_p < 1.02:
            raise DecayPreconditionError(
                f"zero-mode inhomogeneity decays like x^{tail_p:.3f}; "
                "need better than x^1 for the kernel integrals"
            )
        xm = x[-1]
        tail_P = g0[-1] * xm ** (n + 1) / (n + 1 + tail_p)
        if tail_p > 1.0:
            tail_Q = g0[-1] / (xm * (tail_p - 1.0))

    # integrals in s: dt = -2 s^{-3} ds
    w = 2.0 / s**3
    yP = x**n * g0 * w
    yQ = g0 / x**2 * w
    P = tail_P + reverse_cumulative_integral(s, yP)  # int_0^{x_i} t^n g0 dt
    Q = cumulative_integral(s, yQ)  # int_{x_i}^{x0} t^{-2} g0 dt
    cQ = Q
    coeff = u_x0 / x0 + x0 ** (-(n + 2)) / (n + 2) * P[0]
    u = coeff * x - x ** (-(n + 1)) / (n + 2) * P - x / (n + 2) * Q
    split_coeff = coeff - (cQ[-1] + tail_Q) / (n + 2)
    return u, split_coeff
