"""Decay-rate fitting and related diagnostics.

The sharp envelope for a remainder governed by the first torus eigenvalue is

    H(x) = x^{-n/2 + 1/4} exp(-2 sqrt(lambda_1) / sqrt(x)).

decay_fit estimates (amplitude, power p, exponential coefficient delta) in
the model A x^p exp(-delta/sqrt(x)) by linear least squares of log|v|
against {1, log x, 1/sqrt(x)}; fixing delta drops the third column.

lemma43_check validates the two calculus inequalities

    int_0^x  t^k exp(-c/sqrt(t)) dt  <  (2/c)       x^{k+3/2} exp(-c/sqrt(x)),
    int_x^x0 t^k exp(+c/sqrt(t)) dt  <  ((2+eps)/c) x^{k+3/2} exp(+c/sqrt(x)),

the second on the admissible window x0 <= (eps/(2+eps) * c/(2k+3))^2, and
the limit 2 of the first ratio as x -> 0.  Substituting tau = 1/sqrt(t)
turns both ratios into well-conditioned one-dimensional integrals

    R1(x) = 2c int_0^inf        (1 + w/tau0)^{-(2k+3)} e^{-c w} dw,
    R2(x) = 2c int_0^{tau0-tau1} (1 - w/tau0)^{-(2k+3)} e^{-c w} dw,

with tau0 = 1/sqrt(x), evaluated by Gauss-Laguerre resp. panelled
Gauss-Legendre quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError
from .fields import Field
from .model import CuspModel


def barrier_sign(n: int, p: float) -> float:
    """Coefficient of x^p in L(x^p): (p-1)(p+n+1)/(n+1).

    Negative for 0 < p < 1 (supersolutions), zero at the homogeneous
    exponents p = 1 and p = -n-1, positive for p > 1.
    """
    return (p - 1.0) * (p + n + 1.0) / (n + 1.0)


def decay_envelope(n: int, lam1: float, x):
    x = np.asarray(x, dtype=float)
    return x ** (-0.5 * n + 0.25) * np.exp(-2.0 * np.sqrt(lam1) / np.sqrt(x))


def window_from_s(lam1: float, s_lo: float, s_hi: float):
    """Convert a window in s = 2 sqrt(lambda_1)/sqrt(x) units to x bounds."""
    return (2.0 * np.sqrt(lam1) / s_hi) ** 2, (2.0 * np.sqrt(lam1) / s_lo) ** 2


@dataclass(frozen=True)
class DecayFit:
    window: tuple
    delta: float
    p: float
    amplitude: float
    rms: float
    nodes: int


def decay_fit(x, profile, window, mode="free_delta", delta: float | None = None) -> DecayFit:
    """Fit |profile| ~ A x^p exp(-delta/sqrt(x)) on the window (x_lo, x_hi).

    mode "free_delta" fits all three parameters; "fixed_delta" requires
    delta and fits (A, p) only.  The profile must have one sign on the
    window; the rms of log|profile| against the model is always reported.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(profile, dtype=float)
    x_lo, x_hi = window
    mask = (x >= x_lo) & (x <= x_hi)
    if mask.sum() < 8:
        raise ConfigError(f"window {window} contains {mask.sum()} nodes; need >= 8")
    xv = x[mask]
    vv = v[mask]
    if np.any(vv == 0) or (np.any(vv > 0) and np.any(vv < 0)):
        raise ConfigError("profile changes sign (or vanishes) inside the fit window")
    y = np.log(np.abs(vv))
    if mode == "free_delta":
        cols = np.column_stack([np.ones_like(xv), np.log(xv), -1.0 / np.sqrt(xv)])
        coef, *_ = np.linalg.lstsq(cols, y, rcond=None)
        log_a, p_fit, delta_fit = coef
    elif mode == "fixed_delta":
        if delta is None:
            raise ConfigError("fixed_delta mode needs delta")
        y = y + delta / np.sqrt(xv)
        cols = np.column_stack([np.ones_like(xv), np.log(xv)])
        coef, *_ = np.linalg.lstsq(cols, y, rcond=None)
        log_a, p_fit = coef
        delta_fit = float(delta)
        y = y - delta / np.sqrt(xv)
        cols = np.column_stack([np.ones_like(xv), np.log(xv), -1.0 / np.sqrt(xv)])
        coef = np.array([log_a, p_fit, delta_fit])
    else:
        raise ConfigError(f"unknown fit mode {mode!r}")
    resid = y - cols @ coef
    return DecayFit(
        window=(float(x_lo), float(x_hi)),
        delta=float(delta_fit),
        p=float(p_fit),
        amplitude=float(np.exp(log_a)),
        rms=float(np.sqrt(np.mean(resid**2))),
        nodes=int(mask.sum()),
    )


# --- calculus inequality checks ---


@lru_cache(maxsize=1)
def _legendre_nodes():
    return np.polynomial.legendre.leggauss(64)


def _panelled_exp_integral(fn, c: float, upper: float) -> float:
    """int_0^upper fn(w) e^{-c w} dw by Gauss-Legendre panels of width ~8/c."""
    yg, wg = _legendre_nodes()
    panels = max(1, int(np.ceil(upper * c / 8.0)))
    edges = np.linspace(0.0, upper, panels + 1)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        wmid = 0.5 * (b - a) * yg + 0.5 * (a + b)
        ww = 0.5 * (b - a) * wg
        total += float(ww @ (fn(wmid) * np.exp(-c * wmid)))
    return total


def ratio_lower(c: float, k: float, x) -> np.ndarray:
    """R1(x) = c int_0^x t^k e^{-c/sqrt(t)} dt / (x^{k+3/2} e^{-c/sqrt(x)}).

    With tau0 = 1/sqrt(x) this is 2c int_0^inf (1+w/tau0)^{-(2k+3)} e^{-cw} dw,
    manifestly approaching 2 as x -> 0."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    for i, xi in enumerate(x):
        tau0 = 1.0 / np.sqrt(xi)
        upper = 45.0 / c
        out[i] = 2.0 * c * _panelled_exp_integral(
            lambda w: (1.0 + w / tau0) ** (-(2.0 * k + 3.0)), c, upper
        )
    return out


def ratio_upper(c: float, k: float, x, x0: float) -> np.ndarray:
    """R2(x) = c int_x^{x0} t^k e^{+c/sqrt(t)} dt / (x^{k+3/2} e^{+c/sqrt(x)})."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    yg, wg = _legendre_nodes()
    for i, xi in enumerate(x):
        tau0 = 1.0 / np.sqrt(xi)
        tau1 = 1.0 / np.sqrt(x0)
        upper = tau0 - tau1
        # integrand ~ e^{-c w}: past ~45/c the contribution is below 1e-18
        upper_eff = min(upper, 45.0 / c)
        panels = max(1, int(np.ceil(upper_eff * c / 8.0)))
        total = 0.0
        edges = np.linspace(0.0, upper_eff, panels + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            wmid = 0.5 * (b - a) * yg + 0.5 * (a + b)
            ww = 0.5 * (b - a) * wg
            vals = (1.0 - wmid / tau0) ** (-(2.0 * k + 3.0)) * np.exp(-c * wmid)
            total += float(ww @ vals)
        out[i] = 2.0 * c * total
    return out


@dataclass(frozen=True)
class CalculusReport:
    c: float
    k: float
    eps: float
    sup_r1: float
    limit_r1: float
    sup_r2: float | None
    x0_admissible: float | None
    passed: bool


def lemma43_check(c: float, k: float, x_max: float, eps: float = 1.0, num: int = 200) -> CalculusReport:
    """Check sup R1 < 2, R1 -> 2 as x -> 0 (within 1%), and sup R2 < 2+eps on
    the admissible window for the second inequality."""
    if c <= 0 or k <= -1.5:
        raise ConfigError("need c > 0 and k > -3/2")
    xs = np.geomspace(1e-6, x_max, num)
    r1 = ratio_lower(c, k, xs)
    sup_r1 = float(np.max(r1))
    limit_r1 = float(r1[0])
    sup_r2 = None
    x0_adm = None
    if 2.0 * k + 3.0 > 0:
        x0_adm = (eps / (2.0 + eps) * c / (2.0 * k + 3.0)) ** 2
        xs2 = np.geomspace(x0_adm * 1e-6, x0_adm * 0.999, num // 2)
        r2 = ratio_upper(c, k, xs2, x0_adm)
        sup_r2 = float(np.max(r2))
        r2_ok = sup_r2 < 2.0 + eps
    else:
        r2_ok = True  # admissible window empty: nothing to check
    passed = (sup_r1 < 2.0) and (abs(limit_r1 - 2.0) <= 0.02) and r2_ok
    return CalculusReport(c, k, eps, sup_r1, limit_r1, sup_r2, x0_adm, passed)


# --- envelope diagnostics ---


@dataclass(frozen=True)
class EnvelopeReport:
    passed: bool
    first_violation_x: float | None
    margin: float


def envelope_check(
    u: Field,
    model: CuspModel,
    lam1: float,
    bound: float,
    x_star: float,
    x0: float,
    power: float,
) -> EnvelopeReport:
    """Node-wise check of max |u(y)| <= bound * H(y) on [x_star, x0] and
    <= bound * H(x_star) (y/x_star)^power below x_star."""
    if not 0 < x_star <= x0:
        raise ConfigError("need 0 < x_star <= x0")
    if not 0 < power < 1:
        raise ConfigError("need 0 < power < 1")
    x = u.grid.x
    full = u.values()
    vals = np.max(np.abs(full), axis=tuple(range(full.ndim - 1)))
    n = model.n
    env = np.where(
        x >= x_star,
        bound * decay_envelope(n, lam1, x),
        bound * decay_envelope(n, lam1, x_star) * (x / x_star) ** power,
    )
    inside = x <= x0
    ratio = np.where(inside, vals / env, 0.0)
    worst = float(np.max(ratio))
    if worst <= 1.0:
        return EnvelopeReport(True, None, 1.0 - worst)
    idx = int(np.argmax(ratio))
    return EnvelopeReport(False, float(x[idx]), 1.0 - worst)
