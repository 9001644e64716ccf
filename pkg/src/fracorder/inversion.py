"""Recovery of the fractional order from a single-point observation series,
and the empirical uniqueness gap between two observation series.

The long-time law u(x0,t) ~ L / (Gamma(1-alpha) t^alpha) makes -alpha the
log-log slope of |u|; a two-term refinement u ~ c1 t^-alpha + c2 t^-2alpha
mops up the leading remainder. Both estimators are scale-equivariant.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.special import gamma as spgamma

from .errors import (BoundaryEstimate, DegenerateSeries, NoConvergence,
                     SignChangeInWindow, UniquenessInconclusive,
                     WindowSuspect, WindowTooNarrow)
from .solver import ObservationSeries, UNDERFLOW_FLOOR

ALPHA_CLAMP = (0.01, 0.99)
MIN_WINDOW_SAMPLES = 20
MAX_FIT_SHIFT = 0.05


@dataclass(frozen=True)
class RecoveryResult:
    """Recovered order with fit-quality diagnostics."""

    alpha_hat: float
    leading_coeff_hat: float
    fit_window: tuple
    residual_norm: float
    method: str
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "alpha_hat": self.alpha_hat,
            "leading_coeff_hat": self.leading_coeff_hat,
            "fit_window": list(self.fit_window),
            "residual_norm": self.residual_norm,
            "method": self.method,
            "diagnostics": self.diagnostics,
        }


def auto_window(series: ObservationSeries, slope_var_tol: float = 0.02):
    """Largest window [t_hi/100, t_hi] whose local log-log slope is steady.

    Shrinks the left edge dyadically until the slopes of the first and last
    thirds agree within ``slope_var_tol``; the long-time law only holds
    asymptotically and the onset is problem-dependent.
    """
    t = series.times
    u = np.abs(series.u_at_x0)
    t_hi = t[-1]
    t_lo = t_hi / 100.0
    best = (t_lo, t_hi)
    for _ in range(12):
        mask = (t >= t_lo) & (t <= t_hi) & (u > UNDERFLOW_FLOOR)
        if mask.sum() < MIN_WINDOW_SAMPLES:
            break
        lt, lu = np.log(t[mask]), np.log(u[mask])
        third = mask.sum() // 3
        s1 = np.polyfit(lt[:third], lu[:third], 1)[0]
        s2 = np.polyfit(lt[-third:], lu[-third:], 1)[0]
        best = (t_lo, t_hi)
        if abs(s1 - s2) < slope_var_tol:
            return best
        t_lo *= 2.0
    return best


def _window_mask(series: ObservationSeries, window):
    t_lo, t_hi = window
    if not (t_lo < t_hi):
        raise ValueError("window must satisfy t_lo < t_hi")
    mask = (series.times >= t_lo) & (series.times <= t_hi)
    if mask.sum() < MIN_WINDOW_SAMPLES:
        raise WindowTooNarrow(
            f"{int(mask.sum())} samples in window {window}; need "
            f">= {MIN_WINDOW_SAMPLES}")
    u = series.u_at_x0[mask]
    if (np.abs(u) < UNDERFLOW_FLOOR).all():
        raise DegenerateSeries("observation vanishes in the fit window")
    if (u.max() > 0) and (u.min() < 0):
        raise SignChangeInWindow(
            "data crosses zero inside the window; it is pre-asymptotic")
    if (np.abs(u) < UNDERFLOW_FLOOR).any():
        raise SignChangeInWindow("window contains underflowed samples")
    return mask


def _clamp_alpha(alpha_hat: float, diagnostics: dict) -> float:
    lo, hi = ALPHA_CLAMP
    if not (lo < alpha_hat < hi):
        clamped = min(max(alpha_hat, lo), hi)
        warnings.warn(
            f"recovered order {alpha_hat:.4g} clamped to ({lo}, {hi})",
            BoundaryEstimate, stacklevel=3)
        diagnostics["boundary_estimate"] = True
        diagnostics["alpha_raw"] = alpha_hat
        return clamped
    return alpha_hat


def recover_order_loglog(series: ObservationSeries,
                         window=None) -> RecoveryResult:
    """Order estimate from the log-log slope of |u| over the window.

    alpha_hat = -slope; leading_coeff_hat carries the Gamma(1-alpha_hat)
    normalization so that exact model data u = L t^-a / Gamma(1-a) returns
    L itself.
    """
    if window is None or window == "auto":
        window = auto_window(series)
    mask = _window_mask(series, window)
    t = series.times[mask]
    u = series.u_at_x0[mask]
    sign = 1.0 if u.mean() >= 0 else -1.0
    lt, lu = np.log(t), np.log(np.abs(u))
    slope, intercept = np.polyfit(lt, lu, 1)
    resid = lu - (slope * lt + intercept)
    dof = max(lt.size - 2, 1)
    stderr = float(np.sqrt(resid @ resid / dof / ((lt - lt.mean()) ** 2).sum()))
    diagnostics = {"slope_stderr": stderr, "n_samples": int(lt.size)}
    # window-sensitivity probe: refit on the right half of the window
    half = (math.sqrt(window[0] * window[1]), window[1])
    hm = (series.times >= half[0]) & (series.times <= half[1])
    if hm.sum() >= 5:
        s2 = np.polyfit(np.log(series.times[hm]),
                        np.log(np.abs(series.u_at_x0[hm])), 1)[0]
        diagnostics["window_sensitivity"] = float(abs(s2 - slope))
    alpha_hat = _clamp_alpha(float(-slope), diagnostics)
    lead = sign * math.exp(intercept) * spgamma(1.0 - alpha_hat)
    return RecoveryResult(alpha_hat=alpha_hat, leading_coeff_hat=float(lead),
                          fit_window=(float(window[0]), float(window[1])),
                          residual_norm=float(np.linalg.norm(resid)),
                          method="loglog", diagnostics=diagnostics)


def recover_order_fit(series: ObservationSeries,
                      init: RecoveryResult) -> RecoveryResult:
    """Two-term refinement u ~ c1 t^-a + c2 t^-2a by damped least squares.

    Must stay within 0.05 of the log-log estimate, else the window is
    suspect (reported, never silently averaged).
    """
    window = init.fit_window
    mask = _window_mask(series, window)
    t = series.times[mask]
    u = series.u_at_x0[mask]
    a0 = init.alpha_hat
    c10 = init.leading_coeff_hat / spgamma(1.0 - a0)
    scale = max(abs(u).max(), UNDERFLOW_FLOOR)

    def model(p):
        a, c1, c2 = p
        return c1 * t ** (-a) + c2 * t ** (-2 * a)

    def resid(p):
        return (model(p) - u) / scale

    def jac(p):
        a, c1, c2 = p
        ta = t ** (-a)
        t2a = t ** (-2 * a)
        da = (-c1 * ta * np.log(t) - 2 * c2 * t2a * np.log(t)) / scale
        return np.column_stack([da, ta / scale, t2a / scale])

    try:
        res = least_squares(resid, x0=[a0, c10, 0.0], jac=jac, method="lm",
                            xtol=1e-14, ftol=1e-14, max_nfev=2000)
    except Exception as exc:
        raise NoConvergence(f"two-term fit crashed: {exc}") from exc
    if not res.success:
        raise NoConvergence(f"two-term fit did not converge: {res.message}")
    a_fit, c1, c2 = (float(v) for v in res.x)
    if abs(a_fit - init.alpha_hat) > MAX_FIT_SHIFT:
        raise WindowSuspect(
            f"refined order {a_fit:.4g} moved more than {MAX_FIT_SHIFT} from "
            f"the log-log estimate {init.alpha_hat:.4g}; "
            "report both, do not average")
    diagnostics = dict(init.diagnostics)
    diagnostics.update({"c1": c1, "c2": c2,
                        "loglog_alpha": init.alpha_hat,
                        "nfev": int(res.nfev)})
    alpha_hat = _clamp_alpha(a_fit, diagnostics)
    return RecoveryResult(alpha_hat=alpha_hat,
                          leading_coeff_hat=float(c1 * spgamma(1.0 - alpha_hat)),
                          fit_window=window,
                          residual_norm=float(np.linalg.norm(res.fun)),
                          method="two-term", diagnostics=diagnostics)


def uniqueness_gap(series1: ObservationSeries,
                   series2: ObservationSeries) -> float:
    """max_t |u1 - u2| / max_t |u1| on the common (resampled) time grid.

    Bounded away from zero when the orders differ and the data are
    sign-definite and nonzero; at solver-tolerance zero for identical
    problems. Raises UniquenessInconclusive when both series vanish (the
    degenerate branch: either the orders agree or both solutions are zero).
    """
    t1 = series1.times
    u1 = series1.u_at_x0
    if np.array_equal(t1, series2.times):
        u2 = series2.u_at_x0
    else:
        lo = max(t1[0], series2.times[0])
        hi = min(t1[-1], series2.times[-1])
        keep = (t1 >= lo) & (t1 <= hi)
        if keep.sum() < 2:
            raise ValueError("observation time ranges do not overlap")
        t1 = t1[keep]
        u1 = u1[keep]
        u2 = np.interp(t1, series2.times, series2.u_at_x0)
    m1 = float(np.abs(u1).max())
    m2 = float(np.abs(u2).max())
    if m1 < UNDERFLOW_FLOOR and m2 < UNDERFLOW_FLOOR:
        raise UniquenessInconclusive(
            "both observation series vanish; either the orders agree or "
            "both solutions are identically zero")
    return float(np.abs(u1 - u2).max() / max(m1, UNDERFLOW_FLOOR))


def with_noise(series: ObservationSeries, rel_scale: float,
               rng: np.random.Generator) -> ObservationSeries:
    """Relative additive Gaussian noise: u -> u (1 + rel_scale * xi)."""
    xi = rng.standard_normal(series.u_at_x0.shape)
    return ObservationSeries(times=series.times.copy(),
                             u_at_x0=series.u_at_x0 * (1.0 + rel_scale * xi),
                             x0=series.x0)
