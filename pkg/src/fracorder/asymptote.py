"""Long-time leading term A^{-1}(P_n a)(x0) / (Gamma(1-alpha) t^alpha) and
the t^{-2 alpha} remainder envelope behind it."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as spgamma

from .errors import RemainderDominates, WindowTooNarrow
from .operator import interpolation_weights
from .solver import ObservationSeries
from .spectral import SpectralDecomposition, inverse_via_neumann


@dataclass(frozen=True)
class AsymptoticModel:
    """Fitted long-time model u(x0,t) ~ leading_coeff/(Gamma(1-alpha) t^alpha)
    with |remainder| <= remainder_scale * t^(-2 alpha)."""

    leading_coeff: float
    alpha: float
    remainder_scale: float

    def __post_init__(self):
        if self.remainder_scale < 0:
            raise ValueError("remainder_scale must be >= 0")


def _resolve_weights(dec: SpectralDecomposition, x0_weights):
    if isinstance(x0_weights, tuple) and len(x0_weights) == 2 \
            and isinstance(x0_weights[0], np.ndarray):
        return x0_weights
    if dec.operator is None:
        raise ValueError(
            "pass explicit (indices, weights); decomposition has no grid")
    return interpolation_weights(dec.operator, x0_weights)


def leading_term(dec: SpectralDecomposition, a_vec, x0_weights, alpha: float,
                 n_keep: int | None = None) -> float:
    """(sum_{n<=n_keep} A^{-1} P_n a)(x0) / Gamma(1-alpha).

    With all clusters kept this equals the direct solve A f = a evaluated at
    x0 over Gamma(1-alpha); clusters are ordered by ascending real part.
    """
    if n_keep is None:
        n_keep = len(dec.clusters)
    if not (1 <= n_keep <= len(dec.clusters)):
        raise ValueError("n_keep out of range")
    idx, w = _resolve_weights(dec, x0_weights)
    a = np.asarray(a_vec, dtype=complex)
    acc = np.zeros_like(a)
    for i in range(n_keep):
        acc += inverse_via_neumann(dec, dec.clusters[i].apply(a), i)
    val = complex(acc[idx] @ w)
    return float(val.real) / spgamma(1.0 - alpha)


def leading_term_per_cluster(dec: SpectralDecomposition, a_vec, x0_weights,
                             alpha: float) -> np.ndarray:
    """Per-cluster contributions A^{-1}(P_n a)(x0)/Gamma(1-alpha)."""
    idx, w = _resolve_weights(dec, x0_weights)
    a = np.asarray(a_vec, dtype=complex)
    out = []
    for i in range(len(dec.clusters)):
        v = inverse_via_neumann(dec, dec.clusters[i].apply(a), i)
        out.append(complex(v[idx] @ w).real / spgamma(1.0 - alpha))
    return np.array(out)


@dataclass(frozen=True)
class RemainderFit:
    """Fitted remainder data: scale C = max t^{2 alpha}|R|, log-log slope."""

    scale: float
    slope: float

    def __float__(self):
        return self.scale


def remainder_fit(series: ObservationSeries, model_leading: float,
                  alpha: float, t_min: float) -> RemainderFit:
    """Fit R(t) = u(x0,t) - model_leading * t^{-alpha} beyond t_min.

    The long-time theory puts the remainder under C t^{-2 alpha}; the
    returned slope should sit at or below -2 alpha. RemainderDominates
    signals a pre-asymptotic window (|R| exceeding the leading term at the
    far end).
    """
    mask = series.times >= t_min
    if mask.sum() < 10:
        raise WindowTooNarrow(
            f"need >= 10 samples beyond t_min={t_min}, have {int(mask.sum())}")
    t = series.times[mask]
    lead = model_leading * t ** (-alpha)
    r = series.u_at_x0[mask] - lead
    if abs(r[-1]) > abs(lead[-1]):
        raise RemainderDominates(
            f"|R|={abs(r[-1]):.3g} exceeds |leading|={abs(lead[-1]):.3g} at "
            f"t={t[-1]:.3g}; enlarge t_min")
    scale = float(np.max(t ** (2.0 * alpha) * np.abs(r)))
    nz = np.abs(r) > 1e-250
    if nz.sum() >= 3:
        slope = float(np.polyfit(np.log(t[nz]), np.log(np.abs(r[nz])), 1)[0])
    else:
        # remainder at rounding floor: model is exact, report sub -2a slope
        slope = -math.inf
    return RemainderFit(scale=scale, slope=slope)
