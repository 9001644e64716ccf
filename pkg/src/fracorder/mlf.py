"""Mittag-Leffler functions E_{alpha,beta}(z) on the sector the solver needs.

Three regimes, selected per point by the size of log(largest series term),
which is |z|**(1/alpha) for |z| > 1:

* power series in double precision while the largest term stays below
  exp(LOG_DOUBLE), so cancellation cannot eat the answer;
* extended-precision series (mpmath, working digits scaled with the
  cancellation estimate) on the intermediate band where doubles are
  insufficient but the algebraic expansion has not kicked in;
* the algebraic large-argument expansion, optimally truncated, once its
  tail error exp(-|z|**(1/alpha)) is negligible.

The expansion is valid only left of the Stokes rays, so large arguments are
restricted to |arg(-z)| <= pi/2 + 0.25*pi*(1-alpha); anything else raises
NotImplementedSector.  All reciprocal gammas follow the entire-function
convention 1/Gamma(nonpositive integer) = 0.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import mpmath as mp
import numpy as np
from scipy.special import rgamma

from . import _kernels
from .errors import DomainError, NonConvergence, NotImplementedSector

SERIES_TERM_CAP = 10_000
DEFAULT_TOL = 1e-12
R_SWITCH = 40.0      # outer cap on series usage in |z|
LOG_DOUBLE = 6.0     # double series while |z|**(1/alpha) <= this
LOG_ASYM = 34.0      # algebraic expansion once |z|**(1/alpha) >= this
ASYM_KMAX = 400


@dataclass(frozen=True)
class MlfParams:
    """Order pair (alpha, beta) of E_{alpha,beta}.

    alpha is restricted to (0, 1]: the open interval is the model scope,
    alpha = 1 is admitted for the exponential collapse used as an oracle.
    beta may be any real, including the nonpositive values 1 - ell that
    appear in derivative formulas.
    """

    alpha: float
    beta: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if not math.isfinite(self.beta):
            raise ValueError("beta must be finite")


def _check_finite(z: complex) -> complex:
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError("z must have finite components")
    return z


_series_coef: dict[tuple[float, float, int], np.ndarray] = {}
_asym_coef: dict[tuple[float, float], np.ndarray] = {}


def _rgamma_snapped(args: np.ndarray) -> np.ndarray:
    """1/Gamma with arguments within 1e-8 of a nonpositive integer snapped to
    the pole, where the reciprocal is exactly zero.

    Keeps float rounding of alpha*k from leaving a spurious near-pole
    residual that breaks optimal truncation.
    """
    c = rgamma(args)
    n = np.rint(args)
    pole = (n <= 0) & (np.abs(args - n) <= 1e-8 * np.maximum(1.0, np.abs(args)))
    c[pole] = 0.0
    return c


def _series_coefficients(alpha: float, beta: float, n: int) -> np.ndarray:
    """rgamma(alpha*k + beta) for k = 0..n-1 (cached)."""
    key = (alpha, beta, n)
    c = _series_coef.get(key)
    if c is None:
        c = _rgamma_snapped(alpha * np.arange(n, dtype=float) + beta)
        _series_coef[key] = c
    return c


def _asym_coefficients(alpha: float, beta: float) -> np.ndarray:
    """rgamma(beta - alpha*k) for k = 1..ASYM_KMAX (cached)."""
    key = (alpha, beta)
    c = _asym_coef.get(key)
    if c is None:
        c = _rgamma_snapped(beta - alpha * np.arange(1, ASYM_KMAX + 1, dtype=float))
        _asym_coef[key] = c
    return c


def _kmin_for(alpha: float, beta: float, absz: np.ndarray) -> np.ndarray:
    """Terms before the series peak; never stop earlier."""
    la = np.where(absz > 1.0, absz ** (1.0 / alpha), 0.0)
    k = (la + max(0.0, -beta) + 2.0) / alpha
    return np.maximum(3, np.ceil(k)).astype(np.int64)


def _series_array(params: MlfParams, z: np.ndarray, tol: float) -> np.ndarray:
    """Double-precision kernel series over an array; raises NonConvergence."""
    z = np.ascontiguousarray(z, dtype=np.complex128)
    out = np.empty_like(z)
    status = np.empty(z.shape[0], dtype=np.uint8)
    kmin = _kmin_for(params.alpha, params.beta, np.abs(z))
    n_coef = 160
    while True:
        coef = _series_coefficients(params.alpha, params.beta, n_coef)
        _kernels.series_sum(z, coef, tol, kmin, out, status)
        if (status == 2).any():
            worst = np.abs(z[status == 2]).max()
            raise NonConvergence(
                f"series for E_{{{params.alpha},{params.beta}}} overflowed "
                f"at |z|={worst:.3g}; argument too large for the series regime"
            )
        if not status.any():
            return out
        if n_coef >= SERIES_TERM_CAP:
            worst = np.abs(z[status.astype(bool)]).max()
            raise NonConvergence(
                f"series for E_{{{params.alpha},{params.beta}}} exceeded "
                f"{SERIES_TERM_CAP} terms (|z| up to {worst:.3g}); "
                "argument too large for the series regime"
            )
        n_coef = min(2 * n_coef, SERIES_TERM_CAP)


def _series_mp(params: MlfParams, z: complex, tol: float) -> complex:
    """Extended-precision series for the intermediate band.

    The gamma argument must be formed in mp arithmetic: its double-precision
    rounding (~1e-16 relative) is amplified by the exp(|z|**(1/alpha)) peak
    terms and would wreck the cancellation this regime exists to survive.
    """
    la = abs(z) ** (1.0 / params.alpha)
    dps = 25 + int(0.46 * la * 1.05)
    kmin = int(_kmin_for(params.alpha, params.beta, np.array([abs(z)]))[0])
    with mp.workdps(dps):
        al = mp.mpf(params.alpha)
        be = mp.mpf(params.beta)
        zm = mp.mpc(z)
        s = mp.mpc(0)
        zp = mp.mpc(1)
        small = 0
        for k in range(SERIES_TERM_CAP):
            term = zp * mp.rgamma(al * k + be)
            s += term
            if abs(term) < tol * (1 + abs(s)):
                small += 1
                if small >= 2 and k >= kmin:
                    return complex(s)
            else:
                small = 0
            zp *= zm
    raise NonConvergence(
        f"extended series for E_{{{params.alpha},{params.beta}}} at z={z!r} "
        f"exceeded {SERIES_TERM_CAP} terms"
    )


def _asym_array(params: MlfParams, z: np.ndarray, kmax: int,
                stop_at_min: bool) -> np.ndarray:
    z = np.ascontiguousarray(z, dtype=np.complex128)
    out = np.empty_like(z)
    coef = _asym_coefficients(params.alpha, params.beta)
    _kernels.asym_sum(z, coef, kmax, stop_at_min, out)
    return out


def _sector_ok(alpha: float, z: np.ndarray) -> np.ndarray:
    """True where the expansion at -z is trusted: |arg(-z)| <= pi/2 + delta."""
    delta = 0.25 * math.pi * (1.0 - alpha)
    return np.abs(np.angle(-z)) <= math.pi / 2 + delta + 1e-14


def mlf_series(params: MlfParams, z: complex, tol: float = DEFAULT_TOL) -> complex:
    """Truncated power series sum_k z**k / Gamma(alpha*k + beta).

    Truncates once the next term magnitude falls below tol*(1 + |partial|);
    raises NonConvergence when the term cap is hit first, which signals that
    |z| is too large for the series regime.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    z = _check_finite(z)
    return complex(_series_array(params, np.array([z]), tol)[0])


def mlf_asymptotic(params: MlfParams, x: float, terms: int,
                   threshold: float | None = None) -> complex:
    """k-term algebraic expansion of E_{alpha,beta}(-x) for large x > 0.

    The leading term for beta = 1 - ell is 1/(Gamma(1-ell-alpha) * x); the
    remainder after ``terms`` terms is O(x**-(terms+1)).  Raises DomainError
    below the regime threshold (default: the double-series radius, under
    which the expansion is the wrong tool).
    """
    if x <= 0:
        raise DomainError("x must be positive (argument is -x)")
    if terms < 1:
        raise ValueError("terms must be >= 1")
    if threshold is None:
        threshold = LOG_DOUBLE ** params.alpha
    if x < threshold:
        raise DomainError(
            f"x={x:.3g} below asymptotic-regime threshold {threshold:.3g}"
        )
    out = _asym_array(params, np.array([-x + 0.0j]), terms, False)
    return complex(out[0])


def mlf_eval_array(params: MlfParams, z, tol: float = DEFAULT_TOL,
                   r_switch: float = R_SWITCH) -> np.ndarray:
    """Vectorized E_{alpha,beta} over the supported sector.

    Dispatches per element between the double series, the extended-precision
    band, and the optimally truncated algebraic expansion; the regimes agree
    on their overlaps to ~1e-11 relative.
    """
    z = np.ascontiguousarray(z, dtype=np.complex128)
    if not np.isfinite(z).all():
        raise ValueError("z must have finite components")
    flat = z.ravel()
    out = np.empty_like(flat)
    alpha, beta = params.alpha, params.beta

    # exact exponential collapse: E_{1,1-l}(z) = z**l * exp(z)
    if alpha == 1.0 and beta <= 1.0 and float(beta).is_integer():
        ell = int(round(1.0 - beta))
        out[:] = flat ** ell * np.exp(flat)
        return out.reshape(z.shape)

    absz = np.abs(flat)
    la = np.where(absz > 1.0, absz ** (1.0 / alpha), 0.0)
    ser = (absz <= r_switch) & (la <= LOG_DOUBLE)
    band = (absz <= r_switch) & ~ser & (la < LOG_ASYM)
    asym = ~ser & ~band

    if ser.any():
        out[ser] = _series_array(params, flat[ser], tol)
    if band.any():
        vals = [_series_mp(params, complex(v), min(tol, 1e-14))
                for v in flat[band]]
        out[band] = np.array(vals, dtype=np.complex128)
    if asym.any():
        za = flat[asym]
        bad = ~_sector_ok(alpha, za)
        if bad.any():
            raise NotImplementedSector(
                f"|z| > series range with arg(-z) outside the supported "
                f"sector (alpha={alpha}): z={za[bad][0]!r}"
            )
        vals = _asym_array(params, za, ASYM_KMAX, True)
        # between the Stokes ray alpha*pi/2 and the anti-Stokes ray alpha*pi
        # the expansion carries a decaying exponential term on top of the
        # algebraic series; on the negative real axis it is absent.
        mixed = np.abs(np.angle(za)) < alpha * math.pi - 1e-12
        if mixed.any():
            zeta = np.exp(np.log(za[mixed]) / alpha)
            vals[mixed] += zeta ** (1.0 - beta) * np.exp(zeta) / alpha
        out[asym] = vals
    return out.reshape(z.shape)


def mlf_eval(params: MlfParams, z: complex, tol: float = DEFAULT_TOL,
             r_switch: float = R_SWITCH) -> complex:
    """E_{alpha,beta}(z) at a point; see mlf_eval_array for the dispatch."""
    z = _check_finite(z)
    return complex(mlf_eval_array(params, np.array([z]), tol, r_switch)[0])


def mlf_decay_bound(alpha: float, mu0: float, t: float,
                    const: float = 1.0) -> float:
    """Decay envelope const/(1 + mu0 * t**alpha) for E_{alpha,1}(-mu0 t**alpha).

    const = 1 is valid for 0 < alpha < 1 by the sharp complete-monotonicity
    bound E_{alpha,1}(-x) <= 1/(1 + x/Gamma(1+alpha)) with Gamma(1+alpha) <= 1.
    """
    if mu0 <= 0 or t <= 0:
        raise ValueError("mu0 and t must be positive")
    return const / (1.0 + mu0 * t ** alpha)
