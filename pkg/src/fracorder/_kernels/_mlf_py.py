"""NumPy fallback for the Mittag-Leffler summation kernels.

Same contract as the compiled twin in ``_mlf_cy.pyx``: the caller supplies
precomputed reciprocal-gamma coefficient tables, the kernel only does the
complex power-series bookkeeping. Vectorized over elements, looped over
terms, so the fallback stays usable on large batches.
"""

from __future__ import annotations

import numpy as np

_OVERFLOW = 1e290


def series_sum(z, coef, tol, kmin, out, status):
    """Per-element partial sums of sum_k coef[k] * z**k.

    Stops an element once two consecutive terms drop below
    tol*(1 + |partial sum|) and at least ``kmin`` terms were consumed
    (guards against pole zeros and the pre-peak growth of the series).
    status[i]: 0 converged, 1 coef exhausted first, 2 overflow.
    Returns the largest term index consumed plus one.
    """
    n = z.shape[0]
    K = coef.shape[0]
    s = np.zeros(n, dtype=np.complex128)
    zp = np.ones(n, dtype=np.complex128)
    small = np.zeros(n, dtype=np.int64)
    stat = np.ones(n, dtype=np.uint8)
    active = np.ones(n, dtype=bool)
    kused = 0
    for k in range(K):
        term = coef[k] * zp
        s = np.where(active, s + term, s)
        mag = np.abs(term)
        blown = active & ~((mag < _OVERFLOW) & np.isfinite(s))
        stat[blown] = 2
        active &= ~blown
        is_small = mag < tol * (1.0 + np.abs(s))
        small = np.where(is_small, small + 1, 0)
        finished = active & (small >= 2) & (k >= kmin)
        stat[finished] = 0
        active &= ~finished
        kused = k + 1
        if not active.any():
            break
        zp = np.where(active, zp * z, zp)
    out[:] = s
    status[:] = stat
    return kused


def asym_sum(z, coef, kmax, stop_at_min, out):
    """Per-element sums of -sum_{k=1..kmax} coef[k-1] * z**(-k).

    With ``stop_at_min`` the element returns the partial sum at the global
    magnitude minimum over the horizon (optimal truncation).  Term
    magnitudes oscillate through the reflection-formula sine factor, so a
    local uptick must not stop the scan; pole-zero coefficients contribute
    nothing and are ignored by the minimum tracking.  Elements whose inverse
    power underflows, or whose running term is already negligible against
    the sum, finish early.
    """
    n = z.shape[0]
    s = np.zeros(n, dtype=np.complex128)
    best = np.zeros(n, dtype=np.complex128)
    best_mag = np.full(n, np.inf)
    zinv = 1.0 / z
    zp = np.ones(n, dtype=np.complex128)
    active = np.ones(n, dtype=bool)
    tiny = np.zeros(n, dtype=np.int64)
    for k in range(1, min(kmax, coef.shape[0]) + 1):
        zp = zp * zinv
        active &= zp != 0.0
        if not active.any():
            break
        term = -coef[k - 1] * zp
        mag = np.abs(term)
        if stop_at_min:
            grown = active & (mag > 1e290)
            active &= ~grown
            s = np.where(active, s + term, s)
            hit = active & (mag > 0.0) & (mag < best_mag)
            best_mag = np.where(hit, mag, best_mag)
            best = np.where(hit, s, best)
            negligible = mag < 2.3e-17 * (1.0 + np.abs(s))
            tiny = np.where(negligible, tiny + 1, 0)
            active &= tiny < 2
            if not active.any():
                break
        else:
            s = np.where(active, s + term, s)
    out[:] = best if stop_at_min else s
