"""Chain-rule coefficients theta_{j,l} and the collapse sums Phi_j.

The table realizes (d/d(t^alpha))^j = sum_l theta_{jl} t^(l - j*alpha) (d/dt)^l.
Entries are built in exact Fraction arithmetic over the rational value of
alpha (every float is an exact rational), so the alternating Phi_j sums are
free of cancellation noise at any table size.

The middle recurrence branch adds theta_{j,l-1}/alpha, the term the product
rule actually produces; ``build_theta(..., binomial_middle=True)`` builds the
variant with a binomial coefficient in its place, kept only to demonstrate
that the variant fails the Phi collapse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.special import rgamma

from .errors import DomainError
from .mlf import MlfParams, mlf_eval

DEFAULT_MAX_J = 10


@dataclass(frozen=True)
class ThetaTable:
    """Triangular coefficient table theta_{jl}, 1 <= l <= j <= max_j."""

    alpha: float
    max_j: int
    rows: tuple[tuple[Fraction, ...], ...]  # rows[j-1][l-1] = theta_{jl}
    alpha_exact: Fraction = field(repr=False, default=Fraction(0))

    def theta(self, j: int, ell: int) -> float:
        if not (1 <= ell <= j <= self.max_j):
            raise IndexError(f"theta_{{{j},{ell}}} outside the triangle")
        return float(self.rows[j - 1][ell - 1])

    def theta_exact(self, j: int, ell: int) -> Fraction:
        if not (1 <= ell <= j <= self.max_j):
            raise IndexError(f"theta_{{{j},{ell}}} outside the triangle")
        return self.rows[j - 1][ell - 1]

    def row(self, j: int) -> np.ndarray:
        return np.array([float(v) for v in self.rows[j - 1]])


@dataclass(frozen=True)
class PhiSequence:
    """Phi_j = ((-1)^j / j!) sum_l theta_{jl} / Gamma(1 - l - alpha), j = 1..max_j."""

    alpha: float
    values: tuple[float, ...]

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("Phi values must be finite")


def build_theta(alpha: float, max_j: int = DEFAULT_MAX_J,
                binomial_middle: bool = False) -> ThetaTable:
    """Build the coefficient triangle by the three-branch recurrence.

    theta_{11} = 1/alpha;
    theta_{j+1,1}   = theta_{j1} (1 - alpha j)/alpha
    theta_{j+1,l}   = theta_{jl} (l - alpha j)/alpha + theta_{j,l-1}/alpha
    theta_{j+1,j+1} = theta_{jj}/alpha
    with no middle branch at j = 1.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if max_j < 1:
        raise ValueError("max_j must be >= 1")
    a = Fraction(alpha)
    rows = [(1 / a,)]
    for j in range(1, max_j):
        prev = rows[-1]
        row = []
        for ell in range(1, j + 2):
            v = Fraction(0)
            if ell <= j:
                v += prev[ell - 1] * (ell - a * j) / a
            if ell >= 2:
                if binomial_middle and ell <= j:
                    v += Fraction(math.comb(j, ell - 1)) / a
                else:
                    v += prev[ell - 2] / a
            row.append(v)
        rows.append(tuple(row))
    return ThetaTable(alpha=alpha, max_j=max_j, rows=tuple(rows),
                      alpha_exact=a)


def phi_sequence(table: ThetaTable) -> PhiSequence:
    """Collapse sums Phi_j for j = 1..max_j, reciprocal-gamma convention."""
    vals = []
    for j in range(1, table.max_j + 1):
        s = 0.0
        sign = (-1.0) ** j / math.factorial(j)
        for ell in range(1, j + 1):
            s += table.theta(j, ell) * float(rgamma(1.0 - ell - table.alpha))
        vals.append(sign * s)
    return PhiSequence(alpha=table.alpha, values=tuple(vals))


def phi_normalized_exact(table: ThetaTable) -> list[Fraction]:
    """Phi_j * Gamma(1-alpha) as exact rationals.

    Uses 1/Gamma(1-l-alpha) = (-1)^l (alpha)_l / Gamma(1-alpha), so the
    collapse identity Phi_j = 1/Gamma(1-alpha) becomes the rational statement
    ((-1)^j / j!) sum_l theta_{jl} (-1)^l prod_{m<l}(alpha+m) = 1, checkable
    without any floating gamma.
    """
    a = table.alpha_exact
    out = []
    for j in range(1, table.max_j + 1):
        s = Fraction(0)
        poch = Fraction(1)
        for ell in range(1, j + 1):
            poch *= a + (ell - 1)
            s += table.theta_exact(j, ell) * (-1) ** ell * poch
        out.append((-1) ** j * s / math.factorial(j))
    return out


def mlf_derivative_via_theta(alpha: float, j: int, z: complex,
                             table: ThetaTable | None = None) -> complex:
    """j-th derivative (d/dz)^j E_{alpha,1}(-z) via the theta identity
    z^(-j) sum_l theta_{jl} E_{alpha,1-l}(-z), valid for Re z > 0.
    """
    if j < 1:
        raise ValueError("j must be >= 1")
    z = complex(z)
    if z.real <= 0:
        raise DomainError("identity requires Re z > 0")
    if alpha == 1.0:
        # exponential collapse: (d/dz)^j e^(-z) = (-1)^j e^(-z)
        return complex((-1.0) ** j * np.exp(-z))
    if table is None or table.max_j < j:
        table = build_theta(alpha, max_j=j)
    s = 0.0 + 0.0j
    for ell in range(1, j + 1):
        s += table.theta(j, ell) * mlf_eval(MlfParams(alpha, 1.0 - ell), -z)
    return z ** (-j) * s
