"""Forward solvers for the Caputo-in-time problem, by two independent routes.

``solve_spectral`` sums the eigenprojection representation
u(t) = sum_n sum_{j<i_n} ((-1)^j / (lambda_n^j j!))
       (sum_l theta_{jl} E_{alpha,1-l}(-lambda_n t^alpha)) D_n^j P_n a,
which for simple eigenvalues collapses to sum_n E_{alpha,1}(-lambda_n
t^alpha) P_n a. ``solve_l1`` marches the implicit L1 scheme on a graded
mesh. The two agree to the L1 scheme's O(K^{-min(2-alpha, r*alpha)}) rate
and cross-validate each other.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.special import gamma as spgamma

from .errors import (DegenerateSeries, LinearSolveFailure, OutOfDomain,
                     StabilityWarning, ToleranceExceeded, WindowTooNarrow)
from .mlf import MlfParams, mlf_eval_array
from .operator import DiscreteOperator, grid_interpolation_weights
from .spectral import SpectralDecomposition
from .theta import build_theta

IMAG_RESIDUE_TOL = 1e-8
UNDERFLOW_FLOOR = 1e-300


@dataclass(frozen=True)
class SolutionField:
    """Grid solution snapshots at strictly increasing positive times."""

    times: np.ndarray          # (T,)
    values: np.ndarray         # (T, N) real
    method: str
    axes: tuple | None = None  # per-axis interior coordinates
    h: tuple | None = None
    lengths: tuple | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or (np.diff(t) <= 0).any() or (t <= 0).any():
            raise ValueError("times must be strictly increasing and positive")
        if self.values.shape[0] != t.size:
            raise ValueError("one value row per time required")


@dataclass(frozen=True)
class ObservationSeries:
    """Single-point observation u(x0, t_k)."""

    times: np.ndarray
    u_at_x0: np.ndarray
    x0: tuple

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        u = np.asarray(self.u_at_x0, dtype=float)
        if t.shape != u.shape or t.ndim != 1:
            raise ValueError("times and values must be matching 1-D arrays")
        if (t <= 0).any():
            raise ValueError("observation times must be positive")


def log_times(t_min: float, t_max: float, per_decade: int = 64) -> np.ndarray:
    """Logarithmically spaced output times, `per_decade` points per decade."""
    n = max(2, int(round(math.log10(t_max / t_min) * per_decade)) + 1)
    return np.geomspace(t_min, t_max, n)


def solve_spectral(dec: SpectralDecomposition, a_vec, alpha: float,
                   times) -> SolutionField:
    """Evaluate the representation formula at the requested times.

    Simple clusters go through one Mittag-Leffler evaluation each; Jordan
    clusters pull in the theta-weighted E_{alpha,1-l} stack. Everything is
    complex until the end; an imaginary residue above 1e-8 of the field
    norm aborts (it signals a conjugate-pairing or clustering bug).
    """
    if not (0.0 < alpha <= 1.0):
        raise ValueError("alpha must be in (0, 1]")
    times = np.asarray(times, dtype=float)
    a = np.asarray(a_vec, dtype=complex)
    T = times.size
    N = dec.size
    ta = times ** alpha
    out = np.zeros((T, N), dtype=complex)

    simple = [c for c in dec.clusters if c.index == 1]
    jordan = [c for c in dec.clusters if c.index > 1]

    if simple:
        V = np.stack([c.apply(a) for c in simple])          # (M, N)
        lam = np.array([c.eigenvalue for c in simple])      # (M,)
        Z = -np.outer(ta, lam)                              # (T, M)
        E = mlf_eval_array(MlfParams(alpha, 1.0), Z)
        out += E @ V

    for c in jordan:
        table = build_theta(alpha, c.index - 1) if (c.index > 1 and alpha < 1.0) else None
        z = c.eigenvalue * ta                              # (T,)
        vj = c.apply(a)
        coef0 = mlf_eval_array(MlfParams(alpha, 1.0), -z)
        out += np.outer(coef0, vj)
        e_cache = {}
        for j in range(1, c.index):
            vj = c.UD @ (c.W @ vj)                         # D^j P a
            if alpha == 1.0:
                # exponential collapse: coefficient of D^j a is t^j e^{-z}/j!
                cj = ta ** j * np.exp(-z) / math.factorial(j)
            else:
                s = np.zeros(T, dtype=complex)
                for ell in range(1, j + 1):
                    if ell not in e_cache:
                        e_cache[ell] = mlf_eval_array(
                            MlfParams(alpha, 1.0 - ell), -z)
                    s += table.theta(j, ell) * e_cache[ell]
                cj = (-1.0) ** j / (c.eigenvalue ** j * math.factorial(j)) * s
            out += np.outer(cj, vj)

    scale = np.linalg.norm(out)
    imag = np.linalg.norm(out.imag)
    if imag > IMAG_RESIDUE_TOL * max(scale, UNDERFLOW_FLOOR):
        raise ToleranceExceeded(
            f"imaginary residue {imag:.2e} exceeds {IMAG_RESIDUE_TOL:.0e} "
            "of the field norm")
    op = dec.operator
    return SolutionField(times=times, values=out.real, method="spectral",
                         axes=None if op is None else op.axes,
                         h=None if op is None else op.h,
                         lengths=None if op is None else op.lengths)


def graded_mesh(t_final: float, n_steps: int, grading: float) -> np.ndarray:
    return t_final * (np.arange(n_steps + 1) / n_steps) ** grading


def default_grading(alpha: float) -> float:
    """Grading restoring the full O(K^-(2-alpha)) rate through the t^alpha layer."""
    return max(1.0, (2.0 - alpha) / alpha)


def solve_l1(op: DiscreteOperator, a_vec, alpha: float, t_final: float,
             n_steps: int, grading: float | None = None) -> SolutionField:
    """Implicit L1 stepper on the graded mesh t_k = T (k/K)^r.

    Piecewise-linear Caputo weights on the nonuniform mesh; each step solves
    (w0 I + A) u = history. alpha = 1 degenerates to backward Euler. Growth
    of any step norm beyond the initial norm raises StabilityWarning: the
    implicit scheme is unconditionally stable, so growth means an assembly
    error.
    """
    if n_steps < 4:
        raise ValueError("n_steps must be >= 4")
    if grading is None:
        grading = default_grading(alpha)
    if grading < 1.0:
        raise ValueError("grading must be >= 1")
    if not (0.0 < alpha <= 1.0):
        raise ValueError("alpha must be in (0, 1]")
    A = op.matrix
    N = A.shape[0]
    t = graded_mesh(t_final, n_steps, grading)
    tau = np.diff(t)
    u = np.empty((n_steps + 1, N))
    u[0] = np.asarray(a_vec, dtype=float)
    du = np.empty((n_steps, N))
    a_norm = np.linalg.norm(u[0])
    warned = False
    g2 = spgamma(2.0 - alpha)
    last_key, last_fact = None, None  # uniform meshes reuse one factorization

    for n in range(1, n_steps + 1):
        if alpha == 1.0:
            w0 = 1.0 / tau[n - 1]
            rhs = w0 * u[n - 1]
        else:
            # b_j = ((t_n-t_j)^{1-a} - (t_n-t_{j+1})^{1-a}) / (tau_j Gamma(2-a))
            dt = t[n] - t[:n + 1]
            pw = dt ** (1.0 - alpha)
            b = (pw[:-1] - pw[1:]) / (tau[:n] * g2)
            w0 = b[-1]
            rhs = w0 * u[n - 1]
            if n > 1:
                rhs = rhs - b[:-1] @ du[:n - 1]
        key = round(math.log(w0), 12)
        if key != last_key:
            try:
                last_fact = lu_factor(w0 * np.eye(N) + A)
            except Exception as exc:
                raise LinearSolveFailure(f"step {n}: {exc}") from exc
            last_key = key
        u[n] = lu_solve(last_fact, rhs)
        if not np.isfinite(u[n]).all():
            raise LinearSolveFailure(f"step {n} produced non-finite values")
        du[n - 1] = u[n] - u[n - 1]
        if not warned and np.linalg.norm(u[n]) > a_norm * (1.0 + 1e-8):
            warnings.warn(
                f"step norm grew past the initial norm at step {n}; "
                "check the operator assembly", StabilityWarning, stacklevel=2)
            warned = True

    return SolutionField(times=t[1:], values=u[1:], method="l1",
                         axes=op.axes, h=op.h, lengths=op.lengths)


def resample(field: SolutionField, times) -> np.ndarray:
    """Linear-in-time interpolation of the field rows at the given times."""
    times = np.asarray(times, dtype=float)
    if (times < field.times[0]).any() or (times > field.times[-1]).any():
        raise ValueError("requested times outside the solved range")
    out = np.empty((times.size, field.values.shape[1]))
    for j in range(field.values.shape[1]):
        out[:, j] = np.interp(times, field.times, field.values[:, j])
    return out


def observe(field: SolutionField, x0) -> ObservationSeries:
    """Multilinear interpolation of the field at the interior point x0."""
    if field.axes is None:
        raise OutOfDomain("field carries no grid metadata to observe on")
    idx, w = grid_interpolation_weights(field.axes, field.h, field.lengths, x0)
    vals = field.values[:, idx] @ w
    return ObservationSeries(times=field.times.copy(), u_at_x0=vals,
                             x0=tuple(float(v) for v in np.atleast_1d(x0)))


@dataclass(frozen=True)
class DecayFit:
    slope: float
    constant: float


def verify_decay(series: ObservationSeries, alpha: float,
                 t_min: float) -> DecayFit:
    """Least-squares slope of log|u| against log t over t >= t_min.

    For solutions under the positivity condition with sign-definite data the
    slope sits at -alpha (long-time law); the constant is exp(intercept).
    """
    mask = series.times >= t_min
    if mask.sum() < 10:
        raise WindowTooNarrow(
            f"need >= 10 samples with t >= {t_min}, have {int(mask.sum())}")
    u = np.abs(series.u_at_x0[mask])
    if (u < UNDERFLOW_FLOOR).all():
        raise DegenerateSeries("observation magnitudes all underflow")
    t = series.times[mask]
    keep = u > UNDERFLOW_FLOOR
    slope, intercept = np.polyfit(np.log(t[keep]), np.log(u[keep]), 1)
    return DecayFit(slope=float(slope), constant=float(math.exp(intercept)))


def norm_series(field: SolutionField) -> ObservationSeries:
    """l2 grid norm of the field per time, packaged like an observation."""
    cell = 1.0
    if field.h is not None:
        for hx in field.h:
            cell *= hx
    vals = np.linalg.norm(field.values, axis=1) * math.sqrt(cell)
    x0 = tuple(0.0 for _ in (field.axes or ()))
    return ObservationSeries(times=field.times.copy(), u_at_x0=vals, x0=x0)


# --- CSV / JSON round-trip (17 significant digits, bit-exact) ---

def field_to_csv(field: SolutionField, path) -> None:
    n = field.values.shape[1]
    header = "t," + ",".join(f"u_{j + 1}" for j in range(n))
    data = np.column_stack([field.times, field.values])
    np.savetxt(path, data, delimiter=",", header=header, comments="",
               fmt="%.17g")


def field_from_csv(path, method: str = "csv") -> SolutionField:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return SolutionField(times=data[:, 0], values=data[:, 1:], method=method)


def series_to_csv(series: ObservationSeries, path) -> None:
    data = np.column_stack([series.times, series.u_at_x0])
    np.savetxt(path, data, delimiter=",", header="t,u", comments="",
               fmt="%.17g")


def series_from_csv(path, x0=()) -> ObservationSeries:
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise DegenerateSeries(f"unreadable observation CSV: {exc}") from exc
    if data.size == 0:
        raise DegenerateSeries("empty observation CSV")
    return ObservationSeries(times=data[:, 0], u_at_x0=data[:, 1],
                             x0=tuple(x0))


def series_to_json(series: ObservationSeries, path) -> None:
    payload = {"x0": list(series.x0),
               "times": [float(v) for v in series.times],
               "u_at_x0": [float(v) for v in series.u_at_x0]}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)


def series_from_json(path) -> ObservationSeries:
    with open(path) as fh:
        payload = json.load(fh)
    return ObservationSeries(times=np.array(payload["times"]),
                             u_at_x0=np.array(payload["u_at_x0"]),
                             x0=tuple(payload["x0"]))
