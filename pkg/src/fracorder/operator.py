"""Finite-difference realization of the non-symmetric elliptic operator
A u = -div(a grad u) - b . grad u - c u  on 1D/2D boxes with zero Dirichlet
boundary, plus the structural checks (uniform ellipticity, Poincare
constant, positivity condition) the theory rests on.

Conventions: A is minus the divergence-form right-hand side, so the pure
Laplacian case yields the positive-definite stencil (1/h^2) tridiag(-1,2,-1).
Coefficients are closed-form expression strings (arithmetic, sin, cos, exp,
pi, coordinates x and y), plain numbers, or arrays on the full node lattice
including the boundary.
"""

from __future__ import annotations

import ast
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (ConditionViolatedWarning, EllipticityError, PecletWarning,
                     SpecError)

_ALLOWED_CALLS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_ALLOWED_NAMES = {"pi": math.pi}


@dataclass(frozen=True)
class FractionalOrder:
    """Caputo order in the open interval (0, 1)."""

    value: float

    def __post_init__(self):
        if not (0.0 < self.value < 1.0):
            raise SpecError(f"fractional order must lie in (0,1), got {self.value}")

    def __float__(self):
        return self.value


def _compile_expression(src: str, dim: int):
    """Compile a coefficient expression to a vectorized function of (x[, y]).

    Only arithmetic, unary minus, sin/cos/exp, pi, numbers, and the
    coordinates are admitted; anything else raises SpecError.
    """
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise SpecError(f"cannot parse expression {src!r}: {exc}") from exc

    coords = ("x", "y")[:dim]

    def ev(node, env):
        if isinstance(node, ast.Expression):
            return ev(node.body, env)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id in env:
                return env[node.id]
            if node.id in _ALLOWED_NAMES:
                return _ALLOWED_NAMES[node.id]
            raise SpecError(f"unknown name {node.id!r} in expression {src!r}")
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand, env)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and isinstance(
                node.op, (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)):
            a, b = ev(node.left, env), ev(node.right, env)
            if isinstance(node.op, ast.Add):
                return a + b
            if isinstance(node.op, ast.Sub):
                return a - b
            if isinstance(node.op, ast.Mult):
                return a * b
            if isinstance(node.op, ast.Div):
                return a / b
            return a ** b
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
            if node.func.id not in _ALLOWED_CALLS or node.keywords:
                raise SpecError(f"call {node.func.id!r} not allowed in {src!r}")
            if len(node.args) != 1:
                raise SpecError(f"{node.func.id} takes one argument in {src!r}")
            return _ALLOWED_CALLS[node.func.id](ev(node.args[0], env))
        raise SpecError(f"construct {type(node).__name__} not allowed in {src!r}")

    def fn(*points):
        env = dict(zip(coords, points))
        out = ev(tree, env)
        return np.broadcast_to(np.asarray(out, dtype=float),
                               np.broadcast(*points).shape).copy() \
            if np.ndim(out) == 0 else np.asarray(out, dtype=float)

    return fn


Coefficient = "str | float | np.ndarray"


@dataclass(frozen=True)
class ProblemSpec:
    """Initial-boundary-value problem data on a box domain.

    ``a11`` (1D) or ``a11, a12, a22`` (2D) give the symmetric diffusion
    matrix; ``b`` the advection components; ``c <= 0`` the reaction term;
    ``initial`` the starting profile; ``x0`` the interior observation point.
    ``div_b`` may supply div b in closed form where ``b`` is array-valued.
    """

    dim: int
    lengths: tuple
    n: tuple
    a11: object = 1.0
    a22: object = 1.0
    a12: object = 0.0
    b: tuple = ()
    c: object = 0.0
    initial: object = 0.0
    x0: tuple = ()
    alpha: FractionalOrder = field(default_factory=lambda: FractionalOrder(0.5))
    div_b: object = None

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise SpecError("dim must be 1 or 2")
        if len(self.lengths) != self.dim or any(L <= 0 for L in self.lengths):
            raise SpecError("lengths must give one positive extent per axis")
        if len(self.n) != self.dim or any(int(k) < 3 for k in self.n):
            raise SpecError("need at least 3 interior nodes per axis")
        b = self.b if self.b else tuple(0.0 for _ in range(self.dim))
        object.__setattr__(self, "b", b)
        if len(b) != self.dim:
            raise SpecError("b must have one component per axis")
        if isinstance(self.alpha, (int, float)):
            object.__setattr__(self, "alpha", FractionalOrder(float(self.alpha)))
        x0 = tuple(float(v) for v in (self.x0 or tuple(L / 2 for L in self.lengths)))
        object.__setattr__(self, "x0", x0)
        if len(x0) != self.dim:
            raise SpecError("x0 must have one coordinate per axis")
        for v, L in zip(x0, self.lengths):
            if not (0.0 < v < L):
                raise SpecError(f"x0 must be strictly interior, got {x0}")
        # sampled sign check of c <= 0 on the closed box
        cs = self.sample_coefficient(self.c, 33)
        if (cs > 1e-12).any():
            raise SpecError("c(x) must be <= 0 on the closed box")

    def axes(self, n_sample: int | None = None, closed: bool = True):
        """Per-axis sample coordinates (closed box unless told otherwise)."""
        out = []
        for L, n in zip(self.lengths, self.n):
            if n_sample is None:
                h = L / (n + 1)
                out.append(np.linspace(h, L - h, n))
            else:
                pts = np.linspace(0.0, L, n_sample)
                out.append(pts if closed else pts[1:-1])
        return out

    def sample_coefficient(self, coef, n_sample: int = 33) -> np.ndarray:
        """Evaluate a coefficient on a closed-box lattice of n_sample**dim."""
        axes = self.axes(n_sample)
        grids = np.meshgrid(*axes, indexing="ij")
        return evaluate_coefficient(coef, grids, self)

    def initial_on(self, op: "DiscreteOperator") -> np.ndarray:
        """Initial profile sampled at the operator's interior nodes."""
        grids = np.meshgrid(*op.axes, indexing="ij")
        return evaluate_coefficient(self.initial, grids, self).ravel()


def evaluate_coefficient(coef, grids, spec: ProblemSpec) -> np.ndarray:
    """Coefficient values on coordinate arrays (expression, number, lattice)."""
    shape = np.broadcast(*grids).shape
    if isinstance(coef, str):
        return _compile_expression(coef, spec.dim)(*grids)
    if isinstance(coef, (int, float)):
        return np.full(shape, float(coef))
    if isinstance(coef, np.ndarray):
        full_shape = tuple(k + 2 for k in spec.n)
        if coef.shape != full_shape:
            raise SpecError(
                f"array coefficient must live on the full node lattice "
                f"{full_shape}, got {coef.shape}")
        interps = [np.linspace(0.0, L, n + 2)
                   for L, n in zip(spec.lengths, spec.n)]
        # multilinear interpolation onto the requested points
        pts = [g.ravel() for g in grids]
        if spec.dim == 1:
            vals = np.interp(pts[0], interps[0], coef)
        else:
            from scipy.interpolate import RegularGridInterpolator

            rgi = RegularGridInterpolator(interps, coef, method="linear")
            vals = rgi(np.stack(pts, axis=-1))
        return vals.reshape(shape)
    raise SpecError(f"unsupported coefficient type {type(coef).__name__}")


@dataclass(frozen=True)
class DiscreteOperator:
    """Dense interior-node matrix of A with its grid metadata."""

    matrix: np.ndarray
    axes: tuple          # per-axis interior node coordinates
    h: tuple             # per-axis spacing
    lengths: tuple
    sigma_est: float
    poincare_const: float
    spec: ProblemSpec

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return len(self.axes)


def check_ellipticity(spec: ProblemSpec, samples: int = 65) -> float:
    """Smallest eigenvalue of [a_ij(x)] minimized over a closed-box lattice."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    n_sample = max(2, samples)
    a11 = spec.sample_coefficient(spec.a11, n_sample)
    if spec.dim == 1:
        sigma = float(a11.min())
    else:
        a22 = spec.sample_coefficient(spec.a22, n_sample)
        a12 = spec.sample_coefficient(spec.a12, n_sample)
        tr = a11 + a22
        disc = np.sqrt((a11 - a22) ** 2 + 4.0 * a12 ** 2)
        sigma = float(((tr - disc) / 2.0).min())
    if sigma <= 0.0:
        raise EllipticityError(f"ellipticity estimate {sigma:.3g} <= 0")
    return sigma


def poincare_constant(spec: ProblemSpec) -> float:
    """Optimal box constant: first Dirichlet eigenvalue sum_i (pi/L_i)^2."""
    return float(sum((math.pi / L) ** 2 for L in spec.lengths))


def _divergence_b(spec: ProblemSpec, n_sample: int) -> np.ndarray:
    if spec.div_b is not None:
        return spec.sample_coefficient(spec.div_b, n_sample)
    total = None
    for axis, comp in enumerate(spec.b):
        if isinstance(comp, np.ndarray):
            raise SpecError("array-valued b needs div_b supplied explicitly")
        if isinstance(comp, (int, float)):
            d = np.zeros([n_sample] * spec.dim)
        else:
            fn = _compile_expression(comp, spec.dim)
            axes = spec.axes(n_sample)
            step = 1e-6 * spec.lengths[axis]
            grids = np.meshgrid(*axes, indexing="ij")
            up = [g.copy() for g in grids]
            dn = [g.copy() for g in grids]
            up[axis] = up[axis] + step
            dn[axis] = dn[axis] - step
            d = (fn(*up) - fn(*dn)) / (2.0 * step)
        total = d if total is None else total + d
    return total


def check_condition_18(spec: ProblemSpec, samples: int = 65) -> float:
    """inf_x (0.5 div b - c) + C(box) * sigma; > 0 means the positivity
    hypothesis holds. Emits ConditionViolatedWarning (and still returns the
    value) when it fails: forward solving stays legal, the uniqueness
    experiment refuses to run.
    """
    n_sample = max(2, samples)
    div_b = _divergence_b(spec, n_sample)
    c = spec.sample_coefficient(spec.c, n_sample)
    base = float((0.5 * div_b - c).min())
    value = base + poincare_constant(spec) * check_ellipticity(spec, samples)
    if value <= 0.0:
        warnings.warn(
            f"positivity condition value {value:.4g} <= 0; spectra may touch "
            "the imaginary axis", ConditionViolatedWarning, stacklevel=2)
    return value


def discretize(spec: ProblemSpec) -> DiscreteOperator:
    """Second-order conservative stencil for A on the interior lattice.

    Diffusion fluxes use midpoint coefficients a(x +- h/2); advection is
    central-differenced (divergence-structure energy identity survives; a
    PecletWarning is emitted when |b| h / (2 sigma) >= 1); c enters the
    diagonal with its sign flipped by the A convention.
    """
    sigma = check_ellipticity(spec)
    cpo = poincare_constant(spec)
    hs = tuple(L / (k + 1) for L, k in zip(spec.lengths, spec.n))
    axes = tuple(np.linspace(h, L - h, k)
                 for h, L, k in zip(hs, spec.lengths, spec.n))

    if spec.dim == 1:
        A = _assemble_1d(spec, axes, hs)
    else:
        A = _assemble_2d(spec, axes, hs)

    bmax = 0.0
    for comp in spec.b:
        vals = spec.sample_coefficient(comp, 17)
        bmax = max(bmax, float(np.abs(vals).max()))
    peclet = bmax * max(hs) / (2.0 * sigma)
    if peclet >= 1.0:
        warnings.warn(
            f"cell Peclet number {peclet:.3g} >= 1; refine the grid or "
            "reduce advection", PecletWarning, stacklevel=2)

    return DiscreteOperator(matrix=A, axes=axes, h=hs, lengths=spec.lengths,
                            sigma_est=sigma, poincare_const=cpo, spec=spec)


def _assemble_1d(spec, axes, hs):
    (x,) = axes
    (h,) = hs
    n = x.size
    grids_mid_plus = (x + h / 2.0,)
    grids_mid_minus = (x - h / 2.0,)
    a_p = evaluate_coefficient(spec.a11, grids_mid_plus, spec)
    a_m = evaluate_coefficient(spec.a11, grids_mid_minus, spec)
    b1 = evaluate_coefficient(spec.b[0], (x,), spec)
    c = evaluate_coefficient(spec.c, (x,), spec)

    A = np.zeros((n, n))
    idx = np.arange(n)
    A[idx, idx] = (a_p + a_m) / h ** 2 - c
    A[idx[:-1], idx[:-1] + 1] += -a_p[:-1] / h ** 2 - b1[:-1] / (2 * h)
    A[idx[1:], idx[1:] - 1] += -a_m[1:] / h ** 2 + b1[1:] / (2 * h)
    return A


def _assemble_2d(spec, axes, hs):
    x, y = axes
    h1, h2 = hs
    n1, n2 = x.size, y.size
    N = n1 * n2
    X, Y = np.meshgrid(x, y, indexing="ij")

    def coef(co, gx, gy):
        return evaluate_coefficient(co, (gx, gy), spec)

    a11_p = coef(spec.a11, X + h1 / 2, Y)
    a11_m = coef(spec.a11, X - h1 / 2, Y)
    a22_p = coef(spec.a22, X, Y + h2 / 2)
    a22_m = coef(spec.a22, X, Y - h2 / 2)
    a12_xp = coef(spec.a12, X + h1 / 2, Y)     # for d/dx(a12 d/dy u)
    a12_xm = coef(spec.a12, X - h1 / 2, Y)
    a12_yp = coef(spec.a12, X, Y + h2 / 2)     # for d/dy(a12 d/dx u)
    a12_ym = coef(spec.a12, X, Y - h2 / 2)
    b1 = coef(spec.b[0], X, Y)
    b2 = coef(spec.b[1], X, Y)
    c = coef(spec.c, X, Y)

    A = np.zeros((N, N))
    I, J = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
    P = (I * n2 + J)

    def add(mask, pcol, w):
        rows = P[mask].ravel()
        cols = pcol[mask].ravel()
        A[rows, cols] += w[mask].ravel()

    # diagonal
    A[P.ravel(), P.ravel()] += ((a11_p + a11_m) / h1 ** 2
                                + (a22_p + a22_m) / h2 ** 2 - c).ravel()
    # x-neighbors
    has_xp = I < n1 - 1
    has_xm = I > 0
    add(has_xp, P + n2, -a11_p / h1 ** 2 - b1 / (2 * h1))
    add(has_xm, P - n2, -a11_m / h1 ** 2 + b1 / (2 * h1))
    # y-neighbors
    has_yp = J < n2 - 1
    has_ym = J > 0
    add(has_yp, P + 1, -a22_p / h2 ** 2 - b2 / (2 * h2))
    add(has_ym, P - 1, -a22_m / h2 ** 2 + b2 / (2 * h2))
    # mixed term -d/dx(a12 d/dy u): flux F_{i+1/2} = a12 * (du/dy)_{i+1/2}
    # with (du/dy)_{i+1/2,j} = (u_{i,j+1}-u_{i,j-1}+u_{i+1,j+1}-u_{i+1,j-1})/(4 h2)
    w_xp = a12_xp / (4 * h1 * h2)
    w_xm = a12_xm / (4 * h1 * h2)
    add(has_yp, P + 1, -w_xp - (-w_xm))                    # u_{i,j+1}
    add(has_ym, P - 1, w_xp - w_xm)                        # u_{i,j-1}
    add(has_xp & has_yp, P + n2 + 1, -w_xp)                # u_{i+1,j+1}
    add(has_xp & has_ym, P + n2 - 1, w_xp)                 # u_{i+1,j-1}
    add(has_xm & has_yp, P - n2 + 1, w_xm)                 # u_{i-1,j+1}
    add(has_xm & has_ym, P - n2 - 1, -w_xm)                # u_{i-1,j-1}
    # mixed term -d/dy(a12 d/dx u)
    w_yp = a12_yp / (4 * h1 * h2)
    w_ym = a12_ym / (4 * h1 * h2)
    add(has_xp, P + n2, -w_yp + w_ym)                      # u_{i+1,j}
    add(has_xm, P - n2, w_yp - w_ym)                       # u_{i-1,j}
    add(has_yp & has_xp, P + 1 + n2, -w_yp)                # u_{i+1,j+1}
    add(has_yp & has_xm, P + 1 - n2, w_yp)                 # u_{i-1,j+1}
    add(has_ym & has_xp, P - 1 + n2, w_ym)                 # u_{i+1,j-1}
    add(has_ym & has_xm, P - 1 - n2, -w_ym)                # u_{i-1,j-1}
    return A


def grid_interpolation_weights(axes, h, lengths, x0):
    """Interior-node indices and weights reproducing f(x0) by multilinear
    interpolation; boundary values are zero so clipped cells just drop them.
    """
    from .errors import OutOfDomain

    dim = len(axes)
    x0 = tuple(float(v) for v in np.atleast_1d(x0))
    if len(x0) != dim:
        raise OutOfDomain(f"x0 must have {dim} coordinates")
    for v, L in zip(x0, lengths):
        if not (0.0 <= v <= L):
            raise OutOfDomain(f"x0={x0} outside the box")
    per_axis = []
    for v, ax, hx in zip(x0, axes, h):
        # cell index on the full lattice 0..n+1 with nodes at k*h
        t = v / hx
        k = int(min(max(np.floor(t), 0), len(ax)))
        frac = t - k
        pairs = []
        if 1 <= k <= len(ax):
            pairs.append((k - 1, 1.0 - frac))
        if 1 <= k + 1 <= len(ax):
            pairs.append((k, frac))
        per_axis.append(pairs)
    if dim == 1:
        idx = np.array([i for i, _ in per_axis[0]], dtype=int)
        w = np.array([w for _, w in per_axis[0]])
    else:
        n2 = axes[1].size
        idx, w = [], []
        for i, wi in per_axis[0]:
            for j, wj in per_axis[1]:
                idx.append(i * n2 + j)
                w.append(wi * wj)
        idx = np.array(idx, dtype=int)
        w = np.array(w)
    return idx, w


def interpolation_weights(op: DiscreteOperator, x0) -> tuple[np.ndarray, np.ndarray]:
    """Multilinear observation weights on the operator's interior lattice."""
    return grid_interpolation_weights(op.axes, op.h, op.lengths, x0)


def m_matrix_check(op: DiscreteOperator, tol: float = 1e-12) -> bool:
    """Z-sign pattern plus entrywise-nonnegative inverse."""
    A = op.matrix
    off = A - np.diag(np.diag(A))
    if (np.diag(A) <= 0).any() or (off > tol * np.abs(A).max()).any():
        return False
    try:
        inv = np.linalg.solve(A, np.eye(A.shape[0]))
    except np.linalg.LinAlgError:
        return False
    return bool((inv >= -1e-9 * np.abs(inv).max()).all())
