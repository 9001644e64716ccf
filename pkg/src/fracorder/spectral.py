"""Spectral objects of the discrete operator: eigenvalue clusters, Riesz
eigenprojections, nilpotent parts, and the per-cluster Neumann inverse.

Projectors come from the complex Schur form: the cluster is reordered to the
leading block, the triangular Sylvester equation T11 X - X T22 = -T12
decouples it, and P = Z [[I, -X],[0,0]] Z^H follows. Internally P and
D = (lambda - A) P are held in rank-m factored form (P = U W, D = UD W);
the dense matrices the tests exercise are materialized on demand.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .errors import (ClusterAmbiguityWarning, ContourError, EigensolverFailure,
                     SingularCluster)
from .operator import DiscreteOperator

DEFAULT_CLUSTER_TOL = 1e-6
NIL_TOL = 1e-8


@dataclass(frozen=True)
class Cluster:
    """One eigenvalue cluster: centroid, members, factored P and D, index."""

    eigenvalue: complex
    members: np.ndarray
    U: np.ndarray   # N x m, P = U @ W
    W: np.ndarray   # m x N
    UD: np.ndarray  # N x m, D = UD @ W
    index: int      # nilpotency index i_n

    @property
    def dim(self) -> int:
        return self.U.shape[1]

    @property
    def P(self) -> np.ndarray:
        return self.U @ self.W

    @property
    def D(self) -> np.ndarray:
        return self.UD @ self.W

    def apply(self, v: np.ndarray) -> np.ndarray:
        """P v without materializing P."""
        return self.U @ (self.W @ v)

    def d_power_apply(self, k: int, v: np.ndarray) -> np.ndarray:
        """D^k v through the m x m core."""
        if k == 0:
            return np.asarray(v, dtype=complex)
        core = self.W @ self.UD
        y = self.W @ v
        y = np.linalg.matrix_power(core, k - 1) @ y
        return self.UD @ y


@dataclass(frozen=True)
class SpectralDecomposition:
    """Clusters ordered by ascending real part, with the operator they split."""

    clusters: tuple
    matrix: np.ndarray
    cluster_tol: float
    ambiguous: bool = False
    operator: DiscreteOperator | None = None

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.array([c.eigenvalue for c in self.clusters])

    def projector_sum(self) -> np.ndarray:
        s = np.zeros((self.size, self.size), dtype=complex)
        for c in self.clusters:
            s += c.P
        return s

    def save(self, path) -> None:
        """Dump eigenvalues and dense projectors to an .npz archive."""
        payload = {"matrix": self.matrix,
                   "eigenvalues": self.eigenvalues(),
                   "cluster_tol": np.array(self.cluster_tol)}
        for i, c in enumerate(self.clusters):
            payload[f"P_{i}"] = c.P
            payload[f"members_{i}"] = c.members
            payload[f"index_{i}"] = np.array(c.index)
        np.savez_compressed(path, **payload)


def _as_matrix(op) -> np.ndarray:
    if isinstance(op, DiscreteOperator):
        return op.matrix
    return np.asarray(op, dtype=float) if np.isrealobj(op) else np.asarray(op)


def _cluster_eigenvalues(eigs: np.ndarray, tol: float, scale: float):
    """Union-find grouping of eigenvalues within relative distance tol."""
    n = eigs.size
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    order = np.argsort(eigs.real, kind="stable")
    for a in range(n):
        i = order[a]
        for b in range(a + 1, n):
            j = order[b]
            ref = max(abs(eigs[i]), abs(eigs[j]), 1e-3 * scale)
            if eigs[j].real - eigs[i].real > tol * ref:
                break
            if abs(eigs[i] - eigs[j]) <= tol * ref:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted((sorted(g) for g in groups.values()),
                  key=lambda g: (eigs[g].real.mean(), eigs[g].imag.mean()))


def _partition_signature(groups):
    return tuple(tuple(g) for g in groups)


def eigendecompose(op, cluster_tol: float = DEFAULT_CLUSTER_TOL
                   ) -> SpectralDecomposition:
    """Complex Schur decomposition with per-cluster Riesz projectors.

    Eigenvalues within ``cluster_tol`` (relative) merge into one cluster;
    the nilpotency index is the smallest k with ||D^k|| <= NIL_TOL * ||A||^k.
    A ClusterAmbiguityWarning (plus the ``ambiguous`` flag) reports merges
    that change under a +-10% perturbation of the tolerance; the default
    merge is still returned.
    """
    if cluster_tol <= 0:
        raise ValueError("cluster_tol must be positive")
    A = _as_matrix(op)
    n = A.shape[0]
    try:
        T, Z = sla.schur(A, output="complex")
    except Exception as exc:
        raise EigensolverFailure(f"Schur decomposition failed: {exc}") from exc
    eigs = np.diag(T).copy()
    norm_a = np.linalg.norm(A, 2)

    groups = _cluster_eigenvalues(eigs, cluster_tol, norm_a)
    lo = _partition_signature(_cluster_eigenvalues(eigs, 0.9 * cluster_tol, norm_a))
    hi = _partition_signature(_cluster_eigenvalues(eigs, 1.1 * cluster_tol, norm_a))
    ambiguous = not (lo == hi == _partition_signature(groups))
    if ambiguous:
        warnings.warn(
            "eigenvalue clustering changes under a 10% tolerance "
            "perturbation; returning the default merge",
            ClusterAmbiguityWarning, stacklevel=2)

    clusters = []
    for members in groups:
        m = len(members)
        sel = np.zeros(n, dtype=np.int32)
        sel[members] = 1
        if m == n:
            TT, QQ = T, Z
        else:
            TT, QQ, _, mm, _, _, info = lapack.ztrsen(
                sel, np.asfortranarray(T), np.asfortranarray(Z), job="N")
            if info != 0:
                raise EigensolverFailure(f"ztrsen failed with info={info}")
            if mm != m:
                raise EigensolverFailure("reordering lost cluster members")
        Z1 = QQ[:, :m]
        if m == n:
            W = Z1.conj().T
        else:
            T11 = TT[:m, :m]
            T22 = TT[m:, m:]
            T12 = TT[:m, m:]
            X, scale, info = lapack.ztrsyl(T11, T22, -T12, isgn=-1)
            if info < 0:
                raise EigensolverFailure(f"ztrsyl failed with info={info}")
            X = X / scale
            # P = Z [[I, -X],[0,0]] Z^H = Z1 (Z1^H - X Z2^H)
            W = Z1.conj().T - X @ QQ[:, m:].conj().T
        lam = complex(eigs[members].mean())
        U = Z1
        UD = lam * U - A @ U
        # nilpotency index from the m x m core of D
        core = W @ UD
        index = m
        norm_ref = max(norm_a, 1e-300)
        if np.linalg.norm(UD @ W, 2) <= NIL_TOL * norm_ref:
            index = 1
        else:
            Dk_core = np.eye(m, dtype=complex)
            for k in range(1, m + 1):
                # ||D^k|| = ||UD (core)^(k-1) W||
                Dk = UD @ Dk_core @ W
                if np.linalg.norm(Dk, 2) <= NIL_TOL * norm_ref ** k:
                    index = k
                    break
                Dk_core = Dk_core @ core
        clusters.append(Cluster(eigenvalue=lam, members=eigs[members].copy(),
                                U=U, W=W, UD=UD, index=index))
    clusters.sort(key=lambda c: (c.eigenvalue.real, c.eigenvalue.imag))
    return SpectralDecomposition(clusters=tuple(clusters), matrix=A,
                                 cluster_tol=cluster_tol, ambiguous=ambiguous,
                                 operator=op if isinstance(op, DiscreteOperator)
                                 else None)


def resolvent_contour_projector(op, center: complex, radius: float,
                                quad_points: int = 64) -> np.ndarray:
    """Trapezoidal quadrature of the Riesz integral over a circle.

    The circle must keep every eigenvalue away from its rim and enclose
    either nothing (zero matrix back, by analyticity) or exactly one
    cluster; anything else raises ContourError.
    """
    if quad_points < 8:
        raise ValueError("quad_points must be >= 8")
    A = _as_matrix(op)
    center = complex(center)
    eigs = np.linalg.eigvals(A)
    dist = np.abs(np.abs(eigs - center) - radius)
    if (dist < 1e-6 * radius).any():
        raise ContourError("an eigenvalue lies on (or hugs) the contour")
    inside = np.abs(eigs - center) < radius
    if inside.any():
        grp = _cluster_eigenvalues(eigs, DEFAULT_CLUSTER_TOL,
                                   np.linalg.norm(A, 2))
        enclosed_groups = [g for g in grp if inside[g].any()]
        if len(enclosed_groups) != 1 or not all(
                inside[i] for g in enclosed_groups for i in g):
            raise ContourError(
                "contour must enclose exactly one full cluster")
    n = A.shape[0]
    P = np.zeros((n, n), dtype=complex)
    Idn = np.eye(n)
    for q in range(quad_points):
        zq = center + radius * np.exp(2j * np.pi * q / quad_points)
        P += np.exp(2j * np.pi * q / quad_points) * np.linalg.solve(
            zq * Idn - A, Idn)
    return P * (radius / quad_points)


def inverse_via_neumann(dec: SpectralDecomposition, phi: np.ndarray,
                        cluster_id: int) -> np.ndarray:
    """A^{-1} restricted to one cluster: sum_{k<i_n} D^k/lambda^{k+1} (P phi).

    phi is projected into the cluster range first; a relative deviation
    above 1e-8 is reported as a warning.
    """
    c = dec.clusters[cluster_id]
    scale = np.linalg.norm(dec.matrix, 2)
    if abs(c.eigenvalue) <= 1e3 * np.finfo(float).eps * max(scale, 1.0):
        raise SingularCluster(
            f"cluster eigenvalue {c.eigenvalue} too close to zero")
    phi = np.asarray(phi, dtype=complex)
    v = c.apply(phi)
    dev = np.linalg.norm(v - phi)
    if dev > 1e-8 * max(np.linalg.norm(phi), 1e-300):
        warnings.warn(
            f"phi was outside range(P): relative deviation {dev:.2e}; "
            "projected first", stacklevel=2)
    out = np.zeros_like(v)
    lam = c.eigenvalue
    term = v.copy()
    for k in range(c.index):
        out += term / lam ** (k + 1)
        if k + 1 < c.index:
            term = c.UD @ (c.W @ term)
    return out


def completeness_residual(dec: SpectralDecomposition, a_vec: np.ndarray,
                          n_keep: int) -> float:
    """Relative l2 distance of a_vec from its first n_keep cluster projections
    (clusters ordered by ascending real part)."""
    if not (1 <= n_keep <= len(dec.clusters)):
        raise ValueError("n_keep out of range")
    a = np.asarray(a_vec, dtype=complex)
    acc = np.zeros_like(a)
    for c in dec.clusters[:n_keep]:
        acc += c.apply(a)
    return float(np.linalg.norm(a - acc) / np.linalg.norm(a))
