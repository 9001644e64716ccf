"""Eigenprojection algebra on known spectra, Jordan structure, the resolvent
contour route, and the Neumann-series inverse."""

import math
import warnings

import numpy as np
import pytest

from fracorder.errors import (ClusterAmbiguityWarning, ContourError,
                              SingularCluster)
from fracorder.operator import ProblemSpec, discretize
from fracorder.spectral import (completeness_residual, eigendecompose,
                                inverse_via_neumann,
                                resolvent_contour_projector)

JORDAN = np.array([[2.0, 1.0], [0.0, 2.0]])


def laplacian_op(n=5):
    s = ProblemSpec(dim=1, lengths=(1.0,), n=(n,), initial="sin(pi*x)",
                    x0=(0.5,), alpha=0.5)
    return discretize(s)


def random_shifted(rng, n=12, shift=6.0):
    return rng.standard_normal((n, n)) + shift * np.eye(n)


class TestEigendecompose:
    def test_laplacian_simple_spectrum(self):
        op = laplacian_op(5)
        dec = eigendecompose(op)
        h = 1.0 / 6
        analytic = sorted(4 / h ** 2 * math.sin(k * math.pi * h / 2) ** 2
                          for k in range(1, 6))
        got = [c.eigenvalue.real for c in dec.clusters]
        np.testing.assert_allclose(got, analytic, rtol=1e-12)
        assert all(c.index == 1 for c in dec.clusters)
        norm_a = np.linalg.norm(op.matrix, 2)
        assert all(np.linalg.norm(c.D, 2) <= 1e-8 * norm_a
                   for c in dec.clusters)

    def test_jordan_block(self):
        dec = eigendecompose(JORDAN)
        assert len(dec.clusters) == 1
        c = dec.clusters[0]
        assert c.dim == 2 and c.index == 2
        assert c.eigenvalue == pytest.approx(2.0)
        assert np.linalg.norm(c.D) > 0.5
        assert np.linalg.norm(c.D @ c.D) <= 1e-12
        np.testing.assert_allclose(c.P, np.eye(2), atol=1e-13)

    def test_advection_similarity_spectrum(self):
        # constant-coefficient stencil has the closed-form real spectrum
        # 2/h^2 - 2 sqrt(1/h^4 - b^2/(4 h^2)) cos(k pi h)
        s = ProblemSpec(dim=1, lengths=(1.0,), n=(31,), b=("10",),
                        initial="sin(pi*x)", x0=(0.5,), alpha=0.5)
        dec = eigendecompose(discretize(s))
        h = 1.0 / 32
        k = np.arange(1, 32)
        analytic = np.sort(2 / h ** 2 - 2 * np.sqrt(1 / h ** 4
                           - 100 / (4 * h ** 2)) * np.cos(k * np.pi * h))
        got = np.sort([c.eigenvalue.real for c in dec.clusters])
        assert max(abs(c.eigenvalue.imag) for c in dec.clusters) <= 1e-8
        np.testing.assert_allclose(got, analytic, rtol=1e-9)

    def test_cluster_merging_near_degenerate(self):
        A = np.diag([1.0, 1.0 + 1e-9, 5.0])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ClusterAmbiguityWarning)
            dec = eigendecompose(A, cluster_tol=1e-6)
        assert len(dec.clusters) == 2
        assert dec.clusters[0].dim == 2

    def test_ambiguity_warning(self):
        # gap right at the tolerance: merging flips under +-10% perturbation
        A = np.diag([1.0, 1.0 + 1e-6, 5.0])
        with pytest.warns(ClusterAmbiguityWarning):
            dec = eigendecompose(A, cluster_tol=1e-6)
        assert dec.ambiguous

    def test_rejects_bad_tol(self):
        with pytest.raises(ValueError):
            eigendecompose(JORDAN, cluster_tol=0.0)


class TestProjectorAlgebra:
    @pytest.mark.parametrize("seed", range(4))
    def test_random_nonsymmetric(self, seed):
        rng = np.random.default_rng(seed)
        A = random_shifted(rng)
        dec = eigendecompose(A)
        Ps = [c.P for c in dec.clusters]
        norm_a = np.linalg.norm(A, 2)
        for P in Ps:
            assert np.linalg.norm(P @ P - P, 2) <= 1e-9 * np.linalg.norm(P, 2)
        for i in range(len(Ps)):
            for j in range(len(Ps)):
                if i != j:
                    assert np.linalg.norm(Ps[i] @ Ps[j], 2) <= 1e-9
        assert np.linalg.norm(dec.projector_sum() - np.eye(A.shape[0]),
                              2) <= 1e-9
        for c in dec.clusters:
            # commutation: A P = P A P on the invariant subspace
            assert np.linalg.norm(A @ c.P - c.P @ (A @ c.P), 2) \
                <= 1e-8 * norm_a
            # nilpotency at the declared index
            M = (c.eigenvalue * np.eye(A.shape[0]) - A) @ c.P
            Mk = np.linalg.matrix_power(M, c.index)
            assert np.linalg.norm(Mk, 2) <= 1e-7 * norm_a ** c.index


class TestContour:
    def test_matches_eigenvector_projector(self):
        op = laplacian_op(5)
        dec = eigendecompose(op)
        lam1 = dec.clusters[0].eigenvalue.real
        P = resolvent_contour_projector(op, lam1, 12.0, 64)
        x = op.axes[0]
        v = np.sin(np.pi * x)
        v /= np.linalg.norm(v)
        assert np.linalg.norm(P - np.outer(v, v)) <= 1e-10

    def test_quadrature_error_decays_geometrically(self):
        op = laplacian_op(5)
        dec = eigendecompose(op)
        lam1 = dec.clusters[0].eigenvalue.real
        ref = dec.clusters[0].P
        errs = [np.linalg.norm(
            resolvent_contour_projector(op, lam1, 12.0, q) - ref)
            for q in (8, 16, 32)]
        assert errs[0] > errs[1] > errs[2]
        assert errs[1] <= errs[0] * 0.05
        assert errs[2] <= 1e-10

    def test_empty_circle_gives_zero(self):
        op = laplacian_op(5)
        P = resolvent_contour_projector(op, -50.0, 10.0, 32)
        assert np.linalg.norm(P) <= 1e-10

    def test_jordan_whole_space(self):
        P = resolvent_contour_projector(JORDAN, 2.0, 1.0, 32)
        np.testing.assert_allclose(P, np.eye(2), atol=1e-10)

    def test_foreign_eigenvalue_rejected(self):
        op = laplacian_op(5)
        dec = eigendecompose(op)
        lam1 = dec.clusters[0].eigenvalue.real
        lam2 = dec.clusters[1].eigenvalue.real
        with pytest.raises(ContourError):
            resolvent_contour_projector(op, lam1, lam2 - lam1 + 5.0, 32)

    def test_rim_eigenvalue_rejected(self):
        op = laplacian_op(5)
        dec = eigendecompose(op)
        lam1 = dec.clusters[0].eigenvalue.real
        lam2 = dec.clusters[1].eigenvalue.real
        with pytest.raises(ContourError):
            resolvent_contour_projector(op, lam1, lam2 - lam1, 32)

    def test_quad_points_floor(self):
        with pytest.raises(ValueError):
            resolvent_contour_projector(JORDAN, 2.0, 1.0, 4)


class TestNeumannInverse:
    def test_simple_mode_scaling(self):
        op = laplacian_op(5)
        dec = eigendecompose(op)
        c = dec.clusters[2]
        v = c.apply(np.ones(5))
        out = inverse_via_neumann(dec, v, 2)
        np.testing.assert_allclose(out, v / c.eigenvalue, rtol=1e-12)

    def test_jordan_example(self):
        dec = eigendecompose(JORDAN)
        out = inverse_via_neumann(dec, np.array([1.0, 1.0]), 0)
        np.testing.assert_allclose(out.real, [0.25, 0.5], rtol=1e-13)
        np.testing.assert_allclose(JORDAN @ out.real, [1.0, 1.0], rtol=1e-13)

    @pytest.mark.parametrize("seed", range(3))
    def test_random_residuals(self, seed):
        rng = np.random.default_rng(100 + seed)
        A = random_shifted(rng)
        dec = eigendecompose(A)
        for i, c in enumerate(dec.clusters):
            v = c.apply(rng.standard_normal(A.shape[0]))
            out = inverse_via_neumann(dec, v, i)
            assert np.linalg.norm(A @ out - v) <= 1e-8 * np.linalg.norm(v)

    def test_singular_cluster_refused(self):
        A = np.diag([1e-18, 1.0])
        dec = eigendecompose(A)
        with pytest.raises(SingularCluster):
            inverse_via_neumann(dec, np.array([1.0, 0.0]), 0)

    def test_projection_deviation_warns(self):
        op = laplacian_op(5)
        dec = eigendecompose(op)
        with pytest.warns(UserWarning, match="outside range"):
            inverse_via_neumann(dec, np.ones(5), 0)


class TestCompleteness:
    def test_full_sum_recovers(self):
        op = laplacian_op(7)
        dec = eigendecompose(op)
        a = np.cos(3 * op.axes[0])
        assert completeness_residual(dec, a, len(dec.clusters)) <= 1e-10

    def test_first_mode_exact(self):
        op = laplacian_op(7)
        dec = eigendecompose(op)
        a = np.sin(np.pi * op.axes[0])
        assert completeness_residual(dec, a, 1) <= 1e-10

    def test_polynomial_residuals_decrease(self):
        op = laplacian_op(9)
        dec = eigendecompose(op)
        x = op.axes[0]
        a = x * (1 - x)
        r = [completeness_residual(dec, a, k) for k in (1, 3, 5)]
        assert r[0] > r[1] > r[2]
        # discrete sine modes sin(k pi x_i) are the exact eigenvectors of
        # the stencil; project onto them as the independent tail oracle
        modes = np.stack([np.sin(k * np.pi * x) for k in range(1, 10)])
        coef = modes @ a / np.sum(modes ** 2, axis=1)
        for keep, got in zip((1, 3, 5), r):
            tail = (coef[keep:, None] * modes[keep:]).sum(axis=0)
            assert got == pytest.approx(
                np.linalg.norm(tail) / np.linalg.norm(a), rel=1e-8)

    def test_range_validated(self):
        dec = eigendecompose(JORDAN)
        with pytest.raises(ValueError):
            completeness_residual(dec, np.ones(2), 2)


def test_save_roundtrip(tmp_path):
    dec = eigendecompose(JORDAN)
    path = tmp_path / "dec.npz"
    dec.save(path)
    data = np.load(path)
    np.testing.assert_allclose(data["P_0"], np.eye(2), atol=1e-13)
    assert data["eigenvalues"].shape == (1,)
