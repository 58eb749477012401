"""Operator construction, sine-basis factorization, and phi-function kernels."""
import numpy as np
import pytest
import scipy.linalg

from letd.matfunc import (
    DirichletLaplacian1D,
    apply_phi,
    apply_phi_2d,
    build_laplacian_1d,
    build_laplacian_2d,
    expm_dense,
    phi_scalar,
    spectral_factorization,
    spectral_factorization_2d,
)

# Reference values computed with mpmath at 50 decimal digits, rounded to
# double precision.  phi0(-1e6) underflows to zero in doubles, which is the
# correctly rounded result.
PHI_POINTS = np.array([-1e6, -1e4, -100.0, -1.0, -0.02, -1e-3, -1e-8, 0.0, 1e-3, 0.5, 1.0])
PHI_TABLE = {
    0: (0, 0, 3.7200759760208361e-44, 0.36787944117144233, 0.98019867330675525,
        0.99900049983337502, 0.99999999000000006, 1, 1.0010005001667084,
        1.6487212707001282, 2.7182818284590451),
    1: (9.9999999999999995e-07, 0.0001, 0.01, 0.63212055882855767,
        0.99006633466223493, 0.99950016662500829, 0.99999999500000003, 1,
        1.0005001667083417, 1.2974425414002564, 1.7182818284590453),
    2: (9.9999899999999993e-07, 9.9989999999999996e-05, 0.0099000000000000008,
        0.36787944117144233, 0.49668326688825554, 0.49983337499166808,
        0.49999999833333336, 0.5, 0.5001667083416681, 0.59488508280051255,
        0.7182818284590452),
}


@pytest.mark.parametrize("k", [0, 1, 2])
def test_phi_scalar_matches_high_precision_table(k):
    got = phi_scalar(k, PHI_POINTS)
    want = np.array(PHI_TABLE[k])
    assert np.allclose(got, want, rtol=2e-14, atol=0.0), (
        f"phi_{k} mismatch: {got} vs {want}")


def test_phi_scalar_series_branch_agrees_with_direct_formula():
    # just inside the series window the Taylor evaluation must match the
    # expm1-based formula evaluated at the same point
    for z in (9.9e-3, -9.9e-3, 5e-3, -5e-3):
        assert abs(phi_scalar(1, z) - np.expm1(z) / z) < 3e-16 * abs(np.expm1(z) / z)
        direct2 = (np.expm1(z) - z) / z**2
        assert abs(phi_scalar(2, z) - direct2) < 5e-14 * abs(direct2)


def test_phi_scalar_scalar_input_returns_float():
    out = phi_scalar(1, -0.5)
    assert isinstance(out, float)


def test_phi_scalar_rejects_bad_order():
    with pytest.raises(ValueError):
        phi_scalar(3, 0.1)
    with pytest.raises(ValueError):
        phi_scalar(-1, 0.1)


def test_laplacian_validation():
    with pytest.raises(ValueError):
        build_laplacian_1d(0, 1.0, 0.1)
    with pytest.raises(ValueError):
        build_laplacian_1d(8, -1.0, 0.1)
    with pytest.raises(ValueError):
        build_laplacian_1d(8, 1.0, 0.0)


def test_dense_matches_stencil():
    op = build_laplacian_1d(5, 2.0, 0.25)
    A = op.dense()
    w = 2.0 / 0.25**2
    assert A.shape == (5, 5)
    assert np.allclose(np.diag(A), -2 * w)
    assert np.allclose(np.diag(A, 1), w)
    assert np.allclose(np.diag(A, -1), w)
    assert A[0, 2] == 0.0


def test_eigenvalues_match_dense_spectrum():
    op = build_laplacian_1d(13, 0.7, 0.11)
    lam = np.sort(op.eigenvalues())
    dense = np.sort(scipy.linalg.eigvalsh(op.dense()))
    assert np.allclose(lam, dense, rtol=1e-12, atol=1e-9)


def test_sine_transform_diagonalizes_operator():
    op = build_laplacian_1d(17, 1.3, 0.05)
    fact = spectral_factorization(op)
    rng = np.random.default_rng(3)
    v = rng.standard_normal(17)
    # A v computed through the factorization equals the dense product
    got = fact.from_modes(fact.spectrum * fact.to_modes(v))
    assert np.allclose(got, op.dense() @ v, rtol=1e-12, atol=1e-12)


def test_transform_roundtrip_and_batching():
    fact = spectral_factorization(build_laplacian_1d(9, 1.0, 0.1))
    rng = np.random.default_rng(5)
    v = rng.standard_normal((4, 6, 9))
    assert np.allclose(fact.from_modes(fact.to_modes(v)), v, atol=1e-13)
    single = np.stack([fact.to_modes(v[i, j]) for i in range(4) for j in range(6)])
    assert np.allclose(fact.to_modes(v).reshape(24, 9), single, atol=1e-13)


def test_transform_rejects_wrong_length():
    fact = spectral_factorization(build_laplacian_1d(9, 1.0, 0.1))
    with pytest.raises(ValueError):
        fact.to_modes(np.zeros(8))


def _phi_dense_times(k, M, b):
    """phi_k(M) @ b via an augmented matrix exponential (independent route)."""
    n = M.shape[0]
    aug = np.zeros((n + k, n + k))
    aug[:n, :n] = M
    if k >= 1:
        aug[:n, n] = b
        for j in range(k - 1):
            aug[n + j, n + j + 1] = 1.0
        return scipy.linalg.expm(aug)[:n, n + k - 1]
    return scipy.linalg.expm(M) @ b


@pytest.mark.parametrize("k", [0, 1, 2])
@pytest.mark.parametrize("n,dt", [(6, 1e-3), (12, 0.02), (24, 0.7)])
def test_apply_phi_matches_dense_augmented_exponential(k, n, dt):
    op = build_laplacian_1d(n, 0.9, 1.0 / (n + 1))
    fact = spectral_factorization(op)
    rng = np.random.default_rng(n + k)
    v = rng.standard_normal(n)
    got = apply_phi(fact, k, dt, v)
    want = _phi_dense_times(k, dt * op.dense(), v)
    scale = max(1.0, np.abs(want).max())
    assert np.abs(got - want).max() < 5e-13 * scale


def test_apply_phi_rejects_negative_dt():
    fact = spectral_factorization(build_laplacian_1d(4, 1.0, 0.2))
    with pytest.raises(ValueError):
        apply_phi(fact, 1, -0.1, np.zeros(4))


def test_2d_operator_is_kronecker_sum():
    op = build_laplacian_2d(3, 4, 1.1, 0.25, 0.2)
    Ax = build_laplacian_1d(3, 1.1, 0.25).dense()
    Ay = build_laplacian_1d(4, 1.1, 0.2).dense()
    want = np.kron(Ax, np.eye(4)) + np.kron(np.eye(3), Ay)
    assert np.allclose(op.dense(), want, atol=1e-12)


def test_2d_operator_rejects_mismatched_nu():
    from letd.matfunc import DirichletLaplacian2D
    x = DirichletLaplacian1D(n=3, nu=1.0, h=0.25)
    y = DirichletLaplacian1D(n=3, nu=2.0, h=0.25)
    with pytest.raises(ValueError):
        DirichletLaplacian2D(x=x, y=y)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_apply_phi_2d_matches_dense(k):
    op = build_laplacian_2d(4, 3, 0.8, 0.2, 0.25)
    fact = spectral_factorization_2d(op)
    rng = np.random.default_rng(11 + k)
    field = rng.standard_normal((4, 3))
    dt = 0.15
    got = apply_phi_2d(fact, k, dt, field)
    want = _phi_dense_times(k, dt * op.dense(), field.ravel()).reshape(4, 3)
    assert np.abs(got - want).max() < 1e-12


def test_2d_transform_batches_leading_axes():
    fact = spectral_factorization_2d(build_laplacian_2d(5, 4, 1.0, 0.1, 0.12))
    rng = np.random.default_rng(2)
    fields = rng.standard_normal((7, 5, 4))
    batched = fact.to_modes(fields)
    for i in range(7):
        assert np.allclose(batched[i], fact.to_modes(fields[i]), atol=1e-13)
    assert np.allclose(fact.from_modes(batched), fields, atol=1e-13)


def test_expm_dense_agrees_with_scipy_on_random_symmetric():
    rng = np.random.default_rng(4)
    B = rng.standard_normal((6, 6))
    M = 0.5 * (B + B.T)
    assert np.allclose(expm_dense(M), scipy.linalg.expm(M), atol=1e-12)
    with pytest.raises(ValueError):
        expm_dense(np.zeros((2, 3)))
