"""Kernel tests. Every expected value here is either exact arithmetic or an
independent dense oracle computed in the test itself."""

import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp

from dsaddle import sparse_core as sc
from dsaddle.errors import (
    ContractViolationError,
    DimensionError,
    Ic0BreakdownError,
    MatrixMarketError,
)


def rng(seed=0):
    return np.random.default_rng(seed)


def random_spd(n, seed=0, density=0.4):
    g = rng(seed)
    K = g.standard_normal((n, n))
    K[g.random((n, n)) > density] = 0.0
    M = K @ K.T + n * np.eye(n)
    return M


# ---------------------------------------------------------------- csr utils


def test_csr_from_coo_sums_duplicates_and_sorts():
    rows = np.array([1, 0, 1, 0])
    cols = np.array([1, 0, 1, 1])
    vals = np.array([2.0, 1.0, 3.0, 4.0])
    M = sc.csr_from_coo(rows, cols, vals, (2, 2))
    assert np.allclose(M.toarray(), [[1.0, 4.0], [0.0, 5.0]])
    assert M.has_sorted_indices


def test_csr_from_coo_is_order_independent():
    g = rng(3)
    rows = g.integers(0, 30, size=400)
    cols = g.integers(0, 30, size=400)
    vals = g.standard_normal(400)
    M1 = sc.csr_from_coo(rows, cols, vals, (30, 30))
    perm = g.permutation(400)
    M2 = sc.csr_from_coo(rows[perm], cols[perm], vals[perm], (30, 30))
    # identical bit pattern, not merely close
    assert np.array_equal(M1.data, M2.data)
    assert np.array_equal(M1.indices, M2.indices)
    assert np.array_equal(M1.indptr, M2.indptr)


def test_validate_csr_symmetry_flag():
    M = sp.csr_matrix(np.array([[2.0, 1.0], [1.0, 3.0]]))
    sc.validate_csr(M, symmetric=True)
    N = sp.csr_matrix(np.array([[2.0, 1.0], [0.5, 3.0]]))
    with pytest.raises(ContractViolationError):
        sc.validate_csr(N, symmetric=True)


# ---------------------------------------------------------------------- spmv


def test_spmv_matches_dense_product():
    g = rng(1)
    A = sp.random(40, 23, density=0.3, random_state=7, format="csr")
    x = g.standard_normal(23)
    assert np.allclose(sc.spmv(A, x), A.toarray() @ x, atol=1e-13)


def test_spmv_identity_and_zero():
    I = sp.identity(5, format="csr")
    x = np.arange(5.0)
    assert np.array_equal(sc.spmv(I, x), x)
    Z = sp.csr_matrix((5, 5))
    assert np.array_equal(sc.spmv(Z, x), np.zeros(5))


def test_spmv_dimension_mismatch_raises():
    A = sp.identity(4, format="csr")
    with pytest.raises(DimensionError):
        sc.spmv(A, np.ones(5))


# ----------------------------------------------------------------------- ic0


def test_ic0_diagonal_matrix_is_exact_sqrt():
    d = np.array([4.0, 9.0, 16.0])
    M = sp.diags(d).tocsr()
    F = sc.ic0(M)
    assert np.allclose(F.L.toarray(), np.diag(np.sqrt(d)))


def test_ic0_two_by_two_hand_value():
    # chol([[4,2],[2,5]]) = [[2,0],[1,2]], full pattern so ic0 is exact
    M = sp.csr_matrix(np.array([[4.0, 2.0], [2.0, 5.0]]))
    F = sc.ic0(M)
    assert np.allclose(F.L.toarray(), [[2.0, 0.0], [1.0, 2.0]], atol=1e-14)


def test_ic0_tridiagonal_matches_dense_cholesky():
    # tridiagonal pattern is closed under Cholesky: no fill, ic0 == chol
    n = 10
    M = sp.diags([-np.ones(n - 1), 2.0 * np.ones(n), -np.ones(n - 1)],
                 [-1, 0, 1]).tocsr()
    F = sc.ic0(M)
    Ld = np.linalg.cholesky(M.toarray())
    assert np.allclose(F.L.toarray(), Ld, atol=1e-12)


def test_ic0_pattern_product_identity():
    # (L L^T) agrees with M on M's own sparsity pattern
    M = sp.csr_matrix(random_spd(12, seed=5))
    M.data[np.abs(M.data) < 0.3] = 0.0
    M.eliminate_zeros()
    M = sp.csr_matrix((M + M.T).toarray() / 2 + 12 * np.eye(12))
    F = sc.ic0(M)
    P = (F.L @ F.L.T).toarray()
    Md = M.toarray()
    mask = Md != 0.0
    scale = np.abs(Md).max()
    assert np.max(np.abs((P - Md)[mask])) <= 1e-12 * scale


def test_ic0_breakdown_carries_row_index():
    M = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(Ic0BreakdownError) as info:
        sc.ic0(M)
    assert info.value.row == 1


def test_ic0_shifted_retries_until_spd():
    M = sp.csr_matrix(np.array([[1.0, 1.04], [1.04, 1.0]]))
    F, shift = sc.ic0_shifted(M)
    assert shift > 0
    L = F.L.toarray()
    # factor of the shifted matrix, still a usable SPD operator
    assert np.all(np.diag(L) > 0)


def test_ic0_shifted_gives_up():
    M = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(Ic0BreakdownError):
        sc.ic0_shifted(M)  # needs shift > 1, retry ladder tops out below


def test_ic0_rejects_nonpositive_diagonal():
    M = sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 2.0]]))
    with pytest.raises((ContractViolationError, Ic0BreakdownError)):
        sc.ic0(M)


# --------------------------------------------------------- triangular solves


def test_solve_triangular_known_system():
    L = sp.csr_matrix(np.array([[2.0, 0, 0], [1.0, 3.0, 0], [0.5, 1.0, 4.0]]))
    b = np.array([2.0, 5.0, 7.5])
    x = sc.solve_triangular(L, b)
    assert np.allclose(x, np.linalg.solve(L.toarray(), b), atol=1e-13)
    y = sc.solve_triangular(L, b, transposed=True)
    assert np.allclose(y, np.linalg.solve(L.toarray().T, b), atol=1e-13)


def test_chol_solve_matches_dense_solve():
    g = rng(2)
    K = g.standard_normal((20, 20))
    M = sp.csr_matrix(K @ K.T + 20 * np.eye(20))  # fully dense pattern
    F = sc.ic0(M)  # no dropped fill, so the factor is the exact Cholesky
    b = rng(4).standard_normal(20)
    x = sc.chol_solve(F, b)
    assert np.allclose(x, np.linalg.solve(M.toarray(), b), rtol=1e-10)


def test_solve_triangular_zero_diagonal_raises():
    L = sp.csr_matrix(np.array([[1.0, 0.0], [1.0, 0.0]]))
    with pytest.raises(Exception):
        sc.solve_triangular(L, np.ones(2))


# ------------------------------------------------------------ dense eig, sym


def test_eig_symmetric_diagonal_exact():
    M = np.diag([3.0, -1.0, 7.0])
    spec = sc.dense_eig_symmetric(M)
    assert np.allclose(spec.values, [-1.0, 3.0, 7.0], atol=1e-14)


def test_eig_symmetric_trace_and_residual():
    M = random_spd(15, seed=8)
    spec = sc.dense_eig_symmetric(M, vectors=True)
    assert abs(spec.values.sum() - np.trace(M)) <= 1e-10 * np.abs(M).max() * 15
    R = M @ spec.vectors - spec.vectors * spec.values
    assert np.max(np.abs(R)) <= 1e-10 * np.abs(M).max()


def test_eig_symmetric_rejects_asymmetric():
    M = np.array([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ContractViolationError):
        sc.dense_eig_symmetric(M)


# -------------------------------------------------------- dense eig, general


def test_eig_general_companion_has_known_roots():
    # companion of (x-1)(x-2)(x-3) = x^3 - 6x^2 + 11x - 6
    C = np.array([[6.0, -11.0, 6.0], [1.0, 0, 0], [0, 1.0, 0]])
    spec = sc.dense_eig_general(C)
    assert np.allclose(sorted(spec.values.real), [1.0, 2.0, 3.0], atol=1e-10)
    assert np.max(np.abs(spec.values.imag)) <= 1e-10


def test_eig_general_rotation_gives_conjugate_pair():
    R = np.array([[0.0, -1.0], [1.0, 0.0]])
    spec = sc.dense_eig_general(R)
    v = np.sort_complex(spec.values)
    assert np.allclose(v, [-1j, 1j], atol=1e-14)


def test_eig_general_transpose_invariance():
    M = rng(11).standard_normal((30, 30))
    w1 = np.sort_complex(sc.dense_eig_general(M).values)
    w2 = np.sort_complex(sc.dense_eig_general(M.T).values)
    assert np.allclose(w1, w2, atol=1e-10 * np.abs(w1).max())


def test_eig_general_conjugate_pairs_adjacent():
    M = rng(12).standard_normal((12, 12))
    spec = sc.dense_eig_general(M)
    vals = spec.values
    i = 0
    while i < len(vals):
        if abs(vals[i].imag) > 0:
            assert vals[i + 1] == np.conj(vals[i])
            i += 2
        else:
            i += 1


def test_eig_general_vectors_residual():
    M = rng(13).standard_normal((20, 20))
    spec = sc.dense_eig_general(M, vectors=True)
    R = M @ spec.vectors - spec.vectors * spec.values
    assert np.max(np.abs(R)) <= 1e-9 * np.abs(M).max()


# --------------------------------------------------- generalized sym extremes


def test_gen_extremes_equal_matrices():
    N = random_spd(9, seed=3)
    lo, hi = sc.generalized_sym_eig_extremes(N, N)
    assert abs(lo - 1.0) <= 1e-12 and abs(hi - 1.0) <= 1e-12


def test_gen_extremes_scaled_pair():
    N = random_spd(7, seed=4)
    lo, hi = sc.generalized_sym_eig_extremes(2.0 * N, N)
    assert abs(lo - 2.0) <= 1e-12 and abs(hi - 2.0) <= 1e-12


def test_gen_extremes_against_scipy_oracle():
    M = random_spd(14, seed=6)
    M = (M + M.T) / 2
    N = random_spd(14, seed=7)
    lo, hi = sc.generalized_sym_eig_extremes(M, N)
    w = scipy.linalg.eigh(M, N, eigvals_only=True)
    assert abs(lo - w[0]) <= 1e-9 * max(1, abs(w[0]))
    assert abs(hi - w[-1]) <= 1e-9 * max(1, abs(w[-1]))


def test_gen_extremes_congruence_invariance():
    M = random_spd(10, seed=9)
    N = random_spd(10, seed=10)
    Q = rng(20).standard_normal((10, 10))
    Q += 10 * np.eye(10)  # well conditioned
    lo1, hi1 = sc.generalized_sym_eig_extremes(M, N)
    lo2, hi2 = sc.generalized_sym_eig_extremes(Q.T @ M @ Q, Q.T @ N @ Q)
    assert abs(lo1 - lo2) <= 1e-8 * max(1, abs(lo1))
    assert abs(hi1 - hi2) <= 1e-8 * max(1, abs(hi1))


def test_gen_extremes_accepts_sparse_and_callable():
    M = random_spd(8, seed=12)
    N = random_spd(8, seed=13)
    lo0, hi0 = sc.generalized_sym_eig_extremes(M, N)
    lo1, hi1 = sc.generalized_sym_eig_extremes(sp.csr_matrix(M), sp.csr_matrix(N))
    assert abs(lo0 - lo1) < 1e-11 and abs(hi0 - hi1) < 1e-11


# -------------------------------------------------------------- matrix market


def test_mm_roundtrip_general_bit_exact(tmp_path):
    A = sp.random(17, 9, density=0.3, random_state=5, format="csr")
    A.data += 1.0 / 3.0
    path = tmp_path / "a.mtx"
    sc.mm_write(path, A)
    B = sc.mm_read(path)
    assert B.shape == A.shape
    assert np.array_equal(A.toarray(), B.toarray())


def test_mm_roundtrip_symmetric(tmp_path):
    M = sp.csr_matrix(random_spd(11, seed=14))
    path = tmp_path / "s.mtx"
    sc.mm_write(path, M, symmetric=True)
    B = sc.mm_read(path)
    assert np.array_equal(M.toarray(), B.toarray())
    # on disk only the lower triangle is stored
    text = path.read_text()
    assert "symmetric" in text.splitlines()[0]
    n_entries = int(text.splitlines()[1].split()[2])
    assert n_entries < M.nnz


def test_mm_one_based_indices_and_17_digits(tmp_path):
    A = sp.csr_matrix(np.array([[0.0, 1.0 / 3.0], [0.0, 0.0]]))
    path = tmp_path / "t.mtx"
    sc.mm_write(path, A)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("%%MatrixMarket matrix coordinate real")
    row, col, val = lines[2].split()
    assert (row, col) == ("1", "2")
    assert val == "3.3333333333333331e-01"


def test_mm_vector_roundtrip(tmp_path):
    v = rng(15).standard_normal(23)
    path = tmp_path / "v.vec"
    sc.mm_write_vector(path, v)
    w = sc.mm_read_vector(path)
    assert np.array_equal(v, w)


def test_mm_malformed_header_line_number(tmp_path):
    path = tmp_path / "bad.mtx"
    path.write_text("%%NotMatrixMarket nope\n1 1 1\n1 1 2.0\n")
    with pytest.raises(MatrixMarketError) as info:
        sc.mm_read(path)
    assert info.value.line == 1


def test_mm_malformed_entry_line_number(tmp_path):
    path = tmp_path / "bad2.mtx"
    path.write_text(
        "%%MatrixMarket matrix coordinate real general\n"
        "2 2 2\n"
        "1 1 1.0\n"
        "2 oops 2.0\n"
    )
    with pytest.raises(MatrixMarketError) as info:
        sc.mm_read(path)
    assert info.value.line == 4


def test_mm_entry_count_mismatch(tmp_path):
    path = tmp_path / "bad3.mtx"
    path.write_text(
        "%%MatrixMarket matrix coordinate real general\n"
        "2 2 3\n"
        "1 1 1.0\n"
    )
    with pytest.raises(MatrixMarketError):
        sc.mm_read(path)


def test_mm_out_of_range_index(tmp_path):
    path = tmp_path / "bad4.mtx"
    path.write_text(
        "%%MatrixMarket matrix coordinate real general\n"
        "2 2 1\n"
        "3 1 1.0\n"
    )
    with pytest.raises(MatrixMarketError) as info:
        sc.mm_read(path)
    assert info.value.line == 3
