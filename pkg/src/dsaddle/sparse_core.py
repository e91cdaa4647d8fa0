"""Sparse kernels shared by the whole package.

CSR matrices from scipy.sparse are the single sparse container used
everywhere. This module adds the pieces the rest of the code relies on:
canonical COO-to-CSR conversion, an incomplete Cholesky with zero fill,
triangular and factored solves, dense eigenvalue front-ends with contract
checks, generalized symmetric extreme eigenvalues, and Matrix Market I/O.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import structural_rank  # noqa: F401  (re-export aid)

from .errors import (
    ContractViolationError,
    DimensionError,
    EigConvergenceError,
    Ic0BreakdownError,
    MatrixMarketError,
)

Csr = sp.csr_matrix


# --------------------------------------------------------------------- csr


def csr_from_coo(rows, cols, vals, shape) -> Csr:
    """Build a canonical CSR from triplets: duplicates summed, indices sorted.

    Triplets are sorted by (row, col, value) before the duplicate reduction,
    so the result is bit-identical no matter the visitation order assembly
    code used when scattering element contributions.
    """
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=float)
    if not (rows.shape == cols.shape == vals.shape):
        raise DimensionError("triplet arrays differ in length")
    order = np.lexsort((vals, cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    if len(rows):
        new_group = np.empty(len(rows), dtype=bool)
        new_group[0] = True
        new_group[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
        starts = np.flatnonzero(new_group)
        data = np.add.reduceat(vals, starts)
        rows, cols = rows[starts], cols[starts]
    else:
        data = vals
    indptr = np.zeros(shape[0] + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    np.cumsum(indptr, out=indptr)
    return sp.csr_matrix((data, cols.astype(np.int32, copy=False)
                          if shape[1] < 2**31 else cols, indptr),
                         shape=shape)


def validate_csr(M: Csr, symmetric: bool = False, tol: float = 1e-12) -> None:
    if not sp.issparse(M):
        raise ContractViolationError("expected a sparse matrix")
    if symmetric:
        if M.shape[0] != M.shape[1]:
            raise DimensionError(f"symmetric check on {M.shape} matrix")
        gap = abs(M - M.T)
        err = gap.max() if gap.nnz else 0.0
        scale = max(1.0, abs(M).max() if M.nnz else 0.0)
        if err > tol * scale:
            raise ContractViolationError(
                f"matrix is not symmetric: max asymmetry {err:.3e}")


def spmv(M, x: np.ndarray) -> np.ndarray:
    if M.shape[1] != x.shape[0]:
        raise DimensionError(f"matvec shapes {M.shape} and {x.shape}")
    return M @ x


# --------------------------------------------------------------------- ic0


@dataclass
class TriangularFactor:
    """Lower-triangular factor L with M ~ L L^T. Caches L^T in CSR so the
    transposed solve stays a cheap forward sweep."""

    L: Csr
    _Lt: Optional[Csr] = None

    @property
    def Lt(self) -> Csr:
        if self._Lt is None:
            self._Lt = self.L.T.tocsr()
            self._Lt.sort_indices()
        return self._Lt

    @property
    def shape(self):
        return self.L.shape


def ic0(M: Csr) -> TriangularFactor:
    """Incomplete Cholesky with zero fill on the lower triangle of M.

    Raises Ic0BreakdownError with the offending row when a pivot goes
    nonpositive; the caller can fall back to ic0_shifted.
    """
    n = M.shape[0]
    if M.shape[0] != M.shape[1]:
        raise DimensionError(f"ic0 needs a square matrix, got {M.shape}")
    A = sp.tril(M, format="csr")
    A.sort_indices()
    indptr, indices = A.indptr, A.indices
    avals = A.data
    Lx = np.zeros_like(avals)
    work = np.zeros(n)

    for i in range(n):
        s, e = indptr[i], indptr[i + 1]
        cols = indices[s:e]
        if e == s or cols[-1] != i:
            raise Ic0BreakdownError(i, 0.0)
        # strictly-lower part of row i, in column order
        for t in range(e - s - 1):
            j = cols[t]
            js, je = indptr[j], indptr[j + 1]
            # dot of row i (accumulated in work) with row j of L, minus diag
            dot = work[indices[js:je - 1]] @ Lx[js:je - 1]
            lij = (avals[s + t] - dot) / Lx[je - 1]
            work[j] = lij
            Lx[s + t] = lij
        piv = avals[e - 1] - Lx[s:e - 1] @ Lx[s:e - 1]
        if piv <= 0.0:
            work[cols[:-1]] = 0.0
            raise Ic0BreakdownError(i, float(piv))
        Lx[e - 1] = np.sqrt(piv)
        work[cols[:-1]] = 0.0

    L = sp.csr_matrix((Lx, indices.copy(), indptr.copy()), shape=(n, n))
    return TriangularFactor(L)


def ic0_shifted(M: Csr, sigma0: float = 1e-3,
                max_retries: int = 10) -> Tuple[TriangularFactor, float]:
    """ic0 with a diagonal-shift retry ladder: factor M + sigma*diag(M),
    doubling sigma until the factorization survives."""
    try:
        return ic0(M), 0.0
    except Ic0BreakdownError as first:
        last = first
    d = M.diagonal()
    if np.any(d <= 0):
        raise last
    D = sp.diags(d)
    sigma = sigma0
    for _ in range(max_retries):
        try:
            return ic0((M + sigma * D).tocsr()), sigma
        except Ic0BreakdownError as err:
            last = err
            sigma *= 2.0
    raise last


def solve_triangular(L: Union[Csr, TriangularFactor], b: np.ndarray,
                     transposed: bool = False) -> np.ndarray:
    """Solve L x = b (or L^T x = b) for sparse triangular L."""
    if isinstance(L, TriangularFactor):
        T = L.Lt if transposed else L.L
    else:
        T = L.T.tocsr() if transposed else L
    lower = not transposed
    return sp.linalg.spsolve_triangular(T, b, lower=lower)


def chol_solve(F: TriangularFactor, b: np.ndarray) -> np.ndarray:
    y = sp.linalg.spsolve_triangular(F.L, b, lower=True)
    return sp.linalg.spsolve_triangular(F.Lt, y, lower=False)


# --------------------------------------------------------------- dense eig


@dataclass
class EigenSpectrum:
    values: np.ndarray
    vectors: Optional[np.ndarray] = None


def _as_dense(M) -> np.ndarray:
    if sp.issparse(M):
        return M.toarray()
    return np.asarray(M, dtype=float)


def dense_eig_symmetric(M, vectors: bool = False) -> EigenSpectrum:
    """eigh front-end with an explicit symmetry contract check."""
    A = _as_dense(M)
    scale = max(1.0, np.abs(A).max())
    if np.max(np.abs(A - A.T)) > 1e-12 * scale:
        raise ContractViolationError("dense_eig_symmetric on asymmetric input")
    A = (A + A.T) / 2.0
    if vectors:
        w, V = np.linalg.eigh(A)
        return EigenSpectrum(w, V)
    return EigenSpectrum(np.linalg.eigvalsh(A))


def dense_eig_general(M, vectors: bool = False) -> EigenSpectrum:
    """eig front-end. Values sorted by (real, imag) with conjugate pairs
    forced adjacent (the pair with negative imaginary part first)."""
    A = _as_dense(M)
    try:
        if vectors:
            w, V = np.linalg.eig(A)
        else:
            w = np.linalg.eig(A).eigenvalues
            V = None
    except np.linalg.LinAlgError as err:
        raise EigConvergenceError(str(err)) from err
    order = np.lexsort((np.abs(w.imag), w.real))
    w = w[order]
    if V is not None:
        V = V[:, order]
    # canonicalize pairs: after the sort, conjugates are adjacent up to
    # roundoff; make the -imag member come first
    for i in range(len(w) - 1):
        if w[i].imag > 0 and abs(w[i + 1] - np.conj(w[i])) <= 1e-12 * max(1, abs(w[i])):
            w[i], w[i + 1] = w[i + 1], w[i]
            if V is not None:
                V[:, [i, i + 1]] = V[:, [i + 1, i]]
    return EigenSpectrum(w, V)


def generalized_sym_eig_extremes(M, N) -> Tuple[float, float]:
    """Extreme eigenvalues of the symmetric pencil (M, N) with N SPD.

    Reduces to a standard symmetric problem through the dense Cholesky
    factor of N; small negative eigenvalues of a PSD M show up as tiny
    negatives and are left to the caller to interpret.
    """
    Md = _as_dense(M)
    Nd = _as_dense(N)
    if Md.shape != Nd.shape or Md.shape[0] != Md.shape[1]:
        raise DimensionError(f"pencil shapes {Md.shape} and {Nd.shape}")
    Md = (Md + Md.T) / 2.0
    Nd = (Nd + Nd.T) / 2.0
    try:
        R = np.linalg.cholesky(Nd)
    except np.linalg.LinAlgError as err:
        raise ContractViolationError(
            f"pencil right-hand matrix is not SPD: {err}") from err
    # C = R^-1 M R^-T by two triangular solves
    Y = np.linalg.solve(R, Md)
    C = np.linalg.solve(R, Y.T).T
    C = (C + C.T) / 2.0
    w = np.linalg.eigvalsh(C)
    return float(w[0]), float(w[-1])


# ----------------------------------------------------------- matrix market


_MM_BANNER = "%%MatrixMarket matrix coordinate real"


def mm_write(path, M, symmetric: bool = False) -> None:
    """Write a sparse matrix in Matrix Market coordinate format, 1-based,
    with full double precision. Symmetric output stores the lower triangle."""
    M = sp.coo_matrix(M)
    if symmetric:
        keep = M.row >= M.col
        rows, cols, vals = M.row[keep], M.col[keep], M.data[keep]
        kind = "symmetric"
    else:
        rows, cols, vals = M.row, M.col, M.data
        kind = "general"
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    with open(path, "w") as fh:
        fh.write(f"{_MM_BANNER} {kind}\n")
        fh.write(f"{M.shape[0]} {M.shape[1]} {len(vals)}\n")
        for r, c, v in zip(rows, cols, vals):
            fh.write(f"{r + 1} {c + 1} {v:.16e}\n")


def mm_read(path) -> Csr:
    path = Path(path)
    with open(path) as fh:
        lines = fh.readlines()
    if not lines:
        raise MatrixMarketError(1, "empty file")
    header = lines[0].strip().split()
    if (len(header) < 5 or header[0] != "%%MatrixMarket"
            or header[1] != "matrix" or header[2] != "coordinate"
            or header[3] != "real" or header[4] not in ("general", "symmetric")):
        raise MatrixMarketError(1, f"unsupported header {lines[0].strip()!r}")
    symmetric = header[4] == "symmetric"
    k = 1
    while k < len(lines) and (lines[k].startswith("%") or not lines[k].strip()):
        k += 1
    if k >= len(lines):
        raise MatrixMarketError(len(lines), "missing size line")
    try:
        nr, nc, nnz = (int(tok) for tok in lines[k].split())
    except ValueError as err:
        raise MatrixMarketError(k + 1, f"bad size line: {err}") from err
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz)
    got = 0
    for lineno in range(k + 1, len(lines)):
        raw = lines[lineno].strip()
        if not raw or raw.startswith("%"):
            continue
        if got >= nnz:
            raise MatrixMarketError(lineno + 1,
                                    f"more than the declared {nnz} entries")
        toks = raw.split()
        try:
            r, c = int(toks[0]), int(toks[1])
            v = float(toks[2])
        except (ValueError, IndexError) as err:
            raise MatrixMarketError(lineno + 1,
                                    f"bad entry {raw!r}: {err}") from err
        if not (1 <= r <= nr and 1 <= c <= nc):
            raise MatrixMarketError(
                lineno + 1, f"index ({r}, {c}) outside {nr} x {nc}")
        rows[got], cols[got], vals[got] = r - 1, c - 1, v
        got += 1
    if got != nnz:
        raise MatrixMarketError(len(lines),
                                f"declared {nnz} entries, found {got}")
    if symmetric:
        off = rows != cols
        rows = np.concatenate([rows, cols[off]])
        cols = np.concatenate([cols[:nnz], rows[:nnz][off]])
        vals = np.concatenate([vals, vals[off]])
    return csr_from_coo(rows, cols, vals, (nr, nc))


def mm_write_vector(path, v: np.ndarray) -> None:
    v = np.asarray(v, dtype=float)
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix array real general\n")
        fh.write(f"{v.shape[0]} 1\n")
        for x in v:
            fh.write(f"{x:.16e}\n")


def mm_read_vector(path) -> np.ndarray:
    with open(path) as fh:
        lines = fh.readlines()
    if not lines or not lines[0].startswith("%%MatrixMarket matrix array real"):
        raise MatrixMarketError(1, "not a Matrix Market array file")
    k = 1
    while k < len(lines) and (lines[k].startswith("%") or not lines[k].strip()):
        k += 1
    try:
        n, one = (int(tok) for tok in lines[k].split())
    except (ValueError, IndexError) as err:
        raise MatrixMarketError(k + 1, f"bad size line: {err}") from err
    if one != 1:
        raise MatrixMarketError(k + 1, "expected a single-column array")
    vals = []
    for lineno in range(k + 1, len(lines)):
        raw = lines[lineno].strip()
        if not raw or raw.startswith("%"):
            continue
        try:
            vals.append(float(raw))
        except ValueError as err:
            raise MatrixMarketError(lineno + 1, f"bad value {raw!r}") from err
    if len(vals) != n:
        raise MatrixMarketError(len(lines), f"declared {n} values, found {len(vals)}")
    return np.array(vals)
