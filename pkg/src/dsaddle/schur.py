"""Schur complement approximations for the pressure and flow blocks.

The preconditioners need two nested complements: a pressure complement
S = D + B Ahat^-1 B^T and a flow complement X = E + C Shat^-1 C^T. This
module builds the sparse approximations the preconditioners factor
(cheap diagonal-based surrogates) and the dense exact complements the
spectral indicators are measured against.
"""

from __future__ import annotations

from typing import Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .assembly import DspSystem
from .errors import ContractViolationError
from .sparse_core import Csr


def build_s1(system: DspSystem) -> Csr:
    """Pressure complement with the displacement block replaced by its
    diagonal: D + B diag(A)^-1 B^T. Sparse and SPD."""
    d = system.A.diagonal()
    if np.any(d <= 0):
        raise ContractViolationError("displacement diagonal must be positive")
    Binv = system.B @ sp.diags(1.0 / d)
    return (system.D + Binv @ system.B.T).tocsr()


def build_sk_physical(system: DspSystem) -> np.ndarray:
    """Constant diagonal compensation: squared coupling coefficient times
    cell volume over the drained modulus."""
    meta = system.meta
    if "props" not in meta or "cells" not in meta or "dim" not in meta:
        raise ContractViolationError(
            "physical compensation needs mesh and material metadata")
    props = meta["props"]
    h = 1.0 / meta["cells"]
    val = props.biot ** 2 * h ** meta["dim"] / props.drained_modulus
    return np.full(system.m, val)


def build_sk_algebraic(system: DspSystem) -> np.ndarray:
    """Per-row compensation: for each pressure row, the energy of that row
    of B against the principal submatrix of A it touches."""
    A = system.A.tocsc()
    B = system.B.tocsr()
    out = np.empty(system.m)
    indptr, indices, data = B.indptr, B.indices, B.data
    for i in range(system.m):
        j = indices[indptr[i]:indptr[i + 1]]
        bi = data[indptr[i]:indptr[i + 1]]
        if len(j) == 0:
            out[i] = 0.0
            continue
        Aloc = A[:, j][j, :].toarray()
        out[i] = bi @ np.linalg.solve(Aloc, bi)
    return out


def build_s2(system: DspSystem, variant: str = "physical") -> Csr:
    """Pressure complement surrogate D plus a diagonal compensation term."""
    if variant == "physical":
        sk = build_sk_physical(system)
    elif variant == "algebraic":
        sk = build_sk_algebraic(system)
    else:
        raise ContractViolationError(f"unknown compensation variant {variant!r}")
    return (system.D + sp.diags(sk)).tocsr()


def x_proxy(system: DspSystem, s_diag: np.ndarray) -> Csr:
    """Flow complement with a diagonal pressure surrogate:
    E + C diag(s)^-1 C^T. Stays sparse, used to build the factored X."""
    s_diag = np.asarray(s_diag, dtype=float)
    if s_diag.shape != (system.m,) or np.any(s_diag <= 0):
        raise ContractViolationError("pressure surrogate diagonal must be positive")
    Cs = system.C @ sp.diags(1.0 / s_diag)
    X = (system.E + Cs @ system.C.T).tocsr()
    return ((X + X.T) / 2.0).tocsr()


def _dense(M: Union[np.ndarray, sp.spmatrix]) -> np.ndarray:
    return M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)


def s_tilde_dense(system: DspSystem, a_repr: Union[np.ndarray, sp.spmatrix]) -> np.ndarray:
    """Exact pressure complement D + B a_repr^-1 B^T, dense. a_repr is the
    operator the preconditioner actually represents for the displacement
    block, so the result is what the indicators must be measured against."""
    Ad = _dense(a_repr)
    cho = scipy.linalg.cho_factor(Ad, lower=True)
    Bt = system.B.T.toarray()
    Y = scipy.linalg.cho_solve(cho, Bt)
    S = system.D.toarray() + Bt.T @ Y
    return (S + S.T) / 2.0


def x_tilde_dense(system: DspSystem, s_repr: Union[np.ndarray, sp.spmatrix]) -> np.ndarray:
    """Exact flow complement E + C s_repr^-1 C^T, dense, with s_repr the
    represented pressure preconditioner (scaling included)."""
    Sd = _dense(s_repr)
    cho = scipy.linalg.cho_factor(Sd, lower=True)
    Ct = system.C.T.toarray()
    Y = scipy.linalg.cho_solve(cho, Ct)
    X = system.E.toarray() + Ct.T @ Y
    return (X + X.T) / 2.0
