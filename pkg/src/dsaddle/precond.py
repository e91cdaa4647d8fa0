"""Block preconditioners for the assembled systems.

A preconditioner is described by a PrecondSpec (how each diagonal block is
approximated) and realized against a system into three InnerOperator
blocks. Two layouts share the realized blocks:

  BlockTriangular  [ Ahat  B^T   0  ]     applied with GMRES
                   [ 0    -Shat  C^T]
                   [ 0     0    Xhat]

  BlockDiagonal    diag(Ahat, Shat, Xhat)  applied with MINRES

Every InnerOperator knows the matrix it represents, so the spectral
indicators can measure exactly the operator the solver used. The optional
relaxation factor scales only the realized pressure block: its inverse
action is multiplied by omega, so the represented matrix grows by 1/omega,
while the flow block is always built from the unscaled surrogate.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import krylov, schur
from .assembly import DspSystem
from .errors import ContractViolationError, ScaleCapError, UnsupportedFormError
from .sparse_core import Csr, TriangularFactor, chol_solve, ic0_shifted

_EXACT_CAP = 5000


@dataclass
class InnerOperator:
    """One realized diagonal block of a preconditioner.

    scale multiplies the represented matrix, so apply_inv carries 1/scale;
    nonlinear kinds (an inner Krylov solve) expose a linear surrogate that
    shares their setup for everything spectral.
    """

    kind: str
    n: int
    scale: float = 1.0
    diag: Optional[np.ndarray] = None
    factor: Optional[TriangularFactor] = None
    dense_chol: Optional[np.ndarray] = None
    matrix: Optional[Csr] = None
    inner: Optional[Dict] = None
    surrogate: Optional["InnerOperator"] = None
    meta: Dict = field(default_factory=dict)
    _inv_sqrt: Optional[np.ndarray] = field(default=None, repr=False)
    _sqrt: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def is_linear(self) -> bool:
        return self.kind != "inner-pcg"

    def apply_inv(self, r: np.ndarray) -> np.ndarray:
        if self.kind in ("jacobi", "diag"):
            out = r / self.diag
        elif self.kind == "ic0":
            out = chol_solve(self.factor, r)
        elif self.kind == "exact":
            out = scipy.linalg.cho_solve((self.dense_chol, True), r)
        elif self.kind == "inner-pcg":
            res = krylov.pcg(self.matrix, r,
                             prec_inv=self.inner["prec"].apply_inv,
                             tol=self.inner["tol"], maxit=self.inner["maxit"])
            out = res.x
        else:
            raise ContractViolationError(f"unknown operator kind {self.kind!r}")
        return out / self.scale if self.scale != 1.0 else out

    def represented_dense(self) -> np.ndarray:
        """Dense matrix this operator stands for, scaling included."""
        if self.kind in ("jacobi", "diag"):
            base = np.diag(self.diag)
        elif self.kind == "ic0":
            base = (self.factor.L @ self.factor.Lt).toarray()
        elif self.kind == "exact":
            base = self.matrix.toarray()
        else:
            raise UnsupportedFormError(
                "a nonlinear inner solve has no matrix form; use .surrogate")
        return self.scale * base

    def inv_sqrt_dense(self) -> np.ndarray:
        """Symmetric inverse square root of the represented matrix."""
        if self._inv_sqrt is None:
            R = self.represented_dense()
            w, V = np.linalg.eigh((R + R.T) / 2.0)
            if w[0] <= 0:
                raise ContractViolationError(
                    f"represented block not positive definite: {w[0]:.3e}")
            self._inv_sqrt = (V / np.sqrt(w)) @ V.T
        return self._inv_sqrt

    def sqrt_dense(self) -> np.ndarray:
        """Symmetric square root of the represented matrix."""
        if self._sqrt is None:
            R = self.represented_dense()
            w, V = np.linalg.eigh((R + R.T) / 2.0)
            if w[0] <= 0:
                raise ContractViolationError(
                    f"represented block not positive definite: {w[0]:.3e}")
            self._sqrt = (V * np.sqrt(w)) @ V.T
        return self._sqrt


def make_jacobi(M: Csr) -> InnerOperator:
    d = M.diagonal()
    if np.any(d <= 0):
        raise ContractViolationError("diagonal preconditioner needs a positive diagonal")
    return InnerOperator("jacobi", M.shape[0], diag=d)


def make_diag(d: np.ndarray) -> InnerOperator:
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ContractViolationError("diagonal preconditioner needs a positive diagonal")
    return InnerOperator("diag", len(d), diag=d)


def make_ic0(M: Csr) -> InnerOperator:
    F, shift = ic0_shifted(M)
    return InnerOperator("ic0", M.shape[0], factor=F, meta={"shift": shift})


def make_exact(M: Csr) -> InnerOperator:
    n = M.shape[0]
    if n > _EXACT_CAP:
        raise ScaleCapError(
            f"exact block of size {n} exceeds the dense cap {_EXACT_CAP}")
    Md = M.toarray()
    L = np.linalg.cholesky((Md + Md.T) / 2.0)
    return InnerOperator("exact", n, dense_chol=L, matrix=M.tocsr())


def make_inner_pcg(M: Csr, tol: float = 1e-2, maxit: int = 50) -> InnerOperator:
    prec = make_ic0(M)
    surrogate = InnerOperator("ic0", M.shape[0], factor=prec.factor,
                              meta=dict(prec.meta))
    return InnerOperator("inner-pcg", M.shape[0], matrix=M.tocsr(),
                         inner={"prec": prec, "tol": tol, "maxit": maxit},
                         surrogate=surrogate)


def apply_omega(op: InnerOperator, omega: float) -> InnerOperator:
    """Relax an operator: inverse action times omega, represented matrix
    times 1/omega."""
    if omega <= 0:
        raise ContractViolationError("relaxation factor must be positive")
    if omega == 1.0:
        return op
    return replace(op, scale=op.scale / omega, _inv_sqrt=None, _sqrt=None)


# ----------------------------------------------------------------- recipes


_A_KINDS = ("jacobi", "ic0", "exact", "inner-pcg")
_S_VARIANTS = ("s1", "s2-physical", "s2-algebraic")
_S_KINDS = ("ic0", "diag", "exact")
_X_KINDS = ("ic0", "exact")


@dataclass(frozen=True)
class PrecondSpec:
    """Recipe for the three diagonal blocks."""

    a_kind: str = "inner-pcg"
    s_variant: str = "s1"
    s_kind: str = "ic0"
    x_kind: str = "ic0"
    omega: float = 1.0

    def validate(self) -> None:
        if self.a_kind not in _A_KINDS:
            raise ContractViolationError(f"a_kind must be one of {_A_KINDS}")
        if self.s_variant not in _S_VARIANTS:
            raise ContractViolationError(f"s_variant must be one of {_S_VARIANTS}")
        if self.s_kind not in _S_KINDS:
            raise ContractViolationError(f"s_kind must be one of {_S_KINDS}")
        if self.x_kind not in _X_KINDS:
            raise ContractViolationError(f"x_kind must be one of {_X_KINDS}")
        if not self.omega > 0:
            raise ContractViolationError("omega must be positive")


@dataclass
class RealizedPrecond:
    """Spec turned into concrete operators against one system."""

    spec: PrecondSpec
    a_hat: InnerOperator
    s_hat: InnerOperator
    x_hat: InnerOperator
    s_build: Csr          # unscaled matrix the pressure block came from
    x_build: Csr          # unscaled flow surrogate the flow block came from


def _make_block(kind: str, M: Csr) -> InnerOperator:
    if kind == "jacobi":
        return make_jacobi(M)
    if kind == "diag":
        return make_diag(M.diagonal())
    if kind == "ic0":
        return make_ic0(M)
    if kind == "exact":
        return make_exact(M)
    if kind == "inner-pcg":
        return make_inner_pcg(M)
    raise ContractViolationError(f"unknown block kind {kind!r}")


def realize(system: DspSystem, spec: PrecondSpec) -> RealizedPrecond:
    spec.validate()
    a_hat = _make_block(spec.a_kind, system.A)
    if spec.s_variant == "s1":
        s_build = schur.build_s1(system)
    else:
        s_build = schur.build_s2(system, spec.s_variant.split("-", 1)[1])
    s_hat = apply_omega(_make_block(spec.s_kind, s_build), spec.omega)
    x_build = schur.x_proxy(system, s_build.diagonal())
    x_hat = _make_block(spec.x_kind, x_build)
    return RealizedPrecond(spec, a_hat, s_hat, x_hat, s_build, x_build)


# ------------------------------------------------------------ applications


class BlockTriangular:
    """Upper block triangular preconditioner, solved by back substitution."""

    def __init__(self, system: DspSystem, realized: RealizedPrecond):
        self.system = system
        self.blocks = realized
        self._Bt = system.B.T.tocsr()
        self._Ct = system.C.T.tocsr()

    @property
    def is_linear(self) -> bool:
        return self.blocks.a_hat.is_linear and self.blocks.s_hat.is_linear \
            and self.blocks.x_hat.is_linear

    def apply_inv(self, r: np.ndarray) -> np.ndarray:
        r1, r2, r3 = self.system.split(r)
        z = self.blocks.x_hat.apply_inv(r3)
        y = self.blocks.s_hat.apply_inv(self._Ct @ z - r2)
        x = self.blocks.a_hat.apply_inv(r1 - self._Bt @ y)
        return np.concatenate([x, y, z])


class BlockDiagonal:
    """Block diagonal preconditioner; SPD whenever the blocks are."""

    def __init__(self, system: DspSystem, realized: RealizedPrecond):
        self.system = system
        self.blocks = realized

    @property
    def is_linear(self) -> bool:
        return self.blocks.a_hat.is_linear and self.blocks.s_hat.is_linear \
            and self.blocks.x_hat.is_linear

    def apply_inv(self, r: np.ndarray) -> np.ndarray:
        r1, r2, r3 = self.system.split(r)
        return np.concatenate([self.blocks.a_hat.apply_inv(r1),
                               self.blocks.s_hat.apply_inv(r2),
                               self.blocks.x_hat.apply_inv(r3)])
