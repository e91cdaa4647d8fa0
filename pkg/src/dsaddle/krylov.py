"""Krylov solvers used throughout: full GMRES with right preconditioning,
preconditioned MINRES, and preconditioned CG.

All three start from the zero guess, track a residual history beginning
with the initial residual, and return a SolveResult rather than raising on
plain non-convergence; contract violations (wrong shapes, indefinite
operators where definiteness is required) do raise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Union

import numpy as np
import scipy.sparse as sp

from .errors import ContractViolationError, DimensionError

Operator = Union[sp.spmatrix, np.ndarray, Callable[[np.ndarray], np.ndarray]]


@dataclass
class SolveResult:
    x: np.ndarray
    iterations: int
    residuals: np.ndarray
    converged: bool
    meta: Dict = field(default_factory=dict)


def _as_matvec(op: Operator, n: Optional[int]):
    if callable(op) and not sp.issparse(op) and not isinstance(op, np.ndarray):
        if n is None:
            raise DimensionError("callable operators need the size argument n")
        return op, n
    if op.shape[0] != op.shape[1]:
        raise DimensionError(f"operator must be square, got {op.shape}")
    size = op.shape[0]
    return (lambda v: op @ v), size


def _check_rhs(b: np.ndarray, n: int) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.shape != (n,):
        raise DimensionError(f"rhs length {b.shape} does not match n={n}")
    return b


def gmres(op: Operator, b: np.ndarray, prec_inv=None, tol: float = 1e-13,
          maxit: Optional[int] = None, n: Optional[int] = None) -> SolveResult:
    """Full (unrestarted) GMRES with right preconditioning.

    Solves op x = b by running Arnoldi on v -> op(P^-1 v); with right
    preconditioning the recurrence residual equals the true residual, and
    the returned x is P^-1 applied to the Krylov solution.
    """
    matvec, n = _as_matvec(op, n)
    b = _check_rhs(b, n)
    if prec_inv is None:
        prec_inv = lambda r: r
    if maxit is None:
        maxit = min(n, 2000)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return SolveResult(np.zeros(n), 0, np.array([0.0]), True)

    V = np.empty((maxit + 1, n))
    H = np.zeros((maxit + 1, maxit))
    cs = np.zeros(maxit)
    sn = np.zeros(maxit)
    g = np.zeros(maxit + 1)
    g[0] = bnorm
    V[0] = b / bnorm
    residuals = [bnorm]
    k_done = 0
    converged = False

    for j in range(maxit):
        w = matvec(prec_inv(V[j]))
        # modified Gram-Schmidt
        for i in range(j + 1):
            H[i, j] = w @ V[i]
            w -= H[i, j] * V[i]
        hnext = np.linalg.norm(w)
        H[j + 1, j] = hnext
        breakdown = hnext <= 1e-14 * bnorm
        if not breakdown:
            V[j + 1] = w / hnext
        # apply the stored rotations, then a new one to kill H[j+1, j]
        for i in range(j):
            t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
            H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
            H[i, j] = t
        denom = np.hypot(H[j, j], H[j + 1, j])
        cs[j] = H[j, j] / denom
        sn[j] = H[j + 1, j] / denom
        H[j, j] = denom
        H[j + 1, j] = 0.0
        g[j + 1] = -sn[j] * g[j]
        g[j] = cs[j] * g[j]
        k_done = j + 1
        residuals.append(abs(g[j + 1]))
        if abs(g[j + 1]) <= tol * bnorm or breakdown:
            converged = True
            break

    y = np.linalg.solve(np.triu(H[:k_done, :k_done]), g[:k_done])
    x = prec_inv(V[:k_done].T @ y)
    return SolveResult(x, k_done, np.array(residuals), converged,
                       {"solver": "gmres", "tol": tol, "bnorm": bnorm})


def minres(op: Operator, b: np.ndarray, prec_inv=None, tol: float = 1e-10,
           maxit: Optional[int] = None, n: Optional[int] = None) -> SolveResult:
    """Preconditioned MINRES for a symmetric (possibly indefinite) operator.

    The preconditioner must be symmetric positive definite; a negative
    inner product in the Lanczos step reports it as a contract violation.
    The history holds the preconditioned residual norms, which this
    recurrence drives down monotonically.
    """
    matvec, n = _as_matvec(op, n)
    b = _check_rhs(b, n)
    if prec_inv is None:
        prec_inv = lambda r: r
    if maxit is None:
        maxit = min(n, 2000)

    x = np.zeros(n)
    r1 = b.copy()
    y = prec_inv(r1)
    beta1 = r1 @ y
    if beta1 < 0:
        raise ContractViolationError(
            f"preconditioner is not positive definite (r'My = {beta1:.3e})")
    if beta1 == 0.0:
        return SolveResult(x, 0, np.array([0.0]), True)
    beta1 = np.sqrt(beta1)

    oldb = 0.0
    beta = beta1
    dbar = 0.0
    epsln = 0.0
    phibar = beta1
    cs_ = -1.0
    sn_ = 0.0
    w = np.zeros(n)
    w2 = np.zeros(n)
    r2 = r1
    residuals = [beta1]
    converged = False
    itn = 0

    while itn < maxit:
        itn += 1
        s = 1.0 / beta
        v = s * y
        y = matvec(v)
        if itn >= 2:
            y = y - (beta / oldb) * r1
        alfa = v @ y
        y = y - (alfa / beta) * r2
        r1 = r2
        r2 = y
        y = prec_inv(r2)
        oldb = beta
        beta = r2 @ y
        if beta < 0:
            raise ContractViolationError(
                f"preconditioner is not positive definite (r'My = {beta:.3e})")
        beta = np.sqrt(beta)

        oldeps = epsln
        delta = cs_ * dbar + sn_ * alfa
        gbar = sn_ * dbar - cs_ * alfa
        epsln = sn_ * beta
        dbar = -cs_ * beta
        gamma = max(np.hypot(gbar, beta), np.finfo(float).eps)
        cs_ = gbar / gamma
        sn_ = beta / gamma
        phi = cs_ * phibar
        phibar = sn_ * phibar

        w1 = w2
        w2 = w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x = x + phi * w
        residuals.append(abs(phibar))
        if abs(phibar) <= tol * beta1:
            converged = True
            break

    return SolveResult(x, itn, np.array(residuals), converged,
                       {"solver": "minres", "tol": tol, "beta1": beta1})


def pcg(op: Operator, b: np.ndarray, prec_inv=None, tol: float = 1e-10,
        maxit: Optional[int] = None, n: Optional[int] = None,
        callback=None) -> SolveResult:
    """Preconditioned conjugate gradients for an SPD operator. A direction
    with nonpositive curvature reports the operator as not SPD.  callback,
    when given, receives a copy of the iterate after every update; the
    two-norm residual history is not monotone for this method, so studies
    of its (monotone) energy error need the iterates themselves."""
    matvec, n = _as_matvec(op, n)
    b = _check_rhs(b, n)
    if prec_inv is None:
        prec_inv = lambda r: r
    if maxit is None:
        maxit = min(n, 2000)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return SolveResult(np.zeros(n), 0, np.array([0.0]), True)

    x = np.zeros(n)
    r = b.copy()
    z = prec_inv(r)
    p = z.copy()
    rz = r @ z
    residuals = [bnorm]
    converged = False
    it = 0
    for it in range(1, maxit + 1):
        Ap = matvec(p)
        pAp = p @ Ap
        if pAp <= 0:
            raise ContractViolationError(
                f"operator is not positive definite (p'Ap = {pAp:.3e})")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        if callback is not None:
            callback(x.copy())
        rnorm = np.linalg.norm(r)
        residuals.append(rnorm)
        if rnorm <= tol * bnorm:
            converged = True
            break
        z = prec_inv(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return SolveResult(x, it, np.array(residuals), converged,
                       {"solver": "pcg", "tol": tol, "bnorm": bnorm})
