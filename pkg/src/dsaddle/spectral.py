"""Spectral analysis of the block preconditioned operators.

Scalar indicator ranges are extreme generalized eigenvalues of the seven
pencils that pair each block (or nested complement) with its realized
stand-in.  From one indicator set the module produces eigenvalue bounds
for both layouts: a real interval, an exclusion window, and a complex
disc centred at one for the triangular preconditioner; a negative and a
positive cluster for the diagonal one.  Dense reference spectra and a
verification pass close the loop at desk scale.

Nonlinear inner blocks are analyzed through their linear surrogates; the
substitution is applied consistently to indicators, dense forms, and the
eigenvector transform.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg as sla

from . import schur
from .assembly import DspSystem
from .errors import ConfigError, ContractViolationError, ScaleCapError
from .precond import BlockTriangular, InnerOperator, RealizedPrecond
from .sparse_core import (EigenSpectrum, dense_eig_general,
                          dense_eig_symmetric, generalized_sym_eig_extremes)

_SPECTRUM_CAP = 9000
_VECTOR_CAP = 2500

Band = Tuple[float, float]


# ------------------------------------------------------------- indicators


@dataclass(frozen=True)
class IndicatorSet:
    """Extreme generalized eigenvalues of the seven analysis pencils.

    a: displacement block vs its stand-in
    s: pressure complement vs the realized pressure block
    x: flow complement vs the realized flow block
    d: raw pressure block vs the realized pressure block
    e: raw flow block vs the realized flow block
    r: pressure complement minus raw block (coupling part)
    k: flow complement minus raw block (coupling part)

    dims records the (n, m, p) of the operator the set was computed for,
    so a verification pass can refuse a mismatched report.  meta records
    analysis substitutions, e.g. which nonlinear block was replaced by its
    linear surrogate.
    """

    a: Band
    s: Band
    x: Band
    d: Band
    e: Band
    r: Band
    k: Band
    dims: Tuple[int, int, int]
    meta: Dict[str, str] = field(default_factory=dict, compare=False)

    def as_dict(self) -> Dict[str, Band]:
        return {"a": self.a, "s": self.s, "x": self.x, "d": self.d,
                "e": self.e, "r": self.r, "k": self.k}


def _linear_block(op: InnerOperator) -> InnerOperator:
    if op.is_linear:
        return op
    return replace(op.surrogate, scale=op.scale)


def _linear_realization(prec: RealizedPrecond) -> RealizedPrecond:
    a, s, x = (_linear_block(prec.a_hat), _linear_block(prec.s_hat),
               _linear_block(prec.x_hat))
    if a is prec.a_hat and s is prec.s_hat and x is prec.x_hat:
        return prec
    return RealizedPrecond(prec.spec, a, s, x, prec.s_build, prec.x_build)


def _band(M, N, name: str, clamp_tol: float, psd: bool = False) -> Band:
    lo, hi = generalized_sym_eig_extremes(M, N)
    ref = max(1.0, abs(hi))
    if psd:
        # rank-deficient left sides legitimately touch zero; anything more
        # negative than roundoff violates the semidefiniteness contract
        if lo < -clamp_tol * ref:
            raise ContractViolationError(
                f"{name} pencil has negative lower extreme {lo:.3e}")
        lo = max(lo, 0.0)
    elif lo <= 0:
        raise ContractViolationError(
            f"{name} pencil must be positive definite, got {lo:.3e}")
    return (float(lo), float(hi))


def compute_indicators(system: DspSystem, prec: RealizedPrecond,
                       clamp_tol: float = 1e-8) -> IndicatorSet:
    """All seven indicator ranges for one realized preconditioner.

    The flow complement is rebuilt against the scaled pressure block, so a
    relaxation factor propagates into the x/k pencils the same way it
    enters the applied operator.
    """
    rp = _linear_realization(prec)
    meta: Dict[str, str] = {}
    for label, raw, used in (("a_hat", prec.a_hat, rp.a_hat),
                             ("s_hat", prec.s_hat, rp.s_hat),
                             ("x_hat", prec.x_hat, rp.x_hat)):
        if raw is not used:
            meta[label] = (f"nonlinear {raw.kind} block analyzed through "
                           f"its {used.kind} surrogate")
    a_repr = rp.a_hat.represented_dense()
    s_repr = rp.s_hat.represented_dense()
    x_repr = rp.x_hat.represented_dense()
    A = system.A.toarray()
    D = system.D.toarray()
    E = system.E.toarray()
    S_t = schur.s_tilde_dense(system, a_repr)
    X_t = schur.x_tilde_dense(system, s_repr)
    return IndicatorSet(
        a=_band(A, a_repr, "displacement", clamp_tol),
        s=_band(S_t, s_repr, "pressure complement", clamp_tol),
        x=_band(X_t, x_repr, "flow complement", clamp_tol),
        d=_band(D, s_repr, "pressure block", clamp_tol, psd=True),
        e=_band(E, x_repr, "flow block", clamp_tol),
        r=_band(S_t - D, s_repr, "pressure coupling", clamp_tol, psd=True),
        k=_band(X_t - E, x_repr, "flow coupling", clamp_tol, psd=True),
        dims=(system.n, system.m, system.p),
        meta=meta)


# ----------------------------------------------------------- bound forms


@dataclass(frozen=True)
class CubicCoefficients:
    """Monic cubic lambda^3 - a2 lambda^2 +/- lower terms, evaluated at the
    upper indicator corner; the sign convention is the caller's."""

    a2: float
    a1: float
    a0: float


def triangular_cubic(ind: IndicatorSet) -> CubicCoefficients:
    a, s, x = ind.a[1], ind.s[1], ind.x[1]
    d, e, r, k = ind.d[1], ind.e[1], ind.r[1], ind.k[1]
    return CubicCoefficients(
        a2=x + s + a,
        a1=a * x + k + e * s + d * a + r,
        a0=a * k + e * a * d + e * r)


def diagonal_cubic(ind: IndicatorSet) -> CubicCoefficients:
    a, d, e, r, k = ind.a[1], ind.d[1], ind.e[1], ind.r[1], ind.k[1]
    return CubicCoefficients(
        a2=a + e - d,
        a1=r + k + e * d + a * d - e * a,
        a0=a * k + e * r + e * a * d)


def cubic_bracket(a2: float, a1: float, a0: float) -> Band:
    """Sign-change bracket (alpha, beta) for x^3 - a2 x^2 + a1 x - a0.

    For positive coefficients the polynomial is negative on (0, alpha) and
    positive on (beta, inf) with alpha = min(a2, a0/a1), beta = max of the
    same pair; any real root therefore lies in [alpha, beta].
    """
    if not (a2 > 0 and a1 > 0 and a0 > 0):
        raise ContractViolationError(
            f"sign bracket needs positive coefficients, got "
            f"a2={a2:.6g}, a1={a1:.6g}, a0={a0:.6g}")
    ratio = a0 / a1
    return (min(a2, ratio), max(a2, ratio))


@dataclass(frozen=True)
class TriangularBounds:
    """Eigenvalue enclosure for the right triangular-preconditioned
    operator.

    Real eigenvalues lie in [lo, hi]; those outside the window also obey
    the corner cubic, whose sign-based root bracket is reported.  Complex
    eigenvalues lie in the disc |lambda - 1| <= complex_radius unless the
    pressure indicator floor reaches one, in which case the whole spectrum
    is real and all_real is set.
    """

    lo: float
    hi: float
    window: Band
    complex_radius: Optional[float]
    all_real: bool
    cubic: CubicCoefficients
    cubic_bracket: Band


def triangular_bounds(ind: IndicatorSet) -> TriangularBounds:
    ratio = ind.r[0] / (ind.a[1] + ind.r[0] + ind.d[1])
    lo = min(ind.e[0], ind.a[0], ratio)
    hi = ind.a[1] + ind.s[1] + ind.x[1]
    window = (min(ind.a[0], ratio), ind.a[1] + ind.s[1])
    all_real = ind.d[0] >= 1.0
    radius = None if all_real else math.sqrt(1.0 - ind.d[0])
    cubic = triangular_cubic(ind)
    bracket = cubic_bracket(cubic.a2, cubic.a1, cubic.a0)
    return TriangularBounds(lo, hi, window, radius, all_real, cubic,
                            bracket)


@dataclass(frozen=True)
class DiagonalBounds:
    """Two-cluster enclosure for the diagonal-preconditioned operator.

    neg_lo_split is an alternative floor for the negative cluster from
    splitting the corner cubic into lambda*(lambda^2 - 2 a2 lambda - 2 a1)/2
    plus (lambda^3/2 + a0): with an indefinite middle coefficient only the
    cube-root branch of that argument applies, otherwise the sqrt branch.
    """

    neg: Band
    pos: Band
    neg_lo_split: float
    cubic: CubicCoefficients


def diagonal_bounds(ind: IndicatorSet) -> DiagonalBounds:
    cubic = diagonal_cubic(ind)
    root = math.sqrt(ind.r[1] + ind.k[1])
    neg = (-ind.d[1] - root, -ind.s[0] / (ind.a[1] + ind.s[0]))
    pos = (min(ind.e[0], ind.a[0]),
           max(ind.a[1] + ind.e[1] + root,
               math.sqrt(ind.r[1] + ind.k[1]
                         + ind.d[1] * (ind.e[1] + ind.a[1]))))
    if cubic.a1 < 0:
        split = -(2.0 * cubic.a0) ** (1.0 / 3.0)
    else:
        split = -(ind.d[1] + root)
    return DiagonalBounds(neg, pos, split, cubic)


@dataclass(frozen=True)
class BoundReport:
    indicators: IndicatorSet
    triangular: TriangularBounds
    diagonal: DiagonalBounds


def bound_report(ind: IndicatorSet) -> BoundReport:
    return BoundReport(ind, triangular_bounds(ind), diagonal_bounds(ind))


def rho_min_for_vector(ind: IndicatorSet, x2: float, y2: float,
                       z2: float) -> float:
    """Half-plane floor for one eigenvector, from the squared block norms
    of its transformed representative.

    A truly complex eigenvalue satisfies Re(lambda) >= rho/2 and
    |lambda - 1|^2 <= 1 - rho with this rho.
    """
    den = y2 + ind.e[0] * z2
    if den <= 0:
        raise ContractViolationError(
            "half-plane floor needs pressure or flow eigenvector content")
    return (ind.a[0] * x2 + ind.d[0] * y2 + ind.e[0] * z2) / den


# --------------------------------------------------------- dense spectra


def _spd_factor(op: InnerOperator, name: str):
    try:
        return sla.cho_factor(op.represented_dense(), lower=True)
    except np.linalg.LinAlgError as err:
        raise ContractViolationError(
            f"realized {name} block is not positive definite") from err


def _dense_right_preconditioned(system: DspSystem,
                                rp: RealizedPrecond) -> np.ndarray:
    # transpose of the product solved by block forward substitution, one
    # SPD Cholesky per diagonal block; a single LU of the assembled
    # triangular matrix would mix block scales spanning many decades
    K = system.full_matrix().toarray()
    n, m = system.n, system.m
    Y = np.empty_like(K)
    Y[:n] = sla.cho_solve(_spd_factor(rp.a_hat, "displacement"), K[:n])
    Y[n:n + m] = sla.cho_solve(_spd_factor(rp.s_hat, "pressure"),
                               system.B @ Y[:n] - K[n:n + m])
    Y[n + m:] = sla.cho_solve(_spd_factor(rp.x_hat, "flow"),
                              K[n + m:] - system.C @ Y[n:n + m])
    return np.ascontiguousarray(Y.T)


def preconditioned_dense(system: DspSystem, prec: RealizedPrecond,
                         layout: str) -> np.ndarray:
    """Dense preconditioned operator.

    triangular: the right-preconditioned product, generally nonsymmetric.
    diagonal: the symmetric two-sided form, congruent to the assembled
    matrix (same inertia) and similar to the one-sided product.
    """
    rp = _linear_realization(prec)
    if layout == "triangular":
        return _dense_right_preconditioned(system, rp)
    if layout == "diagonal":
        K = system.full_matrix().toarray()
        n, m = system.n, system.m
        cuts = [slice(0, n), slice(n, n + m), slice(n + m, system.total)]
        roots = [rp.a_hat.inv_sqrt_dense(), rp.s_hat.inv_sqrt_dense(),
                 rp.x_hat.inv_sqrt_dense()]
        for cut, Rb in zip(cuts, roots):
            K[cut, :] = Rb @ K[cut, :]
        for cut, Rb in zip(cuts, roots):
            K[:, cut] = K[:, cut] @ Rb
        K = K + K.T
        K *= 0.5
        return K
    raise ContractViolationError(f"unknown layout {layout!r}")


def preconditioned_spectrum(system: DspSystem, prec: RealizedPrecond,
                            layout: str, vectors: Optional[bool] = None,
                            cap: int = _SPECTRUM_CAP) -> EigenSpectrum:
    """Full spectrum of the preconditioned operator, dense at desk scale.

    vectors defaults to on below the vector cap and off above it; the hard
    cap protects against accidentally densifying a production-size system.
    """
    N = system.total
    if N > cap:
        raise ScaleCapError(f"spectrum of order {N} exceeds dense cap {cap}")
    if vectors is None:
        vectors = N <= _VECTOR_CAP
    M = preconditioned_dense(system, prec, layout)
    if layout == "diagonal":
        return dense_eig_symmetric(M, vectors=vectors)
    return dense_eig_general(M, vectors=vectors)


def transformed_block_norms(system: DspSystem, prec: RealizedPrecond,
                            u: np.ndarray) -> Tuple[float, float, float]:
    """Squared block norms of the transformed eigenvector.

    An eigenvector u of the right-preconditioned operator maps to the
    symmetric-form representative through a triangular solve followed by
    the block square roots; its three block norms feed the per-vector
    half-plane floor.
    """
    rp = _linear_realization(prec)
    tri = BlockTriangular(system, rp)
    if np.iscomplexobj(u):
        v = tri.apply_inv(np.ascontiguousarray(u.real)) \
            + 1j * tri.apply_inv(np.ascontiguousarray(u.imag))
    else:
        v = tri.apply_inv(u)
    x, y, z = system.split(v)
    wx = rp.a_hat.sqrt_dense() @ x
    wy = rp.s_hat.sqrt_dense() @ y
    wz = rp.x_hat.sqrt_dense() @ z
    return (float(np.vdot(wx, wx).real), float(np.vdot(wy, wy).real),
            float(np.vdot(wz, wz).real))


# ----------------------------------------------------------- verification


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


@dataclass
class VerificationReport:
    layout: str
    checks: List[CheckResult]
    diagnostics: Dict

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)


def _split_spectrum(vals: np.ndarray):
    mask = np.abs(np.imag(vals)) > 1e-8 * np.maximum(1.0, np.abs(vals))
    return np.real(vals[~mask]), vals[mask], mask


def verify_bounds(system: DspSystem, prec: RealizedPrecond,
                  spectrum: EigenSpectrum, report: BoundReport,
                  layout: str, tol: float = 1e-8) -> VerificationReport:
    """Check a computed spectrum against its bound report.

    Checks: real eigenvalues inside the stated interval(s), complex
    eigenvalues inside the disc, and, when eigenvectors are available, the
    per-vector half-plane floor.  Real eigenvalues inside the triangular
    exclusion window are legal and only counted in the diagnostics.

    A report whose indicator dimensions do not match the operator was
    computed for a different system; that is a configuration error, not a
    bound violation.
    """
    dims = (system.n, system.m, system.p)
    if report.indicators.dims != dims:
        raise ConfigError(
            f"bound report computed for dims {report.indicators.dims}, "
            f"operator has dims {dims}")
    vals = np.asarray(spectrum.values)
    reals, cvals, mask = _split_spectrum(vals)
    checks: List[CheckResult] = []
    diags: Dict = {"n_eigenvalues": int(vals.size),
                   "n_real": int(reals.size),
                   "n_complex": int(cvals.size)}
    if reals.size:
        diags["real_range"] = (float(reals.min()), float(reals.max()))

    if layout == "triangular":
        tb = report.triangular
        if reals.size:
            ok = reals.min() >= tb.lo - tol and reals.max() <= tb.hi + tol
            detail = (f"reals in [{reals.min():.6g}, {reals.max():.6g}], "
                      f"bound [{tb.lo:.6g}, {tb.hi:.6g}]")
        else:
            ok, detail = True, "no real eigenvalues"
        checks.append(CheckResult("real-bounds", bool(ok), detail))
        inside = ((reals > tb.window[0] + tol)
                  & (reals < tb.window[1] - tol))
        diags["n_real_in_window"] = int(inside.sum())

        if tb.all_real:
            checks.append(CheckResult(
                "complex-disc", cvals.size == 0,
                f"{cvals.size} complex eigenvalues where none are "
                f"admissible"))
        elif cvals.size:
            dist = np.abs(cvals - 1.0)
            worst = float(dist.max())
            diags["max_disc_distance"] = worst
            checks.append(CheckResult(
                "complex-disc", worst <= tb.complex_radius + tol,
                f"max |lambda - 1| = {worst:.6g}, "
                f"radius {tb.complex_radius:.6g}"))
        else:
            checks.append(CheckResult("complex-disc", True,
                                      "no complex eigenvalues"))

        if cvals.size and spectrum.vectors is not None:
            ind = report.indicators
            rp = _linear_realization(prec)
            worst_half = math.inf
            worst_disc = -math.inf
            skipped = 0
            ok = True
            for idx in np.nonzero(mask)[0]:
                lam = vals[idx]
                x2, y2, z2 = transformed_block_norms(
                    system, rp, spectrum.vectors[:, idx])
                den = y2 + ind.e[0] * z2
                if den <= 1e-14 * (x2 + y2 + z2):
                    skipped += 1
                    continue
                rho = rho_min_for_vector(ind, x2, y2, z2)
                half = lam.real - rho / 2.0
                disc = abs(lam - 1.0) ** 2 - (1.0 - rho)
                worst_half = min(worst_half, half)
                worst_disc = max(worst_disc, disc)
                if half < -tol or disc > tol:
                    ok = False
            diags["n_halfplane_skipped"] = skipped
            checks.append(CheckResult(
                "complex-halfplane", ok,
                f"min(Re - rho/2) = {worst_half:.3e}, "
                f"max(|lambda-1|^2 - (1-rho)) = {worst_disc:.3e}"))
        elif cvals.size:
            diags["halfplane"] = ("eigenvectors unavailable; per-vector "
                                  "floor not checked")
    elif layout == "diagonal":
        checks.append(CheckResult(
            "real-only", cvals.size == 0,
            f"{cvals.size} complex eigenvalues in a symmetric problem"))
        db = report.diagonal
        in_neg = (reals >= db.neg[0] - tol) & (reals <= db.neg[1] + tol)
        in_pos = (reals >= db.pos[0] - tol) & (reals <= db.pos[1] + tol)
        stray = ~(in_neg | in_pos)
        checks.append(CheckResult(
            "cluster-bounds", not stray.any(),
            f"{int(stray.sum())} eigenvalues outside "
            f"[{db.neg[0]:.6g}, {db.neg[1]:.6g}] u "
            f"[{db.pos[0]:.6g}, {db.pos[1]:.6g}]"))
        diags["n_negative"] = int((reals < 0).sum())
        diags["n_positive"] = int((reals > 0).sum())
    else:
        raise ContractViolationError(f"unknown layout {layout!r}")

    return VerificationReport(layout, checks, diags)
