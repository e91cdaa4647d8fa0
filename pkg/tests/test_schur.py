"""Schur approximation builders checked against dense linear algebra done
directly in the tests."""

import numpy as np
import pytest
import scipy.sparse as sp

from dsaddle import assembly as asm
from dsaddle import schur
from dsaddle.errors import ContractViolationError

PROPS = asm.MaterialProps()


@pytest.fixture(scope="module")
def mfe4():
    return asm.build_mfe_system(asm.StructuredMesh(2, 4), PROPS)


def test_s1_matches_dense_formula(mfe4):
    S1 = schur.build_s1(mfe4)
    Bd = mfe4.B.toarray()
    want = mfe4.D.toarray() + Bd @ np.diag(1.0 / mfe4.A.diagonal()) @ Bd.T
    assert np.allclose(S1.toarray(), want, atol=1e-14 * np.abs(want).max())
    w = np.linalg.eigvalsh(S1.toarray())
    assert w[0] > 0  # full row rank coupling makes it definite


def test_sk_physical_value(mfe4):
    sk = schur.build_sk_physical(mfe4)
    mesh_h = 1.0 / 4
    want = PROPS.biot ** 2 * mesh_h ** 2 / PROPS.drained_modulus
    assert np.allclose(sk, want)
    assert sk.shape == (mfe4.m,)


def test_sk_algebraic_matches_row_oracle(mfe4):
    sk = schur.build_sk_algebraic(mfe4)
    Ad = mfe4.A.toarray()
    Bd = mfe4.B.toarray()
    for i in range(mfe4.m):
        j = np.flatnonzero(Bd[i])
        want = Bd[i, j] @ np.linalg.solve(Ad[np.ix_(j, j)], Bd[i, j])
        assert abs(sk[i] - want) <= 1e-11 * max(1.0, abs(want))


def test_sk_algebraic_reduces_to_jacobi_for_diagonal_a(mfe4):
    diagA = sp.diags(mfe4.A.diagonal()).tocsr()
    sys2 = asm.DspSystem(diagA, mfe4.B, mfe4.C, mfe4.D, mfe4.E,
                         mfe4.rhs, dict(mfe4.meta))
    sk = schur.build_sk_algebraic(sys2)
    S1 = schur.build_s1(sys2)
    want = (S1 - sys2.D).diagonal()
    assert np.allclose(sk, want, atol=1e-13 * np.abs(want).max())


def test_s2_is_d_plus_diagonal(mfe4):
    S2 = schur.build_s2(mfe4, "physical")
    gap = (S2 - mfe4.D) - sp.diags(schur.build_sk_physical(mfe4))
    assert abs(gap).max() <= 1e-15
    S2a = schur.build_s2(mfe4, "algebraic")
    gap2 = (S2a - mfe4.D) - sp.diags(schur.build_sk_algebraic(mfe4))
    assert abs(gap2).max() <= 1e-15
    with pytest.raises(ContractViolationError):
        schur.build_s2(mfe4, "nope")


def test_x_proxy_matches_dense_formula(mfe4):
    s_diag = schur.build_s1(mfe4).diagonal()
    X = schur.x_proxy(mfe4, s_diag)
    Cd = mfe4.C.toarray()
    want = mfe4.E.toarray() + Cd @ np.diag(1.0 / s_diag) @ Cd.T
    assert np.allclose(X.toarray(), want, atol=1e-14 * np.abs(want).max())
    w = np.linalg.eigvalsh(X.toarray())
    assert w[0] > 0


def test_s_tilde_dense_matches_inverse(mfe4):
    a_repr = mfe4.A.toarray()
    S = schur.s_tilde_dense(mfe4, a_repr)
    want = mfe4.D.toarray() + mfe4.B.toarray() @ np.linalg.inv(a_repr) @ mfe4.B.T.toarray()
    assert np.allclose(S, want, atol=1e-11 * np.abs(want).max())


def test_x_tilde_dense_matches_inverse(mfe4):
    S_hat = schur.build_s1(mfe4).toarray()
    X = schur.x_tilde_dense(mfe4, S_hat)
    want = mfe4.E.toarray() + mfe4.C.toarray() @ np.linalg.inv(S_hat) @ mfe4.C.T.toarray()
    assert np.allclose(X, want, atol=1e-11 * np.abs(want).max())
