"""Assembly tests. Oracles are exact integrals of polynomial fields, dense
eliminations recomputed in the test, and cross-checks between the two
discretizations, never values copied from the implementation."""

import numpy as np
import pytest
import scipy.sparse as sp

from dsaddle import assembly as asm
from dsaddle.errors import ContractViolationError

PROPS = asm.MaterialProps()


def lame(props):
    lam = props.young * props.poisson / ((1 + props.poisson) * (1 - 2 * props.poisson))
    mu = props.young / (2 * (1 + props.poisson))
    return lam, mu


def linear_field_energy(G, lam, mu, vol):
    """Exact strain energy of u(x) = G x over a box of volume vol."""
    eps = (G + G.T) / 2
    sig = lam * np.trace(eps) * np.eye(len(G)) + 2 * mu * eps
    return vol * np.tensordot(sig, eps)


def nodal_linear_field(mesh, G):
    """Sample u(x) = G x at the mesh nodes, dof layout matching assembly."""
    coords = mesh.node_coords()
    return (coords @ G.T).ravel()


# ------------------------------------------------------------- elasticity


@pytest.mark.parametrize("dim", [2, 3])
def test_local_elasticity_energy_of_linear_fields(dim):
    lam, mu = lame(PROPS)
    h = 0.3
    Ke = asm.elasticity_local(dim, h, lam, mu)
    assert np.allclose(Ke, Ke.T, atol=1e-9 * np.abs(Ke).max())
    corners = asm.reference_corners(dim) * h
    g = np.random.default_rng(31)
    for _ in range(6):
        G = g.standard_normal((dim, dim))
        u = (corners @ G.T).ravel()
        want = linear_field_energy(G, lam, mu, h ** dim)
        got = u @ Ke @ u
        assert abs(got - want) <= 1e-9 * max(1.0, abs(want))


@pytest.mark.parametrize("dim", [2, 3])
def test_local_elasticity_rigid_modes(dim):
    lam, mu = lame(PROPS)
    h = 0.25
    Ke = asm.elasticity_local(dim, h, lam, mu)
    corners = asm.reference_corners(dim) * h
    n_rigid = 3 if dim == 2 else 6
    modes = []
    for k in range(dim):
        t = np.zeros((len(corners), dim))
        t[:, k] = 1.0
        modes.append(t.ravel())
    skews = [(0, 1)] if dim == 2 else [(0, 1), (0, 2), (1, 2)]
    for i, j in skews:
        W = np.zeros((dim, dim))
        W[i, j], W[j, i] = 1.0, -1.0
        modes.append((corners @ W.T).ravel())
    assert len(modes) == n_rigid
    for m in modes:
        assert np.max(np.abs(Ke @ m)) <= 1e-9 * np.abs(Ke).max()
    w = np.linalg.eigvalsh(Ke)
    assert np.sum(w < 1e-9 * w[-1]) == n_rigid  # no spurious zero-energy modes


def test_global_elasticity_block_is_spd_after_bc():
    mesh = asm.StructuredMesh(2, 4)
    A = asm.assemble_elasticity(mesh, PROPS)
    fixed = asm.displacement_fixed_dofs(mesh)
    assert len(fixed) == 2 * 5  # both components of the five x=0 nodes
    A_bc = asm.symmetric_constrain(A, fixed)
    w = np.linalg.eigvalsh(A_bc.toarray())
    assert w[0] > 0
    # constrained rows keep only their original diagonal entry
    d0 = A.diagonal()
    Ad = A_bc.toarray()
    for i in fixed:
        row = Ad[i].copy()
        row[i] = 0.0
        assert np.all(row == 0.0)
        assert Ad[i, i] == d0[i]


def test_global_elasticity_energy_linear_field():
    lam, mu = lame(PROPS)
    mesh = asm.StructuredMesh(2, 3)
    A = asm.assemble_elasticity(mesh, PROPS)
    G = np.array([[0.2, -0.4], [0.7, 0.1]])
    u = nodal_linear_field(mesh, G)
    want = linear_field_energy(G, lam, mu, 1.0)  # unit square
    assert abs(u @ A @ u - want) <= 1e-9 * abs(want)


# ------------------------------------------------------ pressure coupling


@pytest.mark.parametrize("dim", [2, 3])
def test_pressure_coupling_integrates_divergence(dim):
    mesh = asm.StructuredMesh(dim, 2)
    Apu = asm.assemble_pressure_coupling(mesh, PROPS)
    G = np.random.default_rng(7).standard_normal((dim, dim))
    u = nodal_linear_field(mesh, G)
    per_cell = Apu @ u
    want = PROPS.biot * np.trace(G) * mesh.h ** dim
    assert np.allclose(per_cell, want, atol=1e-12 * max(1, abs(want)))


# ------------------------------------------------------------ rt0 blocks


def test_velocity_mass_constant_field_energy():
    mesh = asm.StructuredMesh(2, 3)
    Mz, fixed = asm.assemble_velocity_mass(mesh, PROPS)
    minus, plus = asm.mfe_face_maps(mesh)
    # e_x on the middle column of cells; the two shared-face functions put
    # linear tails into the neighbor columns, integral (1/3) h^2 per cell
    cells = [mesh.cell_index(np.array([1, j])) for j in range(3)]
    z = np.zeros(Mz.shape[0])
    for c in cells:
        z[minus[c, 0]] = 1.0
        z[plus[c, 0]] = 1.0
    energy = z @ Mz @ z
    want = PROPS.viscosity / PROPS.permeability * 5 * mesh.h ** 2
    assert abs(energy - want) <= 1e-9 * abs(want)


def test_velocity_mass_single_basis_energy():
    mesh = asm.StructuredMesh(2, 4)
    Mz, fixed = asm.assemble_velocity_mass(mesh, PROPS)
    minus, plus = asm.mfe_face_maps(mesh)
    c = mesh.cell_index(np.array([1, 1]))
    dof = plus[c, 1]  # interior face shared with cell (1,2)
    want = 2 * PROPS.viscosity / PROPS.permeability * mesh.h ** 2 / 3
    assert abs(Mz[dof, dof] - want) <= 1e-12 * want


def test_velocity_div_signs_and_magnitude():
    mesh = asm.StructuredMesh(2, 4)
    Dpz = asm.assemble_velocity_div(mesh)
    minus, plus = asm.mfe_face_maps(mesh)
    c = mesh.cell_index(np.array([2, 1]))
    row = Dpz.getrow(c).toarray().ravel()
    h = mesh.h
    assert row[minus[c, 0]] == -h and row[plus[c, 0]] == h
    assert row[minus[c, 1]] == -h and row[plus[c, 1]] == h
    assert np.count_nonzero(row) == 4


def test_face_maps_boundary_conventions():
    mesh = asm.StructuredMesh(2, 4)
    minus, plus = asm.mfe_face_maps(mesh)
    fixed = asm.mfe_fixed_velocity_dofs(mesh)
    # first-layer faces carry no dof at all
    left = mesh.cell_index(np.array([0, 2]))
    assert minus[left, 0] < 0
    # last-layer faces exist but are in the constrained list
    right = mesh.cell_index(np.array([3, 2]))
    assert plus[right, 0] in set(fixed.tolist())
    assert len(fixed) == 2 * 4  # one layer of 4 faces per direction


# ---------------------------------------------------------- stabilization


def test_stabilization_kernel_and_rank_2d():
    mesh = asm.StructuredMesh(2, 4)
    S = asm.assemble_stabilization(mesh, PROPS)
    Sd = S.toarray()
    assert np.allclose(Sd, Sd.T)
    w = np.linalg.eigvalsh(Sd)
    assert w[0] > -1e-12 * w[-1]
    assert np.max(np.abs(Sd @ np.ones(16))) <= 1e-12 * np.abs(Sd).max()
    rank = np.sum(w > 1e-10 * w[-1])
    assert rank == 4 * 3  # four macro cells, rank 3 each


def test_stabilization_kernel_and_rank_3d():
    mesh = asm.StructuredMesh(3, 2)
    S = asm.assemble_stabilization(mesh, PROPS)
    w = np.linalg.eigvalsh(S.toarray())
    rank = np.sum(w > 1e-10 * w[-1])
    assert rank == 7  # single macro of eight cells


def test_stabilization_single_cell_bump_energy():
    mesh = asm.StructuredMesh(2, 2)
    S = asm.assemble_stabilization(mesh, PROPS)
    p = np.zeros(4)
    p[mesh.cell_index(np.array([0, 0]))] = 1.0
    kdr = PROPS.young / (3 * (1 - 2 * PROPS.poisson))
    c_stab = PROPS.biot ** 2 / kdr
    # the bumped cell sees two interior faces of the macro, unit jump each
    want = 2 * c_stab * mesh.h
    assert abs(p @ S @ p - want) <= 1e-12 * want


def test_stabilization_requires_even_grid():
    with pytest.raises(ContractViolationError):
        asm.assemble_stabilization(asm.StructuredMesh(2, 3), PROPS)


# ------------------------------------------------------------- traction


def test_traction_total_force_and_nodal_values():
    mesh = asm.StructuredMesh(2, 2)
    b = asm.traction_rhs(mesh, PROPS)
    by = b[1::2]
    assert abs(by.sum() + PROPS.traction) <= 1e-12 * PROPS.traction
    assert np.all(b[0::2] == 0.0)
    top = [mesh.node_index(np.array([i, 2])) for i in range(3)]
    hv = PROPS.traction * mesh.h / 2
    assert abs(by[top[0]] + hv) < 1e-12 * hv  # corner, one edge
    assert abs(by[top[1]] + 2 * hv) < 1e-12 * hv  # shared by two edges
    inner = mesh.node_index(np.array([1, 1]))
    assert by[inner] == 0.0


def test_traction_3d_total_force():
    mesh = asm.StructuredMesh(3, 2)
    b = asm.traction_rhs(mesh, PROPS)
    bz = b[2::3]
    assert abs(bz.sum() + PROPS.traction) <= 1e-12 * PROPS.traction


# ------------------------------------------------------------ full systems


def test_mfe_sizes_match_published_grid():
    sys = asm.build_mfe_system(asm.StructuredMesh(2, 40), PROPS)
    assert (sys.n, sys.m, sys.p) == (3362, 1600, 3200)


def test_mfe_block_invariants_desk_scale():
    sys = asm.build_mfe_system(asm.StructuredMesh(2, 4), PROPS)
    sys.validate(deep=True)
    # B has full row rank
    s = np.linalg.svd(sys.B.toarray(), compute_uv=False)
    assert s[-1] > 1e-10 * s[0]
    # the assembled operator is symmetric; only the inertia is indefinite
    K = sys.full_matrix().toarray()
    assert np.allclose(K, K.T, atol=1e-9 * np.abs(K).max())


def test_mhfe_sizes_match_published_grids():
    sys = asm.build_mhfe_system(asm.StructuredMesh(3, 10), PROPS)
    assert (sys.n, sys.m, sys.p) == (3993, 1000, 3300)
    nnz = sys.full_matrix().nnz
    assert 2.5e5 < nnz < 4.0e5
    sys20 = asm.build_mhfe_system(asm.StructuredMesh(3, 20), PROPS)
    assert (sys20.n, sys20.m, sys20.p) == (27783, 8000, 25200)
    assert sys20.n + sys20.m + sys20.p == 60983


def test_mhfe_2d_sizes():
    sys = asm.build_mhfe_system(asm.StructuredMesh(2, 40), PROPS)
    assert (sys.n, sys.m, sys.p) == (3362, 1600, 3280)


def test_mhfe_block_invariants_desk_scale():
    sys = asm.build_mhfe_system(asm.StructuredMesh(2, 4), PROPS)
    sys.validate(deep=True)
    wE = np.linalg.eigvalsh(sys.E.toarray())
    assert wE[0] > 0
    wD = np.linalg.eigvalsh(sys.D.toarray())
    assert wD[0] > -1e-14 * wD[-1]


def test_mhfe_condensation_against_dense_elimination():
    mesh = asm.StructuredMesh(2, 4)
    sys = asm.build_mhfe_system(mesh, PROPS)
    blocks = asm.assemble_hybrid_flow(mesh, PROPS)
    dt = PROPS.dt
    Aww = blocks.A_ww.toarray()
    W = blocks.W.toarray()
    Apw = blocks.A_pw.toarray()
    Awl = blocks.A_wpi.toarray()
    # W really is the inverse of the element flux block
    assert np.allclose(Aww @ W, np.eye(len(W)), atol=1e-12)
    # eliminating the element fluxes by hand gives these blocks
    Dp = asm.assemble_stabilization(mesh, PROPS).toarray()
    D_want = Dp + dt * Apw @ W @ Apw.T
    E_want = dt * Awl.T @ W @ Awl
    G = dt * Awl.T @ W @ Apw.T
    scD = np.abs(D_want).max()
    assert np.allclose(sys.D.toarray(), D_want, atol=1e-12 * scD)
    assert np.allclose(sys.E.toarray(), E_want, atol=1e-12 * np.abs(E_want).max())
    # raw elimination couples the multiplier with the opposite orientation;
    # the assembled system flips it to make the last block positive definite
    assert np.allclose(sys.C.toarray(), -G, atol=1e-14 * np.abs(G).max())

    # that flip perturbs the solution by roughly the flow-to-stabilization
    # scale ratio, many orders below these tolerances at benchmark values
    n, m, p = sys.n, sys.m, sys.p
    K_h = np.zeros((n + m + p,) * 2)
    K_h[:n, :n] = sys.A.toarray()
    K_h[:n, n:n + m] = sys.B.T.toarray()
    K_h[n:n + m, :n] = sys.B.toarray()
    K_h[n:n + m, n:n + m] = -D_want
    K_h[n:n + m, n + m:] = G.T
    K_h[n + m:, n:n + m] = G
    K_h[n + m:, n + m:] = -E_want
    g = np.random.default_rng(11)
    rhs = np.r_[g.standard_normal(n), g.standard_normal(m), np.zeros(p)]
    ref = np.linalg.solve(K_h, rhs)
    got = np.linalg.solve(sys.full_matrix().toarray(), rhs)
    scale = np.abs(ref).max()
    assert np.allclose(got, ref, atol=2e-6 * scale)


def test_mfe_and_mhfe_agree_on_primal_solution():
    mesh = asm.StructuredMesh(2, 4)
    s1 = asm.build_mfe_system(mesh, PROPS)
    s2 = asm.build_mhfe_system(mesh, PROPS)
    x1 = np.linalg.solve(s1.full_matrix().toarray(), s1.rhs)
    x2 = np.linalg.solve(s2.full_matrix().toarray(), s2.rhs)
    nm = s1.n + s1.m
    scale = np.abs(x1[:nm]).max()
    assert np.allclose(x1[:nm], x2[:nm], atol=1e-8 * scale)


def test_manufactured_rhs_reproducible_and_bounded():
    sys = asm.build_mfe_system(asm.StructuredMesh(2, 2), PROPS)
    r1 = asm.manufactured_rhs(sys, seed=5)
    r2 = asm.manufactured_rhs(sys, seed=5)
    assert np.array_equal(r1, r2)
    assert r1.shape == (sys.n + sys.m + sys.p,)
    assert np.abs(r1).max() <= 1.0 and np.abs(r1).max() > 0.1
    assert not np.array_equal(r1, asm.manufactured_rhs(sys, seed=6))


def test_system_matvec_matches_full_matrix():
    sys = asm.build_mfe_system(asm.StructuredMesh(2, 4), PROPS)
    g = np.random.default_rng(3)
    x = g.standard_normal(sys.n + sys.m + sys.p)
    assert np.allclose(sys.matvec(x), sys.full_matrix() @ x,
                       atol=1e-12 * np.abs(x).max() * max(1, abs(sys.full_matrix()).max()))
