"""Finite element assembly for a quasi-static poroelastic step on the unit
square or cube, uniform grid.

Two discretizations produce the same 3x3 block layout

    [ A   B^T  0  ] [displacement]   [f_u]
    [ B  -D    C^T] [pressure    ] = [f_p]
    [ 0   C    E  ] [flow        ]   [f_z]

with A the elasticity stiffness (SPD after boundary conditions), D a
stabilized pressure block (SPSD), E a flow block (SPD) and B of full row
rank. In the mixed form the flow unknown is the face-normal flux; in the
hybridized form the element fluxes are condensed out and the flow unknown
is the face pressure multiplier.

Conventions used throughout: continuous bilinear displacement with both
components fixed on the x = 0 side (rows and columns zeroed in place, the
original diagonal kept), piecewise constant pressure, lowest order
face-normal fluxes with no-flow conditions on the whole boundary, and a
uniform downward traction on the top side. Face basis functions use the
global +e_k normal, so a shared face has one dof with a consistent sign in
both neighbor cells.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .errors import (
    CondensationSignError,
    ContractViolationError,
    DimensionError,
)
from .sparse_core import Csr, csr_from_coo, validate_csr


# ------------------------------------------------------------------ inputs


@dataclass(frozen=True)
class MaterialProps:
    """Poroelastic material data and step size, with the benchmark defaults."""

    young: float = 1e5
    poisson: float = 0.4
    biot: float = 1.0
    storage: float = 0.0          # constrained specific storage
    permeability: float = 1e-7
    viscosity: float = 1e3
    dt: float = 1e-5
    traction: float = 1e4         # magnitude of the downward top load

    @property
    def lame_lambda(self) -> float:
        nu = self.poisson
        return self.young * nu / ((1 + nu) * (1 - 2 * nu))

    @property
    def lame_mu(self) -> float:
        return self.young / (2 * (1 + self.poisson))

    @property
    def drained_modulus(self) -> float:
        return self.young / (3 * (1 - 2 * self.poisson))

    @property
    def inv_mobility(self) -> float:
        return self.viscosity / self.permeability


@dataclass(frozen=True)
class StructuredMesh:
    """Uniform grid on the unit box, cells^dim elements."""

    dim: int
    cells: int

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ContractViolationError(f"dim must be 2 or 3, got {self.dim}")
        if self.cells < 1:
            raise ContractViolationError("need at least one cell per side")

    @property
    def h(self) -> float:
        return 1.0 / self.cells

    @property
    def n_cells(self) -> int:
        return self.cells ** self.dim

    @property
    def n_nodes(self) -> int:
        return (self.cells + 1) ** self.dim

    def cell_coords(self) -> np.ndarray:
        idx = np.arange(self.n_cells)
        out = np.empty((self.n_cells, self.dim), dtype=np.int64)
        for k in range(self.dim):
            out[:, k] = idx // self.cells ** k % self.cells
        return out

    def cell_index(self, coords) -> np.ndarray:
        coords = np.asarray(coords)
        weights = self.cells ** np.arange(self.dim)
        return coords @ weights

    def node_index(self, coords) -> np.ndarray:
        coords = np.asarray(coords)
        weights = (self.cells + 1) ** np.arange(self.dim)
        return coords @ weights

    def node_coords(self) -> np.ndarray:
        idx = np.arange(self.n_nodes)
        out = np.empty((self.n_nodes, self.dim))
        for k in range(self.dim):
            out[:, k] = idx // (self.cells + 1) ** k % (self.cells + 1) * self.h
        return out

    def cell_node_ids(self) -> np.ndarray:
        corners = reference_corners(self.dim).astype(np.int64)
        cc = self.cell_coords()
        return self.node_index(cc[:, None, :] + corners[None, :, :])


def reference_corners(dim: int) -> np.ndarray:
    """Unit box corners, first coordinate fastest, shape (2^dim, dim)."""
    out = np.zeros((2 ** dim, dim))
    for a in range(2 ** dim):
        for k in range(dim):
            out[a, k] = (a >> k) & 1
    return out


# -------------------------------------------------------------- elasticity


def isotropic_stress_matrix(dim: int, lam: float, mu: float) -> np.ndarray:
    """Engineering-strain elasticity matrix (plane strain when dim == 2)."""
    nstr = 3 if dim == 2 else 6
    D = np.zeros((nstr, nstr))
    D[:dim, :dim] = lam
    D[np.arange(dim), np.arange(dim)] = lam + 2 * mu
    D[np.arange(dim, nstr), np.arange(dim, nstr)] = mu
    return D


def _shape_gradients(dim: int, h: float, x: np.ndarray) -> np.ndarray:
    """Gradients of the 2^dim multilinear shape functions at point x."""
    line = np.array([1.0 - x / h, x / h])          # (2, dim) values
    dline = np.array([-np.ones(dim) / h, np.ones(dim) / h])
    corners = reference_corners(dim).astype(int)
    grads = np.empty((2 ** dim, dim))
    for a, c in enumerate(corners):
        vals = line[c, np.arange(dim)]
        for k in range(dim):
            g = dline[c[k], k]
            for j in range(dim):
                if j != k:
                    g *= vals[j]
            grads[a, k] = g
    return grads


_SHEAR_PAIRS = {2: [(0, 1)], 3: [(1, 2), (0, 2), (0, 1)]}


def elasticity_local(dim: int, h: float, lam: float, mu: float) -> np.ndarray:
    """Element stiffness on [0,h]^dim, dof order node-major then component."""
    D = isotropic_stress_matrix(dim, lam, mu)
    nshape = 2 ** dim
    ndof = nshape * dim
    nstr = D.shape[0]
    g1 = (np.array([-1.0, 1.0]) / np.sqrt(3.0) + 1.0) / 2.0 * h
    pts = reference_corners(dim)  # reuse the corner pattern to index g1
    Ke = np.zeros((ndof, ndof))
    w = (h / 2.0) ** dim
    for pat in pts.astype(int):
        x = g1[pat]
        grads = _shape_gradients(dim, h, x)
        Bm = np.zeros((nstr, ndof))
        for a in range(nshape):
            for k in range(dim):
                Bm[k, a * dim + k] = grads[a, k]
            for r, (i, j) in enumerate(_SHEAR_PAIRS[dim]):
                Bm[dim + r, a * dim + i] = grads[a, j]
                Bm[dim + r, a * dim + j] = grads[a, i]
        Ke += w * Bm.T @ D @ Bm
    return Ke


def _element_dofs(mesh: StructuredMesh) -> np.ndarray:
    nodes = mesh.cell_node_ids()
    d = mesh.dim
    return (nodes[:, :, None] * d + np.arange(d)).reshape(mesh.n_cells, -1)


def assemble_elasticity(mesh: StructuredMesh, props: MaterialProps) -> Csr:
    Ke = elasticity_local(mesh.dim, mesh.h, props.lame_lambda, props.lame_mu)
    dofs = _element_dofs(mesh)
    ndl = dofs.shape[1]
    rows = np.repeat(dofs, ndl, axis=1).ravel()
    cols = np.tile(dofs, (1, ndl)).ravel()
    vals = np.tile(Ke.ravel(), mesh.n_cells)
    n = mesh.n_nodes * mesh.dim
    return csr_from_coo(rows, cols, vals, (n, n))


def displacement_fixed_dofs(mesh: StructuredMesh) -> np.ndarray:
    """Both displacement components on the x = 0 side."""
    coords = mesh.node_coords()
    nodes = np.flatnonzero(coords[:, 0] == 0.0)
    return (nodes[:, None] * mesh.dim + np.arange(mesh.dim)).ravel()


def traction_rhs(mesh: StructuredMesh, props: MaterialProps) -> np.ndarray:
    """Downward surface load on the top side, lumped through the element
    traces. Constrained dofs are not zeroed here."""
    d, nc, h = mesh.dim, mesh.cells, mesh.h
    b = np.zeros(mesh.n_nodes * d)
    corners = reference_corners(d - 1).astype(np.int64)
    # faces of the top side form a (d-1)-dimensional uniform grid
    nfar = nc ** (d - 1)
    idx = np.arange(nfar)
    fc = np.empty((nfar, d - 1), dtype=np.int64)
    for k in range(d - 1):
        fc[:, k] = idx // nc ** k % nc
    load = -props.traction * h ** (d - 1) / 2 ** (d - 1)
    for corner in corners:
        vc = np.column_stack([fc + corner, np.full(nfar, nc, dtype=np.int64)])
        nid = mesh.node_index(vc)
        np.add.at(b, nid * d + (d - 1), load)
    return b


# ------------------------------------------------------ in-place constraints


def _selector(n: int, dofs: np.ndarray) -> sp.dia_matrix:
    keep = np.ones(n)
    keep[dofs] = 0.0
    return sp.diags(keep)


def symmetric_constrain(M: Csr, dofs: np.ndarray) -> Csr:
    """Zero the rows and columns of the listed dofs but keep the original
    diagonal entries, preserving symmetry and definiteness."""
    n = M.shape[0]
    S = _selector(n, dofs)
    restore = np.zeros(n)
    restore[dofs] = M.diagonal()[dofs]
    return (S @ M @ S + sp.diags(restore)).tocsr()


def zero_columns(M, dofs: np.ndarray) -> Csr:
    return (M @ _selector(M.shape[1], dofs)).tocsr()


def zero_rows(M, dofs: np.ndarray) -> Csr:
    return (_selector(M.shape[0], dofs) @ M).tocsr()


# ------------------------------------------------------- pressure coupling


def assemble_pressure_coupling(mesh: StructuredMesh, props: MaterialProps) -> Csr:
    """Volumetric coupling block: row per cell, integral of the displacement
    divergence times the coupling coefficient."""
    d, h = mesh.dim, mesh.h
    signs = 2.0 * reference_corners(d) - 1.0            # (2^d, d)
    local = (signs * props.biot * (h / 2.0) ** (d - 1)).ravel()
    dofs = _element_dofs(mesh)
    rows = np.repeat(np.arange(mesh.n_cells), dofs.shape[1])
    return csr_from_coo(rows, dofs.ravel(), np.tile(local, mesh.n_cells),
                        (mesh.n_cells, mesh.n_nodes * d))


# ------------------------------------------------------------- mixed flow


def _cross_index(mesh: StructuredMesh, coords: np.ndarray, k: int) -> np.ndarray:
    """Lexicographic index over all directions except k."""
    cross = np.zeros(len(coords), dtype=np.int64)
    mult = 1
    for j in range(mesh.dim):
        if j == k:
            continue
        cross += coords[:, j] * mult
        mult *= mesh.cells
    return cross


def mfe_face_maps(mesh: StructuredMesh) -> Tuple[np.ndarray, np.ndarray]:
    """Flux dof of the minus and plus face of each cell per direction.

    Per direction the face layers run 0..cells; layer 0 carries no dof (the
    no-flow condition there is built into the space, entry -1) and layers
    1..cells are numbered consecutively, so each direction owns cells^dim
    dofs.
    """
    d, nc = mesh.dim, mesh.cells
    coords = mesh.cell_coords()
    stride = nc ** (d - 1)
    minus = np.empty((mesh.n_cells, d), dtype=np.int64)
    plus = np.empty((mesh.n_cells, d), dtype=np.int64)
    for k in range(d):
        cross = _cross_index(mesh, coords, k)
        base = k * nc ** d
        lay = coords[:, k]
        minus[:, k] = np.where(lay == 0, -1, base + (lay - 1) * stride + cross)
        plus[:, k] = base + lay * stride + cross
    return minus, plus


def mfe_fixed_velocity_dofs(mesh: StructuredMesh) -> np.ndarray:
    """Dofs of the last face layer per direction, constrained in place."""
    d, nc = mesh.dim, mesh.cells
    stride = nc ** (d - 1)
    out = []
    for k in range(d):
        base = k * nc ** d + (nc - 1) * stride
        out.append(base + np.arange(stride))
    return np.concatenate(out)


def _n_flux_dofs(mesh: StructuredMesh) -> int:
    return mesh.dim * mesh.cells ** mesh.dim


def assemble_velocity_mass(mesh: StructuredMesh,
                           props: MaterialProps) -> Tuple[Csr, np.ndarray]:
    """Flux mass matrix weighted by viscosity over permeability, plus the
    list of constrained dofs (not yet applied)."""
    d, h = mesh.dim, mesh.h
    s = props.inv_mobility * h ** d
    minus, plus = mfe_face_maps(mesh)
    rows, cols, vals = [], [], []
    for k in range(d):
        dm, dp = minus[:, k], plus[:, k]
        for r, c, v in ((dm, dm, s / 3), (dm, dp, s / 6),
                        (dp, dm, s / 6), (dp, dp, s / 3)):
            rows.append(r)
            cols.append(c)
            vals.append(np.full(mesh.n_cells, v))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    keep = (rows >= 0) & (cols >= 0)
    p = _n_flux_dofs(mesh)
    M = csr_from_coo(rows[keep], cols[keep], vals[keep], (p, p))
    return M, mfe_fixed_velocity_dofs(mesh)


def assemble_velocity_div(mesh: StructuredMesh) -> Csr:
    """Cell integrals of the flux divergence: row per cell, +-h^(dim-1) on
    the plus and minus face dofs."""
    d, h = mesh.dim, mesh.h
    area = h ** (d - 1)
    minus, plus = mfe_face_maps(mesh)
    cells = np.arange(mesh.n_cells)
    rows, cols, vals = [], [], []
    for k in range(d):
        rows += [cells, cells]
        cols += [minus[:, k], plus[:, k]]
        vals += [np.full(mesh.n_cells, -area), np.full(mesh.n_cells, area)]
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    keep = cols >= 0
    return csr_from_coo(rows[keep], cols[keep], vals[keep],
                        (mesh.n_cells, _n_flux_dofs(mesh)))


# ------------------------------------------------------------ stabilization


def assemble_stabilization(mesh: StructuredMesh, props: MaterialProps) -> Csr:
    """Pressure jump penalty over non-overlapping 2x2(x2) macro cells,
    weighted by the squared coupling coefficient over the drained modulus."""
    nc, d, h = mesh.cells, mesh.dim, mesh.h
    if nc % 2:
        raise ContractViolationError(
            "jump stabilization needs an even number of cells per side")
    c = props.biot ** 2 / props.drained_modulus * h ** (d - 1)
    coords = mesh.cell_coords()
    rows, cols, vals = [], [], []
    for k in range(d):
        sel = coords[:, k] % 2 == 0
        i = self_idx = mesh.cell_index(coords[sel])
        j = self_idx + nc ** k
        rows += [i, j, i, j]
        cols += [i, j, j, i]
        nfc = len(i)
        vals += [np.full(nfc, c), np.full(nfc, c),
                 np.full(nfc, -c), np.full(nfc, -c)]
    m = mesh.n_cells
    return csr_from_coo(np.concatenate(rows), np.concatenate(cols),
                        np.concatenate(vals), (m, m))


# ------------------------------------------------------------ hybrid flow


@dataclass
class HybridFlowBlocks:
    """Primitive blocks of the hybridized flow problem before condensation.

    A_ww couples the per-element fluxes (block diagonal), A_pw integrates
    their divergence against cell pressures, A_wpi couples them to the face
    multipliers, and W is the exact inverse of A_ww.
    """

    A_ww: Csr
    W: Csr
    A_pw: Csr
    A_wpi: Csr


def _multiplier_count(mesh: StructuredMesh) -> int:
    return mesh.dim * (mesh.cells + 1) * mesh.cells ** (mesh.dim - 1)


def _multiplier_ids(mesh: StructuredMesh, coords: np.ndarray,
                    k: int, layer: np.ndarray) -> np.ndarray:
    nc = mesh.cells
    stride = nc ** (mesh.dim - 1)
    base = k * (nc + 1) * stride
    return base + layer * stride + _cross_index(mesh, coords, k)


def assemble_hybrid_flow(mesh: StructuredMesh,
                         props: MaterialProps) -> HybridFlowBlocks:
    d, h = mesh.dim, mesh.h
    ne = mesh.n_cells
    nw = 2 * d * ne
    area = h ** (d - 1)
    s = props.inv_mobility * h ** d
    coords = mesh.cell_coords()
    cells = np.arange(ne)

    ww_rows, ww_cols, ww_vals = [], [], []
    wi_rows, wi_cols, wi_vals = [], [], []
    pw_rows, pw_cols, pw_vals = [], [], []
    iw_rows, iw_cols, iw_vals = [], [], []
    for k in range(d):
        wm = cells * 2 * d + 2 * k
        wp = wm + 1
        for r, c, v in ((wm, wm, s / 3), (wm, wp, s / 6),
                        (wp, wm, s / 6), (wp, wp, s / 3)):
            ww_rows.append(r)
            ww_cols.append(c)
            ww_vals.append(np.full(ne, v))
        # exact 2x2 inverse of the direction block
        si = 1.0 / (props.inv_mobility * h ** d)
        for r, c, v in ((wm, wm, 4 * si), (wm, wp, -2 * si),
                        (wp, wm, -2 * si), (wp, wp, 4 * si)):
            wi_rows.append(r)
            wi_cols.append(c)
            wi_vals.append(np.full(ne, v))
        pw_rows += [cells, cells]
        pw_cols += [wm, wp]
        pw_vals += [np.full(ne, -area), np.full(ne, area)]
        fm = _multiplier_ids(mesh, coords, k, coords[:, k])
        fp = _multiplier_ids(mesh, coords, k, coords[:, k] + 1)
        iw_rows += [wm, wp]
        iw_cols += [fm, fp]
        iw_vals += [np.full(ne, -area), np.full(ne, area)]

    p = _multiplier_count(mesh)
    A_ww = csr_from_coo(np.concatenate(ww_rows), np.concatenate(ww_cols),
                        np.concatenate(ww_vals), (nw, nw))
    W = csr_from_coo(np.concatenate(wi_rows), np.concatenate(wi_cols),
                     np.concatenate(wi_vals), (nw, nw))
    A_pw = csr_from_coo(np.concatenate(pw_rows), np.concatenate(pw_cols),
                        np.concatenate(pw_vals), (ne, nw))
    A_wpi = csr_from_coo(np.concatenate(iw_rows), np.concatenate(iw_cols),
                         np.concatenate(iw_vals), (nw, p))
    return HybridFlowBlocks(A_ww, W, A_pw, A_wpi)


# ------------------------------------------------------------ block system


@dataclass
class DspSystem:
    """Assembled double saddle-point system with its right-hand side."""

    A: Csr
    B: Csr
    C: Csr
    D: Csr
    E: Csr
    rhs: np.ndarray
    meta: Dict = field(default_factory=dict)
    _full: Optional[Csr] = field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.D.shape[0]

    @property
    def p(self) -> int:
        return self.E.shape[0]

    @property
    def total(self) -> int:
        return self.n + self.m + self.p

    def split(self, x: np.ndarray):
        n, m = self.n, self.m
        return x[:n], x[n:n + m], x[n + m:]

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x1, x2, x3 = self.split(x)
        r1 = self.A @ x1 + self.B.T @ x2
        r2 = self.B @ x1 - self.D @ x2 + self.C.T @ x3
        r3 = self.C @ x2 + self.E @ x3
        return np.concatenate([r1, r2, r3])

    def full_matrix(self) -> Csr:
        if self._full is None:
            self._full = sp.bmat(
                [[self.A, self.B.T, None],
                 [self.B, -self.D, self.C.T],
                 [None, self.C, self.E]], format="csr")
        return self._full

    def validate(self, deep: bool = False) -> None:
        n, m, p = self.n, self.m, self.p
        if self.A.shape != (n, n) or self.D.shape != (m, m) or self.E.shape != (p, p):
            raise DimensionError("diagonal blocks must be square")
        if self.B.shape != (m, n):
            raise DimensionError(f"B shape {self.B.shape}, expected {(m, n)}")
        if self.C.shape != (p, m):
            raise DimensionError(f"C shape {self.C.shape}, expected {(p, m)}")
        if self.rhs.shape != (self.total,):
            raise DimensionError("right-hand side length mismatch")
        if n < max(m, p):
            raise ContractViolationError(
                f"expected n >= max(m, p), got n={n}, m={m}, p={p}")
        validate_csr(self.A, symmetric=True)
        validate_csr(self.D, symmetric=True)
        validate_csr(self.E, symmetric=True)
        if deep:
            wa = np.linalg.eigvalsh(self.A.toarray())
            if wa[0] <= 0:
                raise ContractViolationError(
                    f"displacement block not SPD, min eig {wa[0]:.3e}")
            we = np.linalg.eigvalsh(self.E.toarray())
            if we[0] <= 0:
                raise ContractViolationError(
                    f"flow block not SPD, min eig {we[0]:.3e}")
            wd = np.linalg.eigvalsh(self.D.toarray())
            if wd[0] < -1e-12 * max(1.0, wd[-1]):
                raise ContractViolationError(
                    f"pressure block not SPSD, min eig {wd[0]:.3e}")
            sv = np.linalg.svd(self.B.toarray(), compute_uv=False)
            if sv[-1] <= 1e-12 * sv[0]:
                raise ContractViolationError("coupling block is row rank deficient")


def _pressure_mass_diag(mesh: StructuredMesh, props: MaterialProps) -> Csr:
    val = props.storage * mesh.h ** mesh.dim
    return sp.diags(np.full(mesh.n_cells, val)).tocsr()


def build_mfe_system(mesh: StructuredMesh, props: MaterialProps) -> DspSystem:
    """Mixed form: flow unknowns are the face-normal fluxes."""
    fixed_u = displacement_fixed_dofs(mesh)
    A = symmetric_constrain(assemble_elasticity(mesh, props), fixed_u)
    Apu = zero_columns(assemble_pressure_coupling(mesh, props), fixed_u)
    B = (-Apu).tocsr()
    Mz, fixed_z = assemble_velocity_mass(mesh, props)
    E = (props.dt * symmetric_constrain(Mz, fixed_z)).tocsr()
    Dpz = zero_columns(assemble_velocity_div(mesh), fixed_z)
    C = (-props.dt * Dpz.T).tocsr()
    D = (_pressure_mass_diag(mesh, props)
         + assemble_stabilization(mesh, props)).tocsr()
    bu = traction_rhs(mesh, props)
    bu[fixed_u] = 0.0
    rhs = np.concatenate([bu, np.zeros(mesh.n_cells), np.zeros(E.shape[0])])
    meta = {"method": "mfe", "dim": mesh.dim, "cells": mesh.cells,
            "props": props}
    return DspSystem(A, B, C, D, E, rhs, meta)


def build_mhfe_system(mesh: StructuredMesh, props: MaterialProps,
                      check_spsd: str = "auto") -> DspSystem:
    """Hybridized form: element fluxes condensed out exactly, flow unknowns
    are the face multipliers.

    The condensed pressure block gains dt * A_pw W A_pw^T, and the sign
    conventions are arranged so the assembled system matches the layout with
    E positive definite; the multiplier then solves with flipped sign
    relative to the uncondensed form, which affects nothing downstream.
    """
    fixed_u = displacement_fixed_dofs(mesh)
    A = symmetric_constrain(assemble_elasticity(mesh, props), fixed_u)
    Apu = zero_columns(assemble_pressure_coupling(mesh, props), fixed_u)
    B = (-Apu).tocsr()
    blocks = assemble_hybrid_flow(mesh, props)
    dt = props.dt
    WApwT = (blocks.W @ blocks.A_pw.T).tocsr()
    E = (dt * (blocks.A_wpi.T @ (blocks.W @ blocks.A_wpi))).tocsr()
    C = (-dt * (blocks.A_wpi.T @ WApwT)).tocsr()
    D = (_pressure_mass_diag(mesh, props)
         + assemble_stabilization(mesh, props)
         + dt * (blocks.A_pw @ WApwT)).tocsr()
    D = ((D + D.T) / 2.0).tocsr()  # kill roundoff asymmetry from the products
    E = ((E + E.T) / 2.0).tocsr()
    if check_spsd == "always" or (check_spsd == "auto" and D.shape[0] <= 512):
        wd = np.linalg.eigvalsh(D.toarray())
        if wd[0] < -1e-12 * max(1.0, wd[-1]):
            raise CondensationSignError(
                f"condensed pressure block lost semidefiniteness: {wd[0]:.3e}")
    bu = traction_rhs(mesh, props)
    bu[fixed_u] = 0.0
    rhs = np.concatenate([bu, np.zeros(mesh.n_cells), np.zeros(E.shape[0])])
    meta = {"method": "mhfe", "dim": mesh.dim, "cells": mesh.cells,
            "props": props}
    return DspSystem(A, B, C, D, E, rhs, meta)


def manufactured_rhs(system: DspSystem, seed: int = 0,
                     kind: str = "uniform") -> np.ndarray:
    """Reproducible right-hand side for solver experiments."""
    if kind == "uniform":
        g = np.random.default_rng(seed)
        return g.uniform(-1.0, 1.0, system.total)
    if kind == "ones":
        return np.ones(system.total)
    raise ContractViolationError(f"unknown rhs kind {kind!r}")
