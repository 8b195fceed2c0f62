"""Dense Galerkin assembly of the boundary integral operators.

Entries follow the e^{-i omega t} convention:

  Z_E[i,j] = ik eta [ <f_i, g f_j> - (1/k^2) <div f_i, g div f_j> ]
  Z_H[i,j] = -(1/2) <f_i, f_j> - <n x f_i, P.V. grad g x f_j>
  Z_C      = alpha Z_E + (1-alpha) eta Z_H
  K_C      = alpha Re(Z_E) + (1-alpha) i eta Im(Z_H)

The EFIE form is the mixed-potential Galerkin discretization, algebraically
equal to the rotated-operator n x RWG tested form for div-conforming bases.

Element pairs are integrated in three tiers: smooth (7-point x 7-point),
near non-touching (16 x 16), and vertex-sharing pairs by singularity
extraction with closed-form static moments.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .basis import RwgSpace
from .kernels import (
    FOUR_PI,
    Medium,
    QuadRule,
    SEVEN_POINT_RULE,
    SIXTEEN_POINT_RULE,
    green_smooth,
    grad_green_smooth_radial,
    singular_patch_integrals,
)


@dataclass(frozen=True)
class AssemblyConfig:
    """Quadrature selection and CFIE/testing options."""

    alpha: float = 0.5
    mfie_testing: str = "nxrwg"  # or "bc"
    far_rule: QuadRule = SEVEN_POINT_RULE
    near_rule: QuadRule = SIXTEEN_POINT_RULE
    near_factor: float = 2.0  # centroid distance below near_factor * diameter
    obs_chunk: int = 64
    pair_chunk: int = 2048

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if self.mfie_testing not in ("nxrwg", "bc"):
            raise ValueError("mfie_testing must be 'nxrwg' or 'bc'")


DEFAULT_CONFIG = AssemblyConfig()


def _guarded_green(R, k):
    """Kernel with coincident points zeroed; self-pair values computed this
    way are exactly cancelled by the matching subtraction in the
    singular-pair tier, so the guard never reaches the final matrix."""
    zero = R == 0.0
    Rs = np.where(zero, 1.0, R)
    g = np.exp(1j * k * Rs) / (FOUR_PI * Rs)
    g[zero] = 0.0
    return g


def _touching_pairs(mesh) -> np.ndarray:
    """All ordered triangle pairs sharing at least one vertex (self included)."""
    by_vertex: dict[int, list[int]] = {}
    for t, tri in enumerate(mesh.triangles):
        for v in tri:
            by_vertex.setdefault(int(v), []).append(t)
    pairs = set()
    for tris in by_vertex.values():
        for a in tris:
            for b in tris:
                pairs.add((a, b))
    out = np.array(sorted(pairs), dtype=np.int64)
    return out.reshape(-1, 2)


def _near_pairs(mesh, near_factor: float, touching: np.ndarray) -> np.ndarray:
    """Ordered non-touching pairs with centroid distance below
    near_factor times the larger triangle diameter."""
    c = mesh.centroids
    d = mesh.diameters()
    thresh = near_factor * np.maximum(d[:, None], d[None, :])
    dist = np.linalg.norm(c[:, None, :] - c[None, :, :], axis=-1)
    mask = dist < thresh
    mask[touching[:, 0], touching[:, 1]] = False
    idx = np.argwhere(mask)
    return idx.astype(np.int64)


def _scatter(Z, rows_e, cols_e, block):
    """Accumulate contributions; index arrays broadcast to block's shape."""
    np.add.at(Z, (rows_e, cols_e), block)


def _efie_blocks(po, wo, fo, do, ps, ws, fs, ds, k):
    """Mixed-potential pair blocks for observation/source point sets.

    po: (c, q, 3) obs points, wo: (c, q), fo: (c, 3, q, 3), do: (c, 3)
    ps, ws, fs, ds analogous with (s, p, ...); returns (c, 3, s, 3) complex
    of  <f_i, g f_j> - (1/k^2) <div_i, g div_j>  over the pair.
    """
    d = po[:, :, None, None, :] - ps[None, None, :, :, :]
    R = np.linalg.norm(d, axis=-1)
    g = _guarded_green(R, k)
    gw = g * wo[:, :, None, None] * ws[None, None, :, :]
    inner = np.einsum("cqsp,sjpx->cqsjx", gw, fs, optimize=True)
    pot = np.einsum("ciqx,cqsjx->cisj", fo, inner, optimize=True)
    gsum = gw.sum(axis=(1, 3))
    div = do[:, :, None, None] * ds[None, None, :, :] * gsum[:, None, :, None]
    return pot - div / k**2


def assemble_efie_core(space: RwgSpace, k, eta, config: AssemblyConfig = DEFAULT_CONFIG):
    """EFIE impedance matrix at (possibly complex) wavenumber k."""
    mesh = space.mesh
    far = space.triangle_quadrature(config.far_rule)
    near = space.triangle_quadrature(config.near_rule)
    n = space.num_functions
    nt = mesh.num_triangles
    Z = np.zeros((n, n), dtype=np.complex128)
    pref = 1j * k * eta

    touching = _touching_pairs(mesh)
    near_list = _near_pairs(mesh, config.near_factor, touching)

    # tier 1: every pair with the smooth far rule
    for lo in range(0, nt, config.obs_chunk):
        hi = min(lo + config.obs_chunk, nt)
        sl = slice(lo, hi)
        block = _efie_blocks(
            far.points[sl], far.weights[sl], far.basis[sl], far.div[sl],
            far.points, far.weights, far.basis, far.div, k,
        )
        _scatter(Z, space.tri_edges[sl][:, :, None, None],
                 space.tri_edges[None, None, :, :], pref * block)

    # tier 2: near pairs, replace far-rule value with near-rule value
    for lo in range(0, len(near_list), config.pair_chunk):
        pl = near_list[lo : lo + config.pair_chunk]
        o, s = pl[:, 0], pl[:, 1]
        fine = _efie_pair_values(near, near, o, s, k)
        coarse = _efie_pair_values(far, far, o, s, k)
        _scatter(Z, space.tri_edges[o][:, :, None],
                 space.tri_edges[s][:, None, :], pref * (fine - coarse))

    # tier 3: touching pairs, replace with singularity-extracted value
    for lo in range(0, len(touching), config.pair_chunk):
        pl = touching[lo : lo + config.pair_chunk]
        o, s = pl[:, 0], pl[:, 1]
        fine = _efie_pair_extracted(space, near, far, o, s, k)
        coarse = _efie_pair_values(far, far, o, s, k)
        _scatter(Z, space.tri_edges[o][:, :, None],
                 space.tri_edges[s][:, None, :], pref * (fine - coarse))

    if not np.all(np.isfinite(Z)):
        bad = np.argwhere(~np.isfinite(Z))[0]
        raise FloatingPointError(f"non-finite EFIE entry at {tuple(bad)}")
    # The solver works in the engineering time convention (conjugate of the
    # physics-convention integral above) so that inductive modes carry
    # positive characteristic values; see the symmetrization note as well.
    np.conj(Z, out=Z)
    # enforce the exact reciprocity symmetry of the continuous kernel
    Z += Z.T
    Z *= 0.5
    return Z


def _efie_pair_values(qo, qs, o, s, k):
    """Pairwise (npair, 3, 3) mixed-potential values with plain quadrature."""
    d = qo.points[o][:, :, None, :] - qs.points[s][:, None, :, :]
    R = np.linalg.norm(d, axis=-1)
    g = _guarded_green(R, k)
    gw = g * qo.weights[o][:, :, None] * qs.weights[s][:, None, :]
    pot = np.einsum("niqx,nqp,njpx->nij", qo.basis[o], gw, qs.basis[s], optimize=True)
    div = (
        qo.div[o][:, :, None]
        * qs.div[s][:, None, :]
        * gw.sum(axis=(1, 2))[:, None, None]
    )
    return pot - div / k**2


def _efie_pair_extracted(space, qo, qs, o, s, k):
    """Singularity-extracted (npair, 3, 3) values for touching pairs:
    smooth remainder by quadrature, 1/R and constant terms in closed form."""
    mesh = space.mesh
    xo = qo.points[o]  # (n, Q, 3)
    wo = qo.weights[o]
    src_tri = mesh.vertices[mesh.triangles[s]]  # (n, 3, 3)

    # smooth remainder (e^{ikR} - 1 - ikR)/4piR via source quadrature
    d = xo[:, :, None, :] - qs.points[s][:, None, :, :]
    R = np.linalg.norm(d, axis=-1)
    gs = green_smooth(R, k) * qs.weights[s][:, None, :]
    inner_vec = np.einsum("nqp,njpx->nqjx", gs, qs.basis[s], optimize=True)
    inner_scal = gs.sum(axis=2)[:, :, None] * qs.div[s][:, None, :]  # (n,Q,3)

    # closed-form static moments, one per (pair, obs point)
    mom = singular_patch_integrals(src_tri[:, None, :, :], xo)
    L = space.edge_lengths[space.tri_edges[s]]
    cj = space.tri_signs[s] * L / (2.0 * mesh.areas[s][:, None])  # (n,3)
    vj = mesh.vertices[space.tri_free_vertex[s]]  # (n,3,3)
    static_vec = (
        cj[:, None, :, None]
        * (mom.rp_over_r[:, :, None, :] - vj[:, None, :, :] * mom.one_over_r[:, :, None, None])
        / FOUR_PI
    )
    static_scal = qs.div[s][:, None, :] * mom.one_over_r[:, :, None] / FOUR_PI

    # constant term ik/4pi: exact integrals of f_j and div f_j
    A = mesh.areas[s]
    int_f = cj[:, :, None] * A[:, None, None] * (mesh.centroids[s][:, None, :] - vj)
    const_vec = (1j * k / FOUR_PI) * int_f  # (n,3,3)
    const_scal = (1j * k / FOUR_PI) * qs.div[s] * A[:, None]  # (n,3)

    ivec = inner_vec + static_vec + const_vec[:, None, :, :]
    iscal = inner_scal + static_scal + const_scal[:, None, :]

    fo = qo.basis[o]  # (n,3,Q,3)
    pot = np.einsum("nq,niqx,nqjx->nij", wo, fo, ivec, optimize=True)
    div = np.einsum("nq,ni,nqj->nij", wo, qo.div[o], iscal, optimize=True)
    return pot - div / k**2


def assemble_efie(space: RwgSpace, medium: Medium, config: AssemblyConfig = DEFAULT_CONFIG):
    return assemble_efie_core(space, medium.k, medium.eta, config)


# ---------------------------------------------------------------------------
# MFIE
# ---------------------------------------------------------------------------


def _gram_matrix(space: RwgSpace) -> np.ndarray:
    """Exact <f_i, f_j> Gram matrix (3-point edge-midpoint rule, degree 2)."""
    from .kernels import MIDPOINT_RULE

    data = space.triangle_quadrature(MIDPOINT_RULE)
    n = space.num_functions
    G = np.zeros((n, n))
    blocks = np.einsum("tq,tiqx,tjqx->tij", data.weights, data.basis, data.basis)
    np.add.at(
        G,
        (space.tri_edges[:, :, None], space.tri_edges[:, None, :]),
        blocks,
    )
    return G


def _k_blocks(test_vals, po, wo, ps, ws, fs, k):
    """Pairwise <t_i, grad g x f_j> blocks with plain quadrature.

    test_vals: (n, 3, Q, 3) rotated test functions at obs points.
    """
    d = po[:, :, None, :] - ps[:, None, :, :]
    R = np.linalg.norm(d, axis=-1)
    g = np.exp(1j * k * R) / (FOUR_PI * R)
    radial = (1j * k * R - 1.0) * g / R**2  # d/dR of g divided by R
    gw = radial * wo[:, :, None] * ws[:, None, :]
    cross = np.cross(d[:, :, :, None, :], fs[:, None, :, :, :].swapaxes(2, 3))
    # cross: (n, Q, P, 3src, 3)
    return np.einsum("nqp,niqx,nqpjx->nij", gw, test_vals, cross, optimize=True)


def _k_blocks_extracted(space, test_vals, xo, wo, qs, s, k):
    """Singularity-extracted <t_i, P.V. grad g x f_j> for touching pairs."""
    mesh = space.mesh
    src_tri = mesh.vertices[mesh.triangles[s]]

    d = xo[:, :, None, :] - qs.points[s][:, None, :, :]
    R = np.linalg.norm(d, axis=-1)
    np.maximum(R, 1e-300, out=R)
    radial = grad_green_smooth_radial(R, k) / R
    gw = radial * wo[:, :, None] * qs.weights[s][:, None, :]
    cross = np.cross(d[:, :, :, None, :], qs.basis[s][:, None, :, :, :].swapaxes(2, 3))
    smooth = np.einsum("nqp,niqx,nqpjx->nij", gw, test_vals, cross, optimize=True)

    # static part: -(1/4pi) int (r-r')/R^3 x c_j (r'-v_j)
    #            = -(c_j/4pi) [int (r-r')/R^3 dA'] x (r - v_j)
    mom = singular_patch_integrals(src_tri[:, None, :, :], xo)
    L = space.edge_lengths[space.tri_edges[s]]
    cj = space.tri_signs[s] * L / (2.0 * mesh.areas[s][:, None])
    vj = mesh.vertices[space.tri_free_vertex[s]]
    arm = xo[:, :, None, :] - vj[:, None, :, :]  # (n,Q,3src,3)
    stat = -np.cross(mom.grad_one_over_r[:, :, None, :], arm) * cj[:, None, :, None] / FOUR_PI
    static = np.einsum("nq,niqx,nqjx->nij", wo, test_vals, stat, optimize=True)
    return smooth + static


def assemble_mfie(space: RwgSpace, medium: Medium, config: AssemblyConfig = DEFAULT_CONFIG):
    """MFIE matrix Z_H; default testing rotates RWG functions in place."""
    if config.mfie_testing == "bc":
        raise NotImplementedError(
            "BC-tested MFIE is assembled via calderon.assemble_mfie_bc"
        )
    mesh = space.mesh
    k = medium.k
    far = space.triangle_quadrature(config.far_rule)
    near = space.triangle_quadrature(config.near_rule)
    n = space.num_functions
    nt = mesh.num_triangles

    K = np.zeros((n, n), dtype=np.complex128)
    rot_far = np.cross(mesh.normals[:, None, None, :], far.basis)
    rot_near = np.cross(mesh.normals[:, None, None, :], near.basis)

    touching = _touching_pairs(mesh)
    near_list = _near_pairs(mesh, config.near_factor, touching)

    for lo in range(0, nt, config.obs_chunk):
        hi = min(lo + config.obs_chunk, nt)
        o = np.arange(lo, hi)
        oo = np.repeat(o, nt)
        ss = np.tile(np.arange(nt), hi - lo)
        keep = oo != ss  # self pair contributes exactly zero
        oo, ss = oo[keep], ss[keep]
        for plo in range(0, len(oo), config.pair_chunk * 8):
            osl = oo[plo : plo + config.pair_chunk * 8]
            ssl = ss[plo : plo + config.pair_chunk * 8]
            block = _k_blocks(
                rot_far[osl], far.points[osl], far.weights[osl],
                far.points[ssl], far.weights[ssl], far.basis[ssl], k,
            )
            _scatter(K, space.tri_edges[osl][:, :, None],
                     space.tri_edges[ssl][:, None, :], block)

    for lo in range(0, len(near_list), config.pair_chunk):
        pl = near_list[lo : lo + config.pair_chunk]
        o, s = pl[:, 0], pl[:, 1]
        fine = _k_blocks(
            rot_near[o], near.points[o], near.weights[o],
            near.points[s], near.weights[s], near.basis[s], k,
        )
        coarse = _k_blocks(
            rot_far[o], far.points[o], far.weights[o],
            far.points[s], far.weights[s], far.basis[s], k,
        )
        _scatter(K, space.tri_edges[o][:, :, None],
                 space.tri_edges[s][:, None, :], fine - coarse)

    touch_ns = touching[touching[:, 0] != touching[:, 1]]
    for lo in range(0, len(touch_ns), config.pair_chunk):
        pl = touch_ns[lo : lo + config.pair_chunk]
        o, s = pl[:, 0], pl[:, 1]
        fine = _k_blocks_extracted(
            space, rot_near[o], near.points[o], near.weights[o], near, s, k
        )
        coarse = _k_blocks(
            rot_far[o], far.points[o], far.weights[o],
            far.points[s], far.weights[s], far.basis[s], k,
        )
        _scatter(K, space.tri_edges[o][:, :, None],
                 space.tri_edges[s][:, None, :], fine - coarse)

    Z_H = -0.5 * _gram_matrix(space) - np.conj(K)  # engineering convention
    if not np.all(np.isfinite(Z_H)):
        raise FloatingPointError("non-finite MFIE entry")
    return Z_H


# ---------------------------------------------------------------------------
# CFIE combination, splits, right-hand side
# ---------------------------------------------------------------------------


def real_imag_split(Z):
    """Entrywise Z = R + iX with R, X real."""
    return np.real(Z).copy(), np.imag(Z).copy()


def assemble_cfie(Z_E, Z_H, medium: Medium, alpha: float):
    """Combination Z_C = alpha Z_E + (1-alpha) eta Z_H and the weighting
    matrix K_C = alpha Re Z_E + (1-alpha) i eta Im Z_H."""
    if Z_E.shape != Z_H.shape:
        raise ValueError("EFIE/MFIE matrix dimension mismatch")
    eta = medium.eta
    Z_C = alpha * Z_E + (1.0 - alpha) * eta * Z_H
    K_C = alpha * np.real(Z_E) + 1j * (1.0 - alpha) * eta * np.imag(Z_H)
    return Z_C, K_C.astype(np.complex128)


def assemble_rhs(space: RwgSpace, medium: Medium, wave, alpha: float,
                 config: AssemblyConfig = DEFAULT_CONFIG):
    """Tested incident-field vector
    F_inc[i] = -alpha <f_i, E_inc> + (1-alpha) eta <n x f_i, H_inc>."""
    mesh = space.mesh
    data = space.triangle_quadrature(config.far_rule)
    E = wave.e_field(data.points.reshape(-1, 3), medium).reshape(data.points.shape)
    H = wave.h_field(data.points.reshape(-1, 3), medium).reshape(data.points.shape)
    rot = np.cross(mesh.normals[:, None, None, :], data.basis)
    te = np.einsum("tq,tiqx,tqx->ti", data.weights, data.basis, E)
    th = np.einsum("tq,tiqx,tqx->ti", data.weights, rot, H)
    vals = -alpha * te + (1.0 - alpha) * medium.eta * th
    F = np.zeros(space.num_functions, dtype=np.complex128)
    np.add.at(F, space.tri_edges.ravel(), vals.ravel())
    return F


# ---------------------------------------------------------------------------
# Matrix export
# ---------------------------------------------------------------------------

_MAGIC = b"DCMX"


def save_matrix_binary(path, A) -> None:
    """Binary layout: magic, dtype code (c16/f8), rows, cols (int64 LE),
    then row-major payload."""
    A = np.ascontiguousarray(A)
    if A.dtype == np.complex128:
        code = b"c16 "
    elif A.dtype == np.float64:
        code = b"f8  "
    else:
        raise ValueError(f"unsupported dtype {A.dtype}")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(code)
        fh.write(np.array(A.shape, dtype="<i8").tobytes())
        fh.write(A.astype(A.dtype.newbyteorder("<")).tobytes())


def load_matrix_binary(path):
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError("not a matrix file")
        code = fh.read(4).strip().decode()
        rows, cols = np.frombuffer(fh.read(16), dtype="<i8")
        dtype = {"c16": "<c16", "f8": "<f8"}[code]
        data = np.frombuffer(fh.read(), dtype=dtype)
    return data.reshape(int(rows), int(cols)).astype(
        np.complex128 if code == "c16" else np.float64
    )


def save_matrix_csv(path, A) -> None:
    """CSV for small fixtures: row, col, re, im."""
    A = np.asarray(A)
    with open(path, "w") as fh:
        fh.write("row,col,re,im\n")
        for i in range(A.shape[0]):
            for j in range(A.shape[1]):
                z = complex(A[i, j])
                fh.write(f"{i},{j},{z.real:.17g},{z.imag:.17g}\n")
