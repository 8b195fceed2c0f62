"""Calderon preconditioning layer: the dual-basis discretization of the
single-source operator at the complexified wavenumber, the mixed Gramian
linking the rotated primal basis to the dual basis, the preconditioned
combined system, and the dual-tested MFIE variant.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .assembly import (
    DEFAULT_CONFIG,
    AssemblyConfig,
    _k_blocks,
    _k_blocks_extracted,
    _touching_pairs,
    assemble_efie_core,
)
from .basis import BcSpace, RwgSpace
from .kernels import MIDPOINT_RULE, Medium


def _parent_basis_at(space: RwgSpace, tri_idx, points):
    """Parent RWG functions of triangles tri_idx evaluated at `points`
    ((n, nq, 3) physical points lying inside those triangles)."""
    mesh = space.mesh
    L = space.edge_lengths[space.tri_edges[tri_idx]]
    coef = space.tri_signs[tri_idx] * L / (2.0 * mesh.areas[tri_idx][:, None])
    free = mesh.vertices[space.tri_free_vertex[tri_idx]]
    return coef[:, :, None, None] * (points[:, None, :, :] - free[:, :, None, :])


def assemble_efie_bc(space_bc: BcSpace, medium: Medium,
                     wavenumber_mode: str = "ik",
                     config: AssemblyConfig = DEFAULT_CONFIG):
    """Single-source operator expanded and tested in the dual basis.

    wavenumber_mode 'ik' evaluates the kernel at the complexified
    wavenumber (purely decaying e^{-kR}, real matrix); 'k' keeps the
    radiating kernel.
    """
    if wavenumber_mode not in ("k", "ik"):
        raise ValueError("wavenumber_mode must be 'k' or 'ik'")
    k = 1j * medium.k if wavenumber_mode == "ik" else medium.k
    Z_child = assemble_efie_core(space_bc.child_space, k, medium.eta, config)
    C = space_bc.coeff_matrix
    tmp = C @ Z_child  # (n_parent, n_child)
    Z = (C @ tmp.T).T  # = tmp @ C.T
    if wavenumber_mode == "ik":
        return np.ascontiguousarray(Z.real)
    return Z


def assemble_gramian(space_rwg: RwgSpace, space_bc: BcSpace) -> np.ndarray:
    """Mixed mass matrix G[i, j] = <n x f_i, b_j>, integrated exactly on
    the refined triangles (the integrand is quadratic per child)."""
    if space_bc.refined.parent is not space_rwg.mesh:
        raise ValueError("spaces must share the parent mesh")
    child_space = space_bc.child_space
    data = child_space.triangle_quadrature(MIDPOINT_RULE)
    pt = space_bc.refined.child_tri_parent
    pbasis = _parent_basis_at(space_rwg, pt, data.points)
    rot = np.cross(space_rwg.mesh.normals[pt][:, None, None, :], pbasis)
    blocks = np.einsum("tq,tiqx,tjqx->tij", data.weights, rot, data.basis)
    Gp = np.zeros((space_rwg.num_functions, child_space.num_functions))
    np.add.at(
        Gp,
        (space_rwg.tri_edges[pt][:, :, None], child_space.tri_edges[:, None, :]),
        blocks,
    )
    return np.asarray((space_bc.coeff_matrix @ Gp.T).T)


def assemble_cmp_cfie(Z_E, R_E, Z_H, X_H, Z_tilde, G, medium: Medium,
                      alpha: float):
    """Preconditioned combined system

      Z_CC = (alpha/eta) Z~ G^{-1} Z_E + (1-alpha) eta Z_H
      K_CC = (alpha/eta) Z~ G^{-1} R_E + (1-alpha) i eta X_H

    with G^{-1} applied through an LU factorization.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    eta = medium.eta
    lu, piv = sla.lu_factor(G)
    udiag = np.abs(np.diag(lu))
    if udiag.min() <= 1e-14 * udiag.max() or not np.all(np.isfinite(udiag)):
        raise ValueError("Gramian is numerically singular")
    pre_Z = sla.lu_solve((lu, piv), Z_E)
    pre_R = sla.lu_solve((lu, piv), np.asarray(R_E, dtype=np.float64)
                         if np.isrealobj(R_E) else R_E)
    Z_CC = (alpha / eta) * (Z_tilde @ pre_Z) + (1.0 - alpha) * eta * Z_H
    K_CC = (alpha / eta) * (Z_tilde @ pre_R) + 1j * (1.0 - alpha) * eta * np.asarray(X_H)
    return Z_CC, K_CC.astype(np.complex128)


def assemble_mfie_bc(space_rwg: RwgSpace, space_bc: BcSpace, medium: Medium,
                     config: AssemblyConfig = DEFAULT_CONFIG,
                     gramian: np.ndarray | None = None):
    """MFIE tested with the dual functions instead of rotated RWG:

      Z_H[i, j] = -(1/2) <b_i, n x f_j> - <b_i, P.V. grad g x f_j>

    The rotational term pairs dual test triangles (on the refinement) with
    primal source triangles; a refined triangle paired with its own parent
    is coplanar and contributes exactly zero.
    """
    parent = space_rwg.mesh
    refined = space_bc.refined
    if refined.parent is not parent:
        raise ValueError("spaces must share the parent mesh")
    child_space = space_bc.child_space
    child = child_space.mesh
    pt = refined.child_tri_parent
    k = medium.k

    far_c = child_space.triangle_quadrature(config.far_rule)
    near_c = child_space.triangle_quadrature(config.near_rule)
    far_p = space_rwg.triangle_quadrature(config.far_rule)
    near_p = space_rwg.triangle_quadrature(config.near_rule)

    ntc = child.num_triangles
    ntp = parent.num_triangles
    Kt = np.zeros((child_space.num_functions, space_rwg.num_functions),
                  dtype=np.complex128)

    # pair categories from parent adjacency
    ptouch = _touching_pairs(parent)
    touch_mask = np.zeros((ntp, ntp), dtype=bool)
    touch_mask[ptouch[:, 0], ptouch[:, 1]] = True

    dist = np.linalg.norm(
        child.centroids[:, None, :] - parent.centroids[None, :, :], axis=-1
    )
    dc = child.diameters()
    dp = parent.diameters()
    near_mask = dist < config.near_factor * np.maximum(dc[:, None], dp[None, :])
    cross_touch = touch_mask[pt]  # includes the coplanar own-parent pairs
    near_mask &= ~cross_touch
    coplanar = pt[:, None] == np.arange(ntp)[None, :]
    near_list = np.argwhere(near_mask)
    touch_list = np.argwhere(cross_touch & ~coplanar)

    # tier 1: every non-coplanar pair with the smooth far rule
    for lo in range(0, ntc, config.obs_chunk):
        hi = min(lo + config.obs_chunk, ntc)
        oo = np.repeat(np.arange(lo, hi), ntp)
        ss = np.tile(np.arange(ntp), hi - lo)
        keep = pt[oo] != ss
        oo, ss = oo[keep], ss[keep]
        for plo in range(0, len(oo), config.pair_chunk * 8):
            osl = oo[plo : plo + config.pair_chunk * 8]
            ssl = ss[plo : plo + config.pair_chunk * 8]
            block = _k_blocks(
                far_c.basis[osl], far_c.points[osl], far_c.weights[osl],
                far_p.points[ssl], far_p.weights[ssl], far_p.basis[ssl], k,
            )
            np.add.at(
                Kt,
                (child_space.tri_edges[osl][:, :, None],
                 space_rwg.tri_edges[ssl][:, None, :]),
                block,
            )

    # tier 2: near pairs refined with the near rule
    for lo in range(0, len(near_list), config.pair_chunk):
        pl = near_list[lo : lo + config.pair_chunk]
        o, s = pl[:, 0], pl[:, 1]
        fine = _k_blocks(
            near_c.basis[o], near_c.points[o], near_c.weights[o],
            near_p.points[s], near_p.weights[s], near_p.basis[s], k,
        )
        coarse = _k_blocks(
            far_c.basis[o], far_c.points[o], far_c.weights[o],
            far_p.points[s], far_p.weights[s], far_p.basis[s], k,
        )
        np.add.at(
            Kt,
            (child_space.tri_edges[o][:, :, None],
             space_rwg.tri_edges[s][:, None, :]),
            fine - coarse,
        )

    # tier 3: vertex-sharing pairs by singularity extraction
    for lo in range(0, len(touch_list), config.pair_chunk):
        pl = touch_list[lo : lo + config.pair_chunk]
        o, s = pl[:, 0], pl[:, 1]
        fine = _k_blocks_extracted(
            space_rwg, near_c.basis[o], near_c.points[o], near_c.weights[o],
            near_p, s, k,
        )
        coarse = _k_blocks(
            far_c.basis[o], far_c.points[o], far_c.weights[o],
            far_p.points[s], far_p.weights[s], far_p.basis[s], k,
        )
        np.add.at(
            Kt,
            (child_space.tri_edges[o][:, :, None],
             space_rwg.tri_edges[s][:, None, :]),
            fine - coarse,
        )

    if gramian is None:
        gramian = assemble_gramian(space_rwg, space_bc)
    K_bc = np.asarray(space_bc.coeff_matrix @ Kt)
    Z_H = -0.5 * gramian.T - np.conj(K_bc)
    if not np.all(np.isfinite(Z_H)):
        raise FloatingPointError("non-finite dual-tested MFIE entry")
    return Z_H
