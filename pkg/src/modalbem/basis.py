"""Div-conforming basis spaces on triangle meshes.

RwgSpace: one Rao-Wilton-Glisson function per interior edge, with the edge
length included in the normalization (f = +- L/(2A) (r - v_free)).

BcSpace: a dual div-conforming space on the barycentric refinement, one
function per parent edge, expressed as a sparse combination of child RWG
functions.  Each dual function carries a unit of current from the cell
around one endpoint of its parent edge to the cell around the other, with
equal charge on every barycentric child of a cell; the child-edge fluxes
follow from local conservation and are converted to child RWG coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import RefinedMesh, TriMesh
from .kernels import QuadRule


@dataclass(frozen=True)
class TriangleQuadData:
    """Per-triangle quadrature tables for Galerkin assembly.

    points:  (nt, nq, 3) physical quadrature points
    weights: (nt, nq) rule weights scaled by triangle area
    basis:   (nt, 3, nq, 3) the three local RWG functions at the points
    div:     (nt, 3) surface divergence of the local functions (constant)
    """

    rule: QuadRule
    points: np.ndarray
    weights: np.ndarray
    basis: np.ndarray
    div: np.ndarray


class RwgSpace:
    """RWG functions on a closed TriMesh, one per edge, ordered like the
    mesh edges.  The lower-index adjacent triangle is the plus side."""

    def __init__(self, mesh: TriMesh):
        self.mesh = mesh
        ev = mesh.edge_vertices
        self.edge_lengths = np.linalg.norm(
            mesh.vertices[ev[:, 1]] - mesh.vertices[ev[:, 0]], axis=1
        )

        nt = mesh.num_triangles
        self.tri_edges = np.full((nt, 3), -1, dtype=np.int64)
        self.tri_signs = np.zeros((nt, 3))
        self.tri_free_vertex = np.full((nt, 3), -1, dtype=np.int64)
        for e in range(mesh.num_edges):
            for side in range(2):
                t = mesh.edge_tris[e, side]
                v_free = mesh.edge_opposite[e, side]
                loc = int(np.nonzero(mesh.triangles[t] == v_free)[0][0])
                self.tri_edges[t, loc] = e
                self.tri_signs[t, loc] = 1.0 if side == 0 else -1.0
                self.tri_free_vertex[t, loc] = v_free
        if np.any(self.tri_edges < 0):
            raise ValueError("mesh edge topology is incomplete")
        self._quad_cache: dict[int, TriangleQuadData] = {}

    @property
    def num_functions(self) -> int:
        return self.mesh.num_edges

    def triangle_quadrature(self, rule: QuadRule) -> TriangleQuadData:
        """Quadrature points and basis tables for `rule`, cached per rule."""
        key = id(rule)
        if key in self._quad_cache:
            return self._quad_cache[key]
        mesh = self.mesh
        v = mesh.vertices[mesh.triangles]  # (nt, 3, 3)
        points = np.einsum("qi,tix->tqx", rule.points, v)
        weights = rule.weights[None, :] * mesh.areas[:, None]

        L = self.edge_lengths[self.tri_edges]  # (nt, 3)
        coef = self.tri_signs * L / (2.0 * mesh.areas[:, None])  # (nt, 3)
        free = mesh.vertices[self.tri_free_vertex]  # (nt, 3, 3)
        basis = coef[:, :, None, None] * (points[:, None, :, :] - free[:, :, None, :])
        div = 2.0 * coef  # sign * L / A

        data = TriangleQuadData(rule, points, weights, basis, div)
        self._quad_cache[key] = data
        return data

    def eval_expansion(self, coeffs: np.ndarray, rule: QuadRule) -> np.ndarray:
        """Surface current density at the quadrature points of `rule`:
        returns (nt, nq, 3)."""
        data = self.triangle_quadrature(rule)
        return np.einsum("te,teqx->tqx", coeffs[self.tri_edges], data.basis)

    def triangle_currents(self, coeffs: np.ndarray) -> np.ndarray:
        """Current density at triangle centroids, (nt, 3)."""
        mesh = self.mesh
        L = self.edge_lengths[self.tri_edges]
        coef = self.tri_signs * L / (2.0 * mesh.areas[:, None])
        free = mesh.vertices[self.tri_free_vertex]
        vals = coef[:, :, None] * (mesh.centroids[:, None, :] - free)
        return np.einsum("te,tex->tx", coeffs[self.tri_edges], vals)


def _fan_children(child: TriMesh, vertex: int, tri_of_vertex) -> list[int]:
    """Child triangles around `vertex`, in cyclic order (walk via shared
    edges containing the vertex)."""
    ring = tri_of_vertex[vertex]
    adj = {}
    for t in ring:
        tri = child.triangles[t]
        others = [x for x in tri if x != vertex]
        for x in others:
            adj.setdefault(x, []).append(t)
    # each neighbor vertex x with edge (vertex, x) interior to the fan links 2 tris
    start = ring[0]
    ordered = [start]
    prev_link = None
    while len(ordered) < len(ring):
        tri = child.triangles[ordered[-1]]
        advanced = False
        for x in tri:
            if x == vertex or x == prev_link:
                continue
            linked = adj[x]
            if len(linked) == 2 and ordered[-1] in linked:
                nxt = linked[0] if linked[1] == ordered[-1] else linked[1]
                if nxt not in ordered:
                    ordered.append(nxt)
                    prev_link = x
                    advanced = True
                    break
        if not advanced:
            raise ValueError(f"could not close triangle fan around vertex {vertex}")
    return ordered


class BcSpace:
    """Dual div-conforming space on the barycentric refinement.

    coeff_matrix is sparse (num parent edges, num child edges); row e gives
    the child RWG expansion of the dual function attached to parent edge e.
    """

    def __init__(self, refined: RefinedMesh):
        self.refined = refined
        self.child_space = RwgSpace(refined.barycentric)
        self.coeff_matrix = self._build_coeffs()

    def _build_coeffs(self) -> sp.csr_matrix:
        parent = self.refined.parent
        child = self.refined.barycentric
        mid = self.refined.midpoint_vertex
        cen = self.refined.centroid_vertex
        child_edge_len = self.child_space.edge_lengths
        parent_edge_len = np.linalg.norm(
            parent.vertices[parent.edge_vertices[:, 1]]
            - parent.vertices[parent.edge_vertices[:, 0]],
            axis=1,
        )

        # lookups on the child mesh
        edge_id = {
            (int(a), int(b)): i for i, (a, b) in enumerate(child.edge_vertices)
        }
        tri_of_vertex: dict[int, list[int]] = {}
        for t, tri in enumerate(child.triangles):
            for v in tri:
                tri_of_vertex.setdefault(int(v), []).append(t)

        rows, cols, vals = [], [], []

        def add_flux(ce: int, flux: float, from_tri: int, scale: float):
            """Append the child RWG coefficient realizing `flux` across child
            edge ce, flowing out of child triangle from_tri."""
            sign = 1.0 if child.edge_tris[ce, 0] == from_tri else -1.0
            vals.append(sign * flux * scale / child_edge_len[ce])
            cols.append(ce)

        for e in range(parent.num_edges):
            t_plus = int(parent.edge_tris[e, 0])
            tri_p = parent.triangles[t_plus]
            v1, v2 = parent.edge_vertices[e]
            # direction the plus triangle traverses the edge: source -> sink
            k = int(np.nonzero(tri_p == v1)[0][0])
            if tri_p[(k + 1) % 3] == v2:
                src, snk = int(v1), int(v2)
            else:
                src, snk = int(v2), int(v1)
            m = int(mid[e])
            g_plus = int(cen[t_plus])
            g_minus = int(cen[int(parent.edge_tris[e, 1])])
            scale = parent_edge_len[e]
            n_before = len(cols)

            # crossing segments: half the unit current through each of the
            # two child edges (midpoint, centroid) separating the end cells
            for g in (g_plus, g_minus):
                ce = edge_id[(min(m, g), max(m, g))]
                et = child.edge_tris[ce]
                from_tri = (
                    et[0] if src in child.triangles[et[0]] else et[1]
                )
                add_flux(ce, 0.5, int(from_tri), scale)

            # fan walk around each endpoint: equal charge per child triangle,
            # radial fluxes from conservation, zero mean across the fan
            for v, total_charge in ((src, 1.0), (snk, -1.0)):
                ring = _fan_children(child, v, tri_of_vertex)
                n2 = len(ring)
                q = total_charge / n2
                # rotate the ring so it starts just after the radial edge
                # (v, m); the two cells adjacent to that edge export the
                # crossing current
                special = [
                    i for i, t in enumerate(ring) if m in child.triangles[t]
                ]
                if len(special) != 2:
                    raise ValueError("endpoint fan does not border the edge midpoint")
                i0, i1 = special
                if (i0 + 1) % n2 == i1:
                    ring = ring[i1:] + ring[:i1]
                elif (i1 + 1) % n2 == i0:
                    ring = ring[i0:] + ring[:i0]
                else:
                    raise ValueError("edge-adjacent cells are not neighbors in fan")

                exports = np.zeros(n2)
                exports[0] = total_charge / 2.0
                exports[-1] = total_charge / 2.0
                # u[i]: flux across the radial edge from ring[i-1] into ring[i]
                u = np.zeros(n2)
                for i in range(1, n2):
                    u[i] = u[i - 1] + q - exports[i - 1]
                closure = u[-1] + q - exports[-1] - u[0]
                if abs(closure) > 1e-12:
                    raise ValueError("fan flux walk failed to close")
                u -= u.mean()

                for i in range(n2):
                    t_from, t_to = ring[i - 1], ring[i]
                    common = set(child.triangles[t_from]) & set(
                        child.triangles[t_to]
                    )
                    common.discard(v)
                    (x,) = common
                    ce = edge_id[(min(v, x), max(v, int(x)))]
                    if abs(u[i]) > 1e-15:
                        add_flux(ce, u[i], t_from, scale)

            rows.extend([e] * (len(cols) - n_before))

        mat = sp.coo_matrix(
            (vals, (rows, cols)),
            shape=(parent.num_edges, child.num_edges),
        )
        return mat.tocsr()

    @property
    def num_functions(self) -> int:
        return self.refined.parent.num_edges
