import numpy as np
import pytest

from modalbem.basis import BcSpace, RwgSpace
from modalbem.kernels import MIDPOINT_RULE, SEVEN_POINT_RULE
from modalbem.mesh import barycentric_refine, make_sphere


class TestRwgSpace:
    def test_one_function_per_edge(self, octa_space, octa_mesh):
        assert octa_space.num_functions == octa_mesh.num_edges

    def test_normal_flux_continuity(self, octa_space):
        """The component normal to the shared edge is continuous: on the
        edge the function equals (L/2A) * (edge-midpoint distance to the
        free vertex), the same from both sides at the midpoint."""
        mesh = octa_space.mesh
        for e in range(mesh.num_edges):
            v1, v2 = mesh.vertices[mesh.edge_vertices[e]]
            mid = 0.5 * (v1 + v2)
            edge_dir = (v2 - v1) / np.linalg.norm(v2 - v1)
            fluxes = []
            for side in range(2):
                t = mesh.edge_tris[e, side]
                loc = int(np.nonzero(octa_space.tri_edges[t] == e)[0][0])
                L = octa_space.edge_lengths[e]
                coef = octa_space.tri_signs[t, loc] * L / (2 * mesh.areas[t])
                val = coef * (mid - mesh.vertices[octa_space.tri_free_vertex[t, loc]])
                # outward in-plane normal of the edge as seen from triangle t
                n_edge = np.cross(edge_dir, mesh.normals[t])
                to_centroid = mesh.centroids[t] - mid
                if np.dot(n_edge, to_centroid) > 0:
                    n_edge = -n_edge
                fluxes.append(np.dot(val, n_edge))
            # flux out of one triangle flows into the other, with the
            # RWG normalization giving unit edge-normal component
            assert fluxes[0] == pytest.approx(-fluxes[1], rel=1e-12)
            assert abs(fluxes[0]) == pytest.approx(1.0, rel=1e-12)

    def test_divergence_value(self, octa_space):
        mesh = octa_space.mesh
        data = octa_space.triangle_quadrature(SEVEN_POINT_RULE)
        L = octa_space.edge_lengths[octa_space.tri_edges]
        expected = octa_space.tri_signs * L / mesh.areas[:, None]
        np.testing.assert_allclose(data.div, expected)

    def test_divergence_theorem_per_function(self, octa_space):
        # int div f dA over both triangles of a function is zero
        mesh = octa_space.mesh
        data = octa_space.triangle_quadrature(SEVEN_POINT_RULE)
        total = np.zeros(octa_space.num_functions)
        np.add.at(
            total,
            octa_space.tri_edges.ravel(),
            (data.div * mesh.areas[:, None]).ravel(),
        )
        np.testing.assert_allclose(total, 0.0, atol=1e-12)

    def test_quadrature_tables_consistent(self, sphere1_space):
        data = sphere1_space.triangle_quadrature(SEVEN_POINT_RULE)
        mesh = sphere1_space.mesh
        np.testing.assert_allclose(
            data.weights.sum(axis=1), mesh.areas, rtol=1e-12
        )
        # cached: same object on second request
        assert sphere1_space.triangle_quadrature(SEVEN_POINT_RULE) is data

    def test_eval_expansion_linear(self, octa_space):
        rng = np.random.default_rng(3)
        a = rng.standard_normal(octa_space.num_functions)
        b = rng.standard_normal(octa_space.num_functions)
        ja = octa_space.eval_expansion(a, MIDPOINT_RULE)
        jb = octa_space.eval_expansion(b, MIDPOINT_RULE)
        jab = octa_space.eval_expansion(a + 2 * b, MIDPOINT_RULE)
        np.testing.assert_allclose(jab, ja + 2 * jb, atol=1e-12)


@pytest.fixture(scope="module")
def bc(octa_mesh):
    return BcSpace(barycentric_refine(octa_mesh))


class TestBcSpace:
    def test_dimensions(self, bc, octa_mesh):
        assert bc.num_functions == octa_mesh.num_edges
        assert bc.coeff_matrix.shape == (
            octa_mesh.num_edges,
            bc.child_space.mesh.num_edges,
        )

    def test_divergence_free_away_from_edge_cells(self, bc):
        """Total divergence of each dual function integrates to zero and
        the per-child-triangle charge is +/- 1/(2 N) * parent edge length
        on the endpoint fans, zero on crossing cells."""
        child_space = bc.child_space
        mesh = child_space.mesh
        data = child_space.triangle_quadrature(MIDPOINT_RULE)
        C = bc.coeff_matrix.toarray()
        div_tri = np.zeros((bc.num_functions, mesh.num_triangles))
        for e in range(bc.num_functions):
            coeffs = C[e]
            div = np.einsum(
                "te,te->t", coeffs[child_space.tri_edges], data.div
            )
            div_tri[e] = div * mesh.areas
        np.testing.assert_allclose(div_tri.sum(axis=1), 0.0, atol=1e-12)

    def test_alignment_with_rotated_primal(self, bc, octa_space):
        """Each dual function is nearly parallel to the rotated primal
        function of the same parent edge."""
        parent = octa_space.mesh
        child_space = bc.child_space
        data = child_space.triangle_quadrature(MIDPOINT_RULE)
        C = bc.coeff_matrix
        pt = bc.refined.child_tri_parent
        for e in range(bc.num_functions):
            b_vals = np.einsum(
                "te,teqx->tqx",
                np.asarray(C[e].todense()).ravel()[child_space.tri_edges],
                data.basis,
            )
            # rotated primal evaluated at the same child points
            L = octa_space.edge_lengths[octa_space.tri_edges[pt]]
            coef = octa_space.tri_signs[pt] * L / (2 * parent.areas[pt][:, None])
            free = parent.vertices[octa_space.tri_free_vertex[pt]]
            f_vals = np.einsum(
                "ti,tiqx->tqx",
                coef * (octa_space.tri_edges[pt] == e),
                data.points[:, None, :, :] - free[:, :, None, :],
            )
            rot = np.cross(parent.normals[pt][:, None, :], f_vals)
            num = np.einsum("tq,tqx,tqx->", data.weights, b_vals, rot)
            na = np.sqrt(np.einsum("tq,tqx,tqx->", data.weights, b_vals, b_vals))
            nb = np.sqrt(np.einsum("tq,tqx,tqx->", data.weights, rot, rot))
            # the octahedron's sharp dihedral angles limit the alignment;
            # it tightens toward 1 on smoother meshes
            assert num / (na * nb) > 0.75

    def test_mixed_gramian_invertible(self, octa_mesh, octa_space):
        from modalbem.calderon import assemble_gramian

        bc = BcSpace(barycentric_refine(octa_mesh))
        G = assemble_gramian(octa_space, bc)
        s = np.linalg.svd(G, compute_uv=False)
        assert s[-1] > 0
        assert s[0] / s[-1] < 1e4

    def test_sphere_gramian_invertible(self, sphere1_mesh, sphere1_space):
        from modalbem.calderon import assemble_gramian

        bc = BcSpace(barycentric_refine(sphere1_mesh))
        G = assemble_gramian(sphere1_space, bc)
        s = np.linalg.svd(G, compute_uv=False)
        assert s[0] / s[-1] < 1e4
