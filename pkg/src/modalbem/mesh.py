"""Triangle surface meshes: ingestion, parametric generators, edge topology,
and barycentric refinement.

All meshes produced here are closed, consistently oriented 2-manifolds with
outward normals.  Interior edges are sorted lexicographically by
(min vertex id, max vertex id); this ordering fixes the global unknown
ordering for the basis spaces built on top.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MIN_TRIANGLE_AREA = 1e-12  # m^2


class MeshError(ValueError):
    """Raised for unusable input meshes (parse errors, open or
    non-orientable surfaces, degenerate triangles)."""


@dataclass
class TriMesh:
    """Closed oriented triangle surface mesh with edge topology.

    Attributes:
        vertices: (nv, 3) float array, meters.
        triangles: (nt, 3) int array of vertex indices, CCW seen from outside.
        edge_vertices: (ne, 2) int array, each row (vmin, vmax), rows sorted
            lexicographically.
        edge_tris: (ne, 2) int array; the two triangles adjacent to each edge,
            lower triangle index first (the "plus" side for RWG functions).
        edge_opposite: (ne, 2) int array; per adjacent triangle, the vertex
            opposite the edge.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edge_vertices: np.ndarray
    edge_tris: np.ndarray
    edge_opposite: np.ndarray
    areas: np.ndarray = field(init=False)
    normals: np.ndarray = field(init=False)
    centroids: np.ndarray = field(init=False)

    def __post_init__(self):
        v = self.vertices[self.triangles]
        cross = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
        norms = np.linalg.norm(cross, axis=1)
        self.areas = 0.5 * norms
        self.normals = cross / norms[:, None]
        self.centroids = v.mean(axis=1)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    @property
    def num_edges(self) -> int:
        return len(self.edge_vertices)

    def signed_volume(self) -> float:
        """Enclosed volume; positive for outward orientation."""
        v = self.vertices[self.triangles]
        return float(np.einsum("ij,ij->", v[:, 0], np.cross(v[:, 1], v[:, 2]))) / 6.0

    def total_area(self) -> float:
        return float(self.areas.sum())

    def diameters(self) -> np.ndarray:
        """Longest edge per triangle."""
        v = self.vertices[self.triangles]
        e = np.stack(
            [
                np.linalg.norm(v[:, 1] - v[:, 0], axis=1),
                np.linalg.norm(v[:, 2] - v[:, 1], axis=1),
                np.linalg.norm(v[:, 0] - v[:, 2], axis=1),
            ],
            axis=1,
        )
        return e.max(axis=1)


@dataclass
class RefinedMesh:
    """Barycentric refinement of a parent mesh (6 children per triangle).

    Child vertices are ordered parent vertices, then parent-edge midpoints
    (one per parent edge, in parent edge order), then parent-triangle
    centroids (in parent triangle order).
    """

    parent: TriMesh
    barycentric: TriMesh
    child_tri_parent: np.ndarray  # (6*nt,) parent triangle of each child
    midpoint_vertex: np.ndarray  # (ne_parent,) child vertex id of each edge midpoint
    centroid_vertex: np.ndarray  # (nt_parent,) child vertex id of each centroid


def _build_edge_topology(triangles: np.ndarray):
    """Extract interior edges with adjacency; validates manifoldness and
    orientation consistency."""
    directed = {}
    for t, (a, b, c) in enumerate(triangles):
        for u, v in ((a, b), (b, c), (c, a)):
            if (u, v) in directed:
                raise MeshError(f"repeated directed edge ({u},{v}): inconsistent orientation")
            directed[(u, v)] = t

    edges = {}
    for (u, v), t in directed.items():
        key = (min(u, v), max(u, v))
        edges.setdefault(key, []).append((t, (u, v)))

    ev, et, eo = [], [], []
    tri_sets = [set(tri) for tri in triangles]
    for key in sorted(edges):
        adj = edges[key]
        if len(adj) != 2:
            raise MeshError(f"edge {key} adjacent to {len(adj)} triangles; surface not closed")
        (t1, d1), (t2, d2) = adj
        if d1 == d2:
            raise MeshError(f"edge {key} traversed in the same direction twice")
        if t2 < t1:
            t1, t2 = t2, t1
        ev.append(key)
        et.append((t1, t2))
        eo.append(
            (
                next(iter(tri_sets[t1] - set(key))),
                next(iter(tri_sets[t2] - set(key))),
            )
        )
    return (
        np.array(ev, dtype=np.int64),
        np.array(et, dtype=np.int64),
        np.array(eo, dtype=np.int64),
    )


def make_trimesh(vertices, triangles, repair_orientation: bool = True) -> TriMesh:
    """Build a validated TriMesh from raw arrays.

    Orientation repair is limited to one global flip (all triangles
    reversed); per-triangle repair is deliberately not attempted.
    """
    vertices = np.asarray(vertices, dtype=np.float64)
    triangles = np.asarray(triangles, dtype=np.int64)
    if vertices.ndim != 2 or vertices.shape[1] != 3:
        raise MeshError("vertices must be (n, 3)")
    if triangles.ndim != 2 or triangles.shape[1] != 3:
        raise MeshError("triangles must be (m, 3)")

    v = vertices[triangles]
    areas = 0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)
    if np.any(areas <= MIN_TRIANGLE_AREA):
        bad = int(np.argmin(areas))
        raise MeshError(f"degenerate triangle {bad} (area {areas[bad]:.3e} m^2)")

    ev, et, eo = _build_edge_topology(triangles)

    vol = float(np.einsum("ij,ij->", v[:, 0], np.cross(v[:, 1], v[:, 2]))) / 6.0
    if vol < 0:
        if not repair_orientation:
            raise MeshError("mesh is consistently oriented but inward-facing")
        triangles = triangles[:, [0, 2, 1]].copy()
        ev, et, eo = _build_edge_topology(triangles)

    return TriMesh(vertices, triangles, ev, et, eo)


# ---------------------------------------------------------------------------
# File ingestion
# ---------------------------------------------------------------------------


def _parse_off(text: str):
    tokens = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.extend(line.split())
    if not tokens or tokens[0] != "OFF":
        raise MeshError("not an OFF file (missing OFF header)")
    try:
        nv, nf = int(tokens[1]), int(tokens[2])
        pos = 4  # skip edge count
        verts = np.array(tokens[pos : pos + 3 * nv], dtype=np.float64).reshape(nv, 3)
        pos += 3 * nv
        faces = []
        for _ in range(nf):
            k = int(tokens[pos])
            if k != 3:
                raise MeshError("only triangular faces are supported")
            faces.append([int(t) for t in tokens[pos + 1 : pos + 4]])
            pos += 1 + k
    except (ValueError, IndexError) as exc:
        raise MeshError(f"malformed OFF file: {exc}") from exc
    return verts, np.array(faces, dtype=np.int64)


def _parse_gmsh_v2(text: str):
    lines = iter(text.splitlines())
    verts = {}
    faces = []
    try:
        for line in lines:
            tag = line.strip()
            if tag == "$MeshFormat":
                version = next(lines).split()[0]
                if not version.startswith("2."):
                    raise MeshError(f"unsupported Gmsh format version {version}")
            elif tag == "$Nodes":
                n = int(next(lines))
                for _ in range(n):
                    parts = next(lines).split()
                    verts[int(parts[0])] = [float(x) for x in parts[1:4]]
            elif tag == "$Elements":
                n = int(next(lines))
                for _ in range(n):
                    parts = [int(x) for x in next(lines).split()]
                    if parts[1] == 2:  # 3-node triangle
                        ntags = parts[2]
                        faces.append(parts[3 + ntags : 6 + ntags])
    except (StopIteration, ValueError, IndexError) as exc:
        raise MeshError(f"malformed Gmsh v2 file: {exc}") from exc
    if not verts or not faces:
        raise MeshError("Gmsh file contains no nodes or no triangles")
    ids = sorted(verts)
    remap = {i: k for k, i in enumerate(ids)}
    vertices = np.array([verts[i] for i in ids], dtype=np.float64)
    triangles = np.array([[remap[i] for i in f] for f in faces], dtype=np.int64)
    return vertices, triangles


def load_mesh(path, fmt: str | None = None) -> TriMesh:
    """Load a closed triangle mesh from an OFF or Gmsh MSH v2 ASCII file.

    fmt is "off" or "gmsh-msh-v2"; inferred from the suffix when omitted.
    """
    path = Path(path)
    if fmt is None:
        fmt = "gmsh-msh-v2" if path.suffix.lower() == ".msh" else "off"
    text = path.read_text()
    if fmt == "off":
        verts, tris = _parse_off(text)
    elif fmt == "gmsh-msh-v2":
        verts, tris = _parse_gmsh_v2(text)
    else:
        raise MeshError(f"unknown mesh format {fmt!r}")
    return make_trimesh(verts, tris)


def save_off(mesh: TriMesh, path) -> None:
    """Write an ASCII OFF file (used by test fixtures)."""
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{mesh.num_vertices} {mesh.num_triangles} {mesh.num_edges}\n")
        for v in mesh.vertices:
            fh.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for t in mesh.triangles:
            fh.write(f"3 {t[0]} {t[1]} {t[2]}\n")


# ---------------------------------------------------------------------------
# Parametric generators
# ---------------------------------------------------------------------------


def make_sphere(radius: float, subdivision: int) -> TriMesh:
    """Icosphere: subdivided icosahedron with vertices projected to the
    sphere.  20 * 4**subdivision triangles."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    if subdivision < 0:
        raise ValueError("subdivision must be >= 0")

    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    tris = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = list(verts / np.linalg.norm(verts[0]))

    for _ in range(subdivision):
        midpoint = {}

        def mid(i, j):
            key = (min(i, j), max(i, j))
            if key not in midpoint:
                p = verts[i] + verts[j]
                verts.append(p / np.linalg.norm(p))
                midpoint[key] = len(verts) - 1
            return midpoint[key]

        new_tris = []
        for a, b, c in tris:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_tris += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        tris = new_tris

    vertices = radius * np.array(verts)
    return make_trimesh(vertices, np.array(tris, dtype=np.int64))


def make_box(dims, n) -> TriMesh:
    """Structured surface mesh of an axis-aligned box centered at the origin.

    dims = (a, b, c) in meters, n = per-axis division counts; every surface
    quad is split into two triangles, oriented outward.
    """
    dims = tuple(float(d) for d in dims)
    n = tuple(int(k) for k in n)
    if any(d <= 0 for d in dims):
        raise ValueError("box dimensions must be positive")
    if any(k < 1 for k in n):
        raise ValueError("division counts must be >= 1")

    grid = {}
    verts = []

    def node(i, j, k):
        key = (i, j, k)
        if key not in grid:
            verts.append(
                [
                    dims[0] * (i / n[0] - 0.5),
                    dims[1] * (j / n[1] - 0.5),
                    dims[2] * (k / n[2] - 0.5),
                ]
            )
            grid[key] = len(verts) - 1
        return grid[key]

    tris = []

    def face(axis, side):
        # Parametrize the face by the two remaining axes (u, v) chosen so
        # that u x v points outward.
        ax_u, ax_v = [a for a in range(3) if a != axis]
        if (side == 1) != (axis == 1):  # keep u x v outward
            ax_u, ax_v = ax_v, ax_u
        nu, nv = n[ax_u], n[ax_v]
        fixed = n[axis] * side

        def idx(iu, iv):
            c = [0, 0, 0]
            c[axis] = fixed
            c[ax_u] = iu
            c[ax_v] = iv
            return node(*c)

        for iu in range(nu):
            for iv in range(nv):
                p00, p10 = idx(iu, iv), idx(iu + 1, iv)
                p01, p11 = idx(iu, iv + 1), idx(iu + 1, iv + 1)
                tris.append((p00, p10, p11))
                tris.append((p00, p11, p01))

    for axis in range(3):
        for side in (0, 1):
            face(axis, side)

    return make_trimesh(np.array(verts), np.array(tris, dtype=np.int64))


def _almond_radii(t: np.ndarray, length: float):
    """Cross-section semi-axes (y, z) of the NASA almond benchmark at the
    normalized axial coordinate t in [-0.416667, 0.58333]."""
    ry = np.empty_like(t)
    rz = np.empty_like(t)
    back = t < 0
    root = np.sqrt(np.clip(1.0 - (t[back] / 0.416667) ** 2, 0.0, None))
    ry[back] = 0.193333 * length * root
    rz[back] = 0.064444 * length * root
    front = ~back
    root = np.sqrt(np.clip(1.0 - (t[front] / 2.08335) ** 2, 0.0, None)) - 0.96
    root = np.clip(root, 0.0, None)
    ry[front] = 4.83345 * length * root
    rz[front] = 1.61115 * length * root
    return ry, rz


def make_almond(length: float, n_axial: int, n_azimuthal: int) -> TriMesh:
    """Structured surface mesh of the NASA almond benchmark body.

    length is the total axial extent in meters; the mesh has n_axial - 1
    interior cross-section rings of n_azimuthal vertices, closed by apex
    fans at both tips.
    """
    if length <= 0:
        raise ValueError("length must be positive")
    if n_axial < 3 or n_azimuthal < 3:
        raise ValueError("n_axial and n_azimuthal must be >= 3")

    t0, t1 = -0.416667, 0.58333
    # cosine grading clusters rings near the pointed ends
    u = 0.5 * (1.0 - np.cos(np.linspace(0.0, np.pi, n_axial + 1)))
    t = t0 + (t1 - t0) * u
    ry, rz = _almond_radii(t, length)
    psi = np.linspace(0.0, 2.0 * np.pi, n_azimuthal, endpoint=False)

    verts = [[length * t[0], 0.0, 0.0]]
    ring_start = []
    for i in range(1, n_axial):
        ring_start.append(len(verts))
        for p in psi:
            verts.append([length * t[i], ry[i] * np.cos(p), rz[i] * np.sin(p)])
    tip_front = len(verts)
    verts.append([length * t[-1], 0.0, 0.0])

    tris = []
    m = n_azimuthal
    for j in range(m):  # rear apex fan
        tris.append((0, ring_start[0] + j, ring_start[0] + (j + 1) % m))
    for i in range(len(ring_start) - 1):
        a, b = ring_start[i], ring_start[i + 1]
        for j in range(m):
            jn = (j + 1) % m
            tris.append((a + j, b + j, b + jn))
            tris.append((a + j, b + jn, a + jn))
    last = ring_start[-1]
    for j in range(m):  # front apex fan
        tris.append((tip_front, last + (j + 1) % m, last + j))

    return make_trimesh(np.array(verts), np.array(tris, dtype=np.int64))


# ---------------------------------------------------------------------------
# Barycentric refinement
# ---------------------------------------------------------------------------


def barycentric_refine(mesh: TriMesh) -> RefinedMesh:
    """Split every triangle into 6 children at the edge midpoints and
    centroid; the refinement is exact, so areas and orientation carry over."""
    nv, ne, nt = mesh.num_vertices, mesh.num_edges, mesh.num_triangles

    mid_verts = 0.5 * (
        mesh.vertices[mesh.edge_vertices[:, 0]] + mesh.vertices[mesh.edge_vertices[:, 1]]
    )
    child_vertices = np.vstack([mesh.vertices, mid_verts, mesh.centroids])
    midpoint_vertex = nv + np.arange(ne)
    centroid_vertex = nv + ne + np.arange(nt)

    edge_id = {tuple(ev): i for i, ev in enumerate(map(tuple, mesh.edge_vertices))}

    child_tris = np.empty((6 * nt, 3), dtype=np.int64)
    child_parent = np.repeat(np.arange(nt), 6)
    for t, (a, b, c) in enumerate(mesh.triangles):
        g = centroid_vertex[t]
        row = 6 * t
        for i, (u, v) in enumerate(((a, b), (b, c), (c, a))):
            m = midpoint_vertex[edge_id[(min(u, v), max(u, v))]]
            child_tris[row + 2 * i] = (u, m, g)
            child_tris[row + 2 * i + 1] = (m, v, g)

    child = make_trimesh(child_vertices, child_tris, repair_orientation=False)
    return RefinedMesh(mesh, child, child_parent, midpoint_vertex, centroid_vertex)
