"""Radiated far fields, radar cross-section cuts, and visualization export."""

from __future__ import annotations

import numpy as np

from .basis import RwgSpace
from .kernels import FOUR_PI, Medium, SEVEN_POINT_RULE

DB_FLOOR = -100.0


def far_field(space: RwgSpace, current, medium: Medium, directions) -> np.ndarray:
    """Radiation vector F(r_hat) of the surface current: the transverse
    field coefficient at 1 m with the spherical spreading factor removed,

      F = -(ik eta / 4 pi) (I - r_hat r_hat) . int J(r') e^{ik r_hat.r'} dA'

    (stored-phase convention matching the assembled system).  directions is
    (nd, 3) unit vectors; returns (nd, 3) complex fields.
    """
    directions = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    data = space.triangle_quadrature(SEVEN_POINT_RULE)
    J = space.eval_expansion(np.asarray(current), SEVEN_POINT_RULE)  # (nt, nq, 3)
    phase = np.exp(1j * medium.k * np.einsum("dx,tqx->dtq", directions, data.points))
    moment = np.einsum("tq,dtq,tqx->dx", data.weights, phase, J, optimize=True)
    radial = np.einsum("dx,dx->d", directions, moment)[:, None] * directions
    return (-1j * medium.k * medium.eta / FOUR_PI) * (moment - radial)


def cut_directions(plane: str, n_angles: int):
    """Unit vectors of a great-circle cut: theta in [0, 180] deg at phi = 0
    (plane 'phi0', xz-plane) or phi = 90 (plane 'phi90', yz-plane)."""
    if plane not in ("phi0", "phi90"):
        raise ValueError("plane must be 'phi0' or 'phi90'")
    theta = np.linspace(0.0, np.pi, n_angles)
    phi = 0.0 if plane == "phi0" else np.pi / 2
    d = np.stack(
        [
            np.sin(theta) * np.cos(phi),
            np.sin(theta) * np.sin(phi),
            np.cos(theta),
        ],
        axis=1,
    )
    return np.degrees(theta), d


def rcs_cut(space: RwgSpace, current, medium: Medium, plane: str,
            n_angles: int = 181, incident_amplitude: float = 1.0):
    """Bistatic RCS sigma(theta) = 4 pi |F|^2 / |E_inc|^2 on a cut.

    Returns (theta_deg, sigma_m2, sigma_dbsm) with the dB values floored
    at -100 dBsm.
    """
    theta_deg, dirs = cut_directions(plane, n_angles)
    F = far_field(space, current, medium, dirs)
    sigma = FOUR_PI * np.sum(np.abs(F) ** 2, axis=1) / incident_amplitude**2
    with np.errstate(divide="ignore"):
        dbsm = 10.0 * np.log10(sigma)
    dbsm = np.maximum(dbsm, DB_FLOOR)
    return theta_deg, sigma, dbsm


def save_rcs_csv(path, theta_deg, sigma, dbsm) -> None:
    with open(path, "w") as fh:
        fh.write("theta_deg,sigma_m2,sigma_dbsm\n")
        for t, s, d in zip(theta_deg, sigma, dbsm):
            fh.write(f"{t:.17g},{s:.17g},{d:.17g}\n")


def normalized_pattern_difference(F_a, F_b) -> float:
    """Relative L2 distance of two peak-normalized patterns on a shared cut."""
    pa = np.linalg.norm(np.atleast_2d(F_a), axis=-1)
    pb = np.linalg.norm(np.atleast_2d(F_b), axis=-1)
    pa = pa / pa.max()
    pb = pb / pb.max()
    return float(np.linalg.norm(pa - pb) / np.linalg.norm(pb))


def export_current_vtk(space: RwgSpace, current, path) -> None:
    """Legacy ASCII VTK polydata: per-triangle current magnitude and the
    time-zero (real part) vector field."""
    mesh = space.mesh
    vec = space.triangle_currents(np.asarray(current, dtype=np.complex128))
    mag = np.linalg.norm(np.abs(vec), axis=1)
    real = np.real(vec)
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write("surface current\n")
        fh.write("ASCII\n")
        fh.write("DATASET POLYDATA\n")
        fh.write(f"POINTS {mesh.num_vertices} double\n")
        for v in mesh.vertices:
            fh.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        fh.write(f"POLYGONS {mesh.num_triangles} {4 * mesh.num_triangles}\n")
        for t in mesh.triangles:
            fh.write(f"3 {t[0]} {t[1]} {t[2]}\n")
        fh.write(f"CELL_DATA {mesh.num_triangles}\n")
        fh.write("SCALARS current_magnitude double 1\n")
        fh.write("LOOKUP_TABLE default\n")
        for m in mag:
            fh.write(f"{m:.17g}\n")
        fh.write("VECTORS current_real double\n")
        for v in real:
            fh.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
