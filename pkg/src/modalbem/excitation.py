"""Plane-wave excitation, driven solves, and modal expansions.

The assembled system is stored with the phase convention in which the
radiating kernel appears conjugated; incident fields therefore carry the
matching propagation phase e^{-i k k_hat . r}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assembly import AssemblyConfig, DEFAULT_CONFIG, assemble_rhs
from .charmodes import CharModeSet
from .kernels import Medium
from .spectral import GMRES_MAX_ITER, GMRES_RESTART, GMRES_TOL, SolveStats, gmres


@dataclass(frozen=True)
class PlaneWave:
    """Linearly polarized plane wave with unit direction and polarization.

    E(r) = amplitude * e_hat * exp(-i k k_hat . r)
    H(r) = (1/eta) k_hat x E(r)
    """

    direction: np.ndarray  # unit propagation vector k_hat
    polarization: np.ndarray  # unit field vector e_hat, orthogonal to k_hat
    amplitude: complex = 1.0

    def __post_init__(self):
        k_hat = np.asarray(self.direction, dtype=np.float64)
        e_hat = np.asarray(self.polarization, dtype=np.float64)
        if abs(np.linalg.norm(k_hat) - 1.0) > 1e-12:
            raise ValueError("direction must be a unit vector")
        if abs(np.linalg.norm(e_hat) - 1.0) > 1e-12:
            raise ValueError("polarization must be a unit vector")
        if abs(np.dot(k_hat, e_hat)) > 1e-12:
            raise ValueError("polarization must be orthogonal to direction")
        object.__setattr__(self, "direction", k_hat)
        object.__setattr__(self, "polarization", e_hat)

    def e_field(self, points, medium: Medium) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        phase = np.exp(-1j * medium.k * points @ self.direction)
        return self.amplitude * phase[..., None] * self.polarization

    def h_field(self, points, medium: Medium) -> np.ndarray:
        return np.cross(self.direction, self.e_field(points, medium)) / medium.eta


def solve_driven(Z, F, *, method: str = "gmres", tol: float = GMRES_TOL,
                 restart: int = GMRES_RESTART, max_iter: int = GMRES_MAX_ITER):
    """Solve Z J = F for the driven surface current.

    Returns (J, SolveStats).  GMRES non-convergence is surfaced as
    SolverError; method 'lu' is the dense fallback.
    """
    import time

    t0 = time.perf_counter()
    stats = SolveStats(outer_iterations=1)
    if method == "lu":
        J = np.linalg.solve(Z, F)
    elif method == "gmres":
        J, its = gmres(Z, F, tol=tol, restart=restart, max_iter=max_iter)
        stats.inner_iterations.append(its)
    else:
        raise ValueError("method must be 'gmres' or 'lu'")
    stats.wall_time = time.perf_counter() - t0
    return J, stats


@dataclass
class ModalExpansion:
    """Modal expansion of a driven solution over a kept subset of modes."""

    modes: CharModeSet
    coefficients: np.ndarray  # a_n over kept modes
    kept: np.ndarray  # indices into modes of the kept set
    frequency: float


def modal_coefficients(modes: CharModeSet, F_inc, *, keep=None,
                       drop_null: bool = True) -> ModalExpansion:
    """Expansion coefficients a_n = (1 + i lambda_n)^{-1} (J_n^a)^T F_inc.

    keep selects mode indices (default: all); modes classified efie_null are
    excluded from reduced-order reconstruction when drop_null is set.
    """
    if modes.aux_currents is None:
        raise ValueError("modal_coefficients requires auxiliary currents "
                         "(run solve_aux_modes first)")
    kept = np.arange(modes.n_modes) if keep is None else np.asarray(keep, dtype=np.int64)
    if np.any(kept < 0) or np.any(kept >= modes.n_modes):
        raise ValueError("keep indices out of range")
    if drop_null and modes.classification is not None:
        kept = np.array([i for i in kept
                         if modes.classification[i] != "efie_null"], dtype=np.int64)
    proj = modes.aux_currents[:, kept].T @ np.asarray(F_inc)
    a = proj / (1.0 + 1j * modes.lambdas[kept])
    return ModalExpansion(modes, a, kept, modes.frequency)


def reconstruct_current(expansion: ModalExpansion) -> np.ndarray:
    """Sum of a_n J_n over the kept modes."""
    return expansion.modes.currents[:, expansion.kept] @ expansion.coefficients


def plane_wave_rhs(space, medium: Medium, wave: PlaneWave, alpha: float,
                   config: AssemblyConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Tested incident vector for the combined-field system at weight alpha."""
    return assemble_rhs(space, medium, wave, alpha, config)


def save_expansion_csv(path, expansion: ModalExpansion) -> None:
    """Per-mode report: index, lambda, coefficient magnitude and phase."""
    lams = expansion.modes.lambdas
    with open(path, "w") as fh:
        fh.write("mode,lambda_re,lambda_im,coeff_abs,coeff_phase\n")
        for n, a in zip(expansion.kept, expansion.coefficients):
            lam = lams[n]
            fh.write(f"{n},{lam.real:.17g},{lam.imag:.17g},"
                     f"{np.abs(a):.17g},{np.angle(a):.17g}\n")
