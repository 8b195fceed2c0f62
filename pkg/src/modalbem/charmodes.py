"""Characteristic-mode eigenproblems over the assembled operators.

Every formulation is reduced to a standard eigenvalue problem of the form
apply(x) = Z^{-1} (K x) whose largest-magnitude eigenvalues correspond to
the smallest characteristic values |lambda|:

  efie_x:    X_E^{-1} R_E J = (1/lambda) J              (real arithmetic)
  efie_z:    Z_E^{-1} R_E J = (1 + i lambda)^{-1} J
  mfie:      Z_H^{-1} X_H J = [i (1 + i lambda)]^{-1} J
  cfie:      Z_C^{-1} K_C J = (1 + i lambda)^{-1} J
  cmp_cfie:  same as cfie on (Z_CC, K_CC)

Auxiliary modes solve the transposed problem and are normalized so that
(J_a)^T K_C J = I, which makes (J_a)^T Z_C J = diag(1 + i lambda).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assembly import save_matrix_binary, load_matrix_binary
from .spectral import (
    EigResult,
    InverseOperator,
    SolveStats,
    arnoldi_eigs,
    dense_eigs,
)

NULL_MODE_THRESHOLD = 1e-3
TRACKING_BREAK_CORRELATION = 0.7
DEGENERACY_RELATIVE_SPREAD = 1e-3


@dataclass
class CharModeSet:
    """Ordered characteristic pairs (lambda_n, J_n), optionally with
    auxiliary currents J_n^a."""

    formulation: str  # efie_x | efie_z | mfie | cfie | cmp_cfie
    lambdas: np.ndarray  # complex, ascending |lambda|
    currents: np.ndarray  # (N, n_modes) columns J_n
    frequency: float
    alpha: float = 0.5
    aux_currents: np.ndarray | None = None
    stats: SolveStats | None = None
    classification: list[str] | None = None

    @property
    def n_modes(self) -> int:
        return len(self.lambdas)


def _sort_modes(lambdas, vectors):
    order = np.lexsort((np.arange(len(lambdas)), lambdas.imag, np.abs(lambdas)))
    return lambdas[order], vectors[:, order]


def _solve_standard(Z, K, n_modes, inner_method, seed, eig_method, transpose=False):
    """Largest-magnitude eigenpairs of Z^{-1} K (or its transposed pencil)."""
    A, B = (Z.T, K.T) if transpose else (Z, K)
    t0 = time.perf_counter()
    if eig_method == "dense":
        import scipy.linalg as sla

        lu = sla.lu_factor(A)
        M = sla.lu_solve(lu, B)
        res = dense_eigs(M)
        idx = np.argsort(-np.abs(res.values))[:n_modes]
        mus, vecs = res.values[idx], res.vectors[:, idx]
        stats = SolveStats(outer_iterations=1)
    elif eig_method == "arnoldi":
        op = InverseOperator(A, B, method=inner_method)
        res = arnoldi_eigs(op, A.shape[0], n_modes, seed=seed)
        mus, vecs = res.values, res.vectors
        stats = op.stats
    else:
        raise ValueError("eig_method must be 'dense' or 'arnoldi'")
    stats.wall_time = time.perf_counter() - t0
    stats.outer_iterations = max(stats.outer_iterations, len(stats.inner_iterations), 1)
    return mus, vecs, stats


def solve_modes_efie(Z_E, n_modes, variant: str = "x_inverse", *,
                     inner_method: str = "gmres", seed: int = 0,
                     eig_method: str = "arnoldi", frequency: float = 0.0,
                     alpha: float = 1.0) -> CharModeSet:
    """EFIE-based modes; variant x_inverse runs entirely in real arithmetic."""
    R = np.real(Z_E).copy()
    if variant == "x_inverse":
        X = np.imag(Z_E).copy()
        nus, vecs, stats = _solve_standard(X, R, n_modes, inner_method, seed, eig_method)
        lams = 1.0 / np.real(nus)
        vecs = np.real(vecs)
        lams = lams.astype(np.complex128)
        form = "efie_x"
    elif variant == "z_inverse":
        mus, vecs, stats = _solve_standard(Z_E, R, n_modes, inner_method, seed, eig_method)
        # the pencil (R, X) is real symmetric: lambda is provably real
        lams = np.real(1j * (1.0 - 1.0 / mus)).astype(np.complex128)
        form = "efie_z"
    else:
        raise ValueError("variant must be 'x_inverse' or 'z_inverse'")
    lams, vecs = _sort_modes(lams, vecs)
    return CharModeSet(form, lams, vecs, frequency, alpha, stats=stats)


def solve_modes_mfie(Z_H, n_modes, *, inner_method: str = "gmres", seed: int = 0,
                     eig_method: str = "arnoldi", frequency: float = 0.0,
                     alpha: float = 0.0) -> CharModeSet:
    X_H = np.imag(Z_H) + 0j
    mus, vecs, stats = _solve_standard(Z_H, X_H, n_modes, inner_method, seed, eig_method)
    # mu = [i (1 + i lambda)]^{-1}
    lams = -1j * (1.0 / (1j * mus) - 1.0)
    lams, vecs = _sort_modes(lams, vecs)
    return CharModeSet("mfie", lams, vecs, frequency, alpha, stats=stats)


def _solve_combined(Z, K, n_modes, formulation, inner_method, seed, eig_method,
                    frequency, alpha):
    mus, vecs, stats = _solve_standard(Z, K, n_modes, inner_method, seed, eig_method)
    lams = 1j * (1.0 - 1.0 / mus)  # mu = (1 + i lambda)^{-1}
    lams, vecs = _sort_modes(lams, vecs)
    return CharModeSet(formulation, lams, vecs, frequency, alpha, stats=stats)


def solve_modes_cfie(Z_C, K_C, n_modes, *, inner_method: str = "gmres",
                     seed: int = 0, eig_method: str = "arnoldi",
                     frequency: float = 0.0, alpha: float = 0.5) -> CharModeSet:
    return _solve_combined(Z_C, K_C, n_modes, "cfie", inner_method, seed,
                           eig_method, frequency, alpha)


def solve_modes_cmp_cfie(Z_CC, K_CC, n_modes, *, inner_method: str = "gmres",
                         seed: int = 0, eig_method: str = "arnoldi",
                         frequency: float = 0.0, alpha: float = 0.5) -> CharModeSet:
    return _solve_combined(Z_CC, K_CC, n_modes, "cmp_cfie", inner_method, seed,
                           eig_method, frequency, alpha)


def solve_aux_modes(Z_C, K_C, modes: CharModeSet, *, inner_method: str = "gmres",
                    seed: int = 1, eig_method: str = "arnoldi",
                    match_tol: float = 1e-6) -> CharModeSet:
    """Auxiliary modes from the transposed pencil, matched to the primary
    modes by eigenvalue proximity (falling back to biorthogonal overlap),
    then normalized so (J_a)^T K_C J = I."""
    n_modes = modes.n_modes
    mus, vecs, _ = _solve_standard(Z_C, K_C, n_modes, inner_method, seed,
                                   eig_method, transpose=True)
    lams_aux = 1j * (1.0 - 1.0 / mus)

    # proximity matching, greedy over the closest remaining pair
    cost = np.abs(modes.lambdas[:, None] - lams_aux[None, :])
    overlap = np.abs(vecs.T @ K_C @ modes.currents).T  # (primary, aux)
    assign = np.full(n_modes, -1)
    used = np.zeros(n_modes, bool)
    order = np.dstack(np.unravel_index(np.argsort(cost, axis=None), cost.shape))[0]
    ambiguous = []
    for p, a in order:
        if assign[p] >= 0 or used[a]:
            continue
        near = np.abs(lams_aux - modes.lambdas[p]) < max(
            match_tol, 1e-3 * abs(modes.lambdas[p])
        )
        if near.sum() > 1:
            # degenerate cluster: pick the free aux vector with the largest
            # biorthogonal overlap against this primary mode
            cands = [c for c in np.nonzero(near)[0] if not used[c]]
            a = cands[int(np.argmax(overlap[p, cands]))]
            ambiguous.append(p)
        assign[p] = a
        used[a] = True
    aux = vecs[:, assign]

    M = aux.T @ K_C @ modes.currents
    aux = aux @ np.linalg.inv(M.T)

    return CharModeSet(
        modes.formulation, modes.lambdas.copy(), modes.currents, modes.frequency,
        modes.alpha, aux_currents=aux, stats=modes.stats,
        classification=modes.classification,
    )


def detect_null_modes(modes: CharModeSet, Z_E, Z_H,
                      threshold: float = NULL_MODE_THRESHOLD) -> list[str]:
    """Classify each mode from the normalized quadratic forms |J^T Z J|."""
    J = modes.currents
    qe = np.abs(np.einsum("ij,ij->j", J, Z_E @ J))
    qh = np.abs(np.einsum("ij,ij->j", J, Z_H @ J))
    qe = qe / qe.max()
    qh = qh / qh.max()
    out = []
    for e, h in zip(qe, qh):
        if e < threshold:
            out.append("efie_null")
        elif h < threshold:
            out.append("mfie_null")
        else:
            out.append("regular")
    modes.classification = out
    return out


def track_modes(prev: CharModeSet, next_: CharModeSet):
    """Greedy correlation matching of `next_` onto `prev` mode order.

    Returns (reordered CharModeSet, correlations, break_flags)."""
    P = prev.currents / np.linalg.norm(prev.currents, axis=0)
    Q = next_.currents / np.linalg.norm(next_.currents, axis=0)
    corr = np.abs(P.conj().T @ Q)  # (n_prev, n_next)
    n = min(prev.n_modes, next_.n_modes)
    assign = np.full(n, -1)
    used = np.zeros(next_.n_modes, bool)
    order = np.dstack(np.unravel_index(np.argsort(-corr, axis=None), corr.shape))[0]
    for p, q in order:
        if p >= n or assign[p] >= 0 or used[q]:
            continue
        assign[p] = q
        used[q] = True
    correlations = corr[np.arange(n), assign]
    breaks = correlations < TRACKING_BREAK_CORRELATION
    reordered = CharModeSet(
        next_.formulation,
        next_.lambdas[assign],
        next_.currents[:, assign],
        next_.frequency,
        next_.alpha,
        aux_currents=None if next_.aux_currents is None else next_.aux_currents[:, assign],
        stats=next_.stats,
    )
    return reordered, correlations, breaks


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def save_modes(dirpath, modes: CharModeSet) -> None:
    d = Path(dirpath)
    d.mkdir(parents=True, exist_ok=True)
    cls = modes.classification or ["unclassified"] * modes.n_modes
    with open(d / "lambdas.csv", "w") as fh:
        fh.write("index,re,im,classification\n")
        for i, (lam, c) in enumerate(zip(modes.lambdas, cls)):
            fh.write(f"{i},{lam.real:.17g},{lam.imag:.17g},{c}\n")
    save_matrix_binary(d / "currents.bin", modes.currents.astype(np.complex128))
    if modes.aux_currents is not None:
        save_matrix_binary(d / "aux_currents.bin", modes.aux_currents.astype(np.complex128))
    with open(d / "metadata.txt", "w") as fh:
        fh.write(f"formulation={modes.formulation}\n")
        fh.write(f"frequency_hz={modes.frequency:.17g}\n")
        fh.write(f"alpha={modes.alpha:.17g}\n")
        fh.write(f"n_modes={modes.n_modes}\n")


def load_modes(dirpath) -> CharModeSet:
    d = Path(dirpath)
    meta = {}
    for line in (d / "metadata.txt").read_text().splitlines():
        key, _, val = line.partition("=")
        meta[key] = val
    lams, cls = [], []
    for line in (d / "lambdas.csv").read_text().splitlines()[1:]:
        _, re_, im_, c = line.split(",")
        lams.append(complex(float(re_), float(im_)))
        cls.append(c)
    currents = load_matrix_binary(d / "currents.bin")
    aux = None
    if (d / "aux_currents.bin").exists():
        aux = load_matrix_binary(d / "aux_currents.bin")
    return CharModeSet(
        meta["formulation"],
        np.array(lams),
        currents,
        float(meta["frequency_hz"]),
        float(meta["alpha"]),
        aux_currents=aux,
        classification=None if all(c == "unclassified" for c in cls) else cls,
    )
