"""Linear-algebra engine: instrumented GMRES, implicitly restarted Arnoldi
on operator applications, dense reference eigendecomposition, and SVD
condition numbers."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

DENSE_LIMIT = 4096

GMRES_TOL = 1e-10
GMRES_RESTART = 200
GMRES_MAX_ITER = 2000

ARNOLDI_TOL = 1e-8


class SolverError(RuntimeError):
    """Iterative solver failed to reach the requested tolerance."""


@dataclass
class SolveStats:
    """Outer/inner iteration bookkeeping for an eigensolve or linear solve."""

    outer_iterations: int = 0
    inner_iterations: list[int] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def mean_inner_iterations(self) -> float:
        if not self.inner_iterations:
            return 0.0
        return float(np.mean(self.inner_iterations))


@dataclass
class EigResult:
    values: np.ndarray
    vectors: np.ndarray
    converged: np.ndarray
    residuals: np.ndarray


def gmres(apply_A, b, tol: float = GMRES_TOL, restart: int = GMRES_RESTART,
          max_iter: int = GMRES_MAX_ITER):
    """Restarted GMRES; returns (x, inner iteration count).

    apply_A may be a matrix or a callable v -> A v.  Raises SolverError with
    the achieved residual when the iteration budget is exhausted.
    """
    b = np.asarray(b)
    n = b.shape[0]
    if callable(apply_A):
        dtype = getattr(apply_A, "dtype", np.complex128)
        op = spla.LinearOperator((n, n), matvec=apply_A, dtype=dtype)
    else:
        op = apply_A
    count = 0

    def cb(_):
        nonlocal count
        count += 1

    x, info = spla.gmres(
        op,
        b,
        rtol=tol,
        atol=0.0,
        restart=min(restart, n),
        maxiter=max(1, int(np.ceil(max_iter / restart))),
        callback=cb,
        callback_type="pr_norm",
    )
    if info != 0:
        bnorm = np.linalg.norm(b)
        res = np.linalg.norm(b - (op @ x if not callable(apply_A) else apply_A(x)))
        raise SolverError(
            f"GMRES did not converge in {count} iterations "
            f"(relative residual {res / bnorm:.3e}, tol {tol:g})"
        )
    return x, count


class InverseOperator:
    """Applies x -> Z^{-1} (K x) for the inner solves of the eigensolver.

    method 'lu' factors Z once; method 'gmres' runs an iterative inner solve
    per application and records its iteration count in `stats`.
    """

    def __init__(self, Z, K=None, method: str = "gmres", tol: float = GMRES_TOL,
                 restart: int = GMRES_RESTART, max_iter: int = GMRES_MAX_ITER):
        if method not in ("gmres", "lu"):
            raise ValueError("method must be 'gmres' or 'lu'")
        self.Z = Z
        self.K = K
        self.method = method
        self.tol = tol
        self.restart = restart
        self.max_iter = max_iter
        self.stats = SolveStats()
        self._lu = sla.lu_factor(Z) if method == "lu" else None

    @property
    def shape(self):
        return self.Z.shape

    @property
    def dtype(self):
        return np.asarray(self.Z).dtype

    def __call__(self, x):
        rhs = x if self.K is None else self.K @ x
        if self.method == "lu":
            return sla.lu_solve(self._lu, rhs)
        sol, its = gmres(self.Z, rhs, self.tol, self.restart, self.max_iter)
        self.stats.inner_iterations.append(its)
        return sol


def arnoldi_eigs(apply_op, n: int, n_modes: int, tol: float = ARNOLDI_TOL,
                 which: str = "LM", seed: int = 0) -> EigResult:
    """Largest-magnitude eigenpairs of a linear operator by implicitly
    restarted Arnoldi with a deterministic seeded start vector."""
    if n_modes >= n - 1:
        raise ValueError("n_modes must be below the operator dimension - 1")
    dtype = getattr(apply_op, "dtype", np.complex128)
    op = spla.LinearOperator((n, n), matvec=apply_op, dtype=dtype)
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n)
    if np.issubdtype(op.dtype, np.complexfloating):
        v0 = v0 + 1j * rng.standard_normal(n)
    ncv = min(n, max(2 * n_modes + 10, 40))
    vals, vecs = spla.eigs(op, k=n_modes, which=which, tol=tol, v0=v0, ncv=ncv)
    residuals = np.empty(n_modes)
    for i in range(n_modes):
        v = vecs[:, i]
        residuals[i] = np.linalg.norm(apply_op(v) - vals[i] * v) / np.linalg.norm(v)
    converged = residuals <= max(tol, 1e-12) * 100
    return EigResult(vals, vecs, converged, residuals)


def dense_eigs(A) -> EigResult:
    """Full dense spectrum (reference and null-space diagnostics)."""
    A = np.asarray(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    if A.shape[0] > DENSE_LIMIT:
        raise ValueError(f"dense eigendecomposition limited to N <= {DENSE_LIMIT}")
    vals, vecs = sla.eig(A)
    residuals = np.linalg.norm(A @ vecs - vecs * vals[None, :], axis=0)
    return EigResult(vals, vecs, np.ones(len(vals), bool), residuals)


def condition_number(A) -> float:
    """sigma_max / sigma_min by full SVD."""
    A = np.asarray(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    if A.shape[0] > DENSE_LIMIT:
        raise ValueError(f"condition_number limited to N <= {DENSE_LIMIT}")
    s = sla.svdvals(A)
    return float(s[0] / s[-1])


def save_spectrum_csv(path, values) -> None:
    """Dump eigenvalues as (index, re, im) rows."""
    with open(path, "w") as fh:
        fh.write("index,re,im\n")
        for i, z in enumerate(values):
            fh.write(f"{i},{complex(z).real:.17g},{complex(z).imag:.17g}\n")
