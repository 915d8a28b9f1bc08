"""Complex sparse linear algebra: LU preconditioners and counted GMRES.

The solver stack is deliberately small: sparse LU factorizations (SuperLU
with partial pivoting and a fill-reducing column ordering) wrapped as
preconditioners, and a full, non-restarted left-preconditioned GMRES whose
iteration count and preconditioned residual history are the quantities the
rest of the package reasons about.  Iteration counts feed the surrogate;
timings feed the cost model.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "SingularMatrixError",
    "BreakdownError",
    "LuPreconditioner",
    "SolveReport",
    "CostModel",
    "CostPolicy",
    "lu_factor",
    "gmres_left",
    "contraction_factor",
    "save_matrix_market",
    "load_matrix_market",
]

# Densification guard for the contraction-factor helper.
_DENSE_GUARD = 2000


class SingularMatrixError(ValueError):
    """The matrix admits no usable LU factorization."""


class BreakdownError(RuntimeError):
    """GMRES produced a zero Arnoldi vector while the residual is large."""


def as_complex_csr(matrix) -> sp.csr_matrix:
    """Coerce to square complex CSR with canonical (deduplicated) structure."""
    m = sp.csr_matrix(matrix, dtype=np.complex128)
    if m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    m.sum_duplicates()
    return m


@dataclass
class LuPreconditioner:
    """Sparse LU factors of a reference matrix, applied as its inverse."""

    factors: spla.SuperLU
    source_param: np.ndarray | None
    build_time: float
    n: int
    nnz: int

    def apply(self, rhs: np.ndarray) -> np.ndarray:
        return self.factors.solve(np.asarray(rhs, dtype=np.complex128))


def lu_factor(matrix, source_param: np.ndarray | None = None) -> LuPreconditioner:
    """Factor a square complex sparse matrix for use as a preconditioner."""
    a = as_complex_csr(matrix)
    start = time.perf_counter()
    try:
        factors = spla.splu(a.tocsc())
    except RuntimeError as exc:  # SuperLU reports exact singularity this way
        raise SingularMatrixError(str(exc)) from exc
    elapsed = time.perf_counter() - start
    if not np.all(np.isfinite(factors.U.diagonal())):
        raise SingularMatrixError("non-finite pivot in U factor")
    return LuPreconditioner(
        factors=factors,
        source_param=None if source_param is None else np.asarray(source_param, float),
        build_time=elapsed,
        n=a.shape[0],
        nnz=a.nnz,
    )


@dataclass
class SolveReport:
    """Outcome of one preconditioned GMRES solve."""

    solution: np.ndarray
    iterations: int
    converged: bool
    residual_history: list[float]
    krylov_time: float
    true_relative_residual: float = np.nan
    preconditioned_relative_residual: float = np.nan


def _givens(f: complex, g: float) -> tuple[float, complex]:
    """Rotation (c real, s complex) zeroing g against f; g is real here."""
    if f == 0:
        return 0.0, 1.0 + 0.0j
    r = np.hypot(abs(f), g)
    c = abs(f) / r
    s = (f / abs(f)) * (g / r)
    return c, s


def gmres_left(
    pc: LuPreconditioner,
    matrix,
    rhs: np.ndarray,
    tol: float = 1e-5,
    max_iter: int | None = None,
) -> SolveReport:
    """Full (non-restarted) GMRES on the left-preconditioned system.

    Solves P A x = P b with P the action of ``pc`` and stops when the
    preconditioned relative residual |P(b - A x_m)| / |P b| drops to
    ``tol``.  The residual history holds the relative residuals from the
    rotation recursion, entry 0 being 1.0, so the iteration count equals
    ``len(history) - 1``.  Hitting ``max_iter`` returns an unconverged
    report; a vanishing Arnoldi norm with a large residual raises
    :class:`BreakdownError`.
    """
    a = as_complex_csr(matrix)
    b = np.asarray(rhs, dtype=np.complex128)
    n = a.shape[0]
    if b.shape != (n,):
        raise ValueError("right-hand side does not match the matrix")
    if not 0 < tol < 1:
        raise ValueError("tolerance must lie in (0, 1)")
    if max_iter is None:
        max_iter = n
    max_iter = min(max_iter, n)

    start = time.perf_counter()
    pb = pc.apply(b)
    beta = float(np.linalg.norm(pb))
    if beta == 0.0:
        return SolveReport(
            solution=np.zeros(n, dtype=np.complex128),
            iterations=0,
            converged=True,
            residual_history=[0.0],
            krylov_time=time.perf_counter() - start,
            true_relative_residual=0.0,
            preconditioned_relative_residual=0.0,
        )

    basis = np.empty((max_iter + 1, n), dtype=np.complex128)
    basis[0] = pb / beta
    hess = np.zeros((max_iter + 1, max_iter), dtype=np.complex128)
    cos = np.zeros(max_iter)
    sin = np.zeros(max_iter, dtype=np.complex128)
    g = np.zeros(max_iter + 1, dtype=np.complex128)
    g[0] = beta
    history = [1.0]

    steps = 0
    breakdown = False
    for j in range(max_iter):
        w = pc.apply(a @ basis[j])
        # Modified Gram-Schmidt with one unconditional re-pass: the
        # preconditioned operators here cluster near the identity and a
        # second sweep keeps the recursion residual trustworthy.
        for _ in range(2):
            for i in range(j + 1):
                h = np.vdot(basis[i], w)
                hess[i, j] += h
                w -= h * basis[i]
        wnorm = float(np.linalg.norm(w))
        hess[j + 1, j] = wnorm

        # Apply accumulated rotations to the new column, then a fresh one.
        for i in range(j):
            hi, hi1 = hess[i, j], hess[i + 1, j]
            hess[i, j] = cos[i] * hi + sin[i] * hi1
            hess[i + 1, j] = -np.conj(sin[i]) * hi + cos[i] * hi1
        c, s = _givens(hess[j, j], wnorm)
        cos[j], sin[j] = c, s
        hess[j, j] = c * hess[j, j] + s * wnorm
        hess[j + 1, j] = 0.0
        g[j + 1] = -np.conj(s) * g[j]
        g[j] = c * g[j]

        steps = j + 1
        rel = abs(g[j + 1]) / beta
        history.append(float(rel))
        if rel <= tol:
            break
        if wnorm <= 1e-14 * beta:
            breakdown = True
            break
        basis[j + 1] = w / wnorm

    converged = history[-1] <= tol
    if breakdown and not converged:
        raise BreakdownError(
            f"Arnoldi norm vanished at step {steps} with relative residual "
            f"{history[-1]:.3e} > tol {tol:.1e}"
        )

    # Back-substitute the small triangular system for the minimizer.
    y = np.zeros(steps, dtype=np.complex128)
    for i in range(steps - 1, -1, -1):
        y[i] = (g[i] - hess[i, i + 1 : steps] @ y[i + 1 : steps]) / hess[i, i]
    x = basis[:steps].T @ y
    elapsed = time.perf_counter() - start

    residual = b - a @ x
    bnorm = float(np.linalg.norm(b))
    true_rel = float(np.linalg.norm(residual)) / bnorm
    pre_rel = float(np.linalg.norm(pc.apply(residual))) / beta
    return SolveReport(
        solution=x,
        iterations=steps,
        converged=converged,
        residual_history=history,
        krylov_time=elapsed,
        true_relative_residual=true_rel,
        preconditioned_relative_residual=pre_rel,
    )


def contraction_factor(pc: LuPreconditioner, matrix) -> float:
    """Spectral norm of I - P A, computed densely (test helper, small n)."""
    a = as_complex_csr(matrix)
    n = a.shape[0]
    if n > _DENSE_GUARD:
        raise ValueError(f"dense contraction factor limited to n <= {_DENSE_GUARD}")
    pa = pc.apply(a.toarray())
    return float(np.linalg.norm(np.eye(n) - pa, 2))


@dataclass(frozen=True)
class CostPolicy:
    """How solver costs are accounted during training and execution.

    ``synthetic`` prices a preconditioner build at ``c_build * nnz`` and a
    Krylov iteration at ``c_iter * nnz`` of the reference matrix, giving
    machine-independent, reproducible cost bookkeeping; ``measured`` uses
    wall-clock seconds.
    """

    mode: str = "synthetic"
    c_build: float = 1e-4
    c_iter: float = 1e-6

    def __post_init__(self):
        if self.mode not in ("measured", "synthetic"):
            raise ValueError("mode must be 'measured' or 'synthetic'")
        if self.c_build <= 0 or self.c_iter <= 0:
            raise ValueError("cost constants must be positive")

    @property
    def cost_ratio(self) -> float:
        return self.c_build / self.c_iter


@dataclass(frozen=True)
class CostModel:
    """Build cost vs. per-iteration cost of the solver stack.

    ``synthetic`` mode replaces measured seconds with deterministic
    formulas (both proportional to the matrix nnz) so experiment reports
    are machine independent; ``measured`` carries wall-clock seconds.
    """

    tau_pc: float
    tau_krylov: float
    mode: str = "measured"

    def __post_init__(self):
        if self.tau_pc <= 0 or self.tau_krylov <= 0:
            raise ValueError("both costs must be positive")
        if self.mode not in ("measured", "synthetic"):
            raise ValueError("mode must be 'measured' or 'synthetic'")

    @property
    def cost_ratio(self) -> float:
        """Build time over iteration time: the break-even iteration count."""
        return self.tau_pc / self.tau_krylov

    @classmethod
    def synthetic(cls, nnz: int, c_build: float, c_iter: float) -> "CostModel":
        return cls(tau_pc=c_build * nnz, tau_krylov=c_iter * nnz, mode="synthetic")


def save_matrix_market(path, matrix_or_vector) -> None:
    """Write a sparse matrix or dense vector in Matrix Market format."""
    obj = matrix_or_vector
    if not sp.issparse(obj):
        obj = np.asarray(obj)
        if obj.ndim == 1:
            obj = obj.reshape(-1, 1)
    scipy.io.mmwrite(str(path), obj)


def load_matrix_market(path):
    """Read back a Matrix Market file; vectors come back 1-d."""
    obj = scipy.io.mmread(str(path))
    if sp.issparse(obj):
        return obj.tocsr()
    arr = np.asarray(obj)
    if arr.ndim == 2 and arr.shape[1] == 1:
        return arr.ravel()
    return arr
