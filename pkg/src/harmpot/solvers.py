"""Sparse linear algebra backbone.

Matrices are ``scipy.sparse`` CSR matrices throughout. The module offers a
Jacobi-preconditioned conjugate gradient, a sparse direct solver for symmetric
(possibly indefinite) systems with one step of iterative refinement, SVD-based
nullity with a relative threshold (dense and sparse variants) and exact rank
over the prime field GF(p).
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    CapExceeded,
    NonFiniteInput,
    SingularMatrix,
    SolverDiverged,
)

GF_PRIME = 2**31 - 1
DEFAULT_DENSE_CAP = 20_000
DENSE_CAP_ENV = "HARMPOT_DENSE_CAP"


def dense_cap() -> int:
    """DOF cap for dense SVD work; overridable through ``HARMPOT_DENSE_CAP``."""
    value = os.environ.get(DENSE_CAP_ENV)
    return int(value) if value else DEFAULT_DENSE_CAP


def as_csr(A) -> sp.csr_matrix:
    A = sp.csr_matrix(A)
    A.sum_duplicates()
    A.sort_indices()
    return A


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-12
    max_iterations: int | None = None
    preconditioner: str = "jacobi"

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if self.preconditioner not in ("none", "jacobi"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")


@dataclass
class CGResult:
    x: np.ndarray
    residual: float
    iterations: int
    history: list = field(default_factory=list)
    iterates: list | None = None


def cg_solve(A, b, config: SolverConfig = SolverConfig(), keep_iterates=False) -> CGResult:
    """Preconditioned conjugate gradient for SPD ``A``.

    Stops when ``||Ax - b|| <= tol * ||b||``. ``history`` holds the true
    residual 2-norm after every iteration; ``iterates`` (optional) the
    successive approximations, used to check energy-norm monotonicity.
    """
    A = as_csr(A)
    b = np.asarray(b, dtype=float)
    if not (np.all(np.isfinite(A.data)) and np.all(np.isfinite(b))):
        raise NonFiniteInput("matrix or right-hand side contains non-finite values")
    n = b.shape[0]
    max_it = config.max_iterations if config.max_iterations is not None else 10 * max(n, 1)

    if config.preconditioner == "jacobi":
        d = A.diagonal()
        if np.any(d <= 0):
            raise SingularMatrix("Jacobi preconditioner needs a positive diagonal")
        inv_d = 1.0 / d
    else:
        inv_d = np.ones(n)

    x = np.zeros(n)
    bnorm = np.linalg.norm(b)
    iterates = [x.copy()] if keep_iterates else None
    if bnorm == 0.0:
        return CGResult(x, 0.0, 0, [0.0], iterates)
    target = config.tol * bnorm

    r = b.copy()
    z = inv_d * r
    p = z.copy()
    rz = r @ z
    history = [np.linalg.norm(r)]
    for it in range(1, max_it + 1):
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            raise SingularMatrix("matrix is not positive definite")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        # recompute the true residual now and then to avoid drift
        if it % 50 == 0:
            r = b - A @ x
        rnorm = np.linalg.norm(r)
        history.append(rnorm)
        if keep_iterates:
            iterates.append(x.copy())
        if rnorm <= target:
            true_r = np.linalg.norm(b - A @ x)
            if true_r <= target:
                return CGResult(x, true_r / bnorm, it, history, iterates)
            r = b - A @ x
        z = inv_d * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverDiverged(
        f"CG did not reach tol={config.tol:g} in {max_it} iterations "
        f"(residual {history[-1] / bnorm:.3e})"
    )


class SymmetricFactor:
    """Sparse direct factorization of a symmetric, possibly indefinite matrix.

    SuperLU with threshold partial pivoting stands in for an LDL^T
    factorization; ``solve`` applies one step of iterative refinement.
    """

    PIVOT_RTOL = 1e-14

    def __init__(self, A):
        self.A = sp.csc_matrix(as_csr(A))
        if self.A.shape[0] != self.A.shape[1]:
            raise ValueError("matrix must be square")
        if not np.all(np.isfinite(self.A.data)):
            raise NonFiniteInput("matrix contains non-finite values")
        try:
            self._lu = spla.splu(self.A, permc_spec="MMD_AT_PLUS_A")
        except RuntimeError as exc:
            raise SingularMatrix(str(exc)) from exc
        piv = np.abs(self._lu.U.diagonal())
        if piv.size and piv.min() <= self.PIVOT_RTOL * piv.max():
            raise SingularMatrix(
                f"pivot ratio {piv.min() / piv.max():.2e} below {self.PIVOT_RTOL:g}"
            )

    def solve(self, B):
        B = np.asarray(B, dtype=float)
        X = self._lu.solve(B)
        R = B - self.A @ X
        X = X + self._lu.solve(R)
        return X


def ldlt_solve(A, B):
    """Solve ``A X = B`` for symmetric nonsingular ``A`` (one or many right-hand sides)."""
    return SymmetricFactor(A).solve(B)


def svd_nullity(A, rel_threshold=1e-10, cap=None):
    """Nullity and orthonormal null basis of a dense matrix via the SVD.

    A singular value counts as zero when it is at most
    ``rel_threshold * sigma_max``. Rows are zero-padded when the matrix is
    wide so the full right singular basis is available.
    """
    A = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    m, n = A.shape
    cap = dense_cap() if cap is None else cap
    if n > cap:
        raise CapExceeded(f"{n} columns exceed the dense cap {cap}")
    if n == 0:
        return 0, np.zeros((0, 0))
    if m < n:
        A = np.vstack([A, np.zeros((n - m, n))])
    _, s, vt = sla.svd(A, full_matrices=False, lapack_driver="gesdd")
    smax = s[0] if s.size else 0.0
    if smax == 0.0:
        return n, np.eye(n)
    null = s <= rel_threshold * smax
    return int(null.sum()), vt[null].T.copy()


def svd_rank(A, rel_threshold=1e-10) -> int:
    """Floating rank from singular values alone (no singular vectors)."""
    A = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    if A.size == 0:
        return 0
    s = sla.svdvals(A)
    return int((s > rel_threshold * s[0]).sum()) if s[0] > 0 else 0


def sparse_nullity(A, rel_threshold=1e-10, k0=6):
    """Nullity of a sparse matrix for problems too large for a dense SVD.

    The smallest eigenpairs of ``A^T A`` are found by shift-invert Lanczos
    with a small negative shift. Each eigenvector ``x`` is then scored by the
    singular-value estimate ``||A x||`` (computed from ``A`` itself, not from
    the squared spectrum), and counted as null when that estimate is at most
    ``rel_threshold * sigma_max``. The requested number of eigenpairs grows
    until at least one non-null mode is seen.
    """
    A = as_csr(A)
    n = A.shape[1]
    if n == 0:
        return 0, np.zeros((0, 0))
    L = (A.T @ A).tocsc()
    sigma_max = np.sqrt(abs(spla.eigsh(L, k=1, which="LA", return_eigenvectors=False)[0]))
    if sigma_max == 0.0:
        return n, np.eye(n)
    shift = 1e-8 * sigma_max**2
    lu = spla.splu((L + shift * sp.identity(n, format="csc")).tocsc())
    op = spla.LinearOperator((n, n), matvec=lu.solve, dtype=float)
    k = min(k0, n - 1)
    while True:
        rng = np.random.default_rng(0)
        # eigenvalues mu of (L + shift)^-1; largest mu <-> smallest eigenvalues of L
        mu, vecs = spla.eigsh(op, k=k, which="LA", v0=rng.standard_normal(n), tol=0)
        order = np.argsort(-mu)
        vecs = vecs[:, order]
        est = np.linalg.norm(A @ vecs, axis=0)
        null = est <= rel_threshold * sigma_max
        if not null.all() or k >= n - 1:
            break
        k = min(2 * k, n - 1)
    basis = vecs[:, null]
    if basis.shape[1]:
        basis, _ = np.linalg.qr(basis)
    return int(null.sum()), basis


def nullity(A, rel_threshold=1e-10, dense_limit=1500, cap=None):
    """Dispatch to :func:`svd_nullity` for small problems, :func:`sparse_nullity` otherwise."""
    n = A.shape[1]
    cap = dense_cap() if cap is None else cap
    if n > cap:
        raise CapExceeded(f"{n} columns exceed the DOF cap {cap}")
    if n <= dense_limit:
        return svd_nullity(A, rel_threshold, cap=cap)
    return sparse_nullity(A, rel_threshold)


def gf_rank(A, p=GF_PRIME) -> int:
    """Exact rank of an integer matrix over GF(p).

    Sparse row elimination: each incoming row is reduced against the stored
    pivot rows (keyed by leading column) until it either vanishes or brings
    a new leading column. Rows are processed shortest first to limit fill.
    """
    A = as_csr(A)
    if A.shape[0] > A.shape[1]:
        A = as_csr(A.T)
    data = np.rint(A.data).astype(np.int64) % p
    rows = []
    for i in range(A.shape[0]):
        s, e = A.indptr[i], A.indptr[i + 1]
        row = {int(c): int(v) for c, v in zip(A.indices[s:e], data[s:e]) if v}
        if row:
            rows.append(row)
    rows.sort(key=len)
    pivots = {}
    for row in rows:
        while row:
            lead = min(row)
            piv = pivots.get(lead)
            if piv is None:
                inv = pow(row[lead], p - 2, p)
                pivots[lead] = {c: v * inv % p for c, v in row.items()}
                break
            f = row[lead]
            for c, v in piv.items():
                nv = (row.get(c, 0) - f * v) % p
                if nv:
                    row[c] = nv
                else:
                    row.pop(c, None)
    return len(pivots)
