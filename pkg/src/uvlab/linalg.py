"""Operator norms and extremal eigenvalues."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DENSE_LIMIT = 2048


class ConvergenceError(RuntimeError):
    """An iterative solver ran out of budget."""


def power_norm(apply, apply_adjoint, dim: int, tol: float = 1e-8, max_iter: int = 10_000,
               seed: int = 0) -> tuple[float, float]:
    """Largest singular value by power iteration on A^* A; returns (norm, relative change)."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    x /= np.linalg.norm(x)
    sigma = 0.0
    change = np.inf
    for _ in range(max_iter):
        y = apply_adjoint(apply(x))
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0, 0.0
        new = np.sqrt(ny)
        change = abs(new - sigma) / new
        sigma = new
        x = y / ny
        if change < tol:
            return float(sigma), float(change)
    raise ConvergenceError(f"power iteration stalled at relative change {change:.2e}")


def operator_norm(A, tol: float = 1e-8, max_iter: int = 10_000) -> float:
    """Spectral norm: dense SVD up to DENSE_LIMIT, power iteration beyond."""
    if hasattr(A, "matrix"):
        A = A.matrix
    if min(A.shape) == 0:
        return 0.0
    if max(A.shape) <= DENSE_LIMIT:
        dense = A.toarray() if sp.issparse(A) else np.asarray(A)
        return float(np.linalg.norm(dense, 2))
    AH = A.conj().T
    return power_norm(lambda x: A @ x, lambda y: AH @ y, A.shape[1], tol, max_iter)[0]


def lowest_eigs(H, k: int = 1, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """k smallest eigenvalues and vectors of a Hermitian matrix: dense below DENSE_LIMIT, Lanczos above."""
    if hasattr(H, "matrix"):
        H = H.matrix
    n = H.shape[0]
    k = min(k, n)
    if n <= DENSE_LIMIT:
        dense = H.toarray() if sp.issparse(H) else np.asarray(H)
        vals, vecs = np.linalg.eigh(dense)
        return vals[:k], vecs[:, :k]
    v0 = np.ones(n, dtype=complex) / np.sqrt(n)
    try:
        vals, vecs = spla.eigsh(H, k=k, which="SA", v0=v0, tol=tol, maxiter=20 * n)
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceError("Lanczos did not converge") from exc
    order = np.argsort(vals)
    return vals[order], vecs[:, order]


def lowest_eigenpair(H, tol: float = 1e-10) -> tuple[float, np.ndarray]:
    vals, vecs = lowest_eigs(H, 1, tol)
    return float(vals[0]), vecs[:, 0]
