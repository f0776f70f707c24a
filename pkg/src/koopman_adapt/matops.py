"""Dense matrix kernels: pseudo-inverses, the matrix-inversion lemma, and
small hygiene helpers used by the estimator covariance recursion.

All operations are pure: inputs are never mutated.
"""

import numpy as np

from .errors import NotSquare, SingularGram, SingularInner

# Conditioning threshold beyond which the full-row-rank route is rejected.
COND_LIMIT = 1e12


def _as_matrix(A, name: str = "A") -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise ValueError(f"{name} must be a 2-D matrix with at least one row "
                         f"and column, got shape {A.shape}")
    if not np.isfinite(A).all():
        raise ValueError(f"{name} contains NaN or Inf entries")
    return A


def _require_square(A, name: str = "A") -> np.ndarray:
    A = _as_matrix(A, name)
    if A.shape[0] != A.shape[1]:
        raise NotSquare(f"{name} must be square, got shape {A.shape}")
    return A


def pinv_full_row_rank(A) -> np.ndarray:
    """Pseudo-inverse of a full-row-rank matrix, A+ = A.T @ inv(A @ A.T).

    Raises
    ------
    SingularGram
        If the condition estimate of ``A @ A.T`` exceeds ``COND_LIMIT``;
        callers should fall back to :func:`pinv_svd`.
    """
    A = _as_matrix(A)
    gram = A @ A.T
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularGram(
            f"A @ A.T condition estimate {cond:.3e} exceeds {COND_LIMIT:.1e}; "
            "matrix is not (numerically) full row rank")
    # gram is symmetric, so solve(gram, A).T == A.T @ inv(gram)
    return np.linalg.solve(gram, A).T


def pinv_svd(A, tol: float | None = None) -> np.ndarray:
    """SVD-based pseudo-inverse; total on finite input.

    Singular values below ``tol * sigma_max`` are truncated to zero. The
    default ``tol`` is ``max(rows, cols) * machine epsilon``.
    """
    A = _as_matrix(A)
    if tol is None:
        tol = max(A.shape) * np.finfo(float).eps
    if tol < 0:
        raise ValueError(f"tol must be >= 0, got {tol}")
    u, s, vt = np.linalg.svd(A, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((A.shape[1], A.shape[0]))
    keep = s > tol * s[0]
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    return (vt.T * s_inv) @ u.T


def woodbury(A, B, C, D) -> np.ndarray:
    """Matrix-inversion lemma: (inv(A) + B @ inv(C) @ D)^-1.

    Computed as ``A - A @ B @ inv(D @ A @ B + C) @ D @ A``, which requires
    only the inner (small) inverse. A and C must be square and non-singular
    and the dimensions conformable.
    """
    A = _require_square(A, "A")
    C = _require_square(C, "C")
    B = _as_matrix(B, "B")
    D = _as_matrix(D, "D")
    n, m = A.shape[0], C.shape[0]
    if B.shape != (n, m) or D.shape != (m, n):
        raise ValueError(
            f"conformability: need B {n}x{m} and D {m}x{n}, "
            f"got B {B.shape} and D {D.shape}")
    DA = D @ A
    inner = DA @ B + C
    cond = np.linalg.cond(inner)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularInner(
            f"(D @ A @ B + C) condition estimate {cond:.3e} exceeds "
            f"{COND_LIMIT:.1e}")
    return A - (A @ B) @ np.linalg.solve(inner, DA)


def trace(A) -> float:
    """Sum of diagonal entries of a square matrix."""
    A = _require_square(A)
    return float(np.trace(A))


def symmetrize(A) -> np.ndarray:
    """Return (A + A.T) / 2."""
    A = _require_square(A)
    return (A + A.T) / 2.0
