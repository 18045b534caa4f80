"""Dense LU kernel used for Newton directions and inverse-norm estimates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_RTOL = 1e-14


class SingularMatrix(ArithmeticError):
    """Raised when a pivot falls below the relative degeneracy threshold."""

    def __init__(self, column: int, pivot: float, threshold: float):
        super().__init__(
            f"matrix is numerically singular: pivot {pivot:.3e} in column {column} "
            f"below threshold {threshold:.3e}"
        )
        self.column = column
        self.pivot = pivot
        self.threshold = threshold


@dataclass(frozen=True)
class LUFactors:
    """Row-pivoted factorization ``A[piv] = L @ U`` with L unit lower triangular.

    ``lu`` stores U on and above the diagonal and the multipliers of L below it.
    """

    lu: np.ndarray
    piv: np.ndarray
    sign: int

    @property
    def n(self) -> int:
        return self.lu.shape[0]

    def lower(self) -> np.ndarray:
        return np.tril(self.lu, -1) + np.eye(self.n)

    def upper(self) -> np.ndarray:
        return np.triu(self.lu)

    def reconstruct(self) -> np.ndarray:
        """Return the factored matrix, undoing the row permutation."""
        A = np.empty_like(self.lu)
        A[self.piv] = self.lower() @ self.upper()
        return A


def as_matrix(A) -> np.ndarray:
    A = np.array(A, dtype=float)
    if A.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def lu_factor(A) -> LUFactors:
    """LU factorization with partial (row) pivoting.

    Raises SingularMatrix when the selected pivot is smaller than
    ``1e-14 * max|A|``.
    """
    a = as_matrix(A)
    n, m = a.shape
    if n != m:
        raise ValueError(f"matrix must be square, got {n}x{m}")
    threshold = PIVOT_RTOL * (np.max(np.abs(a)) if a.size else 0.0)
    piv = np.arange(n)
    sign = 1
    for k in range(n):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        pivot = a[p, k]
        if pivot == 0.0 or abs(pivot) < threshold:
            raise SingularMatrix(k, float(pivot), threshold)
        if p != k:
            a[[k, p]] = a[[p, k]]
            piv[[k, p]] = piv[[p, k]]
            sign = -sign
        a[k + 1:, k] /= pivot
        a[k + 1:, k + 1:] -= np.outer(a[k + 1:, k], a[k, k + 1:])
    a.flags.writeable = False
    piv.flags.writeable = False
    return LUFactors(a, piv, sign)


def solve_linear(lu: LUFactors, b) -> np.ndarray:
    """Solve ``A x = b`` from the factors of A."""
    b = np.asarray(b, dtype=float)
    n = lu.n
    if b.shape != (n,):
        raise ValueError(f"right-hand side has shape {b.shape}, expected ({n},)")
    LU = lu.lu
    x = b[lu.piv].copy()
    for i in range(1, n):
        x[i] -= LU[i, :i] @ x[:i]
    for i in range(n - 1, -1, -1):
        x[i] = (x[i] - LU[i, i + 1:] @ x[i + 1:]) / LU[i, i]
    return x


def solve_transposed(lu: LUFactors, b) -> np.ndarray:
    """Solve ``A.T x = b`` from the factors of A."""
    b = np.asarray(b, dtype=float)
    n = lu.n
    if b.shape != (n,):
        raise ValueError(f"right-hand side has shape {b.shape}, expected ({n},)")
    LU = lu.lu
    z = b.copy()
    # U.T is lower triangular with U's diagonal
    for i in range(n):
        z[i] = (z[i] - LU[:i, i] @ z[:i]) / LU[i, i]
    # L.T is unit upper triangular
    for i in range(n - 2, -1, -1):
        z[i] -= LU[i + 1:, i] @ z[i + 1:]
    x = np.empty(n)
    x[lu.piv] = z
    return x


def inverse_spectral_norm(A, tol: float = 1e-10, max_iter: int = 500) -> float:
    """Estimate ``||A^{-1}||_2`` by power iteration on ``A^{-1} A^{-T}``.

    The Rayleigh quotient of the symmetrized product converges to its largest
    eigenvalue, which is the squared spectral norm of the inverse.
    """
    lu = A if isinstance(A, LUFactors) else lu_factor(A)
    n = lu.n
    v = np.random.default_rng(0).standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        z = solve_linear(lu, solve_transposed(lu, v))
        lam_new = float(v @ z)
        v = z / np.linalg.norm(z)
        if abs(lam_new - lam) <= tol * lam_new:
            lam = lam_new
            break
        lam = lam_new
    return float(np.sqrt(lam))
