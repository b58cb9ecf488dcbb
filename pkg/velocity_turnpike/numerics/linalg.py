"""
Dense and band LU solves with partial pivoting.

Dense matrices are plain 2-D numpy arrays (row-major). Collocation KKT
matrices are assembled into `BandedMatrix`, which keeps the dense-band layout
LAPACK expects and factors it with the band LU driver (gbsv), so the cost
grows linearly with the grid instead of cubically.
"""

import logging
import warnings
from typing import Sequence, Union

import numpy as np
import scipy.linalg
from scipy.linalg import LinAlgWarning, get_lapack_funcs

from ..errors import ModelValidationError, SingularMatrixError

logger = logging.getLogger(__name__)

EPS = np.finfo(float).eps


def _pivot_tolerance(n: int, scale: float) -> float:
    return max(n, 1) * EPS * max(scale, np.finfo(float).tiny)


def lu_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A x = b by LU with partial pivoting.

    Raises SingularMatrixError naming the first pivot that is zero relative to
    n·eps·max|A|.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ModelValidationError(f"lu_solve needs a square matrix, got shape {A.shape}")
    if b.shape[0] != A.shape[0]:
        raise ModelValidationError(
            f"Right-hand side has {b.shape[0]} rows, matrix has {A.shape[0]}"
        )
    n = A.shape[0]
    if n == 0:
        return b.copy()
    if not np.all(np.isfinite(A)) or not np.all(np.isfinite(b)):
        raise ModelValidationError("lu_solve received non-finite entries")

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)

    pivots = np.abs(np.diag(lu))
    bad = np.flatnonzero(pivots <= _pivot_tolerance(n, float(np.max(np.abs(A)))))
    if bad.size:
        raise SingularMatrixError("Matrix is singular to working precision", int(bad[0]))
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)


class BandedMatrix:
    """Square matrix with `lower` sub- and `upper` super-diagonals.

    Entry (i, j) lives in ab[upper + i - j, j]; entries outside the band are
    rejected so an assembly bug cannot silently drop coupling terms.
    """

    def __init__(self, n: int, lower: int, upper: int):
        if n < 1 or lower < 0 or upper < 0:
            raise ModelValidationError(f"Invalid band shape n={n}, lower={lower}, upper={upper}")
        self.n = n
        self.lower = lower
        self.upper = upper
        self.ab = np.zeros((lower + upper + 1, n))

    def add(self, i: int, j: int, value: float) -> None:
        offset = i - j
        if offset > self.lower or -offset > self.upper:
            raise ModelValidationError(
                f"Entry ({i}, {j}) lies outside band (lower={self.lower}, upper={self.upper})"
            )
        self.ab[self.upper + offset, j] += value

    def add_block(self, rows: Sequence[int], cols: Sequence[int], block: np.ndarray) -> None:
        block = np.atleast_2d(np.asarray(block, dtype=float))
        for a, i in enumerate(rows):
            for b, j in enumerate(cols):
                if block[a, b] != 0.0:
                    self.add(i, j, block[a, b])

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.n, self.n))
        for j in range(self.n):
            lo = max(0, j - self.upper)
            hi = min(self.n, j + self.lower + 1)
            for i in range(lo, hi):
                dense[i, j] = self.ab[self.upper + i - j, j]
        return dense

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(self.n)
        # diagonals beyond the matrix size hold nothing
        for d in range(-min(self.upper, self.n - 1), min(self.lower, self.n - 1) + 1):
            row = self.ab[self.upper + d]
            if d >= 0:
                out[d:] += row[: self.n - d] * x[: self.n - d]
            else:
                out[: self.n + d] += row[-d:] * x[-d:]
        return out

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Band LU with partial pivoting; pivot check as in `lu_solve`."""
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.n:
            raise ModelValidationError(f"Right-hand side has {b.shape[0]} rows, matrix has {self.n}")
        kl, ku = self.lower, self.upper
        work = np.zeros((2 * kl + ku + 1, self.n))
        work[kl:, :] = self.ab
        gbsv, = get_lapack_funcs(("gbsv",), (work, b))
        lu, piv, x, info = gbsv(kl, ku, work, b.copy(), overwrite_ab=True, overwrite_b=True)
        if info > 0:
            raise SingularMatrixError("Band matrix is exactly singular", int(info - 1))
        if info < 0:
            raise ModelValidationError(f"Illegal argument {-info} passed to band LU")
        pivots = np.abs(lu[kl + ku, :])
        bad = np.flatnonzero(pivots <= _pivot_tolerance(self.n, float(np.max(np.abs(self.ab)))))
        if bad.size:
            raise SingularMatrixError("Band matrix is singular to working precision", int(bad[0]))
        return x


Matrix = Union[np.ndarray, BandedMatrix]


def solve_linear(A: Matrix, b: np.ndarray) -> np.ndarray:
    """Dispatch to the band or dense LU depending on the matrix container."""
    if isinstance(A, BandedMatrix):
        return A.solve(b)
    return lu_solve(A, b)
