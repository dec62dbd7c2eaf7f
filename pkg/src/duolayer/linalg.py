"""Dense linear-algebra primitives shared by the rest of the package.

Everything operates on plain float64 numpy arrays.  The helpers here add the
input validation and the fixed numerical-rank tolerance that the other
modules rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Singular values below RANK_RTOL * sigma_max count as zero.
RANK_RTOL = 1e-10


def as_matrix(values) -> np.ndarray:
    """Coerce to a 2-D float64 array, rejecting NaN/Inf entries."""
    m = np.asarray(values, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D array, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    return m


def as_vector(values) -> np.ndarray:
    """Coerce to a 1-D float64 array, rejecting NaN/Inf entries."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D array, got ndim={v.ndim}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector entries must be finite")
    return v


def kron(a, b) -> np.ndarray:
    """Kronecker product of two matrices."""
    return np.kron(as_matrix(a), as_matrix(b))


def rank(m, rtol: float = RANK_RTOL) -> int:
    """Numerical rank: singular values above rtol * sigma_max."""
    m = as_matrix(m)
    if m.size == 0:
        return 0
    sigma = np.linalg.svd(m, compute_uv=False)
    if sigma[0] == 0.0:
        return 0
    return int(np.count_nonzero(sigma > rtol * sigma[0]))


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of a square matrix plus numerical ranks of m and m @ m.

    rank == rank_squared exactly when the zero eigenvalue (if present) is
    non-defective, which is what the stability argument downstream needs.
    """

    eigenvalues: np.ndarray  # complex, sorted by (real, imag)
    rank: int
    rank_squared: int


def eig(m) -> Spectrum:
    """Eigenvalues of a square matrix together with ranks of m and m @ m.

    Eigenvalues are sorted by real part, then imaginary part.  Exactly
    symmetric input is routed through the symmetric eigensolver, so its
    eigenvalues come back with zero imaginary part.  A failure of the QR
    iteration to converge propagates as np.linalg.LinAlgError.
    """
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"eig needs a square matrix, got shape {m.shape}")
    if np.array_equal(m, m.T):
        values = np.linalg.eigvalsh(m).astype(complex)
    else:
        values = np.linalg.eigvals(m)
    order = np.lexsort((values.imag, values.real))
    return Spectrum(values[order], rank(m), rank(m @ m))


def solve_least_squares(a, b) -> np.ndarray:
    """Minimum-norm least-squares solution of a @ x = b."""
    a = as_matrix(a)
    b = as_vector(b)
    if a.shape[0] != b.shape[0]:
        raise ValueError(
            f"incompatible shapes: a is {a.shape}, b has {b.shape[0]} entries"
        )
    x, *_ = np.linalg.lstsq(a, b, rcond=None)
    return x
