"""Dense linear-algebra substrate: vectorization, stability and Lyapunov solves.

All matrices are plain ``numpy`` arrays. ``vec`` stacks columns, so the
pair ``(i, j)`` (0-based) lives at flat position ``j * p + i``.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg

# Abscissae in [-STABILITY_TOL, 0) are reported unstable.
STABILITY_TOL = 1e-10


class NonStableDriftError(ValueError):
    """Raised when a drift matrix has an eigenvalue with real part >= -tol."""


class NumericalError(ArithmeticError):
    """Raised on failed factorizations or eigen-decompositions."""


def vec(a):
    """Column-stacking vectorization."""
    return np.asarray(a, dtype=float).ravel(order="F")


def unvec(v, p):
    return np.asarray(v, dtype=float).reshape((p, p), order="F")


def flat_index(i, j, p):
    """Flat position of the 0-based pair ``(i, j)`` in ``vec``."""
    return j * p + i


def transpose_permutation(p):
    """Index array ``perm`` with ``vec(A)[perm] == vec(A.T)``."""
    idx = np.arange(p * p).reshape((p, p), order="F")
    return idx.T.ravel(order="F")


def commutation_matrix(p):
    """The p^2 x p^2 permutation matrix K with ``K @ vec(A) == vec(A.T)``."""
    if p < 1:
        raise ValueError("p must be positive")
    q = p * p
    k = np.zeros((q, q))
    k[np.arange(q), transpose_permutation(p)] = 1.0
    return k


@dataclass(frozen=True)
class StabilityReport:
    abscissa: float
    stable: bool


def _square(a, name="matrix"):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def stability_margin(m, tol=STABILITY_TOL):
    """Spectral abscissa of ``m`` and whether it is at most ``-tol``.

    Examples
    --------
    >>> stability_margin(-np.eye(3))
    StabilityReport(abscissa=-1.0, stable=True)
    """
    m = _square(m, "drift")
    try:
        eig = np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue computation failed: {exc}") from exc
    if not np.all(np.isfinite(eig)):
        raise NumericalError("eigenvalue computation returned non-finite values")
    abscissa = float(eig.real.max())
    return StabilityReport(abscissa, abscissa < -tol)


def is_stable(m, tol=STABILITY_TOL):
    return stability_margin(m, tol).stable


def is_pd(a):
    """True when a Cholesky factorization of ``a`` succeeds."""
    try:
        np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return False
    return True


def lyapunov_operator(m):
    """Matrix of ``vec(S) -> vec(M S + S M^T)`` (the Kronecker sum)."""
    m = np.asarray(m, dtype=float)
    eye = np.eye(m.shape[0])
    return np.kron(eye, m) + np.kron(m, eye)


def solve_lyapunov(m, c, method="kron", check=True):
    """Solve ``M S + S M^T + C = 0`` for the equilibrium covariance ``S``.

    Parameters
    ----------
    m : (p, p) array
        Stable drift matrix.
    c : (p, p) array
        Symmetric positive definite volatility matrix.
    method : {"kron", "schur"}
        ``"kron"`` solves the p^2 x p^2 vectorized system by dense LU.
        ``"schur"`` uses the Bartels-Stewart algorithm, which is much
        faster for large ``p`` and used in inner optimization loops.
    check : bool
        Verify stability of ``m`` first.

    Returns
    -------
    sigma : (p, p) array
        Symmetric solution (explicitly symmetrized).
    """
    m = _square(m, "drift")
    c = _square(c, "volatility")
    if m.shape != c.shape:
        raise ValueError(f"shape mismatch: drift {m.shape}, volatility {c.shape}")
    if check:
        rep = stability_margin(m)
        if not rep.stable:
            raise NonStableDriftError(f"non-stable drift (abscissa {rep.abscissa:.3g})")
    p = m.shape[0]
    if method == "kron":
        op = lyapunov_operator(m)
        lu, piv = scipy.linalg.lu_factor(op, check_finite=False)
        if np.any(np.diag(lu) == 0.0):
            raise NumericalError("singular vectorized Lyapunov system")
        sigma = unvec(scipy.linalg.lu_solve((lu, piv), -vec(c)), p)
    elif method == "schur":
        sigma = scipy.linalg.solve_continuous_lyapunov(m, -c)
    else:
        raise ValueError(f"unknown method {method!r}")
    if not np.all(np.isfinite(sigma)):
        raise NumericalError(
            f"Lyapunov solve produced non-finite values (cond ~ {np.linalg.cond(lyapunov_operator(m)):.2e})"
        )
    return 0.5 * (sigma + sigma.T)
