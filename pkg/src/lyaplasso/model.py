"""Vectorized quadratic form of the Direct Lyapunov Lasso objective.

With ``A(S) vec(M) = vec(M S + S M^T)`` the squared Lyapunov residual
expands to ``vec(M)^T G vec(M) - 2 g^T vec(M) + ||vec(C)||^2`` where
``G = A^T A`` is the Gram matrix and ``g = -A^T vec(C)``.
"""
from dataclasses import dataclass, field

import numpy as np

from .linalg import transpose_permutation, unvec, vec

SYMMETRY_TOL = 1e-8


def _check_symmetric(sigma):
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ValueError(f"covariance must be square, got shape {sigma.shape}")
    scale = max(1.0, float(np.abs(sigma).max(initial=0.0)))
    if np.abs(sigma - sigma.T).max(initial=0.0) > SYMMETRY_TOL * scale:
        raise ValueError("covariance is not symmetric")
    return sigma


def build_A(sigma):
    """Coefficient matrix ``(S kron I) + (I kron S) K`` of the vectorized map.

    ``A[(i,j),(k,l)] = S[i,k] delta(j,l) + delta(i,l) S[j,k]`` where the pair
    ``(i, j)`` sits at flat position ``j * p + i``.
    """
    sigma = _check_symmetric(sigma)
    p = sigma.shape[0]
    eye = np.eye(p)
    return np.kron(sigma, eye) + np.kron(eye, sigma)[:, transpose_permutation(p)]


def build_gram(sigma):
    """Closed-form Gram matrix ``2 (S^2 kron I) + (S kron S) K + K (S kron S)``.

    Equals ``build_A(sigma).T @ build_A(sigma)`` up to rounding, at a
    fraction of the cost. The result is explicitly symmetrized.
    """
    sigma = _check_symmetric(sigma)
    p = sigma.shape[0]
    perm = transpose_permutation(p)
    ss = np.kron(sigma, sigma)
    gram = 2.0 * np.kron(sigma @ sigma, np.eye(p)) + ss[:, perm] + ss[perm, :]
    return 0.5 * (gram + gram.T)


def build_g(sigma, c):
    """Linear term ``-A(S)^T vec(C)``.

    The transpose makes ``0.5 v^T G v - g^T v`` equal half the squared
    residual up to a constant. For symmetric ``S`` and ``C`` this is
    ``-2 vec(C S)``.
    """
    sigma = _check_symmetric(sigma)
    c = np.asarray(c, dtype=float)
    if c.shape != sigma.shape:
        raise ValueError(f"shape mismatch: covariance {sigma.shape}, volatility {c.shape}")
    return -build_A(sigma).T @ vec(c)


def lyapunov_residual(m, sigma, c):
    """Frobenius norm of ``M S + S M^T + C``."""
    m, sigma, c = (np.asarray(a, dtype=float) for a in (m, sigma, c))
    if not m.shape == sigma.shape == c.shape:
        raise ValueError("shape mismatch")
    return float(np.linalg.norm(m @ sigma + sigma @ m.T + c, "fro"))


@dataclass(frozen=True)
class GramSystem:
    """Quadratic data ``(gamma, g)`` for one covariance/volatility pair."""

    gamma: np.ndarray
    g: np.ndarray
    p: int
    volatility: np.ndarray
    sigma: np.ndarray = field(repr=False)

    @classmethod
    def from_covariance(cls, sigma, c=None):
        sigma = _check_symmetric(sigma)
        p = sigma.shape[0]
        c = 2.0 * np.eye(p) if c is None else np.asarray(c, dtype=float)
        gamma = build_gram(sigma)
        g = build_g(sigma, c)
        for a in (gamma, g):
            a.setflags(write=False)
        return cls(gamma=gamma, g=g, p=p, volatility=c, sigma=sigma)

    @property
    def constant(self):
        """``0.5 ||vec(C)||^2``, the term dropped from the quadratic form."""
        return 0.5 * float(vec(self.volatility) @ vec(self.volatility))

    def smooth(self, v):
        return 0.5 * float(v @ self.gamma @ v) - float(self.g @ v)

    def objective(self, v, lam):
        """Penalized objective without the constant."""
        return self.smooth(v) + lam * float(np.abs(v).sum())

    def gradient(self, v):
        return self.gamma @ v - self.g

    def matrix(self, v):
        return unvec(v, self.p)
