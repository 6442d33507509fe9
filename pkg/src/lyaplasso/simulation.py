"""Random drift and volatility matrices, Gaussian equilibrium data.

Randomness is driven by :class:`RngSeed`, a ``(base_seed, stream_id)``
pair mapped through ``numpy.random.SeedSequence`` onto a PCG64 generator,
so every replication stream is reproducible on its own.
"""
from dataclasses import dataclass, field

import numpy as np

from .linalg import is_stable

RNG_ALGORITHM = f"numpy.random.PCG64/SeedSequence (numpy {np.__version__})"

VOLATILITY_SCHEMES = ("identity", "random_diag", "random_min_diag", "random_full")


class SamplingError(RuntimeError):
    """Raised when a rejection sampler exhausts its try budget."""


@dataclass(frozen=True)
class RngSeed:
    base_seed: int
    stream_id: int = 0

    def generator(self):
        seq = np.random.SeedSequence(self.base_seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(seq))

    def child(self, stream_id):
        return RngSeed(self.base_seed, stream_id)


def as_generator(rng):
    """Accept a Generator, an :class:`RngSeed` or an int seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngSeed):
        return rng.generator()
    return np.random.default_rng(rng)


@dataclass
class Dataset:
    rows: np.ndarray
    names: list = field(default=None)

    def __post_init__(self):
        self.rows = np.atleast_2d(np.asarray(self.rows, dtype=float))
        if not np.all(np.isfinite(self.rows)):
            raise ValueError("dataset has non-finite entries")
        if self.names is None:
            self.names = [f"X{k + 1}" for k in range(self.p)]
        if len(self.names) != self.p:
            raise ValueError("names do not match the number of columns")

    @property
    def n(self):
        return self.rows.shape[0]

    @property
    def p(self):
        return self.rows.shape[1]


def sample_stable_dominant(p, density, rng):
    """Diagonally dominant stable drift with Bernoulli(density) sparsity.

    Off-diagonal ``M[i, j] = w * e`` with ``w ~ Bernoulli(density)``,
    ``e ~ N(0, 1)``; ``M[i, i] = -sum_j |M[i, j]| - |e_ii|``. Negative
    strict row dominance makes every Gershgorin disc lie in the open left
    half-plane; the rare tie is resampled.
    """
    if p < 1:
        raise ValueError("p must be positive")
    if not 0.0 <= density <= 1.0:
        raise ValueError("density must lie in [0, 1]")
    gen = as_generator(rng)
    while True:
        eps = gen.standard_normal((p, p))
        omega = gen.random((p, p)) < density
        m = np.where(omega, eps, 0.0)
        np.fill_diagonal(m, 0.0)
        np.fill_diagonal(m, -np.abs(m).sum(axis=1) - np.abs(np.diag(eps)))
        if is_stable(m):
            return m


def sample_stable_uniform(support, rng, max_tries=100_000, batch=256):
    """Uniform draw from stable matrices on ``support`` with entries in [-1, 1].

    Rejection sampling in batches. Returns ``(m, tries)``.
    """
    gen = as_generator(rng)
    mask = support.mask
    p = support.p
    tries = 0
    while tries < max_tries:
        k = min(batch, max_tries - tries)
        draws = np.where(mask, gen.uniform(-1.0, 1.0, (k, p, p)), 0.0)
        abscissa = np.linalg.eigvals(draws).real.max(axis=1)
        ok = np.flatnonzero(abscissa < -1e-10)
        if ok.size:
            tries += int(ok[0]) + 1
            return draws[ok[0]], tries
        tries += k
    raise SamplingError(f"no stable draw in {max_tries} tries (acceptance rate < {1.0 / max_tries:.1e})")


def stable_uniform_batch(support, gen, batch):
    """One batch of ``batch`` uniform candidates on ``support``; returns the stable ones in order."""
    draws = np.where(support.mask, gen.uniform(-1.0, 1.0, (batch, support.p, support.p)), 0.0)
    return draws[np.linalg.eigvals(draws).real.max(axis=1) < -1e-10]


def sample_stable_uniform_many(support, count, rng, max_tries=None, batch=4096):
    """``count`` independent uniform stable draws; returns ``(draws, tries)``.

    Consumes the stream in fixed-size batches, so the result depends only on
    the generator state and ``batch``. ``tries`` counts whole batches.
    """
    gen = as_generator(rng)
    max_tries = max_tries if max_tries is not None else 1000 * count + 10_000
    out = []
    tries = 0
    while len(out) < count:
        if tries >= max_tries:
            raise SamplingError(f"only {len(out)} of {count} stable draws in {tries} tries")
        out.extend(stable_uniform_batch(support, gen, batch)[: count - len(out)])
        tries += batch
    return np.array(out), tries


def sample_volatility(scheme, p, rng):
    """Volatility matrix under one of four schemes.

    ``identity``: ``2 I``. ``random_diag``: diagonal ``Unif[0.5, 4]``.
    ``random_min_diag``: diagonal ``Unif[2, 4]``. ``random_full``:
    symmetric off-diagonal ``Ct + Ct^T`` with ``Ct[i, j] = w * e``,
    ``w ~ Bernoulli(2/p)``, and ``C[i, i] = sum_j |C[i, j]| + |e_ii| + 0.5``.
    """
    if p < 1:
        raise ValueError("p must be positive")
    gen = as_generator(rng)
    if scheme == "identity":
        return 2.0 * np.eye(p)
    if scheme == "random_diag":
        return np.diag(gen.uniform(0.5, 4.0, p))
    if scheme == "random_min_diag":
        return np.diag(gen.uniform(2.0, 4.0, p))
    if scheme == "random_full":
        eps = gen.standard_normal((p, p))
        omega = gen.random((p, p)) < min(1.0, 2.0 / p)
        ct = np.where(omega, eps, 0.0)
        np.fill_diagonal(ct, 0.0)
        c = ct + ct.T
        np.fill_diagonal(c, np.abs(c).sum(axis=1) + np.abs(np.diag(eps)) + 0.5)
        return c
    raise ValueError(f"unknown volatility scheme {scheme!r}; choose from {VOLATILITY_SCHEMES}")


def sample_gaussian(sigma, n, rng, names=None):
    """``n`` i.i.d. rows from ``N(0, sigma)`` via the Cholesky factor."""
    if n < 1:
        raise ValueError("n must be positive")
    sigma = np.asarray(sigma, dtype=float)
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise ValueError("non-PD covariance") from exc
    gen = as_generator(rng)
    z = gen.standard_normal((n, sigma.shape[0]))
    return Dataset(z @ chol.T, names)


def sample_covariance(data):
    """``(1/n) sum_i x_i x_i^T`` without centering."""
    x = data.rows if isinstance(data, Dataset) else np.atleast_2d(np.asarray(data, dtype=float))
    s = x.T @ x / x.shape[0]
    return 0.5 * (s + s.T)

