"""Seeded randomness, small dense linear algebra and trajectory containers.

Every Monte Carlo trial owns a :class:`RandomSource`.  Sources are keyed
Philox streams, so trial ``t`` of a sweep can be regenerated in isolation
without replaying the trials before it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MASK64 = (1 << 64) - 1


class DegenerateDataError(ValueError):
    """Raised when estimation data is degenerate (probability-zero events)."""


class ConfigError(ValueError):
    """Invalid configuration or out-of-regime parameters."""


def splitmix64(x: int) -> int:
    """One round of the SplitMix64 finaliser on a 64-bit integer."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(*parts: int) -> int:
    """Hash an ordered tuple of nonnegative integers into a 64-bit seed."""
    h = 0
    for p in parts:
        h = splitmix64(h ^ (int(p) & MASK64))
    return h


@dataclass
class RandomSource:
    """A reproducible random stream identified by ``(seed, stream)``."""

    seed: int
    stream: int = 0
    _gen: np.random.Generator | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (0 <= self.seed <= MASK64):
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.stream < 0:
            raise ValueError("stream id must be nonnegative")

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            key = (self.seed & MASK64) | ((self.stream & MASK64) << 64)
            self._gen = np.random.Generator(np.random.Philox(key=key))
        return self._gen

    def child(self, purpose: int) -> "RandomSource":
        """Independent sub-stream for one purpose (disturbance, prior, ...)."""
        return RandomSource(derive_seed(self.seed, self.stream, purpose), purpose)

    def normal(self, size=None, scale: float = 1.0):
        return self.generator.normal(0.0, scale, size)

    def uniform(self, low: float, high: float, size=None):
        return self.generator.uniform(low, high, size)


def psd_tolerance(m: np.ndarray) -> float:
    return 1e-9 * (1.0 + abs(float(np.trace(m))))


def as_symmetric(m, name: str = "matrix") -> np.ndarray:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    if not np.allclose(m, m.T, rtol=0.0, atol=1e-12 * (1.0 + np.abs(m).max())):
        raise ValueError(f"{name} must be symmetric")
    return 0.5 * (m + m.T)


def min_eigenvalue(m: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(m)[0])


def is_psd(m) -> bool:
    m = as_symmetric(m)
    return min_eigenvalue(m) >= -psd_tolerance(m)


def require_psd(m, name: str = "covariance") -> np.ndarray:
    m = as_symmetric(m, name)
    lam = min_eigenvalue(m)
    if lam < -psd_tolerance(m):
        raise ValueError(f"{name} is not positive semidefinite: smallest eigenvalue {lam:.6g}")
    return m


def loewner_geq(a, b) -> bool:
    """True iff ``a - b`` is positive semidefinite (up to float jitter)."""
    a = as_symmetric(a, "A")
    b = as_symmetric(b, "B")
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    d = a - b
    return min_eigenvalue(d) >= -psd_tolerance(d)


def operator_norm(m) -> float:
    """Largest singular value, via the eigenvalues of ``M^T M``."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.size == 0:
        return 0.0
    if m.shape == (1, 1):
        return abs(float(m[0, 0]))
    gram = m.T @ m if m.shape[0] >= m.shape[1] else m @ m.T
    lam = float(np.linalg.eigvalsh(gram)[-1])
    return float(np.sqrt(max(lam, 0.0)))


def cov_factor(cov) -> np.ndarray:
    """Matrix ``S`` with ``S S^T = cov``; diagonal input gives ``sqrt(diag)``."""
    cov = require_psd(cov)
    if np.count_nonzero(cov - np.diag(np.diag(cov))) == 0:
        return np.diag(np.sqrt(np.clip(np.diag(cov), 0.0, None)))
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        lam, vec = np.linalg.eigh(cov)
        return vec * np.sqrt(np.clip(lam, 0.0, None))


def gaussian_sample(src: RandomSource, mean, cov) -> np.ndarray:
    """One draw from ``N(mean, cov)``."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    factor = cov_factor(cov)
    if factor.shape[0] != mean.shape[0]:
        raise ValueError("mean and covariance dimensions differ")
    z = src.generator.standard_normal(mean.shape[0])
    return mean + factor @ z


def gaussian_array(src: RandomSource, count: int, cov) -> np.ndarray:
    """``count`` i.i.d. zero-mean draws, shape ``(count, n)``.

    Row ``i`` equals what :func:`gaussian_sample` would return on the i-th call.
    """
    factor = cov_factor(cov)
    z = src.generator.standard_normal((count, factor.shape[0]))
    return z @ factor.T


@dataclass
class Trajectory:
    """Per-step record of one closed-loop run, indices ``0..T+1``.

    ``observations[k]`` is what the controller saw at step ``k``;
    ``hijacked[k]`` marks steps where that was not the true state.
    """

    states: np.ndarray
    controls: np.ndarray
    observations: np.ndarray
    disturbances: np.ndarray
    hijacked: np.ndarray

    @classmethod
    def empty(cls, length: int, n: int = 1) -> "Trajectory":
        z = lambda: np.zeros((length, n))
        return cls(z(), z(), z(), z(), np.zeros(length, dtype=bool))

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def __len__(self) -> int:
        return self.states.shape[0]

    def validate(self) -> None:
        shapes = {a.shape for a in (self.states, self.controls, self.observations, self.disturbances)}
        if len(shapes) != 1 or self.hijacked.shape[0] != self.states.shape[0]:
            raise ValueError("trajectory sequences differ in length or dimension")
        if np.any(self.controls[0] != 0) or np.any(self.disturbances[0] != 0):
            raise ValueError("U_0 and W_0 must be zero")
        clean = ~self.hijacked
        finite = np.all(np.isfinite(self.states), axis=1)
        mask = clean & finite
        if not np.array_equal(self.observations[mask], self.states[mask]):
            raise ValueError("observation differs from state on an untampered step")
