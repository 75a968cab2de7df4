"""Controller-side authentication tests on the innovation sequence.

The controller knows the true dynamics and checks whether the empirical
second moment of ``y_{k+1} - f(y_k, u_k)`` over ``k = 1..T`` matches the
disturbance statistics.  Scalar plants use an open interval around the
variance; vector plants bound the operator norm of the covariance error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigError, as_symmetric, loewner_geq, operator_norm


@dataclass(frozen=True)
class VarianceTestConfig:
    delta: float
    T: int

    def __post_init__(self):
        if not self.delta > 0:
            raise ConfigError("delta must be positive")
        if self.T < 1:
            raise ConfigError("test time must be at least 1")


@dataclass(frozen=True)
class CovarianceTestConfig:
    gamma: float
    T: int

    def __post_init__(self):
        if not self.gamma > 0:
            raise ConfigError("gamma must be positive")
        if self.T < 1:
            raise ConfigError("test time must be at least 1")


@dataclass
class ResidualAccumulator:
    """Running sum of ``r r^T`` (or ``r^2`` when ``n == 1``)."""

    n: int = 1
    total: np.ndarray | float = 0.0
    count: int = 0

    def __post_init__(self):
        if self.n > 1 and np.isscalar(self.total):
            self.total = np.zeros((self.n, self.n))

    def add(self, r) -> None:
        if self.n == 1:
            r = float(r)
            self.total += r * r
        else:
            r = np.asarray(r, dtype=float)
            self.total += np.outer(r, r)
        self.count += 1

    def extend(self, residuals) -> None:
        r = np.asarray(residuals, dtype=float)
        if self.n == 1:
            r = r.reshape(-1)
            self.total += float(r @ r)
            self.count += len(r)
        else:
            r = r.reshape(-1, self.n)
            self.total += r.T @ r
            self.count += len(r)


@dataclass(frozen=True)
class Verdict:
    alarm: bool
    statistic: float
    window: tuple[float, float]


def residual_scalar(a: float, y_next: float, y: float, u: float) -> float:
    return y_next - a * y - u


def residual_vector(A: np.ndarray, y_next, y, u) -> np.ndarray:
    return np.asarray(y_next) - A @ np.asarray(y) - np.asarray(u)


def residual_nonlinear(f, y_next: float, y: float, u: float) -> float:
    return y_next - f(y, u)


def _check_count(acc: ResidualAccumulator, T: int) -> None:
    if acc.count != T:
        raise ValueError(f"accumulator holds {acc.count} residuals, test time is {T}")


def variance_statistic(sum_sq: float, T: int) -> float:
    return sum_sq / T


def variance_verdict(statistic: float, noise_var: float, delta: float) -> Verdict:
    lo, hi = noise_var - delta, noise_var + delta
    # open interval; NaN/inf statistics always alarm
    inside = lo < statistic < hi
    return Verdict(not inside, statistic, (lo, hi))


def variance_test(acc: ResidualAccumulator, noise_var: float, cfg: VarianceTestConfig) -> Verdict:
    _check_count(acc, cfg.T)
    return variance_verdict(variance_statistic(float(acc.total), cfg.T), noise_var, cfg.delta)


def covariance_error(sum_outer: np.ndarray, noise_cov: np.ndarray, T: int) -> np.ndarray:
    return noise_cov - sum_outer / T


def covariance_verdict(sum_outer: np.ndarray, noise_cov: np.ndarray, T: int, gamma: float) -> Verdict:
    if not np.all(np.isfinite(sum_outer)):
        return Verdict(True, float("inf"), (0.0, gamma))
    stat = operator_norm(covariance_error(sum_outer, noise_cov, T))
    return Verdict(not stat <= gamma, stat, (0.0, gamma))


def covariance_test(acc: ResidualAccumulator, noise_cov, cfg: CovarianceTestConfig) -> Verdict:
    noise_cov = as_symmetric(noise_cov, "noise covariance")
    total = np.atleast_2d(acc.total)
    if total.shape != noise_cov.shape:
        raise ValueError(f"dimension mismatch: residuals {total.shape}, covariance {noise_cov.shape}")
    _check_count(acc, cfg.T)
    return covariance_verdict(total, noise_cov, cfg.T, cfg.gamma)


def false_alarm_bound(noise_var: float, delta: float, T: int) -> float:
    """Chebyshev bound on the variance test's false-alarm rate: ``3 sigma^4 / (delta^2 T)``."""
    if not delta > 0 or T < 1:
        raise ValueError("need delta > 0 and T >= 1")
    return min(1.0, 3.0 * noise_var ** 2 / (delta ** 2 * T))


def state_gram(states) -> np.ndarray:
    x = np.asarray(states, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return x.T @ x


def persistent_excitation_check(states, zeta: float) -> bool:
    """Whether ``G_tau / tau >= zeta I`` for the Gramian of ``x_1..x_tau``."""
    x = np.asarray(states, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    tau = x.shape[0]
    if tau < 1 or not zeta > 0:
        raise ValueError("need tau >= 1 and zeta > 0")
    return loewner_geq(state_gram(x) / tau, zeta * np.eye(x.shape[1]))
