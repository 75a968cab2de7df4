"""Ground-truth plant dynamics: scalar LTI, vector LTI and scalar nonlinear."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import ConfigError, RandomSource, require_psd

DIVERGENCE_LIMIT = 1e12


@dataclass(frozen=True)
class ScalarPlant:
    a: float
    noise_var: float = 1.0
    x0_var: float | None = None  # None: same as noise_var

    def __post_init__(self):
        if self.noise_var < 0:
            raise ConfigError("noise variance must be nonnegative")
        if self.x0_var is not None and self.x0_var < 0:
            raise ConfigError("initial-state variance must be nonnegative")

    @property
    def initial_var(self) -> float:
        return self.noise_var if self.x0_var is None else self.x0_var

    def f(self, x: float, u: float) -> float:
        return self.a * x + u


def step_scalar(plant: ScalarPlant, x: float, u: float, w: float) -> float:
    return plant.a * x + u + w


@dataclass(frozen=True, eq=False)
class VectorPlant:
    A: np.ndarray
    noise_cov: np.ndarray
    x0_cov: np.ndarray | None = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise ConfigError(f"gain matrix must be square, got {A.shape}")
        cov = require_psd(self.noise_cov, "noise covariance")
        if cov.shape != A.shape:
            raise ConfigError("noise covariance and gain matrix dimensions differ")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "noise_cov", cov)
        if self.x0_cov is not None:
            x0 = require_psd(self.x0_cov, "initial-state covariance")
            if x0.shape != A.shape:
                raise ConfigError("initial-state covariance has wrong dimension")
            object.__setattr__(self, "x0_cov", x0)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def initial_cov(self) -> np.ndarray:
        return self.noise_cov if self.x0_cov is None else self.x0_cov


def step_vector(plant: VectorPlant, x, u, w) -> np.ndarray:
    x, u, w = (np.asarray(v, dtype=float).reshape(-1) for v in (x, u, w))
    n = plant.n
    if not (x.shape[0] == u.shape[0] == w.shape[0] == n):
        raise ValueError(f"dimension mismatch: plant n={n}, got {x.shape}, {u.shape}, {w.shape}")
    return plant.A @ x + u + w


def _quadratic_sine(x: float, u: float) -> float:
    return x * x + math.sin(x) + u


DYNAMICS: dict[str, Callable[[float, float], float]] = {
    "quadratic-sine": _quadratic_sine,
}


@dataclass(frozen=True)
class NonlinearPlant:
    dynamics: str = "quadratic-sine"
    noise_var: float = 1.0
    rkhs_norm_bound: float = 1.0
    x0_var: float | None = None

    def __post_init__(self):
        if self.dynamics not in DYNAMICS:
            raise ConfigError(f"unknown dynamics {self.dynamics!r}; known: {sorted(DYNAMICS)}")
        if self.noise_var < 0:
            raise ConfigError("noise variance must be nonnegative")
        if self.rkhs_norm_bound <= 0:
            raise ConfigError("RKHS norm bound must be positive")

    @property
    def initial_var(self) -> float:
        return self.noise_var if self.x0_var is None else self.x0_var

    @property
    def f(self) -> Callable[[float, float], float]:
        return DYNAMICS[self.dynamics]


def step_nonlinear(plant: NonlinearPlant, x: float, u: float, w: float) -> float:
    return plant.f(x, u) + w


@dataclass(frozen=True)
class GainPrior:
    """Either a fixed open-loop gain or a uniform prior on ``[-R, R]``."""

    kind: str = "fixed"
    value: float = 1.0
    R: float = 1.0

    def __post_init__(self):
        if self.kind not in ("fixed", "uniform"):
            raise ConfigError(f"unknown prior kind {self.kind!r}")
        if self.kind == "uniform" and not self.R > 0:
            raise ConfigError("uniform prior needs R > 0")
        if self.kind == "fixed" and not math.isfinite(self.value):
            raise ConfigError("fixed gain must be finite")


def sample_gain(prior: GainPrior, src: RandomSource) -> float:
    if prior.kind == "fixed":
        return float(prior.value)
    return float(src.uniform(-prior.R, prior.R))


def stationary_variance(a_closed: float, noise_var: float) -> float:
    """Stationary second moment of ``x' = a_closed x + w``; needs ``|a_closed| < 1``."""
    if abs(a_closed) >= 1:
        raise ValueError("closed loop is not stable")
    return noise_var / (1.0 - a_closed * a_closed)

