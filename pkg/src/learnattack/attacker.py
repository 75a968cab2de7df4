"""Two-phase attacker: passive identification, then hijacking.

Learners are streaming accumulators (scalar and vector least squares) or a
batch Gaussian-process regressor on ``(x, u) -> x_next``.  The hijack phase
runs a :class:`FictitiousPlant` built from the learned model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg

from .core import DegenerateDataError, ConfigError, as_symmetric

GP_MAX_POINTS = 2000


@dataclass
class ScalarLSState:
    sum_xx: float = 0.0
    sum_cross: float = 0.0
    count: int = 0

    def merge(self, other: "ScalarLSState") -> "ScalarLSState":
        return ScalarLSState(self.sum_xx + other.sum_xx, self.sum_cross + other.sum_cross,
                             self.count + other.count)


def ls_update_scalar(state: ScalarLSState, x_k: float, u_k: float, x_next: float) -> ScalarLSState:
    state.sum_xx += x_k * x_k
    state.sum_cross += (x_next - u_k) * x_k
    state.count += 1
    return state


def ls_batch_scalar(x, u) -> ScalarLSState:
    """Accumulate pairs ``(x[k], u[k], x[k+1])`` for all ``k`` in one shot."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    xs, xn, us = x[:-1], x[1:], u[: len(x) - 1]
    return ScalarLSState(float(xs @ xs), float((xn - us) @ xs), len(xs))


def ls_estimate_scalar(state: ScalarLSState) -> float:
    if state.sum_xx <= 0.0:
        raise DegenerateDataError("sum of squared states is zero; the gain is not identifiable")
    return state.sum_cross / state.sum_xx


@dataclass
class VectorLSState:
    gram: np.ndarray
    cross: np.ndarray
    count: int = 0

    @classmethod
    def zeros(cls, n: int) -> "VectorLSState":
        return cls(np.zeros((n, n)), np.zeros((n, n)))


def ls_update_vector(state: VectorLSState, x_k, u_k, x_next) -> VectorLSState:
    x_k = np.asarray(x_k, dtype=float)
    state.gram += np.outer(x_k, x_k)
    state.cross += np.outer(np.asarray(x_next) - np.asarray(u_k), x_k)
    state.count += 1
    return state


def gram_is_singular(gram: np.ndarray) -> bool:
    lam = np.linalg.eigvalsh(as_symmetric(gram, "gram"))[0]
    return lam < 1e-10 * (1.0 + abs(float(np.trace(gram))))


def ls_estimate_vector(state: VectorLSState) -> np.ndarray:
    """``C G^{-1}``, or the zero matrix when the Gram matrix is singular."""
    if gram_is_singular(state.gram):
        return np.zeros_like(state.gram)
    # C G^{-1} = (G^{-1} C^T)^T with G symmetric
    return linalg.solve(state.gram, state.cross.T, assume_a="pos").T


@dataclass(frozen=True)
class Kernel:
    """RBF kernel plus a white-noise term on the diagonal."""

    length_scale: float = 1.0
    signal_var: float = 1.0
    white_var: float = 0.1

    def __post_init__(self):
        if self.length_scale <= 0 or self.signal_var < 0 or self.white_var < 0:
            raise ConfigError("invalid kernel hyperparameters")

    def cross(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """RBF part only; the white term never couples distinct points."""
        d2 = np.sum(a * a, 1)[:, None] + np.sum(b * b, 1)[None, :] - 2.0 * a @ b.T
        np.maximum(d2, 0.0, out=d2)
        return self.signal_var * np.exp(-0.5 * d2 / self.length_scale ** 2)

    @property
    def prior_var(self) -> float:
        return self.signal_var + self.white_var


@dataclass
class GPState:
    kernel: Kernel
    noise_var: float
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    standardize: bool = True

    def add(self, z, y: float) -> None:
        self.inputs.append(np.asarray(z, dtype=float).reshape(-1))
        self.outputs.append(float(y))


class GPPosterior:
    """Fitted GP posterior with a cached Cholesky factor of ``C + sigma^2 I``."""

    def __init__(self, state: GPState):
        Z = np.asarray(state.inputs, dtype=float)
        if Z.ndim != 2 or len(Z) == 0:
            raise DegenerateDataError("GP needs at least one observation")
        if len(Z) > GP_MAX_POINTS:
            raise ConfigError(f"GP learning set capped at {GP_MAX_POINTS} points, got {len(Z)}")
        self.kernel = state.kernel
        self.noise_var = float(state.noise_var)
        if state.standardize:
            self.shift = Z.mean(0)
            scale = Z.std(0)
            self.scale = np.where(scale > 0, scale, 1.0)
        else:
            self.shift = np.zeros(Z.shape[1])
            self.scale = np.ones(Z.shape[1])
        self.Z = (Z - self.shift) / self.scale
        self.y = np.asarray(state.outputs, dtype=float)
        m = len(Z)
        C = self.kernel.cross(self.Z, self.Z)
        C[np.diag_indices(m)] += self.kernel.white_var + self.noise_var
        try:
            self.chol = linalg.cholesky(C, lower=True)
        except linalg.LinAlgError as exc:
            raise DegenerateDataError("GP kernel matrix is not positive definite") from exc
        self.alpha = linalg.cho_solve((self.chol, True), self.y)

    def _scaled(self, z) -> np.ndarray:
        return (np.atleast_2d(np.asarray(z, dtype=float)) - self.shift) / self.scale

    def mean(self, z) -> float:
        k = self.kernel.cross(self._scaled(z), self.Z)[0]
        return float(k @ self.alpha)

    def predict(self, Zq) -> tuple[np.ndarray, np.ndarray]:
        k = self.kernel.cross(self._scaled(Zq), self.Z)
        mean = k @ self.alpha
        v = linalg.solve_triangular(self.chol, k.T, lower=True)
        var = self.kernel.prior_var - np.sum(v * v, 0)
        if np.any(var < -1e-12):
            raise FloatingPointError(f"negative GP variance {var.min():.3g}")
        return mean, np.maximum(var, 0.0)

    def sequential_variances(self) -> np.ndarray:
        """``sigma^2_{k-1}(Z_k)``: variance at each input given the ones before it."""
        return np.maximum(np.diag(self.chol) ** 2 - self.noise_var, 0.0)


def gp_fit(state: GPState) -> GPPosterior:
    return GPPosterior(state)


def gp_posterior(handle: GPPosterior, z) -> tuple[float, float]:
    mean, var = handle.predict(z)
    return float(mean[0]), float(var[0])


@dataclass
class FictitiousPlant:
    """The attacker's simulated plant ``v' = model(v, u) + w~``, seeded with ``v_L = x_L``."""

    model: Callable
    v: float | np.ndarray
    noise_var: float | np.ndarray = 1.0

    @classmethod
    def scalar_linear(cls, a_hat: float, x_L: float, noise_var: float = 1.0) -> "FictitiousPlant":
        return cls(lambda v, u: a_hat * v + u, float(x_L), noise_var)

    @classmethod
    def vector_linear(cls, A_hat: np.ndarray, x_L, noise_cov=None) -> "FictitiousPlant":
        return cls(lambda v, u: A_hat @ v + u, np.array(x_L, dtype=float), noise_cov)

    @classmethod
    def gaussian_process(cls, post: GPPosterior, x_L: float, noise_var: float = 1.0) -> "FictitiousPlant":
        Z = post.Z
        alpha = post.alpha
        shift, scale = post.shift, post.scale
        k = post.kernel
        c = -0.5 / k.length_scale ** 2

        def model(v, u):
            dv = (v - shift[0]) / scale[0] - Z[:, 0]
            du = (u - shift[1]) / scale[1] - Z[:, 1]
            return float(k.signal_var * np.exp(c * (dv * dv + du * du)) @ alpha)

        return cls(model, float(x_L), noise_var)


def fictitious_step(fp: FictitiousPlant, u, w_tilde):
    fp.v = fp.model(fp.v, u) + w_tilde
    return fp.v


@dataclass
class ReplayBuffer:
    recorded: list = field(default_factory=list)

    def record(self, y) -> None:
        self.recorded.append(y)


def replay_observation(buf: ReplayBuffer, k: int, L: int):
    """Observation replayed at step ``k > L``: recording index ``(k-L-1) mod len``."""
    if not buf.recorded:
        raise ConfigError("replay buffer is empty")
    if k <= L:
        raise ValueError("replay only happens during the hijack phase")
    return buf.recorded[(k - L - 1) % len(buf.recorded)]


@dataclass(frozen=True)
class MaliciousActuation:
    rule: str = "destabilize"  # destabilize | zero
    mu: float = 0.5

    def __post_init__(self):
        if self.rule not in ("destabilize", "zero"):
            raise ConfigError(f"unknown malicious rule {self.rule!r}")

    @classmethod
    def default_for(cls, gain_bound: float) -> "MaliciousActuation":
        """``mu`` with ``|a + mu| >= 1.5`` for every gain of magnitude up to ``gain_bound``."""
        return cls("destabilize", 1.5 + abs(gain_bound))


def malicious_input(rule: MaliciousActuation, x, u_controller):
    if rule.rule == "zero":
        return 0.0 * x
    return rule.mu * x


def steps_to_diverge(growth: float, x0: float, limit: float = 1e12) -> int:
    """Steps for ``|x0| growth^k`` to pass ``limit``; used by tests as an oracle."""
    return math.ceil(math.log(limit / abs(x0)) / math.log(abs(growth)))
