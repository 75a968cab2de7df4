"""Control policies, privacy-enhancing signals and LQ cost accounting."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import ConfigError, RandomSource, Trajectory, gaussian_array, require_psd

NONLINEAR_POLICIES: dict[str, Callable[[float], float]] = {
    # the quadratic feedback used with the quadratic-sine plant
    "neg-1.1-square": lambda y: -1.1 * y * y,
}


@dataclass(frozen=True, eq=False)
class ControlPolicy:
    """Memoryless feedback ``u = policy(y)``.

    kinds: ``linear_gain`` (u = -gain*y), ``linear_gain_matrix`` (u = -K y),
    ``nonlinear_named`` (registry lookup) and ``zero``.
    """

    kind: str = "linear_gain"
    gain: float = 0.0
    K: np.ndarray | None = None
    name: str | None = None
    depends_on_gain: bool = False  # True if the policy was built from the true a

    def __post_init__(self):
        if self.kind == "linear_gain_matrix":
            if self.K is None:
                raise ConfigError("linear_gain_matrix policy needs K")
            K = np.atleast_2d(np.asarray(self.K, dtype=float))
            if K.shape[0] != K.shape[1]:
                raise ConfigError("K must be square")
            object.__setattr__(self, "K", K)
        elif self.kind == "nonlinear_named":
            if self.name not in NONLINEAR_POLICIES:
                raise ConfigError(f"unknown policy {self.name!r}; known: {sorted(NONLINEAR_POLICIES)}")
        elif self.kind not in ("linear_gain", "zero"):
            raise ConfigError(f"unknown policy kind {self.kind!r}")

    @property
    def is_vector(self) -> bool:
        return self.kind == "linear_gain_matrix"

    def scalar_map(self) -> Callable[[float], float]:
        """A fast float -> float closure for scalar loops."""
        if self.kind == "linear_gain":
            g = float(self.gain)
            return lambda y: -g * y
        if self.kind == "zero":
            return lambda y: 0.0
        if self.kind == "nonlinear_named":
            return NONLINEAR_POLICIES[self.name]
        if self.K.shape == (1, 1):
            g = float(self.K[0, 0])
            return lambda y: -g * y
        raise ConfigError("vector policy used on a scalar plant")


def control_action(policy: ControlPolicy, y):
    if policy.kind == "linear_gain_matrix":
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.shape[0] != policy.K.shape[1]:
            raise ValueError(f"observation has dimension {y.shape[0]}, policy expects {policy.K.shape[1]}")
        return -(policy.K @ y)
    if np.ndim(y) > 0 and np.size(y) != 1:
        raise ValueError("scalar policy given a vector observation")
    return policy.scalar_map()(float(np.asarray(y).reshape(-1)[0]) if np.ndim(y) else float(y))


@dataclass(frozen=True, eq=False)
class PrivacySignalSpec:
    kind: str = "none"  # none | iid_gaussian | iid_gaussian_vector | example4_recursive
    variance: float = 0.0
    cov: np.ndarray | None = None
    eta: float = 3.0
    allow_small_eta: bool = False  # eta < 3 gives up the guarantee but is still a valid signal

    def __post_init__(self):
        if self.kind == "iid_gaussian":
            if self.variance < 0:
                raise ConfigError("privacy-signal variance must be nonnegative")
        elif self.kind == "iid_gaussian_vector":
            if self.cov is None:
                raise ConfigError("iid_gaussian_vector needs a covariance")
            object.__setattr__(self, "cov", require_psd(self.cov, "privacy covariance"))
        elif self.kind == "example4_recursive":
            if not self.eta > 0:
                raise ConfigError(f"eta must be positive, got {self.eta}")
            if self.eta < 3 and not self.allow_small_eta:
                raise ConfigError(f"recursive privacy signal needs eta >= 3, got {self.eta}")
        elif self.kind != "none":
            raise ConfigError(f"unknown privacy-signal kind {self.kind!r}")


@dataclass
class AuthenticatedPolicyState:
    """Running ``psi_k = sum_j a^(k-j) gamma_j`` plus the signal history."""

    a: float
    psi: float = 0.0
    gammas: list = field(default_factory=list)


def privacy_signal_next(spec: PrivacySignalSpec, state: AuthenticatedPolicyState, a: float,
                        xbar: float, ubar: float, src: RandomSource | None = None,
                        draw: float | None = None) -> float:
    """Next privacy signal; ``draw`` substitutes a pre-drawn N(0,1) sample."""
    if spec.kind == "none":
        return 0.0
    if spec.kind == "iid_gaussian":
        z = draw if draw is not None else float(src.generator.standard_normal())
        return float(np.sqrt(spec.variance)) * z
    if spec.kind == "example4_recursive":
        # gamma_k = target_k - a*psi_{k-1} drives psi_k onto target_k exactly
        target = -(a * xbar + ubar) / spec.eta
        return target - a * state.psi
    raise ConfigError(f"{spec.kind} is not a scalar privacy signal")


def authenticated_action(state: AuthenticatedPolicyState, ubar: float, gamma: float) -> float:
    state.psi = state.a * state.psi + gamma
    state.gammas.append(gamma)
    return ubar + gamma


class ScalarController:
    """Controller loop for scalar plants: base policy plus optional privacy signal.

    The recursive privacy signal is defined against the trajectory the loop
    would follow without it, so a signal-free twin is run alongside.  The
    twin is driven by the innovation ``y' - a y - u``, which equals the true
    disturbance while nobody tampers with the loop.
    """

    def __init__(self, policy: ControlPolicy, privacy: PrivacySignalSpec, a: float,
                 src: RandomSource | None = None, horizon: int = 0):
        self.policy = policy
        self.base = policy.scalar_map()
        self.privacy = privacy
        self.a = float(a)
        self.state = AuthenticatedPolicyState(self.a)
        self.twin: float | None = None
        self.twin_u = 0.0
        self.cor2_terms: list[float] = []
        self._draws = None
        self._i = 0
        if privacy.kind == "iid_gaussian":
            if src is None:
                raise ConfigError("iid privacy signal needs a random source")
            self._draws = src.generator.standard_normal(horizon + 2)
        elif privacy.kind not in ("none", "example4_recursive"):
            raise ConfigError(f"{privacy.kind} privacy signal on a scalar plant")

    def act(self, y: float) -> float:
        kind = self.privacy.kind
        if kind == "none":
            return self.base(y)
        if kind == "iid_gaussian":
            ubar = self.base(y)
            gamma = privacy_signal_next(self.privacy, self.state, self.a, y, ubar, draw=self._draws[self._i])
            self._i += 1
            return authenticated_action(self.state, ubar, gamma)
        if self.twin is None:
            self.twin = y
        ubar = self.base(self.twin)
        gamma = privacy_signal_next(self.privacy, self.state, self.a, self.twin, ubar)
        u = authenticated_action(self.state, ubar, gamma)
        drift = self.a * self.twin + ubar
        self.cor2_terms.append(self.state.psi ** 2 + 2.0 * self.state.psi * drift)
        self.twin_u = ubar
        return u

    def observe(self, y: float, u: float, y_next: float) -> None:
        if self.privacy.kind == "example4_recursive" and self.twin is not None:
            innovation = y_next - self.a * y - u
            self.twin = self.a * self.twin + self.twin_u + innovation


class VectorController:
    def __init__(self, policy: ControlPolicy, privacy: PrivacySignalSpec, n: int,
                 src: RandomSource | None = None, horizon: int = 0):
        if policy.kind == "linear_gain_matrix":
            if policy.K.shape != (n, n):
                raise ConfigError(f"K has shape {policy.K.shape}, plant has n={n}")
            self.K = policy.K
        elif policy.kind == "zero":
            self.K = np.zeros((n, n))
        else:
            raise ConfigError(f"{policy.kind} policy on a vector plant")
        self.privacy = privacy
        self._draws = None
        self._i = 0
        if privacy.kind == "iid_gaussian_vector":
            if privacy.cov.shape != (n, n):
                raise ConfigError("privacy covariance has wrong dimension")
            self._draws = gaussian_array(src, horizon + 2, privacy.cov)
        elif privacy.kind != "none":
            raise ConfigError(f"{privacy.kind} privacy signal on a vector plant")

    def act(self, y: np.ndarray) -> np.ndarray:
        u = -(self.K @ y)
        if self._draws is not None:
            u = u + self._draws[self._i]
            self._i += 1
        return u

    def observe(self, y, u, y_next) -> None:
        pass


@dataclass(frozen=True)
class LQWeights:
    q: float = 1.0
    r: float = 1.0

    def __post_init__(self):
        if self.q < 0 or self.r < 0:
            raise ConfigError("LQ weights must be nonnegative")


def lq_cost(traj: Trajectory, weights: LQWeights, T: int) -> float:
    """Time-averaged cost ``(1/T) sum_{k=0..T} q|x_k|^2 + r|u_k|^2``."""
    if T < 1 or len(traj) < T + 1:
        raise ValueError("trajectory shorter than T")
    x = traj.states[: T + 1]
    u = traj.controls[: T + 1]
    total = weights.q * float(np.sum(x * x)) + weights.r * float(np.sum(u * u))
    return total / T
