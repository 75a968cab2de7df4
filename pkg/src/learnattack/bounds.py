"""Closed-form bounds on the attacker's deception probability.

Probability-valued bounds are clipped to [0, 1].  ``log`` in the
information-theoretic bounds is base 2; the GP information gain uses the
natural logarithm.
"""

from __future__ import annotations

import math

import numpy as np

from .core import ConfigError

LOG2_E = math.log2(math.e)
Z99 = 2.5758293035489004  # two-sided 99% normal quantile


def clip01(x: float) -> float:
    return min(1.0, max(0.0, x))


def deception_lower_bound_raw(delta: float, beta: float, L: float) -> float:
    """Unclipped ``1 - 2 / (1 + delta beta)^(L/2)``."""
    return 1.0 - 2.0 * math.exp(-0.5 * L * math.log1p(delta * beta))


def deception_lower_bound(delta: float, beta: float, L: float) -> float:
    if not (delta > 0 and beta > 0 and L >= 1):
        raise ValueError("need delta > 0, beta > 0, L >= 1")
    return clip01(deception_lower_bound_raw(delta, beta, L))


def beta_linear(a_hat: float, omega: float, noise_var: float) -> float:
    """Inverse fictitious-reading power under ``u = -omega y``."""
    c = a_hat - omega
    if abs(c) >= 1:
        raise ValueError(f"|a_hat - omega| = {abs(c):.4g} >= 1: the fictitious loop is not stabilised")
    return (1.0 - c * c) / noise_var


def deception_lower_bound_linear(delta: float, noise_var: float, a_hat: float, omega: float, L: float) -> float:
    return deception_lower_bound(delta, beta_linear(a_hat, omega, noise_var), L)


def _resolution_bits(R: float, delta: float, beta: float) -> float:
    r = math.sqrt(delta * beta)
    if not r < R:
        raise ConfigError(f"sqrt(delta*beta) = {r:.4g} must be below R = {R:.4g}")
    return math.log2(R / r)


def fano_upper_bound(mutual_info: float, R: float, delta: float, beta: float) -> float:
    if mutual_info < 0:
        raise ValueError("mutual information must be nonnegative")
    return clip01((mutual_info + 1.0) / _resolution_bits(R, delta, beta))


def kl_information_surrogate(second_moment_sum: float, noise_var: float) -> float:
    """Sum of KL divergences against N(0, sigma^2), in bits."""
    return LOG2_E / (2.0 * noise_var) * second_moment_sum


def g_upper_bound(second_moment_sum: float, noise_var: float, L: int, R: float, delta: float,
                  beta: float, policy_depends_on_gain: bool = False) -> float:
    """Upper bound from the Gaussian-KL surrogate of the learning-phase information.

    ``second_moment_sum`` estimates ``sum_{k=1..L} E[(A x_{k-1} + u_{k-1})^2]``.
    """
    if policy_depends_on_gain:
        raise ConfigError("the G bound requires a control policy that does not depend on the gain")
    if second_moment_sum < 0 or L < 1:
        raise ValueError("need a nonnegative moment sum and L >= 1")
    info = kl_information_surrogate(second_moment_sum, noise_var)
    return fano_upper_bound(info, R, delta, beta)


def second_moment_sum_linear(L: int, omega: float, noise_var: float, x0_var: float,
                             R: float | None = None, a: float | None = None) -> float:
    """Exact ``sum_{k=1..L} E[(A x_{k-1} + u_{k-1})^2]`` under ``u = -omega y``.

    Uses ``x_1 = A x_0`` (``u_0 = w_0 = 0``) and ``x_{j+1} = (A - omega) x_j + w_j``.
    The expectation over a uniform prior on ``[-R, R]`` is a polynomial in
    ``A`` of degree ``2L``, so Gauss-Legendre with ``L + 2`` nodes is exact.
    Pass ``a`` instead of ``R`` for a fixed gain.
    """
    if (R is None) == (a is None):
        raise ValueError("give exactly one of R (uniform prior) or a (fixed gain)")
    if a is not None:
        nodes, weights = np.array([float(a)]), np.array([1.0])
    else:
        t, w = np.polynomial.legendre.leggauss(L + 2)
        nodes, weights = R * t, w / 2.0
    c2 = (nodes - omega) ** 2
    ex2 = nodes ** 2 * x0_var  # E[x_1^2 | A]
    total = nodes ** 2 * x0_var  # k = 1 term: E[(A x_0)^2]
    for _ in range(2, L + 1):
        total = total + c2 * ex2
        ex2 = c2 * ex2 + noise_var
    return float(weights @ total)


def cor2_condition_estimate(samples) -> tuple[float, float, bool]:
    """Sample mean, 99% half-width, and whether the mean is negative at 99%."""
    s = np.asarray(samples, dtype=float)
    if s.size < 30:
        raise ValueError(f"need at least 30 samples, got {s.size}")
    mean = float(s.mean())
    half = Z99 * float(s.std(ddof=1)) / math.sqrt(s.size)
    return mean, half, mean + half < 0


def ls_error_bound(err_sum: float, zeta: float, L: int) -> float:
    """``(1/(zeta L)) sum_{k<L} ||w_k x_k^T||_op``."""
    return err_sum / (zeta * L)


def vector_lower_bound_estimate(err_sums, zeta: float, L: int, gamma: float, beta, rho: float) -> float:
    """``rho`` times the frequency of the event ``ls_error_bound < sqrt(gamma beta)``.

    ``beta`` may be a scalar or one value per trial.
    """
    err = np.asarray(err_sums, dtype=float)
    if err.size == 0:
        return float("nan")
    b = np.broadcast_to(np.asarray(beta, dtype=float), err.shape)
    event = err / (zeta * L) < np.sqrt(gamma * b)
    return clip01(rho * float(np.mean(event)))


def info_gain_psi(posterior_vars, noise_var: float) -> float:
    v = np.asarray(posterior_vars, dtype=float)
    if np.any(v < 0):
        raise ValueError("posterior variances must be nonnegative")
    return 0.5 * float(np.sum(np.log1p(v / noise_var)))


def gp_confidence_xi(psi: float, chi: float, sigma: float, sigma_L: float, nu: float) -> float:
    if sigma_L <= 0:
        return 0.0 if nu > chi else 1.0
    z = (nu - chi) / (4.0 * sigma * sigma_L)
    expo = psi + 1.0 - z * z
    if expo >= 0:
        return 1.0
    return math.exp(expo)


def nu_condition_holds(nus, w_tildes, total_len: int, delta: float) -> bool:
    """Whether ``(1/n) sum nu^2 + (2/n) sum |w~| nu <= delta`` with ``n = L + c``."""
    nu = np.asarray(nus, dtype=float)
    w = np.abs(np.asarray(w_tildes, dtype=float))
    return float(nu @ nu + 2.0 * (w @ nu)) / total_len <= delta


def nonlinear_lower_bound(p_bar: float, xis) -> float:
    if not 0.0 <= p_bar <= 1.0:
        raise ValueError("p_bar must lie in [0, 1]")
    xi = np.asarray(xis, dtype=float)
    if np.any((xi < 0) | (xi > 1)):
        raise ValueError("each xi must lie in [0, 1]")
    return p_bar * float(np.prod(1.0 - xi))
