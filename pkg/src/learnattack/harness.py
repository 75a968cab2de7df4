"""Trial orchestration and Monte Carlo aggregation.

A trial runs the learning phase (``k <= L``: the controller sees the true
state, the attacker records ``(x_k, u_k)``), then the hijack phase (the
controller sees the attacker's fictitious or replayed readings while the
true plant receives the malicious input), and ends with the detector's
verdict at ``T``.  Configs without an attack yield false-alarm samples.

Per-trial randomness comes from ``derive_seed(base_seed, grid_index,
trial_index)``, so rates do not depend on execution order.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import bounds
from .attacker import (
    FictitiousPlant,
    GPState,
    ReplayBuffer,
    ScalarLSState,
    VectorLSState,
    fictitious_step,
    gp_fit,
    ls_estimate_scalar,
    ls_estimate_vector,
    ls_update_scalar,
    ls_update_vector,
    malicious_input,
    replay_observation,
)
from .config import ExperimentConfig, loads_config
from .controller import ScalarController, VectorController, lq_cost
from .core import DegenerateDataError, RandomSource, Trajectory, derive_seed, gaussian_array, operator_norm
from .detector import covariance_verdict, persistent_excitation_check, variance_verdict
from .plant import DIVERGENCE_LIMIT, NonlinearPlant, sample_gain

log = logging.getLogger(__name__)

# sub-stream ids inside one trial
PRIOR, INIT, DIST, FICT, PRIV = 1, 2, 3, 4, 5


@dataclass
class TrialOutcome:
    trial_index: int
    seed: int
    gain: float | list
    attacked: bool
    alarm: bool
    statistic: float
    hijacked: bool
    valid: bool = True
    note: str = ""
    estimate: float | list | None = None
    diverged_at: int | None = None
    observation_diverged: bool = False
    beta_stationary: float | None = None
    beta_empirical: float | None = None
    lb_thm1: float | None = None
    second_moment_sum: float | None = None
    lq_cost: float | None = None
    cor2_terms: list = field(default_factory=list)
    pe_event: bool | None = None
    ls_error_sum: float | None = None
    estimate_error_norm: float | None = None
    ls_bound_violated: bool = False
    gp_psi: float | None = None
    gp_xi_product: float | None = None
    gp_nu_ok: bool | None = None
    trajectory: Trajectory | None = field(default=None, repr=False)

    @property
    def deceived(self) -> bool:
        return self.attacked and self.hijacked and not self.alarm


def trial_source(cfg: ExperimentConfig, trial_index: int, grid_index: int = 0) -> RandomSource:
    return RandomSource(derive_seed(cfg.seed, grid_index, trial_index), 0)


def run_trial(cfg: ExperimentConfig, trial_index: int, grid_index: int = 0,
              keep_trajectory: bool = False) -> TrialOutcome:
    src = trial_source(cfg, trial_index, grid_index)
    if cfg.plant_kind == "vector":
        out = _vector_trial(cfg, src, keep_trajectory)
    else:
        out = _scalar_trial(cfg, src, keep_trajectory)
    out.trial_index = trial_index
    return out


def _finite(v: float) -> bool:
    return abs(v) <= DIVERGENCE_LIMIT


def _scalar_trial(cfg: ExperimentConfig, src: RandomSource, keep: bool) -> TrialOutcome:
    plant = cfg.plant
    nonlinear = isinstance(plant, NonlinearPlant)
    a = 0.0 if nonlinear else sample_gain(cfg.prior, src.child(PRIOR))
    if nonlinear:
        f = plant.f
    else:
        def f(x, u):
            return a * x + u
    noise_var = plant.noise_var
    sigma = math.sqrt(noise_var)
    T, L = cfg.T, cfg.L
    attack = cfg.attack
    attacked = attack != "none"

    W = src.child(DIST).normal(T + 2, sigma)
    W[0] = 0.0
    if cfg.clean_learning:
        W[1:L] = 0.0
    Wt = src.child(FICT).normal(T + 2, sigma).tolist()
    W = W.tolist()
    x0 = float(src.child(INIT).normal(scale=math.sqrt(plant.initial_var)))
    ctrl = ScalarController(cfg.policy, cfg.privacy, a, src.child(PRIV), T)

    x = [0.0] * (T + 2)
    y = [0.0] * (T + 2)
    us = [0.0] * (T + 2)
    hij = [False] * (T + 2)
    x[0] = y[0] = x0
    x[1] = y[1] = f(x0, 0.0)

    out = TrialOutcome(0, src.seed, a, attacked, False, 0.0, False)
    ls = ScalarLSState()
    gp_state = GPState(cfg.kernel, noise_var) if attack == "gp" else None
    fp = None
    buf = ReplayBuffer() if attack == "replay" else None
    mal = cfg.malicious
    sum_sq = 0.0
    diverged_at = None
    steps = 0

    for k in range(1, T + 1):
        yk = y[k]
        uk = ctrl.act(yk)
        us[k] = uk
        xk = x[k]
        if diverged_at is None:
            applied = uk if (k <= L or not attacked) else malicious_input(mal, xk, uk)
            xn = f(xk, applied) + W[k]
            if not _finite(xn):
                diverged_at = k + 1
                xn = math.nan
        else:
            xn = math.nan
        x[k + 1] = xn

        if attacked:
            if k < L:
                if attack == "gp":
                    gp_state.add((xk, uk), xn)
                elif attack == "ls-scalar":
                    ls_update_scalar(ls, xk, uk, xn)
            if buf is not None and k <= L:
                buf.record(yk)
            if k == L:
                try:
                    fp = _build_scalar_attack(cfg, ls, gp_state, x[L], noise_var, out)
                except DegenerateDataError as exc:
                    out.valid = False
                    out.note = str(exc)
                    break
            if k >= L:
                yn = fictitious_step(fp, uk, Wt[k]) if fp is not None else replay_observation(buf, k + 1, L)
                hij[k + 1] = True
            else:
                yn = xn
        else:
            yn = xn

        if not _finite(yn):
            out.observation_diverged = True
            break
        y[k + 1] = yn
        r = yn - f(yk, uk)
        sum_sq += r * r
        ctrl.observe(yk, uk, yn)
        steps = k

    out.diverged_at = diverged_at
    out.hijacked = attacked and L + 1 <= T
    if out.observation_diverged:
        statistic = math.inf
    else:
        statistic = sum_sq / T
    verdict = variance_verdict(statistic, noise_var, cfg.delta)
    out.alarm, out.statistic = verdict.alarm, verdict.statistic

    traj = None
    if keep or not nonlinear:
        traj = Trajectory(np.array(x)[:, None], np.array(us)[:, None], np.array(y)[:, None],
                          np.array(W)[:, None], np.array(hij))
    if out.valid and not out.observation_diverged and steps == T:
        if not nonlinear:
            out.lq_cost = lq_cost(traj, cfg.lq, T) if diverged_at is None else None
        if ctrl.cor2_terms and L >= 2:
            out.cor2_terms = ctrl.cor2_terms[:L]
    if not nonlinear and L >= 1:
        xs = np.array(x[:L])
        uu = np.array(us[:L])
        out.second_moment_sum = float(np.sum((a * xs + uu) ** 2))
    if attacked and out.valid and attack == "ls-scalar":
        if out.observation_diverged:
            # no usable fictitious power; only a configured beta gives a bound
            if cfg.beta is not None:
                out.lb_thm1 = bounds.deception_lower_bound(cfg.delta, cfg.beta, L)
        else:
            _scalar_beta(cfg, out, y, L, T, noise_var)
    if attack == "gp" and out.valid and not out.observation_diverged and fp is not None:
        _gp_bound_terms(cfg, out, fp, y, us, Wt, L, T, f)
    if keep:
        out.trajectory = traj
    return out


def _build_scalar_attack(cfg, ls, gp_state, x_L, noise_var, out):
    if cfg.attack == "ls-scalar":
        a_hat = ls_estimate_scalar(ls)
        out.estimate = a_hat
        return FictitiousPlant.scalar_linear(a_hat, x_L, noise_var)
    if cfg.attack == "gp":
        post = gp_fit(gp_state)
        out._gp = post
        return FictitiousPlant.gaussian_process(post, x_L, noise_var)
    return None


def _scalar_beta(cfg, out, y, L, T, noise_var):
    a_hat = out.estimate
    v = np.array(y[L + 1: T + 1])
    power = float(v @ v) / T
    out.beta_empirical = 1.0 / power if power > 0 else None
    if cfg.policy.kind == "linear_gain" and cfg.privacy.kind == "none":
        try:
            out.beta_stationary = bounds.beta_linear(a_hat, cfg.policy.gain, noise_var)
        except ValueError:
            out.beta_stationary = None
    beta = cfg.beta if cfg.beta is not None else (
        out.beta_stationary if out.beta_stationary is not None else out.beta_empirical)
    out.lb_thm1 = 0.0 if beta is None or beta <= 0 else bounds.deception_lower_bound(cfg.delta, beta, L)


def _gp_bound_terms(cfg, out, fp, y, us, Wt, L, T, f):
    post = out.__dict__.pop("_gp")
    sigma = math.sqrt(cfg.plant.noise_var)
    psi = bounds.info_gain_psi(post.sequential_variances(), cfg.plant.noise_var)
    # hijack steps k = L+1..T with c = T - L
    v = np.array(y[L + 1: T + 1])
    u = np.array(us[L + 1: T + 1])
    Zq = np.column_stack([v, u])
    mean, var = post.predict(Zq)
    truth = np.array([f(vi, ui) for vi, ui in zip(v, u)])
    nu = np.abs(truth - mean)
    xis = [bounds.gp_confidence_xi(psi, cfg.chi, sigma, math.sqrt(s2), n) for s2, n in zip(var, nu)]
    out.gp_psi = psi
    out.gp_xi_product = float(np.prod(1.0 - np.array(xis)))
    out.gp_nu_ok = bounds.nu_condition_holds(nu, Wt[L + 1: T + 1], T, cfg.delta)


def _vector_trial(cfg: ExperimentConfig, src: RandomSource, keep: bool) -> TrialOutcome:
    plant = cfg.plant
    A = plant.A
    n = plant.n
    T, L = cfg.T, cfg.L
    attack = cfg.attack
    attacked = attack != "none"

    W = gaussian_array(src.child(DIST), T + 2, plant.noise_cov)
    W[0] = 0.0
    if cfg.clean_learning:
        W[1:L] = 0.0
    Wt = gaussian_array(src.child(FICT), T + 2, plant.noise_cov)
    x0 = gaussian_array(src.child(INIT), 1, plant.initial_cov)[0]
    ctrl = VectorController(cfg.policy, cfg.privacy, n, src.child(PRIV), T)

    x = np.zeros((T + 2, n))
    y = np.zeros((T + 2, n))
    us = np.zeros((T + 2, n))
    R = np.zeros((T + 1, n))
    hij = np.zeros(T + 2, dtype=bool)
    x[0] = y[0] = x0
    x[1] = y[1] = A @ x0

    out = TrialOutcome(0, src.seed, A.tolist(), attacked, False, 0.0, False)
    ls = VectorLSState.zeros(n)
    fp = None
    buf = ReplayBuffer() if attack == "replay" else None
    mal = cfg.malicious
    diverged_at = None
    steps = 0
    nan_row = np.full(n, np.nan)

    for k in range(1, T + 1):
        yk = y[k]
        uk = ctrl.act(yk)
        us[k] = uk
        xk = x[k]
        if diverged_at is None:
            applied = uk if (k <= L or not attacked) else malicious_input(mal, xk, uk)
            xn = A @ xk + applied + W[k]
            if not np.all(np.abs(xn) <= DIVERGENCE_LIMIT):
                diverged_at = k + 1
                xn = nan_row
        else:
            xn = nan_row
        x[k + 1] = xn

        if attacked:
            if k < L and attack == "ls-vector":
                ls_update_vector(ls, xk, uk, xn)
            if buf is not None and k <= L:
                buf.record(yk.copy())
            if k == L and attack == "ls-vector":
                A_hat = ls_estimate_vector(ls)
                out.estimate = A_hat.tolist()
                fp = FictitiousPlant.vector_linear(A_hat, x[L].copy(), plant.noise_cov)
            if k >= L:
                yn = fictitious_step(fp, uk, Wt[k]) if fp is not None else replay_observation(buf, k + 1, L)
                hij[k + 1] = True
            else:
                yn = xn
        else:
            yn = xn

        if not np.all(np.abs(yn) <= DIVERGENCE_LIMIT):
            out.observation_diverged = True
            break
        y[k + 1] = yn
        R[k] = yn - A @ yk - uk
        steps = k

    out.diverged_at = diverged_at
    out.hijacked = attacked and L + 1 <= T
    if out.observation_diverged:
        verdict = covariance_verdict(np.full((n, n), np.inf), plant.noise_cov, T, cfg.gamma)
    else:
        verdict = covariance_verdict(R.T @ R, plant.noise_cov, T, cfg.gamma)
    out.alarm, out.statistic = verdict.alarm, verdict.statistic

    traj = Trajectory(x, us, y, W, hij)
    if not out.observation_diverged and steps == T and diverged_at is None:
        out.lq_cost = lq_cost(traj, cfg.lq, T)

    if attack == "ls-vector" and L >= 2:
        xs = x[1:L]
        ws = W[1:L]
        out.pe_event = persistent_excitation_check(xs, cfg.zeta)
        out.ls_error_sum = float(np.sum(np.linalg.norm(ws, axis=1) * np.linalg.norm(xs, axis=1)))
        if out.estimate is not None:
            err = operator_norm(np.array(out.estimate) - A)
            out.estimate_error_norm = err
            bound = bounds.ls_error_bound(out.ls_error_sum, cfg.zeta, L)
            out.ls_bound_violated = bool(out.pe_event and err > bound * (1 + 1e-12))
        if not out.observation_diverged:
            v = y[L + 1: T + 1]
            power = float(np.sum(v * v)) / T
            out.beta_empirical = 1.0 / power if power > 0 else None
    if keep:
        out.trajectory = traj
    return out


@dataclass
class PointResult:
    """Aggregated Monte Carlo outcome at one grid point."""

    axis_name: str | None
    axis_value: str | None
    outcomes: list
    config_hash: str
    attacked: bool
    rate: float
    stderr: float
    n_trials: int
    n_valid: int
    lb_thm1: float | None = None
    ub_cor1: float | None = None
    lb_thm3: float | None = None
    lb_thm4: float | None = None
    lq_cost_mean: float | None = None

    @property
    def p_dec(self):
        return self.rate if self.attacked else None

    @property
    def p_fa(self):
        return None if self.attacked else self.rate

    def row(self) -> dict:
        return {
            "axis_name": self.axis_name,
            "axis_value": self.axis_value,
            "n_trials": self.n_trials,
            "n_valid": self.n_valid,
            "p_dec": self.p_dec,
            "stderr": self.stderr,
            "p_fa": self.p_fa,
            "lb_thm1": self.lb_thm1,
            "ub_cor1": self.ub_cor1,
            "lb_thm3": self.lb_thm3,
            "lb_thm4": self.lb_thm4,
            "lq_cost_mean": self.lq_cost_mean,
            "config_hash": self.config_hash,
        }


def binomial_stderr(p: float, n: int) -> float:
    return math.sqrt(p * (1.0 - p) / n)


def _run_chunk(args):
    text, indices, grid_index = args
    cfg = loads_config(text)
    return [run_trial(cfg, t, grid_index) for t in indices]


def run_trials(cfg: ExperimentConfig, n: int, grid_index: int = 0, threads: int = 1) -> list[TrialOutcome]:
    if n < 1:
        raise ValueError("need at least one trial")
    if threads <= 1:
        return [run_trial(cfg, t, grid_index) for t in range(n)]
    text = cfg.text()
    chunks = [(text, list(range(i, n, threads)), grid_index) for i in range(threads)]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        results = [o for part in pool.map(_run_chunk, chunks) for o in part]
    return sorted(results, key=lambda o: o.trial_index)


def aggregate(cfg: ExperimentConfig, outcomes: list[TrialOutcome], axis_name=None, axis_value=None) -> PointResult:
    valid = [o for o in outcomes if o.valid]
    if not valid:
        raise RuntimeError(f"no valid trials at {axis_name}={axis_value}")
    if cfg.attacked:
        hits = sum(o.deceived for o in valid)
    else:
        hits = sum(o.alarm for o in valid)
    rate = hits / len(valid)
    res = PointResult(axis_name, axis_value, outcomes, cfg.digest(), cfg.attacked, rate,
                      binomial_stderr(rate, len(valid)), len(outcomes), len(valid))

    costs = [o.lq_cost for o in valid if o.lq_cost is not None]
    if costs:
        res.lq_cost_mean = float(np.mean(costs))
    if cfg.attack == "ls-scalar":
        lbs = [o.lb_thm1 if o.lb_thm1 is not None else 0.0 for o in valid]
        res.lb_thm1 = float(np.mean(lbs))
        if cfg.prior.kind == "uniform" and cfg.L >= 1:
            res.ub_cor1 = _cor1_bound(cfg, valid)
    if cfg.attack == "ls-vector":
        errs = [o.ls_error_sum for o in valid]
        betas = [o.beta_empirical if o.beta_empirical is not None else 0.0 for o in valid]
        beta = cfg.beta if cfg.beta is not None else betas
        rho = cfg.rho if cfg.rho is not None else float(np.mean([bool(o.pe_event) for o in valid]))
        res.lb_thm3 = bounds.vector_lower_bound_estimate(errs, cfg.zeta, cfg.L, cfg.gamma, beta, rho)
    if cfg.attack == "gp":
        gp = [o for o in valid if o.gp_xi_product is not None]
        if gp:
            p_bar = float(np.mean([o.gp_nu_ok for o in gp]))
            res.lb_thm4 = p_bar * float(np.mean([o.gp_xi_product for o in gp]))
    return res


def _cor1_bound(cfg: ExperimentConfig, valid: list[TrialOutcome]) -> float | None:
    if cfg.policy.depends_on_gain:
        return None
    beta = cfg.beta
    if beta is None:
        betas = [o.beta_stationary for o in valid if o.beta_stationary is not None]
        if not betas:
            return None
        beta = float(np.mean(betas))
    moments = float(np.mean([o.second_moment_sum for o in valid]))
    try:
        return bounds.g_upper_bound(moments, cfg.plant.noise_var, cfg.L, cfg.prior.R, cfg.delta, beta)
    except ValueError:
        return None


def monte_carlo(cfg: ExperimentConfig, n: int | None = None, grid_index: int = 0, threads: int = 1,
                axis_name=None, axis_value=None) -> PointResult:
    n = cfg.trials if n is None else n
    return aggregate(cfg, run_trials(cfg, n, grid_index, threads), axis_name, axis_value)


@dataclass
class SweepReport:
    name: str
    points: list
    metadata: dict


def sweep(cfg: ExperimentConfig, axis: str | None = None, values=None, n: int | None = None,
          threads: int = 1) -> SweepReport:
    axis = axis if axis is not None else cfg.sweep_axis
    values = list(values if values is not None else cfg.sweep_values)
    if axis is None:
        points = [monte_carlo(cfg, n, 0, threads)]
    else:
        if not values:
            raise ValueError("sweep grid is empty")
        points = []
        for i, v in enumerate(values):
            sub = cfg.with_overrides({axis: v})
            log.info("grid point %s=%s", axis, v)
            points.append(monte_carlo(sub, n, i, threads, axis, str(v)))
    from . import __version__

    meta = {
        "name": cfg.name,
        "config_hash": cfg.digest(),
        "version": __version__,
        "seed": cfg.seed,
        "x0_default": "N(0, noise variance)" if _x0_defaulted(cfg) else "configured",
    }
    if cfg.attack == "gp":
        k = cfg.kernel
        meta["gp_kernel"] = {"length_scale": k.length_scale, "signal_var": k.signal_var,
                             "white_var": k.white_var, "standardized_inputs": True}
    return SweepReport(cfg.name, points, meta)


def _x0_defaulted(cfg: ExperimentConfig) -> bool:
    p = cfg.plant
    return getattr(p, "x0_var", None) is None and getattr(p, "x0_cov", None) is None


def z_greater(p1: float, se1: float, p2: float, se2: float) -> float:
    """z-score of ``p1 > p2`` for independent binomial estimates."""
    se = math.hypot(se1, se2)
    if se == 0:
        return math.inf if p1 > p2 else (0.0 if p1 == p2 else -math.inf)
    return (p1 - p2) / se
