import math
import random

import numpy as np
import pytest

from learnattack import harness
from learnattack.config import load_config, loads_config
from learnattack.core import gaussian_array, operator_norm
from learnattack.detector import false_alarm_bound
from learnattack.harness import (
    DIST,
    FICT,
    INIT,
    aggregate,
    binomial_stderr,
    monte_carlo,
    run_trial,
    run_trials,
    sweep,
    trial_source,
)
from oracles import scalar_attack_oracle

BASE = """
[experiment]
schema_version = 1
name = unit
trials = 50
seed = 1234

[plant]
kind = scalar
a = 1.0
noise_var = 1.0

[controller]
kind = linear_gain
gain = 0.88

[attack]
kind = ls-scalar
L = 20

[detector]
delta = 0.1
T = 200
"""


def cfg(**over):
    c = loads_config(BASE)
    return c.with_overrides(over) if over else c


def draws(c, t=0):
    src = trial_source(c, t)
    T, L = c.T, c.L
    W = src.child(DIST).normal(T + 2, 1.0)
    W[0] = 0.0
    if c.clean_learning:
        W[1:L] = 0.0
    Wt = src.child(FICT).normal(T + 2, 1.0)
    x0 = float(src.child(INIT).normal(scale=1.0))
    return x0, W, Wt


class TestScalarTrial:
    def test_matches_equation_oracle(self):
        c = cfg()
        out = run_trial(c, 0, keep_trajectory=True)
        x0, W, Wt = draws(c)
        a_hat, stat, v, res = scalar_attack_oracle(1.0, 0.88, x0, W, Wt, c.L, c.T)
        assert out.estimate == pytest.approx(a_hat, rel=1e-12)
        assert out.statistic == pytest.approx(stat, rel=1e-12)
        np.testing.assert_allclose(out.trajectory.observations[c.L + 1: c.T + 2, 0], v[c.L + 1: c.T + 2],
                                   rtol=1e-12)

    def test_attack_residual_identity(self):
        c = cfg()
        out = run_trial(c, 3, keep_trajectory=True)
        _, _, Wt = draws(c, 3)
        tr = out.trajectory
        y, u = tr.observations[:, 0], tr.controls[:, 0]
        for k in range(c.L, c.T + 1):
            r = y[k + 1] - 1.0 * y[k] - u[k]
            assert r == pytest.approx(Wt[k] + (out.estimate - 1.0) * y[k], abs=1e-12)

    def test_learning_residuals_are_disturbances(self):
        c = cfg()
        out = run_trial(c, 4, keep_trajectory=True)
        _, W, _ = draws(c, 4)
        tr = out.trajectory
        for k in range(1, c.L):
            r = tr.observations[k + 1, 0] - tr.observations[k, 0] - tr.controls[k, 0]
            assert r == pytest.approx(W[k], abs=1e-12)

    def test_clean_learning_gives_exact_estimate(self):
        c = cfg(**{"attack.clean_learning": "true"})
        out = run_trial(c, 0, keep_trajectory=True)
        _, _, Wt = draws(c)
        assert out.estimate == pytest.approx(1.0, abs=1e-12)
        ref = float(Wt[c.L: c.T + 1] @ Wt[c.L: c.T + 1]) / c.T
        assert out.statistic == pytest.approx(ref, rel=1e-10)
        assert not run_trial(cfg(**{"attack.clean_learning": "true", "detector.delta": 5}), 0).alarm

    def test_hijack_bookkeeping(self):
        out = run_trial(cfg(), 1, keep_trajectory=True)
        tr = out.trajectory
        tr.validate()
        assert out.hijacked
        assert not tr.hijacked[: cfg().L + 1].any()
        assert tr.hijacked[cfg().L + 1:].all()
        assert out.deceived == (not out.alarm)

    def test_real_plant_diverges_under_malicious_input(self):
        out = run_trial(cfg(**{"detector.T": 800}), 0, keep_trajectory=True)
        assert out.diverged_at is not None and out.diverged_at > cfg().L
        assert np.isnan(out.trajectory.states[-1, 0])

    def test_divergent_fictitious_loop_alarms(self):
        out = run_trial(cfg(**{"controller.gain": -0.5}), 0)
        assert out.observation_diverged and out.alarm and math.isinf(out.statistic)

    def test_no_attack_is_false_alarm_sample(self):
        c = cfg(**{"attack.kind": "none"})
        out = run_trial(c, 0, keep_trajectory=True)
        assert not out.hijacked and not out.deceived
        assert not out.trajectory.hijacked.any()
        assert np.array_equal(out.trajectory.observations, out.trajectory.states)

    def test_degenerate_learning_data_marks_invalid(self):
        c = cfg(**{"attack.clean_learning": "true", "plant.x0_var": 0})
        out = run_trial(c, 0)
        assert not out.valid and "identifiable" in out.note
        with pytest.raises(RuntimeError):
            aggregate(c, [out])

    def test_beta_and_bound_per_trial(self):
        out = run_trial(cfg(), 2)
        assert out.beta_stationary == pytest.approx(1 - (out.estimate - 0.88) ** 2)
        assert 0.0 <= out.lb_thm1 <= 1.0

    def test_uniform_prior_samples_gain(self):
        c = load_config_text_uniform()
        gains = {run_trial(c, t).gain for t in range(5)}
        assert len(gains) == 5 and all(abs(g) <= 0.9 for g in gains)

    def test_replay_plays_back_recording(self):
        c = cfg(**{"attack.kind": "replay", "attack.L": 5})
        out = run_trial(c, 0, keep_trajectory=True)
        y = out.trajectory.observations[:, 0]
        for k in range(6, c.T + 2):
            assert y[k] == y[1 + (k - 5 - 1) % 5]


def load_config_text_uniform():
    return cfg(**{"prior.kind": "uniform", "prior.R": 0.9, "controller.gain": 0.045, "plant.noise_var": 0.16})


class TestExample4:
    def test_cor2_terms_and_cost(self):
        c = cfg(**{"attack.kind": "none", "controller.gain": 0.5, "controller.privacy": "example4_recursive",
                   "controller.eta": 3})
        out = run_trial(c, 0)
        assert len(out.cor2_terms) == c.L
        assert all(t < 0 for t in out.cor2_terms)
        assert out.lq_cost > 0


class TestVectorTrial:
    def vcfg(self, **over):
        c = load_config(_configs() / "ex5-vec.cfg").with_overrides({"detector.T": 150, **over})
        return c

    def test_residual_identity(self):
        c = self.vcfg()
        out = run_trial(c, 0, keep_trajectory=True)
        A = c.plant.A
        A_hat = np.array(out.estimate)
        Wt = gaussian_array(trial_source(c, 0).child(FICT), c.T + 2, c.plant.noise_cov)
        tr = out.trajectory
        for k in range(c.L, c.T + 1):
            r = tr.observations[k + 1] - A @ tr.observations[k] - tr.controls[k]
            np.testing.assert_allclose(r, Wt[k] + (A_hat - A) @ tr.observations[k], atol=1e-9)

    def test_ls_error_terms(self):
        c = self.vcfg()
        for t in range(10):
            out = run_trial(c, t)
            assert out.pe_event is not None
            assert out.estimate_error_norm == pytest.approx(
                operator_norm(np.array(out.estimate) - c.plant.A))
            assert not out.ls_bound_violated

    def test_no_attack_vector(self):
        out = run_trial(self.vcfg(**{"attack.kind": "none"}), 0)
        assert not out.hijacked and out.lq_cost is not None


class TestGPTrial:
    def test_runs_and_reports_bound_terms(self):
        c = load_config(_configs() / "ex7-gp.cfg").with_overrides({"detector.T": 150, "attack.L": 40})
        out = run_trial(c, 0)
        assert out.valid and out.hijacked
        assert out.gp_psi > 0
        assert 0.0 <= out.gp_xi_product <= 1.0
        assert out.gp_nu_ok in (True, False)


def _configs():
    from conftest import CONFIGS

    return CONFIGS


class TestMonteCarlo:
    def test_stderr_formula(self):
        assert binomial_stderr(0.5, 500) == pytest.approx(math.sqrt(0.25 / 500), rel=1e-14)
        assert binomial_stderr(0.5, 500) == pytest.approx(0.02236, abs=1e-5)

    def test_all_deceived(self):
        r = monte_carlo(cfg(**{"detector.delta": 100}), 20)
        assert r.rate == 1.0 and r.stderr == 0.0

    def test_deterministic_and_order_independent(self):
        c = cfg()
        a = monte_carlo(c, 30)
        b = monte_carlo(c, 30)
        assert a.rate == b.rate
        idx = list(range(30))
        random.Random(0).shuffle(idx)
        shuffled = sorted((run_trial(c, t) for t in idx), key=lambda o: o.trial_index)
        assert aggregate(c, shuffled).rate == a.rate
        assert [o.statistic for o in shuffled] == [o.statistic for o in a.outcomes]

    def test_threads_match_serial(self):
        c = cfg()
        serial = run_trials(c, 12)
        pooled = run_trials(c, 12, threads=2)
        assert [o.statistic for o in serial] == [o.statistic for o in pooled]

    def test_detection_and_deception_complement(self):
        r = monte_carlo(cfg(), 40)
        det = sum(o.alarm for o in r.outcomes) / r.n_valid
        assert det + r.p_dec == pytest.approx(1.0)

    def test_false_alarm_within_chebyshev(self):
        c = cfg(**{"attack.kind": "none", "detector.T": 400})
        r = monte_carlo(c, 200)
        assert r.p_fa is not None and r.p_dec is None
        assert r.p_fa <= false_alarm_bound(1.0, 0.1, 400) + 3 * r.stderr

    def test_zero_trials(self):
        with pytest.raises(ValueError):
            monte_carlo(cfg(), 0)


class TestSweep:
    def test_single_point_equals_monte_carlo(self):
        c = cfg()
        rep = sweep(c, "attack.L", ["20"], n=15)
        assert rep.points[0].rate == monte_carlo(c, 15).rate

    def test_grid_seeds_depend_on_index(self):
        rep = sweep(cfg(), "attack.L", ["20", "20"], n=15)
        a, b = rep.points
        assert [o.seed for o in a.outcomes] != [o.seed for o in b.outcomes]

    def test_metadata(self):
        rep = sweep(cfg(), "attack.L", ["10", "20"], n=5)
        assert rep.metadata["config_hash"] == cfg().digest()
        assert [p.axis_value for p in rep.points] == ["10", "20"]
        for p in rep.points:
            assert 0.0 <= p.rate <= 1.0 and p.n_valid == 5

    def test_empty_grid(self):
        with pytest.raises(ValueError):
            sweep(cfg(), "attack.L", [], n=5)

    def test_uniform_prior_emits_upper_bound(self):
        c = load_config_text_uniform().with_overrides({"bounds.beta": 1.1, "attack.L": 3})
        p = monte_carlo(c, 40)
        assert p.ub_cor1 is not None and 0 < p.ub_cor1 <= 1
        assert p.lb_thm1 == 0.0
