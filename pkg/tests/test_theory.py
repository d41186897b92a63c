import math

import numpy as np
import pytest

from nettomo.graphgen import GraphKind, GraphModel
from nettomo.policies import make_policy
from nettomo.theory import (
    approx_error_variance,
    binomial_inverse_moment,
    error_concentration_audit,
    exceedance_count_audit,
    h_row_sum_bound,
    max_degree_tail,
    run_verification,
    weighted_sum_variance,
)

MU = 0.1


def er_model(n, p):
    return GraphModel(GraphKind.ERDOS_RENYI_SYMMETRIC, n, p)


def test_tail_bound_reference_value():
    n = 100
    p = 2 * math.log(n) / n
    _, bound = max_degree_tail(er_model(n, p), trials=100, seed=0)
    assert bound == pytest.approx((math.e + 2 * math.e**2 / 100) * 0.01)
    assert bound == pytest.approx(0.02866, abs=5e-5)


def test_tail_on_complete_graph_is_zero():
    # p = 1: d_max = N always, and the level N*e is never reached
    empirical, _ = max_degree_tail(er_model(50, 1.0), trials=200, seed=1)
    assert empirical == 0.0


def test_tail_below_bound_monte_carlo():
    for n in (100, 400):
        p = 2 * math.log(n) / n
        empirical, bound = max_degree_tail(er_model(n, p), trials=2000, seed=3)
        assert empirical <= bound


def test_tail_validates_trials_and_retry_budget():
    with pytest.raises(ValueError):
        max_degree_tail(er_model(100, 0.1), trials=10, seed=0)
    with pytest.raises(RuntimeError):
        max_degree_tail(er_model(100, 1e-9), trials=100, seed=0, max_attempts=50)


def test_inverse_moment_closed_form_m1():
    exact, bound = binomial_inverse_moment(10, 0.5, 1)
    # analytic value (1 - (1-p)^(n+1)) / ((n+1) p)
    assert exact == pytest.approx((1 - 0.5**11) / (11 * 0.5), abs=1e-12)
    assert exact == pytest.approx(0.181729, abs=1e-6)
    assert bound == pytest.approx(0.2)


def test_inverse_moment_degenerate_p_one():
    for n, m in [(10, 1), (30, 2)]:
        exact, bound = binomial_inverse_moment(n, 1.0, m)
        assert exact == pytest.approx(1.0 / (1 + n) ** m)
        assert exact <= bound


def test_inverse_moment_entire_grid_below_bound():
    for n in (10, 50, 200):
        for p in (0.05, 0.1, 0.5):
            for m in (1, 2):
                exact, bound = binomial_inverse_moment(n, p, m)
                assert 0.0 < exact <= bound


def test_inverse_moment_validation():
    with pytest.raises(ValueError):
        binomial_inverse_moment(0, 0.5, 1)
    with pytest.raises(ValueError):
        binomial_inverse_moment(10, 0.0, 1)
    with pytest.raises(ValueError):
        binomial_inverse_moment(10, 0.5, 3)


def test_weighted_sum_variance_collapses_for_deterministic_weights():
    u = np.tile([0.3, 1.2, -0.5], (10, 1))  # no variability across draws
    got = weighted_sum_variance(u, z_mean=0.0, z_var=2.0)
    assert got == pytest.approx(2.0 * (0.3**2 + 1.2**2 + 0.5**2))


def test_weighted_sum_variance_single_unit_weight():
    u = np.ones((5, 1))
    assert weighted_sum_variance(u, z_mean=3.0, z_var=0.7) == pytest.approx(0.7)


def test_weighted_sum_variance_against_monte_carlo():
    rng = np.random.default_rng(5)
    runs, length = 100_000, 4
    u = rng.normal(1.0, 0.5, size=(runs, length))
    z = rng.choice([-1.0, 3.0], size=(runs, length))  # mean 1, var 4
    mc = float(np.var(np.sum(u * z, axis=1), ddof=1))
    approx = weighted_sum_variance(u, z_mean=1.0, z_var=4.0)
    assert abs(approx / mc - 1.0) <= 0.05


def test_weighted_sum_variance_needs_samples():
    with pytest.raises(ValueError):
        weighted_sum_variance(np.ones((1, 3)), 0.0, 1.0)


def test_h_row_sum_bound_reference():
    assert h_row_sum_bound(MU) == pytest.approx(1.0 / (0.1 * 1.9))
    assert h_row_sum_bound(MU) == pytest.approx(5.2632, abs=1e-4)


def test_variance_report_full_observation_degenerates():
    report = approx_error_variance(
        er_model(10, 0.9), make_policy("metropolis", MU), 0.99, 50, seed=0
    )
    assert report.mc_variance == 0.0
    assert report.approx_variance == 0.0
    assert math.isnan(report.ratio)


def test_variance_report_ratio_in_band():
    n = 100
    report = approx_error_variance(
        er_model(n, 2 * math.log(n) / n), make_policy("metropolis", MU), 0.2, 300, seed=4
    )
    assert report.mc_variance > 0.0
    assert 0.2 <= report.ratio <= 5.0
    assert report.approx_variance <= report.upper_bound
    assert report.n_runs == 300


def test_concentration_audits_on_zero_matrix():
    z = np.zeros((4, 4))
    assert error_concentration_audit(z, MU)
    assert exceedance_count_audit(z, MU, 0.01)
    assert exceedance_count_audit(np.full((3, 3), 0.05), MU, 1e9)


def test_concentration_audit_detects_violations():
    bad = np.zeros((3, 3))
    bad[0, 0] = -1e-6
    assert not error_concentration_audit(bad, MU)
    heavy = np.full((3, 3), 0.5)
    assert not error_concentration_audit(heavy, MU)  # row sum 1.5 > 0.9
    assert not exceedance_count_audit(np.full((1, 12), 0.2), MU, 0.1)  # 12 > 9


def test_exceedance_audit_validates_eps():
    with pytest.raises(ValueError):
        exceedance_count_audit(np.zeros((2, 2)), MU, 0.0)


def test_run_verification_quick_profile():
    report = run_verification(seed=0, profile="quick")
    assert report["all_passed"]
    assert len(report["checks"]) >= 6
    names = {c["name"] for c in report["checks"]}
    assert len(names) == len(report["checks"])  # unique check names
    for check in report["checks"]:
        assert set(check) == {"name", "configuration", "observed", "bound", "passed"}
    again = run_verification(seed=0, profile="quick")
    assert report == again
    with pytest.raises(ValueError):
        run_verification(seed=0, profile="huge")
