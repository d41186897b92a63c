import math

import numpy as np
import pytest

from nettomo.correlation import (
    CorrelationSource,
    NonConvergenceError,
    default_burn_in,
    default_lyapunov_max_iters,
    empirical_pair,
    empirical_r0,
    empirical_r1,
    exact_pair,
    r0_closed_form_symmetric,
    r0_lyapunov,
    r1_from_r0,
    write_matrix_csv,
)
from nettomo.diffusion import InputKind, simulate
from nettomo.graphgen import GraphKind, GraphModel, generate
from nettomo.policies import metropolis, uniform_averaging

MU = 0.1


def metropolis_matrix(n, p, seed=0, mu=MU):
    g = generate(GraphModel(GraphKind.ERDOS_RENYI_SYMMETRIC, n, p, seed=seed))
    return metropolis(g, mu)


def test_scalar_closed_form():
    r0 = r0_closed_form_symmetric(np.array([[0.9]]), MU)
    assert r0[0, 0] == pytest.approx(0.01 / 0.19)
    assert r0[0, 0] == pytest.approx(0.0526316, abs=1e-7)


def test_diagonal_closed_form():
    # A = (1 - mu) I at mu = 0.5 gives R0 = (1/3) I
    r0 = r0_closed_form_symmetric(0.5 * np.eye(4), 0.5)
    assert np.allclose(r0, np.eye(4) / 3.0)


def test_closed_form_matches_truncated_series():
    A = metropolis_matrix(5, 0.8, seed=1)
    series = np.zeros((5, 5))
    power = np.eye(5)
    a2 = A.matrix @ A.matrix
    for _ in range(2001):
        series += power
        power = power @ a2
    series *= MU * MU
    closed = r0_closed_form_symmetric(A.matrix, MU)
    assert np.abs(closed - series).max() <= 1e-10


def test_closed_form_rejects_asymmetric():
    g = generate(GraphModel(GraphKind.BINOMIAL_DIRECTED, 10, 0.4, seed=2))
    A = uniform_averaging(g, MU)
    with pytest.raises(ValueError):
        r0_closed_form_symmetric(A.matrix, MU)


def test_lyapunov_agrees_with_closed_form():
    A = metropolis_matrix(30, 0.3, seed=4)
    lyap = r0_lyapunov(A.matrix, MU, tol=1e-12)
    closed = r0_closed_form_symmetric(A.matrix, MU)
    assert np.abs(lyap - closed).max() <= 1e-10


def test_lyapunov_zero_matrix_immediate():
    r0 = r0_lyapunov(np.zeros((3, 3)), MU)
    assert np.allclose(r0, MU * MU * np.eye(3))


def test_lyapunov_residual_for_asymmetric_matrix():
    g = generate(GraphModel(GraphKind.BINOMIAL_DIRECTED, 5, 0.5, seed=3))
    A = uniform_averaging(g, MU)
    tol = 1e-12
    r0 = r0_lyapunov(A.matrix, MU, tol=tol)
    residual = np.abs(r0 - A.matrix @ r0 @ A.matrix.T - MU * MU * np.eye(5)).max()
    assert residual <= 10 * tol


def test_lyapunov_nonconvergence_signalled():
    A = metropolis_matrix(10, 0.5, seed=5)
    with pytest.raises(NonConvergenceError):
        r0_lyapunov(A.matrix, MU, tol=1e-12, max_iters=2)
    assert default_lyapunov_max_iters(MU, 1e-12) >= 100


def test_r1_scalar_and_diagonal():
    r1 = r1_from_r0(np.array([[0.9]]), np.array([[0.01 / 0.19]]))
    assert r1[0, 0] == pytest.approx(0.0473684, abs=1e-7)
    r0 = r0_closed_form_symmetric(0.9 * np.eye(3), MU)
    assert np.allclose(r1_from_r0(0.9 * np.eye(3), r0), 0.9 * r0)


def test_r1_shape_mismatch():
    with pytest.raises(ValueError):
        r1_from_r0(np.eye(3), np.eye(4))


def test_transition_matrix_roundtrip():
    A = metropolis_matrix(20, 0.4, seed=7)
    r0 = r0_closed_form_symmetric(A.matrix, MU)
    r1 = r1_from_r0(A.matrix, r0)
    recovered = np.linalg.solve(r0.T, r1.T).T
    assert np.abs(recovered - A.matrix).max() <= 1e-9


def test_pre_steady_state_identity():
    # A = R1(n) R0(n-1)^-1 holds at every finite n >= 2 for the
    # truncated-series correlation matrices
    A = metropolis_matrix(6, 0.7, seed=8)
    a2 = A.matrix @ A.matrix
    for n in (2, 3, 7):
        r0_prev = np.zeros((6, 6))
        power = np.eye(6)
        for _ in range(n - 1):
            r0_prev += power
            power = power @ a2
        r0_prev *= MU * MU
        r1_n = A.matrix @ r0_prev
        recovered = np.linalg.solve(r0_prev.T, r1_n.T).T
        assert np.abs(recovered - A.matrix).max() <= 1e-10


def test_minimum_eigenvalue_floor():
    for seed in range(3):
        A = metropolis_matrix(40, 0.2, seed=seed)
        r0 = r0_closed_form_symmetric(A.matrix, MU)
        assert np.linalg.eigvalsh(r0).min() >= MU * MU - 1e-10


def test_empirical_zero_trace():
    assert np.all(empirical_r0(np.zeros((3, 100)), 10) == 0.0)


def test_empirical_unit_power_single_row():
    trace = np.ones((1, 50))
    trace[0, 1::2] = -1.0
    assert empirical_r0(trace, 0)[0, 0] == pytest.approx(1.0)


def test_empirical_sample_guards():
    with pytest.raises(ValueError):
        empirical_r0(np.zeros((2, 10)), 9)
    with pytest.raises(ValueError):
        empirical_r1(np.zeros((2, 10)), 9)
    with pytest.raises(ValueError):
        empirical_r0(np.zeros((2, 10)), -1)


def test_empirical_converges_to_closed_form():
    A = metropolis_matrix(20, 0.4, seed=9)
    trace = simulate(A, 1_000_000, InputKind.STANDARD_NORMAL, seed=13)
    burn = default_burn_in(MU)
    r0_hat = empirical_r0(trace.outputs, burn)
    r0 = r0_closed_form_symmetric(A.matrix, MU)
    assert np.abs(r0_hat - r0).max() / np.abs(r0).max() <= 0.05
    r1_hat = empirical_r1(trace.outputs, burn)
    r1 = r1_from_r0(A.matrix, r0)
    assert np.abs(r1_hat - r1).max() / np.abs(r1).max() <= 0.05


def test_empirical_error_halves_when_samples_quadruple():
    A = metropolis_matrix(10, 0.5, seed=10)
    r0 = r0_closed_form_symmetric(A.matrix, MU)
    burn = default_burn_in(MU)

    def err(n, seed):
        trace = simulate(A, n, InputKind.STANDARD_NORMAL, seed=seed)
        return np.abs(empirical_r0(trace.outputs, burn) - r0).max()

    ratios = [err(40_000 + burn, s) / err(160_000 + burn, s + 100) for s in range(5)]
    median = float(np.median(ratios))
    assert 2.0 / 1.5 <= median <= 2.0 * 1.5


def test_pair_builders():
    A = metropolis_matrix(12, 0.5, seed=11)
    pair = exact_pair(A)
    assert pair.source is CorrelationSource.CLOSED_FORM_SYMMETRIC
    assert np.abs(pair.r1 - A.matrix @ pair.r0).max() <= 1e-14

    g = generate(GraphModel(GraphKind.BINOMIAL_DIRECTED, 12, 0.4, seed=12))
    asym = uniform_averaging(g, MU)
    pair = exact_pair(asym)
    assert pair.source is CorrelationSource.LYAPUNOV_ITERATION

    trace = simulate(A, 5_000, InputKind.STANDARD_NORMAL, seed=14)
    emp = empirical_pair(trace.outputs, MU)
    assert emp.source is CorrelationSource.EMPIRICAL
    assert emp.burn_in == default_burn_in(MU) == math.ceil(20 / MU)


def test_matrix_export(tmp_path):
    path = tmp_path / "m.csv"
    write_matrix_csv(np.array([[1.5, 2.0], [3.0, 4.5]]), path, header_comment="x")
    lines = path.read_text().splitlines()
    assert lines[:2] == ["# x", "row,col,value"]
    assert lines[2] == "1,1,1.5"
    assert lines[-1] == "2,2,4.5"
