"""Numerical verification of the concentration, tail, and variance results.

Each function evaluates one analytic claim at finite network size: the
conditional tail of the maximal degree, inverse moments of binomial
variables, the variance identity for weighted sums, the concentration of
the partial-observation error matrix, and the independence-approximation
estimate of the error variance. ``run_verification`` bundles them into a
machine-readable report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .correlation import r0_closed_form_symmetric, r0_lyapunov, r1_from_r0
from .graphgen import GraphKind, GraphModel, InteractionGraph, generate, _sample_adjacency, _graph_from_adjacency
from .policies import (
    CombinationMatrix,
    PolicyFn,
    check_class_tau,
    check_equivariance,
    counterexample_policy,
    default_tau,
    make_policy,
)
from .rng import make_rng, split_seed
from .tomography import (
    ObservableSet,
    SelectionMode,
    diagnostics,
    error_closed_form,
    estimate_a_obs,
    scaled_fraction_ratio,
    select_observable,
    subset_size,
)

ENTRY_TOL = 1e-10


@dataclass(frozen=True)
class VarianceReport:
    """Monte Carlo versus independence-approximation error variance."""

    mc_variance: float
    approx_variance: float
    upper_bound: float
    n_runs: int
    ratio: float


def max_degree_tail(
    model: GraphModel, trials: int, seed: int, max_attempts: int = 10**6
) -> tuple[float, float]:
    """Conditional tail of the maximal degree given one fixed interacting pair.

    Rejection sampling on the designated pair (0, 1): graphs are resampled
    until the pair interacts, then the frequency of ``d_max >= N * p * e``
    is recorded. Returns ``(empirical, bound)`` with the analytic bound
    ``(e + 2 e^2 / N) * exp(-c_N)``, ``c_N = N p - ln N``.
    """
    if trials < 100:
        raise ValueError("tail estimation needs trials >= 100")
    n, p = model.n_agents, model.p
    level = n * p * math.e
    rng = make_rng(seed)
    hits = 0
    accepted = 0
    attempts = 0
    while accepted < trials:
        attempts += 1
        if attempts > max_attempts:
            raise RuntimeError(
                f"designated pair never interacted within {max_attempts} attempts (p={p})"
            )
        # The pair's own Bernoulli decides acceptance; the remaining slots are
        # only materialized on acceptance. By independence of the slots this
        # is distribution-identical to whole-graph rejection.
        if rng.random() >= p:
            continue
        adj = _sample_adjacency(model.kind, n, p, rng)
        adj[0, 1] = 1
        adj[1, 0] = 1
        accepted += 1
        if np.count_nonzero(adj, axis=1).max() >= level:
            hits += 1
    c_n = n * p - math.log(n)
    bound = (math.e + 2.0 * math.e**2 / n) * math.exp(-c_n)
    return hits / trials, bound


def binomial_inverse_moment(n: int, p: float, m: int) -> tuple[float, float]:
    """Exact ``E[1 / (1 + beta(n, p))^m]`` and its bound ``m / (n p)^m``.

    The binomial sum is evaluated with log-space coefficients so that
    ``n`` in the hundreds stays overflow-free. ``m`` must be 1 or 2.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 < p <= 1.0:
        raise ValueError("p must lie in (0, 1]")
    if m not in (1, 2):
        raise ValueError("m must be 1 or 2")
    if p == 1.0:
        exact = 1.0 / (1.0 + n) ** m
    else:
        log_p = math.log(p)
        log_q = math.log1p(-p)
        log_norm = math.lgamma(n + 1)
        exact = 0.0
        for k in range(n + 1):
            log_term = (
                log_norm
                - math.lgamma(k + 1)
                - math.lgamma(n - k + 1)
                + k * log_p
                + (n - k) * log_q
                - m * math.log(1 + k)
            )
            exact += math.exp(log_term)
    return exact, m / (n * p) ** m


def weighted_sum_variance(u_samples: np.ndarray, z_mean: float, z_var: float) -> float:
    """Variance of ``sum_l u_l z_l`` for independent u and iid uncorrelated z.

    The u moments are estimated from ``u_samples`` (rows are independent
    draws of the u vector):

        var = z_var * sum_l E[u_l^2] + z_mean^2 * V[sum_l u_l].
    """
    u = np.asarray(u_samples, dtype=np.float64)
    if u.ndim != 2 or u.shape[0] < 2:
        raise ValueError("u_samples must be a (runs, L) matrix with runs >= 2")
    sum_sq = float(np.mean(np.sum(u * u, axis=1)))
    var_sum = float(np.var(np.sum(u, axis=1), ddof=1))
    return z_var * sum_sq + z_mean * z_mean * var_sum


def h_row_sum_bound(mu: float) -> float:
    """Bound ``1 / (mu (2 - mu))`` on the row sums of the hidden-block inverse.

    Its square is the constant entering the rough upper bound on the
    approximate error variance.
    """
    return 1.0 / (mu * (2.0 - mu))


def _zero_variance_report(n_runs: int) -> VarianceReport:
    return VarianceReport(0.0, 0.0, 0.0, n_runs, math.nan)


def approx_error_variance(
    model: GraphModel,
    policy: PolicyFn,
    omega_fraction: float,
    mc_moment_runs: int,
    seed: int,
) -> VarianceReport:
    """Independence-approximation variance of one error entry versus Monte Carlo.

    The ingredient moments (mean square of the combination weights, moments
    of the squared-matrix entries, of the inverse rows, and of the
    cross-block row sums) are estimated over ``mc_moment_runs`` sampled
    graphs with the first-K observable set; the reference variance is the
    sample variance of the (0, 1) error entry over fresh graphs.
    """
    if mc_moment_runs < 2:
        raise ValueError("need at least 2 Monte Carlo runs")
    n = model.n_agents
    k = subset_size(n, omega_fraction)
    if k >= n:
        # empty hidden part: the estimate is exact and all variances vanish
        return _zero_variance_report(mc_moment_runs)
    obs = np.arange(k)
    hid = np.arange(k, n)
    omega = ObservableSet(indices=obs, xi=omega_fraction)
    off_mask = ~np.eye(n, dtype=bool)

    a_sq = []
    b_entries = []
    h_row_sq = []
    h_row_sum = []
    f_entries = []
    a_row_sum = []
    mu = math.nan
    for r in range(mc_moment_runs):
        graph = generate(replace(model, seed=split_seed(seed, 0, r)))
        A = policy(graph)
        mu = A.mu
        mat = A.matrix
        b = mat @ mat
        a_sq.append(np.mean(mat[off_mask] ** 2))
        b_block = b[np.ix_(hid, obs)]
        b_entries.append(b_block.ravel())
        h = np.linalg.inv(np.eye(n - k) - b[np.ix_(hid, hid)])
        h_row_sq.append(np.sum(h * h, axis=1))
        h_row_sum.append(np.sum(h, axis=1))
        f_entries.append((h @ b_block).ravel())
        a_row_sum.append(mat[np.ix_(obs, hid)].sum(axis=1))

    a2_bar = float(np.mean(a_sq))
    b_pool = np.concatenate(b_entries)
    b_bar = float(np.mean(b_pool))
    b_var = float(np.var(b_pool, ddof=1))
    b2_bar = b_var + b_bar * b_bar
    h2_row = float(np.mean(np.concatenate(h_row_sq)))
    h_sum_var = float(np.var(np.concatenate(h_row_sum), ddof=1))
    f_bar = float(np.mean(np.concatenate(f_entries)))
    a_sum_var = float(np.var(np.concatenate(a_row_sum), ddof=1))

    approx = (n - k) * a2_bar * (b_var * h2_row + b_bar * b_bar * h_sum_var) + f_bar * f_bar * a_sum_var

    big_c = h_row_sum_bound(mu) ** 2
    upper = (n - k) * a2_bar * b2_bar * big_c + (1.0 - mu) ** 2 / k**2

    samples = np.empty(mc_moment_runs)
    for r in range(mc_moment_runs):
        graph = generate(replace(model, seed=split_seed(seed, 1, r)))
        samples[r] = error_closed_form(policy(graph).matrix, omega)[0, 1]
    mc_var = float(np.var(samples, ddof=1))

    ratio = approx / mc_var if mc_var > 0.0 else math.nan
    return VarianceReport(
        mc_variance=mc_var,
        approx_variance=float(approx),
        upper_bound=float(upper),
        n_runs=mc_moment_runs,
        ratio=ratio,
    )


def error_concentration_audit(e_matrix: np.ndarray, mu: float) -> bool:
    """Entrywise nonnegativity and row sums at most ``1 - mu`` (within 1e-10)."""
    e_matrix = np.asarray(e_matrix, dtype=np.float64)
    if e_matrix.size == 0:
        return True
    return bool(
        e_matrix.min() >= -ENTRY_TOL and e_matrix.sum(axis=1).max() <= (1.0 - mu) + ENTRY_TOL
    )


def exceedance_count_audit(e_matrix: np.ndarray, mu: float, eps: float) -> bool:
    """Per-row count of entries above ``eps`` stays at or below ``(1 - mu) / eps``."""
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    e_matrix = np.asarray(e_matrix, dtype=np.float64)
    if e_matrix.size == 0:
        return True
    counts = np.count_nonzero(e_matrix > eps, axis=1)
    return bool(counts.max() <= (1.0 - mu) / eps)


# ---------------------------------------------------------------------------
# Verification report


def _exact_estimate(A: CombinationMatrix, omega: ObservableSet) -> np.ndarray:
    r0 = r0_closed_form_symmetric(A.matrix, A.mu)
    r1 = r1_from_r0(A.matrix, r0)
    obs = omega.indices
    return estimate_a_obs(r0[np.ix_(obs, obs)], r1[np.ix_(obs, obs)])


def _instance(
    n: int, policy: PolicyFn, seed: int, xi: float = 0.2
) -> tuple[InteractionGraph, CombinationMatrix, ObservableSet]:
    p = 2.0 * math.log(n) / n
    graph = generate(GraphModel(GraphKind.ERDOS_RENYI_SYMMETRIC, n, p, seed=split_seed(seed, 0)))
    omega = select_observable(n, xi, SelectionMode.RANDOM_SUBSET, seed=split_seed(seed, 1))
    return graph, policy(graph), omega


def _check(name: str, configuration: dict, observed, bound, passed: bool) -> dict:
    return {
        "name": name,
        "configuration": configuration,
        "observed": observed,
        "bound": bound,
        "passed": bool(passed),
    }


_PROFILES = {
    "full": dict(
        tail_trials=10_000,
        sum_var_samples=100_000,
        audit_instances=100,
        consistency_instances=20,
        lyapunov_instances=10,
        class_trials=50,
        equivariance_graphs=20,
        equivariance_perms=50,
        variance_runs=1_000,
        trend_trials=50,
    ),
    "quick": dict(
        tail_trials=1_500,
        sum_var_samples=20_000,
        audit_instances=20,
        consistency_instances=5,
        lyapunov_instances=3,
        class_trials=10,
        equivariance_graphs=5,
        equivariance_perms=10,
        variance_runs=150,
        trend_trials=10,
    ),
}

MU_DEFAULT = 0.1
LAM_DEFAULT = 0.5


def run_verification(seed: int = 0, profile: str = "full") -> dict:
    """Evaluate every analytic claim and return a JSON-ready report."""
    if profile not in _PROFILES:
        raise ValueError(f"unknown profile {profile!r}")
    cfg = _PROFILES[profile]
    checks: list[dict] = []
    mu = MU_DEFAULT
    policies: dict[str, PolicyFn] = {
        "laplacian": make_policy("laplacian", mu, lam=LAM_DEFAULT),
        "metropolis": make_policy("metropolis", mu),
    }

    # conditional tail of the maximal degree
    for salt, n in ((1, 100), (2, 400)):
        p = 2.0 * math.log(n) / n
        model = GraphModel(GraphKind.ERDOS_RENYI_SYMMETRIC, n, p)
        empirical, bound = max_degree_tail(model, cfg["tail_trials"], split_seed(seed, salt))
        checks.append(
            _check(
                f"max_degree_tail_N{n}",
                {"n_agents": n, "p": p, "trials": cfg["tail_trials"]},
                empirical,
                bound,
                empirical <= bound,
            )
        )

    # binomial inverse moments on the full grid
    worst = 0.0
    for n in (10, 50, 200):
        for p in (0.05, 0.1, 0.5):
            for m in (1, 2):
                exact, bound = binomial_inverse_moment(n, p, m)
                worst = max(worst, exact / bound)
    checks.append(
        _check(
            "binomial_inverse_moment_grid",
            {"n": [10, 50, 200], "p": [0.05, 0.1, 0.5], "m": [1, 2]},
            worst,
            1.0,
            worst <= 1.0,
        )
    )

    # variance identity for weighted sums against direct Monte Carlo
    rng = make_rng(split_seed(seed, 3))
    runs = cfg["sum_var_samples"]
    u = rng.random((runs, 6))
    z = 0.7 + rng.random((runs, 6)) - 0.5
    mc_var = float(np.var(np.sum(u * z, axis=1), ddof=1))
    approx = weighted_sum_variance(u, 0.7, 1.0 / 12.0)
    rel = abs(approx / mc_var - 1.0)
    checks.append(
        _check(
            "weighted_sum_variance_mc",
            {"samples": runs, "length": 6},
            rel,
            0.05,
            rel <= 0.05,
        )
    )

    # error-matrix concentration and exceedance audits
    min_entry = math.inf
    max_row_excess = -math.inf
    exceed_ok = True
    consistency_worst = 0.0
    for pol_idx, (pol_name, policy) in enumerate(sorted(policies.items())):
        for n in (20, 50, 100, 200):
            for i in range(cfg["audit_instances"]):
                graph, A, omega = _instance(n, policy, split_seed(seed, 4, pol_idx, n, i))
                e_mat = error_closed_form(A.matrix, omega)
                min_entry = min(min_entry, float(e_mat.min()))
                max_row_excess = max(
                    max_row_excess, float(e_mat.sum(axis=1).max()) - (1.0 - mu)
                )
                for eps in (0.01, 0.1):
                    exceed_ok &= exceedance_count_audit(e_mat, mu, eps)
                if i < cfg["consistency_instances"] and n <= 100:
                    obs = omega.indices
                    a_hat = _exact_estimate(A, omega)
                    gap = a_hat - A.matrix[np.ix_(obs, obs)] - e_mat
                    consistency_worst = max(consistency_worst, float(np.max(np.abs(gap))))
    checks.append(
        _check(
            "error_nonnegativity",
            {"instances_per_cell": cfg["audit_instances"]},
            min_entry,
            -ENTRY_TOL,
            min_entry >= -ENTRY_TOL,
        )
    )
    checks.append(
        _check(
            "error_row_sum_concentration",
            {"instances_per_cell": cfg["audit_instances"]},
            max_row_excess,
            ENTRY_TOL,
            max_row_excess <= ENTRY_TOL,
        )
    )
    checks.append(
        _check(
            "error_exceedance_counts",
            {"eps": [0.01, 0.1]},
            int(exceed_ok),
            1,
            exceed_ok,
        )
    )
    checks.append(
        _check(
            "estimator_closed_form_consistency",
            {"instances_per_cell": cfg["consistency_instances"]},
            consistency_worst,
            1e-8,
            consistency_worst <= 1e-8,
        )
    )

    # Lyapunov iteration against the symmetric closed form
    lyap_worst = 0.0
    for pol_idx, (pol_name, policy) in enumerate(sorted(policies.items())):
        for n in (20, 50, 100):
            for i in range(cfg["lyapunov_instances"]):
                _, A, _ = _instance(n, policy, split_seed(seed, 5, pol_idx, n, i))
                gap = r0_lyapunov(A.matrix, mu) - r0_closed_form_symmetric(A.matrix, mu)
                lyap_worst = max(lyap_worst, float(np.max(np.abs(gap))))
    checks.append(
        _check(
            "lyapunov_cross_check",
            {"instances_per_cell": cfg["lyapunov_instances"]},
            lyap_worst,
            1e-9,
            lyap_worst <= 1e-9,
        )
    )

    # scaled nonzero entries stay above the policy threshold
    n = 200
    p = 2.0 * math.log(n) / n
    model = GraphModel(GraphKind.ERDOS_RENYI_SYMMETRIC, n, p)
    for salt, pol_name in ((6, "metropolis"), (7, "laplacian")):
        tau = default_tau(pol_name, mu, LAM_DEFAULT)
        report = check_class_tau(
            policies[pol_name], model, tau, cfg["class_trials"], split_seed(seed, salt)
        )
        checks.append(
            _check(
                f"class_tau_{pol_name}",
                {"n_agents": n, "tau": tau, "trials": cfg["class_trials"]},
                report.freq_tau,
                0.95,
                report.freq_tau >= 0.95 and report.p1_holds and report.p2_holds,
            )
        )

    # equivariance of the standard rules; violation by the counterexample
    failures = 0
    total = 0
    for g_idx in range(cfg["equivariance_graphs"]):
        graph = generate(
            GraphModel(GraphKind.ERDOS_RENYI_SYMMETRIC, 30, 0.3, seed=split_seed(seed, 8, g_idx))
        )
        perm_rng = make_rng(split_seed(seed, 9, g_idx))
        for _ in range(cfg["equivariance_perms"]):
            perm = perm_rng.permutation(30)
            for policy in policies.values():
                total += 1
                failures += 0 if check_equivariance(policy, graph, perm) else 1
    checks.append(
        _check(
            "renumbering_equivariance",
            {"graphs": cfg["equivariance_graphs"], "perms": cfg["equivariance_perms"]},
            failures,
            0,
            failures == 0,
        )
    )
    chain = _graph_from_adjacency(
        np.array([[1, 1, 0], [1, 1, 1], [0, 1, 1]], dtype=np.int8), p=0.5
    )
    violates = not check_equivariance(
        lambda g: counterexample_policy(g, mu, 0.01), chain, [1, 0, 2]
    )
    checks.append(
        _check("counterexample_breaks_equivariance", {"perm": [1, 0, 2]}, int(violates), 1, violates)
    )

    # independence-approximation variance against Monte Carlo
    ratios = []
    idx = 0
    for pol_name in ("laplacian", "metropolis"):
        for xi in (0.2, 0.5):
            for n in (50, 100, 200):
                p = 2.0 * math.log(n) / n
                model = GraphModel(GraphKind.ERDOS_RENYI_SYMMETRIC, n, p)
                rep = approx_error_variance(
                    model,
                    policies[pol_name],
                    xi,
                    cfg["variance_runs"],
                    split_seed(seed, 10, idx),
                )
                ratios.append(rep.ratio)
                idx += 1
    checks.append(
        _check(
            "variance_ratio_min",
            {"runs": cfg["variance_runs"]},
            float(min(ratios)),
            0.2,
            min(ratios) >= 0.2,
        )
    )
    checks.append(
        _check(
            "variance_ratio_max",
            {"runs": cfg["variance_runs"]},
            float(max(ratios)),
            5.0,
            max(ratios) <= 5.0,
        )
    )

    # vanishing-rate ratio trend across network sizes
    tau = default_tau("metropolis", mu)
    eps = tau / 2.0
    medians = []
    for n_idx, n in enumerate((100, 200, 400)):
        p = 2.0 * math.log(n) / n
        vals = []
        for t in range(cfg["trend_trials"]):
            policy = policies["metropolis"]
            graph, A, omega = _instance(n, policy, split_seed(seed, 11, n_idx, t))
            a_hat = _exact_estimate(A, omega)
            obs = omega.indices
            diag = diagnostics(
                a_hat,
                np.asarray(graph.adjacency)[np.ix_(obs, obs)],
                n * p,
                np.array([eps, tau]),
            )
            vals.append(scaled_fraction_ratio(diag, eps, p))
        medians.append(float(np.median(vals)))
    trend_ok = all(medians[i] >= medians[i + 1] for i in range(len(medians) - 1))
    checks.append(
        _check(
            "vanishing_rate_trend",
            {"n_agents": [100, 200, 400], "trials": cfg["trend_trials"], "eps": eps},
            medians,
            None,
            trend_ok,
        )
    )

    return {
        "seed": seed,
        "profile": profile,
        "all_passed": all(c["passed"] for c in checks),
        "checks": checks,
    }
