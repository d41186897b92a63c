"""Combination policies: map an interaction graph to a scaled weight matrix.

Every policy returns a nonnegative matrix A whose rows sum to ``1 - mu``
(so A/(1-mu) is right-stochastic) and whose support equals the support of
the generating graph. The module also provides checks for the two policy
regularity properties used downstream: a per-edge weight bound
``a_ij <= kappa / d_i`` and equivariance under agent renumbering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .graphgen import GraphModel, InteractionGraph, degrees, generate, permute
from .rng import make_rng, split_seed

SYMMETRY_TOL = 1e-12

PolicyFn = Callable[[InteractionGraph], "CombinationMatrix"]


@dataclass(frozen=True)
class CombinationMatrix:
    """Scaled combination weights: nonnegative, row sums equal to ``1 - mu``."""

    matrix: np.ndarray
    mu: float
    policy: str
    lam: float | None = None
    epsilon: float | None = None

    @property
    def n_agents(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class PolicyClassReport:
    """Monte Carlo summary of the scaled-entry lower bound and regularity checks.

    ``freq_tau`` is the empirical frequency, over edges of sampled graphs,
    of the event ``N * p * a_ij > tau``.
    """

    tau: float
    kappa: float
    freq_tau: float
    p1_holds: bool
    p2_holds: bool


def _check_mu(mu: float) -> None:
    if not 0.0 < mu < 1.0:
        raise ValueError(f"step-size mu must lie in (0, 1), got {mu}")


def _require_symmetric(graph: InteractionGraph, rule: str) -> None:
    if not graph.symmetric:
        raise ValueError(f"the {rule} rule requires a symmetric interaction graph")


def _finish(off: np.ndarray, mu: float, **meta) -> CombinationMatrix:
    # off holds the off-diagonal weights with a zero diagonal; the diagonal
    # completes each row sum to 1 - mu.
    np.fill_diagonal(off, (1.0 - mu) - off.sum(axis=1))
    off.setflags(write=False)
    return CombinationMatrix(matrix=off, mu=mu, **meta)


def laplacian(graph: InteractionGraph, mu: float, lam: float) -> CombinationMatrix:
    """Constant off-diagonal weights ``(1-mu) * lam / d_max`` on edges."""
    _check_mu(mu)
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"lam must lie in (0, 1], got {lam}")
    _require_symmetric(graph, "Laplacian")
    d_max = int(degrees(graph).max())
    off = graph.adjacency * ((1.0 - mu) * lam / d_max)
    np.fill_diagonal(off, 0.0)
    return _finish(off, mu, policy="laplacian", lam=lam)


def metropolis(graph: InteractionGraph, mu: float) -> CombinationMatrix:
    """Off-diagonal weights ``(1-mu) / max(d_i, d_j)`` on edges."""
    _check_mu(mu)
    _require_symmetric(graph, "Metropolis")
    d = degrees(graph)
    off = graph.adjacency * ((1.0 - mu) / np.maximum.outer(d, d))
    np.fill_diagonal(off, 0.0)
    return _finish(off, mu, policy="metropolis")


def uniform_averaging(graph: InteractionGraph, mu: float) -> CombinationMatrix:
    """Row weights ``(1-mu) / d_i`` on the row support; works on directed graphs."""
    _check_mu(mu)
    d = degrees(graph)
    mat = graph.adjacency * ((1.0 - mu) / d[:, None])
    mat.setflags(write=False)
    return CombinationMatrix(matrix=mat, mu=mu, policy="uniform")


def _is_three_agent_path(graph: InteractionGraph) -> bool:
    if graph.n_agents != 3 or not graph.symmetric:
        return False
    return sorted(degrees(graph).tolist()) == [2, 2, 3]


def counterexample_policy(graph: InteractionGraph, mu: float, epsilon: float) -> CombinationMatrix:
    """Metropolis on a 3-agent path, with agent 0's self-weight inflated.

    The extra weight ``(1-mu) * epsilon`` added to entry (0, 0) is removed
    in equal parts from agent 0's other nonzero weights; the remaining
    entries are then adjusted to keep the matrix symmetric with row sums
    ``1 - mu``. Defined only on the 3-agent path family (any numbering).
    """
    _check_mu(mu)
    if not 0.0 <= epsilon < 1.0 / 3.0:
        raise ValueError(f"epsilon must lie in [0, 1/3), got {epsilon}")
    if not _is_three_agent_path(graph):
        raise ValueError("counterexample policy is defined only on the 3-agent path family")
    base = metropolis(graph, mu)
    mat = np.array(base.matrix)
    neighbors = [j for j in range(3) if j != 0 and graph.adjacency[0, j] == 1]
    shift = (1.0 - mu) * epsilon
    mat[0, 0] += shift
    for j in neighbors:
        mat[0, j] -= shift / len(neighbors)
        mat[j, 0] = mat[0, j]
    for j in (1, 2):
        mat[j, j] = (1.0 - mu) - (mat[j].sum() - mat[j, j])
    mat.setflags(write=False)
    return CombinationMatrix(matrix=mat, mu=mu, policy="counterexample", epsilon=epsilon)


def check_weight_bound(A: CombinationMatrix, graph: InteractionGraph) -> tuple[bool, float]:
    """Support match plus the smallest kappa with ``a_ij <= kappa / d_i`` on edges.

    Returns ``(holds, kappa_min)`` where ``kappa_min`` is the maximum of
    ``a_ij * d_i`` over off-diagonal edges (0 when there are none) and
    ``holds`` is true iff ``a_ij`` vanishes wherever ``g_ij`` does.
    """
    mat = A.matrix
    adj = graph.adjacency
    if mat.shape != adj.shape:
        raise ValueError("combination matrix and graph dimensions differ")
    holds = not np.any(mat[adj == 0] != 0.0)
    d = degrees(graph)
    off_edges = (adj == 1) & ~np.eye(graph.n_agents, dtype=bool)
    scaled = mat * d[:, None]
    kappa_min = float(scaled[off_edges].max()) if off_edges.any() else 0.0
    return holds, kappa_min


def check_equivariance(policy: PolicyFn, graph: InteractionGraph, perm: Sequence[int]) -> bool:
    """True iff renumbering commutes with the policy map within 1e-12."""
    renumbered = policy(permute(graph, perm)).matrix
    base = policy(graph).matrix
    arr = np.asarray(perm, dtype=np.int64)
    expected = np.empty_like(base)
    expected[np.ix_(arr, arr)] = base
    return bool(np.max(np.abs(renumbered - expected)) <= SYMMETRY_TOL)


def check_class_tau(
    policy: PolicyFn, model: GraphModel, tau: float, trials: int, seed: int
) -> PolicyClassReport:
    """Monte Carlo estimate of ``P[N * p * a_ij > tau | g_ij = 1]`` over edges.

    Also audits the weight bound on every trial and equivariance under one
    random renumbering per trial.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n, p = model.n_agents, model.p
    edges = 0
    hits = 0
    kappa = 0.0
    p1_holds = True
    p2_holds = True
    for t in range(trials):
        graph = generate(GraphModel(model.kind, n, p, seed=split_seed(seed, t, 0)))
        A = policy(graph)
        off_edges = (graph.adjacency == 1) & ~np.eye(n, dtype=bool)
        edges += int(off_edges.sum())
        hits += int(np.count_nonzero(n * p * A.matrix[off_edges] > tau))
        holds, kappa_t = check_weight_bound(A, graph)
        p1_holds &= holds
        kappa = max(kappa, kappa_t)
        perm = make_rng(split_seed(seed, t, 1)).permutation(n)
        p2_holds &= check_equivariance(policy, graph, perm)
    freq = hits / edges if edges else 1.0
    return PolicyClassReport(tau=tau, kappa=kappa, freq_tau=freq, p1_holds=p1_holds, p2_holds=p2_holds)


def make_policy(name: str, mu: float, *, lam: float = 0.5, epsilon: float = 0.01) -> PolicyFn:
    """Policy constructor by name: laplacian, metropolis, uniform, counterexample."""
    if name == "laplacian":
        return lambda g: laplacian(g, mu, lam)
    if name == "metropolis":
        return lambda g: metropolis(g, mu)
    if name == "uniform":
        return lambda g: uniform_averaging(g, mu)
    if name == "counterexample":
        return lambda g: counterexample_policy(g, mu, epsilon)
    raise ValueError(f"unknown policy {name!r}")


def default_tau(name: str, mu: float, lam: float = 0.5) -> float:
    """Scaled-entry lower-bound threshold associated with each policy."""
    if name == "laplacian":
        return (1.0 - mu) * lam / math.e
    return (1.0 - mu) / math.e
