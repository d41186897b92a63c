"""Random interaction graphs: generation, degree queries, connectivity, renumbering.

An interaction graph is a binary matrix with unit diagonal: entry (i, j)
equal to one means agent j's state enters agent i's combination step.
Two sampling models are supported, an undirected Erdos-Renyi graph (the
upper triangle is i.i.d. Bernoulli and mirrored) and a directed binomial
graph (every off-diagonal slot is i.i.d. Bernoulli).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .rng import make_rng


class GraphKind(Enum):
    ERDOS_RENYI_SYMMETRIC = "erdos_renyi"
    BINOMIAL_DIRECTED = "binomial_directed"


@dataclass(frozen=True)
class GraphModel:
    """Sampling recipe for an interaction graph."""

    kind: GraphKind
    n_agents: int
    p: float
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_agents < 1:
            raise ValueError(f"n_agents must be >= 1, got {self.n_agents}")
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"interaction probability must lie in (0, 1], got {self.p}")


@dataclass(frozen=True)
class InteractionGraph:
    """Binary interaction profile with unit diagonal.

    ``c`` is the connectivity offset ``N*p - ln(N)``, stored for reporting
    only and never used to re-derive ``p``. Agent indices are 0-based in
    the API; file exports use 1-based labels.
    """

    n_agents: int
    adjacency: np.ndarray
    symmetric: bool
    p: float
    c: float

    def __post_init__(self) -> None:
        adj = self.adjacency
        if adj.shape != (self.n_agents, self.n_agents):
            raise ValueError("adjacency shape does not match n_agents")
        if not np.all(np.diag(adj) == 1):
            raise ValueError("interaction graphs must have a unit diagonal")


def connectivity_probability(n_agents: float, c: float) -> float:
    """Interaction probability ``(ln N + c) / N`` of the connectivity scaling law.

    ``n_agents`` may be any real value >= 2; the result is clamped to (0, 1].
    """
    if n_agents < 2:
        raise ValueError("scaling law needs n_agents >= 2")
    p = (math.log(n_agents) + c) / n_agents
    if p <= 0.0:
        raise ValueError(f"offset c={c} yields a non-positive probability at N={n_agents}")
    return min(p, 1.0)


def _graph_from_adjacency(adj: np.ndarray, p: float) -> InteractionGraph:
    n = adj.shape[0]
    adj = np.array(adj, dtype=np.int8)
    adj.setflags(write=False)
    symmetric = bool(np.array_equal(adj, adj.T))
    return InteractionGraph(
        n_agents=n, adjacency=adj, symmetric=symmetric, p=p, c=n * p - math.log(n)
    )


def graph_from_adjacency(adj: np.ndarray, p: float = 0.5) -> InteractionGraph:
    """Wrap an explicit 0/1 adjacency matrix (``p`` is nominal metadata)."""
    adj = np.asarray(adj)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise ValueError("adjacency must be square")
    if not np.all((adj == 0) | (adj == 1)):
        raise ValueError("adjacency entries must be 0 or 1")
    return _graph_from_adjacency(adj, p)


def _sample_adjacency(kind: GraphKind, n: int, p: float, rng: np.random.Generator) -> np.ndarray:
    if kind is GraphKind.ERDOS_RENYI_SYMMETRIC:
        adj = np.zeros((n, n), dtype=np.int8)
        iu = np.triu_indices(n, k=1)
        adj[iu] = rng.random(iu[0].size) < p
        adj = adj + adj.T
    else:
        adj = (rng.random((n, n)) < p).astype(np.int8)
    np.fill_diagonal(adj, 1)
    return adj


def generate(
    model: GraphModel, *, require_connected: bool = False, max_attempts: int = 100
) -> InteractionGraph:
    """Sample an interaction graph; deterministic given ``model.seed``.

    With ``require_connected`` the draw is repeated (same stream) until the
    graph is connected, bounded by ``max_attempts``. Default sampling is
    unconditional.
    """
    rng = make_rng(model.seed)
    attempts = max_attempts if require_connected else 1
    for _ in range(attempts):
        adj = _sample_adjacency(model.kind, model.n_agents, model.p, rng)
        graph = _graph_from_adjacency(adj, model.p)
        if not require_connected or is_connected(graph):
            return graph
    raise RuntimeError(
        f"no connected graph found in {max_attempts} attempts "
        f"(N={model.n_agents}, p={model.p})"
    )


def degree(graph: InteractionGraph, i: int) -> int:
    """Number of nonzero entries in row ``i`` (self included, so >= 1)."""
    if not 0 <= i < graph.n_agents:
        raise IndexError(f"agent index {i} out of range [0, {graph.n_agents})")
    return int(np.count_nonzero(graph.adjacency[i]))


def degrees(graph: InteractionGraph) -> np.ndarray:
    return np.count_nonzero(graph.adjacency, axis=1)


def max_degree(graph: InteractionGraph) -> int:
    return int(degrees(graph).max())


def is_connected(graph: InteractionGraph) -> bool:
    """Breadth-first reachability of every agent from agent 0.

    Directed graphs are symmetrized first (undirected interpretation).
    """
    n = graph.n_agents
    adj = graph.adjacency
    if not graph.symmetric:
        adj = adj | adj.T
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    frontier = np.zeros(n, dtype=bool)
    frontier[0] = True
    while frontier.any():
        reached = (adj[frontier].any(axis=0)) & ~seen
        seen |= reached
        frontier = reached
    return bool(seen.all())


def _check_permutation(perm: Sequence[int], n: int) -> np.ndarray:
    arr = np.asarray(perm, dtype=np.int64)
    if arr.shape != (n,) or not np.array_equal(np.sort(arr), np.arange(n)):
        raise ValueError("perm must be a bijection on range(n_agents)")
    return arr


def permute(graph: InteractionGraph, perm: Sequence[int]) -> InteractionGraph:
    """Renumber agents: entry (perm[i], perm[j]) of the output equals entry (i, j)."""
    arr = _check_permutation(perm, graph.n_agents)
    out = np.empty_like(graph.adjacency)
    out[np.ix_(arr, arr)] = graph.adjacency
    return _graph_from_adjacency(out, graph.p)


def write_edge_list(graph: InteractionGraph, path: str | Path, header_comment: str | None = None) -> None:
    """CSV edge list with header ``i,j`` (1-based, diagonal implied).

    Symmetric graphs get upper-triangle pairs only; directed graphs get all
    ordered pairs with a nonzero entry.
    """
    adj = graph.adjacency
    if graph.symmetric:
        rows, cols = np.nonzero(np.triu(adj, k=1))
    else:
        off = adj.copy()
        np.fill_diagonal(off, 0)
        rows, cols = np.nonzero(off)
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["i", "j"])
        for i, j in zip(rows, cols):
            writer.writerow([int(i) + 1, int(j) + 1])
