"""Partial-observation estimation of the combination matrix.

The external observer sees the output streams of an observable subset of
agents and forms the plug-in estimate

    A_hat_obs = R1_obs (R0_obs)^-1

from the observable blocks of the correlation matrices. For symmetric
combination matrices the gap to the true observable block has the closed
form

    E = A[obs, hid] (I - B[hid, hid])^-1 B[hid, obs],    B = A^2,

which is entrywise nonnegative with row sums at most ``1 - mu``. The
module also builds the conditional empirical distributions of the scaled
estimated entries given interacting / non-interacting pairs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .rng import make_rng

A_SYMMETRY_TOL = 1e-10


class SelectionMode(Enum):
    RANDOM_SUBSET = "random"
    FIRST_K = "first_k"


@dataclass(frozen=True)
class ObservableSet:
    """Sorted 0-based indices of the monitored agents and the target fraction."""

    indices: np.ndarray
    xi: float

    def __post_init__(self) -> None:
        idx = self.indices
        if idx.size < 2:
            raise ValueError("observable set needs at least 2 agents")
        if np.any(np.diff(idx) <= 0):
            raise ValueError("observable indices must be sorted and distinct")

    @property
    def size(self) -> int:
        return int(self.indices.size)

    def complement(self, n_agents: int) -> np.ndarray:
        mask = np.ones(n_agents, dtype=bool)
        mask[self.indices] = False
        return np.nonzero(mask)[0]


def subset_size(n_agents: int, xi: float) -> int:
    """K = round(xi * N), with halves rounded up, floored at 2."""
    if not 0.0 < xi < 1.0:
        raise ValueError(f"observable fraction must lie in (0, 1), got {xi}")
    k = max(int(np.floor(xi * n_agents + 0.5)), 2)
    if k > n_agents:
        raise ValueError(f"K={k} exceeds N={n_agents}")
    return k


def select_observable(
    n_agents: int, xi: float, mode: SelectionMode = SelectionMode.RANDOM_SUBSET, seed: int = 0
) -> ObservableSet:
    """Draw the observable set; a uniform K-subset (seeded) or the first K agents."""
    k = subset_size(n_agents, xi)
    if mode is SelectionMode.FIRST_K:
        idx = np.arange(k, dtype=np.int64)
    else:
        idx = np.sort(make_rng(seed).choice(n_agents, size=k, replace=False)).astype(np.int64)
    idx.setflags(write=False)
    return ObservableSet(indices=idx, xi=xi)


def estimate_a_obs(r0_obs: np.ndarray, r1_obs: np.ndarray, ridge: float = 0.0) -> np.ndarray:
    """Plug-in estimate ``R1_obs (R0_obs + ridge I)^-1`` via a linear solve."""
    r0_obs = np.asarray(r0_obs, dtype=np.float64)
    r1_obs = np.asarray(r1_obs, dtype=np.float64)
    k = r0_obs.shape[0]
    if k < 2:
        raise ValueError("estimation needs at least 2 observed agents")
    if r0_obs.shape != (k, k) or r1_obs.shape != (k, k):
        raise ValueError("correlation blocks must be square and conforming")
    if ridge < 0.0:
        raise ValueError("ridge must be nonnegative")
    r0s = (r0_obs + r0_obs.T) / 2.0 + ridge * np.eye(k)
    if np.linalg.cond(r0s) > 1e12:
        raise np.linalg.LinAlgError(
            "observed zero-lag correlation is numerically singular; "
            "collect more samples or set ridge > 0"
        )
    # A_hat = R1 R0^-1  <=>  R0^T A_hat^T = R1^T
    return np.linalg.solve(r0s, r1_obs.T).T


def _check_symmetric(a_matrix: np.ndarray) -> np.ndarray:
    a_matrix = np.asarray(a_matrix, dtype=np.float64)
    if np.max(np.abs(a_matrix - a_matrix.T)) > A_SYMMETRY_TOL:
        raise ValueError("the closed-form error matrix is defined for symmetric A only")
    return a_matrix


def f_matrix(a_matrix: np.ndarray, omega: ObservableSet) -> np.ndarray:
    """Auxiliary matrix ``(I - B[hid, hid])^-1 B[hid, obs]`` with ``B = A^2``.

    Entrywise nonnegative; every row sums to at most 1.
    """
    a_matrix = _check_symmetric(a_matrix)
    n = a_matrix.shape[0]
    obs = omega.indices
    hid = omega.complement(n)
    if hid.size == 0:
        return np.zeros((0, obs.size))
    b = a_matrix @ a_matrix
    z = np.eye(hid.size) - b[np.ix_(hid, hid)]
    return np.linalg.solve(z, b[np.ix_(hid, obs)])


def error_closed_form(a_matrix: np.ndarray, omega: ObservableSet) -> np.ndarray:
    """Partial-observation error ``A[obs, hid] (I - B[hid, hid])^-1 B[hid, obs]``."""
    a_matrix = _check_symmetric(a_matrix)
    n = a_matrix.shape[0]
    obs = omega.indices
    hid = omega.complement(n)
    if hid.size == 0:
        return np.zeros((obs.size, obs.size))
    return a_matrix[np.ix_(obs, hid)] @ f_matrix(a_matrix, omega)


@dataclass(frozen=True)
class TomographyResult:
    """Estimated observable block plus simulation-only ground truth.

    ``scale`` is the reporting factor ``N * p``; classification downstream
    is invariant to it.
    """

    a_hat_obs: np.ndarray
    omega: ObservableSet
    scale: float
    a_true_obs: np.ndarray | None = None
    error: np.ndarray | None = None
    g_obs: np.ndarray | None = None

    @property
    def k(self) -> int:
        return self.a_hat_obs.shape[0]


@dataclass(frozen=True)
class DistributionDiagnostics:
    """Conditional empirical distributions of the scaled estimated entries.

    ``f0[i]`` is the fraction of non-interacting off-diagonal pairs whose
    scaled entry stays at or below ``alpha_grid[i]``; ``f1_bar[i]`` is the
    fraction of interacting pairs staying above it. Both default to 1/2
    when the conditioning count is zero.
    """

    n0: int
    n1: int
    alpha_grid: np.ndarray
    f0: np.ndarray
    f1_bar: np.ndarray

    def _at(self, values: np.ndarray, alpha: float) -> float:
        hit = np.nonzero(np.isclose(self.alpha_grid, alpha, rtol=0.0, atol=1e-12))[0]
        if hit.size == 0:
            raise ValueError(f"alpha={alpha} is not a grid point")
        return float(values[hit[0]])

    def f0_at(self, alpha: float) -> float:
        return self._at(self.f0, alpha)

    def f1_bar_at(self, alpha: float) -> float:
        return self._at(self.f1_bar, alpha)


def diagnostics(
    a_hat_obs: np.ndarray, g_obs: np.ndarray, scale: float, alpha_grid: np.ndarray
) -> DistributionDiagnostics:
    """Count off-diagonal pairs below each grid level, split by interaction."""
    a_hat_obs = np.asarray(a_hat_obs, dtype=np.float64)
    g_obs = np.asarray(g_obs)
    if a_hat_obs.shape != g_obs.shape:
        raise ValueError("estimate and interaction block shapes differ")
    grid = np.asarray(alpha_grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("alpha_grid must be strictly increasing and positive")
    k = a_hat_obs.shape[0]
    off = ~np.eye(k, dtype=bool)
    scaled = scale * a_hat_obs
    vals0 = np.sort(scaled[off & (g_obs == 0)])
    vals1 = np.sort(scaled[off & (g_obs == 1)])
    n0, n1 = vals0.size, vals1.size
    if n0:
        f0 = np.searchsorted(vals0, grid, side="right") / n0
    else:
        f0 = np.full(grid.size, 0.5)
    if n1:
        f1_bar = 1.0 - np.searchsorted(vals1, grid, side="right") / n1
    else:
        f1_bar = np.full(grid.size, 0.5)
    return DistributionDiagnostics(n0=n0, n1=n1, alpha_grid=grid, f0=f0, f1_bar=f1_bar)


def scaled_fraction_ratio(diag: DistributionDiagnostics, epsilon: float, p: float) -> float:
    """The vanishing-rate ratio ``(1 - F0(eps)) / p``."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    return (1.0 - diag.f0_at(epsilon)) / p


def scatter_rows(result: TomographyResult, labels_hat: np.ndarray) -> list[tuple]:
    """Vectorized off-diagonal entries, zero pairs first.

    Pairs are taken in column-major order and stably reordered so that
    non-interacting pairs precede interacting ones, mirroring the ordering
    used for the scatter panels. Indices are 1-based positions within the
    observed block.
    """
    if result.a_true_obs is None or result.g_obs is None:
        raise ValueError("scatter export needs simulation ground truth")
    k = result.k
    off = ~np.eye(k, dtype=bool)
    cols_first = off.flatten(order="F")
    ii, jj = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
    i_flat = ii.flatten(order="F")[cols_first]
    j_flat = jj.flatten(order="F")[cols_first]
    g_flat = result.g_obs.flatten(order="F")[cols_first]
    true_flat = result.scale * result.a_true_obs.flatten(order="F")[cols_first]
    hat_flat = result.scale * result.a_hat_obs.flatten(order="F")[cols_first]
    lab_flat = np.asarray(labels_hat).flatten(order="F")[cols_first]
    order = np.argsort(g_flat, kind="stable")
    rows = []
    for pos, q in enumerate(order, start=1):
        rows.append(
            (
                pos,
                int(i_flat[q]) + 1,
                int(j_flat[q]) + 1,
                int(g_flat[q]),
                float(true_flat[q]),
                float(hat_flat[q]),
                int(lab_flat[q]),
            )
        )
    return rows


def write_scatter_csv(
    result: TomographyResult,
    labels_hat: np.ndarray,
    path: str | Path,
    header_comment: str | None = None,
) -> None:
    """Plot-ready CSV: ``pair,i,j,g_true,a_true_scaled,a_hat_scaled,label_hat``."""
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["pair", "i", "j", "g_true", "a_true_scaled", "a_hat_scaled", "label_hat"])
        for row in scatter_rows(result, labels_hat):
            writer.writerow(
                [row[0], row[1], row[2], row[3], repr(row[4]), repr(row[5]), row[6]]
            )
