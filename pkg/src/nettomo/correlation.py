"""Steady-state correlation matrices of the diffusion output.

Two theoretical routes and one empirical route are provided:

* closed form ``mu^2 (I - A^2)^-1`` for symmetric A;
* the fixed-point iteration ``R <- A R A^T + mu^2 I`` (any stable A),
  whose limit solves the discrete-time Lyapunov equation
  ``R - A R A^T = mu^2 I``;
* sample moments of an observed trace after a burn-in.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .policies import CombinationMatrix

A_SYMMETRY_TOL = 1e-10
DEFAULT_LYAPUNOV_TOL = 1e-12


class NonConvergenceError(RuntimeError):
    """Fixed-point iteration failed to converge (unstable or malformed A)."""


class CorrelationSource(Enum):
    CLOSED_FORM_SYMMETRIC = "closed_form_symmetric"
    LYAPUNOV_ITERATION = "lyapunov_iteration"
    EMPIRICAL = "empirical"


@dataclass(frozen=True)
class CorrelationPair:
    """Zero-lag and one-lag correlation matrices from a common source."""

    r0: np.ndarray
    r1: np.ndarray
    source: CorrelationSource
    burn_in: int = 0


def r0_closed_form_symmetric(a_matrix: np.ndarray, mu: float) -> np.ndarray:
    """Zero-lag correlation ``mu^2 (I - A^2)^-1`` for symmetric A.

    Realized as a linear solve against the identity and symmetrized by
    averaging with its transpose.
    """
    a_matrix = np.asarray(a_matrix, dtype=np.float64)
    if np.max(np.abs(a_matrix - a_matrix.T)) > A_SYMMETRY_TOL:
        raise ValueError("closed form requires a symmetric combination matrix")
    n = a_matrix.shape[0]
    r0 = mu * mu * np.linalg.solve(np.eye(n) - a_matrix @ a_matrix, np.eye(n))
    return (r0 + r0.T) / 2.0


def default_lyapunov_max_iters(mu: float, tol: float) -> int:
    # geometric convergence at rate (1 - mu)^2 bounds the iteration count
    return math.ceil(math.log(tol) / (2.0 * math.log(1.0 - mu))) + 100


def r0_lyapunov(
    a_matrix: np.ndarray,
    mu: float,
    tol: float = DEFAULT_LYAPUNOV_TOL,
    max_iters: int | None = None,
) -> np.ndarray:
    """Fixed point of ``R <- A R A^T + mu^2 I`` started from ``mu^2 I``.

    Stops when successive iterates differ by less than ``tol`` in the
    max-absolute-entry norm. Works for asymmetric A with spectral radius
    below one.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    a_matrix = np.asarray(a_matrix, dtype=np.float64)
    n = a_matrix.shape[0]
    if max_iters is None:
        max_iters = default_lyapunov_max_iters(mu, tol)
    base = mu * mu * np.eye(n)
    r = base.copy()
    for _ in range(max_iters):
        r_next = a_matrix @ r @ a_matrix.T + base
        if np.max(np.abs(r_next - r)) < tol:
            return r_next
        r = r_next
    raise NonConvergenceError(
        f"Lyapunov iteration did not reach tol={tol} within {max_iters} iterations"
    )


def r1_from_r0(a_matrix: np.ndarray, r0: np.ndarray) -> np.ndarray:
    """One-lag correlation ``A R0``."""
    a_matrix = np.asarray(a_matrix, dtype=np.float64)
    r0 = np.asarray(r0, dtype=np.float64)
    if a_matrix.shape != r0.shape:
        raise ValueError("A and R0 shapes differ")
    return a_matrix @ r0


def default_burn_in(mu: float) -> int:
    """Samples discarded before the trace is treated as steady-state.

    ``ceil(20 / mu)`` leaves a transient factor of about e^-20.
    """
    return math.ceil(20.0 / mu)


def _post_burn_in(trace_k: np.ndarray, burn_in: int, min_cols: int) -> np.ndarray:
    trace_k = np.asarray(trace_k, dtype=np.float64)
    if burn_in < 0:
        raise ValueError("burn_in must be nonnegative")
    y = trace_k[:, burn_in:]
    if y.shape[1] < min_cols:
        raise ValueError(
            f"too few samples after burn-in: {y.shape[1]} columns, need >= {min_cols}"
        )
    return y


def empirical_r0(trace_k: np.ndarray, burn_in: int) -> np.ndarray:
    """Sample zero-lag correlation ``Y Y^T / m`` of the post-burn-in block."""
    y = _post_burn_in(trace_k, burn_in, 2)
    return y @ y.T / y.shape[1]


def empirical_r1(trace_k: np.ndarray, burn_in: int) -> np.ndarray:
    """Sample one-lag correlation over consecutive post-burn-in pairs.

    Normalized by the number of pairs, ``m - 1``.
    """
    y = _post_burn_in(trace_k, burn_in, 2)
    return y[:, 1:] @ y[:, :-1].T / (y.shape[1] - 1)


def exact_pair(A: CombinationMatrix, *, tol: float = DEFAULT_LYAPUNOV_TOL) -> CorrelationPair:
    """Steady-state pair via the closed form when A is symmetric, else the iteration."""
    mat = A.matrix
    if np.max(np.abs(mat - mat.T)) <= A_SYMMETRY_TOL:
        r0 = r0_closed_form_symmetric(mat, A.mu)
        source = CorrelationSource.CLOSED_FORM_SYMMETRIC
    else:
        r0 = r0_lyapunov(mat, A.mu, tol=tol)
        source = CorrelationSource.LYAPUNOV_ITERATION
    return CorrelationPair(r0=r0, r1=r1_from_r0(mat, r0), source=source)


def empirical_pair(trace_k: np.ndarray, mu: float, burn_in: int | None = None) -> CorrelationPair:
    if burn_in is None:
        burn_in = default_burn_in(mu)
    return CorrelationPair(
        r0=empirical_r0(trace_k, burn_in),
        r1=empirical_r1(trace_k, burn_in),
        source=CorrelationSource.EMPIRICAL,
        burn_in=burn_in,
    )


def write_matrix_csv(matrix: np.ndarray, path: str | Path, header_comment: str | None = None) -> None:
    """Row-major CSV with header ``row,col,value`` (1-based labels)."""
    matrix = np.asarray(matrix)
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["row", "col", "value"])
        for i in range(matrix.shape[0]):
            for j in range(matrix.shape[1]):
                writer.writerow([i + 1, j + 1, repr(float(matrix[i, j]))])
