"""Streaming combine-then-adapt simulation.

Each step mixes neighbor states through the combination matrix and moves
toward the fresh observation with step-size mu:

    y(t) = A y(t-1) + mu * x(t),    y(0) = 0.

Column ``t-1`` of the stored trace holds y(t); time is 1-based in file
exports and documentation, 0-based in array storage.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .policies import CombinationMatrix
from .rng import make_rng


class InputKind(Enum):
    STANDARD_NORMAL = "standard_normal"
    RADEMACHER = "rademacher"


@dataclass(frozen=True)
class DiffusionTrace:
    outputs: np.ndarray  # (N, n_samples), column t-1 holds y(t)
    n_samples: int
    mu: float
    input_kind: InputKind

    @property
    def n_agents(self) -> int:
        return self.outputs.shape[0]


def draw_inputs(n_agents: int, n_samples: int, kind: InputKind, seed: int) -> np.ndarray:
    """Zero-mean unit-variance input stream, shape ``(n_agents, n_samples)``."""
    rng = make_rng(seed)
    if kind is InputKind.STANDARD_NORMAL:
        return rng.standard_normal((n_agents, n_samples))
    return rng.integers(0, 2, size=(n_agents, n_samples)).astype(np.float64) * 2.0 - 1.0


def run_recursion(a_matrix: np.ndarray, mu: float, inputs: np.ndarray) -> np.ndarray:
    """Iterate the state recursion over an explicit input matrix."""
    n, steps = inputs.shape
    out = np.empty((n, steps))
    y = np.zeros(n)
    for t in range(steps):
        y = a_matrix @ y + mu * inputs[:, t]
        out[:, t] = y
    return out


def simulate(A: CombinationMatrix, n_samples: int, input_kind: InputKind, seed: int) -> DiffusionTrace:
    """Run the recursion for ``n_samples`` steps; deterministic given ``seed``."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    x = draw_inputs(A.n_agents, n_samples, input_kind, seed)
    outputs = run_recursion(A.matrix, A.mu, x)
    outputs.setflags(write=False)
    return DiffusionTrace(outputs=outputs, n_samples=n_samples, mu=A.mu, input_kind=input_kind)


def restrict(trace: DiffusionTrace, omega: Sequence[int]) -> np.ndarray:
    """Rows of the trace at the observable indices, time order preserved."""
    idx = np.asarray(omega, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("omega must be non-empty")
    if np.any(idx < 0) or np.any(idx >= trace.n_agents):
        raise IndexError("omega indices out of range")
    if np.any(np.diff(idx) <= 0):
        raise ValueError("omega must be sorted and distinct")
    return trace.outputs[idx, :]


def write_trace_csv(trace: DiffusionTrace, path: str | Path, header_comment: str | None = None) -> None:
    """Long-format CSV with header ``t,agent,y`` (both labels 1-based)."""
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["t", "agent", "y"])
        for t in range(trace.n_samples):
            for i in range(trace.n_agents):
                writer.writerow([t + 1, i + 1, repr(float(trace.outputs[i, t]))])
