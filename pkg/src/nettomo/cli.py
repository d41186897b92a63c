"""Configuration-driven experiment harness and command-line entry point.

Subcommands: ``generate`` (graph edge list), ``simulate`` (diffusion
trace), ``tomography`` (single reconstruction), ``experiment`` (Monte
Carlo batch with scatter CSVs and an aggregate JSON), ``sweep``
(experiment repeated along one parameter axis), and ``verify`` (the
analytic-claims report).

Every produced CSV starts with a ``# config_hash=...`` comment line and
every JSON document carries a ``config_hash`` field, so outputs can be
traced back to the exact configuration. All runs are reproducible
bit-for-bit from the master seed: trial t draws its sub-seeds by
counter-based splitting, so earlier trials never change when more are
added.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import dataclasses
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import classify, correlation, diffusion, graphgen, policies, theory, tomography
from .rng import split_seed

_GRAPH_KINDS = {
    "erdos_renyi": graphgen.GraphKind.ERDOS_RENYI_SYMMETRIC,
    "binomial_directed": graphgen.GraphKind.BINOMIAL_DIRECTED,
}
_OMEGA_MODES = {
    "random": tomography.SelectionMode.RANDOM_SUBSET,
    "first_k": tomography.SelectionMode.FIRST_K,
}
_INPUT_KINDS = {
    "normal": diffusion.InputKind.STANDARD_NORMAL,
    "rademacher": diffusion.InputKind.RADEMACHER,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat view of the nested configuration file.

    Defaults reproduce the flagship reconstruction: N=100 agents, a fifth
    of them observable, interaction probability (ln N + c)/N with c=ln N,
    step-size 0.1, Laplacian weights with lam=0.5, exact correlations.
    """

    graph_kind: str = "erdos_renyi"
    n_agents: int = 100
    p: float | None = None
    c: float | str = "ln_n"
    policy: str = "laplacian"
    lam: float = 0.5
    epsilon: float = 0.01
    mu: float = 0.1
    xi: float = 0.2
    omega_mode: str = "random"
    mode: str = "exact"
    n_samples: int = 20_000
    burn_in: int | None = None
    ridge: float | str = 0.0
    threshold: float | None = None
    trials: int = 1
    seed: int = 0
    outputs: str = "out"
    workers: int = 1

    def __post_init__(self) -> None:
        if self.graph_kind not in _GRAPH_KINDS:
            raise ValueError(f"unknown graph kind {self.graph_kind!r}")
        if self.policy not in ("laplacian", "metropolis", "uniform", "counterexample"):
            raise ValueError(f"unknown policy {self.policy!r}")
        if self.omega_mode not in _OMEGA_MODES:
            raise ValueError(f"unknown omega mode {self.omega_mode!r}")
        if self.mode not in ("exact", "empirical"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if isinstance(self.c, str) and self.c != "ln_n":
            raise ValueError("c must be a number or the string 'ln_n'")
        if isinstance(self.ridge, str) and self.ridge != "auto":
            raise ValueError("ridge must be a number or the string 'auto'")

    def resolved_p(self) -> float:
        if self.p is not None:
            return self.p
        c = math.log(self.n_agents) if self.c == "ln_n" else float(self.c)
        return graphgen.connectivity_probability(self.n_agents, c)

    def tau(self) -> float:
        return policies.default_tau(self.policy, self.mu, self.lam)

    def to_dict(self, include_execution: bool = True) -> dict:
        # outputs and workers steer execution only, never results; the
        # config hash and embedded configs leave them out so reruns into
        # different directories stay byte-identical.
        data = {
            "graph": {
                "kind": self.graph_kind,
                "n_agents": self.n_agents,
                "p": self.p,
                "c": self.c,
            },
            "policy": {"name": self.policy, "lam": self.lam, "epsilon": self.epsilon},
            "mu": self.mu,
            "xi": self.xi,
            "omega_mode": self.omega_mode,
            "mode": self.mode,
            "n_samples": self.n_samples,
            "burn_in": self.burn_in,
            "ridge": self.ridge,
            "threshold": self.threshold,
            "trials": self.trials,
            "seed": self.seed,
        }
        if include_execution:
            data["outputs"] = self.outputs
            data["workers"] = self.workers
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known_sections = {"graph", "policy"}
        flat: dict = {}
        for key, value in data.items():
            if key == "graph":
                section = dict(value)
                if "kind" in section:
                    flat["graph_kind"] = section.pop("kind")
                for sub in ("n_agents", "p", "c"):
                    if sub in section:
                        flat[sub] = section.pop(sub)
                if section:
                    raise ValueError(f"unknown graph keys: {sorted(section)}")
            elif key == "policy":
                section = dict(value)
                if "name" in section:
                    flat["policy"] = section.pop("name")
                for sub in ("lam", "epsilon"):
                    if sub in section:
                        flat[sub] = section.pop(sub)
                if section:
                    raise ValueError(f"unknown policy keys: {sorted(section)}")
            elif key in {f.name for f in dataclasses.fields(cls)} - known_sections:
                flat[key] = value
            else:
                raise ValueError(f"unknown configuration key {key!r}")
        return cls(**flat)


def config_hash(config: ExperimentConfig) -> str:
    canonical = json.dumps(config.to_dict(include_execution=False), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


@dataclass
class TrialRecord:
    index: int
    result: tomography.TomographyResult
    g_hat: np.ndarray
    metrics: classify.EdgeMetrics
    f0_at_eps: float
    f1bar_at_tau: float
    ratio_prop1: float
    mean_scaled_abs_error: float


def _alpha_grid(tau: float) -> np.ndarray:
    return np.array([tau / 4.0, tau / 2.0, tau, 2.0 * tau])


def run_trial(config: ExperimentConfig, t: int) -> TrialRecord:
    """Single trial: graph, weights, observation, estimation, recovery, scoring."""
    stage = "setup"
    try:
        p = config.resolved_p()
        n = config.n_agents
        model = graphgen.GraphModel(
            _GRAPH_KINDS[config.graph_kind], n, p, seed=split_seed(config.seed, t, 0)
        )
        stage = "graph generation"
        graph = graphgen.generate(model)
        stage = "combination policy"
        policy = policies.make_policy(
            config.policy, config.mu, lam=config.lam, epsilon=config.epsilon
        )
        A = policy(graph)
        stage = "observable selection"
        omega = tomography.select_observable(
            n, config.xi, _OMEGA_MODES[config.omega_mode], seed=split_seed(config.seed, t, 1)
        )
        obs = omega.indices
        stage = "correlation"
        if config.mode == "exact":
            pair = correlation.exact_pair(A)
            r0_obs = pair.r0[np.ix_(obs, obs)]
            r1_obs = pair.r1[np.ix_(obs, obs)]
            ridge = 0.0
        else:
            trace = diffusion.simulate(
                A,
                config.n_samples,
                diffusion.InputKind.STANDARD_NORMAL,
                seed=split_seed(config.seed, t, 2),
            )
            trace_k = diffusion.restrict(trace, obs)
            burn = config.burn_in
            if burn is None:
                burn = correlation.default_burn_in(config.mu)
            r0_obs = correlation.empirical_r0(trace_k, burn)
            r1_obs = correlation.empirical_r1(trace_k, burn)
            if config.ridge == "auto":
                ridge = 1e-6 * float(np.trace(r0_obs)) / omega.size
            else:
                ridge = float(config.ridge)
        stage = "estimation"
        a_hat = tomography.estimate_a_obs(r0_obs, r1_obs, ridge=ridge)
        a_true = A.matrix[np.ix_(obs, obs)]
        g_obs = np.asarray(graph.adjacency)[np.ix_(obs, obs)]
        result = tomography.TomographyResult(
            a_hat_obs=a_hat,
            omega=omega,
            scale=n * p,
            a_true_obs=a_true,
            error=a_hat - a_true,
            g_obs=g_obs,
        )
        stage = "classification"
        if config.threshold is not None:
            g_hat = classify.threshold_edges(a_hat, config.threshold)
        else:
            g_hat, _ = classify.classify_edges(result)
        metrics = classify.edge_metrics(g_hat, g_obs)
        stage = "diagnostics"
        tau = config.tau()
        diag = tomography.diagnostics(a_hat, g_obs, n * p, _alpha_grid(tau))
        off = ~np.eye(omega.size, dtype=bool)
        return TrialRecord(
            index=t,
            result=result,
            g_hat=g_hat,
            metrics=metrics,
            f0_at_eps=diag.f0_at(tau / 2.0),
            f1bar_at_tau=diag.f1_bar_at(tau),
            ratio_prop1=tomography.scaled_fraction_ratio(diag, tau / 2.0, p),
            mean_scaled_abs_error=float(n * p * np.mean(np.abs(a_hat - a_true)[off])),
        )
    except Exception as exc:
        raise RuntimeError(
            f"trial {t} (master seed {config.seed}) failed at stage '{stage}': {exc}"
        ) from exc


def _run_trials(config: ExperimentConfig) -> list[TrialRecord]:
    if config.workers > 1 and config.trials > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(run_trial, [config] * config.trials, range(config.trials)))
    else:
        records = [run_trial(config, t) for t in range(config.trials)]
    return sorted(records, key=lambda r: r.index)


def _aggregate(config: ExperimentConfig, records: list[TrialRecord]) -> dict:
    tau = config.tau()
    per_trial = [
        {
            "trial": r.index,
            "error_rate": r.metrics.error_rate,
            "false_detections": r.metrics.false_detections,
            "misses": r.metrics.misses,
            "f0_at_eps": r.f0_at_eps,
            "f1bar_at_tau": r.f1bar_at_tau,
            "ratio_prop1": r.ratio_prop1,
            "mean_scaled_abs_error": r.mean_scaled_abs_error,
        }
        for r in records
    ]
    return {
        "config_hash": config_hash(config),
        "config": config.to_dict(include_execution=False),
        "eps": tau / 2.0,
        "tau": tau,
        "mean_error_rate": float(np.mean([r.metrics.error_rate for r in records])),
        "mean_false": float(np.mean([r.metrics.false_detections for r in records])),
        "mean_miss": float(np.mean([r.metrics.misses for r in records])),
        "f0_at_eps": float(np.mean([r.f0_at_eps for r in records])),
        "f1bar_at_tau": float(np.mean([r.f1bar_at_tau for r in records])),
        "ratio_prop1_median": float(np.median([r.ratio_prop1 for r in records])),
        "mean_scaled_error": float(np.mean([r.mean_scaled_abs_error for r in records])),
        "per_trial": per_trial,
    }


def run_experiment(config: ExperimentConfig) -> dict:
    """Run all trials, write per-trial scatter CSVs and the aggregate JSON."""
    out_dir = Path(config.outputs)
    out_dir.mkdir(parents=True, exist_ok=True)
    h = config_hash(config)
    records = _run_trials(config)
    for r in records:
        tomography.write_scatter_csv(
            r.result,
            r.g_hat,
            out_dir / f"trial_{r.index:04d}_scatter.csv",
            header_comment=f"config_hash={h} trial={r.index}",
        )
    aggregate = _aggregate(config, records)
    with open(out_dir / "aggregate.json", "w") as fh:
        json.dump(aggregate, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return aggregate


SWEEP_AXES = ("mu", "xi", "p", "n_agents")


def run_sweep(config: ExperimentConfig, axis: str, values: list[float]) -> list[dict]:
    """Repeat the experiment along one axis; write one summary row per value."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {SWEEP_AXES}")
    if not values:
        raise ValueError("values must be non-empty")
    rows = []
    for value in values:
        if axis == "n_agents":
            cfg = dataclasses.replace(config, n_agents=int(value))
        else:
            cfg = dataclasses.replace(config, **{axis: float(value)})
        agg = _aggregate(cfg, _run_trials(cfg))
        rows.append(
            {
                "axis_value": value,
                "mean_error_rate": agg["mean_error_rate"],
                "mean_scaled_error": agg["mean_scaled_error"],
                "f0_at_eps": agg["f0_at_eps"],
                "f1bar_at_tau": agg["f1bar_at_tau"],
                "ratio_prop1": agg["ratio_prop1_median"],
            }
        )
    out_dir = Path(config.outputs)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / f"sweep_{axis}.csv", "w", newline="") as fh:
        fh.write(f"# config_hash={config_hash(config)} axis={axis}\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["axis_value", "mean_error_rate", "mean_scaled_error", "f0_at_eps", "f1bar_at_tau", "ratio_prop1"]
        )
        for row in rows:
            writer.writerow(
                [
                    repr(float(row["axis_value"])),
                    repr(row["mean_error_rate"]),
                    repr(row["mean_scaled_error"]),
                    repr(row["f0_at_eps"]),
                    repr(row["f1bar_at_tau"]),
                    repr(row["ratio_prop1"]),
                ]
            )
    return rows


def run_verify(seed: int, out_path: str | Path, profile: str = "full") -> dict:
    """Write the verification report; ``all_passed`` decides the exit status."""
    report = theory.run_verification(seed=seed, profile=profile)
    report["config_hash"] = hashlib.sha256(
        json.dumps({"seed": seed, "profile": profile}, sort_keys=True).encode()
    ).hexdigest()[:16]
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report


# ---------------------------------------------------------------------------
# argument parsing


def _add_graph_args(p: argparse.ArgumentParser, *, defaults: bool = True) -> None:
    # with defaults=False only explicitly passed flags override the config file
    p.add_argument("--kind", choices=sorted(_GRAPH_KINDS), default="erdos_renyi" if defaults else None)
    p.add_argument("--n-agents", type=int, default=100 if defaults else None)
    p.add_argument("--p", type=float, default=None, help="explicit interaction probability")
    p.add_argument("--c", type=float, default=None, help="connectivity offset (default ln N)")
    p.add_argument("--seed", type=int, default=0 if defaults else None)


def _add_policy_args(p: argparse.ArgumentParser, *, defaults: bool = True) -> None:
    p.add_argument(
        "--policy",
        choices=["laplacian", "metropolis", "uniform", "counterexample"],
        default="laplacian" if defaults else None,
    )
    p.add_argument("--lam", type=float, default=0.5 if defaults else None)
    p.add_argument("--epsilon", type=float, default=0.01 if defaults else None)
    p.add_argument("--mu", type=float, default=0.1 if defaults else None)


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    data: dict = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            data = json.load(fh)
    config = ExperimentConfig.from_dict(data)
    overrides: dict = {}
    mapping = {
        "kind": "graph_kind",
        "n_agents": "n_agents",
        "p": "p",
        "policy": "policy",
        "lam": "lam",
        "epsilon": "epsilon",
        "mu": "mu",
        "xi": "xi",
        "omega_mode": "omega_mode",
        "mode": "mode",
        "n_samples": "n_samples",
        "burn_in": "burn_in",
        "ridge": "ridge",
        "threshold": "threshold",
        "trials": "trials",
        "seed": "seed",
        "outputs": "outputs",
        "workers": "workers",
    }
    for arg_name, field in mapping.items():
        value = getattr(args, arg_name, None)
        if value is not None:
            overrides[field] = value
    if getattr(args, "c", None) is not None:
        overrides["c"] = args.c
    if overrides:
        config = dataclasses.replace(config, **overrides)
    return config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nettomo",
        description="Reconstruct the interaction profile of a partially observed diffusion network.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="sample an interaction graph and dump its edge list")
    _add_graph_args(p_gen)
    p_gen.add_argument("--require-connected", action="store_true")
    p_gen.add_argument("--out", required=True)

    p_sim = sub.add_parser("simulate", help="run the diffusion recursion and dump the trace")
    _add_graph_args(p_sim)
    _add_policy_args(p_sim)
    p_sim.add_argument("--n-samples", type=int, default=20_000)
    p_sim.add_argument("--input", choices=sorted(_INPUT_KINDS), default="normal")
    p_sim.add_argument("--out", required=True)

    p_tomo = sub.add_parser("tomography", help="one end-to-end reconstruction, scatter CSV out")
    p_tomo.add_argument("--config", default=None)
    _add_graph_args(p_tomo, defaults=False)
    _add_policy_args(p_tomo, defaults=False)
    p_tomo.add_argument("--xi", type=float, default=None)
    p_tomo.add_argument("--omega-mode", dest="omega_mode", choices=sorted(_OMEGA_MODES), default=None)
    p_tomo.add_argument("--mode", choices=["exact", "empirical"], default=None)
    p_tomo.add_argument("--n-samples", type=int, default=None)
    p_tomo.add_argument("--burn-in", dest="burn_in", type=int, default=None)
    p_tomo.add_argument("--ridge", type=float, default=None)
    p_tomo.add_argument("--threshold", type=float, default=None)
    p_tomo.add_argument("--out", required=True)

    p_exp = sub.add_parser("experiment", help="Monte Carlo batch; scatter CSVs plus aggregate JSON")
    p_exp.add_argument("--config", default=None)
    _add_graph_args(p_exp, defaults=False)
    _add_policy_args(p_exp, defaults=False)
    p_exp.add_argument("--xi", type=float, default=None)
    p_exp.add_argument("--omega-mode", dest="omega_mode", choices=sorted(_OMEGA_MODES), default=None)
    p_exp.add_argument("--mode", choices=["exact", "empirical"], default=None)
    p_exp.add_argument("--n-samples", type=int, default=None)
    p_exp.add_argument("--burn-in", dest="burn_in", type=int, default=None)
    p_exp.add_argument("--ridge", type=float, default=None)
    p_exp.add_argument("--threshold", type=float, default=None)
    p_exp.add_argument("--trials", type=int, default=None)
    p_exp.add_argument("--workers", type=int, default=None)
    p_exp.add_argument("--outputs", default=None)

    p_sweep = sub.add_parser("sweep", help="repeat the experiment along one parameter axis")
    p_sweep.add_argument("--config", default=None)
    _add_graph_args(p_sweep, defaults=False)
    _add_policy_args(p_sweep, defaults=False)
    p_sweep.add_argument("--xi", type=float, default=None)
    p_sweep.add_argument("--mode", choices=["exact", "empirical"], default=None)
    p_sweep.add_argument("--n-samples", type=int, default=None)
    p_sweep.add_argument("--trials", type=int, default=None)
    p_sweep.add_argument("--workers", type=int, default=None)
    p_sweep.add_argument("--outputs", default=None)
    p_sweep.add_argument("--axis", choices=SWEEP_AXES, required=True)
    p_sweep.add_argument("--values", required=True, help="comma-separated axis values")

    p_ver = sub.add_parser("verify", help="evaluate the analytic claims, write a JSON report")
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.add_argument("--profile", choices=["full", "quick"], default="full")
    p_ver.add_argument("--out", default="verification.json")

    return parser


def _cmd_generate(args: argparse.Namespace) -> int:
    p = args.p
    if p is None:
        c = args.c if args.c is not None else math.log(args.n_agents)
        p = graphgen.connectivity_probability(args.n_agents, c)
    model = graphgen.GraphModel(_GRAPH_KINDS[args.kind], args.n_agents, p, seed=args.seed)
    graph = graphgen.generate(model, require_connected=args.require_connected)
    graphgen.write_edge_list(graph, args.out, header_comment=f"seed={args.seed} p={p!r}")
    n_edges = int(np.count_nonzero(np.triu(graph.adjacency, 1))) if graph.symmetric else int(
        np.count_nonzero(graph.adjacency) - graph.n_agents
    )
    print(f"wrote {args.out}: N={graph.n_agents} edges={n_edges} connected={graphgen.is_connected(graph)}")
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    p = args.p
    if p is None:
        c = args.c if args.c is not None else math.log(args.n_agents)
        p = graphgen.connectivity_probability(args.n_agents, c)
    model = graphgen.GraphModel(_GRAPH_KINDS[args.kind], args.n_agents, p, seed=split_seed(args.seed, 0))
    graph = graphgen.generate(model)
    A = policies.make_policy(args.policy, args.mu, lam=args.lam, epsilon=args.epsilon)(graph)
    trace = diffusion.simulate(A, args.n_samples, _INPUT_KINDS[args.input], seed=split_seed(args.seed, 1))
    diffusion.write_trace_csv(trace, args.out, header_comment=f"seed={args.seed} policy={args.policy}")
    print(f"wrote {args.out}: N={graph.n_agents} n_samples={args.n_samples}")
    return 0


def _cmd_tomography(args: argparse.Namespace) -> int:
    config = dataclasses.replace(_config_from_args(args), trials=1)
    record = run_trial(config, 0)
    tomography.write_scatter_csv(
        record.result,
        record.g_hat,
        args.out,
        header_comment=f"config_hash={config_hash(config)} trial=0",
    )
    m = record.metrics
    print(
        f"wrote {args.out}: error_rate={m.error_rate:.4f} "
        f"false={m.false_detections} missed={m.misses}"
    )
    return 0


def _cmd_experiment(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    aggregate = run_experiment(config)
    print(
        f"wrote {config.outputs}/aggregate.json: trials={config.trials} "
        f"mean_error_rate={aggregate['mean_error_rate']:.4f}"
    )
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    values = [float(v) for v in args.values.split(",") if v.strip()]
    rows = run_sweep(config, args.axis, values)
    print(f"wrote {config.outputs}/sweep_{args.axis}.csv: {len(rows)} rows")
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    report = run_verify(args.seed, args.out, profile=args.profile)
    for check in report["checks"]:
        flag = "pass" if check["passed"] else "FAIL"
        print(f"[{flag}] {check['name']}: observed={check['observed']} bound={check['bound']}")
    if not report["all_passed"]:
        print("verification FAILED")
        return 3
    print(f"verification passed ({len(report['checks'])} checks), wrote {args.out}")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "simulate": _cmd_simulate,
    "tomography": _cmd_tomography,
    "experiment": _cmd_experiment,
    "sweep": _cmd_sweep,
    "verify": _cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except (np.linalg.LinAlgError, correlation.NonConvergenceError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
