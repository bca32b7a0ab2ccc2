"""Experiment front end: training/evaluation runs, capacity sweeps, oracle
comparisons, and deterministic artifact emission.

Every CSV has a fixed header and column order with floats at 9 significant
digits; a manifest records the config hash, the seeds, and the sha256 of
every artifact, so re-running an identical plan reproduces byte-identical
outputs.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agents import (EqualSplitPolicy, Hyperparams, ddqn_train, dftd3_train,
                     mddpg_train)
from .config import AppConfig, config_bytes
from .domain import Scenario, build_scenario
from .env import MsvsEnv, brute_force_optimum
from .nn import save_checkpoint

ALGORITHMS = ("dftd3", "mddpg", "ddqn", "equal-split", "oracle")
LEARNING_ALGORITHMS = ("dftd3", "mddpg", "ddqn")

# Published simulation ranges for the capacity sweeps.
BANDWIDTH_RANGE_MHZ = (6.0, 14.0)
COMPUTE_RANGE_GCPS = (6.0, 10.0)

TRAIN_COLUMNS = ("episode", "mean_reward", "mean_latency_s", "critic_loss",
                 "actor_grad_norm", "epsilon_or_noise")
SWEEP_COLUMNS = ("axis_value", "algorithm", "mean_latency_s", "ci95")


class PlanError(ValueError):
    """Invalid experiment plan."""


@dataclass
class ExperimentPlan:
    config: AppConfig
    algorithms: list[str]
    seeds: list[int]
    out_dir: Path
    bandwidth_grid: list[float] = field(default_factory=list)
    compute_grid: list[float] = field(default_factory=list)
    eval_windows: int = 20
    episodes: int | None = None          # override config.training.episodes
    oracle_grid_points: int = 41
    allow_out_of_range: bool = False
    verbose: bool = False

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        if isinstance(self.algorithms, str):
            self.algorithms = [self.algorithms]
        if not self.seeds:
            raise PlanError("seeds must be non-empty")
        if any(s < 0 for s in self.seeds):
            raise PlanError("seeds must be non-negative")
        for algo in self.algorithms:
            if algo not in ALGORITHMS:
                raise PlanError(
                    f"unknown algorithm {algo!r}; choose from {ALGORITHMS}")
        if not self.allow_out_of_range:
            for v in self.bandwidth_grid:
                if not BANDWIDTH_RANGE_MHZ[0] <= v <= BANDWIDTH_RANGE_MHZ[1]:
                    raise PlanError(
                        f"bandwidth {v} outside {BANDWIDTH_RANGE_MHZ}; "
                        "set allow_out_of_range to override")
            for v in self.compute_grid:
                if not COMPUTE_RANGE_GCPS[0] <= v <= COMPUTE_RANGE_GCPS[1]:
                    raise PlanError(
                        f"compute {v} outside {COMPUTE_RANGE_GCPS}; "
                        "set allow_out_of_range to override")

    def hyperparams(self) -> Hyperparams:
        hp = Hyperparams.from_training(self.config.training)
        if self.episodes is not None:
            hp.episodes = self.episodes
        return hp


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.9g}"


def write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", newline="\n")


def step_log_columns(n_groups: int) -> tuple[str, ...]:
    bw = tuple(f"B_{g + 1}" for g in range(n_groups))
    return ("window", "psi", "acc", "model_choice") + bw + \
        ("xi_s", "mean_psi_delay_s", "mean_gamma_s", "latency_s", "reward")


def step_log_row(info: dict) -> list:
    return ([info["window"], info["psi"], info["acc"], info["model_choice"]]
            + list(info["bandwidth_mhz"])
            + [info["xi_s"], float(np.mean(info["transcode_delays_s"])),
               float(np.mean(info["tx_delays_s"])), info["latency_s"],
               info["reward"]])


class OraclePolicy:
    """Brute-force optimum on the pending window (desk-scale only)."""

    def __init__(self, grid_points: int = 41):
        self.grid_points = grid_points

    def greedy_action(self, state_norm, env):
        action, _ = brute_force_optimum(env.pending_context, self.grid_points)
        return action


def train_algorithm(algorithm: str, env: MsvsEnv, hp: Hyperparams, seed: int):
    if algorithm == "dftd3":
        return dftd3_train(env, hp, seed)
    if algorithm == "mddpg":
        return mddpg_train(env, hp, seed)
    if algorithm == "ddqn":
        return ddqn_train(env, hp, seed)
    raise PlanError(f"{algorithm!r} is not a learning algorithm")


def make_policy(algorithm: str, plan: ExperimentPlan, scenario: Scenario,
                seed: int, cache: dict | None = None):
    """Trained agent or heuristic for evaluation; training results are
    memoized per (algorithm, seed) in `cache`."""
    if algorithm == "equal-split":
        return EqualSplitPolicy(), None
    if algorithm == "oracle":
        return OraclePolicy(plan.oracle_grid_points), None
    key = (algorithm, seed)
    if cache is not None and key in cache:
        return cache[key]
    env = MsvsEnv(scenario)
    agent, log = train_algorithm(algorithm, env, plan.hyperparams(), seed)
    if cache is not None:
        cache[key] = (agent, log)
    return agent, log


def evaluate_policy(env: MsvsEnv, policy, n_windows: int, seed: int
                    ) -> tuple[list[list], np.ndarray]:
    """Greedy rollout (no exploration, denoising noise pinned); returns
    step-log rows and the latency series."""
    state = env.reset(np.random.SeedSequence([seed, 2]))
    rows, latencies = [], []
    for _ in range(n_windows):
        s_norm = env.normalize_state(state)
        action = policy.greedy_action(s_norm, env)
        state, _, info = env.step(action)
        rows.append(step_log_row(info))
        latencies.append(info["latency_s"])
    return rows, np.asarray(latencies)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(plan: ExperimentPlan, artifacts: list[Path]) -> Path:
    manifest = {
        "config_sha256": hashlib.sha256(config_bytes(plan.config)).hexdigest(),
        "algorithms": list(plan.algorithms),
        "seeds": list(plan.seeds),
        "artifacts": {p.name: _sha256(p) for p in sorted(artifacts)},
    }
    path = plan.out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return path


def run(plan: ExperimentPlan) -> dict[str, Path]:
    """Train (when applicable) and greedily evaluate each (algorithm, seed);
    emit training/eval CSVs, checkpoints, and the manifest."""
    plan.out_dir.mkdir(parents=True, exist_ok=True)
    scenario = build_scenario(plan.config)
    artifacts: list[Path] = []
    outputs: dict[str, Path] = {}
    for algorithm in plan.algorithms:
        for seed in plan.seeds:
            tag = f"{algorithm.replace('-', '_')}_s{seed}"
            if algorithm in LEARNING_ALGORITHMS:
                env = MsvsEnv(scenario)
                agent, log = train_algorithm(algorithm, env,
                                             plan.hyperparams(), seed)
                train_path = plan.out_dir / f"training_{tag}.csv"
                write_csv(train_path, TRAIN_COLUMNS,
                          [[row[c] for c in TRAIN_COLUMNS] for row in log])
                artifacts.append(train_path)
                ckpt_path = plan.out_dir / f"checkpoint_{tag}.npz"
                save_checkpoint(ckpt_path, agent.nets(), agent.optimizers(),
                                extra={"algorithm": algorithm, "seed": seed})
                artifacts.append(ckpt_path)
                policy = agent
            elif algorithm == "equal-split":
                policy = EqualSplitPolicy()
            else:
                policy = OraclePolicy(plan.oracle_grid_points)
            eval_env = MsvsEnv(scenario)
            rows, _ = evaluate_policy(eval_env, policy, plan.eval_windows,
                                      seed)
            eval_path = plan.out_dir / f"eval_{tag}.csv"
            write_csv(eval_path, step_log_columns(scenario.net.group_count),
                      rows)
            artifacts.append(eval_path)
    outputs["manifest"] = write_manifest(plan, artifacts)
    for p in artifacts:
        outputs[p.name] = p
    return outputs


def _with_capacity(scenario_cfg: AppConfig, axis: str, value: float) -> AppConfig:
    cfg = dataclasses.replace(scenario_cfg)
    cfg.network = dataclasses.replace(cfg.network, **{axis: value})
    return cfg


def sweep(plan: ExperimentPlan) -> dict[str, Path]:
    """Evaluate each algorithm across the bandwidth/compute grids; one
    summary CSV per axis with a normal-approximation CI over seeds."""
    if not plan.bandwidth_grid and not plan.compute_grid:
        raise PlanError("sweep needs at least one axis grid")
    plan.out_dir.mkdir(parents=True, exist_ok=True)
    base_scenario = build_scenario(plan.config)
    cache: dict = {}
    outputs: dict[str, Path] = {}
    artifacts: list[Path] = []
    axes = []
    if plan.bandwidth_grid:
        axes.append(("bandwidth_mhz", "sweep_bandwidth.csv",
                     plan.bandwidth_grid))
    if plan.compute_grid:
        axes.append(("compute_gcps", "sweep_compute.csv", plan.compute_grid))
    for axis, filename, grid in axes:
        rows = []
        for value in grid:
            cfg = _with_capacity(plan.config, axis, float(value))
            scenario = build_scenario(cfg)
            for algorithm in plan.algorithms:
                seed_means = []
                for seed in plan.seeds:
                    policy, _ = make_policy(algorithm, plan, base_scenario,
                                            seed, cache)
                    env = MsvsEnv(scenario)
                    _, latencies = evaluate_policy(env, policy,
                                                   plan.eval_windows, seed)
                    seed_means.append(float(latencies.mean()))
                mean = float(np.mean(seed_means))
                if len(seed_means) > 1:
                    ci = 1.96 * float(np.std(seed_means, ddof=1)) \
                        / np.sqrt(len(seed_means))
                else:
                    ci = 0.0
                rows.append([value, algorithm, mean, ci])
        path = plan.out_dir / filename
        write_csv(path, SWEEP_COLUMNS, rows)
        artifacts.append(path)
        outputs[filename] = path
    outputs["manifest"] = write_manifest(plan, artifacts)
    return outputs


def compare_oracle(plan: ExperimentPlan) -> dict:
    """Per-window ratio of each policy's latency to the brute-force
    optimum on the same frozen window context."""
    scenario = build_scenario(plan.config)
    if scenario.net.group_count > 3:
        raise PlanError("oracle comparison is guarded to G <= 3")
    plan.out_dir.mkdir(parents=True, exist_ok=True)
    cache: dict = {}
    report: dict = {"algorithms": {}}
    artifacts: list[Path] = []
    for algorithm in plan.algorithms:
        ratios = []
        rows = []
        for seed in plan.seeds:
            policy, _ = make_policy(algorithm, plan, scenario, seed, cache)
            env = MsvsEnv(scenario)
            state = env.reset(np.random.SeedSequence([seed, 2]))
            for w in range(plan.eval_windows):
                ctx = env.pending_context
                _, best_latency = brute_force_optimum(
                    ctx, plan.oracle_grid_points)
                s_norm = env.normalize_state(state)
                action = policy.greedy_action(s_norm, env)
                state, _, info = env.step(action)
                ratio = info["latency_s"] / best_latency
                ratios.append(ratio)
                rows.append([seed, w, info["latency_s"], best_latency, ratio])
        ratios = np.asarray(ratios)
        tag = algorithm.replace("-", "_")
        path = plan.out_dir / f"oracle_{tag}.csv"
        write_csv(path, ("seed", "window", "policy_latency_s",
                         "optimal_latency_s", "ratio"), rows)
        artifacts.append(path)
        report["algorithms"][algorithm] = {
            "mean_ratio": float(ratios.mean()),
            "median_ratio": float(np.median(ratios)),
            "max_ratio": float(ratios.max()),
            "windows": int(ratios.size),
        }
    report_path = plan.out_dir / "oracle_report.json"
    report_path.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    artifacts.append(report_path)
    write_manifest(plan, artifacts)
    return report
