"""Shared agent machinery: the forward/reverse diffusion processes, the
variance schedule, the replay buffer, hyperparameters, and the generic
training loop all three algorithms run under.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from ..autodiff import Tensor, concat
from ..config import TrainingParams
from ..env import Action, decode_action
from ..nn import Mlp, apply_mlp


@dataclass(frozen=True)
class BetaSchedule:
    """Forward-process variances and their derived products."""

    betas: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.betas, dtype=np.float64)
        if b.ndim != 1 or b.size < 1:
            raise ValueError("betas must be a non-empty vector")
        if np.any(b <= 0) or np.any(b >= 1):
            raise ValueError("betas must lie strictly inside (0, 1)")
        object.__setattr__(self, "betas", b)

    @classmethod
    def linear(cls, n: int, start: float, end: float) -> "BetaSchedule":
        return cls(betas=np.linspace(start, end, n))

    @property
    def n_steps(self) -> int:
        return self.betas.size

    @property
    def alphas(self) -> np.ndarray:
        return 1.0 - self.betas

    @property
    def alpha_bars(self) -> np.ndarray:
        return np.cumprod(self.alphas)

    def beta(self, j: int) -> float:
        """1-indexed accessor, j in 1..N."""
        if not 1 <= j <= self.n_steps:
            raise ValueError(f"denoising step {j} out of range 1..{self.n_steps}")
        return float(self.betas[j - 1])


def forward_diffuse(schedule: BetaSchedule, x0: np.ndarray, j: int,
                    rng: np.random.Generator | None = None,
                    noises: Sequence[np.ndarray] | None = None) -> np.ndarray:
    """Apply the first j forward noising steps to x0 (diagnostics only;
    training uses the reverse chain). `noises` pins the per-step draws."""
    if not 1 <= j <= schedule.n_steps:
        raise ValueError(f"j={j} out of range 1..{schedule.n_steps}")
    x = np.asarray(x0, dtype=np.float64)
    for k in range(1, j + 1):
        beta = schedule.beta(k)
        if noises is not None:
            eps = np.asarray(noises[k - 1])
        elif rng is not None:
            eps = rng.standard_normal(x.shape)
        else:
            raise ValueError("pass rng or explicit noises")
        x = np.sqrt(1.0 - beta) * x + np.sqrt(beta) * eps
    return x


def _chain_coeffs(schedule: BetaSchedule, j: int) -> tuple[float, float, float]:
    """Multipliers of (A^j, eps_theta, additive noise) in one reverse step."""
    beta = schedule.beta(j)
    alpha = 1.0 - beta
    alpha_bar = float(schedule.alpha_bars[j - 1])
    if 1.0 - alpha_bar <= 0:
        raise ValueError("degenerate schedule: 1 - alpha_bar must be positive")
    return (1.0 / np.sqrt(alpha),
            beta / np.sqrt(alpha * (1.0 - alpha_bar)),
            np.sqrt(beta))


def reverse_chain_np(actor: Mlp | None, states: np.ndarray,
                     schedule: BetaSchedule, init: np.ndarray,
                     step_noises: Sequence[np.ndarray] | None) -> np.ndarray:
    """Run the reverse (denoising) recursion in plain numpy.

    `actor` maps [A^j, state, j/N] -> predicted noise; None means a zero
    predictor. `step_noises[j-1]` is the additive draw used at step j
    (None for a fully deterministic chain). Returns the pre-squash A^0.
    """
    a = np.array(init, dtype=np.float64)
    n = schedule.n_steps
    batch = a.shape[0]
    for j in range(n, 0, -1):
        c_keep, c_eps, c_noise = _chain_coeffs(schedule, j)
        if actor is not None:
            t_col = np.full((batch, 1), j / n)
            eps_hat = actor.forward(np.concatenate([a, states, t_col], axis=1))
        else:
            eps_hat = 0.0
        a = a * c_keep - c_eps * eps_hat
        if step_noises is not None:
            a = a + c_noise * np.asarray(step_noises[j - 1])
    return a


def reverse_chain_tensor(actor_params: Sequence[Tensor], states: Tensor,
                         schedule: BetaSchedule, init: np.ndarray,
                         step_noises: Sequence[np.ndarray] | None,
                         out_activation: str = "identity") -> Tensor:
    """Differentiable twin of `reverse_chain_np`: gradients flow through
    every denoiser application and through A^j into earlier steps. The
    init and additive noises are fixed realizations (pathwise gradient)."""
    a = Tensor(init)
    n = schedule.n_steps
    batch = init.shape[0]
    for j in range(n, 0, -1):
        c_keep, c_eps, c_noise = _chain_coeffs(schedule, j)
        t_col = Tensor(np.full((batch, 1), j / n))
        eps_hat = apply_mlp(actor_params, concat([a, states, t_col], axis=1),
                            out_activation=out_activation)
        a = a * c_keep + eps_hat * (-c_eps)
        if step_noises is not None:
            a = a + Tensor(c_noise * np.asarray(step_noises[j - 1]))
    return a


def squash01(x: np.ndarray) -> np.ndarray:
    return (np.tanh(x) + 1.0) * 0.5


def squash01_tensor(x: Tensor) -> Tensor:
    return (x.tanh() + 1.0) * 0.5


def diffuse_sample(actor: Mlp | None, state: np.ndarray,
                   schedule: BetaSchedule,
                   rng: np.random.Generator | None = None,
                   mode: str = "deterministic",
                   exploration_sd: float = 0.0) -> np.ndarray:
    """Generate one raw action in [0,1]^dim via the reverse chain.

    deterministic: A^N = 0, additive noise pinned to zero (evaluation).
    explore: A^N ~ N(0, I), per-step noise, plus clipped Gaussian
    exploration noise after the squash.
    """
    if mode not in ("deterministic", "explore"):
        raise ValueError(f"unknown mode {mode!r}")
    if actor is None:
        raise ValueError("actor is required to size the action")
    state = np.asarray(state, dtype=np.float64)
    single = state.ndim == 1
    states = state[None, :] if single else state
    batch = states.shape[0]
    dim = actor.sizes[-1]
    if mode == "explore":
        if rng is None:
            raise ValueError("explore mode needs an rng")
        init = rng.standard_normal((batch, dim))
        noises = [rng.standard_normal((batch, dim))
                  for _ in range(schedule.n_steps)]
    else:
        init = np.zeros((batch, dim))
        noises = None
    raw = squash01(reverse_chain_np(actor, states, schedule, init, noises))
    if mode == "explore" and exploration_sd > 0:
        raw = np.clip(raw + rng.normal(0.0, exploration_sd, raw.shape), 0.0, 1.0)
    return raw[0] if single else raw


@dataclass
class Hyperparams:
    batch: int = 128
    tau: float = 0.005
    gamma: float = 0.95
    actor_lr: float = 1e-4
    critic_lr: float = 3e-4
    exploration_sd: float = 0.1
    exploration_decay: float = 0.999
    smoothing_sd: float = 0.2
    smoothing_clip: float = 0.5
    actor_delay: int = 10
    episodes: int = 500
    steps_per_episode: int = 100
    denoise_steps: int = 5
    beta_start: float = 1e-4
    beta_end: float = 0.05
    buffer_capacity: int = 100_000
    hidden_width: int = 64
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay: float = 0.99

    def __post_init__(self):
        if self.actor_delay < 1:
            raise ValueError("actor_delay must be >= 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        for name in ("batch", "tau", "actor_lr", "critic_lr",
                     "denoise_steps", "steps_per_episode", "buffer_capacity"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def from_training(cls, tp: TrainingParams) -> "Hyperparams":
        return cls(batch=tp.batch, tau=tp.tau, gamma=tp.gamma,
                   actor_lr=tp.actor_lr, critic_lr=tp.critic_lr,
                   exploration_sd=tp.exploration_sd,
                   exploration_decay=tp.exploration_decay,
                   smoothing_sd=tp.smoothing_sd,
                   smoothing_clip=tp.smoothing_clip,
                   actor_delay=tp.actor_delay, episodes=tp.episodes,
                   steps_per_episode=tp.steps_per_episode,
                   denoise_steps=tp.denoise_steps, beta_start=tp.beta_start,
                   beta_end=tp.beta_end, buffer_capacity=tp.buffer_capacity,
                   hidden_width=tp.hidden_width,
                   epsilon_start=tp.epsilon_start,
                   epsilon_end=tp.epsilon_end,
                   epsilon_decay=tp.epsilon_decay)


class ReplayBuffer:
    """Uniform ring buffer of (S, raw action, R, S') transitions."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.size = 0
        self._head = 0

    def __len__(self) -> int:
        return self.size

    def push(self, state, action, reward, next_state) -> None:
        i = self._head
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self._head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, rng: np.random.Generator, batch: int):
        if self.size < batch:
            raise ValueError(f"buffer holds {self.size} < batch {batch}")
        idx = rng.integers(0, self.size, size=batch)
        return (self.states[idx], self.actions[idx], self.rewards[idx],
                self.next_states[idx])


class Agent(Protocol):
    """What the generic training loop needs from an algorithm."""

    def act(self, state_norm: np.ndarray, env) -> tuple[object, Action]: ...
    def greedy_action(self, state_norm: np.ndarray, env) -> Action: ...
    def observe(self, s, stored, reward, s2) -> None: ...
    def update(self) -> dict: ...
    def end_episode(self) -> None: ...
    @property
    def exploration_level(self) -> float: ...


def run_training(env, agent, hp: Hyperparams, seed: int) -> list[dict]:
    """Generic episode loop: act, step, store, update; one log row per
    episode. Fully deterministic given (env scenario, agent seed, seed)."""
    log: list[dict] = []
    for ep in range(hp.episodes):
        state = env.reset(np.random.SeedSequence([seed, 1, ep]))
        rewards, latencies, closses, gnorms = [], [], [], []
        for _ in range(hp.steps_per_episode):
            s_norm = env.normalize_state(state)
            stored, action = agent.act(s_norm, env)
            state, reward, info = env.step(action)
            agent.observe(s_norm, stored, reward,
                          env.normalize_state(state))
            diag = agent.update()
            rewards.append(reward)
            latencies.append(info["latency_s"])
            if "critic_loss" in diag:
                closses.append(diag["critic_loss"])
            if "actor_grad_norm" in diag:
                gnorms.append(diag["actor_grad_norm"])
        log.append({
            "episode": ep,
            "mean_reward": float(np.mean(rewards)),
            "mean_latency_s": float(np.mean(latencies)),
            "critic_loss": float(np.mean(closses)) if closses else 0.0,
            "actor_grad_norm": float(np.mean(gnorms)) if gnorms else 0.0,
            "epsilon_or_noise": agent.exploration_level,
        })
        agent.end_episode()
    return log


class EqualSplitPolicy:
    """Non-learning baseline: smallest model, equal bandwidth split."""

    def __init__(self):
        self.exploration_level = 0.0

    def _raw(self, env) -> np.ndarray:
        raw = np.zeros(env.raw_action_dim)
        raw[0] = 1.0
        raw[env.n_models:] = 1.0
        return raw

    def act(self, state_norm, env):
        raw = self._raw(env)
        return raw, decode_action(raw, env.scenario.net)

    def greedy_action(self, state_norm, env) -> Action:
        return self.act(state_norm, env)[1]

    def observe(self, s, stored, reward, s2) -> None:
        pass

    def update(self) -> dict:
        return {}

    def end_episode(self) -> None:
        pass
