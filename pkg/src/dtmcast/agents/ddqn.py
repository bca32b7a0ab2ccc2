"""Dueling deep Q-network baseline over a discrete joint action set:
model choices crossed with ten fixed bandwidth-split templates.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import Tensor
from ..env import Action
from ..nn import Adam, Mlp, apply_mlp, soft_update
from .common import Hyperparams, run_training

N_BANDWIDTH_TEMPLATES = 10
_DOMINANCE_LEVELS = (0.5, 0.7, 0.9)


def bandwidth_templates(n_groups: int) -> np.ndarray:
    """Ten fractional splits: equal plus nine dominance rotations.

    Template k >= 1 puts weight level on group (k-1) mod G and splits the
    rest equally; levels cycle through {0.5, 0.7, 0.9}. Deterministic
    given G (duplicates possible when G is small, which is harmless)."""
    rows = [np.full(n_groups, 1.0 / n_groups)]
    for k in range(N_BANDWIDTH_TEMPLATES - 1):
        if n_groups == 1:
            rows.append(np.array([1.0]))
            continue
        dom = k % n_groups
        level = _DOMINANCE_LEVELS[(k // n_groups) % len(_DOMINANCE_LEVELS)]
        row = np.full(n_groups, (1.0 - level) / (n_groups - 1))
        row[dom] = level
        rows.append(row)
    return np.array(rows)


class DuelingNet:
    """Shared relu trunk with scalar value and per-action advantage heads;
    Q = V + A - mean(A)."""

    def __init__(self, state_dim: int, n_actions: int, hidden: int,
                 rng: np.random.Generator):
        self.trunk = Mlp([state_dim, hidden, hidden], out_activation="relu",
                         rng=rng)
        self.value = Mlp([hidden, 1], rng=rng)
        self.advantage = Mlp([hidden, n_actions], rng=rng)

    def forward(self, states: np.ndarray) -> np.ndarray:
        feats = self.trunk.forward(states)
        v = self.value.forward(feats)
        a = self.advantage.forward(feats)
        return v + a - a.mean(axis=-1, keepdims=True)

    def q_tensor(self, states: Tensor, params: list[Tensor]) -> Tensor:
        nt = len(self.trunk.params())
        nv = len(self.value.params())
        feats = apply_mlp(params[:nt], states, out_activation="relu")
        v = apply_mlp(params[nt:nt + nv], feats)
        a = apply_mlp(params[nt + nv:], feats)
        n_actions = self.advantage.sizes[-1]
        mean_a = a @ Tensor(np.full((n_actions, 1), 1.0 / n_actions))
        return v + a - mean_a

    def params(self) -> list[np.ndarray]:
        return self.trunk.params() + self.value.params() + self.advantage.params()

    def tensor_params(self) -> list[Tensor]:
        return [Tensor(p) for p in self.params()]

    def copy(self) -> "DuelingNet":
        clone = DuelingNet.__new__(DuelingNet)
        clone.trunk = self.trunk.copy()
        clone.value = self.value.copy()
        clone.advantage = self.advantage.copy()
        return clone

    def soft_update_from(self, online: "DuelingNet", tau: float) -> None:
        soft_update(self.trunk, online.trunk, tau)
        soft_update(self.value, online.value, tau)
        soft_update(self.advantage, online.advantage, tau)

    def mlps(self) -> dict[str, Mlp]:
        return {"trunk": self.trunk, "value": self.value,
                "advantage": self.advantage}


class IndexReplay:
    """Ring buffer for discrete-action transitions."""

    def __init__(self, capacity: int, state_dim: int):
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.size = 0
        self._head = 0

    def __len__(self):
        return self.size

    def push(self, s, idx, r, s2):
        i = self._head
        self.states[i] = s
        self.actions[i] = idx
        self.rewards[i] = r
        self.next_states[i] = s2
        self._head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, rng, batch):
        if self.size < batch:
            raise ValueError(f"buffer holds {self.size} < batch {batch}")
        idx = rng.integers(0, self.size, size=batch)
        return (self.states[idx], self.actions[idx], self.rewards[idx],
                self.next_states[idx])


class DdqnAgent:
    def __init__(self, state_dim: int, n_models: int, n_groups: int,
                 hp: Hyperparams, seed: int, reward_scale: float = 1.0):
        self.hp = hp
        self.reward_scale = reward_scale
        self.n_models = n_models
        self.templates = bandwidth_templates(n_groups)
        self.n_actions = n_models * len(self.templates)
        ss = np.random.SeedSequence([seed, 0])
        init_rng, self.rng = (np.random.default_rng(s) for s in ss.spawn(2))
        self.net = DuelingNet(state_dim, self.n_actions, hp.hidden_width,
                              init_rng)
        self.target = self.net.copy()
        self.adam = Adam(hp.critic_lr)
        self.buffer = IndexReplay(hp.buffer_capacity, state_dim)
        self.epsilon = hp.epsilon_start

    def action_from_index(self, idx: int, env) -> Action:
        model_idx, tpl_idx = divmod(int(idx), len(self.templates))
        choice = np.zeros(self.n_models)
        choice[model_idx] = 1.0
        bandwidth = env.scenario.net.bandwidth_mhz * self.templates[tpl_idx]
        return Action(model_choice=choice, bandwidth_mhz=bandwidth)

    def act(self, state_norm, env):
        if self.rng.uniform() < self.epsilon:
            idx = int(self.rng.integers(0, self.n_actions))
        else:
            idx = int(np.argmax(self.net.forward(state_norm)))
        return idx, self.action_from_index(idx, env)

    def greedy_action(self, state_norm, env) -> Action:
        idx = int(np.argmax(self.net.forward(state_norm)))
        return self.action_from_index(idx, env)

    def observe(self, s, idx, reward, s2) -> None:
        self.buffer.push(s, idx, reward * self.reward_scale, s2)

    @property
    def exploration_level(self) -> float:
        return self.epsilon

    def end_episode(self) -> None:
        self.epsilon = max(self.hp.epsilon_end,
                           self.epsilon * self.hp.epsilon_decay)

    def update(self) -> dict:
        if len(self.buffer) < self.hp.batch:
            return {}
        hp = self.hp
        s, idx, r, s2 = self.buffer.sample(self.rng, hp.batch)
        y = r[:, None] + hp.gamma * self.target.forward(s2).max(
            axis=1, keepdims=True)
        params = self.net.tensor_params()
        q_all = self.net.q_tensor(Tensor(s), params)
        mask = np.zeros((s.shape[0], self.n_actions))
        mask[np.arange(s.shape[0]), idx] = 1.0
        ones = Tensor(np.ones((self.n_actions, 1)))
        q_sel = (q_all * Tensor(mask)) @ ones
        diff = q_sel - Tensor(y)
        loss = (diff * diff).mean()
        loss.backward()
        grads = [p.grad if p.grad is not None else np.zeros_like(p.value)
                 for p in params]
        self.adam.step(self.net.params(), grads)
        self.target.soft_update_from(self.net, hp.tau)
        return {"critic_loss": float(loss.value)}

    def nets(self) -> dict[str, Mlp]:
        out = {}
        for prefix, net in (("online", self.net), ("target", self.target)):
            for name, mlp in net.mlps().items():
                out[f"{prefix}_{name}"] = mlp
        return out

    def optimizers(self) -> dict[str, Adam]:
        return {"q": self.adam}


def ddqn_train(env, hp: Hyperparams, seed: int) -> tuple[DdqnAgent, list[dict]]:
    agent = DdqnAgent(env.state_dim, env.n_models, env.n_groups, hp, seed,
                      reward_scale=1.0 / env.scenario.net.window_s)
    log = run_training(env, agent, hp, seed)
    return agent, log
