"""Modified DDPG baseline: same state/action/reward as the diffusion agent
but a plain tanh actor whose output is mapped from [-1, 1] to [0, 1], a
single critic, and every-step actor/target updates.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import Tensor, concat
from ..env import Action, decode_action
from ..nn import Adam, Mlp, apply_mlp, soft_update
from .common import Hyperparams, ReplayBuffer, run_training


def map_tanh_to_unit(x: np.ndarray) -> np.ndarray:
    """[-1, 1] actor output onto the [0, 1] raw-action cube."""
    return (np.asarray(x) + 1.0) * 0.5


class MddpgAgent:
    def __init__(self, state_dim: int, n_models: int, n_groups: int,
                 hp: Hyperparams, seed: int, reward_scale: float = 1.0):
        self.hp = hp
        self.reward_scale = reward_scale
        self.action_dim = n_models + n_groups
        ss = np.random.SeedSequence([seed, 0])
        init_rng, self.rng = (np.random.default_rng(s) for s in ss.spawn(2))
        h = hp.hidden_width
        self.actor = Mlp([state_dim, h, h, self.action_dim],
                         out_activation="tanh", rng=init_rng)
        self.critic = Mlp([state_dim + self.action_dim, h, h, 1], rng=init_rng)
        self.target_actor = self.actor.copy()
        self.target_critic = self.critic.copy()
        self.actor_adam = Adam(hp.actor_lr)
        self.critic_adam = Adam(hp.critic_lr)
        self.buffer = ReplayBuffer(hp.buffer_capacity, state_dim,
                                   self.action_dim)
        self.noise_sd = hp.exploration_sd

    def act(self, state_norm, env):
        raw = map_tanh_to_unit(self.actor.forward(state_norm))
        raw = np.clip(raw + self.rng.normal(0.0, self.noise_sd, raw.shape),
                      0.0, 1.0)
        return raw, decode_action(raw, env.scenario.net)

    def greedy_raw(self, state_norm) -> np.ndarray:
        return map_tanh_to_unit(self.actor.forward(state_norm))

    def greedy_action(self, state_norm, env) -> Action:
        return decode_action(self.greedy_raw(state_norm), env.scenario.net)

    def observe(self, s, raw, reward, s2) -> None:
        self.buffer.push(s, raw, reward * self.reward_scale, s2)

    @property
    def exploration_level(self) -> float:
        return self.noise_sd

    def end_episode(self) -> None:
        self.noise_sd *= self.hp.exploration_decay

    def update(self) -> dict:
        if len(self.buffer) < self.hp.batch:
            return {}
        hp = self.hp
        s, a, r, s2 = self.buffer.sample(self.rng, hp.batch)

        a2 = map_tanh_to_unit(self.target_actor.forward(s2))
        y = r[:, None] + hp.gamma * self.target_critic.forward(
            np.concatenate([s2, a2], axis=1))
        critic_params = self.critic.tensor_params()
        diff = apply_mlp(critic_params,
                         Tensor(np.concatenate([s, a], axis=1))) - Tensor(y)
        closs = (diff * diff).mean()
        closs.backward()
        self.critic_adam.step(self.critic.params(),
                              [p.grad for p in critic_params])

        actor_params = self.actor.tensor_params()
        states_t = Tensor(s)
        raw = (apply_mlp(actor_params, states_t, out_activation="tanh")
               + 1.0) * 0.5
        q_params = self.critic.tensor_params()
        q = apply_mlp(q_params, concat([states_t, raw], axis=1))
        aloss = -q.mean()
        aloss.backward()
        grads = [p.grad if p.grad is not None else np.zeros_like(p.value)
                 for p in actor_params]
        self.actor_adam.step(self.actor.params(), grads)

        soft_update(self.target_critic, self.critic, hp.tau)
        soft_update(self.target_actor, self.actor, hp.tau)
        gnorm = float(np.sqrt(sum(float((g * g).sum()) for g in grads)))
        return {"critic_loss": float(closs.value), "actor_grad_norm": gnorm}

    def nets(self) -> dict[str, Mlp]:
        return {"actor": self.actor, "critic": self.critic,
                "target_actor": self.target_actor,
                "target_critic": self.target_critic}

    def optimizers(self) -> dict[str, Adam]:
        return {"actor": self.actor_adam, "critic": self.critic_adam}


def mddpg_train(env, hp: Hyperparams, seed: int) -> tuple[MddpgAgent, list[dict]]:
    agent = MddpgAgent(env.state_dim, env.n_models, env.n_groups, hp, seed,
                       reward_scale=1.0 / env.scenario.net.window_s)
    log = run_training(env, agent, hp, seed)
    return agent, log
