"""Diffusion-based TD3: the actor generates raw actions by iterating the
reverse denoising chain conditioned on the state; twin critics with target
smoothing and delayed actor/target updates complete the TD3 recipe.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import Tensor, concat
from ..env import Action, decode_action
from ..nn import Adam, Mlp, apply_mlp, soft_update
from .common import (BetaSchedule, Hyperparams, ReplayBuffer,
                     diffuse_sample, reverse_chain_np, reverse_chain_tensor,
                     run_training, squash01, squash01_tensor)


class Dftd3Agent:
    def __init__(self, state_dim: int, n_models: int, n_groups: int,
                 hp: Hyperparams, seed: int, reward_scale: float = 1.0):
        self.hp = hp
        self.reward_scale = reward_scale
        self.state_dim = state_dim
        self.action_dim = n_models + n_groups
        ss = np.random.SeedSequence([seed, 0])
        init_rng, self.rng = (np.random.default_rng(s) for s in ss.spawn(2))
        h = hp.hidden_width
        # tanh head keeps the reverse chain inside the squash's linear
        # zone (the chain coefficients sum to ~0.5), so the policy gradient
        # through the model-selection coordinates never vanishes
        self.actor = Mlp([self.action_dim + state_dim + 1, h, h,
                          self.action_dim], out_activation="tanh",
                         rng=init_rng)
        self.critic1 = Mlp([state_dim + self.action_dim, h, h, 1], rng=init_rng)
        self.critic2 = Mlp([state_dim + self.action_dim, h, h, 1], rng=init_rng)
        self.target_actor = self.actor.copy()
        self.target_critic1 = self.critic1.copy()
        self.target_critic2 = self.critic2.copy()
        self.actor_adam = Adam(hp.actor_lr)
        self.critic1_adam = Adam(hp.critic_lr)
        self.critic2_adam = Adam(hp.critic_lr)
        self.schedule = BetaSchedule.linear(hp.denoise_steps, hp.beta_start,
                                            hp.beta_end)
        self.buffer = ReplayBuffer(hp.buffer_capacity, state_dim,
                                   self.action_dim)
        self.noise_sd = hp.exploration_sd
        self._updates = 0

    # ---- acting ---------------------------------------------------------

    def act(self, state_norm, env):
        raw = diffuse_sample(self.actor, state_norm, self.schedule, self.rng,
                             mode="explore", exploration_sd=self.noise_sd)
        return raw, decode_action(raw, env.scenario.net)

    def greedy_raw(self, state_norm) -> np.ndarray:
        return diffuse_sample(self.actor, state_norm, self.schedule,
                              mode="deterministic")

    def greedy_action(self, state_norm, env) -> Action:
        return decode_action(self.greedy_raw(state_norm), env.scenario.net)

    def observe(self, s, raw, reward, s2) -> None:
        # internal scaling keeps Q targets O(1); env rewards stay -latency
        self.buffer.push(s, raw, reward * self.reward_scale, s2)

    @property
    def exploration_level(self) -> float:
        return self.noise_sd

    def end_episode(self) -> None:
        self.noise_sd *= self.hp.exploration_decay

    # ---- learning --------------------------------------------------------

    def update(self) -> dict:
        if len(self.buffer) < self.hp.batch:
            return {}
        batch = self.buffer.sample(self.rng, self.hp.batch)
        diag = {"critic_loss": self.critic_update(batch)}
        self._updates += 1
        if self._updates % self.hp.actor_delay == 0:
            diag["actor_grad_norm"] = self.actor_update(batch)
            self._soft_update_targets()
        return diag

    def critic_target(self, r: np.ndarray, s2: np.ndarray) -> np.ndarray:
        """Clipped double-Q target: denoised target-actor action plus
        clipped smoothing noise, evaluated by the pessimistic twin."""
        hp = self.hp
        zeros = np.zeros((s2.shape[0], self.action_dim))
        a2 = squash01(reverse_chain_np(self.target_actor, s2, self.schedule,
                                       zeros, None))
        noise = np.clip(self.rng.normal(0.0, hp.smoothing_sd, a2.shape),
                        -hp.smoothing_clip, hp.smoothing_clip)
        a2 = np.clip(a2 + noise, 0.0, 1.0)
        x2 = np.concatenate([s2, a2], axis=1)
        q_next = np.minimum(self.target_critic1.forward(x2),
                            self.target_critic2.forward(x2))
        return r[:, None] + hp.gamma * q_next

    def critic_update(self, batch) -> float:
        """One Bellman regression step on each critic."""
        s, a, r, s2 = batch
        y = self.critic_target(r, s2)
        x = np.concatenate([s, a], axis=1)
        losses = []
        for critic, adam in ((self.critic1, self.critic1_adam),
                             (self.critic2, self.critic2_adam)):
            params = critic.tensor_params()
            diff = apply_mlp(params, Tensor(x)) - Tensor(y)
            loss = (diff * diff).mean()
            loss.backward()
            adam.step(critic.params(), [p.grad for p in params])
            losses.append(float(loss.value))
        return float(np.mean(losses))

    def actor_update(self, batch) -> float:
        """Deterministic policy gradient through the squash and the full
        denoising chain; the chain's noise draws are fixed realizations."""
        s = batch[0]
        hp = self.hp
        b = s.shape[0]
        init = self.rng.standard_normal((b, self.action_dim))
        noises = [self.rng.standard_normal((b, self.action_dim))
                  for _ in range(self.schedule.n_steps)]
        actor_params = self.actor.tensor_params()
        states_t = Tensor(s)
        raw = squash01_tensor(reverse_chain_tensor(
            actor_params, states_t, self.schedule, init, noises,
            out_activation=self.actor.out_activation))
        critic_params = self.critic1.tensor_params()
        q = apply_mlp(critic_params, concat([states_t, raw], axis=1))
        loss = -q.mean()
        loss.backward()
        grads = [p.grad if p.grad is not None else np.zeros_like(p.value)
                 for p in actor_params]
        self.actor_adam.step(self.actor.params(), grads)
        return float(np.sqrt(sum(float((g * g).sum()) for g in grads)))

    def _soft_update_targets(self) -> None:
        tau = self.hp.tau
        soft_update(self.target_critic1, self.critic1, tau)
        soft_update(self.target_critic2, self.critic2, tau)
        soft_update(self.target_actor, self.actor, tau)

    # ---- persistence ------------------------------------------------------

    def nets(self) -> dict[str, Mlp]:
        return {"actor": self.actor, "critic1": self.critic1,
                "critic2": self.critic2, "target_actor": self.target_actor,
                "target_critic1": self.target_critic1,
                "target_critic2": self.target_critic2}

    def optimizers(self) -> dict[str, Adam]:
        return {"actor": self.actor_adam, "critic1": self.critic1_adam,
                "critic2": self.critic2_adam}


def dftd3_train(env, hp: Hyperparams, seed: int) -> tuple[Dftd3Agent, list[dict]]:
    agent = Dftd3Agent(env.state_dim, env.n_models, env.n_groups, hp, seed,
                       reward_scale=1.0 / env.scenario.net.window_s)
    log = run_training(env, agent, hp, seed)
    return agent, log
