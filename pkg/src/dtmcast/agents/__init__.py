from .common import (Agent, BetaSchedule, EqualSplitPolicy, Hyperparams,
                     ReplayBuffer, diffuse_sample, forward_diffuse,
                     reverse_chain_np, reverse_chain_tensor, run_training,
                     squash01, squash01_tensor)
from .ddqn import DdqnAgent, bandwidth_templates, ddqn_train
from .dftd3 import Dftd3Agent, dftd3_train
from .mddpg import MddpgAgent, map_tanh_to_unit, mddpg_train

__all__ = [
    "Agent", "BetaSchedule", "EqualSplitPolicy", "Hyperparams",
    "ReplayBuffer", "diffuse_sample", "forward_diffuse", "reverse_chain_np",
    "reverse_chain_tensor", "run_training", "squash01", "squash01_tensor",
    "DdqnAgent", "bandwidth_templates", "ddqn_train",
    "Dftd3Agent", "dftd3_train",
    "MddpgAgent", "map_tanh_to_unit", "mddpg_train",
]
