"""dtmcast: digital-twin assisted multicast short-video streaming simulator
with a diffusion-policy resource-management algorithm and baselines."""

from .config import AppConfig, ConfigError, load_config, parse_config
from .domain import (CATEGORIES, MulticastGroup, NetworkConfig, Scenario,
                     ScenarioError, SwipeModel, Video, build_scenario,
                     layer_size, swipe_cdf)
from .dtmodels import (PAPER_COEFFICIENTS, AccuracySurface, DtModelSpec,
                       accuracy, fit_surface, model_size, paper_surface,
                       synth_measurements)
from .env import (Action, FrozenWindowEnv, MsvsEnv, RawAction, State,
                  brute_force_optimum, build_context, decode_action,
                  default_action, simplex_grid, sqrt_allocation)
from .latency import (GroupWindow, LatencyError, WindowContext,
                      dt_processing_delay, effective_playlist,
                      expected_segments, multicast_rate, service_latency,
                      transcoding_delay, transcoding_workload,
                      transmission_delay)
from .mobility import (MobilityParams, UserStatusWindow, channel_gain,
                       emulate_window, levy_step, truncated_pareto,
                       user_dynamics)

__version__ = "0.1.0"
