"""Multi-resolution Markov ensembles for interactive behavior cloning.

Demonstrations are indexed into grids of hash-table Markov models over
quantized extended states (observation + recent action history). Queries
sweep from the finest quantization and longest history downward, so the
most specific memory of a demonstration answers first; a stack of such
grids gives the newest demonstration precedence over older ones.
"""

from .ensemble import ActionBag, MarkovEnsemble, MarkovModel, build_ensemble, sample_action
from .episode import (
    ControlSource,
    Episode,
    ExtendedState,
    StepRecord,
    Terminal,
    Transition,
    episode_transitions,
)
from .keys import StateKey, encode_key
from .policy import (
    DemonstrationStack,
    FallbackPolicy,
    Matched,
    PolicyDecision,
    add_demonstration,
    demo_stack_policy,
    ensemble_policy,
    stack_policy,
    stack_stats,
    stats_text,
)
from .quantize import QuantizationSchema, quantize_episode, uniform_quantize
from .serialize import (
    ModelFormatError,
    deserialize_stack,
    load_stack,
    save_stack,
    serialize_stack,
)
from .session import (
    ControlOwner,
    EpisodeMetrics,
    Session,
    SessionConfig,
    end_of_episode_ingest,
    metrics_to_csv,
)
from .spaces import Continuous, Discrete, SpaceSpec

__version__ = "0.1.0"

__all__ = [
    "ActionBag",
    "Continuous",
    "ControlOwner",
    "ControlSource",
    "DemonstrationStack",
    "Discrete",
    "Episode",
    "EpisodeMetrics",
    "ExtendedState",
    "FallbackPolicy",
    "MarkovEnsemble",
    "MarkovModel",
    "Matched",
    "ModelFormatError",
    "PolicyDecision",
    "QuantizationSchema",
    "Session",
    "SessionConfig",
    "SpaceSpec",
    "StateKey",
    "StepRecord",
    "Terminal",
    "Transition",
    "add_demonstration",
    "build_ensemble",
    "demo_stack_policy",
    "deserialize_stack",
    "encode_key",
    "end_of_episode_ingest",
    "ensemble_policy",
    "episode_transitions",
    "load_stack",
    "metrics_to_csv",
    "quantize_episode",
    "sample_action",
    "save_stack",
    "serialize_stack",
    "stack_policy",
    "stack_stats",
    "stats_text",
    "uniform_quantize",
]
