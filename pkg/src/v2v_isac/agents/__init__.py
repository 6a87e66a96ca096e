from .agent import AGENT_KINDS, ActionSample, Agent, AgentConfig, sample_action
from .buffer import BufferStateError, RolloutBuffer, compute_gae
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .network import PolicyValueNet
from .objectives import (
    Batch,
    a2c_objective,
    clip_term,
    combined_objective,
    ppo_clip_objective,
    value_objective,
)
from .optim import Adam

__all__ = [
    "AGENT_KINDS", "ActionSample", "Adam", "Agent", "AgentConfig", "Batch", "BufferStateError",
    "CheckpointError", "PolicyValueNet", "RolloutBuffer", "a2c_objective", "clip_term",
    "combined_objective", "compute_gae", "load_checkpoint", "ppo_clip_objective",
    "sample_action", "save_checkpoint", "value_objective",
]
