"""Adam with bias correction, global-norm clipping, and refusal of bad steps."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import TrainingError, ValidationError
from .network import Network, NetworkConfig


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7
    clip_norm: float | None = 5.0  # None disables clipping

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValidationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0 <= self.beta1 < 1 or not 0 <= self.beta2 < 1:
            raise ValidationError("betas must lie in [0, 1)")
        if self.epsilon <= 0:
            raise ValidationError(f"epsilon must be > 0, got {self.epsilon}")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ValidationError(f"clip_norm must be > 0, got {self.clip_norm}")


@dataclass
class ModelState:
    """Parameters plus optimizer moments and step counter, shape-aligned."""

    config: NetworkConfig
    params: dict
    adam_m: dict = field(default_factory=dict)
    adam_v: dict = field(default_factory=dict)
    step: int = 0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, value in self.params.items():
            if not self.adam_m:
                break
            if self.adam_m[name].shape != value.shape or self.adam_v[name].shape != value.shape:
                raise ValidationError(f"optimizer moment shape mismatch for {name}")

    @classmethod
    def fresh(cls, config: NetworkConfig, metadata: dict | None = None) -> "ModelState":
        net = Network(config)
        params = net.init_params()
        zeros = {k: np.zeros_like(v) for k, v in params.items()}
        return cls(config=config, params=params,
                   adam_m=zeros, adam_v={k: v.copy() for k, v in zeros.items()},
                   step=0, metadata=dict(metadata or {}))

    def copy_params(self) -> dict:
        return {k: v.copy() for k, v in self.params.items()}


def global_norm(grads: dict) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_by_global_norm(grads: dict, clip_norm: float) -> dict:
    norm = global_norm(grads)
    if norm <= clip_norm:
        return grads
    scale = clip_norm / norm
    return {k: g * scale for k, g in grads.items()}


def adam_step(state: ModelState, grads: dict, opt: AdamConfig = AdamConfig()) -> ModelState:
    """One in-place Adam update; refuses (raises) on non-finite gradients."""
    if set(grads) != set(state.params):
        missing = set(state.params) ^ set(grads)
        raise ValidationError(f"gradient keys do not match parameters: {sorted(missing)}")
    for name, g in grads.items():
        if g.shape != state.params[name].shape:
            raise ValidationError(f"gradient shape mismatch for {name}")
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient in {name}; step refused")
    if opt.clip_norm is not None:
        grads = clip_by_global_norm(grads, opt.clip_norm)
    state.step += 1
    t = state.step
    bc1 = 1.0 - opt.beta1**t
    bc2 = 1.0 - opt.beta2**t
    for name, g in grads.items():
        m = state.adam_m[name]
        v = state.adam_v[name]
        m *= opt.beta1
        m += (1.0 - opt.beta1) * g
        v *= opt.beta2
        v += (1.0 - opt.beta2) * (g * g)
        state.params[name] -= opt.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + opt.epsilon)
    return state
