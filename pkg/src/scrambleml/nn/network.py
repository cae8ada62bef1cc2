"""Network assembly: config -> layer stack -> loss nodes with gradients.

Two architectures:

* "lstm": stacked LSTM layers on (S, P, F) sequences followed by a
  time-distributed linear readout of width K.
* "convlstm": stacked 1-D convolutional LSTM layers on (S, P, N, F) grids,
  the last one with K filters, followed by a global max pool over space.
  Parameters never depend on N, so the same model runs at other sizes.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError
from .layers import ConvLstmLayer, DenseLayer, GlobalMaxPool, LstmLayer

ARCHITECTURES = ("lstm", "convlstm")
PRECISIONS = {"float64": np.float64, "float32": np.float32}

# paper-scale stacks; desk runs shrink these through the config
LSTM_PAPER_HIDDEN = (200, 200, 200)
CONVLSTM_PAPER_HIDDEN = (70, 100, 100, 70)


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture hyperparameters; equal configs build identical networks."""

    architecture: str
    hidden_sizes: tuple
    output_width: int
    in_features: int = 2
    kernel_size: int = 3
    padding: str = "zero"
    seed: int = 0
    precision: str = "float64"

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValidationError(
                f"architecture must be one of {ARCHITECTURES}, got {self.architecture!r}")
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if not self.hidden_sizes or any(h < 1 for h in self.hidden_sizes):
            raise ValidationError(f"hidden_sizes must be positive, got {self.hidden_sizes}")
        if self.output_width < 1:
            raise ValidationError(f"output_width must be >= 1, got {self.output_width}")
        if self.in_features < 1:
            raise ValidationError(f"in_features must be >= 1, got {self.in_features}")
        if self.precision not in PRECISIONS:
            raise ValidationError(f"precision must be one of {tuple(PRECISIONS)}")

    @classmethod
    def lstm_paper(cls, output_width: int, **overrides) -> "NetworkConfig":
        args = dict(architecture="lstm", hidden_sizes=LSTM_PAPER_HIDDEN,
                    output_width=output_width)
        args.update(overrides)
        return cls(**args)

    @classmethod
    def convlstm_paper(cls, output_width: int, **overrides) -> "NetworkConfig":
        args = dict(architecture="convlstm", hidden_sizes=CONVLSTM_PAPER_HIDDEN,
                    output_width=output_width)
        args.update(overrides)
        return cls(**args)

    def to_json(self) -> dict:
        return {"architecture": self.architecture,
                "hidden_sizes": list(self.hidden_sizes),
                "output_width": self.output_width,
                "in_features": self.in_features,
                "kernel_size": self.kernel_size,
                "padding": self.padding,
                "seed": self.seed,
                "precision": self.precision}

    @classmethod
    def from_json(cls, obj: dict) -> "NetworkConfig":
        return cls(architecture=obj["architecture"],
                   hidden_sizes=tuple(obj["hidden_sizes"]),
                   output_width=int(obj["output_width"]),
                   in_features=int(obj["in_features"]),
                   kernel_size=int(obj["kernel_size"]),
                   padding=obj["padding"],
                   seed=int(obj["seed"]),
                   precision=obj["precision"])


class Network:
    """Stateless layer stack; parameters travel in a dict alongside it."""

    def __init__(self, config: NetworkConfig):
        self.config = config
        self.dtype = PRECISIONS[config.precision]
        layers = []
        fan = config.in_features
        if config.architecture == "lstm":
            for idx, width in enumerate(config.hidden_sizes):
                layers.append(LstmLayer(f"lstm{idx}", fan, width))
                fan = width
            layers.append(DenseLayer("head", fan, config.output_width))
        else:
            widths = config.hidden_sizes + (config.output_width,)
            for idx, width in enumerate(widths):
                layers.append(ConvLstmLayer(f"conv{idx}", fan, width,
                                            config.kernel_size, config.padding))
                fan = width
            layers.append(GlobalMaxPool())
        self.layers = layers

    def param_shapes(self) -> dict:
        shapes = {}
        for layer in self.layers:
            shapes.update(layer.param_shapes())
        return shapes

    def init_params(self, seed: int | None = None) -> dict:
        rng = np.random.default_rng(self.config.seed if seed is None else seed)
        params = {}
        for layer in self.layers:
            params.update(layer.init(rng))
        return {k: v.astype(self.dtype) for k, v in params.items()}

    def _check_input(self, x: np.ndarray):
        want = 3 if self.config.architecture == "lstm" else 4
        if x.ndim != want or x.shape[-1] != self.config.in_features:
            raise ValidationError(
                f"{self.config.architecture} expects {want}-d input with "
                f"{self.config.in_features} trailing features, got shape {x.shape}")

    def forward(self, params: dict, x: np.ndarray):
        self._check_input(x)
        x = np.ascontiguousarray(x, dtype=self.dtype)
        tape = []
        for layer in self.layers:
            x, cache = layer.forward(params, x)
            tape.append(cache)
        return x, tape

    def predict(self, params: dict, x: np.ndarray) -> np.ndarray:
        y, _ = self.forward(params, x)
        return y

    def backward(self, params: dict, tape: list, dy: np.ndarray) -> dict:
        grads = {}
        for layer, cache in zip(reversed(self.layers), reversed(tape)):
            dy, layer_grads = layer.backward(params, cache, dy)
            grads.update(layer_grads)
        # every parameter gets a gradient entry, zero when it saw no signal
        for name, shape in self.param_shapes().items():
            if name not in grads:
                grads[name] = np.zeros(shape, dtype=self.dtype)
        return grads


def mse_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean over every axis (samples, depths, channels) of squared error."""
    if pred.shape != target.shape:
        raise ValidationError(f"shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred - target
    return float(np.mean(diff * diff))


@dataclass
class LossNode:
    """Recorded forward pass; ``backward`` releases gradients for all params."""

    value: float
    prediction: np.ndarray
    _pull: object = field(repr=False)

    def backward(self) -> dict:
        return self._pull()


def loss_node(net: Network, params: dict, x: np.ndarray, target: np.ndarray) -> LossNode:
    pred, tape = net.forward(params, x)
    target = np.asarray(target, dtype=pred.dtype)
    if pred.shape != target.shape:
        raise ValidationError(
            f"prediction shape {pred.shape} does not match target {target.shape}")
    diff = pred - target
    value = float(np.mean(diff * diff))

    def _pull():
        return net.backward(params, tape, (2.0 / diff.size) * diff)

    return LossNode(value=value, prediction=pred, _pull=_pull)


def backward(node: LossNode) -> dict:
    """Reverse-mode gradients of the recorded loss w.r.t. every parameter."""
    return node.backward()
