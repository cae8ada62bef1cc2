from .layers import ConvLstmLayer, DenseLayer, GlobalMaxPool, LstmLayer
from .network import (
    ARCHITECTURES,
    LossNode,
    Network,
    NetworkConfig,
    backward,
    loss_node,
    mse_loss,
)
from .optim import AdamConfig, ModelState, adam_step, clip_by_global_norm, global_norm
from .serialize import MODEL_FORMAT, load_model, save_model

__all__ = [
    "ARCHITECTURES",
    "AdamConfig",
    "ConvLstmLayer",
    "DenseLayer",
    "GlobalMaxPool",
    "LossNode",
    "LstmLayer",
    "MODEL_FORMAT",
    "ModelState",
    "Network",
    "NetworkConfig",
    "adam_step",
    "backward",
    "clip_by_global_norm",
    "global_norm",
    "load_model",
    "loss_node",
    "mse_loss",
    "save_model",
]
