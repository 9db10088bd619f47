"""Convolutional network that maps tomography vectors to tau vectors."""

from qstbench.nn.data import Dataset, Provenance, generate_dataset
from qstbench.nn.model import (
    LayerSpec,
    ModelParams,
    NetworkConfig,
    adagrad_step,
    architecture,
    backward,
    forward,
    forward_batch,
    init_model,
    loss_mse,
    mean_fidelity,
    predict_density,
    predict_taus,
    train,
    zero_model,
)

__all__ = [
    "Dataset",
    "LayerSpec",
    "ModelParams",
    "NetworkConfig",
    "Provenance",
    "adagrad_step",
    "architecture",
    "backward",
    "forward",
    "forward_batch",
    "generate_dataset",
    "init_model",
    "loss_mse",
    "mean_fidelity",
    "predict_density",
    "predict_taus",
    "train",
    "zero_model",
]
