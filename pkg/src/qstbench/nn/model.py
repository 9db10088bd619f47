"""Convolutional tau regressor, its backpropagation and Adagrad training.

Layer stack over the ``6**d`` measurement vector (treated as a 1-channel
sequence)::

    conv(k, same, ReLU) -> maxpool -> conv(k, same, ReLU) -> flatten
    -> dense(ReLU) -> dropout -> dense(ReLU) -> dropout -> dense(4**d, linear)

The linear output is the predicted tau vector. Density matrices are obtained
from it with :func:`qstbench.qstate.density_from_tau`, which has no trainable
parameters.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from qstbench.errors import DimensionError
from qstbench.measurement import MeasurementRecord
from qstbench.nn import layers
from qstbench.qstate import check_qubits, density_from_tau, fidelity
from qstbench.seeds import split_seed

ADAGRAD_EPS = 1e-8

_WIDTHS = {
    1: (8, 16, 64, 32),
    2: (16, 32, 128, 64),
    3: (16, 32, 256, 128),
    4: (32, 64, 512, 256),
}


@dataclass(frozen=True)
class NetworkConfig:
    d: int
    conv1_filters: int
    conv2_filters: int
    dense1_units: int
    dense2_units: int
    kernel_size: int = 3
    pool_size: int = 2
    dropout_rate: float = 0.2
    learning_rate: float = 0.01
    batch_size: int = 4
    epochs: int = 60
    seed: int = 0

    def __post_init__(self):
        check_qubits(self.d)
        sizes = (self.conv1_filters, self.conv2_filters, self.dense1_units,
                 self.dense2_units, self.kernel_size, self.pool_size)
        if min(sizes) < 1:
            raise ValueError("all layer sizes must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0 or self.seed < 0:
            raise ValueError("epochs and seed must be non-negative")

    @classmethod
    def default(cls, d: int, **overrides) -> "NetworkConfig":
        """Per-qubit-count defaults; larger ``d`` reuses the d=4 widths."""
        d = check_qubits(d)
        c1, c2, h1, h2 = _WIDTHS[min(d, 4)]
        params = dict(d=d, conv1_filters=c1, conv2_filters=c2, dense1_units=h1, dense2_units=h2)
        params.update(overrides)
        return cls(**params)

    def with_overrides(self, **overrides) -> "NetworkConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def input_length(self) -> int:
        return 6**self.d

    @property
    def output_length(self) -> int:
        return 4**self.d


@dataclass(frozen=True)
class LayerSpec:
    name: str
    kind: str
    output_shape: tuple
    params: dict = field(default_factory=dict)  # parameter name -> shape

    @property
    def trainable(self) -> int:
        return int(sum(np.prod(s) for s in self.params.values()))


def architecture(config: NetworkConfig) -> list[LayerSpec]:
    """Layer plan with output and parameter shapes; allocates nothing.

    Raises:
        ValueError: the pooled sequence is shorter than the kernel.
    """
    length = config.input_length
    k = config.kernel_size
    c1, c2 = config.conv1_filters, config.conv2_filters
    pooled = length // config.pool_size
    if pooled < k:
        raise ValueError(
            f"pooled length {pooled} is shorter than kernel_size {k} for d={config.d}"
        )
    flat = pooled * c2
    h1, h2, out = config.dense1_units, config.dense2_units, config.output_length
    return [
        LayerSpec("input", "input", (length, 1)),
        LayerSpec("conv1", "conv1d+relu", (length, c1),
                  {"conv1.weight": (k, 1, c1), "conv1.bias": (c1,)}),
        LayerSpec("pool", "maxpool", (pooled, c1)),
        LayerSpec("conv2", "conv1d+relu", (pooled, c2),
                  {"conv2.weight": (k, c1, c2), "conv2.bias": (c2,)}),
        LayerSpec("flatten", "flatten", (flat,)),
        LayerSpec("dense1", "dense+relu", (h1,),
                  {"dense1.weight": (flat, h1), "dense1.bias": (h1,)}),
        LayerSpec("dropout1", "dropout", (h1,)),
        LayerSpec("dense2", "dense+relu", (h2,),
                  {"dense2.weight": (h1, h2), "dense2.bias": (h2,)}),
        LayerSpec("dropout2", "dropout", (h2,)),
        LayerSpec("output", "dense", (out,),
                  {"output.weight": (h2, out), "output.bias": (out,)}),
        LayerSpec("density", "tau->rho", (2**config.d, 2**config.d)),
    ]


def parameter_shapes(config: NetworkConfig) -> dict[str, tuple]:
    shapes = {}
    for spec in architecture(config):
        shapes.update(spec.params)
    return shapes


@dataclass
class ModelParams:
    """Network weights, Adagrad accumulators and training history."""

    config: NetworkConfig
    params: dict[str, np.ndarray]
    accumulators: dict[str, np.ndarray]
    history: list[dict] = field(default_factory=list)

    def __post_init__(self):
        shapes = parameter_shapes(self.config)
        for group in (self.params, self.accumulators):
            if set(group) != set(shapes):
                raise ValueError(f"parameter names {sorted(group)} do not match the architecture")
            for name, shape in shapes.items():
                if group[name].shape != tuple(shape):
                    raise ValueError(f"{name} has shape {group[name].shape}, expected {shape}")

    @property
    def d(self) -> int:
        return self.config.d


def init_model(config: NetworkConfig, rng=None) -> ModelParams:
    """Glorot-uniform weights, zero biases, zero accumulators."""
    if rng is None:
        rng = np.random.default_rng(split_seed(config.seed, 0))
    params = {}
    for name, shape in parameter_shapes(config).items():
        if name.endswith(".bias"):
            params[name] = np.zeros(shape)
        elif name.startswith("conv"):
            k, cin, cout = shape
            params[name] = layers.glorot_uniform(shape, k * cin, k * cout, rng)
        else:
            params[name] = layers.glorot_uniform(shape, shape[0], shape[1], rng)
    accumulators = {name: np.zeros_like(value) for name, value in params.items()}
    return ModelParams(config=config, params=params, accumulators=accumulators)


def zero_model(config: NetworkConfig) -> ModelParams:
    params = {name: np.zeros(shape) for name, shape in parameter_shapes(config).items()}
    return ModelParams(config, params, {n: np.zeros_like(v) for n, v in params.items()})


def _as_batch(model: ModelParams, inputs) -> np.ndarray:
    x = np.asarray(inputs, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.config.input_length:
        raise DimensionError(
            f"expected inputs of length {model.config.input_length}, got shape {np.shape(inputs)}"
        )
    return x


def forward_batch(model: ModelParams, inputs, training: bool = False, rng=None):
    """Run the network on a ``(batch, 6**d)`` array.

    Returns ``(taus, cache)``; ``cache`` feeds :func:`backward_batch`.
    Dropout is active only when ``training`` is true, which requires ``rng``.
    """
    cfg = model.config
    p = model.params
    x = _as_batch(model, inputs)
    rate = cfg.dropout_rate if training else 0.0
    if rate > 0 and rng is None:
        raise ValueError("training mode with dropout needs a random generator")

    a0 = x[:, :, None]
    z1, cols1 = layers.conv1d_forward(a0, p["conv1.weight"], p["conv1.bias"])
    a1 = layers.relu(z1)
    a2, argmax = layers.maxpool_forward(a1, cfg.pool_size)
    z3, cols3 = layers.conv1d_forward(a2, p["conv2.weight"], p["conv2.bias"])
    a3 = layers.relu(z3)
    flat = a3.reshape(a3.shape[0], -1)
    z4 = layers.dense_forward(flat, p["dense1.weight"], p["dense1.bias"])
    mask4 = layers.dropout_mask(z4.shape, rate, rng)
    a4 = layers.relu(z4) if mask4 is None else layers.relu(z4) * mask4
    z5 = layers.dense_forward(a4, p["dense2.weight"], p["dense2.bias"])
    mask5 = layers.dropout_mask(z5.shape, rate, rng)
    a5 = layers.relu(z5) if mask5 is None else layers.relu(z5) * mask5
    out = layers.dense_forward(a5, p["output.weight"], p["output.bias"])
    cache = dict(a0=a0, z1=z1, cols1=cols1, a1=a1, argmax=argmax, a2=a2, z3=z3,
                 cols3=cols3, a3=a3, flat=flat, z4=z4, mask4=mask4, a4=a4,
                 z5=z5, mask5=mask5, a5=a5)
    return out, cache


def backward_batch(model: ModelParams, cache: dict, dout) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss given its gradient ``dout`` at the output."""
    p = model.params
    c = cache
    grads = {}
    da5, grads["output.weight"], grads["output.bias"] = layers.dense_backward(dout, c["a5"], p["output.weight"])
    if c["mask5"] is not None:
        da5 = da5 * c["mask5"]
    dz5 = da5 * (c["z5"] > 0)
    da4, grads["dense2.weight"], grads["dense2.bias"] = layers.dense_backward(dz5, c["a4"], p["dense2.weight"])
    if c["mask4"] is not None:
        da4 = da4 * c["mask4"]
    dz4 = da4 * (c["z4"] > 0)
    dflat, grads["dense1.weight"], grads["dense1.bias"] = layers.dense_backward(dz4, c["flat"], p["dense1.weight"])
    dz3 = dflat.reshape(c["a3"].shape) * (c["z3"] > 0)
    da2, grads["conv2.weight"], grads["conv2.bias"] = layers.conv1d_backward(
        dz3, c["cols3"], p["conv2.weight"], c["a2"].shape)
    da1 = layers.maxpool_backward(da2, c["argmax"], c["a1"].shape, model.config.pool_size)
    dz1 = da1 * (c["z1"] > 0)
    _, grads["conv1.weight"], grads["conv1.bias"] = layers.conv1d_backward(
        dz1, c["cols1"], p["conv1.weight"], c["a0"].shape)
    return grads


def forward(model: ModelParams, inputs, training_mode: bool = False, rng=None) -> np.ndarray:
    """Predicted tau vector for a single ``6**d`` input vector."""
    x = np.asarray(inputs, dtype=float)
    if x.ndim != 1:
        raise DimensionError(f"forward expects a single vector, got shape {x.shape}")
    out, _ = forward_batch(model, x, training=training_mode, rng=rng)
    return out[0]


def loss_mse(predicted, target) -> float:
    predicted = np.asarray(predicted, dtype=float)
    target = np.asarray(target, dtype=float)
    if predicted.shape != target.shape:
        raise DimensionError(f"shape mismatch: {predicted.shape} vs {target.shape}")
    return float(np.mean((predicted - target) ** 2))


def backward(model: ModelParams, inputs, targets, rng=None, training: bool = True):
    """Loss and gradients of the mean batch MSE for every weight.

    Dropout is applied when ``training`` is true and ``rng`` is given.

    Returns:
        ``(loss, grads)`` with ``grads`` keyed like ``model.params``.

    Raises:
        FloatingPointError: non-finite activations or loss.
    """
    targets = np.asarray(targets, dtype=float)
    x = _as_batch(model, inputs)
    if targets.ndim == 1:
        targets = targets[None, :]
    if x.shape[0] == 0:
        raise ValueError("empty batch")
    if targets.shape != (x.shape[0], model.config.output_length):
        raise DimensionError(f"targets have shape {targets.shape}")
    use_dropout = training and rng is not None
    out, cache = forward_batch(model, x, training=use_dropout, rng=rng)
    resid = out - targets
    loss = float(np.mean(resid * resid))
    if not np.isfinite(loss):
        raise FloatingPointError("non-finite loss in backward pass")
    grads = backward_batch(model, cache, 2.0 * resid / resid.size)
    return loss, grads


def adagrad_step(model: ModelParams, grads: dict, learning_rate: float) -> ModelParams:
    """Adagrad update, in place: ``G += g**2; w -= lr * g / (sqrt(G) + 1e-8)``."""
    for name, g in grads.items():
        acc = model.accumulators[name]
        if g.shape != acc.shape:
            raise DimensionError(f"gradient for {name} has shape {g.shape}, expected {acc.shape}")
        acc += g * g
        model.params[name] -= learning_rate * g / (np.sqrt(acc) + ADAGRAD_EPS)
    return model


def predict_taus(model: ModelParams, inputs, chunk: int = 256) -> np.ndarray:
    x = _as_batch(model, inputs)
    return np.concatenate(
        [forward_batch(model, x[i : i + chunk])[0] for i in range(0, len(x), chunk)]
    ) if len(x) else np.zeros((0, model.config.output_length))


def predict_density(model: ModelParams, record: MeasurementRecord) -> np.ndarray:
    """Inference-mode forward pass followed by the tau -> rho head."""
    if record.d != model.config.d:
        raise DimensionError(f"model expects d={model.config.d}, record has d={record.d}")
    return density_from_tau(forward(model, record.values))


def mean_fidelity(model: ModelParams, dataset) -> float:
    """Mean fidelity of predictions against the dataset's target taus."""
    if len(dataset) == 0:
        return float("nan")
    taus = predict_taus(model, dataset.measurements)
    fids = [fidelity(density_from_tau(t), density_from_tau(target))
            for t, target in zip(taus, dataset.taus)]
    return float(np.mean(fids))


def train(
    dataset,
    validation,
    config: NetworkConfig,
    on_epoch: Callable[[dict], None] | None = None,
) -> ModelParams:
    """Minibatch Adagrad on the MSE between predicted and target taus.

    Each epoch reshuffles with a generator seeded from ``config.seed``; the
    epoch's train loss, validation mean fidelity and wall time are appended
    to ``model.history`` and passed to ``on_epoch``.

    Raises:
        FloatingPointError: the loss became non-finite.
    """
    if len(dataset) == 0:
        raise ValueError("training dataset is empty")
    for name, ds in (("training", dataset), ("validation", validation)):
        if ds is not None and ds.d != config.d:
            raise DimensionError(f"{name} data has d={ds.d} but config has d={config.d}")

    model = init_model(config)
    rng = np.random.default_rng(split_seed(config.seed, 1))
    x_all, t_all = dataset.measurements, dataset.taus
    n = len(dataset)
    bs = config.batch_size

    for epoch in range(1, config.epochs + 1):
        start = time.perf_counter()
        order = rng.permutation(n)
        total = 0.0
        for b, i in enumerate(range(0, n, bs)):
            idx = order[i : i + bs]
            try:
                loss, grads = backward(model, x_all[idx], t_all[idx], rng=rng)
            except FloatingPointError as exc:
                raise FloatingPointError(f"epoch {epoch}, batch {b}: {exc}") from exc
            adagrad_step(model, grads, config.learning_rate)
            total += loss * len(idx)
        elapsed = time.perf_counter() - start
        val_fid = mean_fidelity(model, validation) if validation is not None else float("nan")
        entry = {"epoch": epoch, "loss": total / n, "val_fidelity": val_fid, "seconds": elapsed}
        model.history.append(entry)
        if on_epoch is not None:
            on_epoch(entry)
    return model
