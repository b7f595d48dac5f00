"""Layer-graph assembly, the reference architecture, and whole-model forward/backward."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import DimensionError, StateError

INPUT_SHAPE = (225, 225, 3)
NUM_CLASSES = 3


@dataclass(frozen=True)
class ConvLayer:
    spec: T.ConvSpec


@dataclass(frozen=True)
class ReluLayer:
    pass


@dataclass(frozen=True)
class MaxPoolLayer:
    spec: T.PoolSpec


@dataclass(frozen=True)
class ZeroPadLayer:
    pad: int


@dataclass(frozen=True)
class FlattenLayer:
    pass


@dataclass(frozen=True)
class DropoutLayer:
    rate: float


@dataclass(frozen=True)
class DenseLayer:
    in_features: int
    out_features: int


@dataclass(frozen=True)
class SoftmaxLayer:
    pass


LayerSpec = (ConvLayer | ReluLayer | MaxPoolLayer | ZeroPadLayer | FlattenLayer
             | DropoutLayer | DenseLayer | SoftmaxLayer)


def layer_output_shape(layer: LayerSpec, shape: tuple) -> tuple:
    """Shape produced by `layer` on an input of `shape`; raises on mismatch."""
    if isinstance(layer, ConvLayer):
        if len(shape) != 3 or shape[2] != layer.spec.in_channels:
            raise DimensionError(f"conv expects (H, W, {layer.spec.in_channels}), got {shape}")
        oh, ow = layer.spec.output_hw(shape[0], shape[1])
        return (oh, ow, layer.spec.out_channels)
    if isinstance(layer, MaxPoolLayer):
        if len(shape) != 3:
            raise DimensionError(f"pool expects rank 3, got {shape}")
        return (layer.spec.output_extent(shape[0]),
                layer.spec.output_extent(shape[1]), shape[2])
    if isinstance(layer, ZeroPadLayer):
        if len(shape) != 3:
            raise DimensionError(f"zero-pad expects rank 3, got {shape}")
        return (shape[0] + 2 * layer.pad, shape[1] + 2 * layer.pad, shape[2])
    if isinstance(layer, FlattenLayer):
        return (int(np.prod(shape)),)
    if isinstance(layer, DenseLayer):
        if shape != (layer.in_features,):
            raise DimensionError(
                f"dense expects ({layer.in_features},), got {shape}")
        return (layer.out_features,)
    if isinstance(layer, (ReluLayer, DropoutLayer)):
        return shape
    if isinstance(layer, SoftmaxLayer):
        if len(shape) != 1 or shape[0] < 2:
            raise DimensionError(f"softmax expects a vector of >= 2 logits, got {shape}")
        return shape
    raise TypeError(f"unknown layer {layer!r}")


def propagate_shapes(layers: list[LayerSpec], input_shape: tuple) -> list[tuple]:
    """Per-layer output shapes, validating compatibility along the way."""
    shapes = []
    shape = tuple(input_shape)
    for layer in layers:
        shape = layer_output_shape(layer, shape)
        shapes.append(shape)
    return shapes


def layer_param_count(layer: LayerSpec) -> int:
    if isinstance(layer, ConvLayer):
        return layer.spec.param_count
    if isinstance(layer, DenseLayer):
        return layer.in_features * layer.out_features + layer.out_features
    return 0


def layer_param_shapes(layer: LayerSpec) -> list[tuple]:
    """Shapes of the layer's trainable tensors (weights, bias), if any."""
    if isinstance(layer, ConvLayer):
        s = layer.spec
        return [(s.kernel_h, s.kernel_w, s.in_channels, s.out_channels),
                (s.out_channels,)]
    if isinstance(layer, DenseLayer):
        return [(layer.in_features, layer.out_features), (layer.out_features,)]
    return []


@dataclass
class NetworkModel:
    """Ordered layer specs plus one (weights, bias) pair per parameterized layer.

    `params` runs parallel to `layers`; entries are None for layers without
    trainable parameters.
    """

    layers: list[LayerSpec]
    params: list[tuple[np.ndarray, np.ndarray] | None]
    input_shape: tuple
    rng_seed: int

    def parameter_tensors(self) -> list[np.ndarray]:
        """All trainable tensors in canonical order (per layer: weights, then bias)."""
        out = []
        for p in self.params:
            if p is not None:
                out.extend(p)
        return out

    def parameter_count(self) -> int:
        return sum(t.size for t in self.parameter_tensors())

    def parameter_names(self) -> list[str]:
        """One name per tensor in parameter_tensors() order, e.g. conv2d_1/weights."""
        counters: dict[str, int] = {}
        names = []
        for layer in self.layers:
            if isinstance(layer, ConvLayer):
                stem = "conv2d"
            elif isinstance(layer, DenseLayer):
                stem = "dense"
            else:
                continue
            counters[stem] = counters.get(stem, 0) + 1
            names.append(f"{stem}_{counters[stem]}/weights")
            names.append(f"{stem}_{counters[stem]}/bias")
        return names


def _he_uniform(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


def build_model(layers: list[LayerSpec], input_shape: tuple, seed: int) -> NetworkModel:
    """Validate layer compatibility and initialize parameters deterministically.

    Conv and dense weights draw from a He-uniform distribution
    (bound sqrt(6/fan_in)); biases start at zero.
    """
    propagate_shapes(layers, input_shape)
    rng = np.random.default_rng(seed)
    params: list[tuple[np.ndarray, np.ndarray] | None] = []
    for layer in layers:
        if isinstance(layer, ConvLayer):
            s = layer.spec
            w = _he_uniform(rng, (s.kernel_h, s.kernel_w, s.in_channels, s.out_channels),
                            fan_in=s.kernel_h * s.kernel_w * s.in_channels)
            params.append((w, np.zeros(s.out_channels)))
        elif isinstance(layer, DenseLayer):
            w = _he_uniform(rng, (layer.in_features, layer.out_features),
                            fan_in=layer.in_features)
            params.append((w, np.zeros(layer.out_features)))
        else:
            params.append(None)
    return NetworkModel(layers=list(layers), params=params,
                        input_shape=tuple(input_shape), rng_seed=seed)


def reference_layers(dropout_rate: float = 0.5) -> list[LayerSpec]:
    """The 225x225x3 -> 3-class reference architecture.

    Kernel sizes, pool windows, and pad widths are the unique solutions to the
    reference layer table's shape arithmetic; see docs/architecture.md.
    """
    return [
        ConvLayer(T.ConvSpec(3, 3, 1, 3, 16)),
        ReluLayer(),
        MaxPoolLayer(T.PoolSpec(3, 3)),
        ConvLayer(T.ConvSpec(3, 3, 1, 16, 32)),
        ReluLayer(),
        MaxPoolLayer(T.PoolSpec(2, 2)),
        ConvLayer(T.ConvSpec(2, 2, 1, 32, 64)),
        ReluLayer(),
        ZeroPadLayer(2),
        MaxPoolLayer(T.PoolSpec(3, 3)),
        ConvLayer(T.ConvSpec(2, 2, 1, 64, 64)),
        ReluLayer(),
        ZeroPadLayer(2),
        MaxPoolLayer(T.PoolSpec(3, 3)),
        FlattenLayer(),
        DropoutLayer(dropout_rate),
        DenseLayer(1600, 256),
        ReluLayer(),
        DenseLayer(256, 128),
        ReluLayer(),
        DenseLayer(128, 64),
        ReluLayer(),
        DenseLayer(64, NUM_CLASSES),
        SoftmaxLayer(),
    ]


def build_reference_model(seed: int, dropout_rate: float = 0.5) -> NetworkModel:
    return build_model(reference_layers(dropout_rate), INPUT_SHAPE, seed)


@dataclass
class ForwardCache:
    """Caller-owned activations saved by forward() for the matching backward()."""

    layer_data: list
    probs: np.ndarray
    training: bool


def forward(model: NetworkModel, inp: np.ndarray, training: bool = False,
            rng: np.random.Generator | None = None) -> tuple[np.ndarray, ForwardCache]:
    """Run the network; returns class probabilities and the activation cache."""
    if inp.shape != model.input_shape:
        raise DimensionError(
            f"model expects input shape {model.input_shape}, received {inp.shape}")
    x = np.asarray(inp, dtype=np.float64)
    data: list = []
    for layer, p in zip(model.layers, model.params):
        if isinstance(layer, ConvLayer):
            data.append(x)
            x = T.conv2d_forward(x, p[0], p[1], layer.spec)
        elif isinstance(layer, ReluLayer):
            data.append(x)
            x = T.relu(x)
        elif isinstance(layer, MaxPoolLayer):
            x, argmax = T.maxpool_forward(x, layer.spec)
            data.append(argmax)
        elif isinstance(layer, ZeroPadLayer):
            data.append(None)
            x = T.zero_pad(x, layer.pad)
        elif isinstance(layer, FlattenLayer):
            data.append(x.shape)
            x = T.flatten(x)
        elif isinstance(layer, DropoutLayer):
            x, mask = T.dropout(x, layer.rate, rng, training)
            data.append(mask)
        elif isinstance(layer, DenseLayer):
            data.append(x)
            x = T.dense_forward(x, p[0], p[1])
        elif isinstance(layer, SoftmaxLayer):
            data.append(None)
            x = T.softmax(x)
    return x, ForwardCache(layer_data=data, probs=x, training=training)


GradientSet = list  # parallel to model.layers; (grad_w, grad_b) or None per layer


def backward(model: NetworkModel, cache: ForwardCache | None,
             one_hot_label: np.ndarray) -> GradientSet:
    """Reverse pass from the fused softmax/cross-entropy gradient.

    Returns one (grad_weights, grad_bias) pair per parameterized layer (None
    for the rest), shaped identically to the parameters.
    """
    if cache is None or not cache.training:
        raise StateError("backward requires the cache of a forward call with training=True")
    if not isinstance(model.layers[-1], SoftmaxLayer):
        raise StateError("backward expects a softmax output layer")

    grads: GradientSet = [None] * len(model.layers)
    g = None
    for i in range(len(model.layers) - 1, -1, -1):
        layer, p, saved = model.layers[i], model.params[i], cache.layer_data[i]
        if isinstance(layer, SoftmaxLayer):
            g = T.softmax_cross_entropy_backward(cache.probs, one_hot_label)
        elif isinstance(layer, DenseLayer):
            g, gw, gb = T.dense_backward(saved, p[0], g)
            grads[i] = (gw, gb)
        elif isinstance(layer, DropoutLayer):
            g = T.dropout_backward(saved, layer.rate, g)
        elif isinstance(layer, FlattenLayer):
            g = g.reshape(saved)
        elif isinstance(layer, ZeroPadLayer):
            pad = layer.pad
            g = g[pad:g.shape[0] - pad, pad:g.shape[1] - pad, :] if pad else g
        elif isinstance(layer, MaxPoolLayer):
            g = T.maxpool_backward(saved, g)
        elif isinstance(layer, ReluLayer):
            g = T.relu_backward(saved, g)
        elif isinstance(layer, ConvLayer):
            g, gw, gb = T.conv2d_backward(saved, p[0], g, layer.spec)
            grads[i] = (gw, gb)
    return grads


_SUMMARY_TYPES = {
    ConvLayer: ("conv2d", "Conv2D"),
    MaxPoolLayer: ("max_pooling2d", "MaxPooling2D"),
    ZeroPadLayer: ("zero_padding2d", "ZeroPadding2D"),
    FlattenLayer: ("flatten", "Flatten"),
    DropoutLayer: ("dropout", "Dropout"),
    DenseLayer: ("dense", "Dense"),
}


def render_summary(model: NetworkModel) -> str:
    """Plain-text layer table: name, output shape, parameter count, and totals.

    Activation layers (relu, softmax) are omitted, following the convention of
    mainstream framework summaries.
    """
    shapes = propagate_shapes(model.layers, model.input_shape)
    counters: dict[str, int] = {}
    rows = []
    for layer, shape in zip(model.layers, shapes):
        entry = _SUMMARY_TYPES.get(type(layer))
        if entry is None:
            continue
        stem, type_name = entry
        counters[stem] = counters.get(stem, 0) + 1
        name = f"{stem}_{counters[stem]} ({type_name})"
        shape_str = "(None, " + ", ".join(str(e) for e in shape) + ")"
        rows.append((name, shape_str, layer_param_count(layer)))

    name_w = max(len(r[0]) for r in rows) + 2
    shape_w = max(len(r[1]) for r in rows) + 2
    lines = [
        f"{'Layer (type)':<{name_w}}{'Output Shape':<{shape_w}}Param #",
        "=" * (name_w + shape_w + 10),
    ]
    for name, shape_str, count in rows:
        lines.append(f"{name:<{name_w}}{shape_str:<{shape_w}}{count}")
    total = model.parameter_count()
    lines.append("=" * (name_w + shape_w + 10))
    lines.append(f"Total params: {total:,}")
    lines.append(f"Trainable params: {total:,}")
    lines.append("Non-trainable params: 0")
    return "\n".join(lines)
