"""Adam optimization, stratified splitting, the training loop, and checkpoints."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import network as N
from . import tensor as T
from .dataset import LABELS, DatasetManifest, assign_splits
from .errors import ConfigurationError, FormatError, NumericError

CHECKPOINT_MAGIC = b"MNET0001"


@dataclass
class TrainConfig:
    epochs: int = 10
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 32
    dropout_rate: float = 0.5
    seed: int = 0
    split_fractions: tuple[float, float] = (0.70, 0.30)
    checkpoint_path: str | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ConfigurationError(
                f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigurationError(
                f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        if not 0.0 < self.beta1 < 1.0 or not 0.0 < self.beta2 < 1.0:
            raise ConfigurationError(
                f"betas must lie in (0, 1), got {self.beta1}, {self.beta2}")
        if self.epsilon <= 0:
            raise ConfigurationError(f"epsilon must be positive, got {self.epsilon}")
        if abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise ConfigurationError(
                f"split fractions must sum to 1, got {self.split_fractions}")
        if min(self.split_fractions) < 0:
            raise ConfigurationError(
                f"split fractions must be non-negative, got {self.split_fractions}")


@dataclass
class AdamState:
    """First/second moment tensors parallel to the parameter list, plus step t."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros(cls, params: list[np.ndarray]) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params], t=0)


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState,
              config: TrainConfig, names: list[str] | None = None) -> None:
    """One in-place Adam update; t increments before bias correction."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ConfigurationError(
            f"adam_step given {len(params)} params, {len(grads)} grads, "
            f"{len(state.m)} moment tensors")
    state.t += 1
    b1, b2 = config.beta1, config.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ConfigurationError(
                f"gradient shape {g.shape} does not match parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            where = names[i] if names else f"parameter {i}"
            raise NumericError(f"non-finite gradient in {where} at step {state.t}")
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g
        m_hat = state.m[i] / bc1
        v_hat = state.v[i] / bc2
        p -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon)


def largest_remainder(total: int, fractions) -> list[int]:
    """Integer bucket sizes summing to total; ties favor earlier buckets."""
    exact = [total * f for f in fractions]
    base = [int(np.floor(e)) for e in exact]
    leftover = total - sum(base)
    order = sorted(range(len(fractions)),
                   key=lambda i: (-(exact[i] - base[i]), i))
    for i in order[:leftover]:
        base[i] += 1
    return base


def split_dataset(manifest: DatasetManifest, fractions: tuple[float, float],
                  seed: int) -> DatasetManifest:
    """Stratified train/val assignment via a seeded shuffle within each class."""
    if abs(sum(fractions) - 1.0) > 1e-9 or min(fractions) < 0:
        raise ConfigurationError(f"split fractions must be non-negative and sum to 1, "
                                 f"got {fractions}")
    by_label: dict[str, list[str]] = {label: [] for label in LABELS}
    for rec in manifest.records:
        by_label[rec.label].append(rec.path)
    empty = [label for label, paths in by_label.items() if not paths]
    if empty:
        raise ConfigurationError(
            f"cannot split: class(es) with zero samples: {', '.join(empty)}")

    rng = np.random.default_rng(seed)
    assignment: dict[str, str] = {}
    for label in LABELS:
        paths = by_label[label]
        n_train, _ = largest_remainder(len(paths), fractions)
        order = rng.permutation(len(paths))
        for rank, idx in enumerate(order):
            assignment[paths[idx]] = "train" if rank < n_train else "val"
    return assign_splits(manifest, assignment)


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float


def curves_csv(logs: list[EpochLog]) -> str:
    """Epoch-log CSV with full-precision floats so reruns match byte-for-byte."""
    lines = ["epoch,train_loss,train_acc,val_loss,val_acc"]
    for log in logs:
        lines.append(f"{log.epoch},{log.train_loss!r},{log.train_acc!r},"
                     f"{log.val_loss!r},{log.val_acc!r}")
    return "\n".join(lines) + "\n"


def _evaluate(model: N.NetworkModel, samples) -> tuple[float, float]:
    """Mean cross-entropy and accuracy over samples with dropout disabled."""
    k = N.propagate_shapes(model.layers, model.input_shape)[-1][0]
    total_loss = 0.0
    correct = 0
    for x, y in samples:
        probs, _ = N.forward(model, x, training=False)
        total_loss += T.cross_entropy(probs, T.one_hot(int(y), k))
        correct += int(np.argmax(probs)) == int(y)
    n = len(samples)
    return float(total_loss / n), float(correct / n)


def train(model: N.NetworkModel, train_set, val_set,
          config: TrainConfig) -> tuple[N.NetworkModel, list[EpochLog]]:
    """Seeded mini-batch training with best-validation checkpointing.

    train_set/val_set are sequences of (input array, class index). The model is
    updated in place; when config.checkpoint_path is set, the file always holds
    the parameters of the best validation accuracy seen so far (ties keep the
    earlier epoch).
    """
    if len(train_set) == 0:
        raise ConfigurationError("training split is empty")
    if len(val_set) == 0:
        raise ConfigurationError("validation split is empty")
    k = N.propagate_shapes(model.layers, model.input_shape)[-1][0]
    present = {int(y) for _, y in train_set}
    missing = sorted(set(range(k)) - present)
    if missing:
        raise ConfigurationError(
            f"training split lacks samples for class index(es) {missing}")

    params = model.parameter_tensors()
    names = model.parameter_names()
    state = AdamState.zeros(params)
    rng = np.random.default_rng(config.seed)
    best_acc = -np.inf
    logs: list[EpochLog] = []

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train_set))
        batch_losses = []
        correct = 0
        for b_start in range(0, len(order), config.batch_size):
            batch = order[b_start:b_start + config.batch_size]
            sums = [np.zeros_like(p) for p in params]
            loss_sum = 0.0
            for idx in batch:
                x, y = train_set[idx]
                probs, cache = N.forward(model, x, training=True, rng=rng)
                one_hot = T.one_hot(int(y), k)
                loss_sum += T.cross_entropy(probs, one_hot)
                correct += int(np.argmax(probs)) == int(y)
                grads = N.backward(model, cache, one_hot)
                j = 0
                for g in grads:
                    if g is not None:
                        sums[j] += g[0]
                        sums[j + 1] += g[1]
                        j += 2
            batch_loss = loss_sum / len(batch)
            if not np.isfinite(batch_loss):
                raise NumericError(
                    f"non-finite training loss at epoch {epoch}, "
                    f"batch {b_start // config.batch_size + 1}")
            batch_losses.append(batch_loss)
            averaged = [s / len(batch) for s in sums]
            adam_step(params, averaged, state, config, names)

        train_loss = float(np.mean(batch_losses))
        train_acc = correct / len(train_set)
        val_loss, val_acc = _evaluate(model, val_set)
        logs.append(EpochLog(epoch=epoch, train_loss=train_loss,
                             train_acc=train_acc, val_loss=val_loss,
                             val_acc=val_acc))
        if val_acc > best_acc:
            best_acc = val_acc
            if config.checkpoint_path:
                save_checkpoint(config.checkpoint_path,
                                checkpoint_from_model(model, state, best_acc, epoch))
    return model, logs


# --- checkpoint codec ---------------------------------------------------------
#
# Layout (little-endian): magic "MNET0001"; u32 layer count; per layer a u8
# kind tag plus u32 kind parameters; each parameter tensor as u32 rank,
# u32 extents, raw float64 values; Adam first moments, then second moments, in
# the same tensor scheme; u64 step counter; f64 best validation accuracy;
# u32 epoch index. The dropout rate rides as integer parts-per-billion.

_TAG_CONV, _TAG_RELU, _TAG_MAXPOOL, _TAG_ZEROPAD = 1, 2, 3, 4
_TAG_FLATTEN, _TAG_DROPOUT, _TAG_DENSE, _TAG_SOFTMAX = 5, 6, 7, 8


@dataclass
class Checkpoint:
    layers: list
    params: list[np.ndarray]
    adam_m: list[np.ndarray]
    adam_v: list[np.ndarray]
    step: int
    best_val_accuracy: float
    epoch: int


def checkpoint_from_model(model: N.NetworkModel, state: AdamState,
                          best_val_accuracy: float, epoch: int) -> Checkpoint:
    return Checkpoint(layers=list(model.layers),
                      params=[p.copy() for p in model.parameter_tensors()],
                      adam_m=[m.copy() for m in state.m],
                      adam_v=[v.copy() for v in state.v],
                      step=state.t, best_val_accuracy=float(best_val_accuracy),
                      epoch=int(epoch))


def model_from_checkpoint(ckpt: Checkpoint,
                          input_shape: tuple = N.INPUT_SHAPE) -> N.NetworkModel:
    """Rebuild a model around checkpoint tensors (input shape is not stored)."""
    model = N.build_model(ckpt.layers, input_shape, seed=0)
    it = iter(ckpt.params)
    for i, layer in enumerate(model.layers):
        if N.layer_param_shapes(layer):
            model.params[i] = (next(it).copy(), next(it).copy())
    return model


def adam_state_from_checkpoint(ckpt: Checkpoint) -> AdamState:
    return AdamState(m=[m.copy() for m in ckpt.adam_m],
                     v=[v.copy() for v in ckpt.adam_v], t=ckpt.step)


def _encode_layer(layer) -> bytes:
    u32 = lambda *vs: struct.pack("<" + "I" * len(vs), *vs)
    if isinstance(layer, N.ConvLayer):
        s = layer.spec
        return struct.pack("<B", _TAG_CONV) + u32(
            s.kernel_h, s.kernel_w, s.stride, s.in_channels, s.out_channels)
    if isinstance(layer, N.ReluLayer):
        return struct.pack("<B", _TAG_RELU)
    if isinstance(layer, N.MaxPoolLayer):
        return struct.pack("<B", _TAG_MAXPOOL) + u32(layer.spec.window, layer.spec.stride)
    if isinstance(layer, N.ZeroPadLayer):
        return struct.pack("<B", _TAG_ZEROPAD) + u32(layer.pad)
    if isinstance(layer, N.FlattenLayer):
        return struct.pack("<B", _TAG_FLATTEN)
    if isinstance(layer, N.DropoutLayer):
        return struct.pack("<B", _TAG_DROPOUT) + u32(int(round(layer.rate * 1e9)))
    if isinstance(layer, N.DenseLayer):
        return struct.pack("<B", _TAG_DENSE) + u32(layer.in_features, layer.out_features)
    if isinstance(layer, N.SoftmaxLayer):
        return struct.pack("<B", _TAG_SOFTMAX)
    raise ConfigurationError(f"cannot serialize layer {layer!r}")


def _encode_tensor(arr: np.ndarray) -> bytes:
    head = struct.pack("<I", arr.ndim) + struct.pack("<" + "I" * arr.ndim, *arr.shape)
    return head + np.ascontiguousarray(arr, dtype="<f8").tobytes()


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    parts = [CHECKPOINT_MAGIC, struct.pack("<I", len(ckpt.layers))]
    parts.extend(_encode_layer(layer) for layer in ckpt.layers)
    for group in (ckpt.params, ckpt.adam_m, ckpt.adam_v):
        parts.extend(_encode_tensor(t) for t in group)
    parts.append(struct.pack("<Q", ckpt.step))
    parts.append(struct.pack("<d", ckpt.best_val_accuracy))
    parts.append(struct.pack("<I", ckpt.epoch))
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(f"truncated checkpoint while reading {what}", self.pos)
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self, what: str) -> int:
        return self.take(1, what)[0]

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def u64(self, what: str) -> int:
        return struct.unpack("<Q", self.take(8, what))[0]

    def f64(self, what: str) -> float:
        return struct.unpack("<d", self.take(8, what))[0]


def _decode_layer(r: _Reader):
    at = r.pos
    tag = r.u8("layer kind tag")
    if tag == _TAG_CONV:
        kh = r.u32("conv kernel_h")
        kw = r.u32("conv kernel_w")
        stride = r.u32("conv stride")
        cin = r.u32("conv in_channels")
        cout = r.u32("conv out_channels")
        return N.ConvLayer(T.ConvSpec(kh, kw, stride, cin, cout))
    if tag == _TAG_RELU:
        return N.ReluLayer()
    if tag == _TAG_MAXPOOL:
        return N.MaxPoolLayer(T.PoolSpec(r.u32("pool window"), r.u32("pool stride")))
    if tag == _TAG_ZEROPAD:
        return N.ZeroPadLayer(r.u32("pad width"))
    if tag == _TAG_FLATTEN:
        return N.FlattenLayer()
    if tag == _TAG_DROPOUT:
        return N.DropoutLayer(r.u32("dropout rate (ppb)") / 1e9)
    if tag == _TAG_DENSE:
        return N.DenseLayer(r.u32("dense in"), r.u32("dense out"))
    if tag == _TAG_SOFTMAX:
        return N.SoftmaxLayer()
    raise FormatError(f"unknown layer kind tag {tag}", at)


def _decode_tensor(r: _Reader, expected_shape: tuple, what: str) -> np.ndarray:
    at = r.pos
    rank = r.u32(f"{what} rank")
    if rank != len(expected_shape):
        raise FormatError(
            f"{what}: rank {rank} does not match layer spec rank {len(expected_shape)}", at)
    shape = tuple(r.u32(f"{what} extent") for _ in range(rank))
    if shape != tuple(expected_shape):
        raise FormatError(
            f"{what}: extents {shape} do not match layer spec {tuple(expected_shape)}", at)
    count = int(np.prod(shape)) if shape else 1
    raw = r.take(8 * count, f"{what} values")
    return np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        data = fh.read()
    r = _Reader(data)
    magic = r.take(len(CHECKPOINT_MAGIC), "magic")
    if magic != CHECKPOINT_MAGIC:
        raise FormatError(
            f"bad checkpoint magic {magic!r}; expected {CHECKPOINT_MAGIC!r}", 0)
    n_layers = r.u32("layer count")
    layers = [_decode_layer(r) for _ in range(n_layers)]
    shapes = [s for layer in layers for s in N.layer_param_shapes(layer)]
    groups = []
    for group_name in ("parameter", "adam m", "adam v"):
        groups.append([_decode_tensor(r, shape, f"{group_name} tensor {i}")
                       for i, shape in enumerate(shapes)])
    step = r.u64("step counter")
    best = r.f64("best validation accuracy")
    epoch = r.u32("epoch index")
    if r.pos != len(data):
        raise FormatError("trailing bytes after checkpoint payload", r.pos)
    return Checkpoint(layers=layers, params=groups[0], adam_m=groups[1],
                      adam_v=groups[2], step=step, best_val_accuracy=best,
                      epoch=epoch)
