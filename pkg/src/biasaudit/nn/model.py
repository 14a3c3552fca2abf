"""The six-emotion CNN: 5 conv, 3 max-pool, 2 fully connected layers."""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field

import numpy as np

from ..dataset import EmotionLabel, NUM_CLASSES
from ..errors import InvalidConfig, LabelOutOfRange, ShapeMismatch
from . import layers


@dataclass(frozen=True)
class ConvSpec:
    out_channels: int
    kernel: int = 3
    stride: int = 1


def _as_conv_spec(c) -> ConvSpec:
    if isinstance(c, ConvSpec):
        return c
    if isinstance(c, (int, np.integer)):
        return ConvSpec(int(c))
    return ConvSpec(*c)


def _desk_convs():
    return tuple(ConvSpec(c) for c in (8, 8, 16, 16, 32))


@dataclass(frozen=True)
class NetConfig:
    input_size: int = 48
    conv_specs: tuple[ConvSpec, ...] = field(default_factory=_desk_convs)
    pool_after: tuple[int, ...] = (0, 1, 3)   # 0-based conv indices
    fc1_units: int = 64
    dropout_rate: float = 0.5
    num_classes: int = NUM_CLASSES

    def __post_init__(self):
        object.__setattr__(self, "conv_specs", tuple(_as_conv_spec(c) for c in self.conv_specs))
        object.__setattr__(self, "pool_after", tuple(sorted(self.pool_after)))

    @classmethod
    def full_size(cls) -> "NetConfig":
        """150x150 input, otherwise the desk defaults."""
        return cls(input_size=150)

    def validate(self) -> None:
        if len(self.conv_specs) != 5:
            raise InvalidConfig(f"need exactly 5 conv layers, got {len(self.conv_specs)}")
        if len(set(self.pool_after)) != 3 or not all(0 <= i < 5 for i in self.pool_after):
            raise InvalidConfig(f"need 3 distinct pool placements in 0..4, got {self.pool_after}")
        if self.num_classes != NUM_CLASSES:
            raise InvalidConfig("num_classes is fixed at 6")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise InvalidConfig(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.fc1_units <= 0 or self.input_size <= 0:
            raise InvalidConfig("fc1_units and input_size must be positive")
        for c in self.conv_specs:
            if c.out_channels <= 0 or c.kernel <= 0 or c.stride <= 0:
                raise InvalidConfig(f"bad conv spec {c}")
        self.feature_shape()

    def feature_shape(self) -> tuple[int, int, int]:
        """Spatial size and channels entering the first FC layer."""
        size = self.input_size
        for i, c in enumerate(self.conv_specs):
            if size < 1:
                raise InvalidConfig(f"spatial size collapses before conv {i + 1}")
            size = (size - 1) // c.stride + 1
            if i in self.pool_after:
                size //= 2
            if size < 1:
                raise InvalidConfig(f"spatial size collapses after layer {i + 1}")
        return size, size, self.conv_specs[-1].out_channels

    def fingerprint(self) -> bytes:
        blob = repr(sorted(asdict(self).items())).encode()
        return hashlib.sha256(blob).digest()


class CnnModel:
    """Parameters plus config. ``params`` is an ordered dict of arrays."""

    def __init__(self, config: NetConfig, params: dict, rng_seed: int = 0):
        self.config = config
        self.params = params
        self.rng_seed = rng_seed

    @property
    def dtype(self):
        return next(iter(self.params.values())).dtype

    def astype(self, dtype) -> "CnnModel":
        return CnnModel(self.config, {k: v.astype(dtype) for k, v in self.params.items()}, self.rng_seed)

    def copy(self) -> "CnnModel":
        return self.astype(self.dtype)

    def num_parameters(self) -> int:
        return sum(v.size for v in self.params.values())

    def classifier(self, batch_size: int = 256):
        """Black-box ``(n, h, w) uint8 -> (n, 6)`` probability function."""
        def predict_proba(images):
            images = np.asarray(images)
            out = [forward(self, normalize(images[i:i + batch_size]))
                   for i in range(0, len(images), batch_size)]
            return np.concatenate(out, axis=0)
        return predict_proba


def param_shapes(cfg: NetConfig) -> dict[str, tuple[int, ...]]:
    shapes = {}
    c_in = 1
    for i, c in enumerate(cfg.conv_specs):
        shapes[f"conv{i}.W"] = (c.kernel, c.kernel, c_in, c.out_channels)
        shapes[f"conv{i}.b"] = (c.out_channels,)
        c_in = c.out_channels
    flat = int(np.prod(cfg.feature_shape()))
    shapes["fc1.W"] = (flat, cfg.fc1_units)
    shapes["fc1.b"] = (cfg.fc1_units,)
    shapes["fc2.W"] = (cfg.fc1_units, cfg.num_classes)
    shapes["fc2.b"] = (cfg.num_classes,)
    return shapes


def init_model(cfg: NetConfig, seed: int = 0, dtype=np.float32) -> CnnModel:
    """Glorot-uniform weights, zero biases."""
    cfg.validate()
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(cfg).items():
        if name.endswith(".b"):
            params[name] = np.zeros(shape, dtype=dtype)
            continue
        if len(shape) == 4:
            k = shape[0] * shape[1]
            fan_in, fan_out = k * shape[2], k * shape[3]
        else:
            fan_in, fan_out = shape
        a = np.sqrt(6.0 / (fan_in + fan_out))
        params[name] = rng.uniform(-a, a, size=shape).astype(dtype)
    return CnnModel(cfg, params, seed)


def normalize(images) -> np.ndarray:
    """uint8 (n, h, w) -> float32 (n, h, w, 1) in [0, 1]."""
    images = np.asarray(images)
    if images.ndim == 2:
        images = images[None]
    return (images.astype(np.float32) / 255.0)[..., None]


def _check_batch(model: CnnModel, batch):
    s = model.config.input_size
    if batch.ndim != 4 or batch.shape[1:] != (s, s, 1):
        raise ShapeMismatch(f"expected batch of shape (n, {s}, {s}, 1), got {batch.shape}")


def _forward_logits(model: CnnModel, batch, training: bool, rng):
    p = model.params
    cfg = model.config
    x = np.asarray(batch, dtype=model.dtype)
    caches = []
    for i, spec in enumerate(cfg.conv_specs):
        x, c_conv = layers.conv_forward(x, p[f"conv{i}.W"], p[f"conv{i}.b"], spec.stride)
        x, c_relu = layers.relu_forward(x)
        c_pool = None
        if i in cfg.pool_after:
            x, c_pool = layers.maxpool_forward(x)
        caches.append((c_conv, c_relu, c_pool))
    x, c_fc1 = layers.affine_forward(x, p["fc1.W"], p["fc1.b"])
    x, c_relu1 = layers.relu_forward(x)
    x, mask = layers.dropout_forward(x, cfg.dropout_rate, rng if training else None)
    logits, c_fc2 = layers.affine_forward(x, p["fc2.W"], p["fc2.b"])
    return logits, (caches, c_fc1, c_relu1, mask, c_fc2)


def forward(model: CnnModel, batch, training: bool = False, rng=None) -> np.ndarray:
    """Class probabilities, shape (n, 6).

    Dropout is applied only when ``training`` is true; it needs ``rng``
    (a ``numpy.random.Generator``), defaulting to one seeded from the model.
    """
    _check_batch(model, batch)
    if training and rng is None:
        rng = np.random.default_rng(model.rng_seed)
    logits, _ = _forward_logits(model, batch, training, rng)
    return layers.softmax(logits)


def loss_and_gradients(model: CnnModel, batch, labels, training: bool = False, rng=None):
    """Mean cross-entropy and a dict of gradients keyed like ``model.params``."""
    _check_batch(model, batch)
    labels = np.asarray(labels)
    if labels.shape != (batch.shape[0],):
        raise ShapeMismatch(f"need one label per row, got {labels.shape} for {batch.shape[0]} rows")
    if labels.size and (labels.min() < 0 or labels.max() >= model.config.num_classes):
        raise LabelOutOfRange(f"labels must lie in 0..{model.config.num_classes - 1}")
    if training and rng is None:
        rng = np.random.default_rng(model.rng_seed)
    logits, (caches, c_fc1, c_relu1, mask, c_fc2) = _forward_logits(model, batch, training, rng)
    loss, d = layers.softmax_cross_entropy(logits, labels)

    grads = {}
    d, grads["fc2.W"], grads["fc2.b"] = layers.affine_backward(d, c_fc2)
    d = layers.dropout_backward(d, mask)
    d = layers.relu_backward(d, c_relu1)
    d, grads["fc1.W"], grads["fc1.b"] = layers.affine_backward(d, c_fc1)
    for i in reversed(range(len(caches))):
        c_conv, c_relu, c_pool = caches[i]
        if c_pool is not None:
            d = layers.maxpool_backward(d, c_pool)
        d = layers.relu_backward(d, c_relu)
        d, grads[f"conv{i}.W"], grads[f"conv{i}.b"] = layers.conv_backward(d, c_conv)
    return float(loss), {k: grads[k] for k in model.params}


def argmax_label(probs) -> EmotionLabel:
    # np.argmax returns the first maximum, i.e. the lowest class index on ties
    return EmotionLabel(int(np.argmax(probs)))


def predict(model: CnnModel, img) -> tuple[EmotionLabel, np.ndarray]:
    s = model.config.input_size
    if np.shape(img) != (s, s):
        raise ShapeMismatch(f"expected {s}x{s} image, got {np.shape(img)}")
    probs = forward(model, normalize(img))[0]
    return argmax_label(probs), probs
