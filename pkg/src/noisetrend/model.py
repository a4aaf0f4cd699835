"""Small noise-conditioned convolutional denoiser with hand-rolled gradients.

The topology is fixed: a three-conv encoder (one stride-2 stage), a two-conv
decoder after nearest-neighbour upsampling, and a final zero-initialized
projection.  The branch output is interpreted as a noise-field estimate and
enters through a noise-scaled global residual skip:

    prediction = input - level * branch(input, level)

so the correction a reconstruction can apply is proportional to the noise
level.  At low levels the model is forced to stay near the identity (familiar
and unfamiliar structure alike survives), and structure is progressively
replaced by learned content as the level grows, which is what gives the
degradation sweep its per-pixel trend.  The noise level also conditions the
network as an extra constant-valued input channel.  Because the final layer
starts at zero, a freshly initialized model is exactly the identity map at
every level, which anchors several exact tests.

Gradients (both parameter gradients for training and the input gradient used
as the per-pixel uncertainty signal) are implemented directly for this one
topology; there is no general autodiff machinery here.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DecodeError, FormatError, NumericError
from .image import Image, require_finite, require_pipeline_geometry
from .rng import RandomStream

_ACTIVATIONS = ("tanh", "linear")
_PRECISIONS = {"float64": np.float64, "float32": np.float32}

_CHECKPOINT_MAGIC = b"NTCP"
_CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ArchDescriptor:
    """Widths and activation of the fixed encoder-decoder topology."""

    channels: int = 1
    features: int = 16
    activation: str = "tanh"

    def validate(self) -> None:
        if self.channels not in (1, 3):
            raise ConfigurationError(f"channels must be 1 or 3, got {self.channels}")
        if self.features < 1:
            raise ConfigurationError(f"features must be >= 1, got {self.features}")
        if self.activation not in _ACTIVATIONS:
            raise ConfigurationError(f"activation must be one of {_ACTIVATIONS}")

    def layer_plan(self) -> list[tuple[str, tuple[int, int, int, int], int]]:
        """Ordered (name, kernel shape, stride); fully determines parameter shapes."""
        c, f = self.channels, self.features
        return [
            ("enc1", (3, 3, c + 1, f), 1),
            ("enc2", (3, 3, f, 2 * f), 2),
            ("enc3", (3, 3, 2 * f, 2 * f), 1),
            ("dec1", (3, 3, 2 * f, f), 1),
            # nearest-neighbour x2 upsample sits between dec1 and dec2
            ("dec2", (3, 3, f, f), 1),
            ("out", (3, 3, f, c), 1),
        ]


class DenoiserModel:
    """Parameter container; treat as immutable once trained."""

    def __init__(self, arch: ArchDescriptor, params: dict[str, tuple[np.ndarray, np.ndarray]],
                 precision: str = "float64"):
        arch.validate()
        if precision not in _PRECISIONS:
            raise ConfigurationError(f"precision must be one of {sorted(_PRECISIONS)}")
        self.arch = arch
        self.precision = precision
        self.dtype = _PRECISIONS[precision]
        self.params = {}
        for name, shape, _ in arch.layer_plan():
            if name not in params:
                raise ConfigurationError(f"missing parameters for layer {name}")
            w, b = params[name]
            if w.shape != shape or b.shape != (shape[3],):
                raise ConfigurationError(f"layer {name} has wrong parameter shape {w.shape}")
            self.params[name] = (np.ascontiguousarray(w, dtype=self.dtype),
                                 np.ascontiguousarray(b, dtype=self.dtype))
        for name, (w, b) in self.params.items():
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise NumericError(f"layer {name} has non-finite parameters")

    def copy(self) -> "DenoiserModel":
        return DenoiserModel(
            self.arch,
            {k: (w.copy(), b.copy()) for k, (w, b) in self.params.items()},
            self.precision,
        )


def init_model(arch: ArchDescriptor, seed: int, precision: str = "float64") -> DenoiserModel:
    """Deterministic initialization; the output layer starts at zero so the
    fresh model is the identity map through the residual skip."""
    arch.validate()
    if precision not in _PRECISIONS:
        raise ConfigurationError(f"precision must be one of {sorted(_PRECISIONS)}")
    gen = RandomStream(seed).child("model-init").generator()
    params = {}
    for name, shape, _ in arch.layer_plan():
        fan_in = shape[0] * shape[1] * shape[2]
        fan_out = shape[0] * shape[1] * shape[3]
        if name == "out":
            w = np.zeros(shape)
        else:
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            w = gen.uniform(-limit, limit, size=shape)
        params[name] = (w, np.zeros(shape[3]))
    return DenoiserModel(arch, params, precision)


# ---------------------------------------------------------------------------
# convolution primitives (3x3, zero 'same' padding, stride 1 or 2)

def _conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int):
    batch, h, wd, cin = x.shape
    cout = w.shape[3]
    h_out = -(-h // stride)
    w_out = -(-wd // stride)
    pad_h = max((h_out - 1) * stride + 3 - h, 0)
    pad_w = max((w_out - 1) * stride + 3 - wd, 0)
    pt, pl = pad_h // 2, pad_w // 2
    pb, pr = pad_h - pt, pad_w - pl
    padded = np.pad(x, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
    cols = np.empty((batch, h_out, w_out, 3, 3, cin), dtype=x.dtype)
    for di in range(3):
        for dj in range(3):
            cols[:, :, :, di, dj, :] = padded[:, di : di + stride * h_out : stride,
                                              dj : dj + stride * w_out : stride, :]
    flat = cols.reshape(batch * h_out * w_out, 9 * cin)
    y = flat @ w.reshape(9 * cin, cout) + b
    cache = (flat, padded.shape, (pt, pl), stride, (h, wd), w)
    return y.reshape(batch, h_out, w_out, cout), cache


def _conv_backward(d_y: np.ndarray, cache, need_param_grads: bool, need_input_grad: bool):
    flat, padded_shape, (pt, pl), stride, (h, wd), w = cache
    batch, h_out, w_out, cout = d_y.shape
    cin = w.shape[2]
    d_flat_out = d_y.reshape(batch * h_out * w_out, cout)
    d_w = d_b = d_x = None
    if need_param_grads:
        d_w = (flat.T @ d_flat_out).reshape(w.shape)
        d_b = d_flat_out.sum(axis=0)
    if need_input_grad:
        d_cols = (d_flat_out @ w.reshape(9 * cin, cout).T).reshape(
            batch, h_out, w_out, 3, 3, cin)
        d_padded = np.zeros(padded_shape, dtype=d_y.dtype)
        for di in range(3):
            for dj in range(3):
                d_padded[:, di : di + stride * h_out : stride,
                         dj : dj + stride * w_out : stride, :] += d_cols[:, :, :, di, dj, :]
        d_x = d_padded[:, pt : pt + h, pl : pl + wd, :]
    return d_w, d_b, d_x


def _upsample2(x: np.ndarray, h_target: int, w_target: int) -> np.ndarray:
    return x.repeat(2, axis=1).repeat(2, axis=2)[:, :h_target, :w_target, :]


def _upsample2_backward(d_y: np.ndarray, h_half: int, w_half: int) -> np.ndarray:
    batch, h_target, w_target, ch = d_y.shape
    full = np.zeros((batch, 2 * h_half, 2 * w_half, ch), dtype=d_y.dtype)
    full[:, :h_target, :w_target, :] = d_y
    return full.reshape(batch, h_half, 2, w_half, 2, ch).sum(axis=(2, 4))


def _act(z: np.ndarray, kind: str) -> np.ndarray:
    return np.tanh(z) if kind == "tanh" else z


def _act_backward(d_a: np.ndarray, a: np.ndarray, kind: str) -> np.ndarray:
    return d_a * (1.0 - a * a) if kind == "tanh" else d_a


# ---------------------------------------------------------------------------
# full network

def _forward(model: DenoiserModel, x: np.ndarray, levels: np.ndarray):
    """Batched forward pass; returns (prediction, cache for backward)."""
    act = model.arch.activation
    batch, h, wd, _ = x.shape
    scale = levels.astype(model.dtype).reshape(-1, 1, 1, 1)
    cond = np.broadcast_to(scale, (batch, h, wd, 1))
    inp = np.concatenate([x, cond], axis=3)

    caches = {"res_scale": scale}
    a = inp
    for name in ("enc1", "enc2", "enc3", "dec1"):
        w, b = model.params[name]
        stride = 2 if name == "enc2" else 1
        z, conv_cache = _conv_forward(a, w, b, stride)
        a = _act(z, act)
        caches[name] = (conv_cache, a)

    h_half, w_half = a.shape[1], a.shape[2]
    a = _upsample2(a, h, wd)
    caches["up"] = (h_half, w_half)

    for name in ("dec2", "out"):
        w, b = model.params[name]
        z, conv_cache = _conv_forward(a, w, b, 1)
        a = z if name == "out" else _act(z, act)
        caches[name] = (conv_cache, a)

    return x - scale * a, caches


def _backward(model: DenoiserModel, caches, d_y: np.ndarray,
              need_param_grads: bool, need_input_grad: bool):
    """Backpropagate d_y through the residual branch.

    Returns (param_grads, d_input) where d_input is the gradient with respect
    to the image channels only (the conditioning channel is dropped).  The
    skip connection's direct contribution is NOT included here; callers add it.
    """
    act = model.arch.activation
    grads = {}
    d_a = d_y * -caches["res_scale"]
    for name in ("out", "dec2"):
        conv_cache, a = caches[name]
        if name != "out":
            d_a = _act_backward(d_a, a, act)
        d_w, d_b, d_a = _conv_backward(d_a, conv_cache, need_param_grads, True)
        if need_param_grads:
            grads[name] = (d_w, d_b)

    h_half, w_half = caches["up"]
    d_a = _upsample2_backward(d_a, h_half, w_half)

    for i, name in enumerate(("dec1", "enc3", "enc2", "enc1")):
        conv_cache, a = caches[name]
        d_a = _act_backward(d_a, a, act)
        last = name == "enc1"
        d_w, d_b, d_a = _conv_backward(
            d_a, conv_cache, need_param_grads, need_input_grad or not last)
        if need_param_grads:
            grads[name] = (d_w, d_b)

    d_input = d_a[:, :, :, : model.arch.channels] if need_input_grad else None
    return grads, d_input


# ---------------------------------------------------------------------------
# public operations

def _check_batch(model: DenoiserModel, arr: np.ndarray, levels: np.ndarray):
    if arr.shape[3] != model.arch.channels:
        raise ConfigurationError(
            f"model expects {model.arch.channels} channels, image has {arr.shape[3]}")
    require_pipeline_geometry(arr.shape[1:])
    require_finite(arr, "model input")
    levels = np.asarray(levels, dtype=np.float64)
    if not np.all(np.isfinite(levels)) or np.any(levels < 0):
        raise ConfigurationError("noise levels must be finite and >= 0")
    return levels


def predict_x0_batch(model: DenoiserModel, arr: np.ndarray, levels: np.ndarray) -> np.ndarray:
    """One-shot clean-image estimates for a batch of noisy inputs."""
    levels = _check_batch(model, arr, levels)
    y, _ = _forward(model, arr.astype(model.dtype, copy=False), levels)
    return y.astype(np.float64)


def predict_x0(model: DenoiserModel, noisy: Image, noise_level: float) -> Image:
    """The model's one-shot estimate of the clean image behind ``noisy``."""
    out = predict_x0_batch(model, noisy.data[None], np.array([noise_level]))
    return Image(out[0])


def input_gradient_batch(model: DenoiserModel, arr: np.ndarray, levels: np.ndarray) -> np.ndarray:
    """Per-pixel |d(sum of outputs)/d(input pixel)| for a batch, by backprop."""
    levels = _check_batch(model, arr, levels)
    x = arr.astype(model.dtype, copy=False)
    _, caches = _forward(model, x, levels)
    ones = np.ones(arr.shape, dtype=model.dtype)
    _, d_input = _backward(model, caches, ones, need_param_grads=False, need_input_grad=True)
    # the residual skip contributes d(sum y)/dx = 1 on top of the branch gradient
    return np.abs(1.0 + d_input).astype(np.float64)


def input_gradient(model: DenoiserModel, image: Image, noise_level: float) -> Image:
    """Gradient-magnitude map (the per-pixel model-uncertainty signal)."""
    out = input_gradient_batch(model, image.data[None], np.array([noise_level]))
    return Image(out[0])


@dataclass(frozen=True)
class TrainingConfig:
    steps: int
    batch_size: int = 8
    learning_rate: float = 2e-3
    noise_range: tuple[float, float] = (0.0, 0.5)
    seed: int = 0

    def validate(self) -> None:
        if self.steps < 0:
            raise ConfigurationError(f"steps must be >= 0, got {self.steps}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if not (np.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise ConfigurationError(f"learning_rate must be > 0, got {self.learning_rate}")
        lo, hi = self.noise_range
        if not (0 <= lo <= hi and np.isfinite(hi)):
            raise ConfigurationError(f"invalid noise range {self.noise_range}")


_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8


def train(model: DenoiserModel, images: list[Image], config: TrainingConfig,
          progress=None) -> tuple[DenoiserModel, list[float]]:
    """Gradient descent on the mean-squared reconstruction error.

    Each step draws a batch with replacement, a per-image noise level uniform
    over ``config.noise_range``, corrupts, and descends the MSE between the
    prediction and the clean image with Adam (fixed moment constants, so the
    trajectory is a pure function of the seed at fixed precision).  Returns a
    trained copy of the model and the per-step loss history; the input model
    is left untouched.
    """
    config.validate()
    if not images:
        raise ConfigurationError("training dataset is empty")
    geometry = images[0].geometry
    for im in images:
        if im.geometry != geometry:
            raise ConfigurationError(
                f"training images must share one geometry, got {im.geometry} vs {geometry}")
    trained = model.copy()
    _check_batch(trained, images[0].data[None], np.zeros(1))

    gen = RandomStream(config.seed).child("train").generator()
    data = np.stack([im.data for im in images]).astype(trained.dtype)
    count = data.shape[0]
    lo, hi = config.noise_range
    history: list[float] = []
    moment1 = {name: (np.zeros_like(w), np.zeros_like(b))
               for name, (w, b) in trained.params.items()}
    moment2 = {name: (np.zeros_like(w), np.zeros_like(b))
               for name, (w, b) in trained.params.items()}

    from .sweep import corrupt_batch

    for step in range(config.steps):
        idx = gen.integers(0, count, size=config.batch_size)
        clean = data[idx]
        levels = gen.uniform(lo, hi, size=config.batch_size)
        noisy = corrupt_batch(clean, levels, gen)
        pred, caches = _forward(trained, noisy, levels)
        resid = pred - clean
        loss = float(np.mean(resid.astype(np.float64) ** 2))
        if not np.isfinite(loss):
            raise NumericError(f"training loss became non-finite at step {step}")
        history.append(loss)
        d_y = (2.0 / resid.size) * resid
        grads, _ = _backward(trained, caches, d_y, need_param_grads=True, need_input_grad=False)
        scale1 = 1.0 - _ADAM_BETA1 ** (step + 1)
        scale2 = 1.0 - _ADAM_BETA2 ** (step + 1)
        for name, (d_w, d_b) in grads.items():
            for tensor, grad, m1, m2 in zip(trained.params[name], (d_w, d_b),
                                            moment1[name], moment2[name]):
                m1 *= _ADAM_BETA1
                m1 += (1.0 - _ADAM_BETA1) * grad
                m2 *= _ADAM_BETA2
                m2 += (1.0 - _ADAM_BETA2) * grad * grad
                tensor -= config.learning_rate * (m1 / scale1) / (
                    np.sqrt(m2 / scale2) + _ADAM_EPS)
        if progress is not None:
            progress(step, loss)
    return trained, history


# ---------------------------------------------------------------------------
# checkpoint container: magic, version, length-prefixed JSON header, then raw
# little-endian parameter arrays in layer order (weights before bias).

def save_checkpoint(model: DenoiserModel, path: str | Path) -> None:
    header = {
        "format_version": _CHECKPOINT_VERSION,
        "arch": {
            "channels": model.arch.channels,
            "features": model.arch.features,
            "activation": model.arch.activation,
        },
        "precision": model.precision,
        "params": [
            {"name": name, "w_shape": list(shape), "b_shape": [shape[3]]}
            for name, shape, _ in model.arch.layer_plan()
        ],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    le = "<f8" if model.precision == "float64" else "<f4"
    chunks = [_CHECKPOINT_MAGIC, struct.pack("<II", _CHECKPOINT_VERSION, len(blob)), blob]
    for name, _, _ in model.arch.layer_plan():
        w, b = model.params[name]
        chunks.append(np.ascontiguousarray(w, dtype=le).tobytes())
        chunks.append(np.ascontiguousarray(b, dtype=le).tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path: str | Path) -> DenoiserModel:
    buf = Path(path).read_bytes()
    if buf[:4] != _CHECKPOINT_MAGIC:
        raise FormatError(f"not a model checkpoint (magic {buf[:4]!r})")
    if len(buf) < 12:
        raise DecodeError("truncated checkpoint header", len(buf))
    version, header_len = struct.unpack("<II", buf[4:12])
    if version != _CHECKPOINT_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    if len(buf) < 12 + header_len:
        raise DecodeError("truncated checkpoint header", len(buf))
    try:
        header = json.loads(buf[12 : 12 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DecodeError(f"invalid checkpoint header: {exc}", 12) from exc
    arch = ArchDescriptor(**header["arch"])
    precision = header["precision"]
    if precision not in _PRECISIONS:
        raise FormatError(f"unsupported checkpoint precision {precision!r}")
    dtype = np.dtype("<f8" if precision == "float64" else "<f4")
    params = {}
    offset = 12 + header_len
    for entry in header["params"]:
        w_shape = tuple(entry["w_shape"])
        b_shape = tuple(entry["b_shape"])
        for key, shape in (("w", w_shape), ("b", b_shape)):
            nbytes = int(np.prod(shape)) * dtype.itemsize
            if len(buf) < offset + nbytes:
                raise DecodeError(f"truncated parameter array {entry['name']}.{key}", offset)
            arr = np.frombuffer(buf[offset : offset + nbytes], dtype=dtype).reshape(shape)
            offset += nbytes
            if key == "w":
                w = arr
            else:
                params[entry["name"]] = (w, arr)
    if offset != len(buf):
        raise DecodeError(f"{len(buf) - offset} trailing bytes after parameters", offset)
    return DenoiserModel(arch, params, precision)
