"""1D convolutional classifier with exact backpropagation and Adam updates.

Layer stack: Conv1D(tanh) -> MaxPool -> Conv1D(tanh) -> AvgPool -> Flatten
-> Dropout -> Dense(softmax). Convolutions are valid (no zero padding) and
no ReLU is used anywhere. All math runs in float64 with a fixed reduction
order, so training is reproducible bit-for-bit for a given seed; ties in
argmax and max pooling break toward the first index.

Checkpoints use the NSMD container (little-endian): magic "NSMD" |
version u16 | architecture JSON (u32 length prefix) | parameter tensors
as float64 in declaration order (w1, b1, w2, b2, wd, bd).
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .epochs import EpochSet
from .errors import (
    BadMagic,
    IoFailure,
    LabelOutOfRange,
    ModelShapeMismatch,
    NonFiniteGradient,
    ShapeMismatch,
    TruncatedFile,
    VersionUnsupported,
)

_NSMD_MAGIC = b"NSMD"
_NSMD_VERSION = 1

_INIT_SALT = 211
_DROPOUT_SALT = 433
_SHUFFLE_SALT = 613

PARAM_ORDER = ("w1", "b1", "w2", "b2", "wd", "bd")


@dataclass(frozen=True)
class Architecture:
    """Sizes of the fixed layer stack. Defaults match the classifier used on
    500 x 64 epochs; shrink them for finite-difference verification."""

    input_len: int = 500
    input_channels: int = 64
    conv1_filters: int = 16
    conv1_kernel: int = 7
    conv2_filters: int = 32
    conv2_kernel: int = 5
    pool1_width: int = 2
    pool2_width: int = 2
    dropout_rate: float = 0.5
    n_classes: int = 3
    activation: str = "tanh"  # "identity" is for linear-regime gradient tests

    def __post_init__(self):
        for name in ("input_len", "input_channels", "conv1_filters", "conv1_kernel",
                     "conv2_filters", "conv2_kernel", "pool1_width", "pool2_width",
                     "n_classes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.activation not in ("tanh", "identity"):
            raise ValueError(f"unknown activation {self.activation!r}")
        self.shape_trace()  # must be realizable

    def shape_trace(self) -> tuple[int, int, int, int, int]:
        """Per-stage lengths: conv1 out, pool1 out, conv2 out, pool2 out,
        flattened feature count."""
        l1 = self.input_len - self.conv1_kernel + 1
        p1 = l1 // self.pool1_width
        l2 = p1 - self.conv2_kernel + 1
        p2 = l2 // self.pool2_width
        if min(l1, p1, l2, p2) < 1:
            raise ValueError("layer sizes collapse to zero for this input length")
        return (l1, p1, l2, p2, p2 * self.conv2_filters)

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        flat = self.shape_trace()[-1]
        return {
            "w1": (self.conv1_filters, self.input_channels, self.conv1_kernel),
            "b1": (self.conv1_filters,),
            "w2": (self.conv2_filters, self.conv1_filters, self.conv2_kernel),
            "b2": (self.conv2_filters,),
            "wd": (flat, self.n_classes),
            "bd": (self.n_classes,),
        }


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 2e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 80
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1 and self.eps > 0):
            raise ValueError("invalid Adam coefficients")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class Model:
    """Parameters plus optimizer state; value-like, shareable once training
    stops mutating it."""

    arch: Architecture
    params: dict[str, np.ndarray]
    adam_m: dict[str, np.ndarray]
    adam_v: dict[str, np.ndarray]
    step: int
    dropout_rng: np.random.Generator


@dataclass(frozen=True)
class TrainHistory:
    train_loss: tuple[float, ...]
    train_acc: tuple[float, ...]
    val_loss: tuple[float, ...]
    val_acc: tuple[float, ...]
    best_epoch: int  # 0-based index of peak validation accuracy, earliest tie

    def __len__(self) -> int:
        return len(self.train_loss)

    def to_csv(self, path: str | Path) -> None:
        lines = ["epoch,train_loss,train_acc,val_loss,val_acc"]
        for i in range(len(self)):
            lines.append(
                f"{i + 1},{self.train_loss[i]:.10g},{self.train_acc[i]:.10g},"
                f"{self.val_loss[i]:.10g},{self.val_acc[i]:.10g}"
            )
        Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def init_model(arch: Architecture, seed: int = 0) -> Model:
    """Glorot-uniform weights (a = sqrt(6/(fan_in+fan_out))), zero biases,
    fully determined by the seed."""
    rng = np.random.default_rng([seed, _INIT_SALT])
    shapes = arch.param_shapes()
    fans = {
        "w1": (arch.input_channels * arch.conv1_kernel, arch.conv1_filters * arch.conv1_kernel),
        "w2": (arch.conv1_filters * arch.conv2_kernel, arch.conv2_filters * arch.conv2_kernel),
        "wd": (shapes["wd"][0], shapes["wd"][1]),
    }
    params: dict[str, np.ndarray] = {}
    for key in PARAM_ORDER:
        if key.startswith("b"):
            params[key] = np.zeros(shapes[key])
        else:
            fan_in, fan_out = fans[key]
            a = np.sqrt(6.0 / (fan_in + fan_out))
            params[key] = rng.uniform(-a, a, size=shapes[key])
    zeros = lambda: {k: np.zeros(shapes[k]) for k in PARAM_ORDER}
    return Model(arch, params, zeros(), zeros(), 0,
                 np.random.default_rng([seed, _DROPOUT_SALT]))


def glorot_limit(fan_in: int, fan_out: int) -> float:
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


# ---------------------------------------------------------------- layers
#
# Valid 1D convolutions are computed as one full-length matrix product per
# kernel tap: the (B, L, Cin) input flattens to (B*L, Cin) without copying,
# multiplies the tap's (Cin, Cout) slice, and the results accumulate at
# shifted offsets. This keeps every product a single large GEMM and avoids
# im2col buffers entirely.

def _tap_weights(w: np.ndarray) -> list[np.ndarray]:
    # per-tap (Cin, Cout) blocks, made contiguous so the products stay on the
    # fast BLAS path
    return [np.ascontiguousarray(w[:, :, k].T) for k in range(w.shape[2])]


def _conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    # x (B, L, Cin), w (Cout, Cin, K) -> (B, L-K+1, Cout)
    batch, length, cin = x.shape
    cout, _, kernel = w.shape
    lout = length - kernel + 1
    x2 = np.ascontiguousarray(x).reshape(batch * length, cin)
    y = np.broadcast_to(b, (batch, lout, cout)).copy()
    for k, tap in enumerate(_tap_weights(w)):
        zk = (x2 @ tap).reshape(batch, length, cout)
        y += zk[:, k:k + lout, :]
    return y


def _conv_backward(x: np.ndarray, w: np.ndarray, dy: np.ndarray
                   ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    batch, length, cin = x.shape
    cout, _, kernel = w.shape
    lout = dy.shape[1]
    dy2 = np.ascontiguousarray(dy).reshape(batch * lout, cout)
    db = dy2.sum(axis=0)
    x2 = np.ascontiguousarray(x).reshape(batch * length, cin)
    dw = np.empty_like(w)
    dx = np.zeros_like(x)
    dypad = np.zeros((batch, length, cout))
    for k, tap in enumerate(_tap_weights(w)):
        dypad[:] = 0.0
        dypad[:, k:k + lout, :] = dy
        dw[:, :, k] = (x2.T @ dypad.reshape(batch * length, cout)).T
        dx[:, k:k + lout, :] += (dy2 @ tap.T).reshape(batch, lout, cin)
    return dx, dw, db


def _maxpool_forward(x: np.ndarray, width: int) -> tuple[np.ndarray, np.ndarray]:
    batch, length, ch = x.shape
    lout = length // width
    xw = x[:, :lout * width, :].reshape(batch, lout, width, ch)
    arg = xw.argmax(axis=2)  # first occurrence wins ties
    y = np.take_along_axis(xw, arg[:, :, None, :], axis=2)[:, :, 0, :]
    return y, arg


def _maxpool_backward(dy: np.ndarray, arg: np.ndarray, in_len: int, width: int) -> np.ndarray:
    batch, lout, ch = dy.shape
    dxw = np.zeros((batch, lout, width, ch))
    np.put_along_axis(dxw, arg[:, :, None, :], dy[:, :, None, :], axis=2)
    dx = np.zeros((batch, in_len, ch))
    dx[:, :lout * width, :] = dxw.reshape(batch, lout * width, ch)
    return dx


def _avgpool_forward(x: np.ndarray, width: int) -> np.ndarray:
    batch, length, ch = x.shape
    lout = length // width
    return x[:, :lout * width, :].reshape(batch, lout, width, ch).mean(axis=2)


def _avgpool_backward(dy: np.ndarray, in_len: int, width: int) -> np.ndarray:
    batch, lout, ch = dy.shape
    dx = np.zeros((batch, in_len, ch))
    dx[:, :lout * width, :] = np.repeat(dy / width, width, axis=1)
    return dx


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _activate(arch: Architecture, y: np.ndarray) -> np.ndarray:
    return np.tanh(y) if arch.activation == "tanh" else y


def _activate_grad(arch: Architecture, a: np.ndarray) -> np.ndarray:
    return 1.0 - a * a if arch.activation == "tanh" else np.ones_like(a)


# ------------------------------------------------------------- forward/back

def _check_batch(arch: Architecture, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or x.shape[1:] != (arch.input_len, arch.input_channels):
        raise ShapeMismatch(
            f"expected batch of ({arch.input_len}, {arch.input_channels}), got {x.shape}"
        )
    return x


def _forward(model: Model, x: np.ndarray, training: bool) -> tuple[np.ndarray, dict]:
    arch, p = model.arch, model.params
    x = _check_batch(arch, x)
    a1 = _activate(arch, _conv_forward(x, p["w1"], p["b1"]))
    m1, arg1 = _maxpool_forward(a1, arch.pool1_width)
    a2 = _activate(arch, _conv_forward(m1, p["w2"], p["b2"]))
    m2 = _avgpool_forward(a2, arch.pool2_width)
    flat = m2.reshape(x.shape[0], -1)
    mask = None
    h = flat
    if training and arch.dropout_rate > 0.0:
        keep = 1.0 - arch.dropout_rate
        mask = (model.dropout_rng.random(flat.shape) < keep).astype(np.float64) / keep
        h = flat * mask
    probs = _softmax(h @ p["wd"] + p["bd"])
    cache = dict(x=x, m1=m1, a1=a1, arg1=arg1, a2=a2, mask=mask, h=h, probs=probs)
    return probs, cache


def forward(model: Model, x: np.ndarray, training: bool = False) -> np.ndarray:
    """Class probabilities for a batch; dropout is active only when training."""
    return _forward(model, x, training)[0]


def one_hot(labels: Sequence[int], n_classes: int = 3) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise LabelOutOfRange(f"labels must lie in [0, {n_classes})")
    out = np.zeros((labels.shape[0], n_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def loss_ce(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean categorical cross-entropy; probabilities are clamped to
    [1e-12, 1] before the log. `labels` may be int labels or one-hot rows."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    if labels.ndim == 2:
        if labels.shape != probs.shape:
            raise ShapeMismatch(f"one-hot shape {labels.shape} != probs shape {probs.shape}")
        p_true = (probs * labels).sum(axis=1)
    else:
        if labels.shape[0] != probs.shape[0]:
            raise ShapeMismatch("label count does not match batch size")
        if labels.size and (labels.min() < 0 or labels.max() >= probs.shape[1]):
            raise LabelOutOfRange(f"labels must lie in [0, {probs.shape[1]})")
        p_true = probs[np.arange(probs.shape[0]), labels.astype(np.int64)]
    return float(-np.log(np.clip(p_true, 1e-12, 1.0)).mean())


def _backward(model: Model, cache: dict, labels_onehot: np.ndarray) -> dict[str, np.ndarray]:
    arch, p = model.arch, model.params
    batch = cache["probs"].shape[0]
    dlogits = (cache["probs"] - labels_onehot) / batch
    grads: dict[str, np.ndarray] = {}
    grads["wd"] = cache["h"].T @ dlogits
    grads["bd"] = dlogits.sum(axis=0)
    dh = dlogits @ p["wd"].T
    dflat = dh * cache["mask"] if cache["mask"] is not None else dh
    dm2 = dflat.reshape(batch, -1, arch.conv2_filters)
    da2 = _avgpool_backward(dm2, cache["a2"].shape[1], arch.pool2_width)
    dy2 = da2 * _activate_grad(arch, cache["a2"])
    dm1, grads["w2"], grads["b2"] = _conv_backward(cache["m1"], p["w2"], dy2)
    da1 = _maxpool_backward(dm1, cache["arg1"], cache["a1"].shape[1], arch.pool1_width)
    dy1 = da1 * _activate_grad(arch, cache["a1"])
    _, grads["w1"], grads["b1"] = _conv_backward(cache["x"], p["w1"], dy1)
    return grads


def _adam_update(model: Model, grads: dict[str, np.ndarray], cfg: TrainConfig) -> None:
    model.step += 1
    t = model.step
    for key in PARAM_ORDER:
        g = grads[key]
        if not np.isfinite(g).all():
            raise NonFiniteGradient(f"non-finite gradient in {key} at step {t}")
        m, v = model.adam_m[key], model.adam_v[key]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        mhat = m / (1.0 - cfg.beta1 ** t)
        vhat = v / (1.0 - cfg.beta2 ** t)
        model.params[key] -= cfg.learning_rate * mhat / (np.sqrt(vhat) + cfg.eps)


def train_step(model: Model, x: np.ndarray, labels: np.ndarray, cfg: TrainConfig) -> float:
    """One forward/backward/Adam update in place; returns the batch loss
    measured before the update."""
    probs, cache = _forward(model, x, training=True)
    target = one_hot(labels, model.arch.n_classes)
    loss = loss_ce(probs, target)
    grads = _backward(model, cache, target)
    _adam_update(model, grads, cfg)
    return loss


def evaluate(model: Model, x: np.ndarray, labels: np.ndarray,
             batch_size: int = 64) -> tuple[float, float]:
    """(mean loss, accuracy) with dropout disabled; fixed batch order keeps
    the reduction deterministic."""
    x = _check_batch(model.arch, np.asarray(x, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64)
    n = x.shape[0]
    loss_sum = 0.0
    correct = 0
    for i in range(0, n, batch_size):
        probs = forward(model, x[i:i + batch_size], training=False)
        sel = labels[i:i + batch_size]
        p_true = np.clip(probs[np.arange(len(sel)), sel], 1e-12, 1.0)
        loss_sum += float(-np.log(p_true).sum())
        correct += int((probs.argmax(axis=1) == sel).sum())
    return loss_sum / n, correct / n


def _as_xy(data) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(data, EpochSet):
        return data.stack(), data.labels
    x, y = data
    return np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.int64)


def train(model: Model, train_data, val_data, cfg: TrainConfig = TrainConfig()
          ) -> tuple[Model, TrainHistory]:
    """Full training loop: per epoch a seed-determined batch reshuffle and
    one pass of updates, then full-set evaluation of both partitions with
    dropout off. Returns the parameter snapshot from the epoch with peak
    validation accuracy (earliest on ties) as an inference-ready model."""
    x_tr, y_tr = _as_xy(train_data)
    x_va, y_va = _as_xy(val_data)
    if len(x_tr) == 0 or len(x_va) == 0:
        raise ShapeMismatch("training and validation sets must be non-empty")
    tr_loss, tr_acc, va_loss, va_acc = [], [], [], []
    best_acc = -1.0
    best_epoch = 0
    best_params: dict[str, np.ndarray] = {}
    for epoch in range(cfg.epochs):
        rng = np.random.default_rng([cfg.seed, _SHUFFLE_SALT, epoch])
        perm = rng.permutation(len(x_tr))
        for i in range(0, len(perm), cfg.batch_size):
            idx = perm[i:i + cfg.batch_size]
            train_step(model, x_tr[idx], y_tr[idx], cfg)
        l, a = evaluate(model, x_tr, y_tr)
        tr_loss.append(l)
        tr_acc.append(a)
        l, a = evaluate(model, x_va, y_va)
        va_loss.append(l)
        va_acc.append(a)
        if a > best_acc:
            best_acc = a
            best_epoch = epoch
            best_params = {k: v.copy() for k, v in model.params.items()}
    history = TrainHistory(tuple(tr_loss), tuple(tr_acc), tuple(va_loss), tuple(va_acc),
                           best_epoch)
    shapes = model.arch.param_shapes()
    best = Model(model.arch, best_params,
                 {k: np.zeros(shapes[k]) for k in PARAM_ORDER},
                 {k: np.zeros(shapes[k]) for k in PARAM_ORDER},
                 0, np.random.default_rng([cfg.seed, _DROPOUT_SALT]))
    return best, history


def predict(model: Model, epoch_data: np.ndarray) -> tuple[int, np.ndarray]:
    """Label and class probabilities for one epoch; argmax ties resolve to
    the lowest label index."""
    epoch_data = np.asarray(epoch_data, dtype=np.float64)
    if epoch_data.shape != (model.arch.input_len, model.arch.input_channels):
        raise ShapeMismatch(
            f"expected ({model.arch.input_len}, {model.arch.input_channels}), "
            f"got {epoch_data.shape}"
        )
    probs = forward(model, epoch_data[None], training=False)[0]
    return int(probs.argmax()), probs


# ------------------------------------------------------------ verification

SMALL_CHECK_ARCH = Architecture(
    input_len=20, input_channels=4, conv1_filters=3, conv1_kernel=3,
    conv2_filters=3, conv2_kernel=3, dropout_rate=0.0,
)

_CORRUPT_KEYS = {"conv1": ("w1", "b1"), "conv2": ("w2", "b2"), "dense": ("wd", "bd")}


def gradient_check(arch: Architecture = SMALL_CHECK_ARCH, seed: int = 0,
                   corrupt_layer: str | None = None, h: float = 1e-5,
                   batch: int = 3) -> float:
    """Max relative error between analytic gradients and central finite
    differences over every parameter, dropout disabled.

    `corrupt_layer` ("conv1" | "conv2" | "dense") doubles that layer's
    analytic gradient, a sensitivity probe for the harness itself.
    """
    model = init_model(arch, seed)
    rng = np.random.default_rng([seed, 17])
    x = rng.standard_normal((batch, arch.input_len, arch.input_channels))
    y = one_hot(rng.integers(arch.n_classes, size=batch), arch.n_classes)

    probs, cache = _forward(model, x, training=False)
    grads = _backward(model, cache, y)
    if corrupt_layer is not None:
        for key in _CORRUPT_KEYS[corrupt_layer]:
            grads[key] = grads[key] * 2.0

    def loss_now() -> float:
        return loss_ce(_forward(model, x, training=False)[0], y)

    worst = 0.0
    for key in PARAM_ORDER:
        theta = model.params[key]
        flat = theta.ravel()
        gflat = grads[key].ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_now()
            flat[i] = orig - h
            down = loss_now()
            flat[i] = orig
            numeric = (up - down) / (2.0 * h)
            analytic = gflat[i]
            rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
            worst = max(worst, rel)
    return worst


# ------------------------------------------------------------- checkpoints

def save_model(model: Model, path: str | Path) -> None:
    arch_json = json.dumps(asdict(model.arch), sort_keys=True).encode("ascii")
    buf = bytearray()
    buf += _NSMD_MAGIC
    buf += struct.pack("<H", _NSMD_VERSION)
    buf += struct.pack("<I", len(arch_json))
    buf += arch_json
    for key in PARAM_ORDER:
        buf += np.ascontiguousarray(model.params[key], dtype="<f8").tobytes()
    try:
        Path(path).write_bytes(bytes(buf))
    except OSError as exc:
        raise IoFailure(f"failed to write {path}: {exc}") from exc


def load_model(path: str | Path) -> Model:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"failed to read {path}: {exc}") from exc
    if len(raw) < 10:
        raise TruncatedFile("file shorter than the NSMD header", offset=len(raw))
    if raw[:4] != _NSMD_MAGIC:
        raise BadMagic(f"expected {_NSMD_MAGIC!r}, found {raw[:4]!r}", offset=0)
    (version,) = struct.unpack_from("<H", raw, 4)
    if version != _NSMD_VERSION:
        raise VersionUnsupported(f"NSMD version {version} not supported", offset=4)
    (json_len,) = struct.unpack_from("<I", raw, 6)
    arch = Architecture(**json.loads(raw[10:10 + json_len].decode("ascii")))
    shapes = arch.param_shapes()
    off = 10 + json_len
    params: dict[str, np.ndarray] = {}
    for key in PARAM_ORDER:
        count = int(np.prod(shapes[key]))
        if len(raw) < off + 8 * count:
            raise TruncatedFile(f"parameter tensor {key} incomplete", offset=len(raw))
        params[key] = np.frombuffer(raw, dtype="<f8", count=count, offset=off) \
            .reshape(shapes[key]).astype(np.float64)
        off += 8 * count
    if off != len(raw):
        raise ModelShapeMismatch(f"{len(raw) - off} unexpected trailing bytes")
    return Model(arch, params,
                 {k: np.zeros(shapes[k]) for k in PARAM_ORDER},
                 {k: np.zeros(shapes[k]) for k in PARAM_ORDER},
                 0, np.random.default_rng(0))
