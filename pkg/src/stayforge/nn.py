"""Feed-forward binary classifier with explicit backpropagation and six optimizers.

All arithmetic is float64. Parameters live in a flat ``dict`` keyed
``W{i}``, ``b{i}`` (layer ``i``; the last index is the output unit) and
``a{i}`` for PReLU slopes.
"""

from __future__ import annotations

import enum
import io
import json
import math
import time
import zipfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import erf, expit

from .data import LabeledDataset
from .errors import (
    CheckpointMismatchError,
    InvalidActivationError,
    NumericalError,
    ParseError,
    ShapeError,
)
from .metrics import f1_score
from .resample import ResampleStrategy, apply_strategy

SELU_LAMBDA = 1.0507009873554804934193349852946
SELU_ALPHA = 1.6732632423543772848170429916717
PRELU_INIT = 0.25
LOGIT_CLAMP = 30.0
CHECKPOINT_VERSION = 1


class Optimizer(str, enum.Enum):
    ADAM = "adam"
    NADAM = "nadam"
    ADAMAX = "adamax"
    RMSPROP_MOMENTUM = "rmsprop_momentum"
    ADAGRAD = "adagrad"
    ADADELTA = "adadelta"


class Activation(str, enum.Enum):
    RELU = "relu"
    LEAKY_RELU = "leaky_relu"
    ELU = "elu"
    SELU = "selu"
    PRELU = "prelu"
    GELU = "gelu"
    SWISH = "swish"


class RegType(str, enum.Enum):
    L1 = "l1"
    L2 = "l2"
    L1L2 = "l1l2"


@dataclass(frozen=True)
class HyperConfig:
    """One point of the hyperparameter space; fully determines a model."""

    optimizer: Optimizer
    layers: int
    neurons_per_layer: int
    dropout_rate: float
    learning_rate: float
    reg_type: RegType
    reg_factor: float
    activation: Activation
    leaky_alpha: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "optimizer", Optimizer(self.optimizer))
        object.__setattr__(self, "reg_type", RegType(self.reg_type))
        try:
            object.__setattr__(self, "activation", Activation(self.activation))
        except ValueError:
            raise InvalidActivationError(f"unknown activation {self.activation!r}") from None
        if self.layers < 1 or self.neurons_per_layer < 1:
            raise ValueError("layers and neurons_per_layer must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate {self.dropout_rate} outside [0, 1)")
        if self.learning_rate <= 0 or self.reg_factor < 0:
            raise ValueError("learning_rate must be > 0 and reg_factor >= 0")
        if self.activation is Activation.LEAKY_RELU:
            if self.leaky_alpha is None:
                raise ValueError("leaky_relu needs leaky_alpha")
        else:
            object.__setattr__(self, "leaky_alpha", None)

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("optimizer", "reg_type", "activation"):
            d[key] = d[key].value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "HyperConfig":
        return cls(
            optimizer=d["optimizer"],
            layers=int(d["layers"]),
            neurons_per_layer=int(d["neurons_per_layer"]),
            dropout_rate=float(d["dropout_rate"]),
            learning_rate=float(d["learning_rate"]),
            reg_type=d["reg_type"],
            reg_factor=float(d["reg_factor"]),
            activation=d["activation"],
            leaky_alpha=None if d.get("leaky_alpha") is None else float(d["leaky_alpha"]),
        )


def activation_apply(kind: Activation | str, alpha, x):
    """Elementwise activation; ``alpha`` is the LeakyReLU/PReLU negative slope."""
    try:
        kind = Activation(kind)
    except ValueError:
        raise InvalidActivationError(f"unknown activation {kind!r}") from None
    x = np.asarray(x, dtype=np.float64)
    if kind is Activation.RELU:
        return np.maximum(x, 0.0)
    if kind in (Activation.LEAKY_RELU, Activation.PRELU):
        if alpha is None:
            raise ValueError(f"{kind.value} requires alpha")
        return np.where(x > 0, x, alpha * x)
    if kind is Activation.ELU:
        return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))
    if kind is Activation.SELU:
        return SELU_LAMBDA * np.where(x > 0, x, SELU_ALPHA * np.expm1(np.minimum(x, 0.0)))
    if kind is Activation.GELU:
        return x * 0.5 * (1.0 + erf(x / math.sqrt(2.0)))
    return x * expit(x)


def _activation_grad(kind: Activation, alpha, z: np.ndarray) -> np.ndarray:
    if kind is Activation.RELU:
        return (z > 0).astype(np.float64)
    if kind in (Activation.LEAKY_RELU, Activation.PRELU):
        return np.where(z > 0, 1.0, alpha)
    if kind is Activation.ELU:
        return np.where(z > 0, 1.0, np.exp(np.minimum(z, 0.0)))
    if kind is Activation.SELU:
        return SELU_LAMBDA * np.where(z > 0, 1.0, SELU_ALPHA * np.exp(np.minimum(z, 0.0)))
    if kind is Activation.GELU:
        cdf = 0.5 * (1.0 + erf(z / math.sqrt(2.0)))
        pdf = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
        return cdf + z * pdf
    s = expit(z)
    return s + z * s * (1.0 - s)


def scaled_width(neurons: int, scale: float = 1.0) -> int:
    """Hidden width after shrinking by ``scale`` (>= 1 unit)."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    return max(1, int(round(neurons / scale)))


@dataclass
class ModelState:
    params: dict[str, np.ndarray]
    slots: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)
    step: int = 0

    @property
    def n_layers(self) -> int:
        return sum(1 for k in self.params if k.startswith("W"))

    @property
    def input_dim(self) -> int:
        return self.params["W0"].shape[0]

    def copy(self) -> "ModelState":
        return ModelState(
            {k: v.copy() for k, v in self.params.items()},
            {s: {k: v.copy() for k, v in slot.items()} for s, slot in self.slots.items()},
            self.step,
        )


def init_model(cfg: HyperConfig, input_dim: int, seed: int, scale: float = 1.0) -> ModelState:
    """Weights uniform in +-sqrt(6 / fan_in), zero biases, PReLU slopes 0.25."""
    rng = np.random.default_rng(seed)
    width = scaled_width(cfg.neurons_per_layer, scale)
    dims = [input_dim] + [width] * cfg.layers + [1]
    params: dict[str, np.ndarray] = {}
    for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        limit = math.sqrt(6.0 / fan_in)
        params[f"W{i}"] = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        params[f"b{i}"] = np.zeros(fan_out)
        if cfg.activation is Activation.PRELU and i < cfg.layers:
            params[f"a{i}"] = np.full(fan_out, PRELU_INIT)
    return ModelState(params)


def _as_rng(rng) -> np.random.Generator | None:
    if rng is None or isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _check_input(model: ModelState, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise ShapeError(f"input shape {X.shape} does not match model input width {model.input_dim}")
    if np.isnan(X).any():
        raise NumericalError("input contains MISSING/NaN cells")
    return X


def _forward_cache(model: ModelState, cfg: HyperConfig, X: np.ndarray, training: bool, rng):
    p = model.params
    L = model.n_layers - 1
    rng = _as_rng(rng)
    drop = training and cfg.dropout_rate > 0
    if drop and rng is None:
        raise ValueError("training-mode dropout needs a seed or generator")
    h = X
    cache = []
    for i in range(L):
        z = h @ p[f"W{i}"] + p[f"b{i}"]
        alpha = p[f"a{i}"] if cfg.activation is Activation.PRELU else cfg.leaky_alpha
        a = activation_apply(cfg.activation, alpha, z)
        mask = None
        if drop:
            mask = (rng.random(a.shape) >= cfg.dropout_rate) / (1.0 - cfg.dropout_rate)
            a = a * mask
        cache.append((h, z, mask))
        h = a
    logit = (h @ p[f"W{L}"] + p[f"b{L}"])[:, 0]
    return np.clip(logit, -LOGIT_CLAMP, LOGIT_CLAMP), (cache, h, logit)


def forward_logits(model: ModelState, cfg: HyperConfig, X, training: bool = False, seed=None) -> np.ndarray:
    """Output logits clamped to +-30; ``forward`` is their sigmoid."""
    X = _check_input(model, X)
    return _forward_cache(model, cfg, X, training, seed)[0]


def forward(model: ModelState, cfg: HyperConfig, X, training: bool = False, seed=None) -> np.ndarray:
    """Positive-class probabilities for each row of ``X``.

    In training mode, inverted dropout is applied after every hidden
    activation with masks drawn from ``seed`` (an int or a Generator).
    """
    return expit(forward_logits(model, cfg, X, training, seed))


def regularization(model: ModelState, reg_type: RegType | str, reg_factor: float) -> float:
    """Penalty over weight matrices only."""
    reg_type = RegType(reg_type)
    if reg_factor == 0:
        return 0.0
    total = 0.0
    for k, W in model.params.items():
        if not k.startswith("W"):
            continue
        if reg_type in (RegType.L1, RegType.L1L2):
            total += np.abs(W).sum()
        if reg_type in (RegType.L2, RegType.L1L2):
            total += np.square(W).sum()
    return reg_factor * float(total)


def loss(
    probs,
    labels,
    positive_weight: float = 1.0,
    model: ModelState | None = None,
    reg_type: RegType | str = RegType.L2,
    reg_factor: float = 0.0,
) -> float:
    """Weighted binary cross-entropy (batch mean) plus the weight penalty."""
    probs = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if not np.all((probs > 0) & (probs < 1)):
        raise NumericalError("probabilities must lie strictly inside (0, 1)")
    bce = -(positive_weight * y * np.log(probs) + (1.0 - y) * np.log1p(-probs))
    penalty = regularization(model, reg_type, reg_factor) if model is not None else 0.0
    return float(bce.mean()) + penalty


def loss_from_logits(
    logits,
    labels,
    positive_weight: float = 1.0,
    model: ModelState | None = None,
    reg_type: RegType | str = RegType.L2,
    reg_factor: float = 0.0,
) -> float:
    """Same value as ``loss(sigmoid(logits), ...)`` without cancellation near p = 0 or 1."""
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    # -log(sigmoid(z)) = softplus(-z), -log(1 - sigmoid(z)) = softplus(z)
    bce = positive_weight * y * np.logaddexp(0.0, -z) + (1.0 - y) * np.logaddexp(0.0, z)
    penalty = regularization(model, reg_type, reg_factor) if model is not None else 0.0
    return float(bce.mean()) + penalty


def backward(
    model: ModelState,
    cfg: HyperConfig,
    X,
    labels,
    positive_weight: float = 1.0,
    seed=None,
    training: bool = True,
) -> tuple[dict[str, np.ndarray], float]:
    """Exact gradients of ``loss`` for every parameter, and the loss itself.

    With the same ``seed`` the dropout masks equal those of the paired
    ``forward`` call.
    """
    X = _check_input(model, X)
    y = np.asarray(labels, dtype=np.float64)
    if y.shape != (X.shape[0],):
        raise ShapeError(f"{y.shape[0] if y.ndim else 0} labels for {X.shape[0]} rows")
    p = model.params
    L = model.n_layers - 1
    clamped, (cache, h_last, logit) = _forward_cache(model, cfg, X, training, seed)
    probs = expit(clamped)
    value = loss_from_logits(clamped, y, positive_weight, model, cfg.reg_type, cfg.reg_factor)

    n = X.shape[0]
    inside = (logit > -LOGIT_CLAMP) & (logit < LOGIT_CLAMP)
    dz = ((positive_weight * y * (probs - 1.0) + (1.0 - y) * probs) / n * inside)[:, None]

    grads: dict[str, np.ndarray] = {}
    grads[f"W{L}"] = h_last.T @ dz
    grads[f"b{L}"] = dz.sum(axis=0)
    dh = dz @ p[f"W{L}"].T
    for i in range(L - 1, -1, -1):
        h_in, z, mask = cache[i]
        if mask is not None:
            dh = dh * mask
        if cfg.activation is Activation.PRELU:
            alpha = p[f"a{i}"]
            grads[f"a{i}"] = np.sum(dh * np.minimum(z, 0.0), axis=0)
        else:
            alpha = cfg.leaky_alpha
        dz = dh * _activation_grad(cfg.activation, alpha, z)
        grads[f"W{i}"] = h_in.T @ dz
        grads[f"b{i}"] = dz.sum(axis=0)
        if i > 0:
            dh = dz @ p[f"W{i}"].T

    if cfg.reg_factor:
        for k in grads:
            if not k.startswith("W"):
                continue
            W = p[k]
            if cfg.reg_type in (RegType.L1, RegType.L1L2):
                grads[k] = grads[k] + cfg.reg_factor * np.sign(W)
            if cfg.reg_type in (RegType.L2, RegType.L1L2):
                grads[k] = grads[k] + 2.0 * cfg.reg_factor * W
    return {k: grads[k] for k in p}, value


BETA1, BETA2, EPS = 0.9, 0.999, 1e-8
RMS_DECAY, RMS_MOMENTUM = 0.9, 0.9
ADADELTA_RHO, ADADELTA_EPS = 0.95, 1e-6


def optimizer_step(state: ModelState, grads: dict[str, np.ndarray], cfg: HyperConfig) -> ModelState:
    """Apply one update of ``cfg.optimizer`` in place and return ``state``."""
    state.step += 1
    t = state.step
    lr = cfg.learning_rate
    opt = cfg.optimizer

    def slot(name: str, key: str) -> np.ndarray:
        bucket = state.slots.setdefault(name, {})
        if key not in bucket:
            bucket[key] = np.zeros_like(state.params[key])
        return bucket[key]

    # Adam-family bias corrections are folded into the step size and epsilon:
    # m_hat / (sqrt(v_hat) + eps) == c1 * m / (sqrt(v) + eps * sqrt(1 - b2^t)), c1 = sqrt(1 - b2^t) / (1 - b1^t)
    bc1 = 1.0 - BETA1**t
    bc2 = math.sqrt(1.0 - BETA2**t)
    for key, g in grads.items():
        theta = state.params[key]
        g2 = np.square(g)
        if opt in (Optimizer.ADAM, Optimizer.NADAM, Optimizer.ADAMAX):
            m = slot("m", key)
            m *= BETA1
            m += (1 - BETA1) * g
            if opt is Optimizer.ADAMAX:
                u = slot("u", key)
                u *= BETA2
                np.maximum(u, np.abs(g), out=u)
                step = np.add(u, EPS)
                np.divide(m, step, out=step)
                step *= lr / bc1
                theta -= step
                continue
            v = slot("v", key)
            v *= BETA2
            g2 *= 1 - BETA2
            v += g2
            if opt is Optimizer.ADAM:
                step = m * (lr * bc2 / bc1)
            else:
                # Nesterov look-ahead on the first moment (Dozat)
                step = m * (lr * bc2 * BETA1 / (1.0 - BETA1 ** (t + 1)))
                step += g * (lr * bc2 * (1 - BETA1) / bc1)
            denom = np.sqrt(v, out=g2)
            denom += EPS * bc2
            step /= denom
            theta -= step
        elif opt is Optimizer.RMSPROP_MOMENTUM:
            ms = slot("ms", key)
            ms *= RMS_DECAY
            g2 *= 1 - RMS_DECAY
            ms += g2
            denom = np.add(ms, EPS, out=g2)
            np.sqrt(denom, out=denom)
            vel = slot("velocity", key)
            vel *= RMS_MOMENTUM
            step = np.divide(g, denom, out=denom)
            step *= lr
            vel += step
            theta -= vel
        elif opt is Optimizer.ADAGRAD:
            acc = slot("accumulator", key)
            acc += g2
            denom = np.sqrt(acc, out=g2)
            denom += EPS
            step = np.divide(g, denom, out=denom)
            step *= lr
            theta -= step
        else:
            eg = slot("grad_sq", key)
            eg *= ADADELTA_RHO
            g2 *= 1 - ADADELTA_RHO
            eg += g2
            edx = slot("delta_sq", key)
            delta = np.add(edx, ADADELTA_EPS)
            np.sqrt(delta, out=delta)
            denom = np.add(eg, ADADELTA_EPS, out=g2)
            np.sqrt(denom, out=denom)
            delta /= denom
            delta *= g
            np.negative(delta, out=delta)
            edx *= ADADELTA_RHO
            np.square(delta, out=denom)
            denom *= 1 - ADADELTA_RHO
            edx += denom
            delta *= lr
            theta += delta
    return state


def predict_class(model: ModelState, cfg: HyperConfig, X, threshold: float = 0.5) -> np.ndarray:
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold {threshold} outside [0, 1]")
    return (forward(model, cfg, X) >= threshold).astype(np.int64)


@dataclass
class TrainReport:
    train_loss: list[float]
    val_f1: list[float]
    best_epoch: int
    initial_loss: float
    positive_weight: float
    wall_time: float = 0.0

    @property
    def best_val_f1(self) -> float:
        return self.val_f1[self.best_epoch] if self.val_f1 else 0.0

    def to_dict(self, include_time: bool = False) -> dict:
        d = asdict(self)
        if not include_time:
            d.pop("wall_time")
        return d


@dataclass(frozen=True)
class TrainSettings:
    batch_size: int = 32
    max_epochs: int = 100
    patience: int = 10
    scale: float = 1.0


def _seeds(seed: int, n: int) -> list[int]:
    return [int(s.generate_state(1, np.uint64)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def train(
    train_set: LabeledDataset,
    validation_set: LabeledDataset,
    cfg: HyperConfig,
    strategy: ResampleStrategy,
    seed: int,
    settings: TrainSettings = TrainSettings(),
) -> tuple[ModelState, TrainReport]:
    """Minibatch training with early stopping on validation F1.

    Resampling, initialization, per-epoch shuffling and dropout each draw
    from an independent stream derived from ``seed``, so Raw and
    ClassWeighted runs see identical batches and masks.
    """
    started = time.perf_counter()
    if train_set.features.n_cols != validation_set.features.n_cols:
        raise ShapeError(
            f"train width {train_set.features.n_cols} != validation width {validation_set.features.n_cols}"
        )
    resample_seed, init_seed, shuffle_seed, dropout_seed = _seeds(seed, 4)
    data, weight = apply_strategy(train_set, strategy, resample_seed)
    X = data.features.dense()
    y = data.labels.astype(np.float64)
    X_val = validation_set.features.dense()
    y_val = validation_set.labels

    model = init_model(cfg, X.shape[1], init_seed, settings.scale)
    shuffle_rng = np.random.default_rng(shuffle_seed)
    dropout_rng = np.random.default_rng(dropout_seed)

    initial_loss = loss_from_logits(forward_logits(model, cfg, X), y, weight, model, cfg.reg_type, cfg.reg_factor)
    losses: list[float] = []
    f1s: list[float] = []
    best = (-1.0, -1, model.copy())
    stale = 0
    for epoch in range(settings.max_epochs):
        order = shuffle_rng.permutation(len(y))
        total = 0.0
        for start in range(0, len(y), settings.batch_size):
            idx = order[start : start + settings.batch_size]
            grads, value = backward(model, cfg, X[idx], y[idx], weight, dropout_rng)
            optimizer_step(model, grads, cfg)
            total += value * len(idx)
        losses.append(total / len(y))
        if not all(np.all(np.isfinite(v)) for v in model.params.values()):
            raise NumericalError(f"non-finite parameters after epoch {epoch}")
        f1 = f1_score(predict_class(model, cfg, X_val), y_val)
        f1s.append(f1)
        if f1 > best[0]:
            best = (f1, epoch, model.copy())
            stale = 0
        else:
            stale += 1
            if stale >= settings.patience:
                break

    report = TrainReport(losses, f1s, best[1], initial_loss, weight, time.perf_counter() - started)
    return best[2], report


def _array_bytes(a: np.ndarray) -> bytes:
    buf = io.BytesIO()
    np.lib.format.write_array(buf, np.ascontiguousarray(a), allow_pickle=False)
    return buf.getvalue()


def save_checkpoint(path, model: ModelState, cfg: HyperConfig, meta: dict | None = None) -> Path:
    """Write an ``.npz`` container: one ``.npy`` member per array plus ``meta.json``.

    Member timestamps are fixed so identical models give identical bytes.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "format": "stayforge-checkpoint",
        "version": CHECKPOINT_VERSION,
        "config": cfg.to_dict(),
        "step": model.step,
        "shapes": {k: list(v.shape) for k, v in model.params.items()},
        "slots": {s: sorted(b) for s, b in model.slots.items()},
        "meta": meta or {},
    }
    members = [("meta.json", json.dumps(header, sort_keys=True).encode())]
    members += [(f"param.{k}.npy", _array_bytes(v)) for k, v in sorted(model.params.items())]
    for s, bucket in sorted(model.slots.items()):
        members += [(f"slot.{s}.{k}.npy", _array_bytes(v)) for k, v in sorted(bucket.items())]
    with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as zf:
        for name, blob in members:
            info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
            info.compress_type = zipfile.ZIP_DEFLATED
            zf.writestr(info, blob)
    return path


def load_checkpoint(path) -> tuple[ModelState, HyperConfig, dict]:
    path = Path(path)
    try:
        zf = zipfile.ZipFile(path)
    except (FileNotFoundError, zipfile.BadZipFile) as exc:
        raise ParseError(f"{path}: not a readable checkpoint ({exc})") from None
    with zf:
        try:
            header = json.loads(zf.read("meta.json"))
        except KeyError:
            raise CheckpointMismatchError(f"{path}: missing meta.json") from None
        if header.get("format") != "stayforge-checkpoint" or header.get("version") != CHECKPOINT_VERSION:
            raise CheckpointMismatchError(f"{path}: unsupported checkpoint format/version")

        def load(name: str) -> np.ndarray:
            return np.lib.format.read_array(io.BytesIO(zf.read(name)), allow_pickle=False)

        params = {k: load(f"param.{k}.npy") for k in header["shapes"]}
        for k, shape in header["shapes"].items():
            if list(params[k].shape) != shape:
                raise CheckpointMismatchError(f"{path}: {k} has shape {params[k].shape}, header says {shape}")
        slots = {s: {k: load(f"slot.{s}.{k}.npy") for k in keys} for s, keys in header["slots"].items()}
    cfg = HyperConfig.from_dict(header["config"])
    return ModelState(params, slots, int(header["step"])), cfg, header["meta"]
