"""Stacked bidirectional LSTM with a softmax output layer, trained by
backpropagation through time against the sequence-loss gradient.

Training runs in float64 end to end so gradients can be checked against
finite differences; single-threaded runs are bit-reproducible.
"""

import logging
import struct
from dataclasses import dataclass, field

import numpy as np

from . import ctc
from .errors import CacheMismatch, DimensionMismatch, NonFiniteGradient, NumericError, ParseError
from .features import FeatureSequence
from .kernels import lstm_backward, lstm_forward
from .units import LabelSequence

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"CTCM"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class NetworkConfig:
    input_dim: int
    output_dim: int  # K + 1 (units plus blank)
    num_layers: int = 4
    hidden_size: int = 64  # per direction
    seed: int = 0

    def __post_init__(self):
        if self.num_layers < 1 or self.hidden_size < 1:
            raise DimensionMismatch("num_layers and hidden_size must be >= 1")
        if self.input_dim < 1 or self.output_dim < 2:
            raise DimensionMismatch("input_dim >= 1 and output_dim >= 2 required")
        if self.seed < 0:
            raise DimensionMismatch("seed must be non-negative")


@dataclass
class DirectionParams:
    wx: np.ndarray  # (4H, D_in)
    rec: np.ndarray  # (4H, H)
    bias: np.ndarray  # (4H,)


@dataclass
class LayerParams:
    fwd: DirectionParams
    bwd: DirectionParams


@dataclass
class NetworkParams:
    config: NetworkConfig
    layers: list[LayerParams]
    proj_w: np.ndarray  # (output_dim, 2H)
    proj_b: np.ndarray  # (output_dim,)

    def tensors(self) -> list[np.ndarray]:
        """All parameter tensors in declaration order."""
        out = []
        for layer in self.layers:
            for d in (layer.fwd, layer.bwd):
                out.extend([d.wx, d.rec, d.bias])
        out.extend([self.proj_w, self.proj_b])
        return out

    def copy(self) -> "NetworkParams":
        layers = [
            LayerParams(
                DirectionParams(l.fwd.wx.copy(), l.fwd.rec.copy(), l.fwd.bias.copy()),
                DirectionParams(l.bwd.wx.copy(), l.bwd.rec.copy(), l.bwd.bias.copy()),
            )
            for l in self.layers
        ]
        return NetworkParams(self.config, layers, self.proj_w.copy(), self.proj_b.copy())


@dataclass
class Posteriorgram:
    """Row-stochastic T x (K+1) matrix of per-frame output probabilities."""

    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.ndim != 2:
            raise DimensionMismatch("posteriorgram must be T x (K+1)")
        if np.any(self.probs <= 0.0) or np.any(self.probs >= 1.0):
            raise DimensionMismatch("posterior entries must lie strictly inside (0, 1)")
        if np.any(np.abs(self.probs.sum(axis=1) - 1.0) > 1e-9):
            raise DimensionMismatch("posterior rows must sum to 1")

    @property
    def num_frames(self) -> int:
        return self.probs.shape[0]


@dataclass
class ForwardCache:
    params: NetworkParams = field(repr=False)
    layer_inputs: list[np.ndarray] = field(repr=False, default_factory=list)
    direction_caches: list[tuple] = field(repr=False, default_factory=list)
    final_hidden: np.ndarray = field(repr=False, default=None)
    logits: np.ndarray = field(repr=False, default=None)


def _layer_input_dims(cfg: NetworkConfig) -> list[int]:
    return [cfg.input_dim] + [2 * cfg.hidden_size] * (cfg.num_layers - 1)


def init_params(cfg: NetworkConfig) -> NetworkParams:
    """Uniform [-0.1, 0.1] initialization with forget-gate biases at 1."""
    rng = np.random.default_rng(cfg.seed)
    H = cfg.hidden_size

    def direction(d_in: int) -> DirectionParams:
        wx = rng.uniform(-0.1, 0.1, size=(4 * H, d_in))
        rec = rng.uniform(-0.1, 0.1, size=(4 * H, H))
        bias = rng.uniform(-0.1, 0.1, size=4 * H)
        bias[H : 2 * H] = 1.0
        return DirectionParams(wx, rec, bias)

    layers = [LayerParams(direction(d), direction(d)) for d in _layer_input_dims(cfg)]
    proj_w = rng.uniform(-0.1, 0.1, size=(cfg.output_dim, 2 * H))
    proj_b = rng.uniform(-0.1, 0.1, size=cfg.output_dim)
    return NetworkParams(cfg, layers, proj_w, proj_b)


def _to_matrix(x) -> np.ndarray:
    frames = x.frames if isinstance(x, FeatureSequence) else x
    return np.ascontiguousarray(frames, dtype=np.float64)


def _run_direction(d: DirectionParams, inp: np.ndarray):
    zx = np.ascontiguousarray(inp @ d.wx.T + d.bias)
    return lstm_forward(zx, np.ascontiguousarray(d.rec))


def forward(params: NetworkParams, x) -> tuple[Posteriorgram, ForwardCache]:
    """Run the full stack; returns per-frame posteriors plus the activation
    cache the backward pass needs."""
    inp = _to_matrix(x)
    cfg = params.config
    if inp.shape[1] != cfg.input_dim:
        raise DimensionMismatch(f"network expects D={cfg.input_dim}, got {inp.shape[1]}")
    cache = ForwardCache(params=params)
    current = inp
    for layer in params.layers:
        cache.layer_inputs.append(current)
        rev = np.ascontiguousarray(current[::-1])
        h_f, c_f, g_f = _run_direction(layer.fwd, current)
        h_b, c_b, g_b = _run_direction(layer.bwd, rev)
        cache.direction_caches.append(((h_f, c_f, g_f), (h_b, c_b, g_b)))
        current = np.hstack([h_f, h_b[::-1]])
    cache.final_hidden = current
    cache.logits = current @ params.proj_w.T + params.proj_b
    if not np.all(np.isfinite(cache.logits)):
        raise NumericError("network activations overflowed")
    probs = ctc.softmax(cache.logits)
    if np.any(probs <= 0.0):
        raise NumericError("softmax underflowed to exact zero")
    return Posteriorgram(probs), cache


def backward(params: NetworkParams, cache: ForwardCache, d_logits: np.ndarray) -> NetworkParams:
    """Exact loss gradients for every parameter, shaped like the parameters."""
    if cache.params is not params:
        raise CacheMismatch("cache was produced by a different parameter set")
    d_logits = np.asarray(d_logits, dtype=np.float64)
    if d_logits.shape != cache.logits.shape:
        raise DimensionMismatch("upstream gradient shape mismatch")
    H = params.config.hidden_size

    g_proj_w = d_logits.T @ cache.final_hidden
    g_proj_b = d_logits.sum(axis=0)
    d_out = d_logits @ params.proj_w

    grad_layers = []
    for layer, inp, (cache_f, cache_b) in zip(
        reversed(params.layers), reversed(cache.layer_inputs), reversed(cache.direction_caches)
    ):
        h_f, c_f, g_f = cache_f
        h_b, c_b, g_b = cache_b
        inp_rev = np.ascontiguousarray(inp[::-1])

        dz_f = lstm_backward(
            np.ascontiguousarray(d_out[:, :H]), g_f, c_f, np.ascontiguousarray(layer.fwd.rec.T)
        )
        dz_b = lstm_backward(
            np.ascontiguousarray(d_out[::-1, H:]), g_b, c_b, np.ascontiguousarray(layer.bwd.rec.T)
        )

        def direction_grads(d: DirectionParams, dz, x_dir, h_dir):
            h_prev = np.vstack([np.zeros((1, H)), h_dir[:-1]])
            return DirectionParams(wx=dz.T @ x_dir, rec=dz.T @ h_prev, bias=dz.sum(axis=0))

        grad_layers.append(
            LayerParams(
                direction_grads(layer.fwd, dz_f, inp, h_f),
                direction_grads(layer.bwd, dz_b, inp_rev, h_b),
            )
        )
        d_out = dz_f @ layer.fwd.wx + (dz_b @ layer.bwd.wx)[::-1]

    grads = NetworkParams(params.config, list(reversed(grad_layers)), g_proj_w, g_proj_b)
    for t in grads.tensors():
        if not np.all(np.isfinite(t)):
            raise NonFiniteGradient("gradient contains non-finite values")
    return grads


def global_norm(grads: NetworkParams) -> float:
    return float(np.sqrt(sum(float(np.sum(t * t)) for t in grads.tensors())))


def sgd_step(params: NetworkParams, grads: NetworkParams, lr: float, clip_norm: float) -> NetworkParams:
    """Clip the global gradient norm, then take one descent step."""
    if lr <= 0 or clip_norm <= 0:
        raise DimensionMismatch("lr and clip_norm must be positive")
    norm = global_norm(grads)
    if not np.isfinite(norm):
        raise NonFiniteGradient(f"gradient norm is {norm}")
    scale = lr * (clip_norm / norm if norm > clip_norm else 1.0)
    new = params.copy()
    for dst, g in zip(new.tensors(), grads.tensors()):
        dst -= scale * g
    return new


@dataclass(frozen=True)
class TrainSchedule:
    epochs: int
    lr: float = 1e-2
    clip_norm: float = 5.0
    halve_on_regress: bool = True


@dataclass
class TrainResult:
    params: NetworkParams
    trace: list[tuple[int, float]]  # (epoch, heldout unit accuracy in percent)
    losses: list[float]  # mean train loss per epoch
    skipped: int


def _flatten(params: NetworkParams) -> np.ndarray:
    return np.concatenate([t.ravel() for t in params.tensors()])


def _greedy_accuracy(params: NetworkParams, heldout) -> float:
    from .decode.metrics import edit_distance_metrics
    from .decode.search import greedy_decode

    s = d = i = n = 0
    for x, z in heldout:
        y, _ = forward(params, x)
        hyp = greedy_decode(y.probs)
        m = edit_distance_metrics(z.ids, hyp)
        s, d, i, n = s + m.substitutions, d + m.deletions, i + m.insertions, n + m.length
    return 100.0 * (n - s - d - i) / n if n else 0.0


def train(cfg: NetworkConfig, corpus, schedule: TrainSchedule, heldout=()) -> TrainResult:
    """Per-utterance SGD over the sequence loss in seeded shuffled order.

    corpus/heldout: iterables of (features, LabelSequence). Utterances whose
    targets cannot fit their frame count are skipped with a warning.
    """
    params = init_params(cfg)
    items = list(corpus)
    held = list(heldout)
    trace: list[tuple[int, float]] = []
    losses: list[float] = []
    skipped = 0
    lr = schedule.lr
    best_acc = -np.inf
    for epoch in range(schedule.epochs):
        order = np.random.default_rng([cfg.seed, epoch]).permutation(len(items))
        total, count = 0.0, 0
        for idx in order:
            x, z = items[idx]
            mat = _to_matrix(x)
            ids = z.ids if isinstance(z, LabelSequence) else tuple(z)
            if mat.shape[0] < ctc.min_frames(ids):
                log.warning("skipping utterance %d: target does not fit %d frames", idx, mat.shape[0])
                skipped += 1
                continue
            _, cache = forward(params, mat)
            nll, d_logits = ctc.ctc_logits_loss_grad(cache.logits, ids)
            grads = backward(params, cache, d_logits)
            params = sgd_step(params, grads, lr, schedule.clip_norm)
            total += nll
            count += 1
        losses.append(total / max(count, 1))
        if held:
            acc = _greedy_accuracy(params, held)
            trace.append((epoch, acc))
            if schedule.halve_on_regress and acc < best_acc:
                lr *= 0.5
            best_acc = max(best_acc, acc)
    return TrainResult(params=params, trace=trace, losses=losses, skipped=skipped)


# --- checkpoint container ----------------------------------------------------


def save_checkpoint(path, params: NetworkParams) -> None:
    cfg = params.config
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(
            struct.pack(
                "<IIIIq", cfg.num_layers, cfg.hidden_size, cfg.input_dim, cfg.output_dim, cfg.seed
            )
        )
        for t in params.tensors():
            arr = np.ascontiguousarray(t, dtype="<f8")
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path) -> NetworkParams:
    with open(path, "rb") as fh:
        if fh.read(4) != CHECKPOINT_MAGIC:
            raise ParseError(f"{path}: not a checkpoint file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != CHECKPOINT_VERSION:
            raise ParseError(f"{path}: unsupported checkpoint version {version}")
        nl, hs, di, do, seed = struct.unpack("<IIIIq", fh.read(24))
        cfg = NetworkConfig(input_dim=di, output_dim=do, num_layers=nl, hidden_size=hs, seed=seed)
        params = init_params(cfg)
        for t in params.tensors():
            (ndim,) = struct.unpack("<I", fh.read(4))
            shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
            if shape != t.shape:
                raise ParseError(f"{path}: tensor shape {shape} does not match config {t.shape}")
            data = fh.read(int(np.prod(shape)) * 8)
            if len(data) != int(np.prod(shape)) * 8:
                raise ParseError(f"{path}: truncated tensor payload")
            t[...] = np.frombuffer(data, dtype="<f8").reshape(shape)
        if fh.read(1):
            raise ParseError(f"{path}: trailing bytes")
    return params
