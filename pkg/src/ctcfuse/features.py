"""Audio, visual, and fused feature recipes.

Frame rate defaults to the video rate (one frame per 33 1/3 ms); hop and
window sizes are rounded to whole samples. Mel warping uses
mel(f) = 2595 * log10(1 + f / 700).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateUtterance,
    DimensionMismatch,
    EmptySignal,
    InsufficientData,
    LengthMismatch,
    OffsetTooLarge,
    SingularAlignment,
    ZeroPowerSignal,
)

FRAME_SHIFT_MS = 100.0 / 3.0
ENERGY_FLOOR = 1e-10
MODALITIES = ("audio", "video", "fused")

AUDIO = "audio"
VIDEO = "video"
FUSED = "fused"


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.float64))
        if self.sample_rate_hz <= 0:
            raise EmptySignal("sample rate must be positive")
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise EmptySignal("waveform needs at least one sample")
        if not np.all(np.isfinite(self.samples)):
            raise EmptySignal("waveform contains non-finite samples")

    def power(self) -> float:
        return float(np.mean(self.samples**2))


@dataclass
class FeatureSequence:
    """T x D matrix of frame vectors for one utterance in one modality."""

    frames: np.ndarray
    frame_shift_ms: float = FRAME_SHIFT_MS
    modality: str = AUDIO
    dim_labels: list[str] | None = None

    def __post_init__(self):
        self.frames = np.asarray(self.frames)
        if self.frames.ndim != 2 or self.frames.shape[0] < 1 or self.frames.shape[1] < 1:
            raise DimensionMismatch(f"frames must be T x D with T,D >= 1, got {self.frames.shape}")
        if not np.all(np.isfinite(self.frames)):
            raise DimensionMismatch("frames contain non-finite values")
        if self.frame_shift_ms <= 0:
            raise DimensionMismatch("frame_shift_ms must be positive")
        if self.modality not in MODALITIES:
            raise DimensionMismatch(f"unknown modality {self.modality!r}")
        if self.dim_labels is not None and len(self.dim_labels) != self.frames.shape[1]:
            raise DimensionMismatch("dim_labels length must match D")

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


@dataclass(frozen=True)
class LandmarkTrack:
    """18 mouth contour points plus stable anchor points, per frame."""

    points: np.ndarray  # (T, 18, 2)
    anchor_points: np.ndarray  # (T, A, 2), A >= 3

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=np.float64))
        object.__setattr__(self, "anchor_points", np.asarray(self.anchor_points, dtype=np.float64))
        if self.points.ndim != 3 or self.points.shape[1:] != (18, 2):
            raise DimensionMismatch(f"points must be (T, 18, 2), got {self.points.shape}")
        if (
            self.anchor_points.ndim != 3
            or self.anchor_points.shape[0] != self.points.shape[0]
            or self.anchor_points.shape[1] < 3
            or self.anchor_points.shape[2] != 2
        ):
            raise DimensionMismatch("anchor_points must be (T, A>=3, 2) matching T")
        if not (np.all(np.isfinite(self.points)) and np.all(np.isfinite(self.anchor_points))):
            raise DimensionMismatch("landmark coordinates must be finite")


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    basis: np.ndarray  # (D, M), orthonormal columns
    explained_variance: np.ndarray  # (M,), non-increasing

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64))
        object.__setattr__(self, "basis", np.asarray(self.basis, dtype=np.float64))
        object.__setattr__(
            self, "explained_variance", np.asarray(self.explained_variance, dtype=np.float64)
        )
        gram = self.basis.T @ self.basis
        if not np.allclose(gram, np.eye(self.basis.shape[1]), atol=1e-8):
            raise DimensionMismatch("basis columns must be orthonormal")
        ev = self.explained_variance
        if np.any(ev < 0) or np.any(np.diff(ev) > 1e-12):
            raise DimensionMismatch("explained variance must be non-negative and non-increasing")

    @property
    def input_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def num_components(self) -> int:
        return self.basis.shape[1]


@dataclass(frozen=True)
class FrameConfig:
    """Analysis framing shared by the audio feature extractors."""

    frame_shift_ms: float = FRAME_SHIFT_MS
    window_ms: float = FRAME_SHIFT_MS
    num_mels: int = 40
    fmin_hz: float = 0.0
    fmax_hz: float | None = None  # defaults to Nyquist
    num_cepstra: int = 12
    pitch_fmin_hz: float = 60.0
    pitch_fmax_hz: float = 400.0
    voicing_threshold: float = 0.3

    def hop_samples(self, rate: int) -> int:
        return max(1, int(round(rate * self.frame_shift_ms / 1000.0)))

    def window_samples(self, rate: int) -> int:
        return max(1, int(round(rate * self.window_ms / 1000.0)))


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def _frame_signal(w: Waveform, cfg: FrameConfig) -> tuple[np.ndarray, int]:
    hop = cfg.hop_samples(w.sample_rate_hz)
    win = cfg.window_samples(w.sample_rate_hz)
    n = w.samples.size
    if n < win:
        raise EmptySignal(f"waveform of {n} samples shorter than one {win}-sample window")
    num = (n - win) // hop + 1
    idx = np.arange(win)[None, :] + hop * np.arange(num)[:, None]
    return w.samples[idx], win


def mel_filterbank(num_mels: int, n_fft: int, rate: int, fmin: float, fmax: float) -> np.ndarray:
    """Triangular filters on mel-spaced centers, (num_mels, n_fft//2 + 1)."""
    mel_pts = np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), num_mels + 2)
    hz_pts = mel_to_hz(mel_pts)
    bin_freqs = np.arange(n_fft // 2 + 1) * rate / n_fft
    bank = np.zeros((num_mels, bin_freqs.size))
    for m in range(num_mels):
        left, center, right = hz_pts[m], hz_pts[m + 1], hz_pts[m + 2]
        up = (bin_freqs - left) / max(center - left, 1e-12)
        down = (right - bin_freqs) / max(right - center, 1e-12)
        bank[m] = np.clip(np.minimum(up, down), 0.0, None)
    return bank


def _log_mel_energies(w: Waveform, cfg: FrameConfig) -> np.ndarray:
    frames, win = _frame_signal(w, cfg)
    n_fft = 1 << (win - 1).bit_length()
    window = np.hanning(win)
    spec = np.abs(np.fft.rfft(frames * window, n=n_fft)) ** 2
    fmax = cfg.fmax_hz if cfg.fmax_hz is not None else w.sample_rate_hz / 2.0
    bank = mel_filterbank(cfg.num_mels, n_fft, w.sample_rate_hz, cfg.fmin_hz, fmax)
    energies = spec @ bank.T
    return np.log(np.maximum(energies, ENERGY_FLOOR))


def compute_fbank(w: Waveform, cfg: FrameConfig = FrameConfig()) -> FeatureSequence:
    """Log mel-filterbank energies, one row per frame (default 40 bins)."""
    logmel = _log_mel_energies(w, cfg)
    return FeatureSequence(logmel, cfg.frame_shift_ms, AUDIO)


def compute_mfcc(w: Waveform, cfg: FrameConfig = FrameConfig()) -> FeatureSequence:
    """Orthonormal DCT-II of the log-mel energies, coefficients 1..12 (C0 dropped)."""
    logmel = _log_mel_energies(w, cfg)
    n = cfg.num_mels
    k = np.arange(1, cfg.num_cepstra + 1)[:, None]
    basis = math.sqrt(2.0 / n) * np.cos(np.pi * k * (np.arange(n)[None, :] + 0.5) / n)
    return FeatureSequence(logmel @ basis.T, cfg.frame_shift_ms, AUDIO)


def compute_pitch_proxy(w: Waveform, cfg: FrameConfig = FrameConfig()) -> FeatureSequence:
    """Three pitch-related values per frame: log-F0 from the autocorrelation
    peak, the normalized peak height, and the log-F0 delta.

    Unvoiced frames (peak below the voicing threshold) carry the previous
    voiced log-F0 forward, or log(100) before any voiced frame occurs.
    """
    frames, win = _frame_signal(w, cfg)
    rate = w.sample_rate_hz
    lag_min = max(1, int(math.floor(rate / cfg.pitch_fmax_hz)))
    lag_max = min(win - 1, int(math.ceil(rate / cfg.pitch_fmin_hz)))
    if lag_max <= lag_min:
        raise EmptySignal("window too short for the pitch search range")
    n_fft = 1 << (2 * win - 1).bit_length()
    spec = np.fft.rfft(frames, n=n_fft)
    auto = np.fft.irfft(spec * np.conj(spec), n=n_fft)[:, : lag_max + 1]

    T = frames.shape[0]
    out = np.zeros((T, 3))
    last_logf0 = math.log(100.0)
    prev = None
    for t in range(T):
        r0 = auto[t, 0]
        if r0 <= 0:
            peak, lag = 0.0, lag_min
        else:
            seg = auto[t, lag_min : lag_max + 1] / r0
            k = int(np.argmax(seg))
            peak, lag = float(min(max(seg[k], 0.0), 1.0)), lag_min + k
        if peak > cfg.voicing_threshold:
            last_logf0 = math.log(rate / lag)
        out[t, 0] = last_logf0
        out[t, 1] = peak
        out[t, 2] = 0.0 if prev is None else out[t, 0] - prev
        prev = out[t, 0]
    return FeatureSequence(out, cfg.frame_shift_ms, AUDIO)


def cmvn(x: FeatureSequence) -> FeatureSequence:
    """Per-utterance, per-dimension mean/variance normalization.

    Dimensions with zero variance are centered only (becoming all-zero).
    """
    if x.num_frames < 2:
        raise DegenerateUtterance("normalization needs at least two frames")
    frames = np.asarray(x.frames, dtype=np.float64)
    mean = frames.mean(axis=0)
    centered = frames - mean
    std = centered.std(axis=0)
    scale = np.where(std > 0, std, 1.0)
    return FeatureSequence(centered / scale, x.frame_shift_ms, x.modality, x.dim_labels)


def stack_context(x: FeatureSequence, k: int) -> FeatureSequence:
    """Concatenate +/-k neighboring frames, replicating edges; D' = (2k+1) D."""
    if k < 0:
        raise DimensionMismatch("context radius must be >= 0")
    if k == 0:
        return x
    T = x.num_frames
    idx = np.clip(np.arange(T)[:, None] + np.arange(-k, k + 1)[None, :], 0, T - 1)
    stacked = x.frames[idx].reshape(T, (2 * k + 1) * x.dim)
    return FeatureSequence(stacked, x.frame_shift_ms, x.modality)


def add_noise_at_snr(w: Waveform, snr_db: float, seed) -> Waveform:
    """Add white Gaussian noise with variance P_signal / 10^(snr_db / 10)."""
    power = w.power()
    if power <= 0:
        raise ZeroPowerSignal("cannot set an SNR against a zero-power signal")
    noise_std = math.sqrt(power / 10.0 ** (snr_db / 10.0))
    rng = np.random.default_rng(seed)
    return Waveform(w.samples + rng.normal(0.0, noise_std, size=w.samples.shape), w.sample_rate_hz)


def snr_grid(high_db: float = 40.0, low_db: float = 20.0, levels: int = 10) -> list[float]:
    """Evenly spaced augmentation levels, default 40 dB down to 20 dB in 10 steps."""
    return list(np.linspace(high_db, low_db, levels))


def _affine_to_reference(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Least-squares 2-D affine map (3x2 matrix for [x, y, 1] rows) src -> dst."""
    design = np.hstack([src, np.ones((src.shape[0], 1))])
    if np.linalg.matrix_rank(design, tol=1e-9) < 3:
        raise SingularAlignment("anchor points are collinear")
    sol, *_ = np.linalg.lstsq(design, dst, rcond=None)
    return sol


def landmark_features(lm: LandmarkTrack) -> FeatureSequence:
    """72-dim visual vector: 36 normalized contour coordinates, 18 per-point
    speed magnitudes, 18 per-point acceleration magnitudes.

    Each frame is aligned to the track's average anchor configuration with a
    least-squares affine map, then the contour is centered on its centroid.
    Derivatives are central differences with one-sided edges.
    """
    T = lm.points.shape[0]
    if T < 3:
        raise DegenerateUtterance("kinematics need at least three frames")
    reference = lm.anchor_points.mean(axis=0)
    normalized = np.empty_like(lm.points)
    for t in range(T):
        m = _affine_to_reference(lm.anchor_points[t], reference)
        pts = np.hstack([lm.points[t], np.ones((18, 1))]) @ m
        normalized[t] = pts - pts.mean(axis=0)

    vel = np.empty_like(normalized)
    vel[1:-1] = (normalized[2:] - normalized[:-2]) / 2.0
    vel[0] = normalized[1] - normalized[0]
    vel[-1] = normalized[-1] - normalized[-2]
    acc = np.empty_like(normalized)
    acc[1:-1] = normalized[2:] - 2.0 * normalized[1:-1] + normalized[:-2]
    acc[0] = normalized[2] - 2.0 * normalized[1] + normalized[0]
    acc[-1] = normalized[-1] - 2.0 * normalized[-2] + normalized[-3]

    coords = normalized.reshape(T, 36)
    speed = np.linalg.norm(vel, axis=2)
    accel = np.linalg.norm(acc, axis=2)
    return FeatureSequence(np.hstack([coords, speed, accel]), FRAME_SHIFT_MS, VIDEO)


def fit_pca(data: np.ndarray, variance_target: float) -> PcaModel:
    """Smallest leading eigenbasis whose cumulative variance reaches the target."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] <= 1:
        raise InsufficientData("need more than one sample to fit")
    if not 0.0 < variance_target <= 1.0:
        raise InsufficientData("variance target must lie in (0, 1]")
    mean = data.mean(axis=0)
    centered = data - mean
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    eig = svals**2 / (data.shape[0] - 1)
    keep = eig > eig[0] * 1e-12 if eig.size and eig[0] > 0 else np.zeros(eig.size, bool)
    eig = eig[keep]
    vt = vt[keep]
    if eig.size == 0:
        raise InsufficientData("data has no variance")
    ratios = np.cumsum(eig) / eig.sum()
    m = int(np.searchsorted(ratios, variance_target - 1e-12) + 1)
    m = min(m, eig.size)
    return PcaModel(mean=mean, basis=vt[:m].T, explained_variance=eig[:m])


def apply_pca(model: PcaModel, x: FeatureSequence) -> FeatureSequence:
    if x.dim != model.input_dim:
        raise DimensionMismatch(f"model expects D={model.input_dim}, got {x.dim}")
    projected = (x.frames - model.mean) @ model.basis
    return FeatureSequence(projected, x.frame_shift_ms, x.modality)


def fuse(xs: list[FeatureSequence]) -> FeatureSequence:
    """Frame-wise concatenation of equally clocked streams."""
    if not xs:
        raise LengthMismatch("nothing to fuse")
    if len(xs) == 1:
        return xs[0]
    T = xs[0].num_frames
    shift = xs[0].frame_shift_ms
    for x in xs[1:]:
        if x.num_frames != T:
            raise LengthMismatch(f"frame counts differ: {T} vs {x.num_frames}")
        if abs(x.frame_shift_ms - shift) > 1e-9:
            raise LengthMismatch("frame shifts differ; resample before fusing")
    labels = None
    if all(x.dim_labels is not None for x in xs):
        labels = [l for x in xs for l in x.dim_labels]
    return FeatureSequence(np.hstack([x.frames for x in xs]), shift, FUSED, labels)


def shift_modality(x: FeatureSequence, offset_frames: int) -> FeatureSequence:
    """Time-shift a stream with edge replication; positive offsets delay it."""
    T = x.num_frames
    if abs(offset_frames) >= T:
        raise OffsetTooLarge(f"|offset| {abs(offset_frames)} must be < T {T}")
    if offset_frames == 0:
        return x
    idx = np.clip(np.arange(T) - offset_frames, 0, T - 1)
    return FeatureSequence(x.frames[idx], x.frame_shift_ms, x.modality, x.dim_labels)
