"""Synthetic audiovisual corpora with known alignments.

Each utterance samples words from a lexicon, expands them to phonemes, draws
per-phoneme durations (minimum plus a geometric tail), and emits Gaussian
class-conditional frames: audio frames from the phoneme's distribution and
video frames from its viseme's distribution, with the video segment
boundaries advanced by a configurable lead to mimic anticipatory mouth
motion. Gold segment boundaries for both modalities are kept.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .decode.lexicon import Lexicon
from .errors import DataError, IncompleteMap, ParseError, ZeroPowerSignal
from .features import AUDIO, VIDEO, FRAME_SHIFT_MS, FeatureSequence, snr_grid
from .fileio import read_fmat, write_fmat
from .units import LabelAlphabet, LabelSequence

DESK_PHONEMES = ("p", "b", "m", "f", "v", "t", "d", "s", "aa", "iy", "uw", "eh")
DESK_VISEME_GROUPS = {
    "lips-closed": ("p", "b", "m"),
    "lip-teeth": ("f", "v"),
    "tongue": ("t", "d", "s"),
    "open": ("aa", "iy", "uw", "eh"),
}

FULL_PHONEMES = (
    "aa", "ae", "ah", "ao", "aw", "ax", "axr", "ay", "b", "ch", "d", "dh",
    "dx", "eh", "el", "em", "en", "er", "ey", "f", "g", "hh", "ih", "iy",
    "jh", "k", "l", "m", "n", "ng", "ow", "oy", "p", "r", "s", "sh", "t",
    "th", "uh", "uw", "v", "w", "y", "z", "zh",
)
FULL_VISEME_GROUPS = {
    "bilabial": ("p", "b", "m", "em"),
    "labiodental": ("f", "v"),
    "dental": ("th", "dh"),
    "alveolar": ("t", "d", "n", "s", "z", "dx", "en"),
    "palatal": ("sh", "zh", "ch", "jh"),
    "velar": ("k", "g", "ng"),
    "liquid": ("l", "r", "el", "er", "axr"),
    "round-glide": ("w",),
    "spread-glide": ("y", "hh"),
    "round-vowel": ("ao", "ow", "uh", "uw", "oy", "aw"),
    "open-vowel": ("aa", "ah", "ax", "ae"),
    "front-vowel": ("eh", "ey", "ih", "iy", "ay"),
}


@dataclass(frozen=True)
class VisemeMap:
    """Total, surjective mapping from phoneme ids to viseme ids."""

    table: dict[int, int]
    phoneme_alphabet: LabelAlphabet = field(repr=False)
    viseme_alphabet: LabelAlphabet = field(repr=False)

    def __post_init__(self):
        for pid in range(1, self.phoneme_alphabet.size + 1):
            if pid not in self.table:
                raise IncompleteMap(f"phoneme {self.phoneme_alphabet.name_of(pid)!r} unmapped")
        image = set(self.table.values())
        if image != set(range(1, self.viseme_alphabet.size + 1)):
            raise IncompleteMap("mapping must cover every viseme class")

    def viseme_of(self, phoneme_id: int) -> int:
        return self.table[phoneme_id]

    def map_ids(self, ids) -> tuple[int, ...]:
        return tuple(self.table[int(i)] for i in ids)


def viseme_map_from_groups(alphabet: LabelAlphabet, groups: dict[str, tuple]) -> VisemeMap:
    viseme_alphabet = LabelAlphabet(tuple(groups))
    by_name = {p: v for v, members in groups.items() for p in members}
    table = {}
    for pid in range(1, alphabet.size + 1):
        name = alphabet.name_of(pid)
        if name not in by_name:
            raise IncompleteMap(f"phoneme {name!r} missing from the viseme grouping")
        table[pid] = viseme_alphabet.id_of(by_name[name])
    return VisemeMap(table, alphabet, viseme_alphabet)


def default_viseme_map(alphabet: LabelAlphabet) -> VisemeMap:
    """Built-in grouping: 12 classes for the 45-phoneme profile, 4 classes
    for the 12-phoneme desk profile."""
    units = set(alphabet.units)
    if units == set(FULL_PHONEMES):
        return viseme_map_from_groups(alphabet, FULL_VISEME_GROUPS)
    if units == set(DESK_PHONEMES):
        return viseme_map_from_groups(alphabet, DESK_VISEME_GROUPS)
    merged = {**FULL_VISEME_GROUPS}
    try:
        return viseme_map_from_groups(alphabet, merged)
    except IncompleteMap:
        raise IncompleteMap(
            "alphabet matches neither built-in profile; provide a custom grouping"
        ) from None


@dataclass
class CorpusConfig:
    alphabet: LabelAlphabet
    viseme_map: VisemeMap
    lexicon: Lexicon
    num_utterances: int = 500
    words_per_utterance: tuple[int, int] = (2, 4)
    min_duration_frames: int = 3
    duration_continue_p: float = 0.6  # geometric tail; mean extra = (1-p)/p
    audio_dim: int = 8
    video_dim: int = 6
    audio_mean_radius: float = 3.0
    video_mean_radius: float = 3.0
    emission_std: float = 0.4
    video_lead_frames: int = 3
    pad_frames: int = 0  # neutral head/tail frames; >= lead removes edge clamping
    snr_levels_db: tuple = tuple(snr_grid())
    seed: int = 0

    def __post_init__(self):
        if self.audio_dim < 1 or self.video_dim < 1:
            raise DataError("emission dims must be >= 1")
        if self.min_duration_frames < 1:
            raise DataError("minimum phoneme duration is one frame")
        if not 0.0 < self.duration_continue_p <= 1.0:
            raise DataError("duration_continue_p must lie in (0, 1]")
        if self.video_lead_frames < 0 or self.pad_frames < 0:
            raise DataError("video_lead_frames and pad_frames must be >= 0")


@dataclass
class Utterance:
    utt_id: str
    audio: FeatureSequence
    video: FeatureSequence
    phonemes: LabelSequence
    words: tuple[str, ...]
    segments_audio: list[tuple[int, int, int]]  # (phoneme_id, start, end) 1-based inclusive
    segments_video: list[tuple[int, int, int]]


def _reject_sample_sphere(rng, count: int, dim: int, radius: float) -> np.ndarray:
    floor = radius * (0.7 if count <= 2 * dim else 0.35)
    for _ in range(500):
        pts = rng.normal(size=(count, dim))
        pts *= radius / np.linalg.norm(pts, axis=1, keepdims=True)
        d = np.linalg.norm(pts[:, None] - pts[None, :], axis=2)
        np.fill_diagonal(d, np.inf)
        if d.min() >= floor:
            return pts
    raise DataError(f"could not place {count} separated class means in {dim} dims")


def _spread_means(rng, count: int, dim: int, radius: float) -> np.ndarray:
    """Class means on a sphere with one deliberately close pair.

    count-1 means are spread by rejection sampling; the last is a companion
    of the most isolated one at 0.45x the global minimum distance. The close
    pair sets the minimum pairwise distance while every other pair stays far
    beyond it, so classification error concentrates in a single confusable
    pair instead of accumulating across many borderline ones.
    """
    if count <= 3:
        return _reject_sample_sphere(rng, count, dim, radius)
    base = _reject_sample_sphere(rng, count - 1, dim, radius)
    d = np.linalg.norm(base[:, None] - base[None, :], axis=2)
    np.fill_diagonal(d, np.inf)
    anchor = int(np.argmax(d.min(axis=1)))
    delta = 0.45 * float(d.min())
    companion = base[anchor] * (1.0 + delta / np.linalg.norm(base[anchor]))
    return np.vstack([base, companion])


def emission_means(cfg: CorpusConfig) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic per-phoneme audio means and per-viseme video means."""
    rng = np.random.default_rng([cfg.seed, 0])
    audio = _spread_means(rng, cfg.alphabet.size, cfg.audio_dim, cfg.audio_mean_radius)
    video = _spread_means(
        rng, cfg.viseme_map.viseme_alphabet.size, cfg.video_dim, cfg.video_mean_radius
    )
    return audio, video


def min_mean_distance(means: np.ndarray) -> float:
    d = np.linalg.norm(means[:, None] - means[None, :], axis=2)
    np.fill_diagonal(d, np.inf)
    return float(d.min())


def generate_corpus(cfg: CorpusConfig) -> list[Utterance]:
    audio_means, video_means = emission_means(cfg)
    out = []
    for i in range(cfg.num_utterances):
        rng = np.random.default_rng([cfg.seed, i + 1])
        out.append(_generate_utterance(cfg, rng, f"utt{i:05d}", audio_means, video_means))
    return out


def _generate_utterance(cfg, rng, utt_id, audio_means, video_means) -> Utterance:
    lo, hi = cfg.words_per_utterance
    n_words = int(rng.integers(lo, hi + 1))
    words = [cfg.lexicon.words[int(k)] for k in rng.integers(0, len(cfg.lexicon.words), n_words)]
    phonemes: list[int] = []
    for w in words:
        prons = cfg.lexicon.entries[w]
        phonemes.extend(prons[int(rng.integers(0, len(prons)))])

    pad = cfg.pad_frames
    durations = [
        cfg.min_duration_frames + int(rng.geometric(cfg.duration_continue_p)) - 1
        for _ in phonemes
    ]
    starts = pad + np.concatenate([[0], np.cumsum(durations)[:-1]])
    total = pad + int(np.sum(durations)) + pad

    v_starts = []
    prev = -1
    for k, s in enumerate(starts):
        vs = max(int(s) - cfg.video_lead_frames, prev + 1, 0)
        v_starts.append(vs)
        prev = vs

    # neutral (origin-centered) frames everywhere first; segments overwrite
    audio = rng.normal(scale=cfg.emission_std, size=(total, cfg.audio_dim))
    video = rng.normal(scale=cfg.emission_std, size=(total, cfg.video_dim))
    seg_a, seg_v = [], []
    for k, ph in enumerate(phonemes):
        a0 = int(starts[k])
        a1 = int(starts[k] + durations[k]) - 1
        seg_a.append((ph, a0 + 1, a1 + 1))
        audio[a0 : a1 + 1] = audio_means[ph - 1] + rng.normal(
            scale=cfg.emission_std, size=(a1 - a0 + 1, cfg.audio_dim)
        )
    last_v_end = int(starts[-1] + durations[-1]) - 1 - min(cfg.video_lead_frames, pad)
    for k, ph in enumerate(phonemes):
        v0 = v_starts[k]
        v1 = (v_starts[k + 1] - 1) if k + 1 < len(phonemes) else last_v_end
        seg_v.append((ph, v0 + 1, v1 + 1))
        vis = cfg.viseme_map.viseme_of(ph)
        video[v0 : v1 + 1] = video_means[vis - 1] + rng.normal(
            scale=cfg.emission_std, size=(v1 - v0 + 1, cfg.video_dim)
        )

    return Utterance(
        utt_id=utt_id,
        audio=FeatureSequence(audio.astype(np.float32), FRAME_SHIFT_MS, AUDIO),
        video=FeatureSequence(video.astype(np.float32), FRAME_SHIFT_MS, VIDEO),
        phonemes=LabelSequence(tuple(phonemes), cfg.alphabet),
        words=tuple(words),
        segments_audio=seg_a,
        segments_video=seg_v,
    )


def desk_lexicon(
    alphabet: LabelAlphabet,
    num_words: int = 16,
    pron_length: tuple[int, int] = (2, 4),
    seed: int = 0,
    viseme_map: VisemeMap | None = None,
) -> Lexicon:
    """Random unique pronunciations; with a viseme map, consecutive phonemes
    are kept in distinct viseme classes so video segments never merge."""
    rng = np.random.default_rng([seed, 7])
    entries: dict[str, list[tuple[int, ...]]] = {}
    used = set()
    attempts = 0
    while len(entries) < num_words and attempts < 10000:
        attempts += 1
        length = int(rng.integers(pron_length[0], pron_length[1] + 1))
        pron = []
        for _ in range(length):
            candidates = list(range(1, alphabet.size + 1))
            if pron:
                candidates = [c for c in candidates if c != pron[-1]]
                if viseme_map is not None:
                    prev_vis = viseme_map.viseme_of(pron[-1])
                    narrowed = [c for c in candidates if viseme_map.viseme_of(c) != prev_vis]
                    candidates = narrowed or candidates
            pron.append(int(candidates[int(rng.integers(0, len(candidates)))]))
        key = tuple(pron)
        if key in used:
            continue
        used.add(key)
        entries[f"w{len(entries):02d}"] = [key]
    if len(entries) < num_words:
        raise DataError("could not build enough unique pronunciations")
    return Lexicon(entries, alphabet)


def corrupt_features(x: FeatureSequence, snr_db, seed) -> FeatureSequence:
    """Feature-space analog of waveform noising: Gaussian noise whose variance
    is the mean squared entry divided by 10^(snr/10). None or +inf is a
    no-noise sentinel."""
    if snr_db is None or math.isinf(snr_db):
        return x
    power = float(np.mean(np.asarray(x.frames, dtype=np.float64) ** 2))
    if power <= 0:
        raise ZeroPowerSignal("cannot set an SNR against zero-power features")
    std = math.sqrt(power / 10.0 ** (snr_db / 10.0))
    rng = np.random.default_rng(seed)
    noisy = x.frames + rng.normal(scale=std, size=x.frames.shape)
    return FeatureSequence(
        noisy.astype(x.frames.dtype), x.frame_shift_ms, x.modality, x.dim_labels
    )


# --- corpus directory layout --------------------------------------------------


def write_corpus(directory, utterances: list[Utterance], cfg: CorpusConfig) -> None:
    directory = Path(directory)
    (directory / "audio").mkdir(parents=True, exist_ok=True)
    (directory / "video").mkdir(parents=True, exist_ok=True)
    for u in utterances:
        write_fmat(directory / "audio" / f"{u.utt_id}.fmat", u.audio.frames)
        write_fmat(directory / "video" / f"{u.utt_id}.fmat", u.video.frames)
    with open(directory / "labels.txt", "w") as fh:
        for u in utterances:
            fh.write(f"{u.utt_id} {' '.join(u.phonemes.names())}\n")
    with open(directory / "words.txt", "w") as fh:
        for u in utterances:
            fh.write(f"{u.utt_id} {' '.join(u.words)}\n")
    for name, attr in (("segments_audio.txt", "segments_audio"), ("segments_video.txt", "segments_video")):
        with open(directory / name, "w") as fh:
            for u in utterances:
                for ph, s, e in getattr(u, attr):
                    fh.write(f"{u.utt_id} {cfg.alphabet.name_of(ph)} {s} {e}\n")
    meta = {
        "seed": cfg.seed,
        "alphabet": list(cfg.alphabet.units),
        "visemes": list(cfg.viseme_map.viseme_alphabet.units),
        "viseme_table": {str(k): v for k, v in cfg.viseme_map.table.items()},
        "lexicon": {w: [list(p) for p in prons] for w, prons in cfg.lexicon.entries.items()},
        "num_utterances": cfg.num_utterances,
        "words_per_utterance": list(cfg.words_per_utterance),
        "min_duration_frames": cfg.min_duration_frames,
        "duration_continue_p": cfg.duration_continue_p,
        "audio_dim": cfg.audio_dim,
        "video_dim": cfg.video_dim,
        "audio_mean_radius": cfg.audio_mean_radius,
        "video_mean_radius": cfg.video_mean_radius,
        "emission_std": cfg.emission_std,
        "video_lead_frames": cfg.video_lead_frames,
        "snr_levels_db": list(cfg.snr_levels_db),
    }
    with open(directory / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_corpus(directory) -> tuple[list[Utterance], CorpusConfig]:
    directory = Path(directory)
    meta_path = directory / "meta.json"
    if not meta_path.exists():
        raise ParseError(f"{meta_path}: missing corpus metadata")
    with open(meta_path) as fh:
        meta = json.load(fh)
    alphabet = LabelAlphabet(tuple(meta["alphabet"]))
    viseme_alphabet = LabelAlphabet(tuple(meta["visemes"]))
    table = {int(k): int(v) for k, v in meta["viseme_table"].items()}
    vmap = VisemeMap(table, alphabet, viseme_alphabet)
    lexicon = Lexicon(
        {w: [tuple(p) for p in prons] for w, prons in meta["lexicon"].items()}, alphabet
    )
    cfg = CorpusConfig(
        alphabet=alphabet,
        viseme_map=vmap,
        lexicon=lexicon,
        num_utterances=meta["num_utterances"],
        words_per_utterance=tuple(meta["words_per_utterance"]),
        min_duration_frames=meta["min_duration_frames"],
        duration_continue_p=meta["duration_continue_p"],
        audio_dim=meta["audio_dim"],
        video_dim=meta["video_dim"],
        audio_mean_radius=meta["audio_mean_radius"],
        video_mean_radius=meta["video_mean_radius"],
        emission_std=meta["emission_std"],
        video_lead_frames=meta["video_lead_frames"],
        snr_levels_db=tuple(meta["snr_levels_db"]),
        seed=meta["seed"],
    )

    labels = _read_keyed_lines(directory / "labels.txt")
    words = _read_keyed_lines(directory / "words.txt")
    seg_a = _read_segments(directory / "segments_audio.txt", alphabet)
    seg_v = _read_segments(directory / "segments_video.txt", alphabet)

    utterances = []
    for fmat in sorted((directory / "audio").glob("*.fmat")):
        utt_id = fmat.stem
        video_path = directory / "video" / f"{utt_id}.fmat"
        if not video_path.exists():
            raise ParseError(f"{video_path}: missing video features for {utt_id}")
        for table_name, store in (("labels.txt", labels), ("words.txt", words)):
            if utt_id not in store:
                raise ParseError(f"{directory / table_name}: no line for utterance {utt_id}")
        if utt_id not in seg_a or utt_id not in seg_v:
            raise ParseError(f"{directory}: missing segments for utterance {utt_id}")
        utterances.append(
            Utterance(
                utt_id=utt_id,
                audio=FeatureSequence(read_fmat(fmat), FRAME_SHIFT_MS, AUDIO),
                video=FeatureSequence(read_fmat(video_path), FRAME_SHIFT_MS, VIDEO),
                phonemes=LabelSequence.from_names(labels[utt_id], alphabet),
                words=tuple(words[utt_id]),
                segments_audio=seg_a[utt_id],
                segments_video=seg_v[utt_id],
            )
        )
    return utterances, cfg


def _read_keyed_lines(path) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 2:
                raise ParseError(f"{path}:{lineno}: expected `utt tokens...`")
            out[parts[0]] = parts[1:]
    return out


def _read_segments(path, alphabet) -> dict[str, list[tuple[int, int, int]]]:
    out: dict[str, list[tuple[int, int, int]]] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise ParseError(f"{path}:{lineno}: expected `utt phoneme start end`")
            try:
                rec = (alphabet.id_of(parts[1]), int(parts[2]), int(parts[3]))
            except (ValueError, DataError) as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            out.setdefault(parts[0], []).append(rec)
    return out


def desk_corpus_config(
    num_utterances: int = 500,
    seed: int = 0,
    video_lead_frames: int = 3,
    viseme_alternating: bool = True,
    **overrides,
) -> CorpusConfig:
    """Default 12-phoneme / 4-viseme profile with a generated lexicon."""
    alphabet = LabelAlphabet(DESK_PHONEMES)
    vmap = default_viseme_map(alphabet)
    lex = desk_lexicon(alphabet, seed=seed, viseme_map=vmap if viseme_alternating else None)
    return CorpusConfig(
        alphabet=alphabet,
        viseme_map=vmap,
        lexicon=lex,
        num_utterances=num_utterances,
        video_lead_frames=video_lead_frames,
        seed=seed,
        **overrides,
    )


def full_profile_config(num_utterances: int = 50, seed: int = 0, **overrides) -> CorpusConfig:
    """45-phoneme / 12-viseme profile for shape parity with large setups."""
    alphabet = LabelAlphabet(FULL_PHONEMES)
    vmap = default_viseme_map(alphabet)
    lex = desk_lexicon(alphabet, num_words=40, seed=seed, viseme_map=vmap)
    return CorpusConfig(
        alphabet=alphabet,
        viseme_map=vmap,
        lexicon=lex,
        num_utterances=num_utterances,
        audio_dim=overrides.pop("audio_dim", 12),
        video_dim=overrides.pop("video_dim", 8),
        seed=seed,
        **overrides,
    )
