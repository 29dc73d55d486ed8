"""Experiment assembly: JSON configs to trained systems, decodes, metric
tables, and alignment reports. The CLI is a thin argparse layer over this.
"""

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import numpy as np

from . import avcorpus as av
from . import model as mdl
from .decode import (
    greedy_decode,
    pooled_metrics,
    prefix_beam_search,
    uniform_unigram,
    viterbi_decode,
)
from .decode.wfst import build_grammar_fst, build_lexicon_fst, build_token_fst, compose
from .errors import ConfigError, DataError
from .features import FeatureSequence, apply_pca, cmvn, fit_pca, fuse, shift_modality, stack_context
from .units import LabelSequence

log = logging.getLogger(__name__)

SOURCES = ("audio", "video", "fused")
UNIT_CHOICES = ("phonemes", "visemes")


@dataclass
class FeatureSpec:
    source: str = "audio"
    cmvn: bool = True
    stack: int = 0
    snr_train: list | None = None  # None = clean; list cycles across utterances
    video_offset_frames: int = 0
    pca_target: float | None = None  # variance fraction; fit on the clean train split

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ConfigError(f"features.source must be one of {SOURCES}")
        if self.stack < 0:
            raise ConfigError("features.stack must be >= 0")
        if self.pca_target is not None and not 0.0 < self.pca_target <= 1.0:
            raise ConfigError("features.pca_target must lie in (0, 1]")


@dataclass
class ModelSpec:
    num_layers: int = 2
    hidden_size: int = 32
    seed: int = 1


@dataclass
class TrainSpec:
    epochs: int = 30
    lr: float = 0.05
    clip_norm: float = 5.0
    halve_on_regress: bool = True


@dataclass
class ExperimentConfig:
    corpus: dict
    seed: int = 0
    heldout: int = 100
    units: str = "phonemes"
    features: FeatureSpec = field(default_factory=FeatureSpec)
    model: ModelSpec = field(default_factory=ModelSpec)
    train: TrainSpec = field(default_factory=TrainSpec)

    def __post_init__(self):
        if self.units not in UNIT_CHOICES:
            raise ConfigError(f"units must be one of {UNIT_CHOICES}")
        if self.heldout < 0:
            raise ConfigError("heldout must be >= 0")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        try:
            return cls(
                corpus=raw["corpus"],
                seed=raw.get("seed", 0),
                heldout=raw.get("heldout", 100),
                units=raw.get("units", "phonemes"),
                features=FeatureSpec(**raw.get("features", {})),
                model=ModelSpec(**raw.get("model", {})),
                train=TrainSpec(**raw.get("train", {})),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad experiment config: {exc}") from None

    def to_dict(self) -> dict:
        return {
            "corpus": self.corpus,
            "seed": self.seed,
            "heldout": self.heldout,
            "units": self.units,
            "features": vars(self.features).copy(),
            "model": vars(self.model).copy(),
            "train": vars(self.train).copy(),
        }


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return ExperimentConfig.from_dict(raw)


def load_corpus(spec: dict) -> tuple[list[av.Utterance], av.CorpusConfig]:
    """corpus spec: {"path": dir} to read, or {"generate": {...}} to build."""
    if "path" in spec:
        return av.read_corpus(spec["path"])
    if "generate" in spec:
        params = dict(spec["generate"])
        profile = params.pop("profile", "desk")
        if profile == "desk":
            cfg = av.desk_corpus_config(**params)
        elif profile == "full":
            cfg = av.full_profile_config(**params)
        else:
            raise ConfigError(f"unknown corpus profile {profile!r}")
        return av.generate_corpus(cfg), cfg
    raise ConfigError("corpus spec needs a `path` or `generate` entry")


def split_heldout(utts, heldout: int):
    if heldout >= len(utts):
        raise ConfigError(f"heldout {heldout} >= corpus size {len(utts)}")
    if heldout == 0:
        return utts, []
    return utts[:-heldout], utts[-heldout:]


@dataclass
class Pipeline:
    """Turns corpus utterances into (feature matrix, target) training pairs."""

    spec: FeatureSpec
    corpus_cfg: av.CorpusConfig
    units: str
    seed: int
    pca_model: object = None

    @property
    def alphabet(self):
        if self.units == "visemes":
            return self.corpus_cfg.viseme_map.viseme_alphabet
        return self.corpus_cfg.alphabet

    def target(self, utt: av.Utterance) -> LabelSequence:
        if self.units == "visemes":
            vmap = self.corpus_cfg.viseme_map
            return LabelSequence(vmap.map_ids(utt.phonemes.ids), vmap.viseme_alphabet)
        return utt.phonemes

    def assemble(self, utt: av.Utterance, snr_db, noise_tag: int) -> np.ndarray:
        audio = FeatureSequence(
            utt.audio.frames.astype(np.float64), utt.audio.frame_shift_ms, "audio"
        )
        if snr_db is not None and self.spec.source in ("audio", "fused"):
            audio = av.corrupt_features(audio, snr_db, seed=[self.seed, noise_tag])
        if self.spec.source == "audio":
            feats = audio
        else:
            video = FeatureSequence(
                utt.video.frames.astype(np.float64), utt.video.frame_shift_ms, "video"
            )
            if self.spec.video_offset_frames:
                video = shift_modality(video, self.spec.video_offset_frames)
            feats = video if self.spec.source == "video" else fuse([audio, video])
        if self.spec.cmvn and feats.num_frames >= 2:
            feats = cmvn(feats)
        if self.spec.stack:
            feats = stack_context(feats, self.spec.stack)
        if self.pca_model is not None:
            feats = apply_pca(self.pca_model, feats)
        return feats.frames

    def ensure_pca(self, train_utts) -> None:
        """Fit the projection on pooled clean training features; deterministic,
        so separate processes (train, decode) reproduce the same model."""
        if self.spec.pca_target is None or self.pca_model is not None:
            return
        pooled = np.vstack([self.assemble(u, None, 0) for u in train_utts])
        self.pca_model = fit_pca(pooled, self.spec.pca_target)

    def train_pairs(self, utts) -> list[tuple[np.ndarray, LabelSequence]]:
        levels = self.spec.snr_train
        pairs = []
        for i, u in enumerate(utts):
            snr = None if not levels else levels[i % len(levels)]
            snr = None if snr in (None, "clean") else float(snr)
            pairs.append((self.assemble(u, snr, noise_tag=i), self.target(u)))
        return pairs

    def eval_pairs(self, utts, snr_db) -> list[tuple[np.ndarray, LabelSequence]]:
        snr = None if snr_db in (None, "clean") else float(snr_db)
        return [
            (self.assemble(u, snr, noise_tag=100000 + i), self.target(u))
            for i, u in enumerate(utts)
        ]

    def input_dim(self, utts) -> int:
        return self.assemble(utts[0], None, 0).shape[1]


@dataclass
class TrainedSystem:
    params: mdl.NetworkParams
    pipeline: Pipeline
    result: mdl.TrainResult


def train_system(cfg: ExperimentConfig, utts, corpus_cfg) -> TrainedSystem:
    pipeline = Pipeline(cfg.features, corpus_cfg, cfg.units, cfg.seed)
    train_utts, held_utts = split_heldout(utts, cfg.heldout)
    pipeline.ensure_pca(train_utts)
    pairs = pipeline.train_pairs(train_utts)
    held = pipeline.eval_pairs(held_utts, None)
    net_cfg = mdl.NetworkConfig(
        input_dim=pairs[0][0].shape[1],
        output_dim=pipeline.alphabet.size + 1,
        num_layers=cfg.model.num_layers,
        hidden_size=cfg.model.hidden_size,
        seed=cfg.model.seed,
    )
    schedule = mdl.TrainSchedule(
        epochs=cfg.train.epochs,
        lr=cfg.train.lr,
        clip_norm=cfg.train.clip_norm,
        halve_on_regress=cfg.train.halve_on_regress,
    )
    result = mdl.train(net_cfg, pairs, schedule, heldout=held)
    return TrainedSystem(params=result.params, pipeline=pipeline, result=result)


def _decode_one(params, mat) -> tuple[int, ...]:
    y, _ = mdl.forward(params, mat)
    return greedy_decode(y.probs)


def greedy_eval(params, pairs, jobs: int = 1):
    """Pooled greedy unit metrics over (matrix, target) pairs."""
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            hyps = list(pool.map(lambda p: _decode_one(params, p[0]), pairs))
    else:
        hyps = [_decode_one(params, mat) for mat, _ in pairs]
    return pooled_metrics([(z.ids, hyp) for (_, z), hyp in zip(pairs, hyps)])


def word_eval(system: TrainedSystem, utts, snr_db, mode: str = "beam", beam_width: int = 8,
              lm=None, jobs: int = 1):
    """Pooled word metrics; decodes through the corpus lexicon."""
    pipeline = system.pipeline
    lex = pipeline.corpus_cfg.lexicon
    if pipeline.units == "visemes":
        raise DataError("word decoding needs phoneme units")
    if lm is None:
        lm = uniform_unigram(lex.words)
    pairs = pipeline.eval_pairs(utts, snr_db)
    graph = None
    if mode == "wfst":
        graph = compose(
            compose(build_token_fst(pipeline.alphabet), build_lexicon_fst(lex)),
            build_grammar_fst(lm, lexicon_words=lex.words),
        )

    def decode(mat):
        y, _ = mdl.forward(system.params, mat)
        if mode == "greedy-map":
            return greedy_decode(y.probs)
        if mode == "wfst":
            return viterbi_decode(graph, y.probs).tokens
        hyps = prefix_beam_search(y.probs, beam_width=beam_width, lexicon=lex, lm=lm)
        return hyps[0].tokens if hyps else ()

    mats = [mat for mat, _ in pairs]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            hyps = list(pool.map(decode, mats))
    else:
        hyps = [decode(m) for m in mats]
    return pooled_metrics([(u.words, hyp) for u, hyp in zip(utts, hyps)])


def write_trace_csv(path, result: mdl.TrainResult) -> None:
    with open(path, "w") as fh:
        fh.write("epoch,heldout_unit_accuracy\n")
        for epoch, acc in result.trace:
            fh.write(f"{epoch},{acc:.4f}\n")


def write_config_echo(path, cfg: ExperimentConfig, extra: dict | None = None) -> None:
    from . import __version__

    payload = {"config": cfg.to_dict(), "tool_version": __version__}
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# --- condition matrix ---------------------------------------------------------


@dataclass
class MatrixRow:
    system: str
    train_condition: str
    test_snr: object
    wer: float
    unit_accuracy: float


def run_matrix(
    base: ExperimentConfig,
    utts,
    corpus_cfg,
    systems: list[str],
    train_conditions: dict[str, list | None],
    test_snrs: list,
    with_wer: bool = True,
    jobs: int = 1,
    sink: list | None = None,
) -> tuple[list[MatrixRow], dict[str, TrainedSystem]]:
    rows = sink if sink is not None else []
    trained: dict[str, TrainedSystem] = {}
    _, held_utts = split_heldout(utts, base.heldout)
    for system in systems:
        for cond_name, cond_levels in train_conditions.items():
            cfg = ExperimentConfig.from_dict(base.to_dict())
            cfg.features.source = system
            cfg.features.snr_train = cond_levels
            key = f"{system}/{cond_name}"
            log.info("training system %s", key)
            ts = train_system(cfg, utts, corpus_cfg)
            trained[key] = ts
            for snr in test_snrs:
                pairs = ts.pipeline.eval_pairs(held_utts, snr)
                unit_m = greedy_eval(ts.params, pairs, jobs=jobs)
                wer = math.nan
                if with_wer and cfg.units == "phonemes":
                    word_m = word_eval(ts, held_utts, snr, jobs=jobs)
                    wer = word_m.error_rate
                rows.append(
                    MatrixRow(
                        system=system,
                        train_condition=cond_name,
                        test_snr=snr,
                        wer=wer,
                        unit_accuracy=unit_m.accuracy,
                    )
                )
                log.info(
                    "%s @ %s: acc=%.2f wer=%s", key, snr, unit_m.accuracy,
                    "n/a" if math.isnan(wer) else f"{wer:.3f}",
                )
    return rows, trained


def write_matrix_csv(path, rows: list[MatrixRow]) -> None:
    with open(path, "w") as fh:
        fh.write("system,train_cond,test_snr,wer,acc\n")
        for r in rows:
            snr = "clean" if r.test_snr is None else r.test_snr
            wer = "" if math.isnan(r.wer) else f"{r.wer:.4f}"
            fh.write(f"{r.system},{r.train_condition},{snr},{wer},{r.unit_accuracy:.4f}\n")


def matrix_svg(path, rows: list[MatrixRow]) -> None:
    from .svgplot import line_chart

    series: dict[str, list[tuple[float, float]]] = {}
    for r in rows:
        snr = 50.0 if r.test_snr is None else float(r.test_snr)  # clean drawn at 50 dB
        series.setdefault(f"{r.system}/{r.train_condition}", []).append((snr, r.unit_accuracy))
    line_chart(path, series, x_label="test SNR (dB, clean at 50)",
               y_label="unit accuracy (%)", title="accuracy vs test condition")
