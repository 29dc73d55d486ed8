"""Command-line entry point.

Subcommands: gen-corpus, augment, extract, train, decode, eval, matrix,
analyze-align. Global flags: --config, --seed, --jobs, --frame-ms. The
CTCFUSE_LOG environment variable sets the log level. Exit codes: 0 success,
2 config error, 3 data error, 4 numeric error.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import alignment as al
from . import avcorpus as av
from . import experiment as ex
from . import model as mdl
from .decode import (
    greedy_decode,
    pooled_metrics,
    prefix_beam_search,
    read_arpa,
    read_lexicon,
    uniform_unigram,
    viterbi_decode,
)
from .decode.wfst import build_grammar_fst, build_lexicon_fst, build_token_fst, compose
from .errors import ConfigError, DataError, NoPathFound, NumericError
from .features import FRAME_SHIFT_MS, FrameConfig, Waveform, add_noise_at_snr
from .features import cmvn as apply_cmvn
from .features import compute_fbank, compute_mfcc, compute_pitch_proxy, fuse, stack_context
from .fileio import read_wav, write_fmat, write_wav

log = logging.getLogger("ctcfuse")


def _setup_logging():
    level = os.environ.get("CTCFUSE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _add_global_flags(parser, suppress=False):
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=d,
                        help="experiment config JSON (used by most subcommands)")
    parser.add_argument("--seed", type=int, default=d if suppress else None,
                        help="override the config seed")
    parser.add_argument("--jobs", type=int, default=d if suppress else 1,
                        help="utterance-level parallelism")
    parser.add_argument("--frame-ms", type=float,
                        default=d if suppress else FRAME_SHIFT_MS,
                        help="frame hop in milliseconds")


def build_parser() -> argparse.ArgumentParser:
    # the global flags are accepted both before and after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    _add_global_flags(common, suppress=True)
    parser = argparse.ArgumentParser(prog="ctcfuse", description=__doc__)
    parser.add_argument("--version", action="version", version=f"ctcfuse {__version__}")
    _add_global_flags(parser)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=argparse.ArgumentParser)

    p = sub.add_parser("gen-corpus", parents=[common], help="generate a synthetic corpus directory")
    p.add_argument("--out", required=True)
    p.add_argument("--utts", type=int, default=500)
    p.add_argument("--profile", choices=("desk", "full"), default="desk")
    p.add_argument("--video-lead", type=int, default=3)
    p.add_argument("--pad", type=int, default=0)

    p = sub.add_parser("augment", parents=[common], help="add calibrated noise to a WAV or to corpus audio")
    p.add_argument("--wav", help="input waveform")
    p.add_argument("--corpus", help="input corpus directory")
    p.add_argument("--out", required=True)
    p.add_argument("--snr", type=float, required=True)

    p = sub.add_parser("extract", parents=[common], help="compute audio features from a WAV file")
    p.add_argument("--wav", required=True)
    p.add_argument("--type", choices=("fbank", "mfcc", "pitch", "fbank_pitch"), default="fbank")
    p.add_argument("--out", required=True)
    p.add_argument("--cmvn", action="store_true")
    p.add_argument("--stack", type=int, default=0)

    p = sub.add_parser("train", parents=[common], help="train a recognizer from an experiment config")
    p.add_argument("--out", required=True)

    p = sub.add_parser("decode", parents=[common], help="decode a corpus split with a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=("heldout", "train", "all"), default="heldout")
    p.add_argument("--mode", choices=("greedy", "beam", "wfst"), default="greedy")
    p.add_argument("--out", required=True)
    p.add_argument("--beam-width", type=int, default=8)
    p.add_argument("--lexicon", help="pronunciation lexicon (defaults to the corpus lexicon)")
    p.add_argument("--arpa", help="ARPA language model for word decoding")
    p.add_argument("--acoustic-scale", type=float, default=1.0)
    p.add_argument("--lm-weight", type=float, default=1.0)
    p.add_argument("--snr", type=float, default=None, help="corrupt audio at this test SNR")

    p = sub.add_parser("eval", parents=[common], help="score a hypothesis file against a reference file")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--per-utt", help="write per-utterance metrics CSV here")

    p = sub.add_parser("matrix", parents=[common], help="train and evaluate the condition matrix")
    p.add_argument("--out", required=True)

    p = sub.add_parser("analyze-align", parents=[common], help="three-system output-peak timing analysis")
    p.add_argument("--ckpt-audio", required=True)
    p.add_argument("--ckpt-video", required=True)
    p.add_argument("--ckpt-av", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", choices=("heldout", "train", "all"), default="heldout")
    p.add_argument("--threshold", type=float, default=al.DEFAULT_PEAK_THRESHOLD)
    p.add_argument("--tech-delay", type=float, default=0.0,
                   help="constant technical-delay correction, in frames")
    return parser


def _require_config(args) -> ex.ExperimentConfig:
    if not args.config:
        raise ConfigError("this subcommand needs --config")
    cfg = ex.load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _raw_config(args) -> dict:
    if not args.config:
        raise ConfigError("this subcommand needs --config")
    with open(args.config) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON ({exc})") from None


def cmd_gen_corpus(args) -> int:
    seed = args.seed if args.seed is not None else 0
    if args.config:
        raw = _raw_config(args)
        gen = dict(raw.get("generate", raw))
        profile = gen.pop("profile", args.profile)
    else:
        gen = {"num_utterances": args.utts, "video_lead_frames": args.video_lead,
               "pad_frames": args.pad, "seed": seed}
        profile = args.profile
    if args.seed is not None:
        gen["seed"] = args.seed
    utts, cfg = ex.load_corpus({"generate": {**gen, "profile": profile}})
    av.write_corpus(args.out, utts, cfg)
    print(f"wrote {len(utts)} utterances to {args.out}")
    return 0


def cmd_augment(args) -> int:
    seed = args.seed if args.seed is not None else 0
    if bool(args.wav) == bool(args.corpus):
        raise ConfigError("augment needs exactly one of --wav or --corpus")
    if args.wav:
        samples, rate = read_wav(args.wav)
        noisy = add_noise_at_snr(Waveform(samples, rate), args.snr, seed=seed)
        write_wav(args.out, noisy.samples, rate)
        print(f"wrote {args.out} at {args.snr} dB")
        return 0
    utts, cfg = av.read_corpus(args.corpus)
    corrupted = []
    for i, u in enumerate(utts):
        noisy_audio = av.corrupt_features(u.audio, args.snr, seed=[seed, i])
        corrupted.append(
            av.Utterance(u.utt_id, noisy_audio, u.video, u.phonemes, u.words,
                         u.segments_audio, u.segments_video)
        )
    av.write_corpus(args.out, corrupted, cfg)
    print(f"wrote {len(corrupted)} corrupted utterances to {args.out}")
    return 0


def cmd_extract(args) -> int:
    samples, rate = read_wav(args.wav)
    w = Waveform(samples, rate)
    fcfg = FrameConfig(frame_shift_ms=args.frame_ms, window_ms=args.frame_ms)
    if args.type == "fbank":
        feats = compute_fbank(w, fcfg)
    elif args.type == "mfcc":
        feats = compute_mfcc(w, fcfg)
    elif args.type == "pitch":
        feats = compute_pitch_proxy(w, fcfg)
    else:
        feats = fuse([compute_fbank(w, fcfg), compute_pitch_proxy(w, fcfg)])
    if args.cmvn:
        feats = apply_cmvn(feats)
    if args.stack:
        feats = stack_context(feats, args.stack)
    write_fmat(args.out, feats.frames)
    print(f"wrote {feats.num_frames}x{feats.dim} features to {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = _require_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    utts, corpus_cfg = ex.load_corpus(cfg.corpus)
    system = ex.train_system(cfg, utts, corpus_cfg)
    mdl.save_checkpoint(out / "checkpoint.ctcm", system.params)
    ex.write_trace_csv(out / "trace.csv", system.result)
    ex.write_config_echo(out / "config_echo.json", cfg,
                         extra={"skipped_utterances": system.result.skipped})
    if system.result.trace:
        print(f"final heldout accuracy: {system.result.trace[-1][1]:.2f}%")
    print(f"checkpoint: {out / 'checkpoint.ctcm'}")
    return 0


def _split(utts, heldout, which):
    train, held = ex.split_heldout(utts, heldout)
    return {"train": train, "heldout": held, "all": utts}[which]


def cmd_decode(args) -> int:
    cfg = _require_config(args)
    utts, corpus_cfg = ex.load_corpus(cfg.corpus)
    subset = _split(utts, cfg.heldout, args.split)
    params = mdl.load_checkpoint(args.checkpoint)
    pipeline = ex.Pipeline(cfg.features, corpus_cfg, cfg.units, cfg.seed)
    pipeline.ensure_pca(ex.split_heldout(utts, cfg.heldout)[0])
    alphabet = pipeline.alphabet
    if params.config.output_dim != alphabet.size + 1:
        raise DataError(
            f"checkpoint expects {params.config.output_dim} outputs, "
            f"config units give {alphabet.size + 1}"
        )
    lexicon = corpus_cfg.lexicon
    if args.lexicon:
        lexicon = read_lexicon(args.lexicon, alphabet)
    lm = read_arpa(args.arpa) if args.arpa else uniform_unigram(lexicon.words)
    graph = None
    if args.mode == "wfst":
        graph = compose(
            compose(build_token_fst(alphabet), build_lexicon_fst(lexicon)),
            build_grammar_fst(lm, lexicon_words=lexicon.words),
        )
    pairs = pipeline.eval_pairs(subset, args.snr)
    failures = []
    with open(args.out, "w") as fh:
        for u, (mat, _) in zip(subset, pairs):
            y, _ = mdl.forward(params, mat)
            try:
                if args.mode == "greedy":
                    tokens = alphabet.names_of(greedy_decode(y.probs))
                elif args.mode == "wfst":
                    tokens = viterbi_decode(graph, y.probs, args.acoustic_scale).tokens
                else:
                    hyps = prefix_beam_search(y.probs, beam_width=args.beam_width,
                                              lexicon=lexicon, lm=lm, lm_weight=args.lm_weight)
                    tokens = hyps[0].tokens if hyps else ()
            except NoPathFound:
                log.warning("no path for %s; writing empty hypothesis", u.utt_id)
                failures.append(u.utt_id)
                tokens = ()
            fh.write(f"{u.utt_id} {' '.join(str(t) for t in tokens)}".rstrip() + "\n")
    if failures:
        Path(str(args.out) + ".flags").write_text(
            "".join(f"{uid} NOPATH\n" for uid in failures)
        )
    print(f"wrote {len(subset)} hypotheses to {args.out}"
          + (f" ({len(failures)} without a path)" if failures else ""))
    return 0


def _read_hyp_file(path) -> dict[str, tuple[str, ...]]:
    out = {}
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if parts:
                out[parts[0]] = tuple(parts[1:])
    return out


def cmd_eval(args) -> int:
    hyp = _read_hyp_file(args.hyp)
    ref = _read_hyp_file(args.ref)
    missing = sorted(set(ref) - set(hyp))
    if missing:
        raise DataError(f"hypotheses missing for ids: {', '.join(missing[:10])}")
    keys = sorted(ref)
    pooled = pooled_metrics([(ref[k], hyp[k]) for k in keys])
    print(f"S={pooled.substitutions} D={pooled.deletions} I={pooled.insertions} "
          f"N={pooled.length}")
    print(f"error_rate={pooled.error_rate:.4f} accuracy={pooled.accuracy:.2f}%")
    if args.per_utt:
        from .decode import edit_distance_metrics

        with open(args.per_utt, "w") as fh:
            fh.write("utt,S,D,I,N,error_rate,accuracy\n")
            for k in keys:
                m = edit_distance_metrics(ref[k], hyp[k])
                fh.write(f"{k},{m.substitutions},{m.deletions},{m.insertions},"
                         f"{m.length},{m.error_rate:.4f},{m.accuracy:.2f}\n")
    return 0


def cmd_matrix(args) -> int:
    raw = _raw_config(args)
    cfg = ex.ExperimentConfig.from_dict(raw)
    if args.seed is not None:
        cfg.seed = args.seed
    systems = raw.get("systems", ["audio", "video", "fused"])
    conditions = raw.get("train_conditions", {"clean": None})
    test_snrs = raw.get("test_snrs", [None])
    with_wer = raw.get("wer", True)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    utts, corpus_cfg = ex.load_corpus(cfg.corpus)
    rows = []
    try:
        rows, _ = ex.run_matrix(cfg, utts, corpus_cfg, systems, conditions, test_snrs,
                                with_wer=with_wer, jobs=args.jobs, sink=rows)
    finally:
        # flush whatever completed, even when a later cell fails
        ex.write_matrix_csv(out / "matrix.csv", rows)
    ex.matrix_svg(out / "curves.svg", rows)
    ex.write_config_echo(out / "config_echo.json", cfg,
                         extra={"systems": systems, "train_conditions": conditions,
                                "test_snrs": test_snrs})
    for r in rows:
        snr = "clean" if r.test_snr is None else r.test_snr
        print(f"{r.system}/{r.train_condition} @ {snr}: acc={r.unit_accuracy:.2f}"
              + ("" if np.isnan(r.wer) else f" wer={r.wer:.3f}"))
    return 0


def cmd_analyze_align(args) -> int:
    cfg = _require_config(args)
    utts, corpus_cfg = ex.load_corpus({"path": args.corpus})
    subset = _split(utts, cfg.heldout, args.split)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    vmap = corpus_cfg.viseme_map

    checkpoints = {
        "audio": (args.ckpt_audio, "audio"),
        "video": (args.ckpt_video, "video"),
        "audiovisual": (args.ckpt_av, "fused"),
    }
    peaks: dict[str, list] = {}
    units_of: dict[str, str] = {}
    for name, (ckpt_path, source) in checkpoints.items():
        params = mdl.load_checkpoint(ckpt_path)
        if params.config.output_dim == vmap.viseme_alphabet.size + 1:
            units = "visemes"
        elif params.config.output_dim == corpus_cfg.alphabet.size + 1:
            units = "phonemes"
        else:
            raise DataError(f"{ckpt_path}: output dim matches neither unit inventory")
        units_of[name] = units
        spec = ex.FeatureSpec(source=source, cmvn=cfg.features.cmvn, stack=cfg.features.stack)
        pipeline = ex.Pipeline(spec, corpus_cfg, units, cfg.seed)
        records = []
        for u in subset:
            y, _ = mdl.forward(params, pipeline.assemble(u, None, 0))
            records.extend(
                al.extract_peaks(y.probs, threshold=args.threshold, utt_id=u.utt_id,
                                 modality=name)
            )
        peaks[name] = records
        al.emit_alignment_csv(records, out / f"peaks_{name}.csv")

    def ref_for(u, units):
        return vmap.map_ids(u.phonemes.ids) if units == "visemes" else u.phonemes.ids

    def match_systems(name_a, name_b):
        pairs = []
        by_utt_a: dict[str, list] = {}
        by_utt_b: dict[str, list] = {}
        for r in peaks[name_a]:
            by_utt_a.setdefault(r.utt_id, []).append(r)
        for r in peaks[name_b]:
            by_utt_b.setdefault(r.utt_id, []).append(r)
        cross = units_of[name_a] != units_of[name_b]
        for u in subset:
            a = by_utt_a.get(u.utt_id, [])
            b = by_utt_b.get(u.utt_id, [])
            if not a or not b:
                continue
            if cross:
                pairs += al.match_occurrences(
                    a, b, ref=u.phonemes, viseme_map=vmap,
                    a_is_phonemes=units_of[name_a] == "phonemes",
                    b_is_phonemes=units_of[name_b] == "phonemes",
                ).pairs
            else:
                pairs += al.match_occurrences(a, b, ref=ref_for(u, units_of[name_a])).pairs
        return pairs

    reports = {}
    for name_a, name_b, stem in (("video", "audio", "video_audio"),
                                 ("audiovisual", "audio", "av_audio")):
        pairs = match_systems(name_a, name_b)
        if pairs:
            report = al.offset_report(pairs, frame_ms=args.frame_ms,
                                      technical_delay_frames=args.tech_delay)
            names = (vmap.viseme_alphabet if units_of["audio"] == "visemes"
                     else corpus_cfg.alphabet)
            al.emit_report_csv(report, out / f"report_{stem}.csv",
                               names={i + 1: n for i, n in enumerate(names.units)})
            reports[stem] = report
            print(f"{name_a} - {name_b}: mean {report.global_mean_frames:+.3f} frames "
                  f"({report.global_mean_ms:+.1f} ms), std {report.global_std_frames:.3f}, "
                  f"n={report.count}")

    positions = {name: al.mean_peak_positions(recs) for name, recs in peaks.items()
                 if units_of[name] == units_of["audio"]}
    label_alphabet = (vmap.viseme_alphabet if units_of["audio"] == "visemes"
                      else corpus_cfg.alphabet)
    al.emit_alignment_svg(out / "alignment.svg", positions, frame_ms=args.frame_ms,
                          names={i + 1: n for i, n in enumerate(label_alphabet.units)})
    summary = {
        stem: {"mean_frames": r.global_mean_frames, "std_frames": r.global_std_frames,
               "count": r.count, "mean_ms": r.global_mean_ms}
        for stem, r in reports.items()
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


COMMANDS = {
    "gen-corpus": cmd_gen_corpus,
    "augment": cmd_augment,
    "extract": cmd_extract,
    "train": cmd_train,
    "decode": cmd_decode,
    "eval": cmd_eval,
    "matrix": cmd_matrix,
    "analyze-align": cmd_analyze_align,
}


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
