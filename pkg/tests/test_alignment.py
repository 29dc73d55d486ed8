import numpy as np
import pytest

from ctcfuse import alignment as al
from ctcfuse import avcorpus as av
from ctcfuse.errors import NoMatchedPairs
from ctcfuse.units import LabelAlphabet


def segment_posteriors(T, K, segments):
    """0.9 on the segment's unit, remainder spread evenly (1-based spans)."""
    y = np.full((T, K + 1), 0.1 / K)
    y[:, 0] = 0.9
    for unit, start, end in segments:
        y[start - 1 : end, :] = 0.1 / K
        y[start - 1 : end, unit] = 0.9
    return y / y.sum(axis=1, keepdims=True)


class TestExtractPeaks:
    def test_run_argmax(self):
        y = np.full((20, 3), 0.05)
        y[:, 0] = 0.9
        y[9] = [0.15, 0.80, 0.05]  # run frames 10-11 (1-based), max at 10
        y[10] = [0.35, 0.60, 0.05]
        peaks = al.extract_peaks(y, threshold=0.5)
        assert len(peaks) == 1
        assert peaks[0].peak_frame == 10
        assert peaks[0].unit_id == 1

    def test_all_blank_empty(self):
        y = np.full((8, 4), 0.02)
        y[:, 0] = 0.94
        y /= y.sum(axis=1, keepdims=True)
        assert al.extract_peaks(y) == []

    def test_tie_takes_earliest(self):
        y = np.full((6, 2), 0.1)
        y[2, 1] = y[3, 1] = 0.8
        y /= y.sum(axis=1, keepdims=True)
        peaks = al.extract_peaks(y, threshold=0.5)
        assert [p.peak_frame for p in peaks] == [3]

    def test_gold_segment_containment(self):
        cfg = av.desk_corpus_config(num_utterances=10, seed=20)
        for u in av.generate_corpus(cfg):
            y = segment_posteriors(u.audio.num_frames, cfg.alphabet.size, u.segments_audio)
            peaks = al.extract_peaks(y, threshold=0.5, utt_id=u.utt_id)
            assert peaks
            for p in peaks:
                spans = [(s, e) for unit, s, e in u.segments_audio if unit == p.unit_id]
                assert any(s <= p.peak_frame <= e for s, e in spans)

    def test_threshold_invariance_between_runs(self):
        y = np.full((30, 2), 0.02)
        y[:, 0] = 0.98
        for start, shape in ((4, [0.55, 0.9, 0.7]), (15, [0.6, 0.85])):
            for i, v in enumerate(shape):
                y[start + i, 1] = v
                y[start + i, 0] = 1 - v - 0.02
        y /= y.sum(axis=1, keepdims=True)
        lo = al.extract_peaks(y, threshold=0.3)
        hi = al.extract_peaks(y, threshold=0.5)
        assert [p.peak_frame for p in lo] == [p.peak_frame for p in hi]
        assert len(lo) == 2


def rec(unit, frame, occ, utt="u0", modality="audio"):
    return al.PeakRecord(utt, unit, frame, 0.9, occ, modality)


class TestMatching:
    def test_identical_lists(self):
        a = [rec(1, 5, 0), rec(2, 9, 0), rec(1, 14, 1)]
        result = al.match_occurrences(a, list(a))
        assert len(result.pairs) == 3
        assert all(p.offset_frames == 0 for p in result.pairs)

    def test_constant_shift(self):
        a = [rec(1, 5, 0), rec(2, 9, 0)]
        b = [rec(1, 8, 0), rec(2, 12, 0)]
        result = al.match_occurrences(a, b)
        assert [p.offset_frames for p in result.pairs] == [-3, -3]

    def test_antisymmetric(self):
        rng = np.random.default_rng(21)
        a = [rec(int(u), int(f), 0) for u, f in zip(rng.integers(1, 4, 5), range(3, 40, 8))]
        b = [rec(r.unit_id, r.peak_frame + int(d), 0) for r, d in zip(a, rng.integers(-3, 4, 5))]
        fwd = al.match_occurrences(a, b)
        bwd = al.match_occurrences(b, a)
        assert sorted(p.offset_frames for p in fwd.pairs) == sorted(
            -p.offset_frames for p in bwd.pairs
        )

    def test_unmatched_dropped_and_counted(self):
        a = [rec(1, 5, 0), rec(1, 12, 1), rec(3, 20, 0)]
        b = [rec(1, 6, 0)]
        result = al.match_occurrences(a, b)
        assert len(result.pairs) == 1
        assert result.dropped_a == 2
        assert result.dropped_b == 0

    def test_viseme_image_order(self):
        # phonemes 1 and 2 share viseme 1; phoneme 3 maps to viseme 2
        alphabet = LabelAlphabet(("p1", "p2", "p3"))
        visemes = LabelAlphabet(("v1", "v2"))
        vmap = av.VisemeMap({1: 1, 2: 1, 3: 2}, alphabet, visemes)
        phon = [rec(1, 3, 0), rec(3, 10, 0), rec(2, 20, 0)]
        vis = [rec(1, 1, 0, modality="video"), rec(2, 8, 0, modality="video"),
               rec(1, 17, 1, modality="video")]
        result = al.match_occurrences(
            phon, vis, viseme_map=vmap, a_is_phonemes=True, b_is_phonemes=False
        )
        offsets = {(p.unit_id, p.a.occurrence_index): p.offset_frames for p in result.pairs}
        assert len(result.pairs) == 3
        assert [p.offset_frames for p in result.pairs] == [2, 2, 3]

    def test_reference_restriction(self):
        a = [rec(1, 5, 0), rec(2, 9, 0)]
        b = [rec(1, 7, 0), rec(2, 11, 0)]
        result = al.match_occurrences(a, b, ref=(1,))
        assert len(result.pairs) == 1
        assert result.pairs[0].unit_id == 1


class TestOffsetReport:
    def test_single_pair_ms(self):
        pairs = al.match_occurrences([rec(1, 5, 0)], [rec(1, 8, 0)]).pairs
        report = al.offset_report(pairs, frame_ms=100.0 / 3.0)
        assert report.global_mean_frames == pytest.approx(-3.0)
        assert report.global_mean_ms == pytest.approx(-100.0)

    def test_correction_centers(self):
        a = [rec(1, 10, 0), rec(2, 20, 0), rec(1, 33, 1)]
        b = [rec(1, 13, 0), rec(2, 23, 0), rec(1, 36, 1)]
        pairs = al.match_occurrences(a, b).pairs
        report = al.offset_report(pairs, frame_ms=33.0, technical_delay_frames=-3.0)
        assert report.global_mean_frames == pytest.approx(0.0)

    def test_injected_lag_recovered_exactly(self):
        # gold-style posteriors: unit active across its segment, peak at run start
        K = 3
        seg_audio = [(1, 6, 9), (2, 10, 14), (3, 15, 20)]
        lag = 3
        seg_video = [(u, s - lag, e - lag) for u, s, e in seg_audio]
        ya = segment_posteriors(24, K, seg_audio)
        yv = segment_posteriors(24, K, seg_video)
        pa = al.extract_peaks(ya, utt_id="u", modality="audio")
        pv = al.extract_peaks(yv, utt_id="u", modality="video")
        pairs = al.match_occurrences(pv, pa).pairs
        report = al.offset_report(pairs, frame_ms=100.0 / 3.0)
        assert report.global_mean_frames == pytest.approx(-float(lag))
        assert report.global_std_frames == pytest.approx(0.0)

    def test_empty_pairs(self):
        with pytest.raises(NoMatchedPairs):
            al.offset_report([], frame_ms=33.0)


class TestEmission:
    def test_records_roundtrip(self, tmp_path):
        records = [rec(1, 5, 0), rec(2, 9, 0, modality="video")]
        path = tmp_path / "records.csv"
        al.emit_alignment_csv(records, path)
        assert al.read_alignment_csv(path) == records

    def test_empty_records_header_only(self, tmp_path):
        path = tmp_path / "empty.csv"
        al.emit_alignment_csv([], path)
        lines = path.read_text().strip().splitlines()
        assert lines == ["utt,unit,modality,occurrence,peak_frame,peak_prob"]

    def test_report_csv(self, tmp_path):
        pairs = al.match_occurrences([rec(1, 5, 0)], [rec(1, 8, 0)]).pairs
        report = al.offset_report(pairs, frame_ms=33.0)
        path = tmp_path / "report.csv"
        al.emit_report_csv(report, path, names={1: "p"})
        rows = path.read_text().strip().splitlines()
        assert rows[0] == "unit,mean_offset_frames,std,count"
        assert rows[1].startswith("p,-3.0")
        assert rows[-1].startswith("GLOBAL,")

    def test_svg_mark_per_unit_per_system(self, tmp_path):
        positions = {
            "audio": {1: 10.0, 2: 20.0},
            "video": {1: 7.0, 2: 17.0},
            "audiovisual": {1: 9.0, 2: 19.0},
        }
        path = tmp_path / "chart.svg"
        al.emit_alignment_svg(path, positions, frame_ms=100.0 / 3.0)
        text = path.read_text()
        assert text.count("<circle") == 6
        assert text.startswith("<svg")
