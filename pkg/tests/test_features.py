import math

import numpy as np
import pytest

from ctcfuse import features as F
from ctcfuse.errors import (
    DegenerateUtterance,
    DimensionMismatch,
    EmptySignal,
    InsufficientData,
    LengthMismatch,
    OffsetTooLarge,
    SingularAlignment,
    ZeroPowerSignal,
)

RATE = 16000


def tone(freq, seconds=1.0, rate=RATE, amp=0.5):
    t = np.arange(int(seconds * rate)) / rate
    return F.Waveform(amp * np.sin(2 * np.pi * freq * t), rate)


class TestFbank:
    def test_silence_hits_floor(self):
        w = F.Waveform(np.zeros(RATE), RATE)
        fb = F.compute_fbank(w)
        assert fb.dim == 40
        assert np.all(fb.frames == math.log(1e-10))

    def test_sine_peaks_in_nearest_mel_bin(self):
        cfg = F.FrameConfig()
        fb = F.compute_fbank(tone(1000.0), cfg)
        # oracle: recompute the filter center grid directly from the warp formula
        mel = lambda f: 2595.0 * math.log10(1.0 + f / 700.0)
        imel = lambda m: 700.0 * (10.0 ** (m / 2595.0) - 1.0)
        pts = np.linspace(mel(0.0), mel(RATE / 2.0), 42)
        centers = np.array([imel(m) for m in pts[1:-1]])
        expected = int(np.argmin(np.abs(centers - 1000.0)))
        interior = fb.frames[1:-1]
        assert np.all(np.argmax(interior, axis=1) == expected)

    def test_mel_formula(self):
        assert F.hz_to_mel(700.0) == pytest.approx(2595.0 * math.log10(2.0), rel=1e-12)
        assert F.hz_to_mel(700.0) == pytest.approx(781.17, abs=0.01)

    def test_frame_count(self):
        cfg = F.FrameConfig()
        w = tone(440.0, seconds=1.0)
        hop = cfg.hop_samples(RATE)
        win = cfg.window_samples(RATE)
        expected_t = (RATE - win) // hop + 1
        assert F.compute_fbank(w, cfg).num_frames == expected_t

    def test_too_short(self):
        with pytest.raises(EmptySignal):
            F.compute_fbank(F.Waveform(np.ones(10), RATE))


class TestMfcc:
    def test_dimension(self):
        assert F.compute_mfcc(tone(300.0)).dim == 12

    def test_silence_gives_zero_coefficients(self):
        w = F.Waveform(np.zeros(RATE), RATE)
        mf = F.compute_mfcc(w)
        assert np.all(np.abs(mf.frames) < 1e-9)

    def test_deterministic(self):
        rng = np.random.default_rng(0)
        w = F.Waveform(rng.normal(size=RATE), RATE)
        a = F.compute_mfcc(w).frames
        b = F.compute_mfcc(w).frames
        assert np.array_equal(a, b)


class TestPitch:
    def test_pure_tone_logf0(self):
        p = F.compute_pitch_proxy(tone(200.0, seconds=2.0))
        interior = p.frames[1:-1, 0]
        assert np.all(np.abs(interior - math.log(200.0)) < 0.05 * math.log(200.0))

    def test_white_noise_weak_peak(self):
        rng = np.random.default_rng(42)
        w = F.Waveform(rng.normal(size=2 * RATE), RATE)
        p = F.compute_pitch_proxy(w)
        assert p.frames[:, 1].mean() < 0.5

    def test_fbank_plus_pitch_dimension(self):
        w = tone(150.0)
        fused = F.fuse([F.compute_fbank(w), F.compute_pitch_proxy(w)])
        assert fused.dim == 43


class TestCmvn:
    def test_two_point(self):
        x = F.FeatureSequence(np.array([[1.0], [3.0]]))
        assert np.allclose(F.cmvn(x).frames, [[-1.0], [1.0]])

    def test_constant_column_zeroed(self):
        x = F.FeatureSequence(np.array([[5.0], [5.0], [5.0]]))
        assert np.all(F.cmvn(x).frames == 0.0)

    def test_statistics(self):
        rng = np.random.default_rng(1)
        x = F.FeatureSequence(rng.normal(3.0, 2.5, size=(200, 7)))
        out = F.cmvn(x).frames
        assert np.all(np.abs(out.mean(axis=0)) < 1e-6)
        assert np.all(np.abs(out.var(axis=0) - 1.0) < 1e-4)

    def test_idempotent(self):
        rng = np.random.default_rng(2)
        x = F.FeatureSequence(rng.normal(size=(50, 4)))
        once = F.cmvn(x)
        twice = F.cmvn(once)
        assert np.all(np.abs(once.frames - twice.frames) < 1e-6)

    def test_degenerate(self):
        with pytest.raises(DegenerateUtterance):
            F.cmvn(F.FeatureSequence(np.ones((1, 3))))


class TestStackContext:
    def test_identity(self):
        x = F.FeatureSequence(np.arange(6.0).reshape(3, 2))
        assert F.stack_context(x, 0) is x

    def test_edge_replication(self):
        x = F.FeatureSequence(np.array([[1.0], [2.0]]))
        out = F.stack_context(x, 1)
        assert np.array_equal(out.frames, [[1.0, 1.0, 2.0], [1.0, 2.0, 2.0]])

    def test_dimension(self):
        x = F.FeatureSequence(np.zeros((5, 40)))
        assert F.stack_context(x, 1).dim == 120


class TestNoise:
    def test_variance_definition(self):
        # unit-power signal at 20 dB -> noise variance 0.01
        w = F.Waveform(np.ones(4 * RATE), RATE)
        noisy = F.add_noise_at_snr(w, 20.0, seed=0)
        noise = noisy.samples - w.samples
        assert np.var(noise) == pytest.approx(0.01, rel=0.05)

    def test_realized_snr(self):
        w = tone(330.0, seconds=10.0)
        for snr in F.snr_grid():
            noisy = F.add_noise_at_snr(w, snr, seed=7)
            noise = noisy.samples - w.samples
            realized = 10.0 * math.log10(w.power() / np.mean(noise**2))
            assert abs(realized - snr) <= 0.1

    def test_grid_has_ten_levels(self):
        grid = F.snr_grid()
        assert len(grid) == 10
        assert grid[0] == 40.0 and grid[-1] == 20.0

    def test_deterministic(self):
        w = tone(100.0)
        a = F.add_noise_at_snr(w, 30.0, seed=3)
        b = F.add_noise_at_snr(w, 30.0, seed=3)
        assert np.array_equal(a.samples, b.samples)

    def test_zero_power(self):
        with pytest.raises(ZeroPowerSignal):
            F.add_noise_at_snr(F.Waveform(np.zeros(100), RATE), 20.0, seed=0)


def make_track(rng, T=20, motion=None):
    base = rng.normal(scale=2.0, size=(18, 2)) + np.array([50.0, 80.0])
    anchors = np.array([[10.0, 10.0], [90.0, 12.0], [50.0, 40.0], [48.0, 70.0]])
    pts = np.empty((T, 18, 2))
    anc = np.empty((T, 4, 2))
    for t in range(T):
        wiggle = 0.3 * np.sin(0.4 * t) * np.ones((18, 2)) if motion is None else motion(t)
        pts[t] = base + wiggle + 0.2 * rng.normal(size=(18, 2))
        anc[t] = anchors
    return pts, anc


class TestLandmarks:
    def test_static_mouth_zero_kinematics(self):
        pts = np.tile(np.random.default_rng(0).normal(size=(1, 18, 2)), (5, 1, 1))
        anc = np.tile(np.array([[[0.0, 0.0], [4.0, 0.0], [2.0, 3.0]]]), (5, 1, 1))
        out = F.landmark_features(F.LandmarkTrack(pts, anc))
        assert np.all(np.abs(out.frames[:, 36:]) < 1e-10)

    def test_dimension(self):
        rng = np.random.default_rng(5)
        pts, anc = make_track(rng)
        assert F.landmark_features(F.LandmarkTrack(pts, anc)).dim == 72

    def test_translation_invariance(self):
        rng = np.random.default_rng(6)
        pts, anc = make_track(rng)
        base = F.landmark_features(F.LandmarkTrack(pts, anc)).frames
        shift = np.array([10.0, 4.0])
        moved = F.landmark_features(F.LandmarkTrack(pts + shift, anc + shift)).frames
        assert np.max(np.abs(base - moved)) < 1e-8

    def test_collinear_anchors(self):
        pts = np.zeros((3, 18, 2))
        anc = np.tile(np.array([[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]]), (3, 1, 1))
        with pytest.raises(SingularAlignment):
            F.landmark_features(F.LandmarkTrack(pts, anc))


class TestPca:
    def test_rank_bound(self):
        rng = np.random.default_rng(3)
        data = np.zeros((100, 5))
        data[:, 1] = rng.normal(size=100)
        data[:, 3] = rng.normal(size=100)
        model = F.fit_pca(data, 0.98)
        assert model.num_components <= 2

    def test_full_target_full_rank(self):
        rng = np.random.default_rng(4)
        data = rng.normal(size=(6, 9))
        assert F.fit_pca(data, 1.0).num_components == 5  # min(N-1, D)

    def test_reconstruction_keeps_target_variance(self):
        rng = np.random.default_rng(8)
        scales = np.array([8.0, 5.0, 3.0, 1.0, 0.5, 0.2, 0.1, 0.05])
        data = rng.normal(size=(400, 8)) * scales
        model = F.fit_pca(data, 0.98)
        centered = data - model.mean
        recon = (centered @ model.basis) @ model.basis.T
        total = centered.var(axis=0, ddof=1).sum()
        residual = (centered - recon).var(axis=0, ddof=1).sum()
        assert (total - residual) / total >= 0.98

    def test_orthonormal_basis(self):
        rng = np.random.default_rng(9)
        model = F.fit_pca(rng.normal(size=(50, 6)), 0.9)
        gram = model.basis.T @ model.basis
        assert np.allclose(gram, np.eye(model.num_components), atol=1e-8)

    def test_insufficient_data(self):
        with pytest.raises(InsufficientData):
            F.fit_pca(np.ones((1, 4)), 0.9)


class TestApplyPca:
    def test_mean_maps_to_zero(self):
        rng = np.random.default_rng(10)
        model = F.fit_pca(rng.normal(size=(30, 4)), 1.0)
        x = F.FeatureSequence(np.tile(model.mean, (6, 1)))
        assert np.allclose(F.apply_pca(model, x).frames, 0.0, atol=1e-12)

    def test_identity_basis_centers(self):
        model = F.PcaModel(np.array([1.0, 2.0]), np.eye(2), np.array([3.0, 1.0]))
        x = F.FeatureSequence(np.array([[2.0, 2.0], [0.0, 4.0]]))
        assert np.allclose(F.apply_pca(model, x).frames, [[1.0, 0.0], [-1.0, 2.0]])

    def test_dimension_mismatch(self):
        model = F.PcaModel(np.zeros(3), np.eye(3), np.array([1.0, 1.0, 1.0]))
        with pytest.raises(DimensionMismatch):
            F.apply_pca(model, F.FeatureSequence(np.zeros((2, 4))))

    def test_descriptor_stream_to_222(self):
        rng = np.random.default_rng(11)
        latent = rng.normal(size=(240, 222))
        mixing = rng.normal(size=(222, 2304))
        model = F.fit_pca(latent @ mixing, 1.0)
        assert model.num_components == 222
        x = F.FeatureSequence(rng.normal(size=(3, 222)) @ mixing)
        assert F.apply_pca(model, x).dim == 222


class TestFuse:
    def test_single_passthrough(self):
        x = F.FeatureSequence(np.ones((4, 3)))
        assert F.fuse([x]) is x

    def test_audio_video_sift_sum(self):
        t = 7
        a = F.FeatureSequence(np.ones((t, 43)), modality="audio")
        v = F.FeatureSequence(np.ones((t, 72)), modality="video")
        s = F.FeatureSequence(np.ones((t, 222)), modality="video")
        assert F.fuse([a, v, s]).dim == 337

    def test_video_only_sum(self):
        t = 5
        v = F.FeatureSequence(np.ones((t, 72)), modality="video")
        s = F.FeatureSequence(np.ones((t, 222)), modality="video")
        fused = F.fuse([v, s])
        assert fused.dim == 294
        assert fused.modality == "fused"

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            F.fuse([F.FeatureSequence(np.ones((3, 2))), F.FeatureSequence(np.ones((4, 2)))])


class TestShift:
    def test_zero_identity(self):
        x = F.FeatureSequence(np.arange(8.0).reshape(4, 2))
        assert F.shift_modality(x, 0) is x

    def test_delay_replicates_leading_edge(self):
        x = F.FeatureSequence(np.array([[1.0], [2.0], [3.0]]))
        out = F.shift_modality(x, 1)
        assert np.array_equal(out.frames, [[1.0], [1.0], [2.0]])

    def test_roundtrip_away_from_edges(self):
        rng = np.random.default_rng(12)
        x = F.FeatureSequence(rng.normal(size=(30, 3)))
        k = 4
        back = F.shift_modality(F.shift_modality(x, k), -k)
        assert np.array_equal(back.frames[k:-k], x.frames[k:-k])

    def test_offset_too_large(self):
        with pytest.raises(OffsetTooLarge):
            F.shift_modality(F.FeatureSequence(np.ones((3, 1))), 3)
