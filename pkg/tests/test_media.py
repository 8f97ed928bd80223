import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from duplexvoice.media import (
    MelConfig,
    audio_token_count,
    media_token_budget,
    mel_bin_center_frequencies,
    mel_features,
    plan_image_tiles,
    plan_video_frames,
    video_frame_tile_plan,
)


class TestVideoFramePlanning:
    def test_short_video_gets_four_frames(self):
        assert plan_video_frames(3.0).frame_count == 4

    def test_one_frame_per_second(self):
        assert plan_video_frames(10.0).frame_count == 10

    def test_long_video_capped_at_sixteen(self):
        assert plan_video_frames(100.0).frame_count == 16

    @pytest.mark.parametrize("duration,count", [(4.0, 4), (16.0, 16)])
    def test_boundary_continuity(self, duration, count):
        assert plan_video_frames(duration).frame_count == count

    def test_midpoint_timestamps(self):
        plan = plan_video_frames(10.0)
        assert plan.timestamps[0] == pytest.approx(0.5)
        assert plan.timestamps[-1] == pytest.approx(9.5)

    def test_nonpositive_duration_rejected(self):
        with pytest.raises(ValueError):
            plan_video_frames(0.0)

    @given(st.floats(min_value=0.01, max_value=10_000))
    def test_count_always_in_range(self, duration):
        assert 4 <= plan_video_frames(duration).frame_count <= 16

    @given(st.floats(min_value=4, max_value=16), st.floats(min_value=4, max_value=16))
    def test_monotone_within_band(self, a, b):
        lo, hi = sorted((a, b))
        assert plan_video_frames(lo).frame_count <= plan_video_frames(hi).frame_count


def brute_force_tiles(width, height, max_tiles):
    """Enumerate every feasible grid and apply the aspect-ratio objective."""
    best = None
    for rows in range(1, max_tiles + 1):
        for cols in range(1, max_tiles + 1):
            if rows * cols > max_tiles:
                continue
            score = abs(math.log((cols / rows) / (width / height)))
            key = (score, rows * cols, rows)
            if best is None or key < best[0]:
                best = (key, rows, cols)
    return best[1], best[2]


class TestImageTiling:
    def test_square_image_single_tile(self):
        plan = plan_image_tiles(448, 448, 12)
        assert (plan.rows, plan.cols) == (1, 1)
        assert not plan.thumbnail
        assert plan.token_count == 256

    def test_wide_image_two_tiles_plus_thumbnail(self):
        rows, cols = brute_force_tiles(896, 448, 12)
        assert (rows, cols) == (1, 2)
        plan = plan_image_tiles(896, 448, 12)
        assert (plan.rows, plan.cols) == (1, 2)
        assert plan.thumbnail
        assert plan.token_count == 768

    def test_single_tile_budget(self):
        plan = plan_image_tiles(1, 1, 1)
        assert (plan.rows, plan.cols, plan.thumbnail, plan.token_count) == (1, 1, False, 256)

    def test_video_frames_never_patched(self):
        plan = video_frame_tile_plan()
        assert (plan.rows, plan.cols, plan.thumbnail, plan.token_count) == (1, 1, False, 256)

    @given(
        st.integers(min_value=1, max_value=4000),
        st.integers(min_value=1, max_value=4000),
        st.integers(min_value=1, max_value=12),
    )
    def test_matches_brute_force(self, w, h, m):
        plan = plan_image_tiles(w, h, m)
        assert (plan.rows, plan.cols) == brute_force_tiles(w, h, m)

    @given(
        st.integers(min_value=1, max_value=4000),
        st.integers(min_value=1, max_value=4000),
        st.integers(min_value=1, max_value=12),
    )
    def test_token_count_bounds(self, w, h, m):
        plan = plan_image_tiles(w, h, m)
        assert plan.token_count > 0
        assert plan.token_count % 256 == 0
        assert plan.token_count <= 256 * (m + 1)


class TestAudioTokenCount:
    def test_two_seconds_is_25_tokens(self):
        assert audio_token_count(2.0) == 25

    def test_zero_duration(self):
        assert audio_token_count(0.0) == 0

    def test_one_second(self):
        # ceil(ceil(1.0 / 0.010) / 8) = ceil(100 / 8)
        assert audio_token_count(1.0) == 13

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            audio_token_count(-0.1)

    @given(st.floats(min_value=0, max_value=3600), st.floats(min_value=0, max_value=3600))
    def test_monotone_and_subadditive_within_one_frame(self, a, b):
        lo, hi = sorted((a, b))
        assert audio_token_count(lo) <= audio_token_count(hi)
        joint = audio_token_count(a + b)
        assert audio_token_count(a) + audio_token_count(b) >= joint
        assert joint >= audio_token_count(a) + audio_token_count(b) - 1


class TestMelFeatures:
    def test_silence_gives_floor_everywhere(self):
        config = MelConfig()
        spec = mel_features(np.zeros(32000), 16000, config)
        assert spec.num_frames == 200
        assert np.all(spec.frames == math.log(config.energy_floor))

    def test_frame_count_formula(self):
        spec = mel_features(np.zeros(32000), 16000)
        assert spec.num_frames == math.ceil(32000 / 160)

    def test_empty_pcm(self):
        spec = mel_features([], 16000)
        assert spec.num_frames == 0

    @pytest.mark.parametrize("k", [20, 40, 60])
    def test_tone_at_bin_center_peaks_in_that_bin(self, k):
        config = MelConfig()
        centers = mel_bin_center_frequencies(config.num_bins, 16000)
        t = np.arange(16000) / 16000
        tone = 10000 * np.sin(2 * np.pi * centers[k] * t)
        spec = mel_features(tone, 16000, config)
        assert int(np.argmax(spec.frames.mean(axis=0))) == k

    def test_amplitude_scaling_shifts_log_energy(self):
        rng = np.random.default_rng(7)
        pcm = rng.normal(scale=1000, size=8000)
        alpha = 3.0
        config = MelConfig(energy_floor=1e-30)
        base = mel_features(pcm, 16000, config).frames
        scaled = mel_features(alpha * pcm, 16000, config).frames
        above = base > math.log(config.energy_floor) + 1
        assert np.allclose(scaled[above] - base[above], 2 * math.log(alpha))


class TestTokenBudgetManifest:
    def test_mixed_manifest(self):
        manifest = {
            "items": [
                {"type": "image", "width": 896, "height": 448},
                {"type": "audio", "duration": 2.0},
                {"type": "text", "tokens": 100},
            ]
        }
        budget = media_token_budget(manifest)
        assert budget["total_tokens"] == 768 + 25 + 100

    def test_video_item(self):
        budget = media_token_budget({"items": [{"type": "video", "duration": 3.0}]})
        assert budget["items"][0]["frames"] == 4
        assert budget["total_tokens"] == 4 * 256
