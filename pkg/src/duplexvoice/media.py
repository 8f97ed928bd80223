"""Deterministic media-to-token-budget arithmetic.

Video frame sampling, dynamic image tiling, mel filterbank features and audio
token counting. Everything here is a pure function of its arguments; no model
weights are involved, only the token accounting the rest of the engine needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

TOKENS_PER_TILE = 256
MIN_VIDEO_FRAMES = 4
MAX_VIDEO_FRAMES = 16

# audio frontend constants: 10 ms hop, 8x temporal reduction through the
# downsampling chain, so 2 s of audio lands on exactly 25 tokens
AUDIO_HOP_S = 0.010
AUDIO_FRAME_REDUCTION = 8

DEFAULT_MAX_TILES = 12


@dataclass(frozen=True)
class FramePlan:
    frame_count: int
    timestamps: tuple

    def __post_init__(self):
        if not (MIN_VIDEO_FRAMES <= self.frame_count <= MAX_VIDEO_FRAMES):
            raise ValueError(f"frame_count {self.frame_count} out of range")
        if len(self.timestamps) != self.frame_count:
            raise ValueError("timestamps length must equal frame_count")
        if any(b <= a for a, b in zip(self.timestamps, self.timestamps[1:])):
            raise ValueError("timestamps must strictly increase")


@dataclass(frozen=True)
class TilePlan:
    rows: int
    cols: int
    thumbnail: bool
    token_count: int


@dataclass(frozen=True)
class MelSpectrogram:
    frames: np.ndarray  # [num_frames, num_mel_bins] log energies
    frame_hop: float
    sample_rate: int

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]


@dataclass(frozen=True)
class MelConfig:
    window_s: float = 0.025
    hop_s: float = 0.010
    num_bins: int = 80
    energy_floor: float = 1e-10


def plan_video_frames(duration: float) -> FramePlan:
    """Decide how many frames to sample from a video and where.

    Under 4 s: 4 frames. Between 4 and 16 s: one frame per second, i.e.
    floor(duration) frames. Over 16 s: capped at 16 frames. Frames are placed
    at interval midpoints.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    if duration < 4:
        count = MIN_VIDEO_FRAMES
    elif duration <= 16:
        count = int(math.floor(duration))
    else:
        count = MAX_VIDEO_FRAMES
    timestamps = tuple((i + 0.5) * duration / count for i in range(count))
    return FramePlan(frame_count=count, timestamps=timestamps)


def plan_image_tiles(width: int, height: int, max_tiles: int = DEFAULT_MAX_TILES) -> TilePlan:
    """Choose the tiling grid whose aspect ratio best matches the image.

    Scans every grid with rows*cols <= max_tiles and minimizes the log-ratio
    distance between grid aspect and image aspect; ties prefer fewer tiles,
    then fewer rows. Multi-tile plans add one thumbnail tile. Each tile costs
    256 tokens.
    """
    if width < 1 or height < 1:
        raise ValueError("image dimensions must be >= 1")
    if max_tiles < 1:
        raise ValueError("max_tiles must be >= 1")
    image_aspect = width / height
    best = None
    for rows in range(1, max_tiles + 1):
        for cols in range(1, max_tiles // rows + 1):
            grid_aspect = cols / rows
            score = abs(math.log(grid_aspect / image_aspect))
            key = (score, rows * cols, rows)
            if best is None or key < best[0]:
                best = (key, rows, cols)
    _, rows, cols = best
    thumbnail = rows * cols > 1
    tokens = TOKENS_PER_TILE * (rows * cols + (1 if thumbnail else 0))
    return TilePlan(rows=rows, cols=cols, thumbnail=thumbnail, token_count=tokens)


def video_frame_tile_plan() -> TilePlan:
    """Video frames are never dynamically patched: always a single tile."""
    return TilePlan(rows=1, cols=1, thumbnail=False, token_count=TOKENS_PER_TILE)


def audio_token_count(duration: float) -> int:
    """Token budget for an audio clip: 25 tokens per 2 seconds.

    Counted at the frame level: 10 ms hops, reduced 8x, each rounded up.
    """
    if duration < 0:
        raise ValueError("duration must be non-negative")
    frames = math.ceil(duration / AUDIO_HOP_S)
    return math.ceil(frames / AUDIO_FRAME_REDUCTION)


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(num_bins: int, n_fft: int, sample_rate: int) -> np.ndarray:
    """Triangular mel filters spanning [0, sample_rate/2]; shape [bins, fft//2+1]."""
    mel_points = np.linspace(0.0, _hz_to_mel(sample_rate / 2), num_bins + 2)
    hz_points = _mel_to_hz(mel_points)
    bin_freqs = np.linspace(0.0, sample_rate / 2, n_fft // 2 + 1)
    filters = np.zeros((num_bins, n_fft // 2 + 1))
    for b in range(num_bins):
        left, center, right = hz_points[b], hz_points[b + 1], hz_points[b + 2]
        up = (bin_freqs - left) / (center - left)
        down = (right - bin_freqs) / (right - center)
        filters[b] = np.maximum(0.0, np.minimum(up, down))
    return filters


def mel_bin_center_frequencies(num_bins: int, sample_rate: int) -> np.ndarray:
    """Center frequency in Hz of each triangular mel filter."""
    mel_points = np.linspace(0.0, _hz_to_mel(sample_rate / 2), num_bins + 2)
    return _mel_to_hz(mel_points)[1:-1]


def mel_features(
    pcm: Sequence[float],
    sample_rate: int,
    config: MelConfig = MelConfig(),
) -> MelSpectrogram:
    """Log mel filterbank energies of a mono PCM signal.

    Center-padded framing (frame t is centered on sample t*hop), Hann window,
    magnitude-squared spectrum, triangular mel filters, natural log with an
    energy floor. num_frames = ceil(len(pcm) / hop).
    """
    if sample_rate <= 0:
        raise ValueError("sample_rate must be positive")
    if not (config.window_s >= config.hop_s > 0):
        raise ValueError("require window_s >= hop_s > 0")
    signal = np.asarray(pcm, dtype=np.float64)
    hop = int(round(config.hop_s * sample_rate))
    win = int(round(config.window_s * sample_rate))
    n_fft = 1 << (win - 1).bit_length()
    num_frames = math.ceil(len(signal) / hop) if len(signal) else 0
    if num_frames == 0:
        return MelSpectrogram(
            frames=np.zeros((0, config.num_bins)),
            frame_hop=config.hop_s,
            sample_rate=sample_rate,
        )
    half = win // 2
    padded = np.pad(signal, (half, half + num_frames * hop))
    window = np.hanning(win)
    frames = np.stack(
        [padded[t * hop : t * hop + win] * window for t in range(num_frames)]
    )
    spectrum = np.abs(np.fft.rfft(frames, n=n_fft, axis=1)) ** 2
    filters = mel_filterbank(config.num_bins, n_fft, sample_rate)
    energies = spectrum @ filters.T
    log_energies = np.log(np.maximum(energies, config.energy_floor))
    return MelSpectrogram(
        frames=log_energies, frame_hop=config.hop_s, sample_rate=sample_rate
    )


def media_token_budget(manifest: dict) -> dict:
    """Token budget breakdown for a media manifest.

    Manifest items: {"type": "image", "width", "height", ["max_tiles"]},
    {"type": "video", "duration"}, {"type": "audio", "duration"},
    {"type": "text", "tokens"}.
    """
    items = []
    total = 0
    for entry in manifest.get("items", []):
        kind = entry["type"]
        if kind == "image":
            plan = plan_image_tiles(
                entry["width"], entry["height"], entry.get("max_tiles", DEFAULT_MAX_TILES)
            )
            detail = {
                "type": "image",
                "rows": plan.rows,
                "cols": plan.cols,
                "thumbnail": plan.thumbnail,
                "tokens": plan.token_count,
            }
        elif kind == "video":
            plan = plan_video_frames(entry["duration"])
            tokens = plan.frame_count * TOKENS_PER_TILE
            detail = {
                "type": "video",
                "frames": plan.frame_count,
                "timestamps": list(plan.timestamps),
                "tokens": tokens,
            }
        elif kind == "audio":
            tokens = audio_token_count(entry["duration"])
            detail = {"type": "audio", "tokens": tokens}
        elif kind == "text":
            detail = {"type": "text", "tokens": entry["tokens"]}
        else:
            raise ValueError(f"unknown manifest item type: {kind!r}")
        items.append(detail)
        total += detail["tokens"]
    return {"items": items, "total_tokens": total}
