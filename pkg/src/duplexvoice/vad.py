"""Streaming voice-activity detection and utterance segmentation.

A pluggable frame classifier sits behind a hangover-based segmenter. The
reference classifier is energy based: a frame is speech when its RMS level
reaches the configured dBFS threshold (inclusive, so the boundary is
deterministic). Segment boundaries are invariant to how the input stream is
chunked because framing happens on an internal sample buffer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

FULL_SCALE = 32768.0  # int16 full scale


@dataclass(frozen=True)
class VadConfig:
    frame_ms: int = 30
    energy_threshold_db: float = -40.0
    hangover_frames: int = 10
    min_utterance_ms: int = 200
    sample_rate: int = 16000

    def __post_init__(self):
        if self.frame_ms <= 0:
            raise ValueError("frame_ms must be positive")
        if self.hangover_frames < 0:
            raise ValueError("hangover_frames must be >= 0")
        if self.min_utterance_ms < self.frame_ms:
            raise ValueError("min_utterance_ms must be >= frame_ms")

    @property
    def frame_samples(self) -> int:
        return self.sample_rate * self.frame_ms // 1000

    @property
    def min_utterance_frames(self) -> int:
        return math.ceil(self.min_utterance_ms / self.frame_ms)


@dataclass(frozen=True)
class AudioSegment:
    segment_id: int
    pcm: np.ndarray
    start_time: float
    end_time: float

    @property
    def duration(self) -> float:
        return self.end_time - self.start_time


@dataclass(frozen=True)
class VadEvent:
    kind: str  # "speech_start" | "speech_end"
    time: float
    segment: Optional[AudioSegment] = None


def rms_dbfs(frame: np.ndarray) -> float:
    """RMS level of an int16-scaled frame in dB relative to full scale."""
    rms = math.sqrt(float(np.mean(frame.astype(np.float64) ** 2)))
    if rms <= 0:
        return -math.inf
    return 20.0 * math.log10(rms / FULL_SCALE)


def energy_classifier(config: VadConfig) -> Callable[[np.ndarray], float]:
    """Reference detector: hard 0/1 score from the RMS threshold (inclusive)."""

    def classify(frame: np.ndarray) -> float:
        return 1.0 if rms_dbfs(frame) >= config.energy_threshold_db else 0.0

    return classify


class StreamingVad:
    """Stateful segmenter over an arbitrary-chunked PCM stream.

    Speech opens when a frame scores above 0.5, closes after hangover_frames
    consecutive non-speech frames. The closing segment includes the hangover
    tail. Segments shorter than min_utterance_ms are discarded silently; their
    SpeechStart is withheld until the minimum duration is reached, so emitted
    events always strictly alternate.
    """

    def __init__(self, config: VadConfig = VadConfig(), classifier=None):
        self.config = config
        self.classifier = classifier or energy_classifier(config)
        self._buffer = np.zeros(0, dtype=np.int16)
        self._frame_index = 0
        self._segment_count = 0
        self._in_speech = False
        self._start_announced = False
        self._segment_frames: List[np.ndarray] = []
        self._segment_start_frame = 0
        self._silent_run = 0

    def process_chunk(self, pcm_chunk: Sequence[int]) -> List[VadEvent]:
        """Feed samples; returns any events completed by this chunk."""
        chunk = np.asarray(pcm_chunk, dtype=np.int16)
        self._buffer = np.concatenate([self._buffer, chunk])
        events: List[VadEvent] = []
        n = self.config.frame_samples
        while len(self._buffer) >= n:
            frame = self._buffer[:n]
            self._buffer = self._buffer[n:]
            events.extend(self._process_frame(frame))
        return events

    def flush(self) -> List[VadEvent]:
        """End of stream: close any open segment (zero-padding the tail frame)."""
        events: List[VadEvent] = []
        if len(self._buffer):
            n = self.config.frame_samples
            tail = np.zeros(n, dtype=np.int16)
            tail[: len(self._buffer)] = self._buffer
            self._buffer = np.zeros(0, dtype=np.int16)
            events.extend(self._process_frame(tail))
        if self._in_speech:
            events.extend(self._close_segment())
        return events

    def _frame_time(self, frame_index: int) -> float:
        return frame_index * self.config.frame_ms / 1000.0

    def _process_frame(self, frame: np.ndarray) -> List[VadEvent]:
        events: List[VadEvent] = []
        is_speech = self.classifier(frame) >= 0.5
        if self._in_speech:
            self._segment_frames.append(frame)
            if is_speech:
                self._silent_run = 0
            else:
                self._silent_run += 1
                if self._silent_run >= self.config.hangover_frames:
                    events.extend(self._close_segment())
            if self._in_speech and not self._start_announced:
                if len(self._segment_frames) >= self.config.min_utterance_frames:
                    self._start_announced = True
                    events.insert(
                        0,
                        VadEvent(
                            kind="speech_start",
                            time=self._frame_time(self._segment_start_frame),
                        ),
                    )
        elif is_speech:
            self._in_speech = True
            self._start_announced = False
            self._silent_run = 0
            self._segment_start_frame = self._frame_index
            self._segment_frames = [frame]
            if len(self._segment_frames) >= self.config.min_utterance_frames:
                self._start_announced = True
                events.append(
                    VadEvent(
                        kind="speech_start",
                        time=self._frame_time(self._segment_start_frame),
                    )
                )
        self._frame_index += 1
        return events

    def _close_segment(self) -> List[VadEvent]:
        events: List[VadEvent] = []
        frames = self._segment_frames
        start_time = self._frame_time(self._segment_start_frame)
        end_time = self._frame_time(self._segment_start_frame + len(frames))
        long_enough = len(frames) >= self.config.min_utterance_frames
        if long_enough:
            if not self._start_announced:
                events.append(VadEvent(kind="speech_start", time=start_time))
            self._segment_count += 1
            segment = AudioSegment(
                segment_id=self._segment_count,
                pcm=np.concatenate(frames),
                start_time=start_time,
                end_time=end_time,
            )
            events.append(VadEvent(kind="speech_end", time=end_time, segment=segment))
        self._in_speech = False
        self._start_announced = False
        self._segment_frames = []
        self._silent_run = 0
        return events


def decode_pcm16le(data: bytes) -> np.ndarray:
    """Decode little-endian signed 16-bit PCM bytes to an int16 array."""
    if len(data) % 2 != 0:
        raise ValueError("PCM payload has odd byte count")
    return np.frombuffer(data, dtype="<i2")
