"""Full-duplex voice interaction engine.

Non-awakening audio gating, state-token query routing, barge-in with model
role swap, media token budgeting, and training-data packing utilities, all
testable end to end against deterministic mock inference backends.
"""

from .core import (
    ConversationHistory,
    Modality,
    PromptTemplate,
    Source,
    StateToken,
    Turn,
    select_system_prompt,
)
from .media import (
    FramePlan,
    MelConfig,
    TilePlan,
    audio_token_count,
    mel_features,
    plan_image_tiles,
    plan_video_frames,
)
from .packer import PackedBin, Sample, pack, sample_noise_corpus
from .scheduler import DuplexScheduler
from .vad import AudioSegment, StreamingVad, VadConfig

__all__ = [
    "AudioSegment",
    "ConversationHistory",
    "DuplexScheduler",
    "FramePlan",
    "MelConfig",
    "Modality",
    "PackedBin",
    "PromptTemplate",
    "Sample",
    "Source",
    "StateToken",
    "StreamingVad",
    "TilePlan",
    "Turn",
    "VadConfig",
    "audio_token_count",
    "mel_features",
    "pack",
    "plan_image_tiles",
    "plan_video_frames",
    "sample_noise_corpus",
    "select_system_prompt",
]

__version__ = "0.1.0"
