"""Offline data-preparation utilities.

Two jobs: concatenating training samples into fixed-budget bins (first-fit in
arrival order, videos exempt), and drawing a negative "noisy audio" text
corpus whose length distribution matches a positive query-length histogram.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from .media import TilePlan, audio_token_count

DEFAULT_CONTEXT_CAP = 6000
LENGTH_BUCKET_WIDTH = 5


class PackingError(ValueError):
    pass


class NoiseSamplingError(ValueError):
    pass


@dataclass(frozen=True)
class Sample:
    sample_id: str
    text_tokens: int = 0
    image_plans: tuple = ()
    audio_seconds: tuple = ()
    is_video: bool = False
    payload_ref: str = ""

    @property
    def token_cost(self) -> int:
        cost = self.text_tokens
        cost += sum(plan.token_count for plan in self.image_plans)
        cost += sum(audio_token_count(d) for d in self.audio_seconds)
        return cost

    def __post_init__(self):
        if self.token_cost < 1:
            raise PackingError(f"sample {self.sample_id!r} has zero token cost")

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "modality_profile": {
                "text_tokens": self.text_tokens,
                "image_plans": [
                    {
                        "rows": p.rows,
                        "cols": p.cols,
                        "thumbnail": p.thumbnail,
                        "token_count": p.token_count,
                    }
                    for p in self.image_plans
                ],
                "audio_seconds": list(self.audio_seconds),
                "is_video": self.is_video,
            },
            "payload_ref": self.payload_ref,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Sample":
        profile = d.get("modality_profile", {})
        return cls(
            sample_id=d["sample_id"],
            text_tokens=profile.get("text_tokens", 0),
            image_plans=tuple(
                TilePlan(
                    rows=p["rows"],
                    cols=p["cols"],
                    thumbnail=p["thumbnail"],
                    token_count=p["token_count"],
                )
                for p in profile.get("image_plans", [])
            ),
            audio_seconds=tuple(profile.get("audio_seconds", [])),
            is_video=profile.get("is_video", False),
            payload_ref=d.get("payload_ref", ""),
        )


@dataclass
class PackedBin:
    bin_id: int
    members: List[Sample] = field(default_factory=list)
    is_video_bin: bool = False

    @property
    def total_tokens(self) -> int:
        return sum(s.token_cost for s in self.members)

    def to_dict(self) -> dict:
        return {
            "bin_id": self.bin_id,
            "members": [s.to_dict() for s in self.members],
            "total_tokens": self.total_tokens,
        }


def pack(samples: Sequence[Sample], context_cap: int = DEFAULT_CONTEXT_CAP) -> List[PackedBin]:
    """First-fit concatenation in arrival order.

    Each non-video sample goes into the earliest bin with room under the cap;
    video samples each form a singleton bin exempt from the cap.
    """
    bins: List[PackedBin] = []
    open_bins: List[PackedBin] = []  # non-video, in creation order
    for sample in samples:
        if sample.is_video:
            b = PackedBin(bin_id=len(bins), members=[sample], is_video_bin=True)
            bins.append(b)
            continue
        cost = sample.token_cost
        if cost > context_cap:
            raise PackingError(
                f"sample {sample.sample_id!r} costs {cost} tokens, over the "
                f"{context_cap}-token cap"
            )
        for b in open_bins:
            if b.total_tokens + cost <= context_cap:
                b.members.append(sample)
                break
        else:
            b = PackedBin(bin_id=len(bins), members=[sample])
            bins.append(b)
            open_bins.append(b)
    return bins


def length_bucket(length: int, width: int = LENGTH_BUCKET_WIDTH) -> int:
    return length // width


def sentence_length(sentence: str) -> int:
    """Length in whitespace-delimited units."""
    return len(sentence.split())


def target_allocation(positive_lengths: Sequence[int], k: int) -> Dict[int, int]:
    """Largest-remainder apportionment of k draws across length buckets."""
    counts: Dict[int, int] = {}
    for length in positive_lengths:
        b = length_bucket(length)
        counts[b] = counts.get(b, 0) + 1
    total = len(positive_lengths)
    quotas = {b: k * c / total for b, c in counts.items()}
    allocation = {b: int(q) for b, q in quotas.items()}
    shortfall = k - sum(allocation.values())
    remainders = sorted(
        quotas, key=lambda b: (quotas[b] - allocation[b], -b), reverse=True
    )
    for b in remainders[:shortfall]:
        allocation[b] += 1
    return allocation


def sample_noise_corpus(
    answer_sentences: Sequence[str],
    positive_lengths: Sequence[int],
    k: int,
    seed: int,
) -> List[str]:
    """Draw k negative sentences length-matched to the positive distribution.

    Sentences are drawn without replacement, per length bucket, so the
    selected-length histogram matches the positive histogram under
    largest-remainder rounding. Deterministic for a fixed seed.
    """
    if not answer_sentences:
        raise NoiseSamplingError("answer_sentences must be non-empty")
    if not positive_lengths:
        raise NoiseSamplingError("positive_lengths must be non-empty")
    allocation = target_allocation(positive_lengths, k)
    supply: Dict[int, List[str]] = {}
    for sentence in answer_sentences:
        supply.setdefault(length_bucket(sentence_length(sentence)), []).append(sentence)
    rng = random.Random(seed)
    selected: List[str] = []
    for b in sorted(allocation):
        want = allocation[b]
        have = supply.get(b, [])
        if len(have) < want:
            raise NoiseSamplingError(
                f"bucket {b} (lengths {b * LENGTH_BUCKET_WIDTH}-"
                f"{(b + 1) * LENGTH_BUCKET_WIDTH - 1}): need {want}, "
                f"have {len(have)}, short {want - len(have)}"
            )
        selected.extend(rng.sample(have, want))
    return selected


def noise_manifest(sentences: Sequence[str]) -> List[dict]:
    """Manifest rows for sampled noise text; audio_path is filled by an
    external TTS step."""
    return [{"text": s, "audio_path": None} for s in sentences]
