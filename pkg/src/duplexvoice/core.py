"""Shared domain types: state tokens, turns, conversation history, system prompts.

All types here are immutable values; operations return new values, so they are
safe to share across the scheduler, backends and the gateway without locking.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence, Union


class StateToken(enum.Enum):
    """Three-valued query classification prefix governing routing.

    QUERY_AUDIO: effective spoken query, expects an answer.
    NOISY_AUDIO: background speech not addressed to the system; acts as a
        special end-of-sequence, the answer stream is empty.
    QUERY_TEXT: typed query; classification is known a priori.
    """

    QUERY_AUDIO = "<1>"
    NOISY_AUDIO = "<2>"
    QUERY_TEXT = "<3>"

    def render(self) -> str:
        return self.value

    @classmethod
    def parse(cls, text: str) -> "StateToken":
        for member in cls:
            if member.value == text:
                return member
        raise ValueError(f"unknown state token: {text!r}")


class Modality(enum.Enum):
    IMAGE = "Image"
    VIDEO = "Video"
    AUDIO = "Audio"
    TEXT = "Text"


class Source(enum.Enum):
    USER = "User"
    ASSISTANT = "Assistant"


Content = Union[str, Sequence[str]]

INTERRUPTED_MARKER = "[interrupted]"


class HistoryError(ValueError):
    """Raised when a history operation would violate a history invariant."""


@dataclass(frozen=True)
class Turn:
    turn_id: int
    source: Source
    content: Content
    state_token: Optional[StateToken] = None
    modalities: frozenset = frozenset()
    completed: bool = True
    wall_time: float = 0.0

    def __post_init__(self):
        if self.source is Source.USER and self.state_token is None:
            raise HistoryError("user turns must carry a state token")
        if self.source is Source.ASSISTANT and self.state_token is not None:
            raise HistoryError("assistant turns carry no state token")
        if not self.completed and self.source is not Source.ASSISTANT:
            raise HistoryError("only assistant turns may be incomplete")
        if Modality.IMAGE in self.modalities and Modality.VIDEO in self.modalities:
            raise HistoryError("image and video are mutually exclusive in one turn")

    def text(self) -> str:
        """Flat text rendering; incomplete turns carry the interrupted marker."""
        body = self.content if isinstance(self.content, str) else "".join(self.content)
        if not self.completed:
            return f"{body} {INTERRUPTED_MARKER}"
        return body

    def to_dict(self) -> dict:
        return {
            "turn_id": self.turn_id,
            "source": self.source.value,
            "state_token": self.state_token.value if self.state_token else None,
            "content": list(self.content) if not isinstance(self.content, str) else self.content,
            "modalities": sorted(m.value for m in self.modalities),
            "completed": self.completed,
            "wall_time": self.wall_time,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Turn":
        content = d["content"]
        return cls(
            turn_id=d["turn_id"],
            source=Source(d["source"]),
            content=content if isinstance(content, str) else tuple(content),
            state_token=StateToken.parse(d["state_token"]) if d.get("state_token") else None,
            modalities=frozenset(Modality(m) for m in d.get("modalities", [])),
            completed=d.get("completed", True),
            wall_time=d.get("wall_time", 0.0),
        )


@dataclass(frozen=True)
class ConversationHistory:
    turns: tuple = ()
    system_prompt: str = ""

    def next_turn_id(self) -> int:
        return self.turns[-1].turn_id + 1 if self.turns else 1

    def append(self, turn: Turn) -> "ConversationHistory":
        if self.turns and turn.turn_id <= self.turns[-1].turn_id:
            raise HistoryError(
                f"turn_id {turn.turn_id} not greater than last id {self.turns[-1].turn_id}"
            )
        history = self
        if turn.source is Source.ASSISTANT:
            history = history._freeze_incomplete()
        return replace(history, turns=history.turns + (turn,))

    def _freeze_incomplete(self) -> "ConversationHistory":
        """Finalize any incomplete turn, baking the interrupted marker into it.

        Keeps the invariant that the only incomplete turn, if any, is the most
        recent assistant turn.
        """
        turns = list(self.turns)
        for i, t in enumerate(turns):
            if not t.completed:
                turns[i] = replace(
                    t,
                    content=tuple(t.content) + (" " + INTERRUPTED_MARKER,),
                    completed=True,
                )
        return replace(self, turns=tuple(turns))

    def consolidate(self, interrupted_partial: Sequence[str]) -> "ConversationHistory":
        """Fold an interrupted partial answer into history as an incomplete turn.

        An empty partial leaves history unchanged. If the previous consolidation
        left an incomplete turn that was never completed, it is kept; at most
        one incomplete turn ever exists because incomplete turns are only
        appended here and only as the newest turn.
        """
        partial = tuple(interrupted_partial)
        if not partial:
            return self
        turn = Turn(
            turn_id=self.next_turn_id(),
            source=Source.ASSISTANT,
            content=partial,
            completed=False,
        )
        return self.append(turn)

    def validate(self) -> None:
        """Raise HistoryError if any well-formedness invariant is broken."""
        ids = [t.turn_id for t in self.turns]
        if any(b <= a for a, b in zip(ids, ids[1:])):
            raise HistoryError("turn ids must strictly increase")
        incomplete = [t for t in self.turns if not t.completed]
        if len(incomplete) > 1:
            raise HistoryError("at most one incomplete turn allowed")
        if incomplete:
            assistants = [t for t in self.turns if t.source is Source.ASSISTANT]
            if assistants[-1] is not incomplete[0]:
                raise HistoryError("incomplete turn must be the most recent assistant turn")

    def to_dict(self) -> dict:
        return {
            "turns": [t.to_dict() for t in self.turns],
            "system_prompt": self.system_prompt,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConversationHistory":
        return cls(
            turns=tuple(Turn.from_dict(t) for t in d.get("turns", [])),
            system_prompt=d.get("system_prompt", ""),
        )

    def render_prompt(self) -> str:
        """Linearize history into a backend prompt string."""
        lines = [self.system_prompt] if self.system_prompt else []
        for turn in self.turns:
            prefix = "user" if turn.source is Source.USER else "assistant"
            lines.append(f"{prefix}: {turn.text()}")
        return "\n".join(lines)


class ModalityKey(enum.Enum):
    IMAGE_DATA = "ImageData"
    VIDEO_DATA = "VideoData"
    TEXT_DATA = "TextData"


@dataclass(frozen=True)
class PromptTemplate:
    modality_key: ModalityKey
    body: str


_IMAGE_PROMPT = (
    "You are an AI robot and your name is VITA.\n"
    "You are a multimodal large language model developed by the open-source community. "
    "Your aim is to be helpful, honest, and harmless.\n"
    "You support the ability to communicate fluently and answer user questions in "
    "multiple languages of the user's choice.\n"
    "If the user corrects the wrong answer you generated, you will apologize and "
    "discuss the correct answer with the user.\n"
    "You must answer the question strictly according to the content of the image "
    "given by the user, and it is strictly forbidden to answer the question without "
    "the content of the image. Please note that you are seeing the image, not the video."
)

_VIDEO_PROMPT = (
    "You are an AI robot and your name is VITA.\n"
    "You are a multimodal large language model developed by the open-source community. "
    "You aim to be helpful, honest, and harmless.\n"
    "You support the ability to communicate fluently and answer user questions in "
    "multiple languages of the user's choice.\n"
    "If the user corrects the wrong answer you generated, you will apologize and "
    "discuss the correct answer with the user.\n"
    "You must answer the question strictly according to the content of the video "
    "given by the user, and it is strictly forbidden to answer the question without "
    "the content of the video. Please note that you are seeing the video, not the image."
)

_TEXT_PROMPT = (
    "You are an AI robot and your name is VITA.\n"
    "You are a multimodal large language model developed by the open-source community. "
    "Your aim is to be helpful, honest, and harmless.\n"
    "You support the ability to communicate fluently and answer user questions in "
    "multiple languages of the user's choice.\n"
    "If the user corrects the wrong answer you generated, you will apologize and "
    "discuss the correct answer with the user."
)

PROMPT_TEMPLATES = {
    ModalityKey.IMAGE_DATA: PromptTemplate(ModalityKey.IMAGE_DATA, _IMAGE_PROMPT),
    ModalityKey.VIDEO_DATA: PromptTemplate(ModalityKey.VIDEO_DATA, _VIDEO_PROMPT),
    ModalityKey.TEXT_DATA: PromptTemplate(ModalityKey.TEXT_DATA, _TEXT_PROMPT),
}


def select_system_prompt(modalities: Iterable[Modality]) -> PromptTemplate:
    """Pick the system prompt template for a turn's input modalities.

    Image wins over everything but video; image+video together is invalid.
    Pure text and/or audio fall through to the text template.
    """
    mods = set(modalities)
    if not mods:
        raise ValueError("modalities must be non-empty")
    if Modality.IMAGE in mods and Modality.VIDEO in mods:
        raise ValueError("image and video may not both be present")
    if Modality.IMAGE in mods:
        return PROMPT_TEMPLATES[ModalityKey.IMAGE_DATA]
    if Modality.VIDEO in mods:
        return PROMPT_TEMPLATES[ModalityKey.VIDEO_DATA]
    return PROMPT_TEMPLATES[ModalityKey.TEXT_DATA]
