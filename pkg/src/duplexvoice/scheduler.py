"""Two-slot duplex scheduler: non-awakening gating and barge-in with role swap.

Two backend slots share a session. At any moment one slot holds the Generator
role (it answers, or idles between answers) and the other holds the Monitor
role (it classifies incoming utterances). Classification runs concurrently
with generation, so noise never pauses output; only a query verdict interrupts
the in-flight answer, consolidates its partial text into history, and swaps
the slot roles.

All transitions happen on the session event loop, strictly serialized, and
every transition appends a trace record, so runs under a virtual clock are
exactly reproducible.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

from .backend import (
    CANCELLED,
    CLASSIFIED,
    DONE,
    FAILED,
    TOKEN,
    Backend,
    BackendEvent,
    GenerationRequest,
)
from .core import ConversationHistory, Source, StateToken, Turn
from .runtime import EventLoop

DEFAULT_QUEUE_CAP = 4


class Role(enum.Enum):
    GENERATOR = "Generator"
    MONITOR = "Monitor"


class Phase(enum.Enum):
    IDLE = "Idle"
    AWAITING_CLASSIFICATION = "AwaitingClassification"
    GENERATING = "Generating"


class SchedulerFault(RuntimeError):
    pass


@dataclass
class Slot:
    slot_id: str
    role: Role
    phase: Phase = Phase.IDLE
    active_request: Optional[str] = None
    partial_tokens: List[str] = field(default_factory=list)
    answer_turn_id: Optional[int] = None

    def snapshot(self) -> dict:
        return {
            "slot_id": self.slot_id,
            "role": self.role.value,
            "phase": self.phase.value,
            "active_request": self.active_request,
        }


@dataclass
class WorkItem:
    kind: str  # "audio" | "text"
    content: str
    label_key: str
    state_token: Optional[StateToken] = None  # known a priori for text


class DuplexScheduler:
    """Session state machine; drive it only from the owning event loop."""

    def __init__(
        self,
        loop: EventLoop,
        backends: Dict[str, Backend],
        send: Callable[[dict], None],
        system_prompt: str = "",
        queue_cap: int = DEFAULT_QUEUE_CAP,
    ):
        assert set(backends) == {"A", "B"}
        self.loop = loop
        self.backends = backends
        self.send = send
        self.slots = {
            "A": Slot("A", Role.GENERATOR),
            "B": Slot("B", Role.MONITOR),
        }
        self.history = ConversationHistory(system_prompt=system_prompt)
        self.queue: deque = deque()
        self.queue_cap = queue_cap
        self.trace: List[dict] = []
        self.answered = 0
        self.suppressed = 0
        self.interrupts = 0
        self.dropped = 0
        self.answered_turn_ids: List[int] = []
        self.faulted = False
        self._request_count = 0
        self._active_items: Dict[str, WorkItem] = {}
        self._record("session_start", {})
        self.send({"kind": "StateEvent", "state": "listening"})

    # -- public entry points (call on the event loop) --

    def submit_utterance(self, content: str, label_key: str) -> None:
        """A VAD-complete utterance is ready for classification."""
        self._enqueue(WorkItem(kind="audio", content=content, label_key=label_key))

    def submit_text(self, text: str, label_key: Optional[str] = None) -> None:
        if not text:
            self.send({"kind": "Error", "code": "empty_text", "message": "empty text query"})
            self._record("text_rejected", {})
            return
        self._enqueue(
            WorkItem(
                kind="text",
                content=text,
                label_key=label_key if label_key is not None else text,
                state_token=StateToken.QUERY_TEXT,
            )
        )

    def on_backend_event(self, slot_id: str, request_id: str, event: BackendEvent) -> None:
        slot = self.slots[slot_id]
        if slot.active_request != request_id:
            # terminal for an already-settled request (cancel raced completion)
            self._record(
                "stale_backend_event",
                {"slot": slot_id, "request_id": request_id, "event": event.to_dict()},
            )
            return
        handler = {
            CLASSIFIED: self._on_classified,
            TOKEN: self._on_token,
            DONE: self._on_done,
            CANCELLED: self._on_cancelled,
            FAILED: self._on_failed,
        }[event.kind]
        handler(slot, event)

    def report(self) -> dict:
        return {
            "answered": self.answered,
            "suppressed": self.suppressed,
            "interrupts": self.interrupts,
            "dropped": self.dropped,
            "answered_turn_ids": list(self.answered_turn_ids),
        }

    # -- internals --

    def _enqueue(self, item: WorkItem) -> None:
        monitor = self._monitor()
        detail = {"kind": item.kind, "label_key": item.label_key}
        if monitor.phase is Phase.IDLE:
            self._record("dispatch", detail)
            self._dispatch(item)
        else:
            self.queue.append(item)
            if len(self.queue) > self.queue_cap:
                lost = self.queue.popleft()
                self.dropped += 1
                self._record("queue_overflow", {"dropped_label": lost.label_key})
            self._record("queued", {**detail, "queue_depth": len(self.queue)})

    def _dispatch(self, item: WorkItem) -> None:
        monitor = self._monitor()
        self._request_count += 1
        rid = f"r{self._request_count}"
        provisional = item.state_token or StateToken.QUERY_AUDIO
        query = Turn(
            turn_id=self.history.next_turn_id(),
            source=Source.USER,
            content=item.content,
            state_token=provisional,
        )
        request = GenerationRequest(
            request_id=rid,
            history=self.history,
            query=query,
            label_key=item.label_key,
        )
        monitor.phase = Phase.AWAITING_CLASSIFICATION
        monitor.active_request = rid
        self._active_items[rid] = item
        self.send({"kind": "StateEvent", "state": "classifying"})
        self.backends[monitor.slot_id].submit(
            request,
            lambda req_id, ev, sid=monitor.slot_id: self.loop.post(
                lambda: self.on_backend_event(sid, req_id, ev)
            ),
        )
        self._check_invariants()

    def _monitor(self) -> Slot:
        return next(s for s in self.slots.values() if s.role is Role.MONITOR)

    def _generator(self) -> Slot:
        return next(s for s in self.slots.values() if s.role is Role.GENERATOR)

    def _on_classified(self, slot: Slot, event: BackendEvent) -> None:
        if slot.phase is not Phase.AWAITING_CLASSIFICATION:
            self._fault(f"classification for slot {slot.slot_id} not awaiting one")
            return
        token = event.state_token
        item = self._active_items[slot.active_request]
        before = self._snapshot()
        if token is StateToken.NOISY_AUDIO:
            self.suppressed += 1
            slot.phase = Phase.IDLE
            slot.active_request = None
            self.send({"kind": "StateEvent", "state": "suppressed"})
            self._record("suppressed", {"label_key": item.label_key}, before)
            self._dispatch_next()
            return
        generator = self._generator()
        interrupted = generator.phase is Phase.GENERATING
        if interrupted:
            self.interrupts += 1
            self.backends[generator.slot_id].cancel(generator.active_request)
            self.history = self.history.consolidate(generator.partial_tokens)
            # the interrupted query did receive (part of) an answer; it counts
            # as answered-then-superseded
            self.answered += 1
            if generator.partial_tokens:
                self.answered_turn_ids.append(self.history.turns[-1].turn_id)
            generator.phase = Phase.IDLE
            generator.active_request = None
            generator.partial_tokens = []
            generator.answer_turn_id = None
            self.send({"kind": "StateEvent", "state": "interrupted"})
        # the classifying slot always takes over generation; on interrupt this
        # is the identity swap, otherwise a quiet reassignment between answers
        generator.role, slot.role = Role.MONITOR, Role.GENERATOR
        if interrupted:
            self.send({"kind": "StateEvent", "state": "swap"})
        user_turn = Turn(
            turn_id=self.history.next_turn_id(),
            source=Source.USER,
            content=item.content,
            state_token=token,
        )
        self.history = self.history.append(user_turn)
        slot.phase = Phase.GENERATING
        slot.partial_tokens = []
        slot.answer_turn_id = self.history.next_turn_id()
        self.send({"kind": "StateEvent", "state": "generating"})
        self._record(
            "classified",
            {
                "state_token": token.value,
                "label_key": item.label_key,
                "interrupted": interrupted,
                "user_turn_id": user_turn.turn_id,
            },
            before,
        )

    def _on_token(self, slot: Slot, event: BackendEvent) -> None:
        if slot.phase is not Phase.GENERATING:
            self._record("stray_token", {"slot": slot.slot_id})
            return
        slot.partial_tokens.append(event.text)
        self.send(
            {"kind": "AnswerToken", "text": event.text, "turn_id": slot.answer_turn_id}
        )
        self._record("token", {"slot": slot.slot_id, "text": event.text})

    def _on_done(self, slot: Slot, event: BackendEvent) -> None:
        if slot.phase is not Phase.GENERATING:
            self._fault(f"done for slot {slot.slot_id} not generating")
            return
        before = self._snapshot()
        turn = Turn(
            turn_id=slot.answer_turn_id,
            source=Source.ASSISTANT,
            content=tuple(slot.partial_tokens),
            completed=True,
        )
        self.history = self.history.append(turn)
        self.answered += 1
        self.answered_turn_ids.append(turn.turn_id)
        self.send({"kind": "AnswerDone", "turn_id": turn.turn_id})
        self._active_items.pop(slot.active_request, None)
        slot.phase = Phase.IDLE
        slot.active_request = None
        slot.partial_tokens = []
        slot.answer_turn_id = None
        self._record("completed", {"turn_id": turn.turn_id}, before)
        self._dispatch_next()

    def _on_cancelled(self, slot: Slot, event: BackendEvent) -> None:
        # interrupt handling already settled the slot; only reachable if a
        # cancel raced a freshly-submitted request, which the rid check blocks
        self._record("cancelled", {"slot": slot.slot_id})

    def _on_failed(self, slot: Slot, event: BackendEvent) -> None:
        before = self._snapshot()
        self.send(
            {"kind": "Error", "code": "backend_failed", "message": event.reason or ""}
        )
        self._active_items.pop(slot.active_request, None)
        slot.phase = Phase.IDLE
        slot.active_request = None
        slot.partial_tokens = []
        slot.answer_turn_id = None
        self._record("backend_failed", {"slot": slot.slot_id, "reason": event.reason}, before)
        self._dispatch_next()

    def _dispatch_next(self) -> None:
        if self.queue and self._monitor().phase is Phase.IDLE:
            item = self.queue.popleft()
            self._record("dispatch", {"kind": item.kind, "label_key": item.label_key})
            self._dispatch(item)

    def _fault(self, message: str) -> None:
        self.faulted = True
        self.send({"kind": "Error", "code": "session_fault", "message": message})
        self._record("fault", {"message": message})

    def _snapshot(self) -> list:
        return [self.slots["A"].snapshot(), self.slots["B"].snapshot()]

    def _record(self, kind: str, detail: dict, before: Optional[list] = None) -> None:
        self.trace.append(
            {
                "time": round(self.loop.now(), 6),
                "kind": kind,
                "detail": detail,
                "slots_before": before if before is not None else self._snapshot(),
                "slots_after": self._snapshot(),
            }
        )
        self._check_invariants()

    def _check_invariants(self) -> None:
        roles = sorted(s.role.value for s in self.slots.values())
        if roles != ["Generator", "Monitor"]:
            raise SchedulerFault(f"role conservation broken: {roles}")
        generating = [s for s in self.slots.values() if s.phase is Phase.GENERATING]
        if len(generating) > 1:
            raise SchedulerFault("more than one generating slot")
        for s in generating:
            if s.role is not Role.GENERATOR:
                raise SchedulerFault("generating slot without generator role")
        self.history.validate()
