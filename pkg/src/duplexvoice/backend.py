"""Pluggable inference-backend contract plus a deterministic mock.

A backend receives a classify-then-generate request and streams events back:
exactly one classification first, then answer tokens, then one terminal.
A noisy-audio classification short-circuits straight to the terminal with no
tokens. The mock backend replays scripted labels on the session's event loop
so traces are reproducible byte for byte under the virtual clock; the remote
adapter speaks the newline-delimited JSON wire protocol to a real server.
"""

from __future__ import annotations

import json
import socket
import threading
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

from .core import ConversationHistory, StateToken, Turn
from .runtime import EventLoop

CLASSIFIED = "classified"
TOKEN = "token"
DONE = "done"
CANCELLED = "cancelled"
FAILED = "failed"

TERMINALS = {DONE, CANCELLED, FAILED}


@dataclass(frozen=True)
class BackendEvent:
    kind: str
    state_token: Optional[StateToken] = None
    text: Optional[str] = None
    reason: Optional[str] = None

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.state_token is not None:
            d["state_token"] = self.state_token.value
        if self.text is not None:
            d["text"] = self.text
        if self.reason is not None:
            d["reason"] = self.reason
        return d


@dataclass
class GenerationRequest:
    request_id: str
    history: ConversationHistory
    query: Turn
    label_key: str = ""


EventSink = Callable[[str, BackendEvent], None]  # (request_id, event)


class Backend:
    """Interface: one in-flight request per backend slot."""

    def submit(self, request: GenerationRequest, on_event: EventSink) -> None:
        raise NotImplementedError

    def cancel(self, request_id: str) -> None:
        raise NotImplementedError

    def close(self) -> None:
        pass


class ValidatingBackend(Backend):
    """Wrapper enforcing the event-ordering contract on any backend.

    Violations are converted into a single Failed terminal; subsequent events
    for that request are dropped. Also makes cancellation terminals idempotent.
    """

    def __init__(self, inner: Backend):
        self.inner = inner
        self._state: Dict[str, dict] = {}

    def submit(self, request: GenerationRequest, on_event: EventSink) -> None:
        self._state[request.request_id] = {"classified": None, "terminal": False}
        self.inner.submit(request, self._checked(on_event))

    def cancel(self, request_id: str) -> None:
        self.inner.cancel(request_id)

    def close(self) -> None:
        self.inner.close()

    def _checked(self, on_event: EventSink) -> EventSink:
        def deliver(request_id: str, event: BackendEvent) -> None:
            st = self._state.get(request_id)
            if st is None or st["terminal"]:
                return
            violation = None
            if event.kind == CLASSIFIED:
                if st["classified"] is not None:
                    violation = "protocol: duplicate state token"
                else:
                    st["classified"] = event.state_token
            elif event.kind == TOKEN:
                if st["classified"] is None:
                    violation = "protocol: token before state token"
                elif st["classified"] is StateToken.NOISY_AUDIO:
                    violation = "protocol: token after noisy classification"
            elif event.kind in TERMINALS:
                if st["classified"] is None and event.kind == DONE:
                    violation = "protocol: done before state token"
                st["terminal"] = True
            if violation:
                st["terminal"] = True
                on_event(request_id, BackendEvent(kind=FAILED, reason=violation))
                return
            on_event(request_id, event)

        return deliver


def tokenize_answer(answer: str) -> List[str]:
    """Split a scripted answer into word tokens that concatenate back to it."""
    words = answer.split(" ")
    return [w if i == 0 else " " + w for i, w in enumerate(words) if w or i > 0]


@dataclass(frozen=True)
class ScenarioLabel:
    state_token: StateToken
    answer: str = ""
    tokens_per_second: float = 10.0


class MockBackend(Backend):
    """Deterministic scripted backend driven by the session's event loop.

    Classification and token pacing are scheduled as loop callbacks, so under
    a virtual clock two identical runs produce identical event streams.
    """

    def __init__(
        self,
        labels: Dict[str, ScenarioLabel],
        loop: EventLoop,
        classify_latency: float = 0.05,
    ):
        self.labels = dict(labels)
        self.loop = loop
        self.classify_latency = classify_latency
        self._requests: Dict[str, dict] = {}

    def submit(self, request: GenerationRequest, on_event: EventSink) -> None:
        rid = request.request_id
        state = {"cancelled": False, "terminal": False, "on_event": on_event}
        self._requests[rid] = state
        label = self.labels.get(request.label_key)
        if label is None:
            self.loop.post(lambda: self._emit(rid, BackendEvent(kind=FAILED, reason="unlabeled")))
            return
        self.loop.schedule(
            self.classify_latency,
            lambda: self._emit(rid, BackendEvent(kind=CLASSIFIED, state_token=label.state_token)),
        )
        if label.state_token is StateToken.NOISY_AUDIO:
            self.loop.schedule(
                self.classify_latency, lambda: self._emit(rid, BackendEvent(kind=DONE))
            )
            return
        tokens = tokenize_answer(label.answer)
        spacing = 1.0 / label.tokens_per_second
        for i, piece in enumerate(tokens):
            self.loop.schedule(
                self.classify_latency + (i + 1) * spacing,
                lambda p=piece: self._emit(rid, BackendEvent(kind=TOKEN, text=p)),
            )
        self.loop.schedule(
            self.classify_latency + (len(tokens) + 1) * spacing,
            lambda: self._emit(rid, BackendEvent(kind=DONE)),
        )

    def cancel(self, request_id: str) -> None:
        state = self._requests.get(request_id)
        if state is None or state["cancelled"] or state["terminal"]:
            return
        state["cancelled"] = True
        self.loop.post(
            lambda: self._deliver(request_id, BackendEvent(kind=CANCELLED))
        )

    def _emit(self, request_id: str, event: BackendEvent) -> None:
        state = self._requests.get(request_id)
        if state is None or state["cancelled"] or state["terminal"]:
            return
        self._deliver(request_id, event)

    def _deliver(self, request_id: str, event: BackendEvent) -> None:
        state = self._requests.get(request_id)
        if state is None or state["terminal"]:
            return
        if event.kind in TERMINALS:
            state["terminal"] = True
        state["on_event"](request_id, event)


FRAME_KIND_TO_EVENT = {
    "state_token": CLASSIFIED,
    "token": TOKEN,
    "done": DONE,
    "cancelled": CANCELLED,
    "failed": FAILED,
}


def frame_to_event(frame: dict) -> BackendEvent:
    kind = FRAME_KIND_TO_EVENT.get(frame.get("type"))
    if kind is None:
        raise ValueError(f"unknown server frame type: {frame.get('type')!r}")
    if kind == CLASSIFIED:
        return BackendEvent(kind=CLASSIFIED, state_token=StateToken.parse(frame["value"]))
    if kind == TOKEN:
        return BackendEvent(kind=TOKEN, text=frame["text"])
    return BackendEvent(kind=kind, reason=frame.get("reason"))


def event_to_frame(event: BackendEvent) -> dict:
    if event.kind == CLASSIFIED:
        return {"type": "state_token", "value": event.state_token.value}
    if event.kind == TOKEN:
        return {"type": "token", "text": event.text}
    frame = {"type": event.kind}
    if event.reason is not None:
        frame["reason"] = event.reason
    return frame


class RemoteBackend(Backend):
    """Adapter to a model server speaking the backend wire protocol.

    One persistent connection per backend slot; requests are sequential. The
    reader thread posts events onto the session loop; transport failures and
    protocol violations surface as Failed terminals.
    """

    def __init__(self, host: str, port: int, loop: EventLoop, timeout: float = 10.0):
        self.host = host
        self.port = port
        self.loop = loop
        self.timeout = timeout
        self._sock = None
        self._reader = None
        self._lock = threading.Lock()
        self._active: Optional[str] = None
        self._on_event: Optional[EventSink] = None
        self._seen_classified = False
        self._terminal = False

    def _connect(self) -> None:
        self._sock = socket.create_connection((self.host, self.port), timeout=self.timeout)
        self._sock.settimeout(self.timeout)
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def submit(self, request: GenerationRequest, on_event: EventSink) -> None:
        with self._lock:
            self._active = request.request_id
            self._on_event = on_event
            self._seen_classified = False
            self._terminal = False
        try:
            if self._sock is None:
                self._connect()
            frame = {
                "type": "submit",
                "request_id": request.request_id,
                "prompt": request.history.render_prompt(),
                "query": request.query.text(),
            }
            self._send(frame)
        except OSError:
            self._fail(request.request_id, "connect")

    def cancel(self, request_id: str) -> None:
        try:
            if self._sock is not None:
                self._send({"type": "cancel", "request_id": request_id})
        except OSError:
            self._fail(request_id, "connect")

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
            self._sock = None

    def _send(self, frame: dict) -> None:
        data = (json.dumps(frame, separators=(",", ":")) + "\n").encode()
        self._sock.sendall(data)

    def _read_loop(self) -> None:
        buf = b""
        sock = self._sock
        while True:
            try:
                data = sock.recv(4096)
            except socket.timeout:
                self._post_fail("timeout")
                return
            except OSError:
                self._post_fail("connection lost")
                return
            if not data:
                if not self._terminal:
                    self._post_fail("connection closed")
                return
            buf += data
            while b"\n" in buf:
                line, buf = buf.split(b"\n", 1)
                if not line.strip():
                    continue
                try:
                    frame = json.loads(line)
                    event = frame_to_event(frame)
                except (ValueError, KeyError):
                    self._post_fail("protocol: malformed frame")
                    return
                self._post_event(event)

    def _post_event(self, event: BackendEvent) -> None:
        with self._lock:
            rid = self._active
            on_event = self._on_event
            if rid is None or self._terminal:
                return
            if event.kind == CLASSIFIED:
                self._seen_classified = True
            elif event.kind == TOKEN and not self._seen_classified:
                event = BackendEvent(kind=FAILED, reason="protocol: token before state token")
            if event.kind in TERMINALS:
                self._terminal = True
        self.loop.post(lambda: on_event(rid, event))

    def _post_fail(self, reason: str) -> None:
        with self._lock:
            rid = self._active
            on_event = self._on_event
            if rid is None or self._terminal:
                return
            self._terminal = True
        self.loop.post(lambda: on_event(rid, BackendEvent(kind=FAILED, reason=reason)))

    def _fail(self, request_id: str, reason: str) -> None:
        with self._lock:
            if self._terminal and self._active == request_id:
                return
            self._terminal = True
            on_event = self._on_event
        self.loop.post(lambda: on_event(request_id, BackendEvent(kind=FAILED, reason=reason)))
