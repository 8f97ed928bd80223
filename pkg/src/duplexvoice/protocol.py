"""Wire-protocol checkers for backend streams and gateway server streams.

Used both in tests (accepting engine-produced streams, rejecting seeded
violations) and at runtime by the validating backend wrapper.
"""

from __future__ import annotations

from typing import Iterable, List, Optional

BACKEND_TERMINALS = {"done", "cancelled", "failed"}


class ProtocolViolation(Exception):
    pass


def check_backend_stream(frames: Iterable[dict]) -> None:
    """Validate one request's server-side frame sequence.

    Contract: exactly one state_token frame first, then zero or more token
    frames, then exactly one terminal. After state token "<2>", no token
    frames at all.
    """
    frames = list(frames)
    if not frames:
        raise ProtocolViolation("empty stream")
    state: Optional[str] = None
    terminal_seen = False
    for i, frame in enumerate(frames):
        kind = frame.get("type")
        if terminal_seen:
            raise ProtocolViolation(f"frame after terminal at index {i}")
        if kind == "state_token":
            if state is not None:
                raise ProtocolViolation("duplicate state token")
            if i != 0 and frames[0].get("type") != "state_token":
                raise ProtocolViolation("state token not first")
            state = frame.get("value")
            if state not in ("<1>", "<2>", "<3>"):
                raise ProtocolViolation(f"bad state token value {state!r}")
        elif kind == "token":
            if state is None:
                raise ProtocolViolation("token before state token")
            if state == "<2>":
                raise ProtocolViolation("token after noisy classification")
        elif kind in BACKEND_TERMINALS:
            if state is None and kind == "done":
                raise ProtocolViolation("done before state token")
            terminal_seen = True
        else:
            raise ProtocolViolation(f"unknown frame type {kind!r}")
    if not terminal_seen:
        raise ProtocolViolation("missing terminal")


def backend_stream_ok(frames: Iterable[dict]) -> bool:
    try:
        check_backend_stream(frames)
        return True
    except ProtocolViolation:
        return False


def check_server_messages(messages: Iterable[dict]) -> None:
    """Validate a gateway-to-client message stream.

    The AnswerToken run for each turn must be contiguous from its first token
    until its AnswerDone or an interrupted StateEvent.
    """
    open_turn: Optional[int] = None
    for i, msg in enumerate(messages):
        kind = msg.get("kind")
        if kind == "AnswerToken":
            turn_id = msg.get("turn_id")
            if open_turn is None:
                open_turn = turn_id
            elif turn_id != open_turn:
                raise ProtocolViolation(
                    f"interleaved answer streams at index {i}: "
                    f"turn {turn_id} inside turn {open_turn}"
                )
        elif kind == "AnswerDone":
            if msg.get("turn_id") != open_turn:
                raise ProtocolViolation(f"AnswerDone for non-open turn at index {i}")
            open_turn = None
        elif kind == "StateEvent":
            if msg.get("state") == "interrupted":
                open_turn = None
        elif kind == "Error":
            pass
        else:
            raise ProtocolViolation(f"unknown server message kind {kind!r}")


def server_messages_ok(messages: Iterable[dict]) -> bool:
    try:
        check_server_messages(messages)
        return True
    except ProtocolViolation:
        return False
