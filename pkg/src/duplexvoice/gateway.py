"""Network service and scenario runner.

Both surfaces drive the identical scheduler code path; only the event source
differs. The live service accepts newline-delimited JSON client messages over
TCP and runs one session (event loop + two backend slots + VAD stream) per
connection. The scenario runner replays a timeline file against a fresh
session, usually under the virtual clock, and checks the scenario's
expectations against the session report.
"""

from __future__ import annotations

import base64
import json
import os
import socket
import socketserver
import threading
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .backend import MockBackend, RemoteBackend, ScenarioLabel, ValidatingBackend
from .core import StateToken
from .runtime import EventLoop
from .scheduler import DEFAULT_QUEUE_CAP, DuplexScheduler
from .vad import StreamingVad, VadConfig, decode_pcm16le

DEFAULT_PORT = 8766
DEFAULT_CHUNK_MS = 100


@dataclass
class EngineConfig:
    host: str = "127.0.0.1"
    port: int = DEFAULT_PORT
    vad: VadConfig = field(default_factory=VadConfig)
    queue_cap: int = DEFAULT_QUEUE_CAP
    backend_mode: str = "mock"  # "mock" | "remote"
    backend_host: str = "127.0.0.1"
    backend_port: int = 0
    classify_latency: float = 0.05
    trace_path: Optional[str] = None

    @classmethod
    def from_dict(cls, d: dict) -> "EngineConfig":
        gateway = d.get("gateway", {})
        vad = d.get("vad", {})
        sched = d.get("scheduler", {})
        backend = d.get("backend", {})
        trace = d.get("trace", {})
        return cls(
            host=gateway.get("host", "127.0.0.1"),
            port=int(os.environ.get("DUPLEXVOICE_PORT", gateway.get("port", DEFAULT_PORT))),
            vad=VadConfig(
                frame_ms=vad.get("frame_ms", 30),
                energy_threshold_db=vad.get("energy_threshold_db", -40.0),
                hangover_frames=vad.get("hangover_frames", 10),
                min_utterance_ms=vad.get("min_utterance_ms", 200),
                sample_rate=vad.get("sample_rate", 16000),
            ),
            queue_cap=sched.get("queue_cap", DEFAULT_QUEUE_CAP),
            backend_mode=backend.get("mode", "mock"),
            backend_host=backend.get("host", "127.0.0.1"),
            backend_port=backend.get("port", 0),
            classify_latency=backend.get("classify_latency", 0.05),
            trace_path=trace.get("path"),
        )

    @classmethod
    def load(cls, path: Optional[str]) -> "EngineConfig":
        if path is None:
            return cls()
        with open(path) as f:
            return cls.from_dict(json.load(f))


def parse_labels(raw: dict) -> Dict[str, ScenarioLabel]:
    labels = {}
    for key, spec in raw.items():
        labels[key] = ScenarioLabel(
            state_token=StateToken.parse(spec["state_token"]),
            answer=spec.get("answer", ""),
            tokens_per_second=spec.get("tokens_per_second", 10.0),
        )
    return labels


def synth_tone(
    duration: float,
    sample_rate: int = 16000,
    freq: float = 440.0,
    amplitude: float = 0.5,
) -> np.ndarray:
    """Full-band test tone as int16 PCM."""
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    return (amplitude * 32767 * np.sin(2 * np.pi * freq * t)).astype(np.int16)


class EngineSession:
    """One session: event loop, two backend slots, VAD stream, scheduler."""

    def __init__(
        self,
        config: EngineConfig,
        labels: Dict[str, ScenarioLabel],
        send,
        virtual: bool = True,
    ):
        self.config = config
        self.loop = EventLoop(virtual=virtual)
        self.vad = StreamingVad(config.vad)
        self.messages: List[dict] = []

        def deliver(msg: dict) -> None:
            self.messages.append(msg)
            send(msg)

        self.backends = {
            slot: ValidatingBackend(self._make_backend(labels))
            for slot in ("A", "B")
        }
        self.scheduler = DuplexScheduler(
            loop=self.loop,
            backends=self.backends,
            send=deliver,
            queue_cap=config.queue_cap,
        )
        self._segment_count = 0
        self._label_order: List[str] = []

    def _make_backend(self, labels):
        if self.config.backend_mode == "remote":
            return RemoteBackend(
                self.config.backend_host, self.config.backend_port, self.loop
            )
        return MockBackend(labels, self.loop, classify_latency=self.config.classify_latency)

    def set_label_order(self, order: List[str]) -> None:
        self._label_order = list(order)

    def feed_pcm(self, pcm: np.ndarray, label_key: Optional[str] = None) -> None:
        """Run samples through the VAD; completed utterances go to the scheduler."""
        for event in self.vad.process_chunk(pcm):
            if event.kind == "speech_end":
                self._utterance_ready(event.segment, label_key)

    def flush_vad(self, label_key: Optional[str] = None) -> None:
        for event in self.vad.flush():
            if event.kind == "speech_end":
                self._utterance_ready(event.segment, label_key)

    def _utterance_ready(self, segment, label_key: Optional[str]) -> None:
        self._segment_count += 1
        if label_key is None:
            if self._label_order:
                idx = min(self._segment_count - 1, len(self._label_order) - 1)
                label_key = self._label_order[idx]
            else:
                label_key = f"u{self._segment_count}"
        self.scheduler.submit_utterance(content=label_key, label_key=label_key)

    def inject_segment(self, label_key: str) -> None:
        """Bypass the VAD: a pre-segmented utterance is ready now."""
        self.scheduler.submit_utterance(content=label_key, label_key=label_key)

    def inject_text(self, text: str, label_key: Optional[str] = None) -> None:
        self.scheduler.submit_text(text, label_key)

    def close(self) -> None:
        for b in self.backends.values():
            b.close()


# -- scenario runner --


class ScenarioError(ValueError):
    pass


def load_scenario(path: str) -> dict:
    with open(path) as f:
        scenario = json.load(f)
    timeline = scenario.get("timeline", [])
    times = [entry["at"] for entry in timeline]
    if times != sorted(times):
        raise ScenarioError("timeline must be sorted by 'at'")
    return scenario


def run_scenario(
    scenario: dict,
    config: Optional[EngineConfig] = None,
    trace_path: Optional[str] = None,
) -> dict:
    """Execute a scenario timeline; returns {report, trace, messages, ok, diffs}."""
    config = config or EngineConfig()
    virtual = scenario.get("clock", "virtual") == "virtual"
    labels = parse_labels(scenario.get("labels", {}))
    session = EngineSession(config, labels, send=lambda msg: None, virtual=virtual)
    sr = config.vad.sample_rate
    # silence tail long enough for the VAD to close the segment
    tail = (config.vad.hangover_frames + 2) * config.vad.frame_ms / 1000.0

    for entry in scenario.get("timeline", []):
        at = entry["at"]
        action = entry["action"]
        if action in ("audio", "noise"):
            utterance = entry["utterance"]
            duration = entry.get("duration", 0.5)
            pcm = np.concatenate(
                [
                    synth_tone(duration, sr),
                    np.zeros(int(tail * sr), dtype=np.int16),
                ]
            )
            session.loop.schedule(
                at, lambda p=pcm, u=utterance: session.feed_pcm(p, label_key=u)
            )
        elif action == "segment":
            session.loop.schedule(
                at, lambda u=entry["utterance"]: session.inject_segment(u)
            )
        elif action == "text":
            session.loop.schedule(at, lambda t=entry["text"]: session.inject_text(t))
        else:
            raise ScenarioError(f"unknown timeline action {action!r}")

    session.loop.run_until_idle()
    session.close()
    report = session.scheduler.report()
    trace = session.scheduler.trace

    diffs = []
    for key, expected in scenario.get("expectations", {}).items():
        observed = report.get(key)
        if observed != expected:
            diffs.append({"key": key, "expected": expected, "observed": observed})

    if trace_path:
        with open(trace_path, "w") as f:
            for record in trace:
                f.write(json.dumps(record, separators=(",", ":"), sort_keys=True) + "\n")

    return {
        "report": report,
        "trace": trace,
        "messages": session.messages,
        "ok": not diffs,
        "diffs": diffs,
    }


# -- live TCP service --


class GatewayServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, config: EngineConfig):
        self.config = config
        super().__init__((config.host, config.port), SessionHandler)


class SessionHandler(socketserver.StreamRequestHandler):
    def handle(self):
        config: EngineConfig = self.server.config
        write_lock = threading.Lock()

        def send(msg: dict) -> None:
            data = (json.dumps(msg, separators=(",", ":")) + "\n").encode()
            with write_lock:
                try:
                    self.wfile.write(data)
                    self.wfile.flush()
                except OSError:
                    pass

        session: Optional[EngineSession] = None
        loop_thread: Optional[threading.Thread] = None
        try:
            for raw in self.rfile:
                line = raw.strip()
                if not line:
                    continue
                try:
                    msg = json.loads(line)
                    kind = msg["kind"]
                except (ValueError, KeyError):
                    send({"kind": "Error", "code": "bad_frame", "message": "malformed frame"})
                    return
                if session is None:
                    if kind != "Hello":
                        send({"kind": "Error", "code": "bad_frame", "message": "expected Hello"})
                        return
                    hello_cfg = msg.get("config", {})
                    labels = parse_labels(hello_cfg.get("labels", {}))
                    session = EngineSession(config, labels, send=send, virtual=False)
                    session.set_label_order(hello_cfg.get("label_order", []))
                    loop_thread = threading.Thread(
                        target=session.loop.run_forever, daemon=True
                    )
                    loop_thread.start()
                    continue
                if kind == "AudioChunk":
                    try:
                        pcm = decode_pcm16le(base64.b64decode(msg["pcm"]))
                    except (ValueError, KeyError):
                        send({"kind": "Error", "code": "bad_frame", "message": "bad pcm"})
                        return
                    session.loop.post(lambda p=pcm: session.feed_pcm(p))
                elif kind == "TextQuery":
                    text = msg.get("text", "")
                    session.loop.post(lambda t=text: session.inject_text(t))
                elif kind == "Bye":
                    return
                else:
                    send({"kind": "Error", "code": "bad_frame", "message": f"unknown kind {kind}"})
                    return
        finally:
            if session is not None:
                session.loop.stop()
                if loop_thread is not None:
                    loop_thread.join(timeout=2.0)
                if config.trace_path:
                    with open(config.trace_path, "a") as f:
                        for record in session.scheduler.trace:
                            f.write(json.dumps(record, separators=(",", ":"), sort_keys=True) + "\n")
                session.close()


def serve(config: EngineConfig) -> GatewayServer:
    """Start the gateway; caller owns shutdown()."""
    server = GatewayServer(config)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server
