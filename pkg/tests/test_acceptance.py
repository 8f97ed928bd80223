"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion lines.
"""

import collections
import json
import os
import random

import numpy as np

from duplexvoice.backend import (
    MockBackend,
    ScenarioLabel,
    event_to_frame,
)
from duplexvoice.core import ConversationHistory, Source, StateToken, Turn
from duplexvoice.gateway import EngineConfig, EngineSession, load_scenario, run_scenario
from duplexvoice.media import audio_token_count, plan_image_tiles, plan_video_frames
from duplexvoice.packer import Sample, pack, sample_noise_corpus, target_allocation, length_bucket
from duplexvoice.protocol import (
    backend_stream_ok,
    check_backend_stream,
    check_server_messages,
)
from duplexvoice.runtime import EventLoop
from duplexvoice.vad import StreamingVad, VadConfig

SCENARIO_PATH = os.path.join(os.path.dirname(__file__), "..", "scenarios", "barge_in.json")


def report_line(number, name, ok):
    status = "PASS" if ok else "FAIL"
    print(f"[{status}] criterion {number}: {name}")
    assert ok, f"criterion {number} ({name}) failed"


def test_criterion_1_token_arithmetic():
    ok = True
    ok &= audio_token_count(2.0) == 25
    ok &= plan_video_frames(3).frame_count == 4
    ok &= plan_video_frames(10).frame_count == 10
    ok &= plan_video_frames(100).frame_count == 16
    ok &= plan_image_tiles(448, 448, 12).token_count == 256
    # boundary continuity: both adjacent rules agree at 4 s and 16 s
    ok &= plan_video_frames(4.0).frame_count == 4
    ok &= plan_video_frames(16.0).frame_count == 16
    ok &= plan_video_frames(3.999).frame_count == 4
    ok &= plan_video_frames(16.001).frame_count == 16
    report_line(1, "token-arithmetic conformance", ok)


def first_fit_oracle(costs, cap):
    """Independent first-fit simulation over raw cost lists."""
    bins = []
    for i, (cost, video) in enumerate(costs):
        if video:
            bins.append(("video", [i]))
            continue
        placed = False
        for kind, members in bins:
            if kind == "text" and sum(costs[j][0] for j in members) + cost <= cap:
                members.append(i)
                placed = True
                break
        if not placed:
            bins.append(("text", [i]))
    return [(kind, tuple(members)) for kind, members in bins]


def test_criterion_2_packer_conformance():
    rng = random.Random(20240823)
    ok = True
    for case in range(1000):
        n = rng.randint(0, 12 if case % 2 == 0 else 40)
        spec = [
            (rng.randint(1, 6000), rng.random() < 0.15)
            for _ in range(n)
        ]
        samples = [
            Sample(
                sample_id=f"s{i}",
                text_tokens=cost if not video else cost + rng.randint(0, 6000),
                is_video=video,
            )
            for i, (cost, video) in enumerate(spec)
        ]
        bins = pack(samples, context_cap=6000)
        packed_ids = sorted(s.sample_id for b in bins for s in b.members)
        ok &= packed_ids == sorted(s.sample_id for s in samples)
        for b in bins:
            if b.is_video_bin:
                ok &= len(b.members) == 1 and b.members[0].is_video
            else:
                ok &= b.total_tokens <= 6000
                ok &= not any(s.is_video for s in b.members)
        if n <= 12:
            oracle = first_fit_oracle(
                [(s.token_cost, s.is_video) for s in samples], 6000
            )
            got = [
                ("video" if b.is_video_bin else "text",
                 tuple(int(s.sample_id[1:]) for s in b.members))
                for b in bins
            ]
            ok &= got == oracle
        if not ok:
            break
    report_line(2, "packer conformance (1,000 randomized cases + oracle)", ok)


def test_criterion_3_noise_sampler_distribution():
    rng = random.Random(99)
    ok = True
    for _ in range(50):
        positives = [rng.randint(1, 40) for _ in range(rng.randint(5, 80))]
        k = rng.randint(1, 40)
        answers = []
        for length in {(p // 5) * 5 or 1 for p in positives}:
            answers.extend(" ".join(["w"] * length) for _ in range(k + 5))
        seed = rng.randint(0, 10**9)
        selected = sample_noise_corpus(answers, positives, k, seed)
        again = sample_noise_corpus(answers, positives, k, seed)
        ok &= selected == again
        ok &= len(selected) == k
        target = target_allocation(positives, k)
        counts = collections.Counter(length_bucket(len(s.split())) for s in selected)
        ok &= all(abs(counts.get(b, 0) - want) <= 1 for b, want in target.items())
        if not ok:
            break
    report_line(3, "noise-sampler distribution match", ok)


def synth(ms, speech, sample_rate=16000):
    n = sample_rate * ms // 1000
    if not speech:
        return np.zeros(n, dtype=np.int16)
    t = np.arange(n) / sample_rate
    return (0.8 * 32767 * np.sin(2 * np.pi * 300 * t)).astype(np.int16)


def segment_boundaries(pcm, cuts):
    vad = StreamingVad(VadConfig())
    events = []
    prev = 0
    for cut in list(cuts) + [len(pcm)]:
        events.extend(vad.process_chunk(pcm[prev:cut]))
        prev = cut
    events.extend(vad.flush())
    return [
        (e.segment.start_time, e.segment.end_time)
        for e in events
        if e.kind == "speech_end"
    ]


def test_criterion_4_vad_chunking_invariance():
    ok = True
    for seed in range(200):
        rng = np.random.default_rng(seed)
        pieces = [
            synth(int(rng.integers(40, 500)), bool(rng.random() < 0.5))
            for _ in range(int(rng.integers(2, 6)))
        ]
        pcm = np.concatenate(pieces + [synth(600, False)])
        baseline = segment_boundaries(pcm, [])
        cuts = sorted(rng.integers(0, len(pcm), size=int(rng.integers(1, 10))))
        ok &= segment_boundaries(pcm, cuts) == baseline
        if not ok:
            break
    report_line(4, "VAD chunking invariance (200 randomized signals)", ok)


def random_scenario(seed):
    rng = random.Random(seed)
    labels = {}
    events = []
    t = 0.0
    for i in range(rng.randint(3, 8)):
        t += rng.uniform(0.05, 1.2)
        kind = rng.choices(["query", "noise", "text"], weights=[5, 3, 2])[0]
        key = f"u{i}"
        if kind == "noise":
            labels[key] = ScenarioLabel(StateToken.NOISY_AUDIO)
            events.append((t, "segment", key))
        else:
            answer = " ".join(f"w{j}" for j in range(rng.randint(2, 18)))
            tps = rng.choice([5.0, 10.0, 20.0])
            token = StateToken.QUERY_TEXT if kind == "text" else StateToken.QUERY_AUDIO
            labels[key] = ScenarioLabel(token, answer, tps)
            events.append((t, kind, key))
    return labels, events


def run_random_scenario(labels, events):
    config = EngineConfig(classify_latency=0.05)
    session = EngineSession(config, labels, send=lambda m: None, virtual=True)
    for t, kind, key in events:
        if kind == "text":
            session.loop.schedule(t, lambda k=key: session.inject_text(k, label_key=k))
        else:
            session.loop.schedule(t, lambda k=key: session.inject_segment(k))
    session.loop.run_until_idle()
    return session


def stale_tokens_after_interrupts(messages):
    """Max count of answer tokens for a turn after its interrupt event."""
    open_turn = None
    closed = collections.Counter()
    worst = 0
    for m in messages:
        if m["kind"] == "AnswerToken":
            if m["turn_id"] in closed:
                closed[m["turn_id"]] += 1
                worst = max(worst, closed[m["turn_id"]] - 1)
            else:
                open_turn = m["turn_id"]
        elif m["kind"] == "AnswerDone":
            open_turn = None
        elif m["kind"] == "StateEvent" and m["state"] == "interrupted":
            if open_turn is not None:
                closed[open_turn] = 1
                open_turn = None
    return worst


def test_criterion_5_duplex_protocol_suite():
    ok = True
    for seed in range(500):
        labels, events = random_scenario(seed)
        session = run_random_scenario(labels, events)
        rerun = run_random_scenario(labels, events)

        trace_a = json.dumps(session.scheduler.trace, sort_keys=True)
        trace_b = json.dumps(rerun.scheduler.trace, sort_keys=True)
        ok &= trace_a == trace_b  # (e) exact determinism

        trace = session.scheduler.trace
        messages = session.messages
        report = session.scheduler.report()

        noise_keys = {k for k, l in labels.items() if l.state_token is StateToken.NOISY_AUDIO}
        query_keys = set(labels) - noise_keys
        dropped = [r["detail"]["dropped_label"] for r in trace if r["kind"] == "queue_overflow"]
        classified = [r["detail"] for r in trace if r["kind"] == "classified"]
        suppressed = [r["detail"]["label_key"] for r in trace if r["kind"] == "suppressed"]

        # (a) suppression completeness: no noise utterance ever reaches the
        # answering path, and each is either suppressed or dropped
        ok &= not any(d["label_key"] in noise_keys for d in classified)
        ok &= sorted(suppressed + [d for d in dropped if d in noise_keys]) == sorted(noise_keys)

        # (b) single-generator invariant at every recorded transition
        for r in trace:
            for snap in (r["slots_before"], r["slots_after"]):
                ok &= sum(1 for s in snap if s["phase"] == "Generating") <= 1

        # (c) interrupt bound: at most one stale token after an interrupt
        ok &= stale_tokens_after_interrupts(messages) <= 1

        # (d) every query is answered or consolidated-then-superseded
        processed_queries = [d["label_key"] for d in classified]
        expected = sorted(k for k in query_keys if k not in dropped)
        ok &= sorted(processed_queries) == expected
        ok &= report["answered"] == len(processed_queries)
        session.scheduler.history.validate()

        if not ok:
            break
    report_line(5, "duplex protocol suite (500 randomized scenarios)", ok)


def test_criterion_6_barge_in_reenactment():
    result = run_scenario(load_scenario(SCENARIO_PATH))
    report = result["report"]
    ok = (report["answered"], report["suppressed"], report["interrupts"]) == (2, 1, 1)
    # cancel, consolidation and swap happen inside one classified transition;
    # the client sees interrupted -> swap -> generating in that order
    states = [m["state"] for m in result["messages"] if m["kind"] == "StateEvent"]
    i = states.index("interrupted")
    ok &= states[i : i + 3] == ["interrupted", "swap", "generating"]
    interrupt_record = [
        r for r in result["trace"] if r["kind"] == "classified" and r["detail"]["interrupted"]
    ]
    ok &= len(interrupt_record) == 1
    report_line(6, "barge-in reenactment scenario", ok)


def test_criterion_7_protocol_conformance():
    ok = True
    # engine-produced backend streams are accepted
    for label in [
        ScenarioLabel(StateToken.QUERY_AUDIO, "a b c", 10.0),
        ScenarioLabel(StateToken.NOISY_AUDIO),
        ScenarioLabel(StateToken.QUERY_TEXT, "hello there", 20.0),
    ]:
        loop = EventLoop()
        backend = MockBackend({"u": label}, loop)
        frames = []
        backend.submit(
            _request("u"),
            lambda rid, ev: frames.append(event_to_frame(ev)),
        )
        loop.run_until_idle()
        check_backend_stream(frames)

    # engine-produced server streams are accepted
    result = run_scenario(load_scenario(SCENARIO_PATH))
    check_server_messages(result["messages"])

    # seeded violations are rejected
    ok &= not backend_stream_ok([{"type": "token", "text": "x"}, {"type": "done"}])
    ok &= not backend_stream_ok(
        [
            {"type": "state_token", "value": "<1>"},
            {"type": "done"},
            {"type": "done"},
        ]
    )
    report_line(7, "wire/backend protocol conformance", ok)


def _request(label):
    from duplexvoice.backend import GenerationRequest

    return GenerationRequest(
        request_id="r1",
        history=ConversationHistory(),
        query=Turn(1, Source.USER, label, state_token=StateToken.QUERY_AUDIO),
        label_key=label,
    )
