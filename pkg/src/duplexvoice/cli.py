"""Command-line entry point: serve, simulate, pack, sample-noise, tokenize."""

from __future__ import annotations

import argparse
import json
import sys

from . import gateway, media, packer


def _cmd_serve(args) -> int:
    config = gateway.EngineConfig.load(args.config)
    try:
        server = gateway.GatewayServer(config)
    except OSError as exc:
        print(f"startup failed: {exc}", file=sys.stderr)
        return 1
    print(f"listening on {config.host}:{config.port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


def _cmd_simulate(args) -> int:
    scenario = gateway.load_scenario(args.scenario)
    if args.virtual_clock:
        scenario["clock"] = "virtual"
    config = gateway.EngineConfig.load(args.config)
    result = gateway.run_scenario(scenario, config=config, trace_path=args.trace)
    print(json.dumps({"report": result["report"], "ok": result["ok"], "diffs": result["diffs"]}, indent=2))
    return 0 if result["ok"] else 1


def _cmd_pack(args) -> int:
    samples = []
    with open(args.input) as f:
        for line in f:
            if line.strip():
                samples.append(packer.Sample.from_dict(json.loads(line)))
    try:
        bins = packer.pack(samples, context_cap=args.cap)
    except packer.PackingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = open(args.output, "w") if args.output else sys.stdout
    for b in bins:
        out.write(json.dumps(b.to_dict(), separators=(",", ":")) + "\n")
    if args.output:
        out.close()
    return 0


def _cmd_sample_noise(args) -> int:
    with open(args.answers) as f:
        sentences = [line.rstrip("\n") for line in f if line.strip()]
    with open(args.positive_lengths) as f:
        lengths = json.load(f)
    try:
        selected = packer.sample_noise_corpus(sentences, lengths, args.k, args.seed)
    except packer.NoiseSamplingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = open(args.output, "w") if args.output else sys.stdout
    for row in packer.noise_manifest(selected):
        out.write(json.dumps(row, separators=(",", ":")) + "\n")
    if args.output:
        out.close()
    return 0


def _cmd_tokenize(args) -> int:
    with open(args.manifest) as f:
        manifest = json.load(f)
    print(json.dumps(media.media_token_budget(manifest), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="duplexvoice")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the live gateway service")
    p.add_argument("--config", default=None)
    p.set_defaults(fn=_cmd_serve)

    p = sub.add_parser("simulate", help="run a scenario file offline")
    p.add_argument("--scenario", required=True)
    p.add_argument("--trace", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--virtual-clock", action="store_true")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("pack", help="concatenate training samples into bins")
    p.add_argument("--input", required=True, help="JSON-lines sample manifest")
    p.add_argument("--output", default=None)
    p.add_argument("--cap", type=int, default=packer.DEFAULT_CONTEXT_CAP)
    p.set_defaults(fn=_cmd_pack)

    p = sub.add_parser("sample-noise", help="draw a length-matched negative corpus")
    p.add_argument("--answers", required=True, help="one sentence per line")
    p.add_argument("--positive-lengths", required=True, help="JSON list of lengths")
    p.add_argument("-k", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", default=None)
    p.set_defaults(fn=_cmd_sample_noise)

    p = sub.add_parser("tokenize", help="token budget for a media manifest")
    p.add_argument("--manifest", required=True)
    p.set_defaults(fn=_cmd_tokenize)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
