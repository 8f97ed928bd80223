/** Continuous open-microphone capture: no wake word, no push-to-talk.
 *
 * Audio is downmixed to mono 16-bit PCM at 16 kHz and emitted as fixed
 * interval chunks (default 100 ms). The console never gates audio; all
 * gating and classification is the server's job. A mute toggle exists for
 * the operator and simply stops emitting chunks.
 */

import type { AudioChunk } from "./protocol.js";

export const CAPTURE_SAMPLE_RATE = 16_000;
export const DEFAULT_CHUNK_MS = 100;

export type ChunkSink = (chunk: AudioChunk) => void;
export type LevelSink = (rms: number) => void;

export function floatToPcm16(samples: Float32Array): Int16Array {
  const out = new Int16Array(samples.length);
  for (let i = 0; i < samples.length; i++) {
    const s = Math.max(-1, Math.min(1, samples[i]));
    out[i] = Math.round(s * 32767);
  }
  return out;
}

export function pcm16ToBase64(pcm: Int16Array): string {
  const bytes = new Uint8Array(pcm.buffer, pcm.byteOffset, pcm.byteLength);
  let binary = "";
  for (let i = 0; i < bytes.length; i++) binary += String.fromCharCode(bytes[i]);
  return btoa(binary);
}

export function rmsLevel(samples: Float32Array): number {
  if (samples.length === 0) return 0;
  let acc = 0;
  for (let i = 0; i < samples.length; i++) acc += samples[i] * samples[i];
  return Math.sqrt(acc / samples.length);
}

/** Accumulates arbitrary-sized capture callbacks into fixed-size chunks. */
export class ChunkAssembler {
  private buffer: Float32Array;
  private filled = 0;

  constructor(
    private readonly sink: ChunkSink,
    chunkMs: number = DEFAULT_CHUNK_MS,
    private readonly sampleRate: number = CAPTURE_SAMPLE_RATE,
  ) {
    this.buffer = new Float32Array(Math.round((sampleRate * chunkMs) / 1000));
  }

  push(samples: Float32Array): void {
    let offset = 0;
    while (offset < samples.length) {
      const room = this.buffer.length - this.filled;
      const take = Math.min(room, samples.length - offset);
      this.buffer.set(samples.subarray(offset, offset + take), this.filled);
      this.filled += take;
      offset += take;
      if (this.filled === this.buffer.length) {
        this.sink({
          kind: "AudioChunk",
          pcm: pcm16ToBase64(floatToPcm16(this.buffer)),
          sample_rate: this.sampleRate,
        });
        this.filled = 0;
      }
    }
  }
}

export interface MicCaptureOptions {
  chunkMs?: number;
  onLevel?: LevelSink;
}

export class MicCapture {
  private context: AudioContext | null = null;
  private stream: MediaStream | null = null;
  private processor: ScriptProcessorNode | null = null;
  private assembler: ChunkAssembler;
  private _muted = false;

  constructor(sink: ChunkSink, private readonly options: MicCaptureOptions = {}) {
    this.assembler = new ChunkAssembler(sink, options.chunkMs ?? DEFAULT_CHUNK_MS);
  }

  get muted(): boolean {
    return this._muted;
  }

  setMuted(muted: boolean): void {
    this._muted = muted;
  }

  get running(): boolean {
    return this.context !== null;
  }

  /** Throws DOMException "NotAllowedError" if permission is denied; the
   * caller shows a banner and leaves text entry usable. */
  async start(): Promise<void> {
    if (this.context) return;
    this.stream = await navigator.mediaDevices.getUserMedia({
      audio: {
        channelCount: 1,
        sampleRate: CAPTURE_SAMPLE_RATE,
        echoCancellation: true,
        noiseSuppression: false,
      },
    });
    this.context = new AudioContext({ sampleRate: CAPTURE_SAMPLE_RATE });
    const source = this.context.createMediaStreamSource(this.stream);
    this.processor = this.context.createScriptProcessor(2048, 1, 1);
    this.processor.onaudioprocess = (event) => {
      const mono = event.inputBuffer.getChannelData(0);
      this.options.onLevel?.(rmsLevel(mono));
      if (!this._muted) this.assembler.push(mono);
    };
    source.connect(this.processor);
    this.processor.connect(this.context.destination);
  }

  async stop(): Promise<void> {
    this.processor?.disconnect();
    this.processor = null;
    this.stream?.getTracks().forEach((t) => t.stop());
    this.stream = null;
    if (this.context) {
      await this.context.close();
      this.context = null;
    }
  }
}

/** Injection panel helpers: synthetic utterances for exercising the server
 * mock without acoustic setup. A loud tone reads as speech to the server's
 * gate; trailing silence closes the segment. */
export function synthUtterance(durationS: number, sink: ChunkSink): void {
  const toneSamples = Math.round(durationS * CAPTURE_SAMPLE_RATE);
  const tailSamples = CAPTURE_SAMPLE_RATE / 2;
  const samples = new Float32Array(toneSamples + tailSamples);
  for (let i = 0; i < toneSamples; i++) {
    samples[i] = 0.8 * Math.sin((2 * Math.PI * 440 * i) / CAPTURE_SAMPLE_RATE);
  }
  const assembler = new ChunkAssembler(sink);
  assembler.push(samples);
}
