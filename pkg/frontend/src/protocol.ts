/** Wire protocol types for the gateway: one JSON object per line/frame. */

export type EngineState =
  | "listening"
  | "classifying"
  | "generating"
  | "suppressed"
  | "interrupted"
  | "swap";

export interface StateEvent {
  kind: "StateEvent";
  state: EngineState;
}

export interface AnswerToken {
  kind: "AnswerToken";
  text: string;
  turn_id: number;
}

export interface AnswerDone {
  kind: "AnswerDone";
  turn_id: number;
}

export interface ErrorMessage {
  kind: "Error";
  code: string;
  message: string;
}

export type ServerMessage = StateEvent | AnswerToken | AnswerDone | ErrorMessage;

export interface Hello {
  kind: "Hello";
  config: Record<string, unknown>;
}

export interface AudioChunk {
  kind: "AudioChunk";
  /** base64, 16 kHz mono 16-bit little-endian PCM */
  pcm: string;
  sample_rate: number;
}

export interface TextQuery {
  kind: "TextQuery";
  text: string;
}

export interface Bye {
  kind: "Bye";
}

export type ClientMessage = Hello | AudioChunk | TextQuery | Bye;

const SERVER_KINDS = new Set(["StateEvent", "AnswerToken", "AnswerDone", "Error"]);

export function parseServerMessage(line: string): ServerMessage {
  let raw: unknown;
  try {
    raw = JSON.parse(line);
  } catch {
    throw new Error(`unparseable frame: ${line.slice(0, 120)}`);
  }
  const msg = raw as { kind?: string };
  if (!msg || typeof msg.kind !== "string" || !SERVER_KINDS.has(msg.kind)) {
    throw new Error(`unknown server message kind: ${String(msg?.kind)}`);
  }
  return raw as ServerMessage;
}
