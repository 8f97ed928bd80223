/** Pure view reducer: the console derives everything it shows from the
 * ordered server message stream. There is no client-side interaction logic,
 * so replaying a recorded stream reproduces the exact final view. */

import type { ServerMessage } from "./protocol.js";

export const INTERRUPTED_MARKER = "[interrupted]";

export interface TranscriptTurn {
  turnId: number;
  text: string;
  completed: boolean;
  interrupted: boolean;
}

export interface Badges {
  suppressed: number;
  interrupted: number;
  swaps: number;
}

export interface SessionView {
  connection: "idle" | "connected" | "error";
  engineState: string;
  transcript: TranscriptTurn[];
  /** turnId of the turn currently receiving tokens, if any */
  openTurnId: number | null;
  badges: Badges;
  /** slot ids by role; the server announces exchanges via swap events */
  roles: { generator: string; monitor: string };
  errors: string[];
  diagnostic: string | null;
}

export function createView(): SessionView {
  return {
    connection: "idle",
    engineState: "listening",
    transcript: [],
    openTurnId: null,
    badges: { suppressed: 0, interrupted: 0, swaps: 0 },
    roles: { generator: "A", monitor: "B" },
    errors: [],
    diagnostic: null,
  };
}

function openTurn(view: SessionView): TranscriptTurn | undefined {
  if (view.openTurnId === null) return undefined;
  return view.transcript.find((t) => t.turnId === view.openTurnId);
}

function violate(view: SessionView, detail: string): SessionView {
  view.connection = "error";
  view.diagnostic = `protocol violation: ${detail}`;
  return view;
}

/** Fold one server message into the view. Returns the same (mutated) view;
 * callers that need immutability should clone first. */
export function applyMessage(view: SessionView, msg: ServerMessage): SessionView {
  if (view.connection === "error") return view;
  switch (msg.kind) {
    case "StateEvent": {
      view.connection = "connected";
      view.engineState = msg.state;
      if (msg.state === "suppressed") {
        view.badges.suppressed += 1;
      } else if (msg.state === "interrupted") {
        view.badges.interrupted += 1;
        const turn = openTurn(view);
        if (turn) {
          // freeze the partial the moment the event arrives
          turn.text = turn.text + " " + INTERRUPTED_MARKER;
          turn.completed = true;
          turn.interrupted = true;
        }
        view.openTurnId = null;
      } else if (msg.state === "swap") {
        view.badges.swaps += 1;
        const { generator, monitor } = view.roles;
        view.roles = { generator: monitor, monitor: generator };
      }
      return view;
    }
    case "AnswerToken": {
      if (view.openTurnId !== null && view.openTurnId !== msg.turn_id) {
        return violate(view, `token for turn ${msg.turn_id} while ${view.openTurnId} is open`);
      }
      let turn = view.transcript.find((t) => t.turnId === msg.turn_id);
      if (!turn) {
        turn = { turnId: msg.turn_id, text: "", completed: false, interrupted: false };
        view.transcript.push(turn);
      } else if (turn.completed) {
        return violate(view, `token for already-frozen turn ${msg.turn_id}`);
      }
      turn.text += msg.text;
      view.openTurnId = msg.turn_id;
      return view;
    }
    case "AnswerDone": {
      const turn = view.transcript.find((t) => t.turnId === msg.turn_id);
      if (!turn || turn.completed) {
        return violate(view, `done for unknown or closed turn ${msg.turn_id}`);
      }
      turn.completed = true;
      view.openTurnId = null;
      return view;
    }
    case "Error": {
      // non-fatal: surface it and keep rendering
      view.errors.push(`${msg.code}: ${msg.message}`);
      return view;
    }
  }
}

export function replay(messages: ServerMessage[]): SessionView {
  const view = createView();
  for (const msg of messages) applyMessage(view, msg);
  return view;
}
