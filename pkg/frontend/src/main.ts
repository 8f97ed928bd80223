/** Console wiring: one rendering loop consuming the ordered server stream;
 * microphone capture runs on its own real-time path and only enqueues
 * outgoing chunks. */

import { MicCapture, synthUtterance } from "./capture.js";
import { applyMessage, createView, SessionView } from "./renderer.js";
import { Transport, WebSocketTransport } from "./transport.js";

const view: SessionView = createView();
let transport: Transport | null = null;
let mic: MicCapture | null = null;
let vuLevel = 0;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function render(): void {
  el("connection").textContent = view.connection;
  el("engine-state").textContent = view.engineState;
  el("badge-suppressed").textContent = String(view.badges.suppressed);
  el("badge-interrupted").textContent = String(view.badges.interrupted);
  el("badge-swaps").textContent = String(view.badges.swaps);
  el("role-generator").textContent = view.roles.generator;
  el("role-monitor").textContent = view.roles.monitor;
  el<HTMLProgressElement>("vu-meter").value = Math.min(1, vuLevel * 4);

  const transcript = el("transcript");
  transcript.replaceChildren(
    ...view.transcript.map((turn) => {
      const row = document.createElement("div");
      row.className = turn.interrupted
        ? "turn interrupted"
        : turn.completed
          ? "turn complete"
          : "turn streaming";
      row.textContent = `#${turn.turnId} ${turn.text}`;
      return row;
    }),
  );

  const errors = el("errors");
  errors.replaceChildren(
    ...view.errors.map((text) => {
      const row = document.createElement("div");
      row.className = "error";
      row.textContent = text;
      return row;
    }),
  );
  el("diagnostic").textContent = view.diagnostic ?? "";
}

function connect(): void {
  const url = el<HTMLInputElement>("gateway-url").value;
  transport = new WebSocketTransport(url, {
    onMessage: (msg) => {
      applyMessage(view, msg);
      render();
      if (view.diagnostic) transport?.close();
    },
    onClose: (reason) => {
      view.connection = "idle";
      if (reason !== "closed") view.errors.push(`disconnected: ${reason}`);
      render();
    },
  });
  transport.send({ kind: "Hello", config: {} });
  view.connection = "connected";
  render();
}

async function startMic(): Promise<void> {
  mic = new MicCapture((chunk) => transport?.send(chunk), {
    onLevel: (rms) => {
      vuLevel = rms;
      render();
    },
  });
  try {
    await mic.start();
    el("mic-banner").textContent = "";
  } catch {
    el("mic-banner").textContent =
      "microphone permission denied; text entry still works";
  }
}

function wire(): void {
  el("connect").onclick = connect;
  el("mic-start").onclick = () => void startMic();
  el("mic-mute").onclick = () => {
    if (!mic) return;
    mic.setMuted(!mic.muted);
    el("mic-mute").textContent = mic.muted ? "unmute" : "mute";
  };
  el("send-text").onclick = () => {
    const input = el<HTMLInputElement>("text-entry");
    if (input.value) transport?.send({ kind: "TextQuery", text: input.value });
    input.value = "";
  };
  // injection panel: exercise the server mock without acoustic setup
  el("inject-query").onclick = () =>
    synthUtterance(0.5, (chunk) => transport?.send(chunk));
  el("inject-noise").onclick = () =>
    synthUtterance(0.3, (chunk) => transport?.send(chunk));
  render();
}

if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", wire);
}
