/** Transport abstraction over the gateway's newline-delimited JSON stream.
 *
 * Browsers cannot open raw TCP sockets, so the live implementation rides a
 * WebSocket that relays frames verbatim (one JSON object per WebSocket
 * message, equivalent to one line on the TCP side). The message vocabulary
 * is exactly the gateway protocol; nothing console-specific is added.
 */

import type { ClientMessage, ServerMessage } from "./protocol.js";
import { parseServerMessage } from "./protocol.js";

export interface Transport {
  send(msg: ClientMessage): void;
  close(): void;
}

export interface TransportEvents {
  onMessage: (msg: ServerMessage) => void;
  onClose: (reason: string) => void;
}

export class WebSocketTransport implements Transport {
  private readonly socket: WebSocket;
  private buffered: ClientMessage[] = [];

  constructor(url: string, events: TransportEvents) {
    this.socket = new WebSocket(url);
    this.socket.onopen = () => {
      for (const msg of this.buffered) this.socket.send(JSON.stringify(msg));
      this.buffered = [];
    };
    this.socket.onmessage = (event) => {
      for (const line of String(event.data).split("\n")) {
        if (!line.trim()) continue;
        events.onMessage(parseServerMessage(line));
      }
    };
    this.socket.onclose = (event) => events.onClose(event.reason || "closed");
    this.socket.onerror = () => events.onClose("socket error");
  }

  send(msg: ClientMessage): void {
    if (this.socket.readyState === WebSocket.OPEN) {
      this.socket.send(JSON.stringify(msg));
    } else if (this.socket.readyState === WebSocket.CONNECTING) {
      this.buffered.push(msg);
    }
  }

  close(): void {
    this.send({ kind: "Bye" });
    this.socket.close();
  }
}
