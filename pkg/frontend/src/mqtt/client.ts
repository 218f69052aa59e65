/**
 * MQTT-over-WebSocket client (QoS 0) with auto-reconnect.
 *
 * The transport is the standard browser WebSocket; tests inject a factory
 * backed by the `ws` package.  Subscriptions are re-established after a
 * reconnect; publishes while disconnected are dropped (QoS 0 contract).
 */

import {
  InboundPacket,
  PacketReader,
  PacketType,
  encodeConnect,
  encodeDisconnect,
  encodePublish,
  encodeSubscribe,
} from "./packets.js";

/** Minimal WebSocket surface used by the client (browser and `ws` both fit). */
export interface WsLike {
  binaryType: string;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: ArrayBuffer | Uint8Array }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  send(data: Uint8Array): void;
  close(): void;
}

export type WsFactory = (url: string) => WsLike;

export type ConnectionState = "connecting" | "connected" | "closed";

export interface MqttClientOptions {
  url: string;
  clientId: string;
  wsFactory?: WsFactory;
  /** initial reconnect delay; doubles per attempt up to maxBackoffMs */
  backoffMs?: number;
  maxBackoffMs?: number;
  onMessage?: (topic: string, payload: Uint8Array) => void;
  onStateChange?: (state: ConnectionState) => void;
}

const defaultFactory: WsFactory = (url) =>
  new WebSocket(url, "mqtt") as unknown as WsLike;

export class MqttWsClient {
  private readonly opts: Required<Pick<MqttClientOptions, "backoffMs" | "maxBackoffMs">> &
    MqttClientOptions;
  private ws: WsLike | null = null;
  private reader = new PacketReader();
  private subscriptions = new Set<string>();
  private closing = false;
  private backoff: number;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  private connackSeen = false;

  state: ConnectionState = "closed";

  constructor(options: MqttClientOptions) {
    this.opts = { backoffMs: 200, maxBackoffMs: 5000, ...options };
    this.backoff = this.opts.backoffMs;
  }

  start(): void {
    this.closing = false;
    this.open();
  }

  close(): void {
    this.closing = true;
    if (this.reconnectTimer !== null) clearTimeout(this.reconnectTimer);
    if (this.ws !== null && this.state === "connected") {
      try {
        this.ws.send(encodeDisconnect());
      } catch {
        // socket already gone; QoS 0, nothing to flush
      }
    }
    this.ws?.close();
    this.setState("closed");
  }

  subscribe(topicFilter: string): void {
    this.subscriptions.add(topicFilter);
    if (this.state === "connected") {
      this.ws!.send(encodeSubscribe(1, topicFilter));
    }
  }

  /** QoS 0 fire-and-forget; returns false when dropped while disconnected. */
  publish(topic: string, payload: Uint8Array | string): boolean {
    if (this.state !== "connected") return false;
    const bytes =
      typeof payload === "string" ? new TextEncoder().encode(payload) : payload;
    try {
      this.ws!.send(encodePublish(topic, bytes));
      return true;
    } catch {
      return false;
    }
  }

  publishJson(topic: string, value: unknown): boolean {
    return this.publish(topic, JSON.stringify(value));
  }

  private setState(s: ConnectionState): void {
    if (s === this.state) return;
    this.state = s;
    this.opts.onStateChange?.(s);
  }

  private open(): void {
    this.setState("connecting");
    this.reader = new PacketReader();
    this.connackSeen = false;
    let ws: WsLike;
    try {
      ws = (this.opts.wsFactory ?? defaultFactory)(this.opts.url);
    } catch {
      this.scheduleReconnect();
      return;
    }
    this.ws = ws;
    ws.binaryType = "arraybuffer";
    ws.onopen = () => ws.send(encodeConnect(this.opts.clientId));
    ws.onmessage = (ev) => {
      const bytes =
        ev.data instanceof Uint8Array ? ev.data : new Uint8Array(ev.data);
      let packets: InboundPacket[];
      try {
        packets = this.reader.feed(bytes);
      } catch {
        ws.close();
        return;
      }
      for (const pkt of packets) this.handle(pkt);
    };
    ws.onerror = () => {
      // onclose follows; reconnect is handled there
    };
    ws.onclose = () => {
      if (this.ws !== ws) return;
      this.ws = null;
      if (this.closing) {
        this.setState("closed");
      } else {
        this.scheduleReconnect();
      }
    };
  }

  private handle(pkt: InboundPacket): void {
    switch (pkt.type) {
      case PacketType.CONNACK:
        if (pkt.returnCode !== 0) {
          this.ws?.close();
          return;
        }
        this.connackSeen = true;
        this.backoff = this.opts.backoffMs;
        this.setState("connected");
        for (const f of this.subscriptions) {
          this.ws!.send(encodeSubscribe(1, f));
        }
        break;
      case PacketType.PUBLISH:
        if (this.connackSeen) {
          this.opts.onMessage?.(pkt.topic, pkt.payload);
        }
        break;
      default:
        break; // SUBACK / PINGRESP need no action at QoS 0
    }
  }

  private scheduleReconnect(): void {
    this.setState("connecting");
    const delay = this.backoff;
    this.backoff = Math.min(this.backoff * 2, this.opts.maxBackoffMs);
    this.reconnectTimer = setTimeout(() => {
      if (!this.closing) this.open();
    }, delay);
  }
}
