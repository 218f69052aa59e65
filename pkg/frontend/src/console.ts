/**
 * Operator console controller: one MQTT connection, a scene store, and a
 * rate-limited drag publisher, independent of any DOM.
 */

import { DragPublisher } from "./drag.js";
import { MqttWsClient, WsFactory, ConnectionState } from "./mqtt/client.js";
import { SceneStore, Vec3 } from "./scene.js";

export interface ConsoleOptions {
  url: string;
  prefix: string;
  clientId?: string;
  wsFactory?: WsFactory;
  maxDragPerSecond?: number;
  backoffMs?: number;
  now?: () => number;
  onStateChange?: (state: ConnectionState) => void;
}

export class OperatorConsole {
  readonly store: SceneStore;
  readonly client: MqttWsClient;
  readonly drag: DragPublisher;
  private readonly prefix: string;

  constructor(opts: ConsoleOptions) {
    this.prefix = opts.prefix;
    this.store = new SceneStore(opts.prefix);
    this.client = new MqttWsClient({
      url: opts.url,
      clientId: opts.clientId ?? `console-${Math.random().toString(36).slice(2, 10)}`,
      wsFactory: opts.wsFactory,
      backoffMs: opts.backoffMs,
      onMessage: (topic, payload) => this.store.apply(topic, payload),
      onStateChange: opts.onStateChange,
    });
    this.drag = new DragPublisher(
      (soundId, cmd) =>
        this.client.publishJson(`${this.prefix}/sound/${soundId}/control`, cmd),
      opts.maxDragPerSecond ?? 30,
      opts.now,
    );
  }

  start(): void {
    this.client.subscribe(`${this.prefix}/sound/+/status`);
    this.client.subscribe(`${this.prefix}/location/+`);
    this.client.start();
  }

  stop(): void {
    this.client.close();
  }

  command(soundId: string, cmd: "play" | "stop"): void {
    this.client.publishJson(`${this.prefix}/sound/${soundId}/control`, { cmd });
  }

  setVolume(soundId: string, volume: number): void {
    this.client.publishJson(`${this.prefix}/sound/${soundId}/control`, {
      cmd: "set",
      volume,
    });
  }

  beginDrag(soundId: string): void {
    this.store.beginDrag(soundId);
  }

  dragTo(soundId: string, pos: Vec3): void {
    this.store.dragTo(soundId, pos);
    this.drag.move(soundId, pos);
  }

  endDrag(soundId: string, pos: Vec3): void {
    this.drag.release(soundId, pos);
    this.store.endDrag(soundId);
  }
}

/** Config from the page URL: ?ws=ws://host:port&prefix=... */
export function configFromQuery(search: string): { url: string; prefix: string } {
  const q = new URLSearchParams(search);
  return {
    url: q.get("ws") ?? "ws://127.0.0.1:8083",
    prefix: q.get("prefix") ?? "UTokyo/IREF",
  };
}
