/**
 * Drag publisher: turns a stream of pointer positions into rate-limited
 * set-position commands, at most `maxPerSecond` publishes per second.
 *
 * Leading edge sends immediately; intermediate moves coalesce into one
 * trailing publish per interval, and release always flushes the final
 * position so the renderer ends exactly where the glyph was dropped.
 */

import { Vec3 } from "./scene.js";

export interface SetCommand {
  cmd: "set";
  x: number;
  y: number;
  z: number;
}

export type PublishFn = (soundId: string, command: SetCommand) => void;

export class DragPublisher {
  private readonly minIntervalMs: number;
  private lastSentMs = -Infinity;
  private pending: { soundId: string; pos: Vec3 } | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;
  sentCount = 0;

  constructor(
    private readonly publish: PublishFn,
    maxPerSecond = 30,
    private readonly now: () => number = () => performance.now(),
  ) {
    if (maxPerSecond <= 0) throw new Error("maxPerSecond must be positive");
    // ceil: timers have ms resolution, a fractional interval would let the
    // effective rate creep above the bound
    this.minIntervalMs = Math.ceil(1000 / maxPerSecond);
  }

  /** Called for every pointer move while dragging. */
  move(soundId: string, pos: Vec3): void {
    const t = this.now();
    if (t - this.lastSentMs >= this.minIntervalMs && this.timer === null) {
      this.send(soundId, pos, t);
      return;
    }
    this.pending = { soundId, pos };
    if (this.timer === null) {
      const wait = Math.max(0, this.lastSentMs + this.minIntervalMs - t);
      this.timer = setTimeout(() => {
        this.timer = null;
        if (this.pending !== null) {
          const p = this.pending;
          this.pending = null;
          this.send(p.soundId, p.pos, this.now());
        }
      }, wait);
    }
  }

  /** Called on pointer release: flush the final position, still rate-limited
   * so the last interval cannot carry two publishes. */
  release(soundId: string, pos: Vec3): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.pending = null;
    const t = this.now();
    const wait = this.lastSentMs + this.minIntervalMs - t;
    if (wait <= 0) {
      this.send(soundId, pos, t);
    } else {
      this.timer = setTimeout(() => {
        this.timer = null;
        this.send(soundId, pos, this.now());
      }, wait);
    }
  }

  private send(soundId: string, pos: Vec3, t: number): void {
    this.lastSentMs = t;
    this.sentCount += 1;
    this.publish(soundId, { cmd: "set", x: pos.x, y: pos.y, z: pos.z });
  }
}
