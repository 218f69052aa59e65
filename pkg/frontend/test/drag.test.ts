import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { DragPublisher, SetCommand } from "../src/drag.js";

describe("DragPublisher", () => {
  let sent: Array<{ id: string; cmd: SetCommand; t: number }>;
  let pub: DragPublisher;

  beforeEach(() => {
    vi.useFakeTimers();
    sent = [];
    pub = new DragPublisher(
      (id, cmd) => sent.push({ id, cmd, t: Date.now() }),
      30,
      () => Date.now(),
    );
  });

  afterEach(() => {
    vi.useRealTimers();
  });

  it("sends the first move immediately", () => {
    pub.move("tone", { x: 1, y: 1, z: 1 });
    expect(sent).toHaveLength(1);
    expect(sent[0]!.cmd).toEqual({ cmd: "set", x: 1, y: 1, z: 1 });
  });

  it("coalesces a 60 Hz move stream to at most 30/s", () => {
    // 5 s of pointer moves every 16.7 ms
    for (let i = 0; i < 300; i++) {
      pub.move("tone", { x: i / 100, y: 0, z: 1 });
      vi.advanceTimersByTime(16.7);
    }
    vi.advanceTimersByTime(100);
    expect(sent.length).toBeLessThanOrEqual(150);
    expect(sent.length).toBeGreaterThanOrEqual(140); // throttled, not starved
    for (let i = 1; i < sent.length; i++) {
      expect(sent[i]!.t - sent[i - 1]!.t).toBeGreaterThanOrEqual(34);
    }
  });

  it("delivers the latest pending position, not the oldest", () => {
    pub.move("tone", { x: 0, y: 0, z: 1 });
    pub.move("tone", { x: 1, y: 0, z: 1 });
    pub.move("tone", { x: 2, y: 0, z: 1 });
    vi.advanceTimersByTime(40);
    expect(sent).toHaveLength(2);
    expect(sent[1]!.cmd.x).toBe(2);
  });

  it("release flushes the drop position while keeping the rate bound", () => {
    pub.move("tone", { x: 0, y: 0, z: 1 });
    pub.release("tone", { x: 5, y: 5, z: 2 });
    expect(sent).toHaveLength(1); // inside the interval: deferred
    vi.advanceTimersByTime(40);
    expect(sent).toHaveLength(2);
    expect(sent[1]!.cmd).toEqual({ cmd: "set", x: 5, y: 5, z: 2 });
    expect(sent[1]!.t - sent[0]!.t).toBeGreaterThanOrEqual(33);
  });

  it("release after a quiet period sends at once", () => {
    pub.move("tone", { x: 0, y: 0, z: 1 });
    vi.advanceTimersByTime(200);
    pub.release("tone", { x: 1, y: 1, z: 1 });
    expect(sent).toHaveLength(2);
  });

  it("counts every publish", () => {
    for (let i = 0; i < 10; i++) {
      pub.move("tone", { x: i, y: 0, z: 1 });
      vi.advanceTimersByTime(50);
    }
    expect(pub.sentCount).toBe(sent.length);
  });
});
