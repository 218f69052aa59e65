/**
 * End-to-end console criteria against the real station (Python subprocess,
 * renderer service + broker with WebSocket endpoint):
 *  - drag -> renderer status echo repositions the glyph,
 *  - publish rate stays <= 30/s during a 5 s drag,
 *  - a broker restart recovers the session within 5 s.
 */

import { ChildProcess, spawn } from "node:child_process";
import { createServer } from "node:net";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import WebSocket from "ws";

import { OperatorConsole } from "../src/console.js";
import { WsLike } from "../src/mqtt/client.js";

const PREFIX = "UTokyo/IREF";

const wsFactory = (url: string): WsLike =>
  new WebSocket(url, "mqtt") as unknown as WsLike;

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.listen(0, "127.0.0.1", () => {
      const addr = srv.address();
      if (addr === null || typeof addr === "string") {
        reject(new Error("no port"));
        return;
      }
      srv.close(() => resolve(addr.port));
    });
  });
}

function startStation(tcpPort: number, wsPort: number): Promise<ChildProcess> {
  const code = [
    "import sys, threading",
    "from sdm_station.station import Station, default_config_path, load_config",
    "cfg = load_config(default_config_path())",
    `cfg.broker_tcp_port = ${tcpPort}`,
    `cfg.broker_ws_port = ${wsPort}`,
    "cfg.services = ['render']",
    "st = Station(cfg, render_realtime=False).start()",
    "print('READY', flush=True)",
    "threading.Event().wait()",
  ].join("\n");
  const proc = spawn("python3", ["-c", code], { stdio: ["ignore", "pipe", "inherit"] });
  return new Promise((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error("station start timeout")), 15000);
    proc.stdout!.on("data", (chunk: Buffer) => {
      if (chunk.toString().includes("READY")) {
        clearTimeout(timer);
        resolve(proc);
      }
    });
    proc.on("exit", (codeNum) => {
      clearTimeout(timer);
      reject(new Error(`station exited early (${codeNum})`));
    });
  });
}

function stopProcess(proc: ChildProcess): Promise<void> {
  return new Promise((resolve) => {
    proc.once("exit", () => resolve());
    proc.kill("SIGKILL");
  });
}

function waitFor(
  cond: () => boolean,
  timeoutMs: number,
  what: string,
): Promise<void> {
  const t0 = Date.now();
  return new Promise((resolve, reject) => {
    const poll = setInterval(() => {
      if (cond()) {
        clearInterval(poll);
        resolve();
      } else if (Date.now() - t0 > timeoutMs) {
        clearInterval(poll);
        reject(new Error(`timeout waiting for ${what}`));
      }
    }, 20);
  });
}

describe("operator console against the live station", () => {
  let tcpPort: number;
  let wsPort: number;
  let station: ChildProcess;
  let console_: OperatorConsole;

  beforeAll(async () => {
    tcpPort = await freePort();
    wsPort = await freePort();
    station = await startStation(tcpPort, wsPort);
    console_ = new OperatorConsole({
      url: `ws://127.0.0.1:${wsPort}`,
      prefix: PREFIX,
      clientId: "vitest-console",
      wsFactory,
      backoffMs: 200,
    });
    console_.start();
    await waitFor(() => console_.client.state === "connected", 5000, "connect");
  }, 30000);

  afterAll(async () => {
    console_.stop();
    await stopProcess(station);
  });

  it("drag closes the loop: status echo repositions the glyph", async () => {
    console_.command("tone", "play");
    await waitFor(
      () => console_.store.sounds.get("tone")?.playing === true,
      3000,
      "play echo",
    );

    console_.beginDrag("tone");
    console_.dragTo("tone", { x: 1.0, y: 1.0, z: 1.0 });
    console_.endDrag("tone", { x: 3.2, y: 0.9, z: 2.1 });
    await waitFor(() => {
      const p = console_.store.displayPosition("tone");
      return (
        p !== null &&
        Math.abs(p.x - 3.2) < 1e-6 &&
        Math.abs(p.y - 0.9) < 1e-6 &&
        Math.abs(p.z - 2.1) < 1e-6
      );
    }, 3000, "drop echo");
    const glyph = console_.store.sounds.get("tone")!;
    expect(glyph.gains.length).toBeGreaterThan(0);
    const energy = glyph.gains.reduce((s, g) => s + g * g, 0);
    expect(Math.abs(energy - 1)).toBeLessThan(1e-6);
  }, 15000);

  it("a 5 s drag at pointer rate publishes at most 30/s", async () => {
    const before = console_.drag.sentCount;
    console_.beginDrag("tone");
    const t0 = Date.now();
    // ~60 Hz pointer events for 5 s
    await new Promise<void>((resolve) => {
      const tick = setInterval(() => {
        const t = (Date.now() - t0) / 1000;
        if (t >= 5) {
          clearInterval(tick);
          resolve();
          return;
        }
        console_.dragTo("tone", {
          x: 2 + 1.5 * Math.cos(t),
          y: 2 + 1.5 * Math.sin(t),
          z: 1.5,
        });
      }, 16);
    });
    const elapsedS = (Date.now() - t0) / 1000;
    console_.endDrag("tone", { x: 2, y: 2, z: 1.5 });
    const published = console_.drag.sentCount - before;
    expect(published).toBeLessThanOrEqual(Math.ceil(30 * elapsedS) + 1);
    expect(published).toBeGreaterThan(30); // actually streaming, not stuck
    await waitFor(() => {
      const p = console_.store.displayPosition("tone");
      return p !== null && Math.abs(p.x - 2) < 1e-6 && Math.abs(p.y - 2) < 1e-6;
    }, 3000, "final drop echo");
  }, 20000);

  it("recovers within 5 s of a broker restart", async () => {
    await stopProcess(station);
    await waitFor(() => console_.client.state !== "connected", 5000, "disconnect");
    station = await startStation(tcpPort, wsPort);

    const t0 = Date.now();
    await waitFor(() => console_.client.state === "connected", 5000, "reconnect");
    // subscriptions must be re-established: a command round-trips again
    let echoed = false;
    const off = console_.store.onChange(() => {
      if (console_.store.sounds.get("tone")?.playing === false) echoed = true;
    });
    const nudge = setInterval(() => console_.command("tone", "stop"), 200);
    try {
      await waitFor(() => echoed, 5000 - (Date.now() - t0), "post-restart echo");
    } finally {
      clearInterval(nudge);
      off();
    }
    expect(Date.now() - t0).toBeLessThan(5000);
  }, 40000);
});
