/**
 * 2D room plan on a canvas: sound glyphs (draggable) and tag markers,
 * with a height slider for the dragged sound's z coordinate.
 */

import { OperatorConsole } from "./console.js";
import { Vec3 } from "./scene.js";

export interface RoomBounds {
  width: number; // meters, x
  depth: number; // meters, y
  height: number; // meters, z
}

const GLYPH_RADIUS_PX = 14;

export class PlanView {
  private dragId: string | null = null;
  private dragZ = 1.5;

  constructor(
    private readonly canvas: HTMLCanvasElement,
    private readonly zSlider: HTMLInputElement,
    private readonly statusLine: HTMLElement,
    private readonly console_: OperatorConsole,
    private readonly room: RoomBounds = { width: 4, depth: 4, height: 3 },
  ) {
    canvas.addEventListener("pointerdown", (e) => this.onDown(e));
    canvas.addEventListener("pointermove", (e) => this.onMove(e));
    canvas.addEventListener("pointerup", (e) => this.onUp(e));
    zSlider.addEventListener("input", () => {
      this.dragZ = Number(zSlider.value);
    });
    console_.store.onChange(() => this.draw());
    this.draw();
  }

  setConnectionState(state: string): void {
    this.statusLine.textContent = `broker: ${state}`;
    this.statusLine.className = state;
  }

  private toPx(p: Vec3): { x: number; y: number } {
    return {
      x: (p.x / this.room.width) * this.canvas.width,
      y: (1 - p.y / this.room.depth) * this.canvas.height,
    };
  }

  private toRoom(e: PointerEvent): Vec3 {
    const rect = this.canvas.getBoundingClientRect();
    const fx = (e.clientX - rect.left) / rect.width;
    const fy = (e.clientY - rect.top) / rect.height;
    return {
      x: Math.min(Math.max(fx, 0), 1) * this.room.width,
      y: (1 - Math.min(Math.max(fy, 0), 1)) * this.room.depth,
      z: this.dragZ,
    };
  }

  private hit(e: PointerEvent): string | null {
    const rect = this.canvas.getBoundingClientRect();
    const px = ((e.clientX - rect.left) / rect.width) * this.canvas.width;
    const py = ((e.clientY - rect.top) / rect.height) * this.canvas.height;
    for (const id of this.console_.store.sounds.keys()) {
      const pos = this.console_.store.displayPosition(id);
      if (pos === null) continue;
      const q = this.toPx(pos);
      if ((q.x - px) ** 2 + (q.y - py) ** 2 <= GLYPH_RADIUS_PX ** 2) return id;
    }
    return null;
  }

  private onDown(e: PointerEvent): void {
    const id = this.hit(e);
    if (id === null) return;
    this.dragId = id;
    const pos = this.console_.store.displayPosition(id);
    if (pos !== null) {
      this.dragZ = pos.z;
      this.zSlider.value = String(pos.z);
    }
    this.canvas.setPointerCapture(e.pointerId);
    this.console_.beginDrag(id);
  }

  private onMove(e: PointerEvent): void {
    if (this.dragId === null) return;
    this.console_.dragTo(this.dragId, this.toRoom(e));
  }

  private onUp(e: PointerEvent): void {
    if (this.dragId === null) return;
    this.console_.endDrag(this.dragId, this.toRoom(e));
    this.dragId = null;
  }

  draw(): void {
    const ctx = this.canvas.getContext("2d");
    if (ctx === null) return;
    const { width, height } = this.canvas;
    ctx.clearRect(0, 0, width, height);
    ctx.strokeStyle = "#888";
    ctx.strokeRect(0.5, 0.5, width - 1, height - 1);

    for (const tag of this.console_.store.tags.values()) {
      const q = this.toPx(tag.position);
      ctx.fillStyle = "#2a7";
      ctx.beginPath();
      ctx.moveTo(q.x, q.y - 8);
      ctx.lineTo(q.x + 7, q.y + 6);
      ctx.lineTo(q.x - 7, q.y + 6);
      ctx.closePath();
      ctx.fill();
      ctx.fillStyle = "#333";
      ctx.font = "11px sans-serif";
      ctx.fillText(tag.id, q.x + 9, q.y + 4);
    }

    for (const glyph of this.console_.store.sounds.values()) {
      const pos = this.console_.store.displayPosition(glyph.id);
      if (pos === null) continue;
      const q = this.toPx(pos);
      ctx.fillStyle = glyph.playing ? "#d64" : "#aab";
      ctx.beginPath();
      ctx.arc(q.x, q.y, GLYPH_RADIUS_PX, 0, 2 * Math.PI);
      ctx.fill();
      if (glyph.dragging) {
        ctx.strokeStyle = "#d64";
        ctx.setLineDash([3, 3]);
        ctx.beginPath();
        ctx.arc(q.x, q.y, GLYPH_RADIUS_PX + 4, 0, 2 * Math.PI);
        ctx.stroke();
        ctx.setLineDash([]);
      }
      ctx.fillStyle = "#fff";
      ctx.font = "10px sans-serif";
      ctx.textAlign = "center";
      ctx.fillText(glyph.id, q.x, q.y + 3);
      ctx.textAlign = "left";
      ctx.fillStyle = "#333";
      ctx.font = "11px sans-serif";
      ctx.fillText(`z=${pos.z.toFixed(1)}`, q.x + GLYPH_RADIUS_PX + 3, q.y + 4);
    }
  }
}
