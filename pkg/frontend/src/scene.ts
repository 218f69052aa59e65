/**
 * Scene store: the console's model of sounds and tags, fed by status and
 * location messages and by local drag gestures.
 *
 * While a sound is being dragged its optimistic position is shown; after
 * release the next status echo from the renderer wins, so the display
 * always converges to server state.
 */

export interface Vec3 {
  x: number;
  y: number;
  z: number;
}

export interface SoundGlyph {
  id: string;
  playing: boolean;
  volume: number;
  pitch: number;
  position: Vec3;
  gains: number[];
  /** set while the user drags; cleared by release + first echo */
  optimistic: Vec3 | null;
  dragging: boolean;
  lastEchoUs: number;
}

export interface TagMarker {
  id: string;
  position: Vec3;
  lastSeenUs: number;
  event?: string;
}

function num(v: unknown): number | null {
  return typeof v === "number" && Number.isFinite(v) ? v : null;
}

export function topicParts(prefix: string, topic: string):
  | { kind: "status"; soundId: string }
  | { kind: "location"; tagId: string }
  | null {
  if (!topic.startsWith(prefix + "/")) return null;
  const rest = topic.slice(prefix.length + 1).split("/");
  if (rest.length === 3 && rest[0] === "sound" && rest[2] === "status") {
    return { kind: "status", soundId: rest[1]! };
  }
  if (rest.length === 2 && rest[0] === "location") {
    return { kind: "location", tagId: rest[1]! };
  }
  return null;
}

export class SceneStore {
  readonly sounds = new Map<string, SoundGlyph>();
  readonly tags = new Map<string, TagMarker>();
  private listeners = new Set<() => void>();

  constructor(readonly prefix: string) {}

  onChange(fn: () => void): () => void {
    this.listeners.add(fn);
    return () => this.listeners.delete(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn();
  }

  /** Apply one broker message; returns true when it changed the scene. */
  apply(topic: string, payload: Uint8Array): boolean {
    const parts = topicParts(this.prefix, topic);
    if (parts === null) return false;
    let d: Record<string, unknown>;
    try {
      d = JSON.parse(new TextDecoder().decode(payload));
    } catch {
      return false;
    }
    if (parts.kind === "status") return this.applyStatus(parts.soundId, d);
    return this.applyLocation(parts.tagId, d);
  }

  private applyStatus(soundId: string, d: Record<string, unknown>): boolean {
    const x = num(d.x);
    const y = num(d.y);
    const z = num(d.z);
    const ts = num(d.ts_us);
    if (x === null || y === null || z === null || typeof d.playing !== "boolean") {
      return false;
    }
    const prev = this.sounds.get(soundId);
    const glyph: SoundGlyph = {
      id: soundId,
      playing: d.playing,
      volume: num(d.volume) ?? prev?.volume ?? 1,
      pitch: num(d.pitch) ?? prev?.pitch ?? 1,
      position: { x, y, z },
      gains: Array.isArray(d.gains) ? d.gains.filter((g) => num(g) !== null) : [],
      optimistic: prev?.dragging ? prev.optimistic : null,
      dragging: prev?.dragging ?? false,
      lastEchoUs: ts ?? prev?.lastEchoUs ?? 0,
    };
    this.sounds.set(soundId, glyph);
    this.emit();
    return true;
  }

  private applyLocation(tagId: string, d: Record<string, unknown>): boolean {
    const x = num(d.x);
    const y = num(d.y);
    const z = num(d.z);
    if (x === null || y === null || z === null) return false;
    this.tags.set(tagId, {
      id: tagId,
      position: { x, y, z },
      lastSeenUs: num(d.ts_us) ?? 0,
      event: typeof d.event === "string" ? d.event : undefined,
    });
    this.emit();
    return true;
  }

  /** Position to draw: optimistic while dragging, server echo otherwise. */
  displayPosition(soundId: string): Vec3 | null {
    const g = this.sounds.get(soundId);
    if (g === undefined) return null;
    return g.dragging && g.optimistic !== null ? g.optimistic : g.position;
  }

  beginDrag(soundId: string): void {
    const g = this.sounds.get(soundId);
    if (g === undefined) return;
    g.dragging = true;
    g.optimistic = { ...g.position };
    this.emit();
  }

  dragTo(soundId: string, pos: Vec3): void {
    const g = this.sounds.get(soundId);
    if (g === undefined || !g.dragging) return;
    g.optimistic = { ...pos };
    this.emit();
  }

  endDrag(soundId: string): void {
    const g = this.sounds.get(soundId);
    if (g === undefined) return;
    g.dragging = false;
    g.optimistic = null;
    this.emit();
  }
}
