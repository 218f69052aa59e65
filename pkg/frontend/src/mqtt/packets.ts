/**
 * Client-side MQTT v3.1.1 codec, QoS 0 subset.
 *
 * Encodes CONNECT / SUBSCRIBE / PUBLISH / PINGREQ / DISCONNECT and decodes
 * CONNACK / SUBACK / PUBLISH / PINGRESP from a byte stream that may split
 * packets arbitrarily.
 */

export enum PacketType {
  CONNECT = 1,
  CONNACK = 2,
  PUBLISH = 3,
  PUBACK = 4,
  SUBSCRIBE = 8,
  SUBACK = 9,
  UNSUBSCRIBE = 10,
  UNSUBACK = 11,
  PINGREQ = 12,
  PINGRESP = 13,
  DISCONNECT = 14,
}

export interface ConnackPacket {
  type: PacketType.CONNACK;
  returnCode: number;
  sessionPresent: boolean;
}

export interface SubackPacket {
  type: PacketType.SUBACK;
  packetId: number;
  grantedQos: number[];
}

export interface PublishPacket {
  type: PacketType.PUBLISH;
  topic: string;
  payload: Uint8Array;
}

export interface SimplePacket {
  type: PacketType.PINGRESP | PacketType.PUBACK | PacketType.UNSUBACK;
}

export type InboundPacket = ConnackPacket | SubackPacket | PublishPacket | SimplePacket;

export class ProtocolError extends Error {}

const textEncoder = new TextEncoder();
const textDecoder = new TextDecoder("utf-8", { fatal: true });

function mqttString(s: string): Uint8Array {
  const bytes = textEncoder.encode(s);
  if (bytes.length > 0xffff) throw new ProtocolError("string too long");
  const out = new Uint8Array(2 + bytes.length);
  out[0] = bytes.length >> 8;
  out[1] = bytes.length & 0xff;
  out.set(bytes, 2);
  return out;
}

function encodeVarint(n: number): Uint8Array {
  if (n < 0 || n > 268_435_455) throw new ProtocolError("length out of range");
  const out: number[] = [];
  do {
    let byte = n % 128;
    n = Math.floor(n / 128);
    if (n > 0) byte |= 0x80;
    out.push(byte);
  } while (n > 0);
  return Uint8Array.from(out);
}

function frame(firstByte: number, body: Uint8Array): Uint8Array {
  const len = encodeVarint(body.length);
  const out = new Uint8Array(1 + len.length + body.length);
  out[0] = firstByte;
  out.set(len, 1);
  out.set(body, 1 + len.length);
  return out;
}

function concat(parts: Uint8Array[]): Uint8Array {
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let pos = 0;
  for (const p of parts) {
    out.set(p, pos);
    pos += p.length;
  }
  return out;
}

export function encodeConnect(clientId: string, keepaliveS = 0): Uint8Array {
  const body = concat([
    mqttString("MQTT"),
    Uint8Array.from([4, 0x02, keepaliveS >> 8, keepaliveS & 0xff]),
    mqttString(clientId),
  ]);
  return frame(0x10, body);
}

export function encodeSubscribe(packetId: number, topicFilter: string): Uint8Array {
  const body = concat([
    Uint8Array.from([packetId >> 8, packetId & 0xff]),
    mqttString(topicFilter),
    Uint8Array.from([0]),
  ]);
  return frame(0x82, body);
}

export function encodePublish(topic: string, payload: Uint8Array): Uint8Array {
  if (topic.includes("+") || topic.includes("#")) {
    throw new ProtocolError("wildcards are not allowed in publish topics");
  }
  return frame(0x30, concat([mqttString(topic), payload]));
}

export function encodePingreq(): Uint8Array {
  return Uint8Array.from([0xc0, 0x00]);
}

export function encodeDisconnect(): Uint8Array {
  return Uint8Array.from([0xe0, 0x00]);
}

/** Incremental decoder: feed() arbitrary chunks, receive whole packets. */
export class PacketReader {
  private buf: Uint8Array<ArrayBufferLike> = new Uint8Array(0);

  feed(chunk: Uint8Array): InboundPacket[] {
    this.buf = this.buf.length === 0 ? chunk : concat([this.buf, chunk]);
    const out: InboundPacket[] = [];
    for (;;) {
      const r = this.tryDecode();
      if (r === null) return out;
      out.push(r.packet);
      this.buf = this.buf.subarray(r.consumed);
    }
  }

  private tryDecode(): { packet: InboundPacket; consumed: number } | null {
    const buf = this.buf;
    if (buf.length < 2) return null;
    let remaining = 0;
    let shift = 1;
    let pos = 1;
    for (;;) {
      if (pos >= buf.length) return null;
      if (pos > 4) throw new ProtocolError("length varint too long");
      const byte = buf[pos]!;
      remaining += (byte & 0x7f) * shift;
      shift *= 128;
      pos += 1;
      if ((byte & 0x80) === 0) break;
    }
    const total = pos + remaining;
    if (buf.length < total) return null;
    const body = buf.subarray(pos, total);
    const typeNum = buf[0]! >> 4;

    let packet: InboundPacket;
    switch (typeNum) {
      case PacketType.CONNACK: {
        if (body.length !== 2) throw new ProtocolError("bad CONNACK length");
        packet = {
          type: PacketType.CONNACK,
          sessionPresent: (body[0]! & 0x01) !== 0,
          returnCode: body[1]!,
        };
        break;
      }
      case PacketType.SUBACK: {
        if (body.length < 3) throw new ProtocolError("bad SUBACK length");
        packet = {
          type: PacketType.SUBACK,
          packetId: (body[0]! << 8) | body[1]!,
          grantedQos: Array.from(body.subarray(2)),
        };
        break;
      }
      case PacketType.PUBLISH: {
        if ((buf[0]! & 0x06) !== 0) throw new ProtocolError("QoS > 0 not supported");
        if (body.length < 2) throw new ProtocolError("bad PUBLISH length");
        const tlen = (body[0]! << 8) | body[1]!;
        if (2 + tlen > body.length) throw new ProtocolError("truncated topic");
        packet = {
          type: PacketType.PUBLISH,
          topic: textDecoder.decode(body.subarray(2, 2 + tlen)),
          payload: body.slice(2 + tlen),
        };
        break;
      }
      case PacketType.PINGRESP:
      case PacketType.PUBACK:
      case PacketType.UNSUBACK:
        packet = { type: typeNum };
        break;
      default:
        throw new ProtocolError(`unexpected packet type ${typeNum}`);
    }
    return { packet, consumed: total };
  }
}
