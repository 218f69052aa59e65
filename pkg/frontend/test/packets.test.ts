import { describe, expect, it } from "vitest";

import {
  PacketReader,
  PacketType,
  ProtocolError,
  encodeConnect,
  encodePingreq,
  encodePublish,
  encodeSubscribe,
} from "../src/mqtt/packets.js";

const hex = (b: Uint8Array) =>
  Array.from(b).map((x) => x.toString(16).padStart(2, "0")).join(" ");

describe("encoding", () => {
  it("publish frame matches the wire format byte for byte", () => {
    // QoS 0 publish carries no packet id: topic "a/b", payload "hi"
    const frame = encodePublish("a/b", new TextEncoder().encode("hi"));
    expect(hex(frame)).toBe("30 07 00 03 61 2f 62 68 69");
  });

  it("pingreq is the 2-byte constant", () => {
    expect(hex(encodePingreq())).toBe("c0 00");
  });

  it("connect carries protocol name, level 4, clean session", () => {
    const frame = encodeConnect("c1");
    expect(hex(frame.subarray(0, 12))).toBe(
      "10 0e 00 04 4d 51 54 54 04 02 00 00",
    );
    expect(hex(frame.subarray(12))).toBe("00 02 63 31");
  });

  it("subscribe carries packet id, filter, requested qos 0", () => {
    const frame = encodeSubscribe(1, "a/+");
    expect(hex(frame)).toBe("82 08 00 01 00 03 61 2f 2b 00");
  });

  it("rejects wildcards in publish topics", () => {
    expect(() => encodePublish("a/+", new Uint8Array(0))).toThrow(ProtocolError);
    expect(() => encodePublish("a/#", new Uint8Array(0))).toThrow(ProtocolError);
  });

  it("varint covers multi-byte lengths", () => {
    const frame = encodePublish("t", new Uint8Array(300));
    expect(frame[1]).toBe(0xaf); // (3 + 300) = 303 -> af 02
    expect(frame[2]).toBe(0x02);
  });
});

describe("PacketReader", () => {
  const connack = Uint8Array.from([0x20, 0x02, 0x00, 0x00]);
  const suback = Uint8Array.from([0x90, 0x03, 0x00, 0x01, 0x00]);
  const publish = Uint8Array.from([
    0x30, 0x07, 0x00, 0x03, 0x61, 0x2f, 0x62, 0x68, 0x69,
  ]);

  it("decodes a stream of packets fed whole", () => {
    const reader = new PacketReader();
    const all = new Uint8Array([...connack, ...suback, ...publish]);
    const packets = reader.feed(all);
    expect(packets.map((p) => p.type)).toEqual([
      PacketType.CONNACK,
      PacketType.SUBACK,
      PacketType.PUBLISH,
    ]);
    const pub = packets[2]!;
    if (pub.type !== PacketType.PUBLISH) throw new Error("unreachable");
    expect(pub.topic).toBe("a/b");
    expect(new TextDecoder().decode(pub.payload)).toBe("hi");
  });

  it("reassembles packets split at every byte boundary", () => {
    const all = new Uint8Array([...connack, ...publish, ...suback]);
    for (let cut = 1; cut < all.length; cut++) {
      const reader = new PacketReader();
      const got = [
        ...reader.feed(all.subarray(0, cut)),
        ...reader.feed(all.subarray(cut)),
      ];
      expect(got.map((p) => p.type)).toEqual([
        PacketType.CONNACK,
        PacketType.PUBLISH,
        PacketType.SUBACK,
      ]);
    }
  });

  it("rejects QoS>0 publishes and overlong varints", () => {
    expect(() =>
      new PacketReader().feed(Uint8Array.from([0x32, 0x02, 0x00, 0x00])),
    ).toThrow(ProtocolError);
    expect(() =>
      new PacketReader().feed(
        Uint8Array.from([0x30, 0x80, 0x80, 0x80, 0x80, 0x01]),
      ),
    ).toThrow(ProtocolError);
  });

  it("round-trips a large random payload", () => {
    const payload = new Uint8Array(5000);
    for (let i = 0; i < payload.length; i++) payload[i] = (i * 31) & 0xff;
    const reader = new PacketReader();
    const got = reader.feed(encodePublish("big/topic", payload));
    expect(got).toHaveLength(1);
    const pkt = got[0]!;
    if (pkt.type !== PacketType.PUBLISH) throw new Error("unreachable");
    expect(pkt.payload).toEqual(payload);
  });
});
