"""MQTT v3.1.1 control-packet codec (QoS 0 subset).

decode_packet() is incremental: it returns (packet, consumed) when a full
packet is buffered, NEED_MORE when more bytes are required, and raises
ProtocolError on malformed input (the connection must then close).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import IntEnum


class ProtocolError(Exception):
    pass


class PacketType(IntEnum):
    CONNECT = 1
    CONNACK = 2
    PUBLISH = 3
    PUBACK = 4
    SUBSCRIBE = 8
    SUBACK = 9
    UNSUBSCRIBE = 10
    UNSUBACK = 11
    PINGREQ = 12
    PINGRESP = 13
    DISCONNECT = 14


@dataclass
class Packet:
    type: PacketType
    # PUBLISH
    topic: str = ""
    payload: bytes = b""
    qos: int = 0
    retain: bool = False
    dup: bool = False
    # CONNECT
    client_id: str = ""
    keepalive: int = 0
    clean_session: bool = True
    # CONNACK
    return_code: int = 0
    session_present: bool = False
    # SUBSCRIBE / SUBACK / UNSUBSCRIBE / PUBACK(qos1 tolerance)
    packet_id: int = 0
    topics: list = field(default_factory=list)       # [(filter, qos)] or [filter]
    granted_qos: list = field(default_factory=list)  # SUBACK


NEED_MORE = (None, 0)

_FIXED_FLAGS = {
    PacketType.CONNECT: 0x0,
    PacketType.CONNACK: 0x0,
    PacketType.PUBACK: 0x0,
    PacketType.SUBSCRIBE: 0x2,
    PacketType.SUBACK: 0x0,
    PacketType.UNSUBSCRIBE: 0x2,
    PacketType.UNSUBACK: 0x0,
    PacketType.PINGREQ: 0x0,
    PacketType.PINGRESP: 0x0,
    PacketType.DISCONNECT: 0x0,
}


def _encode_varint(n: int) -> bytes:
    if n < 0 or n > 268_435_455:
        raise ProtocolError(f"remaining length {n} out of range")
    out = bytearray()
    while True:
        n, digit = divmod(n, 128)
        out.append(digit | (0x80 if n else 0))
        if not n:
            return bytes(out)


def _decode_varint(buf: bytes, offset: int):
    """Return (value, bytes_used) or None if more bytes are needed."""
    value = 0
    for i in range(4):
        if offset + i >= len(buf):
            return None
        b = buf[offset + i]
        value |= (b & 0x7F) << (7 * i)
        if not b & 0x80:
            return value, i + 1
    raise ProtocolError("remaining-length varint exceeds 4 bytes")


def _mqtt_string(s: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ProtocolError("string too long")
    return struct.pack(">H", len(raw)) + raw


def _read_string(body: bytes, pos: int) -> tuple[str, int]:
    if pos + 2 > len(body):
        raise ProtocolError("truncated string length")
    (n,) = struct.unpack_from(">H", body, pos)
    pos += 2
    if pos + n > len(body):
        raise ProtocolError("truncated string body")
    try:
        s = body[pos:pos + n].decode("utf-8")
    except UnicodeDecodeError as e:
        raise ProtocolError(f"invalid UTF-8 string: {e}") from e
    if "\x00" in s:
        raise ProtocolError("string contains NUL")
    return s, pos + n


def encode_packet(pkt: Packet) -> bytes:
    t = pkt.type
    if t == PacketType.CONNECT:
        flags = 0x02 if pkt.clean_session else 0x00
        body = (_mqtt_string("MQTT") + bytes([4, flags]) +
                struct.pack(">H", pkt.keepalive) + _mqtt_string(pkt.client_id))
        header_flags = 0x0
    elif t == PacketType.CONNACK:
        body = bytes([1 if pkt.session_present else 0, pkt.return_code])
        header_flags = 0x0
    elif t == PacketType.PUBLISH:
        if any(ch in pkt.topic for ch in "+#"):
            raise ProtocolError("publish topic must not contain wildcards")
        body = _mqtt_string(pkt.topic)
        if pkt.qos > 0:
            body += struct.pack(">H", pkt.packet_id)
        body += pkt.payload
        header_flags = (0x8 if pkt.dup else 0) | (pkt.qos << 1) | (1 if pkt.retain else 0)
    elif t == PacketType.PUBACK:
        body = struct.pack(">H", pkt.packet_id)
        header_flags = 0x0
    elif t == PacketType.SUBSCRIBE:
        body = struct.pack(">H", pkt.packet_id)
        for topic_filter, qos in pkt.topics:
            body += _mqtt_string(topic_filter) + bytes([qos])
        header_flags = 0x2
    elif t == PacketType.SUBACK:
        body = struct.pack(">H", pkt.packet_id) + bytes(pkt.granted_qos)
        header_flags = 0x0
    elif t == PacketType.UNSUBSCRIBE:
        body = struct.pack(">H", pkt.packet_id)
        for topic_filter in pkt.topics:
            body += _mqtt_string(topic_filter)
        header_flags = 0x2
    elif t == PacketType.UNSUBACK:
        body = struct.pack(">H", pkt.packet_id)
        header_flags = 0x0
    elif t in (PacketType.PINGREQ, PacketType.PINGRESP, PacketType.DISCONNECT):
        body = b""
        header_flags = 0x0
    else:
        raise ProtocolError(f"cannot encode packet type {t}")
    return bytes([(t << 4) | header_flags]) + _encode_varint(len(body)) + body


def decode_packet(buf: bytes, max_payload: int = 1 << 20):
    """Decode one packet from the head of buf.

    Returns (Packet, consumed) or NEED_MORE.  Raises ProtocolError on
    malformed input.
    """
    if len(buf) < 2:
        return NEED_MORE
    first = buf[0]
    type_num = first >> 4
    flags = first & 0x0F
    try:
        ptype = PacketType(type_num)
    except ValueError:
        raise ProtocolError(f"unknown packet type {type_num}") from None

    vi = _decode_varint(buf, 1)
    if vi is None:
        return NEED_MORE
    remaining, vlen = vi
    if remaining > max_payload + 1024:
        raise ProtocolError(f"packet of {remaining} bytes exceeds limit")
    total = 1 + vlen + remaining
    if len(buf) < total:
        return NEED_MORE
    body = bytes(buf[1 + vlen:total])

    if ptype != PacketType.PUBLISH and flags != _FIXED_FLAGS[ptype]:
        raise ProtocolError(f"reserved flag bits set on {ptype.name}")

    pkt = Packet(type=ptype)
    pos = 0
    if ptype == PacketType.CONNECT:
        name, pos = _read_string(body, pos)
        if name != "MQTT":
            raise ProtocolError(f"protocol name mismatch: {name!r}")
        if pos + 4 > len(body):
            raise ProtocolError("truncated CONNECT header")
        level = body[pos]
        if level != 4:
            raise ProtocolError(f"unsupported protocol level {level}")
        connect_flags = body[pos + 1]
        if connect_flags & 0x01:
            raise ProtocolError("CONNECT reserved flag set")
        pkt.clean_session = bool(connect_flags & 0x02)
        (pkt.keepalive,) = struct.unpack_from(">H", body, pos + 2)
        pos += 4
        pkt.client_id, pos = _read_string(body, pos)
        # will/user/password fields of full MQTT are not part of this subset
        if connect_flags & 0xFC:
            raise ProtocolError("will/auth flags not supported by this broker subset")
    elif ptype == PacketType.CONNACK:
        if len(body) != 2:
            raise ProtocolError("bad CONNACK length")
        pkt.session_present = bool(body[0] & 0x01)
        pkt.return_code = body[1]
    elif ptype == PacketType.PUBLISH:
        pkt.dup = bool(flags & 0x8)
        pkt.qos = (flags >> 1) & 0x3
        pkt.retain = bool(flags & 0x1)
        if pkt.qos == 3:
            raise ProtocolError("invalid QoS 3")
        pkt.topic, pos = _read_string(body, pos)
        if not pkt.topic or any(ch in pkt.topic for ch in "+#"):
            raise ProtocolError("invalid publish topic")
        if pkt.qos > 0:
            if pos + 2 > len(body):
                raise ProtocolError("missing packet id")
            (pkt.packet_id,) = struct.unpack_from(">H", body, pos)
            pos += 2
        pkt.payload = body[pos:]
    elif ptype == PacketType.PUBACK:
        if len(body) != 2:
            raise ProtocolError("bad PUBACK length")
        (pkt.packet_id,) = struct.unpack(">H", body)
    elif ptype == PacketType.SUBSCRIBE:
        if len(body) < 2:
            raise ProtocolError("truncated SUBSCRIBE")
        (pkt.packet_id,) = struct.unpack_from(">H", body, 0)
        pos = 2
        while pos < len(body):
            topic_filter, pos = _read_string(body, pos)
            if pos >= len(body) + 1 or pos >= len(body):
                raise ProtocolError("missing requested QoS")
            qos = body[pos]
            pos += 1
            if qos > 2:
                raise ProtocolError(f"invalid requested QoS {qos}")
            pkt.topics.append((topic_filter, qos))
        if not pkt.topics:
            raise ProtocolError("SUBSCRIBE with no filters")
    elif ptype == PacketType.SUBACK:
        if len(body) < 3:
            raise ProtocolError("truncated SUBACK")
        (pkt.packet_id,) = struct.unpack_from(">H", body, 0)
        pkt.granted_qos = list(body[2:])
    elif ptype == PacketType.UNSUBSCRIBE:
        if len(body) < 2:
            raise ProtocolError("truncated UNSUBSCRIBE")
        (pkt.packet_id,) = struct.unpack_from(">H", body, 0)
        pos = 2
        while pos < len(body):
            topic_filter, pos = _read_string(body, pos)
            pkt.topics.append(topic_filter)
        if not pkt.topics:
            raise ProtocolError("UNSUBSCRIBE with no filters")
    elif ptype == PacketType.UNSUBACK:
        if len(body) != 2:
            raise ProtocolError("bad UNSUBACK length")
        (pkt.packet_id,) = struct.unpack(">H", body)
    else:  # PINGREQ / PINGRESP / DISCONNECT
        if body:
            raise ProtocolError(f"{ptype.name} must have empty body")
    return pkt, total
