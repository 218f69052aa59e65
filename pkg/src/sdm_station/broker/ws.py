"""Minimal server-side WebSocket (RFC 6455) framing for MQTT-over-WS clients.

Only what a browser MQTT client needs: the upgrade handshake with the
"mqtt" subprotocol, masked binary frames in, unmasked binary frames out,
ping/pong, and close.
"""

from __future__ import annotations

import base64
import hashlib
import struct

_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


class WsError(Exception):
    pass


def accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + _GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def parse_handshake(request: bytes) -> dict:
    """Parse the HTTP upgrade request; return lower-cased header map."""
    try:
        head = request.decode("latin-1")
    except UnicodeDecodeError as e:
        raise WsError("bad handshake encoding") from e
    lines = head.split("\r\n")
    if not lines or not lines[0].startswith("GET "):
        raise WsError("handshake must be an HTTP GET")
    headers = {}
    for line in lines[1:]:
        if ":" in line:
            k, v = line.split(":", 1)
            headers[k.strip().lower()] = v.strip()
    if headers.get("upgrade", "").lower() != "websocket":
        raise WsError("missing Upgrade: websocket")
    if "sec-websocket-key" not in headers:
        raise WsError("missing Sec-WebSocket-Key")
    return headers


def handshake_response(headers: dict) -> bytes:
    lines = [
        "HTTP/1.1 101 Switching Protocols",
        "Upgrade: websocket",
        "Connection: Upgrade",
        f"Sec-WebSocket-Accept: {accept_key(headers['sec-websocket-key'])}",
    ]
    offered = headers.get("sec-websocket-protocol", "")
    if "mqtt" in [p.strip() for p in offered.split(",") if p.strip()]:
        lines.append("Sec-WebSocket-Protocol: mqtt")
    return ("\r\n".join(lines) + "\r\n\r\n").encode("ascii")


def encode_frame(payload: bytes, opcode: int = 0x2) -> bytes:
    """Single unmasked frame with FIN set (server-to-client)."""
    header = bytearray([0x80 | opcode])
    n = len(payload)
    if n < 126:
        header.append(n)
    elif n < (1 << 16):
        header.append(126)
        header += struct.pack(">H", n)
    else:
        header.append(127)
        header += struct.pack(">Q", n)
    return bytes(header) + payload


def decode_frame(buf: bytes):
    """Decode one client frame; return (opcode, payload, consumed, fin) or None if partial."""
    if len(buf) < 2:
        return None
    b0, b1 = buf[0], buf[1]
    fin = bool(b0 & 0x80)
    opcode = b0 & 0x0F
    masked = bool(b1 & 0x80)
    length = b1 & 0x7F
    pos = 2
    if length == 126:
        if len(buf) < pos + 2:
            return None
        (length,) = struct.unpack_from(">H", buf, pos)
        pos += 2
    elif length == 127:
        if len(buf) < pos + 8:
            return None
        (length,) = struct.unpack_from(">Q", buf, pos)
        pos += 8
    if not masked:
        raise WsError("client frames must be masked")
    if len(buf) < pos + 4 + length:
        return None
    mask = buf[pos:pos + 4]
    pos += 4
    data = bytes(b ^ mask[i % 4] for i, b in enumerate(buf[pos:pos + length]))
    if not fin and opcode not in (0x0, 0x1, 0x2):
        raise WsError("control frames must not be fragmented")
    return opcode, data, pos + length, fin
