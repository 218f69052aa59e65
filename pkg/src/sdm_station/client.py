"""Small blocking MQTT client (QoS 0) for services, benches, and tests.

One reader thread per client; publishes go straight out on the socket.
Optional auto-reconnect with exponential backoff re-establishes
subscriptions after a broker restart (messages sent meanwhile are lost,
which is the QoS 0 contract).
"""

from __future__ import annotations

import logging
import socket
import threading
import time
import uuid
from typing import Callable, Optional

from .broker.packets import (
    Packet,
    PacketType,
    ProtocolError,
    decode_packet,
    encode_packet,
)

log = logging.getLogger("sdm.client")


class MqttError(Exception):
    pass


class MqttClient:
    def __init__(self, host: str, port: int, client_id: str = "",
                 on_message: Optional[Callable[[str, bytes], None]] = None,
                 reconnect: bool = False, connect_timeout: float = 5.0):
        self.host = host
        self.port = port
        self.client_id = client_id or f"py-{uuid.uuid4().hex[:10]}"
        self.on_message = on_message
        self.reconnect = reconnect
        self.connect_timeout = connect_timeout
        self._sock: socket.socket | None = None
        self._lock = threading.Lock()
        self._connected = threading.Event()
        self._suback = threading.Event()
        self._closing = False
        self._subscriptions: list[str] = []
        self._reader: threading.Thread | None = None

    # -- lifecycle -----------------------------------------------------------

    def connect(self) -> "MqttClient":
        self._open_socket()
        self._reader = threading.Thread(target=self._reader_loop,
                                        name=f"mqtt-{self.client_id}", daemon=True)
        self._reader.start()
        return self

    def close(self):
        self._closing = True
        sock = self._sock
        if sock is not None:
            try:
                sock.sendall(encode_packet(Packet(PacketType.DISCONNECT)))
            except OSError:
                pass
            try:
                sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            sock.close()
        if self._reader is not None and self._reader is not threading.current_thread():
            self._reader.join(timeout=2.0)

    def __enter__(self):
        return self.connect()

    def __exit__(self, *exc):
        self.close()

    @property
    def connected(self) -> bool:
        return self._connected.is_set()

    def wait_connected(self, timeout: float = 5.0) -> bool:
        return self._connected.wait(timeout)

    # -- operations ----------------------------------------------------------

    def publish(self, topic: str, payload: bytes) -> None:
        data = encode_packet(Packet(PacketType.PUBLISH, topic=topic, payload=payload))
        with self._lock:
            sock = self._sock
            if sock is None:
                raise MqttError("not connected")
            try:
                sock.sendall(data)
            except OSError as e:
                raise MqttError(f"publish failed: {e}") from e

    def try_publish(self, topic: str, payload: bytes) -> bool:
        """QoS-0 fire-and-forget: drop silently while disconnected."""
        try:
            self.publish(topic, payload)
            return True
        except MqttError:
            return False

    def subscribe(self, topic_filter: str, timeout: float = 5.0) -> None:
        if topic_filter not in self._subscriptions:
            self._subscriptions.append(topic_filter)
        self._suback.clear()
        with self._lock:
            if self._sock is None:
                raise MqttError("not connected")
            self._sock.sendall(encode_packet(Packet(
                PacketType.SUBSCRIBE, packet_id=1, topics=[(topic_filter, 0)])))
        if not self._suback.wait(timeout):
            raise MqttError(f"no SUBACK for {topic_filter!r}")

    # -- internals -----------------------------------------------------------

    def _open_socket(self):
        sock = socket.create_connection((self.host, self.port),
                                        timeout=self.connect_timeout)
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        sock.sendall(encode_packet(Packet(
            PacketType.CONNECT, client_id=self.client_id, keepalive=0)))
        buf = bytearray()
        while True:
            data = sock.recv(4096)
            if not data:
                raise MqttError("connection closed during CONNECT")
            buf += data
            pkt, consumed = decode_packet(bytes(buf))
            if pkt is not None:
                break
        if pkt.type != PacketType.CONNACK or pkt.return_code != 0:
            raise MqttError(f"connect refused: {pkt}")
        sock.settimeout(None)
        leftover = bytes(buf[consumed:])
        with self._lock:
            self._sock = sock
        self._connected.set()
        return leftover

    def _reader_loop(self):
        buf = bytearray()
        backoff = 0.1
        while not self._closing:
            sock = self._sock
            try:
                data = sock.recv(65536)
            except OSError:
                data = b""
            if not data:
                self._connected.clear()
                if self._closing or not self.reconnect:
                    return
                buf.clear()
                time.sleep(backoff)
                backoff = min(backoff * 2, 5.0)
                try:
                    leftover = self._open_socket()
                    buf += leftover
                    for topic_filter in self._subscriptions:
                        with self._lock:
                            self._sock.sendall(encode_packet(Packet(
                                PacketType.SUBSCRIBE, packet_id=1,
                                topics=[(topic_filter, 0)])))
                    backoff = 0.1
                except (OSError, MqttError) as e:
                    log.debug("reconnect failed: %s", e)
                continue
            buf += data
            view = memoryview(bytes(buf))
            pos = 0
            try:
                while True:
                    pkt, consumed = decode_packet(view[pos:])
                    if pkt is None:
                        del buf[:pos]
                        break
                    pos += consumed
                    self._handle(pkt)
            except ProtocolError as e:
                log.warning("protocol error from broker: %s", e)
                return

    def _handle(self, pkt: Packet):
        if pkt.type == PacketType.PUBLISH:
            if self.on_message is not None:
                try:
                    self.on_message(pkt.topic, pkt.payload)
                except Exception:
                    log.exception("on_message callback failed")
        elif pkt.type == PacketType.SUBACK:
            self._suback.set()
        # PINGRESP / UNSUBACK need no action in this subset
