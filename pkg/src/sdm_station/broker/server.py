"""Pub/sub broker: MQTT v3.1.1 QoS-0 subset over TCP and WebSocket.

The routing core (BrokerCore) is plain synchronous code so routing can be
unit-tested without sockets; the Broker class runs it inside an asyncio
loop on a background thread and exposes a blocking start/shutdown handle.
"""

from __future__ import annotations

import asyncio
import logging
import threading
import uuid
from collections import deque
from dataclasses import dataclass, field

from . import ws
from .packets import (
    NEED_MORE,
    Packet,
    PacketType,
    ProtocolError,
    decode_packet,
    encode_packet,
)
from .trie import SubscriptionTrie, filter_is_valid

log = logging.getLogger("sdm.broker")


@dataclass
class BrokerConfig:
    tcp_bind: tuple[str, int] | None = ("127.0.0.1", 1883)
    ws_bind: tuple[str, int] | None = ("127.0.0.1", 8083)
    max_payload: int = 64 * 1024
    queue_limit: int = 1024  # per-session outbound queue, drop-oldest beyond


class Session:
    def __init__(self, client_id: str, queue_limit: int):
        self.client_id = client_id
        self.subscriptions: set[str] = set()
        self.connected = True
        self.queue: deque[bytes] = deque()
        self.queue_limit = queue_limit
        self.dropped = 0
        self.wakeup: asyncio.Event | None = None
        self.close_requested = False

    def enqueue(self, data: bytes) -> None:
        if len(self.queue) >= self.queue_limit:
            self.queue.popleft()
            self.dropped += 1
        self.queue.append(data)
        if self.wakeup is not None:
            self.wakeup.set()


class BrokerCore:
    """Session registry + routing table.  Single-threaded by contract."""

    def __init__(self, config: BrokerConfig | None = None):
        self.config = config or BrokerConfig()
        self.trie = SubscriptionTrie()
        self.sessions: dict[str, Session] = {}

    def connect(self, pkt: Packet, queue_limit: int | None = None) -> Session:
        client_id = pkt.client_id or f"auto-{uuid.uuid4().hex[:12]}"
        old = self.sessions.get(client_id)
        if old is not None:
            # duplicate client id takes over: older session is closed
            old.close_requested = True
            old.connected = False
            self.trie.remove_subscriber(old)
            if old.wakeup is not None:
                old.wakeup.set()
        session = Session(client_id, queue_limit or self.config.queue_limit)
        self.sessions[client_id] = session
        return session

    def disconnect(self, session: Session) -> None:
        session.connected = False
        self.trie.remove_subscriber(session)
        if self.sessions.get(session.client_id) is session:
            del self.sessions[session.client_id]

    def on_packet(self, session: Session, pkt: Packet) -> None:
        """Handle one packet from a connected session, enqueueing replies/deliveries."""
        t = pkt.type
        if t == PacketType.SUBSCRIBE:
            granted = []
            for topic_filter, _qos in pkt.topics:
                if filter_is_valid(topic_filter):
                    self.trie.subscribe(topic_filter, session)
                    session.subscriptions.add(topic_filter)
                    granted.append(0)  # QoS downgraded to 0 (broker subset)
                else:
                    granted.append(0x80)
            session.enqueue(encode_packet(Packet(
                PacketType.SUBACK, packet_id=pkt.packet_id, granted_qos=granted)))
        elif t == PacketType.UNSUBSCRIBE:
            for topic_filter in pkt.topics:
                self.trie.unsubscribe(topic_filter, session)
                session.subscriptions.discard(topic_filter)
            session.enqueue(encode_packet(Packet(
                PacketType.UNSUBACK, packet_id=pkt.packet_id)))
        elif t == PacketType.PUBLISH:
            if pkt.qos > 0:
                # tolerated from standard clients, acked and delivered at QoS 0
                session.enqueue(encode_packet(Packet(
                    PacketType.PUBACK, packet_id=pkt.packet_id)))
            data = encode_packet(Packet(
                PacketType.PUBLISH, topic=pkt.topic, payload=pkt.payload, qos=0))
            for target in self.route(pkt.topic):
                target.enqueue(data)
        elif t == PacketType.PINGREQ:
            session.enqueue(encode_packet(Packet(PacketType.PINGRESP)))
        elif t == PacketType.DISCONNECT:
            session.close_requested = True
            if session.wakeup is not None:
                session.wakeup.set()
        else:
            raise ProtocolError(f"unexpected {t.name} from client")

    def route(self, topic: str) -> set[Session]:
        return {s for s in self.trie.match(topic) if s.connected}


class _WsFraming:
    """Adapts the MQTT byte stream to WebSocket binary frames."""

    def __init__(self):
        self.buf = bytearray()
        self.fragment = bytearray()

    def unwrap(self, data: bytes) -> tuple[bytes, list[bytes], bool]:
        """Return (mqtt_bytes, control_replies, close)."""
        self.buf += data
        out = bytearray()
        replies: list[bytes] = []
        while True:
            frame = ws.decode_frame(bytes(self.buf))
            if frame is None:
                return bytes(out), replies, False
            opcode, payload, consumed, fin = frame
            del self.buf[:consumed]
            if opcode in (0x1, 0x2, 0x0):
                self.fragment += payload
                if fin:
                    out += self.fragment
                    self.fragment.clear()
            elif opcode == 0x9:  # ping
                replies.append(ws.encode_frame(payload, opcode=0xA))
            elif opcode == 0x8:  # close
                replies.append(ws.encode_frame(payload[:2], opcode=0x8))
                return bytes(out), replies, True

    @staticmethod
    def wrap(data: bytes) -> bytes:
        return ws.encode_frame(data, opcode=0x2)


class Broker:
    """Runs the broker on a dedicated asyncio loop in a daemon thread."""

    def __init__(self, config: BrokerConfig | None = None):
        self.config = config or BrokerConfig()
        self.core = BrokerCore(self.config)
        self._loop: asyncio.AbstractEventLoop | None = None
        self._thread: threading.Thread | None = None
        self._servers: list[asyncio.AbstractServer] = []
        self._conn_tasks: set[asyncio.Task] = set()
        self._started = threading.Event()
        self._startup_error: BaseException | None = None
        self.tcp_port: int | None = None
        self.ws_port: int | None = None

    # -- lifecycle -----------------------------------------------------------

    def start(self, timeout: float = 5.0) -> "Broker":
        self._thread = threading.Thread(target=self._run, name="sdm-broker", daemon=True)
        self._thread.start()
        if not self._started.wait(timeout):
            raise RuntimeError("broker failed to start in time")
        if self._startup_error is not None:
            raise self._startup_error
        return self

    def shutdown(self, timeout: float = 5.0) -> None:
        loop = self._loop
        if loop is None or not loop.is_running():
            return
        loop.call_soon_threadsafe(self._begin_shutdown)
        self._thread.join(timeout)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.shutdown()

    @property
    def tcp_address(self) -> str:
        return f"{self.config.tcp_bind[0]}:{self.tcp_port}"

    def _run(self):
        loop = asyncio.new_event_loop()
        self._loop = loop
        try:
            loop.run_until_complete(self._startup())
        except OSError as e:
            self._startup_error = e
            self._started.set()
            loop.close()
            return
        self._started.set()
        try:
            loop.run_forever()
        finally:
            pending = asyncio.all_tasks(loop)
            for task in pending:
                task.cancel()
            if pending:
                loop.run_until_complete(
                    asyncio.gather(*pending, return_exceptions=True))
            loop.close()

    async def _startup(self):
        cfg = self.config
        if cfg.tcp_bind is not None:
            server = await asyncio.start_server(
                self._handle_tcp, cfg.tcp_bind[0], cfg.tcp_bind[1])
            self.tcp_port = server.sockets[0].getsockname()[1]
            self._servers.append(server)
            log.info("broker listening on tcp %s:%s", cfg.tcp_bind[0], self.tcp_port)
        if cfg.ws_bind is not None:
            server = await asyncio.start_server(
                self._handle_ws, cfg.ws_bind[0], cfg.ws_bind[1])
            self.ws_port = server.sockets[0].getsockname()[1]
            self._servers.append(server)
            log.info("broker listening on ws %s:%s", cfg.ws_bind[0], self.ws_port)

    def _begin_shutdown(self):
        for server in self._servers:
            server.close()
        for task in list(self._conn_tasks):
            task.cancel()
        self._loop.call_soon(self._loop.stop)

    # -- connection handling -------------------------------------------------

    async def _handle_tcp(self, reader, writer):
        await self._serve_conn(reader, writer, framing=None)

    async def _handle_ws(self, reader, writer):
        try:
            request = await reader.readuntil(b"\r\n\r\n")
            headers = ws.parse_handshake(request)
            writer.write(ws.handshake_response(headers))
            await writer.drain()
        except (ws.WsError, asyncio.IncompleteReadError, asyncio.LimitOverrunError):
            writer.close()
            return
        await self._serve_conn(reader, writer, framing=_WsFraming())

    async def _serve_conn(self, reader, writer, framing: _WsFraming | None):
        task = asyncio.current_task()
        self._conn_tasks.add(task)
        session: Session | None = None
        writer_task: asyncio.Task | None = None
        try:
            buf = bytearray()
            while True:
                data = await reader.read(65536)
                if not data:
                    break
                if framing is not None:
                    mqtt_bytes, replies, closed = framing.unwrap(data)
                    for reply in replies:
                        writer.write(reply)
                    buf += mqtt_bytes
                    if closed:
                        break
                else:
                    buf += data
                view = memoryview(bytes(buf))
                pos = 0
                while True:
                    pkt, consumed = decode_packet(view[pos:], self.config.max_payload)
                    if pkt is None:
                        del buf[:pos]
                        break
                    pos += consumed
                    if session is None:
                        if pkt.type != PacketType.CONNECT:
                            raise ProtocolError("first packet must be CONNECT")
                        session = self.core.connect(pkt)
                        session.wakeup = asyncio.Event()
                        session.enqueue(encode_packet(
                            Packet(PacketType.CONNACK, return_code=0)))
                        writer_task = asyncio.ensure_future(
                            self._writer_loop(session, writer, framing))
                    else:
                        self.core.on_packet(session, pkt)
                if session is not None and session.close_requested:
                    break
        except (ProtocolError, ws.WsError, ConnectionError) as e:
            log.debug("connection error: %s", e)
        except asyncio.CancelledError:
            pass
        finally:
            self._conn_tasks.discard(task)
            if session is not None:
                session.close_requested = True
                self.core.disconnect(session)
                session.wakeup.set()
                if writer_task is not None:
                    try:
                        await asyncio.wait_for(writer_task, timeout=2.0)
                    except (asyncio.TimeoutError, asyncio.CancelledError):
                        writer_task.cancel()
            try:
                writer.close()
            except Exception:
                pass

    async def _writer_loop(self, session: Session, writer, framing: _WsFraming | None):
        try:
            while True:
                while session.queue:
                    chunk = bytearray()
                    while session.queue and len(chunk) < 256 * 1024:
                        data = session.queue.popleft()
                        chunk += _WsFraming.wrap(data) if framing is not None else data
                    writer.write(bytes(chunk))
                    await writer.drain()
                if session.close_requested:
                    return
                session.wakeup.clear()
                if session.queue or session.close_requested:
                    continue
                await session.wakeup.wait()
        except (ConnectionError, asyncio.CancelledError):
            pass
