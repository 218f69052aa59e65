"""TCP delay-injection proxy: emulates a far-away broker by delaying each
direction's bytes by a fixed one-way delay plus optional Gaussian jitter.

Byte order per direction is preserved: the scheduled release time of a
chunk is never earlier than the previous chunk's.
"""

from __future__ import annotations

import asyncio
import logging
import random
import threading

log = logging.getLogger("sdm.proxy")


class DelayProxy:
    def __init__(self, upstream_host: str, upstream_port: int,
                 listen_host: str = "127.0.0.1", listen_port: int = 0,
                 one_way_delay_ms: float = 0.0, jitter_ms: float = 0.0,
                 seed: int = 0):
        self.upstream = (upstream_host, upstream_port)
        self.listen_host = listen_host
        self.listen_port = listen_port
        self.delay_s = one_way_delay_ms / 1000.0
        self.jitter_s = jitter_ms / 1000.0
        self._rng = random.Random(seed)
        self._loop: asyncio.AbstractEventLoop | None = None
        self._thread: threading.Thread | None = None
        self._server: asyncio.AbstractServer | None = None
        self._started = threading.Event()
        self._startup_error: BaseException | None = None
        self.port: int | None = None

    def start(self, timeout: float = 5.0) -> "DelayProxy":
        self._thread = threading.Thread(target=self._run, name="sdm-proxy", daemon=True)
        self._thread.start()
        if not self._started.wait(timeout):
            raise RuntimeError("proxy failed to start")
        if self._startup_error is not None:
            raise self._startup_error
        return self

    def shutdown(self, timeout: float = 5.0):
        loop = self._loop
        if loop is None or not loop.is_running():
            return
        loop.call_soon_threadsafe(self._stop)
        self._thread.join(timeout)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.shutdown()

    def _run(self):
        loop = asyncio.new_event_loop()
        self._loop = loop
        try:
            self._server = loop.run_until_complete(asyncio.start_server(
                self._handle, self.listen_host, self.listen_port))
            self.port = self._server.sockets[0].getsockname()[1]
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
            for t in pending:
                t.cancel()
            if pending:
                loop.run_until_complete(asyncio.gather(*pending, return_exceptions=True))
            loop.close()

    def _stop(self):
        self._server.close()
        self._loop.call_soon(self._loop.stop)

    def _sample_delay(self) -> float:
        d = self.delay_s
        if self.jitter_s > 0:
            d += abs(self._rng.gauss(0.0, self.jitter_s))
        return d

    async def _handle(self, client_reader, client_writer):
        try:
            up_reader, up_writer = await asyncio.open_connection(*self.upstream)
        except OSError as e:
            log.debug("upstream unreachable: %s", e)
            client_writer.close()
            return
        await asyncio.gather(
            self._pipe(client_reader, up_writer),
            self._pipe(up_reader, client_writer),
            return_exceptions=True)
        for w in (client_writer, up_writer):
            try:
                w.close()
            except Exception:
                pass

    async def _pipe(self, reader, writer):
        # the reader stamps each chunk on arrival so a chunk's delay clock
        # is never started late by a predecessor still being held back
        loop = asyncio.get_running_loop()
        queue: asyncio.Queue = asyncio.Queue()

        async def drain_queue():
            try:
                while True:
                    item = await queue.get()
                    if item is None:
                        break
                    due, data = item
                    wait = due - loop.time()
                    if wait > 0:
                        await asyncio.sleep(wait)
                    writer.write(data)
                    await writer.drain()
            except (ConnectionError, asyncio.CancelledError):
                pass
            finally:
                try:
                    writer.write_eof()
                except (OSError, RuntimeError):
                    pass

        sender = asyncio.ensure_future(drain_queue())
        last_due = 0.0
        try:
            while True:
                data = await reader.read(65536)
                if not data:
                    break
                due = max(loop.time() + self._sample_delay(), last_due)
                last_due = due  # per-direction FIFO even under jitter
                queue.put_nowait((due, data))
        except (ConnectionError, asyncio.CancelledError):
            pass
        finally:
            queue.put_nowait(None)
            await sender
