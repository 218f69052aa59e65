"""Block renderer and the control-message service for 3D sounds.

Commands update a target gain vector; the render path ramps the live
gains linearly across each block so repositioning never clicks.  Pitch
is playback rate via linear-interpolation resampling.
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from ..client import MqttClient
from ..geometry import Vec3
from ..schema import (
    SchemaError,
    SoundCommand,
    SoundStatus,
    TopicKind,
    decode_message,
    encode_message,
    make_topic,
)
from .layout import Mesh, SpeakerLayout, triangulate_layout
from .vbap import compute_gains, distance_attenuation

log = logging.getLogger("sdm.render")

SAMPLE_RATE = 48_000
BLOCK_SIZE = 512


class UnknownSound(KeyError):
    pass


@dataclass
class SoundSource:
    sound_id: str
    samples: np.ndarray  # mono float, SAMPLE_RATE
    loop: bool = False
    playing: bool = False
    cursor: float = 0.0
    volume: float = 1.0
    pitch: float = 1.0
    position: Vec3 = Vec3(0.0, 0.0, 0.0)
    current_gains: np.ndarray = None
    target_gains: np.ndarray = None


@dataclass
class RenderBlock:
    channels: np.ndarray  # (n_speakers, block_size)
    sample_rate: int = SAMPLE_RATE


class RendererState:
    def __init__(self, layout: SpeakerLayout, mesh: Mesh | None = None):
        self.layout = layout
        self.mesh = mesh if mesh is not None else triangulate_layout(layout)
        self.sources: dict[str, SoundSource] = {}
        self.n_channels = len(layout.speakers)

    def add_source(self, sound_id: str, samples: np.ndarray, loop: bool = False,
                   position: Vec3 | None = None) -> SoundSource:
        pos = position if position is not None else self.layout.reference_point
        src = SoundSource(sound_id, np.asarray(samples, dtype=np.float64),
                          loop=loop, position=pos)
        src.current_gains = compute_gains(pos, self.layout, self.mesh)
        src.target_gains = src.current_gains.copy()
        self.sources[sound_id] = src
        return src


def apply_command(state: RendererState, sound_id: str, cmd: SoundCommand,
                  timestamp_us: int | None = None) -> SoundStatus:
    """Apply one control message; returns the status event to publish."""
    src = state.sources.get(sound_id)
    if src is None:
        raise UnknownSound(sound_id)
    if cmd.command == "play":
        if not src.playing:
            src.cursor = 0.0
        src.playing = True
    elif cmd.command == "stop":
        src.playing = False
    else:  # set
        if cmd.volume is not None:
            src.volume = cmd.volume
        if cmd.pitch is not None:
            src.pitch = cmd.pitch
        if cmd.position is not None:
            src.position = cmd.position
            src.target_gains = compute_gains(cmd.position, state.layout, state.mesh)
    ts = timestamp_us if timestamp_us is not None else time.time_ns() // 1000
    return SoundStatus(
        sound_id=src.sound_id, playing=src.playing, volume=src.volume,
        position=src.position, pitch=src.pitch,
        gains=tuple(float(g) for g in src.target_gains), timestamp_us=ts)


def _resample_read(src: SoundSource, n_out: int) -> np.ndarray:
    """Read n_out samples at rate src.pitch with linear interpolation."""
    idx = src.cursor + src.pitch * np.arange(n_out)
    length = len(src.samples)
    out = np.zeros(n_out)
    if length == 0:
        src.playing = False
        return out
    if src.loop:
        idx = np.mod(idx, length)
        i0 = idx.astype(np.int64)
        frac = idx - i0
        i1 = (i0 + 1) % length
        out = (1.0 - frac) * src.samples[i0] + frac * src.samples[i1]
        src.cursor = float(np.mod(src.cursor + src.pitch * n_out, length))
    else:
        valid = idx < length - 1
        i0 = np.clip(idx[valid].astype(np.int64), 0, length - 2)
        frac = idx[valid] - i0
        out[valid] = (1.0 - frac) * src.samples[i0] + frac * src.samples[i0 + 1]
        src.cursor = src.cursor + src.pitch * n_out
        if src.cursor >= length - 1:
            src.playing = False
            src.cursor = min(src.cursor, float(length))
    return out


def render_block(state: RendererState, block_size: int = BLOCK_SIZE) -> RenderBlock:
    out = np.zeros((state.n_channels, block_size))
    ramp = np.linspace(0.0, 1.0, block_size, endpoint=False)
    for src in state.sources.values():
        if not src.playing:
            src.current_gains = src.target_gains.copy()
            continue
        mono = _resample_read(src, block_size)
        dist = src.position.distance_to(state.layout.reference_point)
        scalar = src.volume * distance_attenuation(dist)
        # per-channel linear gain ramp across the block
        g0 = src.current_gains[:, None]
        g1 = src.target_gains[:, None]
        gains = g0 + (g1 - g0) * ramp[None, :]
        out += gains * (scalar * mono)[None, :]
        src.current_gains = src.target_gains.copy()
    np.clip(out, -1.0, 1.0, out=out)
    return RenderBlock(out)


class RenderService:
    """Subscribes to per-sound control topics, publishes status, renders blocks."""

    def __init__(self, state: RendererState, broker_host: str, broker_port: int,
                 prefix: str, realtime: bool = False, sink=None):
        self.state = state
        self.prefix = prefix
        self.realtime = realtime
        self.sink = sink
        self._lock = threading.Lock()
        self._client = MqttClient(broker_host, broker_port,
                                  client_id=f"render-{prefix}", reconnect=True,
                                  on_message=self._on_control)
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def start(self) -> "RenderService":
        self._client.connect()
        self._client.subscribe(f"{self.prefix}/sound/+/control")
        self._thread = threading.Thread(target=self._render_loop,
                                        name="sdm-render", daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=3.0)
        self._client.close()

    def _on_control(self, topic: str, payload: bytes):
        parts = topic.split("/")
        # <prefix .../>sound/<id>/control
        sound_id = parts[-2] if len(parts) >= 2 else ""
        status_topic = make_topic(self.prefix, TopicKind.sound_status, sound_id or "unknown")
        try:
            cmd = decode_message(payload, SoundCommand)
            with self._lock:
                status = apply_command(self.state, sound_id, cmd)
        except UnknownSound:
            self._client.try_publish(
                status_topic,
                b'{"error":"unknown sound id","sound_id":"%s"}' % sound_id.encode())
            return
        except SchemaError as e:
            self._client.try_publish(
                status_topic, b'{"error":"%s"}' % str(e).encode("utf-8", "replace"))
            return
        self._client.try_publish(status_topic, encode_message(status))

    def _render_loop(self):
        period = BLOCK_SIZE / SAMPLE_RATE
        t0 = time.monotonic()
        n = 0
        while not self._stop.is_set():
            with self._lock:
                block = render_block(self.state)
            if self.sink is not None:
                self.sink(block)
            n += 1
            if self.realtime:
                self._stop.wait(max(0.0, t0 + n * period - time.monotonic()))
