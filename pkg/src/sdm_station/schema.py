"""Shared message vocabulary: topic naming, JSON payload codecs, scene registry.

All services talk JSON over broker topics.  Field names are part of the
wire contract and must not change:

    location      {"tag_id","x","y","z","ts_us","event"?}
    sound control {"cmd","volume"?,"x"?,"y"?,"z"?,"pitch"?}
    sound status  {"sound_id","playing","volume","x","y","z","pitch","gains",[...],"ts_us"}
    bench         {"seq","t_send_us","pad"}
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Union

from .geometry import Vec3

WILDCARD_CHARS = ("+", "#")


class SchemaError(ValueError):
    """Invalid topic, payload, or field value."""


class TopicKind(str, Enum):
    location = "location"
    sound_control = "sound_control"
    sound_status = "sound_status"
    bench = "bench"


def validate_topic(topic: str) -> str:
    """Check a publish topic: non-empty, no NUL, no wildcards."""
    if not topic:
        raise SchemaError("topic must be non-empty")
    if "\x00" in topic:
        raise SchemaError("topic must not contain NUL")
    for ch in WILDCARD_CHARS:
        if ch in topic:
            raise SchemaError(f"publish topic must not contain wildcard {ch!r}")
    return topic


def make_topic(prefix: str, kind: TopicKind | str, id: str) -> str:
    """Deterministic topic for one object: <prefix>/<scheme path with id>."""
    kind = TopicKind(kind)
    for part, label in ((prefix, "prefix"), (id, "id")):
        if not part:
            raise SchemaError(f"{label} must be non-empty")
        if any(ch in part for ch in WILDCARD_CHARS) or "\x00" in part:
            raise SchemaError(f"{label} contains invalid characters: {part!r}")
    if kind is TopicKind.location:
        return f"{prefix}/location/{id}"
    if kind is TopicKind.sound_control:
        return f"{prefix}/sound/{id}/control"
    if kind is TopicKind.sound_status:
        return f"{prefix}/sound/{id}/status"
    return f"{prefix}/bench/{id}"


@dataclass(frozen=True)
class LocationMessage:
    tag_id: str
    position: Vec3
    timestamp_us: int
    event: Optional[str] = None  # only "button_push" today

    def __post_init__(self):
        if not self.tag_id:
            raise SchemaError("tag_id must be non-empty")
        if self.event is not None and self.event != "button_push":
            raise SchemaError(f"unknown event {self.event!r}")


@dataclass(frozen=True)
class SoundCommand:
    command: str  # play | stop | set
    volume: Optional[float] = None
    position: Optional[Vec3] = None
    pitch: Optional[float] = None

    def __post_init__(self):
        if self.command not in ("play", "stop", "set"):
            raise SchemaError(f"unknown command {self.command!r}")
        if self.volume is not None and not (0.0 <= self.volume <= 2.0):
            raise SchemaError("volume out of range [0, 2]")
        if self.pitch is not None and not (0.25 <= self.pitch <= 4.0):
            raise SchemaError("pitch out of range [0.25, 4.0]")
        if self.command == "set" and self.volume is None and self.position is None \
                and self.pitch is None:
            raise SchemaError("set command requires at least one field")


@dataclass(frozen=True)
class SoundStatus:
    sound_id: str
    playing: bool
    volume: float
    position: Vec3
    pitch: float
    gains: tuple[float, ...]
    timestamp_us: int

    def __post_init__(self):
        for g in self.gains:
            if not (-1e-9 <= g <= 1.0 + 1e-9):
                raise SchemaError(f"gain {g} outside [0, 1]")
        if sum(g * g for g in self.gains) > 1.0 + 1e-6:
            raise SchemaError("gain energy exceeds 1")


@dataclass(frozen=True)
class BenchMessage:
    seq: int
    t_send_us: int
    pad: str = ""


Message = Union[LocationMessage, SoundCommand, SoundStatus, BenchMessage]


def encode_message(msg: Message) -> bytes:
    if isinstance(msg, LocationMessage):
        d = {"tag_id": msg.tag_id, "x": msg.position.x, "y": msg.position.y,
             "z": msg.position.z, "ts_us": msg.timestamp_us}
        if msg.event is not None:
            d["event"] = msg.event
    elif isinstance(msg, SoundCommand):
        d = {"cmd": msg.command}
        if msg.volume is not None:
            d["volume"] = msg.volume
        if msg.position is not None:
            d.update(x=msg.position.x, y=msg.position.y, z=msg.position.z)
        if msg.pitch is not None:
            d["pitch"] = msg.pitch
    elif isinstance(msg, SoundStatus):
        d = {"sound_id": msg.sound_id, "playing": msg.playing, "volume": msg.volume,
             "x": msg.position.x, "y": msg.position.y, "z": msg.position.z,
             "pitch": msg.pitch, "gains": list(msg.gains), "ts_us": msg.timestamp_us}
    elif isinstance(msg, BenchMessage):
        d = {"seq": msg.seq, "t_send_us": msg.t_send_us, "pad": msg.pad}
    else:
        raise SchemaError(f"cannot encode {type(msg).__name__}")
    return json.dumps(d, separators=(",", ":")).encode("utf-8")


def _require(d: dict, key: str, kinds) -> object:
    if key not in d:
        raise SchemaError(f"missing required field {key!r}")
    v = d[key]
    if not isinstance(v, kinds) or isinstance(v, bool) and kinds is not bool:
        raise SchemaError(f"field {key!r} has wrong type")
    return v


_NUM = (int, float)


def decode_message(payload: bytes, expected_kind: type) -> Message:
    """Parse payload as one of the message types; raise SchemaError naming the field."""
    try:
        d = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise SchemaError(f"malformed JSON payload: {e}") from e
    if not isinstance(d, dict):
        raise SchemaError("payload must be a JSON object")

    if expected_kind is LocationMessage:
        pos = Vec3(float(_require(d, "x", _NUM)), float(_require(d, "y", _NUM)),
                   float(_require(d, "z", _NUM)))
        event = d.get("event")
        if event is not None and not isinstance(event, str):
            raise SchemaError("field 'event' has wrong type")
        return LocationMessage(str(_require(d, "tag_id", str)), pos,
                               int(_require(d, "ts_us", int)), event)
    if expected_kind is SoundCommand:
        cmd = str(_require(d, "cmd", str))
        pos = None
        if any(k in d for k in ("x", "y", "z")):
            pos = Vec3(float(_require(d, "x", _NUM)), float(_require(d, "y", _NUM)),
                       float(_require(d, "z", _NUM)))
        vol = d.get("volume")
        if vol is not None and not isinstance(vol, _NUM):
            raise SchemaError("field 'volume' has wrong type")
        if vol is not None and not (0.0 <= vol <= 2.0):
            raise SchemaError("volume out of range")
        pitch = d.get("pitch")
        if pitch is not None and not isinstance(pitch, _NUM):
            raise SchemaError("field 'pitch' has wrong type")
        if pitch is not None and not (0.25 <= pitch <= 4.0):
            raise SchemaError("pitch out of range")
        return SoundCommand(cmd, None if vol is None else float(vol), pos,
                            None if pitch is None else float(pitch))
    if expected_kind is SoundStatus:
        gains = _require(d, "gains", list)
        if not all(isinstance(g, _NUM) for g in gains):
            raise SchemaError("field 'gains' has wrong element type")
        pos = Vec3(float(_require(d, "x", _NUM)), float(_require(d, "y", _NUM)),
                   float(_require(d, "z", _NUM)))
        return SoundStatus(str(_require(d, "sound_id", str)),
                           bool(_require(d, "playing", bool)),
                           float(_require(d, "volume", _NUM)), pos,
                           float(_require(d, "pitch", _NUM)),
                           tuple(float(g) for g in gains),
                           int(_require(d, "ts_us", int)))
    if expected_kind is BenchMessage:
        return BenchMessage(int(_require(d, "seq", int)),
                            int(_require(d, "t_send_us", int)),
                            str(_require(d, "pad", str)))
    raise SchemaError(f"unknown message kind {expected_kind!r}")


# --- virtual-space scene registry -------------------------------------------

SCENE_KINDS = ("tag", "sound_source", "speaker", "microphone", "sensor", "zone")


@dataclass(frozen=True)
class SceneObject:
    id: str
    kind: str
    pose: Vec3
    version: int = 0

    def __post_init__(self):
        if not self.id:
            raise SchemaError("SceneObject.id must be non-empty")
        if self.kind not in SCENE_KINDS:
            raise SchemaError(f"unknown scene kind {self.kind!r}")


class SceneNotFound(KeyError):
    pass


class SceneRegistry:
    """Virtual-space object registry: concurrent readers, serialized writers."""

    def __init__(self):
        self._objects: dict[str, SceneObject] = {}
        self._lock = threading.Lock()

    def upsert(self, obj: SceneObject) -> int:
        with self._lock:
            prev = self._objects.get(obj.id)
            version = 1 if prev is None else prev.version + 1
            stored = replace(obj, version=version)
            self._objects[obj.id] = stored
            return version

    def get(self, id: str) -> SceneObject:
        with self._lock:
            try:
                return self._objects[id]
            except KeyError:
                raise SceneNotFound(id) from None

    def snapshot(self) -> list[SceneObject]:
        with self._lock:
            return list(self._objects.values())
