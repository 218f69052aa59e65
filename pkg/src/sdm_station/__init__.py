"""Virtualized media station: pub/sub control plane plus localization,
3D audio rendering, mic-array extraction, and a latency benchmark."""

from .geometry import Vec3
from .schema import (
    LocationMessage,
    SceneObject,
    SceneRegistry,
    SoundCommand,
    SoundStatus,
    TopicKind,
    decode_message,
    encode_message,
    make_topic,
)

__version__ = "0.1.0"

__all__ = [
    "Vec3",
    "LocationMessage",
    "SoundCommand",
    "SoundStatus",
    "SceneObject",
    "SceneRegistry",
    "TopicKind",
    "make_topic",
    "encode_message",
    "decode_message",
    "__version__",
]
