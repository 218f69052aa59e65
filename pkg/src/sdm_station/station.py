"""Station composition root: config loading/validation and service lifecycle.

One JSON file describes the whole room (speakers, sensors, mics, zones,
sound registry); `Station` brings up the embedded broker first, then the
services, and shuts down in reverse order.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import numpy as np

from .broker import Broker, BrokerConfig
from .extract import (
    ExtractionService,
    Mic,
    MicArrayConfig,
    Zone,
    simulate_capture,
)
from .geometry import Vec3
from .localization import LocalizationService, SensorConfig, TagScript
from .render import RendererState, RenderService, SpeakerLayout, Speaker
from .render.layout import LayoutError
from .wavio import load_mono
from .render.engine import SAMPLE_RATE

log = logging.getLogger("sdm.station")

ALL_SERVICES = ("localization", "render", "extraction")


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("invalid station config:\n  " + "\n  ".join(errors))


@dataclass
class SoundEntry:
    id: str
    file: str
    loop: bool = False


@dataclass
class StationConfig:
    prefix: str
    broker_embedded: bool
    broker_host: str
    broker_tcp_port: int
    broker_ws_port: Optional[int]
    room_origin: Vec3
    room_size: Vec3
    layout: SpeakerLayout
    sensors: list[SensorConfig]
    tags: list[TagScript]
    array: MicArrayConfig
    zones: list[Zone]
    sounds: list[SoundEntry]
    services: list[str]
    base_dir: str = "."


def _vec3(raw, errors, path) -> Vec3:
    try:
        x, y, z = raw
        return Vec3(float(x), float(y), float(z))
    except (TypeError, ValueError):
        errors.append(f"{path}: expected [x, y, z] numbers, got {raw!r}")
        return Vec3(0.0, 0.0, 0.0)


def _in_room(p: Vec3, origin: Vec3, size: Vec3, margin: float = 1e-6) -> bool:
    return (origin.x - margin <= p.x <= origin.x + size.x + margin and
            origin.y - margin <= p.y <= origin.y + size.y + margin and
            origin.z - margin <= p.z <= origin.z + size.z + margin)


def load_config(path: str) -> StationConfig:
    """Parse and fully validate; all problems are reported at once."""
    with open(path) as f:
        raw = json.load(f)
    base_dir = os.path.dirname(os.path.abspath(path))
    errors: list[str] = []

    prefix = raw.get("prefix") or ""
    if not prefix or any(c in prefix for c in "+#\x00"):
        errors.append("prefix: must be non-empty without wildcards")

    broker = raw.get("broker", {})
    embedded = bool(broker.get("embedded", True))
    host = broker.get("host", "127.0.0.1")
    tcp_port = int(broker.get("tcp_port", 1883))
    ws_port = broker.get("ws_port")
    ws_port = int(ws_port) if ws_port is not None else None

    room = raw.get("room", {})
    origin = _vec3(room.get("origin", [0, 0, 0]), errors, "room.origin")
    size = _vec3(room.get("size", [4, 4, 3]), errors, "room.size")

    speakers = []
    for i, s in enumerate(raw.get("speakers", [])):
        pos = _vec3(s.get("position"), errors, f"speakers[{i}].position")
        speakers.append(Speaker(s.get("id", f"spk{i}"), pos))
        if not _in_room(pos, origin, size):
            errors.append(f"speakers[{i}] ({s.get('id')}): outside room bounds")
    ids = [s.id for s in speakers]
    if len(set(ids)) != len(ids):
        errors.append("speakers: duplicate ids")
    ref = _vec3(raw.get("reference_point", [origin.x + size.x / 2,
                                            origin.y + size.y / 2,
                                            origin.z + size.z / 2]),
                errors, "reference_point")
    layout = None
    try:
        layout = SpeakerLayout(tuple(speakers), ref)
    except LayoutError as e:
        errors.append(f"speakers: {e}")

    sensors = []
    for i, s in enumerate(raw.get("sensors", [])):
        pos = _vec3(s.get("position"), errors, f"sensors[{i}].position")
        if not _in_room(pos, origin, size):
            errors.append(f"sensors[{i}] ({s.get('id')}): outside room bounds")
        sensors.append(SensorConfig(s.get("id", f"sensor{i}"), pos,
                                    float(s.get("range_noise_sigma", 0.08))))

    tags = []
    for i, t in enumerate(raw.get("tags", [])):
        waypoints = []
        for j, wp in enumerate(t.get("waypoints", [])):
            waypoints.append((float(wp.get("t", 0.0)),
                              _vec3(wp.get("position"), errors,
                                    f"tags[{i}].waypoints[{j}].position")))
        if not waypoints:
            errors.append(f"tags[{i}]: needs at least one waypoint")
            waypoints = [(0.0, origin)]
        tags.append(TagScript(t.get("id", f"tag{i}"), waypoints,
                              [float(x) for x in t.get("button_times", [])]))

    mics = []
    for i, m in enumerate(raw.get("microphones", [])):
        pos = _vec3(m.get("position"), errors, f"microphones[{i}].position")
        if not _in_room(pos, origin, size):
            errors.append(f"microphones[{i}] ({m.get('id')}): outside room bounds")
        orient = _vec3(m.get("orientation", [0, 0, -1]), errors,
                       f"microphones[{i}].orientation")
        mics.append(Mic(m.get("id", f"mic{i}"), pos, orient,
                        m.get("directivity", "omni")))
    array = None
    if len(mics) >= 2:
        array = MicArrayConfig(tuple(mics))
    elif raw.get("microphones"):
        errors.append("microphones: need at least 2")

    zones = []
    for i, z in enumerate(raw.get("zones", [])):
        zones.append(Zone(z.get("id", f"zone{i}"),
                          _vec3(z.get("center"), errors, f"zones[{i}].center"),
                          float(z.get("radius", 1.0))))
    zone_ids = [z.id for z in zones]
    if len(set(zone_ids)) != len(zone_ids):
        errors.append("zones: duplicate ids")

    sounds = []
    seen_sound_ids = set()
    for i, s in enumerate(raw.get("sounds", [])):
        sid = s.get("id", f"sound{i}")
        if sid in seen_sound_ids:
            errors.append(f"sounds[{i}]: duplicate id {sid!r}")
        seen_sound_ids.add(sid)
        fpath = s.get("file", "")
        resolved = fpath if os.path.isabs(fpath) else os.path.join(base_dir, fpath)
        if not os.path.exists(resolved):
            errors.append(f"sounds[{i}] ({sid}): file not found: {fpath}")
        sounds.append(SoundEntry(sid, resolved, bool(s.get("loop", False))))

    services = raw.get("services", list(ALL_SERVICES))
    for name in services:
        if name not in ALL_SERVICES:
            errors.append(f"services: unknown service {name!r}")

    if errors:
        raise ConfigError(errors)
    return StationConfig(prefix, embedded, host, tcp_port, ws_port, origin, size,
                         layout, sensors, tags, array, zones, sounds, services,
                         base_dir)


def default_config_path() -> str:
    """Bundled room description matching the prototype geometry."""
    return str(resources.files("sdm_station").joinpath("data/default_station.json"))


# distinct fundamentals so the zone talkers are separable in frequency
TALKER_F0S = (110.0, 146.8, 185.0, 233.1)


class Station:
    """Running composition: broker first, then the enabled services."""

    def __init__(self, config: StationConfig,
                 enabled_services: Optional[list[str]] = None,
                 render_realtime: bool = True, extraction_scene_seconds: float = 1.0):
        self.config = config
        self.services = enabled_services if enabled_services is not None \
            else config.services
        self.render_realtime = render_realtime
        self.scene_seconds = extraction_scene_seconds
        self.broker: Broker | None = None
        self.localization: LocalizationService | None = None
        self.render: RenderService | None = None
        self.extraction: ExtractionService | None = None
        self._health = {}

    def start(self) -> "Station":
        cfg = self.config
        try:
            if cfg.broker_embedded:
                self.broker = Broker(BrokerConfig(
                    tcp_bind=(cfg.broker_host, cfg.broker_tcp_port),
                    ws_bind=(cfg.broker_host, cfg.broker_ws_port)
                    if cfg.broker_ws_port is not None else None)).start()
                host, port = cfg.broker_host, self.broker.tcp_port
            else:
                host, port = cfg.broker_host, cfg.broker_tcp_port
            self.broker_host, self.broker_port = host, port

            if "render" in self.services:
                state = RendererState(cfg.layout)
                for entry in cfg.sounds:
                    state.add_source(entry.id, load_mono(entry.file, SAMPLE_RATE),
                                     loop=entry.loop)
                self.render = RenderService(state, host, port, cfg.prefix,
                                            realtime=self.render_realtime).start()
            if "localization" in self.services and cfg.sensors:
                self.localization = LocalizationService(
                    cfg.sensors, cfg.tags, host, port, cfg.prefix).start()
            if "extraction" in self.services and cfg.array is not None and cfg.zones:
                capture, components, zone_of_source = self._make_scene()
                self.extraction = ExtractionService(
                    cfg.array, cfg.zones, host, port, cfg.prefix,
                    capture=capture, components=components,
                    zone_of_source=zone_of_source).start()
        except Exception:
            self.stop()
            raise
        self._health = {"broker": self.broker is not None,
                        "services": list(self.services)}
        return self

    def _make_scene(self):
        """One synthetic talker per zone so zone selection is demonstrable."""
        cfg = self.config
        from .extract import synthetic_talker
        n = int(self.scene_seconds * SAMPLE_RATE)
        sources = []
        zone_of_source = {}
        for i, zone in enumerate(cfg.zones):
            f0 = TALKER_F0S[i % len(TALKER_F0S)]
            sources.append((zone.center,
                            synthetic_talker(n, f0, am_hz=2.0 + i, seed=42 + i)))
            zone_of_source[i] = zone.id
        capture, components = simulate_capture(
            sources, cfg.array, diffuse_noise_level_dbfs=-40.0, seed=7,
            return_components=True)
        return capture, components, zone_of_source

    def health(self) -> dict:
        return dict(self._health)

    def stop(self):
        # reverse of startup order; broker goes down last
        for svc in (self.extraction, self.localization, self.render):
            if svc is not None:
                try:
                    svc.stop()
                except Exception:
                    log.exception("service shutdown failed")
        if self.broker is not None:
            self.broker.shutdown()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()
