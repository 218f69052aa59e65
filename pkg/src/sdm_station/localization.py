"""Indoor positioning: simulated range sensors and a least-squares solver.

The virtual sensors produce tag-to-sensor ranges (true distance plus
Gaussian noise).  Positions are recovered by Gauss-Newton iteration on
the range residuals, with a Levenberg-style damped fallback when the
normal equations go singular.  The service loop publishes one fix per
tag per period plus scripted button events.
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .client import MqttClient
from .geometry import Vec3
from .schema import LocationMessage, TopicKind, encode_message, make_topic

log = logging.getLogger("sdm.localization")

# Range noise giving a 3D position RMSE inside the 0.15-0.30 m target band
# on the default 4-sensor room geometry (calibrated by Monte-Carlo sweep,
# see tests).
DEFAULT_RANGE_SIGMA = 0.08


class InsufficientObservations(ValueError):
    pass


@dataclass(frozen=True)
class SensorConfig:
    id: str
    position: Vec3
    range_noise_sigma: float = DEFAULT_RANGE_SIGMA


@dataclass(frozen=True)
class TagObservation:
    tag_id: str
    sensor_id: str
    range: float
    timestamp_us: int = 0

    def __post_init__(self):
        if not (0.0 < self.range < 1000.0):
            raise ValueError(f"range {self.range} outside (0, 1000) m")


@dataclass(frozen=True)
class PositionFix:
    tag_id: str
    position: Vec3
    rms_residual: float
    iterations: int
    converged: bool


def check_sensor_geometry(sensors: Sequence[SensorConfig],
                          cond_limit: float = 1e8) -> None:
    """Reject degenerate sensor layouts before the service starts."""
    if len(sensors) < 3:
        raise ValueError("need at least 3 sensors for a 3D fix")
    pos = np.array([s.position.as_tuple() for s in sensors])
    centered = pos - pos.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    if sv[-1] < 1e-12 or sv[0] / max(sv[-1], 1e-300) > cond_limit:
        raise ValueError("sensor positions are degenerate (coplanar/collinear)")


def simulate_observations(true_pos: Vec3, sensors: Sequence[SensorConfig],
                          seed: int, tag_id: str = "tag",
                          timestamp_us: int = 0) -> list[TagObservation]:
    """Noisy ranges: |p - s_i| + N(0, sigma_i), reproducible per seed."""
    if not sensors:
        raise ValueError("sensors must be non-empty")
    rng = np.random.default_rng(seed)
    obs = []
    for s in sensors:
        r = true_pos.distance_to(s.position)
        if s.range_noise_sigma > 0:
            r += rng.normal(0.0, s.range_noise_sigma)
        r = max(r, 1e-6)
        obs.append(TagObservation(tag_id, s.id, r, timestamp_us))
    return obs


def _lateration_init(anchors: np.ndarray, ranges: np.ndarray) -> np.ndarray:
    """Closed-form start: subtracting squared-range equations pairwise gives
    a linear system in the position.  Rank-deficient geometries fall back
    toward the anchor centroid via the least-norm solution."""
    s0 = anchors[0]
    A = 2.0 * (anchors[1:] - s0)
    b = (ranges[0] ** 2 - ranges[1:] ** 2
         + np.sum(anchors[1:] ** 2, axis=1) - s0 @ s0)
    centroid = anchors.mean(axis=0)
    try:
        p, *_ = np.linalg.lstsq(A, b - A @ centroid, rcond=1e-6)
        return centroid + p
    except np.linalg.LinAlgError:
        return centroid


def solve_position(observations: Sequence[TagObservation],
                   sensors: Sequence[SensorConfig],
                   initial_guess: Optional[Vec3] = None,
                   max_iters: int = 50, tol: float = 1e-9) -> PositionFix:
    """Gauss-Newton fit of sum_i (|p - s_i| - r_i)^2 over the tag position.

    Falls back to a damped (Levenberg) step whenever the plain step fails
    or would increase the residual, so the accepted residual never grows.
    """
    by_id = {s.id: s for s in sensors}
    seen = {o.sensor_id for o in observations}
    if len(seen) < 3:
        raise InsufficientObservations(
            f"need ranges from >=3 distinct sensors, got {len(seen)}")
    anchors = np.array([by_id[o.sensor_id].position.as_tuple() for o in observations])
    ranges = np.array([o.range for o in observations])
    tag_id = observations[0].tag_id

    if initial_guess is None:
        p = _lateration_init(anchors, ranges)
    else:
        p = np.array(initial_guess.as_tuple())

    def residuals(pos):
        d = np.linalg.norm(anchors - pos, axis=1)
        return d - ranges, d

    res, dist = residuals(p)
    cost = float(res @ res)
    converged = False
    iters = 0
    lam = 1e-3
    for iters in range(1, max_iters + 1):
        d = np.maximum(dist, 1e-9)
        J = (p - anchors) / d[:, None]
        JtJ = J.T @ J
        Jtr = J.T @ res
        step = None
        try:
            step = np.linalg.solve(JtJ, -Jtr)
        except np.linalg.LinAlgError:
            pass
        accepted = False
        if step is not None:
            cand = p + step
            cres, cdist = residuals(cand)
            ccost = float(cres @ cres)
            if ccost <= cost:
                accepted = True
        if not accepted:
            # damped retries; lambda grows until the step shrinks the cost
            for _ in range(20):
                try:
                    step = np.linalg.solve(JtJ + lam * np.eye(3), -Jtr)
                except np.linalg.LinAlgError:
                    lam *= 10
                    continue
                cand = p + step
                cres, cdist = residuals(cand)
                ccost = float(cres @ cres)
                if ccost <= cost:
                    lam = max(lam / 10, 1e-12)
                    accepted = True
                    break
                lam *= 10
            if not accepted:
                break
        p, res, dist, cost = cand, cres, cdist, ccost
        if float(np.linalg.norm(step)) < tol:
            converged = True
            break

    rms = float(np.sqrt(cost / len(res)))
    return PositionFix(tag_id, Vec3(*p.tolist()), rms, iters, converged)


# --- service ----------------------------------------------------------------

@dataclass
class TagScript:
    """Waypoint trajectory with linear interpolation plus timed button pushes."""
    tag_id: str
    waypoints: list[tuple[float, Vec3]]  # (t_seconds, position), sorted
    button_times: list[float] = field(default_factory=list)

    def position_at(self, t: float) -> Vec3:
        wp = self.waypoints
        if t <= wp[0][0]:
            return wp[0][1]
        for (t0, p0), (t1, p1) in zip(wp, wp[1:]):
            if t <= t1:
                a = (t - t0) / (t1 - t0) if t1 > t0 else 1.0
                return Vec3(p0.x + a * (p1.x - p0.x), p0.y + a * (p1.y - p0.y),
                            p0.z + a * (p1.z - p0.z))
        return wp[-1][1]


class LocalizationService:
    """Per-tag pipeline: simulate ranges -> solve -> publish to the tag topic."""

    def __init__(self, sensors: Sequence[SensorConfig], tags: Sequence[TagScript],
                 broker_host: str, broker_port: int, prefix: str,
                 publish_rate_hz: float = 10.0, seed: int = 0):
        check_sensor_geometry(sensors)
        self.sensors = list(sensors)
        self.tags = list(tags)
        self.prefix = prefix
        self.rate = publish_rate_hz
        self.seed = seed
        self._client = MqttClient(broker_host, broker_port,
                                  client_id=f"loc-{prefix}", reconnect=True)
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self.fixes_published = 0

    def start(self) -> "LocalizationService":
        self._client.connect()
        self._thread = threading.Thread(target=self._run, name="sdm-localization",
                                        daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=3.0)
        self._client.close()

    def _run(self):
        period = 1.0 / self.rate
        t0 = time.monotonic()
        tick = 0
        pending_buttons = {tag.tag_id: sorted(tag.button_times) for tag in self.tags}
        last_ts: dict[str, int] = {}
        while not self._stop.is_set():
            now = time.monotonic() - t0
            for tag in self.tags:
                true_pos = tag.position_at(now)
                obs = simulate_observations(
                    true_pos, self.sensors,
                    seed=self.seed + 7919 * tick + hash(tag.tag_id) % 1000,
                    tag_id=tag.tag_id)
                fix = solve_position(obs, self.sensors)
                ts = max(time.time_ns() // 1000, last_ts.get(tag.tag_id, 0) + 1)
                last_ts[tag.tag_id] = ts
                event = None
                due = pending_buttons[tag.tag_id]
                if due and now >= due[0]:
                    due.pop(0)
                    event = "button_push"
                msg = LocationMessage(tag.tag_id, fix.position, ts, event)
                topic = make_topic(self.prefix, TopicKind.location, tag.tag_id)
                if self._client.try_publish(topic, encode_message(msg)):
                    self.fixes_published += 1
            tick += 1
            self._stop.wait(max(0.0, (tick * period) - (time.monotonic() - t0)))
