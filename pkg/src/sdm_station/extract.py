"""Microphone-array extraction: simulated capture, delay-and-sum beamforming,
Wiener post-filtering, and the zone-selection service.

The array model is geometric: per-mic propagation delay (fractional,
linear interpolation), 1/distance spreading, cardioid directivity, and
independent Gaussian sensor noise.  Zone selection steers a beam at the
zone center; the noise reference for the post-filter is a second beam
steered at the centroid of the non-selected zones.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .client import MqttClient
from .geometry import Vec3

log = logging.getLogger("sdm.extract")

SPEED_OF_SOUND = 343.0
SAMPLE_RATE = 48_000
STFT_FRAME = 1024
STFT_HOP = 512
SPECTRAL_FLOOR = 0.05
MIN_MIC_DISTANCE = 0.1


@dataclass(frozen=True)
class Mic:
    id: str
    position: Vec3
    orientation: Vec3 = Vec3(0.0, 0.0, -1.0)  # facing direction
    directivity: str = "omni"  # omni | cardioid

    def __post_init__(self):
        if self.directivity not in ("omni", "cardioid"):
            raise ValueError(f"unknown directivity {self.directivity!r}")


@dataclass(frozen=True)
class MicArrayConfig:
    mics: tuple[Mic, ...]
    sample_rate: int = SAMPLE_RATE
    speed_of_sound: float = SPEED_OF_SOUND

    def __post_init__(self):
        if len(self.mics) < 2:
            raise ValueError("array needs at least 2 microphones")


@dataclass(frozen=True)
class Zone:
    id: str
    center: Vec3
    radius: float


@dataclass
class ExtractionResult:
    enhanced: np.ndarray
    snr_in_db: float
    snr_out_db: float
    zone_id: str


def default_array(area: float = 4.0, height: float = 2.5,
                  origin: Vec3 = Vec3(0.0, 0.0, 0.0)) -> MicArrayConfig:
    """16 mics at 8 points around the square: directional pairs facing
    inward and outward at each point."""
    cx, cy = origin.x + area / 2, origin.y + area / 2
    mics = []
    # 8 points: 4 corners + 4 edge midpoints
    pts = [(0.0, 0.0), (area / 2, 0.0), (area, 0.0), (area, area / 2),
           (area, area), (area / 2, area), (0.0, area), (0.0, area / 2)]
    for i, (x, y) in enumerate(pts, start=1):
        pos = Vec3(origin.x + x, origin.y + y, origin.z + height)
        inward = Vec3(cx - pos.x, cy - pos.y, -0.5).normalized()
        outward = Vec3(-(cx - pos.x), -(cy - pos.y), -0.5).normalized()
        mics.append(Mic(f"m{i}in", pos, inward, "cardioid"))
        mics.append(Mic(f"m{i}out", pos, outward, "cardioid"))
    return MicArrayConfig(tuple(mics))


def default_zones(area: float = 4.0, origin: Vec3 = Vec3(0.0, 0.0, 0.0),
                  z: float = 1.2) -> list[Zone]:
    """Four quadrant zones at talking height."""
    q = area / 4
    return [
        Zone("zone1", Vec3(origin.x + q, origin.y + q, origin.z + z), q),
        Zone("zone2", Vec3(origin.x + 3 * q, origin.y + q, origin.z + z), q),
        Zone("zone3", Vec3(origin.x + 3 * q, origin.y + 3 * q, origin.z + z), q),
        Zone("zone4", Vec3(origin.x + q, origin.y + 3 * q, origin.z + z), q),
    ]


def _fractional_delay(signal: np.ndarray, delay_samples: float,
                      n_out: int) -> np.ndarray:
    """Delay by a (possibly fractional) number of samples, linear interp."""
    idx = np.arange(n_out) - delay_samples
    i0 = np.floor(idx).astype(np.int64)
    frac = idx - i0
    out = np.zeros(n_out)
    valid0 = (i0 >= 0) & (i0 < len(signal))
    valid1 = (i0 + 1 >= 0) & (i0 + 1 < len(signal))
    out[valid0] += (1.0 - frac[valid0]) * signal[i0[valid0]]
    out[valid1] += frac[valid1] * signal[i0[valid1] + 1]
    return out


def _mic_gain(mic: Mic, source_pos: Vec3) -> float:
    d = max(source_pos.distance_to(mic.position), MIN_MIC_DISTANCE)
    g = 1.0 / d
    if mic.directivity == "cardioid":
        to_src = (source_pos - mic.position).normalized()
        cos_theta = to_src.dot(mic.orientation.normalized())
        g *= (1.0 + cos_theta) / 2.0
    return g


def simulate_capture(sources: Sequence[tuple[Vec3, np.ndarray]],
                     array: MicArrayConfig, diffuse_noise_level_dbfs: float,
                     seed: int, n_samples: Optional[int] = None,
                     return_components: bool = False):
    """Multichannel capture of point sources plus per-mic Gaussian noise.

    Returns (n_mics, n_samples); with return_components also a
    (n_sources, n_mics, n_samples) array of the clean per-source images.
    """
    if n_samples is None:
        n_samples = max(len(pcm) for _, pcm in sources) if sources else 0
    n_mics = len(array.mics)
    capture = np.zeros((n_mics, n_samples))
    components = np.zeros((len(sources), n_mics, n_samples)) if return_components else None
    for si, (pos, pcm) in enumerate(sources):
        for mi, mic in enumerate(array.mics):
            delay_s = pos.distance_to(mic.position) / array.speed_of_sound
            delayed = _fractional_delay(pcm, delay_s * array.sample_rate, n_samples)
            contrib = _mic_gain(mic, pos) * delayed
            capture[mi] += contrib
            if components is not None:
                components[si, mi] = contrib
    if diffuse_noise_level_dbfs > -200:
        rng = np.random.default_rng(seed)
        sigma = 10.0 ** (diffuse_noise_level_dbfs / 20.0)
        capture += rng.normal(0.0, sigma, capture.shape)
    if return_components:
        return capture, components
    return capture


def steering_delays(target: Vec3, array: MicArrayConfig) -> np.ndarray:
    """Align-to-latest delays in seconds: non-negative, zero for the
    farthest mic."""
    dists = np.array([target.distance_to(m.position) for m in array.mics])
    return (dists.max() - dists) / array.speed_of_sound


def delay_and_sum(capture: np.ndarray, delays_s: np.ndarray,
                  weights: Optional[np.ndarray] = None,
                  sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    """Weighted delay-and-sum; weights default uniform and are normalized
    to sum to 1 (unit gain on the steered source)."""
    n_mics, n_samples = capture.shape
    if len(delays_s) != n_mics:
        raise ValueError("delay count must match channel count")
    if weights is None:
        weights = np.full(n_mics, 1.0 / n_mics)
    else:
        weights = np.asarray(weights, dtype=float)
        weights = weights / weights.sum()
    out = np.zeros(n_samples)
    for mi in range(n_mics):
        out += weights[mi] * _fractional_delay(capture[mi],
                                               delays_s[mi] * sample_rate, n_samples)
    return out


def _stft_frames(x: np.ndarray, n: int, frame: int, hop: int):
    pad = frame
    y = np.zeros(pad + n + pad + frame)
    y[pad:pad + len(x[:n])] = x[:n]
    starts = range(0, len(y) - frame, hop)
    return y, list(starts)


def wiener_gains(beam_out: np.ndarray, noise_reference: np.ndarray,
                 frame: int = STFT_FRAME, hop: int = STFT_HOP,
                 floor: float = SPECTRAL_FLOOR) -> np.ndarray:
    """Per-frame Wiener gain H = clamp((Pyy - Pnn) / Pyy, floor, 1)."""
    if frame & (frame - 1):
        raise ValueError("frame must be a power of two")
    if hop != frame // 2:
        raise ValueError("hop must be frame/2 for COLA reconstruction")
    n = len(beam_out)
    window = np.hanning(frame)
    y, starts = _stft_frames(beam_out, n, frame, hop)
    r, _ = _stft_frames(noise_reference, n, frame, hop)
    gains = np.empty((len(starts), frame // 2 + 1))
    for fi, start in enumerate(starts):
        Pyy = np.abs(np.fft.rfft(y[start:start + frame] * window)) ** 2
        Pnn = np.abs(np.fft.rfft(r[start:start + frame] * window)) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            H = np.where(Pyy > 0, np.maximum(Pyy - Pnn, 0.0) / Pyy, floor)
        gains[fi] = np.clip(H, floor, 1.0)
    return gains


def apply_stft_gains(x: np.ndarray, gains: np.ndarray,
                     frame: int = STFT_FRAME, hop: int = STFT_HOP) -> np.ndarray:
    """Filter x through per-frame spectral gains, Hann overlap-add."""
    n = len(x)
    window = np.hanning(frame)
    y, starts = _stft_frames(x, n, frame, hop)
    out = np.zeros(len(y))
    wsum = np.zeros(len(y))
    for fi, start in enumerate(starts):
        Y = np.fft.rfft(y[start:start + frame] * window)
        seg = np.fft.irfft(gains[fi] * Y, frame) * window
        out[start:start + frame] += seg
        wsum[start:start + frame] += window ** 2
    out = np.divide(out, np.maximum(wsum, 1e-12))
    pad = frame
    return out[pad:pad + n]


def wiener_postfilter(beam_out: np.ndarray, noise_reference: np.ndarray,
                      frame: int = STFT_FRAME, hop: int = STFT_HOP,
                      floor: float = SPECTRAL_FLOOR) -> np.ndarray:
    """Spectral-subtraction Wiener filtering of the beam output against a
    noise reference beam; per-bin output magnitude never exceeds input."""
    gains = wiener_gains(beam_out, noise_reference, frame, hop, floor)
    return apply_stft_gains(beam_out, gains, frame, hop)


def synthetic_talker(n: int, f0: float, am_hz: float = 3.0,
                     n_partials: int = 16, rate: int = SAMPLE_RATE,
                     seed: int = 0) -> np.ndarray:
    """Voice-like test signal: harmonic complex with 1/k partial rolloff,
    slow amplitude modulation, and a little breath noise."""
    rng = np.random.default_rng(seed)
    t = np.arange(n) / rate
    x = np.zeros(n)
    for k in range(1, n_partials + 1):
        if k * f0 > rate / 2 * 0.9:
            break
        x += np.sin(2 * np.pi * k * f0 * t + rng.uniform(0, 2 * np.pi)) / k
    am = 0.55 + 0.45 * np.sin(2 * np.pi * am_hz * t + rng.uniform(0, 2 * np.pi))
    x = x * am + 0.01 * rng.normal(0.0, 1.0, n)
    return 0.3 * x / np.max(np.abs(x))


def matched_weights(target: Vec3, array: MicArrayConfig) -> np.ndarray:
    """Weights proportional to each mic's squared amplitude gain for the
    target: emphasizes the mics that actually hear it."""
    a = np.array([_mic_gain(m, target) for m in array.mics])
    return a ** 2


def complement_centroid(zones: Sequence[Zone], zone_id: str) -> Optional[Vec3]:
    others = [z for z in zones if z.id != zone_id]
    if not others:
        return None
    return Vec3(float(np.mean([z.center.x for z in others])),
                float(np.mean([z.center.y for z in others])),
                float(np.mean([z.center.z for z in others])))


# The zone pipeline uses a longer analysis frame than the bare post-filter
# default: neighbouring talkers sit only tens of Hz apart, so the mask
# needs finer frequency resolution to separate their harmonics.
ZONE_STFT_FRAME = 4096


def extract_zone(capture: np.ndarray, array: MicArrayConfig, zones: Sequence[Zone],
                 zone_id: str, weights: Optional[np.ndarray] = None,
                 postfilter: bool = True, return_gains: bool = False,
                 frame: int = ZONE_STFT_FRAME):
    """Beam at the selected zone center, Wiener-filtered against reference
    beams steered at each non-selected zone (per-bin worst case)."""
    selected = next((z for z in zones if z.id == zone_id), None)
    if selected is None:
        raise KeyError(zone_id)
    if weights is None:
        weights = matched_weights(selected.center, array)
    beam = delay_and_sum(capture, steering_delays(selected.center, array),
                         weights, array.sample_rate)
    others = [z for z in zones if z.id != zone_id] if postfilter else []
    if not others:
        return (beam, None) if return_gains else beam
    per_ref = []
    for other in others:
        ref = delay_and_sum(capture, steering_delays(other.center, array),
                            matched_weights(other.center, array),
                            array.sample_rate)
        per_ref.append(wiener_gains(beam, ref, frame=frame, hop=frame // 2))
    gains = np.min(per_ref, axis=0)
    out = apply_stft_gains(beam, gains, frame=frame, hop=frame // 2)
    return (out, gains) if return_gains else out


class ExtractionService:
    """Zone selection over the control topic; status carries SNR estimates."""

    def __init__(self, array: MicArrayConfig, zones: Sequence[Zone],
                 broker_host: str, broker_port: int, prefix: str,
                 capture: Optional[np.ndarray] = None,
                 components: Optional[np.ndarray] = None,
                 zone_of_source=None, out_dir: Optional[str] = None):
        self.array = array
        self.zones = list(zones)
        self.prefix = prefix
        self.capture = capture
        self.components = components  # (n_sources, n_mics, n_samples) clean images
        self.zone_of_source = zone_of_source or {}
        self.out_dir = out_dir
        self.results: list[ExtractionResult] = []
        self._lock = threading.Lock()
        self._client = MqttClient(broker_host, broker_port,
                                  client_id=f"extract-{prefix}", reconnect=True,
                                  on_message=self._on_control)

    def start(self) -> "ExtractionService":
        self._client.connect()
        self._client.subscribe(f"{self.prefix}/extract/control")
        return self

    def stop(self):
        self._client.close()

    def _status(self, payload: dict):
        self._client.try_publish(f"{self.prefix}/extract/status",
                                 json.dumps(payload, separators=(",", ":")).encode())

    def _on_control(self, topic: str, payload: bytes):
        try:
            d = json.loads(payload.decode("utf-8"))
            zone_id = d["zone_id"]
        except (ValueError, KeyError, UnicodeDecodeError):
            self._status({"error": "malformed control payload"})
            return
        if not any(z.id == zone_id for z in self.zones):
            self._status({"error": "unknown zone", "zone_id": str(zone_id)})
            return
        if self.capture is None:
            self._status({"error": "no active capture", "zone_id": zone_id})
            return
        with self._lock:
            result = self.process(zone_id)
        self._status({"zone_id": zone_id,
                      "snr_in_db": round(result.snr_in_db, 3),
                      "snr_out_db": round(result.snr_out_db, 3)})

    def process(self, zone_id: str) -> ExtractionResult:
        enhanced, gains = extract_zone(self.capture, self.array, self.zones,
                                       zone_id, return_gains=True)
        snr_in, snr_out = self._snr_estimates(zone_id, gains)
        result = ExtractionResult(enhanced, snr_in, snr_out, zone_id)
        self.results.append(result)
        if self.out_dir is not None:
            from .wavio import write_wav  # local import avoids cycle at module load
            write_wav(f"{self.out_dir}/extract_{zone_id}.wav",
                      self.array.sample_rate, enhanced)
        return result

    def _snr_estimates(self, zone_id: str, gains) -> tuple[float, float]:
        """Target-vs-rest power ratios: input is the best single mic, output
        is the enhanced signal with the same processing applied to the
        clean source images (shadow filtering, since the post-filter gain is
        signal-dependent)."""
        if self.components is None:
            return float("nan"), float("nan")
        target_idx = [i for i, z in self.zone_of_source.items() if z == zone_id]
        other_idx = [i for i in range(len(self.components)) if i not in target_idx]
        mix_t = self.components[target_idx].sum(axis=0)
        mix_o = self.components[other_idx].sum(axis=0)
        pt = np.mean(mix_t ** 2, axis=-1)
        po = np.mean(mix_o ** 2, axis=-1)
        snr_in = float(np.max(10.0 * np.log10(np.maximum(pt, 1e-18) /
                                              np.maximum(po, 1e-18))))
        out_t, out_o = shadow_outputs(self.array, self.zones, zone_id,
                                      mix_t, mix_o, gains)
        snr_out = 10.0 * np.log10(max(float(np.mean(out_t ** 2)), 1e-18) /
                                  max(float(np.mean(out_o ** 2)), 1e-18))
        return snr_in, float(snr_out)


def shadow_outputs(array: MicArrayConfig, zones: Sequence[Zone], zone_id: str,
                   target_capture: np.ndarray, other_capture: np.ndarray,
                   gains: Optional[np.ndarray],
                   frame: int = ZONE_STFT_FRAME) -> tuple[np.ndarray, np.ndarray]:
    """Run target and interference images through the same beamforming path
    and (when present) the same post-filter mask."""
    sel = next(z for z in zones if z.id == zone_id)
    delays = steering_delays(sel.center, array)
    weights = matched_weights(sel.center, array)
    out_t = delay_and_sum(target_capture, delays, weights, array.sample_rate)
    out_o = delay_and_sum(other_capture, delays, weights, array.sample_rate)
    if gains is not None:
        out_t = apply_stft_gains(out_t, gains, frame=frame, hop=frame // 2)
        out_o = apply_stft_gains(out_o, gains, frame=frame, hop=frame // 2)
    return out_t, out_o
