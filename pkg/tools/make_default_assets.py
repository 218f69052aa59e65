"""Regenerate the bundled default station config and its sound files."""

import json
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from sdm_station.extract import default_array, default_zones  # noqa: E402
from sdm_station.render.engine import SAMPLE_RATE  # noqa: E402
from sdm_station.wavio import write_wav  # noqa: E402

DATA = os.path.join(os.path.dirname(__file__), "..", "src", "sdm_station", "data")


def tone(freq, seconds=1.0, rate=SAMPLE_RATE):
    t = np.arange(int(seconds * rate)) / rate
    env = np.minimum(1.0, np.minimum(t / 0.01, (seconds - t) / 0.01))
    return 0.5 * env * np.sin(2 * np.pi * freq * t)


def chirp(f0, f1, seconds=1.0, rate=SAMPLE_RATE):
    t = np.arange(int(seconds * rate)) / rate
    phase = 2 * np.pi * (f0 * t + (f1 - f0) * t ** 2 / (2 * seconds))
    env = np.minimum(1.0, np.minimum(t / 0.01, (seconds - t) / 0.01))
    return 0.5 * env * np.sin(phase)


def main():
    os.makedirs(os.path.join(DATA, "sounds"), exist_ok=True)
    write_wav(os.path.join(DATA, "sounds", "tone440.wav"), SAMPLE_RATE,
              tone(440.0), dtype="int16")
    write_wav(os.path.join(DATA, "sounds", "chirp.wav"), SAMPLE_RATE,
              chirp(200.0, 2000.0), dtype="int16")

    area, low, high = 4.0, 1.2, 2.7
    corners = [(0.0, 0.0), (area, 0.0), (area, area), (0.0, area)]
    speakers = []
    for level, z in (("low", low), ("high", high)):
        for i, (x, y) in enumerate(corners, start=1):
            speakers.append({"id": f"{level}{i}", "position": [x, y, z]})
    # alternating mount heights keep the solver well conditioned in z
    sensor_heights = [2.9, 2.3, 2.9, 2.3]
    sensors = [{"id": f"sensor{i}", "position": [x, y, h],
                "range_noise_sigma": 0.08}
               for i, ((x, y), h) in enumerate(zip(corners, sensor_heights), start=1)]
    mics = [{"id": m.id, "position": list(m.position.as_tuple()),
             "orientation": [round(v, 6) for v in m.orientation.as_tuple()],
             "directivity": m.directivity}
            for m in default_array(area).mics]
    zones = [{"id": z.id, "center": list(z.center.as_tuple()), "radius": z.radius}
             for z in default_zones(area)]

    config = {
        "prefix": "UTokyo/IREF",
        "broker": {"embedded": True, "host": "127.0.0.1",
                   "tcp_port": 1883, "ws_port": 8083},
        "room": {"origin": [0, 0, 0], "size": [area, area, 3.0]},
        "reference_point": [area / 2, area / 2, (low + high) / 2],
        "speakers": speakers,
        "sensors": sensors,
        "tags": [
            {"id": "tag1",
             "waypoints": [{"t": 0.0, "position": [1.0, 1.0, 1.0]},
                           {"t": 10.0, "position": [3.0, 3.0, 1.0]},
                           {"t": 20.0, "position": [1.0, 1.0, 1.0]}],
             "button_times": []},
            {"id": "tag2",
             "waypoints": [{"t": 0.0, "position": [2.0, 2.0, 1.2]}],
             "button_times": []},
        ],
        "microphones": mics,
        "zones": zones,
        "sounds": [
            {"id": "tone", "file": "sounds/tone440.wav", "loop": True},
            {"id": "chirp", "file": "sounds/chirp.wav", "loop": False},
        ],
        "services": ["localization", "render", "extraction"],
    }
    with open(os.path.join(DATA, "default_station.json"), "w") as f:
        json.dump(config, f, indent=2)
        f.write("\n")
    print("assets written to", DATA)


if __name__ == "__main__":
    main()
