"""Full station session over MQTT: play, move, and stop a sound.

Starts the station with the bundled room config, drives the renderer
through the pub/sub API exactly as a remote UI would, and prints every
status echo.
"""

import json
import threading
import time

from sdm_station.client import MqttClient
from sdm_station.station import Station, default_config_path, load_config

cfg = load_config(default_config_path())
cfg.broker_tcp_port = 0
cfg.broker_ws_port = None
cfg.services = ["render"]

statuses = []
got = threading.Event()


def on_status(topic, payload):
    d = json.loads(payload)
    statuses.append(d)
    print(f"  status: playing={d['playing']} volume={d['volume']:.2f} "
          f"pos=({d['x']:.2f},{d['y']:.2f},{d['z']:.2f})")
    got.set()


with Station(cfg, render_realtime=False) as st:
    print(f"station up, broker on {st.broker_host}:{st.broker_port}, "
          f"sounds: {[s.id for s in cfg.sounds]}")
    sub = MqttClient(st.broker_host, st.broker_port, client_id="demo-sub",
                     on_message=on_status).connect()
    sub.subscribe(f"{cfg.prefix}/sound/tone/status")
    ui = MqttClient(st.broker_host, st.broker_port, client_id="demo-ui").connect()
    control = f"{cfg.prefix}/sound/tone/control"

    for cmd in ({"cmd": "play"},
                {"cmd": "set", "x": 0.5, "y": 0.5, "z": 1.2},
                {"cmd": "set", "x": 3.5, "y": 3.5, "z": 2.4, "volume": 0.6},
                {"cmd": "stop"}):
        got.clear()
        print(f"publish {cmd}")
        ui.publish(control, json.dumps(cmd).encode())
        got.wait(2.0)
        time.sleep(0.1)

    ui.close()
    sub.close()

print(f"{len(statuses)} status echoes; final state playing="
      f"{statuses[-1]['playing']}")
