"""Pan a tone in a circle around the room and render the 8-channel result.

Prints the active speakers and the energy-vector direction at each stop,
then writes an 8-channel WAV of the full tour.
"""

import math
import os

import numpy as np

from sdm_station.geometry import Vec3
from sdm_station.render import RendererState
from sdm_station.render.layout import default_layout, triangulate_layout
from sdm_station.render.offline import TimedCommand, render_session_to_wav
from sdm_station.render.vbap import compute_gains, intensity_direction
from sdm_station.schema import SoundCommand

SAMPLE_RATE = 48_000

layout = default_layout()
mesh = triangulate_layout(layout)
ref = layout.reference_point

print(f"{len(layout.speakers)} speakers, reference point {ref.as_tuple()}")

stops = []
for k in range(8):
    a = 2 * math.pi * k / 8
    p = Vec3(ref.x + 1.4 * math.cos(a), ref.y + 1.4 * math.sin(a),
             1.2 + 0.8 * math.sin(2 * a))
    g = compute_gains(p, layout, mesh)
    active = [layout.speakers[i].id for i in np.argsort(g)[::-1][:3] if g[i] > 1e-3]
    d = intensity_direction(g, layout)
    print(f"stop {k}: pos ({p.x:4.1f},{p.y:4.1f},{p.z:4.1f})  "
          f"active {active}  energy dir ({d.x:+.2f},{d.y:+.2f},{d.z:+.2f})")
    stops.append(p)

t = np.arange(int(0.5 * SAMPLE_RATE)) / SAMPLE_RATE
state = RendererState(layout, mesh)
state.add_source("tone", 0.4 * np.sin(2 * np.pi * 330.0 * t), loop=True)
log = [TimedCommand(0.0, "tone", SoundCommand(command="play"))]
for k, p in enumerate(stops):
    log.append(TimedCommand(0.5 * k, "tone",
                            SoundCommand(command="set", position=p)))

out = os.path.join(os.path.dirname(__file__), "panning_tour.wav")
channels = render_session_to_wav(log, state, 4.0, out)
peak = 20 * np.log10(np.max(np.abs(channels)))
print(f"wrote {out}: {channels.shape[0]} channels, peak {peak:.1f} dBFS")
