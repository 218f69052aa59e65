"""Walk a tag through the room and solve its position from noisy ranges.

Shows the solver tracking a waypoint path with the default ceiling-sensor
geometry and the calibrated range noise.
"""

import numpy as np

from sdm_station.geometry import Vec3
from sdm_station.localization import (
    SensorConfig,
    simulate_observations,
    solve_position,
)

sensors = [SensorConfig(f"s{i}", Vec3(x, y, h), range_noise_sigma=0.08)
           for i, (x, y, h) in enumerate(
               [(0.0, 0.0, 2.9), (4.0, 0.0, 2.3),
                (4.0, 4.0, 2.9), (0.0, 4.0, 2.3)])]
print("sensors:", [(s.id, s.position.as_tuple()) for s in sensors])

waypoints = [Vec3(0.8, 0.8, 1.0), Vec3(3.2, 0.8, 1.0),
             Vec3(3.2, 3.2, 1.4), Vec3(0.8, 3.2, 1.4), Vec3(2.0, 2.0, 1.0)]

errs = []
for step in range(40):
    seg, frac = divmod(step * (len(waypoints) - 1) / 39.0, 1.0)
    a, b = waypoints[int(seg)], waypoints[min(int(seg) + 1, len(waypoints) - 1)]
    truth = Vec3(a.x + frac * (b.x - a.x), a.y + frac * (b.y - a.y),
                 a.z + frac * (b.z - a.z))
    obs = simulate_observations(truth, sensors, seed=step, tag_id="walker")
    fix = solve_position(obs, sensors)
    err = fix.position.distance_to(truth)
    errs.append(err)
    if step % 8 == 0:
        print(f"step {step:2d}: truth ({truth.x:.2f},{truth.y:.2f},{truth.z:.2f})"
              f"  fix ({fix.position.x:.2f},{fix.position.y:.2f},"
              f"{fix.position.z:.2f})  err {err:.2f} m  residual {fix.rms_residual:.3f}")

print(f"path RMSE {np.sqrt(np.mean(np.square(errs))):.2f} m over {len(errs)} fixes")
