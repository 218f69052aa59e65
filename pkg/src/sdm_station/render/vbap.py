"""Amplitude panning over a triangulated speaker mesh.

A source direction is resolved to the mesh triangle containing it, the
3x3 system [u1 u2 u3] g = d is solved for the triplet gains, negatives
are clamped and the vector rescaled to unit energy.  A source sitting at
the listening center gets an explicit equal-gain distribution.
"""

from __future__ import annotations

import logging

import numpy as np

from ..geometry import Vec3
from .layout import Mesh, SpeakerLayout

log = logging.getLogger("sdm.render")

CENTER_EPS = 1e-9
MIN_DISTANCE = 0.5  # meters; attenuation clamps below this


def distance_attenuation(distance: float) -> float:
    return 1.0 / max(distance, MIN_DISTANCE)


def compute_gains(source_pos: Vec3, layout: SpeakerLayout, mesh: Mesh) -> np.ndarray:
    """Per-speaker gains, unit energy (sum of squares == 1)."""
    n = len(layout.speakers)
    ref = np.array(layout.reference_point.as_tuple())
    rel = np.array(source_pos.as_tuple()) - ref
    dist = float(np.linalg.norm(rel))
    if dist <= CENTER_EPS:
        return np.full(n, 1.0 / np.sqrt(n))
    d = rel / dist

    best_tri = None
    best_g = None
    best_min = -np.inf
    for tri in mesh.triangles:
        basis = mesh.directions[list(tri)].T  # columns are speaker directions
        try:
            g = np.linalg.solve(basis, d)
        except np.linalg.LinAlgError:
            continue
        gmin = float(g.min())
        if gmin > best_min:
            best_min = gmin
            best_tri = tri
            best_g = g
        if gmin >= -1e-9:
            break
    if best_tri is None:
        raise RuntimeError("no usable triangle in mesh")
    if best_min < -1e-9:
        # direction outside the hull (numerical boundary or steep elevation):
        # fall back to the triangle that violates least
        log.debug("direction %s outside mesh, min coefficient %.3g", d, best_min)
    g = np.clip(best_g, 0.0, None)
    norm = float(np.linalg.norm(g))
    if norm <= 0.0:
        # pathological fallback: nearest single speaker
        nearest = int(np.argmax(mesh.directions @ d))
        gains = np.zeros(n)
        gains[nearest] = 1.0
        return gains
    gains = np.zeros(n)
    for idx, gi in zip(best_tri, g / norm):
        gains[idx] = gi
    return gains


def intensity_direction(gains: np.ndarray, layout: SpeakerLayout) -> Vec3:
    """Energy-weighted mean speaker direction; objective stand-in for the
    perceived source direction."""
    gains = np.asarray(gains, dtype=float)
    energy = float(np.sum(gains ** 2))
    if energy <= 0.0:
        raise ValueError("zero gains have no direction")
    dirs = layout.directions()
    v = (gains ** 2) @ dirs
    norm = float(np.linalg.norm(v))
    if norm <= 1e-12:
        raise ValueError("gain distribution has no net direction")
    v /= norm
    return Vec3(float(v[0]), float(v[1]), float(v[2]))
