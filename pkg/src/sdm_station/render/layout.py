"""Speaker layout and the triangulated direction mesh used for 3D panning."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from ..geometry import Vec3


class LayoutError(ValueError):
    pass


@dataclass(frozen=True)
class Speaker:
    id: str
    position: Vec3


@dataclass(frozen=True)
class SpeakerLayout:
    speakers: tuple[Speaker, ...]
    reference_point: Vec3

    def __post_init__(self):
        if len(self.speakers) < 4:
            raise LayoutError("3D panning needs at least 4 speakers")
        ids = [s.id for s in self.speakers]
        if len(set(ids)) != len(ids):
            raise LayoutError("duplicate speaker ids")

    def directions(self) -> np.ndarray:
        """Unit direction of each speaker as seen from the reference point."""
        ref = np.array(self.reference_point.as_tuple())
        pos = np.array([s.position.as_tuple() for s in self.speakers])
        rel = pos - ref
        norms = np.linalg.norm(rel, axis=1)
        if np.any(norms < 1e-9):
            raise LayoutError("speaker coincides with the reference point")
        return rel / norms[:, None]


def default_layout(area: float = 4.0, low: float = 1.2, high: float = 2.7,
                   origin: Vec3 = Vec3(0.0, 0.0, 0.0)) -> SpeakerLayout:
    """Eight speakers on stands: the corners of a square room at two heights."""
    speakers = []
    corners = [(0.0, 0.0), (area, 0.0), (area, area), (0.0, area)]
    for level, z in (("low", low), ("high", high)):
        for i, (x, y) in enumerate(corners, start=1):
            speakers.append(Speaker(
                f"{level}{i}", Vec3(origin.x + x, origin.y + y, origin.z + z)))
    ref = Vec3(origin.x + area / 2, origin.y + area / 2, origin.z + (low + high) / 2)
    return SpeakerLayout(tuple(speakers), ref)


@dataclass(frozen=True)
class Mesh:
    """Convex-hull triangulation of the speaker directions."""
    triangles: tuple[tuple[int, int, int], ...]
    directions: np.ndarray = field(compare=False, default=None)


def triangulate_layout(layout: SpeakerLayout) -> Mesh:
    dirs = layout.directions()
    try:
        hull = ConvexHull(dirs)
    except QhullError as e:
        raise LayoutError(f"degenerate speaker layout: {e}") from e
    if len(hull.vertices) < len(layout.speakers):
        missing = set(range(len(layout.speakers))) - set(hull.vertices)
        raise LayoutError(f"speakers inside the direction hull: {sorted(missing)}")
    tris = tuple(tuple(int(i) for i in simplex) for simplex in hull.simplices)
    return Mesh(tris, dirs)


def euler_characteristic(mesh: Mesh) -> int:
    verts = {i for tri in mesh.triangles for i in tri}
    edges = set()
    for a, b, c in mesh.triangles:
        for e in ((a, b), (b, c), (a, c)):
            edges.add(tuple(sorted(e)))
    return len(verts) - len(edges) + len(mesh.triangles)
