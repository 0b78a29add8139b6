"""Planar geometry on a projected grid (metres).

Everything here works on plain Euclidean distance. Inputs are assumed to share
one projected CRS; nothing is ever reprojected.

Catchment membership is boundary-inclusive: a point at exactly ``radius``
from the centre is inside.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

from finex.errors import InsufficientPointsError, InvalidParameterError


@dataclass(frozen=True)
class ProjPoint:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidParameterError(f"non-finite coordinate ({self.x}, {self.y})")


def distance(a: ProjPoint, b: ProjPoint) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


def shoelace_area(ring: Sequence[ProjPoint]) -> float:
    """Unsigned polygon area. ``ring`` may or may not repeat its first vertex."""
    pts = list(ring)
    if len(pts) > 1 and pts[0] == pts[-1]:
        pts = pts[:-1]
    n = len(pts)
    acc = 0.0
    for i in range(n):
        p, q = pts[i], pts[(i + 1) % n]
        acc += p.x * q.y - q.x * p.y
    return abs(acc) / 2.0


def _orient(p, q, r):
    v = (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x)
    return (v > 0) - (v < 0)


def _on_segment(p, q, r):
    return min(p.x, r.x) <= q.x <= max(p.x, r.x) and min(p.y, r.y) <= q.y <= max(p.y, r.y)


def _segments_intersect(p1, p2, q1, q2) -> bool:
    o1, o2 = _orient(p1, p2, q1), _orient(p1, p2, q2)
    o3, o4 = _orient(q1, q2, p1), _orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and _on_segment(p1, q1, p2):
        return True
    if o2 == 0 and _on_segment(p1, q2, p2):
        return True
    if o3 == 0 and _on_segment(q1, p1, q2):
        return True
    if o4 == 0 and _on_segment(q1, p2, q2):
        return True
    return False


def ring_is_simple(ring: Sequence[ProjPoint]) -> bool:
    """True when the closed ring has no self-intersections (O(n^2) check)."""
    pts = list(ring)
    if pts[0] == pts[-1]:
        pts = pts[:-1]
    n = len(pts)
    if n < 3:
        return False
    edges = [(pts[i], pts[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            # adjacent edges share a vertex by construction
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_intersect(*edges[i], *edges[j]):
                return False
    return True


@dataclass(frozen=True)
class StudyArea:
    """A closed, simple polygon and its area in square metres."""

    boundary: tuple[ProjPoint, ...]
    area_m2: float

    def __post_init__(self):
        ring = self.boundary
        if len(ring) < 4 or ring[0] != ring[-1]:
            raise InvalidParameterError("study area ring must be closed (first vertex repeated last)")
        if not ring_is_simple(ring):
            raise InvalidParameterError("study area ring is self-intersecting")
        if not self.area_m2 > 0:
            raise InvalidParameterError("study area must have positive area")
        expected = shoelace_area(ring)
        if abs(self.area_m2 - expected) > 1e-6 * expected:
            raise InvalidParameterError(
                f"declared area {self.area_m2} disagrees with polygon area {expected}"
            )

    @classmethod
    def from_ring(cls, ring: Iterable[ProjPoint]) -> "StudyArea":
        pts = [p if isinstance(p, ProjPoint) else ProjPoint(*p) for p in ring]
        if pts and pts[0] != pts[-1]:
            pts.append(pts[0])
        return cls(tuple(pts), shoelace_area(pts))

    @classmethod
    def bounding_box(cls, points: Sequence[ProjPoint]) -> "StudyArea":
        xmin, ymin, xmax, ymax = bbox(points)
        return cls.from_ring(
            [ProjPoint(xmin, ymin), ProjPoint(xmax, ymin), ProjPoint(xmax, ymax), ProjPoint(xmin, ymax)]
        )


def bbox(points: Sequence[ProjPoint]) -> tuple[float, float, float, float]:
    if not points:
        raise InsufficientPointsError("bounding box of an empty point set")
    xs = [p.x for p in points]
    ys = [p.y for p in points]
    return min(xs), min(ys), max(xs), max(ys)


def points_within(center: ProjPoint, radius: float, points: Sequence[ProjPoint]) -> list[int]:
    """Indices of ``points`` within ``radius`` of ``center`` (inclusive), ascending."""
    if not radius > 0:
        raise InvalidParameterError(f"radius must be > 0, got {radius}")
    return [i for i, p in enumerate(points) if distance(center, p) <= radius]


def nearest_neighbor(query_index: int, points: Sequence[ProjPoint]) -> tuple[int, float]:
    """Closest other point to ``points[query_index]``.

    Ties go to the lowest index. The query itself is never returned, even if
    another point sits on top of it.
    """
    if len(points) < 2:
        raise InsufficientPointsError("nearest neighbour needs at least 2 points")
    q = points[query_index]
    best_i, best_d = -1, math.inf
    for i, p in enumerate(points):
        if i == query_index:
            continue
        d = distance(q, p)
        if d < best_d:
            best_i, best_d = i, d
    return best_i, best_d


class GridIndex:
    """Uniform-grid bucket index over a fixed point list.

    Results are identical to :func:`points_within` and :func:`nearest_neighbor`
    (same distance function, same tie rule); the grid only prunes candidates.
    """

    def __init__(self, points: Sequence[ProjPoint], cell_size: float | None = None):
        self.points = list(points)
        if cell_size is None:
            cell_size = self._default_cell(self.points)
        if not cell_size > 0:
            raise InvalidParameterError("cell_size must be > 0")
        self.cell = float(cell_size)
        self._cells: dict[tuple[int, int], list[int]] = defaultdict(list)
        for i, p in enumerate(self.points):
            self._cells[self._key(p.x, p.y)].append(i)
        if self._cells:
            kx = [k[0] for k in self._cells]
            ky = [k[1] for k in self._cells]
            self._span = max(max(kx) - min(kx), max(ky) - min(ky)) + 1
        else:
            self._span = 0

    @staticmethod
    def _default_cell(points):
        if len(points) < 2:
            return 1.0
        xmin, ymin, xmax, ymax = bbox(points)
        extent = max(xmax - xmin, ymax - ymin)
        if extent <= 0:
            return 1.0
        return extent / max(1.0, math.sqrt(len(points)))

    def _key(self, x, y):
        return (math.floor(x / self.cell), math.floor(y / self.cell))

    def within(self, center: ProjPoint, radius: float) -> list[int]:
        if not radius > 0:
            raise InvalidParameterError(f"radius must be > 0, got {radius}")
        # one cell of padding absorbs rounding at the box edge
        x0, y0 = self._key(center.x - radius, center.y - radius)
        x1, y1 = self._key(center.x + radius, center.y + radius)
        out = []
        for cx in range(x0 - 1, x1 + 2):
            for cy in range(y0 - 1, y1 + 2):
                for i in self._cells.get((cx, cy), ()):
                    if distance(center, self.points[i]) <= radius:
                        out.append(i)
        out.sort()
        return out

    def _ring(self, cx, cy, r):
        if r == 0:
            yield (cx, cy)
            return
        for dx in range(-r, r + 1):
            yield (cx + dx, cy - r)
            yield (cx + dx, cy + r)
        for dy in range(-r + 1, r):
            yield (cx - r, cy + dy)
            yield (cx + r, cy + dy)

    def nearest(self, query_index: int) -> tuple[int, float]:
        if len(self.points) < 2:
            raise InsufficientPointsError("nearest neighbour needs at least 2 points")
        q = self.points[query_index]
        cx, cy = self._key(q.x, q.y)
        best_i, best_d = -1, math.inf
        r = 0
        while True:
            for key in self._ring(cx, cy, r):
                for i in self._cells.get(key, ()):
                    if i == query_index:
                        continue
                    d = distance(q, self.points[i])
                    if d < best_d or (d == best_d and i < best_i):
                        best_i, best_d = i, d
            # anything beyond ring r+1 is at least r*cell away; stop one ring late
            if best_i >= 0 and best_d < (r - 1) * self.cell:
                break
            if r > self._span + 1:
                break
            r += 1
        return best_i, best_d
