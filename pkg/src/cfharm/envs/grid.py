"""Occupancy grid: plain-text loading, signed distances, DDA raycasting.

Grid file format: a header line ``W H cell_size`` followed by H rows of W
characters; ``#`` occupied, ``.`` free, ``P`` parking target (free).  Row
0 of the file is the top of the map (highest y).  The world frame has its
origin at the grid's lower-left corner.  Boundary cells must be occupied
(closed world).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

__all__ = ["OccupancyGrid", "ParkingSpot"]


@dataclass
class ParkingSpot:
    x: float
    y: float
    yaw: float  # orientation of the spot's long axis
    half_len: float
    half_wid: float


class OccupancyGrid:
    def __init__(self, occupancy: np.ndarray, cell_size: float, spots: list[ParkingSpot]):
        occ = np.asarray(occupancy, dtype=bool)  # indexed [ix, iy]
        if not (occ[0, :].all() and occ[-1, :].all() and occ[:, 0].all() and occ[:, -1].all()):
            raise ValueError("grid boundary cells must be occupied")
        self.occ = occ
        self.cell = float(cell_size)
        self.width, self.height = occ.shape
        self.spots = spots
        self.extent = (self.width * self.cell, self.height * self.cell)
        # signed distance to the occupied set, meters: positive in free
        # space, negative inside obstacles; sampled at cell centers.
        d_free = ndimage.distance_transform_edt(~occ) * self.cell
        d_occ = ndimage.distance_transform_edt(occ) * self.cell
        self.sdf = np.where(occ, -d_occ + 0.5 * self.cell, d_free - 0.5 * self.cell)

    # -- construction ----------------------------------------------------------

    @classmethod
    def from_text(cls, text: str) -> "OccupancyGrid":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        w, h, cell = lines[0].split()
        w, h, cell = int(w), int(h), float(cell)
        rows = lines[1 : 1 + h]
        if len(rows) != h or any(len(r) != w for r in rows):
            raise ValueError("grid body does not match header dimensions")
        occ = np.zeros((w, h), dtype=bool)
        target = np.zeros((w, h), dtype=bool)
        for file_row, line in enumerate(rows):
            iy = h - 1 - file_row  # file top row = highest y
            for ix, ch in enumerate(line):
                if ch == "#":
                    occ[ix, iy] = True
                elif ch == "P":
                    target[ix, iy] = True
                elif ch != ".":
                    raise ValueError(f"unknown grid character {ch!r}")
        spots = cls._extract_spots(target, cell)
        return cls(occ, cell, spots)

    @classmethod
    def load(cls, path: str | Path) -> "OccupancyGrid":
        return cls.from_text(Path(path).read_text())

    @staticmethod
    def _extract_spots(target: np.ndarray, cell: float) -> list[ParkingSpot]:
        labels, n = ndimage.label(target)
        spots = []
        for k in range(1, n + 1):
            ix, iy = np.nonzero(labels == k)
            cx = (ix.mean() + 0.5) * cell
            cy = (iy.mean() + 0.5) * cell
            ex = (ix.max() - ix.min() + 1) * cell / 2.0
            ey = (iy.max() - iy.min() + 1) * cell / 2.0
            if ex >= ey:
                spots.append(ParkingSpot(cx, cy, 0.0, ex, ey))
            else:
                spots.append(ParkingSpot(cx, cy, 0.5 * math.pi, ey, ex))
        spots.sort(key=lambda s: (s.x, s.y))
        return spots

    # -- queries ---------------------------------------------------------------

    def signed_distance(self, pts: np.ndarray) -> np.ndarray:
        """Bilinear sample of the signed distance field at world points."""
        pts = np.asarray(pts, dtype=np.float64)
        fx = np.clip(pts[..., 0] / self.cell - 0.5, 0.0, self.width - 1.001)
        fy = np.clip(pts[..., 1] / self.cell - 0.5, 0.0, self.height - 1.001)
        ix = fx.astype(np.int64)
        iy = fy.astype(np.int64)
        tx = fx - ix
        ty = fy - iy
        s = self.sdf
        return (
            s[ix, iy] * (1 - tx) * (1 - ty)
            + s[ix + 1, iy] * tx * (1 - ty)
            + s[ix, iy + 1] * (1 - tx) * ty
            + s[ix + 1, iy + 1] * tx * ty
        )

    def is_occupied(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        ix = np.clip((pts[..., 0] / self.cell).astype(np.int64), 0, self.width - 1)
        iy = np.clip((pts[..., 1] / self.cell).astype(np.int64), 0, self.height - 1)
        return self.occ[ix, iy]

    def raycast(
        self, origins: np.ndarray, angles: np.ndarray, max_range: float
    ) -> np.ndarray:
        """Exact DDA grid traversal; distance to the first occupied cell.

        ``origins`` (n, 2) world points inside the grid, ``angles`` (n, m)
        ray angles per origin.  Returns distances (n, m) clipped at
        ``max_range``.  Raises if any origin lies outside the grid.
        """
        origins = np.atleast_2d(np.asarray(origins, dtype=np.float64))
        angles = np.asarray(angles, dtype=np.float64)
        if angles.ndim == 1:
            angles = angles[None, :] if origins.shape[0] == 1 else angles[:, None]
        n, m = angles.shape
        if np.any(origins[:, 0] < 0) or np.any(origins[:, 1] < 0) or np.any(
            origins[:, 0] >= self.extent[0]
        ) or np.any(origins[:, 1] >= self.extent[1]):
            raise ValueError("ray origin outside the grid")

        ox = np.repeat(origins[:, 0], m) / self.cell
        oy = np.repeat(origins[:, 1], m) / self.cell
        dx = np.cos(angles).ravel()
        dy = np.sin(angles).ravel()
        k = ox.size

        ix = ox.astype(np.int64)
        iy = oy.astype(np.int64)
        step_x = np.where(dx >= 0, 1, -1)
        step_y = np.where(dy >= 0, 1, -1)
        flat_x = np.abs(dx) <= 1e-12
        flat_y = np.abs(dy) <= 1e-12
        inv_dx = 1.0 / np.where(flat_x, 1.0, dx)
        inv_dy = 1.0 / np.where(flat_y, 1.0, dy)
        # parametric distance (in cells) to the next x/y cell boundary
        t_max_x = np.where(flat_x, np.inf, ((ix + (step_x > 0)) - ox) * inv_dx)
        t_max_y = np.where(flat_y, np.inf, ((iy + (step_y > 0)) - oy) * inv_dy)
        t_dx = np.where(flat_x, np.inf, np.abs(inv_dx))
        t_dy = np.where(flat_y, np.inf, np.abs(inv_dy))

        max_t = max_range / self.cell
        dist = np.full(k, max_t)
        active = ~self.occ[ix, iy]  # rays starting inside an obstacle hit at 0
        dist[~active] = 0.0
        max_steps = self.width + self.height + 2
        for _ in range(max_steps):
            if not np.any(active):
                break
            go_x = active & (t_max_x <= t_max_y)
            go_y = active & ~go_x
            ix = ix + np.where(go_x, step_x, 0)
            iy = iy + np.where(go_y, step_y, 0)
            t = np.where(go_x, t_max_x, t_max_y)
            t_max_x = t_max_x + np.where(go_x, t_dx, 0.0)
            t_max_y = t_max_y + np.where(go_y, t_dy, 0.0)
            oob = active & ((ix < 0) | (ix >= self.width) | (iy < 0) | (iy >= self.height))
            active = active & ~oob
            beyond = active & (t >= max_t)
            active = active & ~beyond
            hit = active & self.occ[np.clip(ix, 0, self.width - 1), np.clip(iy, 0, self.height - 1)]
            dist[hit] = t[hit]
            active = active & ~hit
        return np.minimum(dist * self.cell, max_range).reshape(n, m)
