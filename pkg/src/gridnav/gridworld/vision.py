"""Egocentric observations, line-of-sight occlusion, and coverage.

Visibility rule: a cell is visible from the agent iff no wall cell is
strictly crossed by the segment between the two cell centers. "Strictly
crossed" means the segment spends positive length inside the cell's
unit box, so rays squeezing exactly through a corner are not blocked.
Ray templates are precomputed per window geometry in the agent frame
(forward depth d, lateral offset l) and rotated into the world by
heading, which keeps per-step observation cost low.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grid import FREE, GOAL, LAVA, OBJECT_BASE, WALL, AgentPose, GridMap

_EPS = 1e-9


def _crossed_cells(d: int, l: int):
    """Interior cells strictly crossed by the segment (0,0) -> (d,l)."""
    cells = []
    for i in range(0, d + 1):
        lo = min(0, l) - 1
        for j in range(lo, max(0, l) + 2):
            if (i, j) in ((0, 0), (d, l)):
                continue
            # Liang-Barsky clip of P(t) = t*(d,l) against the unit box of (i,j)
            t0, t1 = 0.0, 1.0
            ok = True
            for p, (qlo, qhi) in ((d, (i - 0.5, i + 0.5)), (l, (j - 0.5, j + 0.5))):
                if p == 0:
                    if qlo > 0.0 or qhi < 0.0:
                        ok = False
                        break
                else:
                    ta, tb = qlo / p, qhi / p
                    if ta > tb:
                        ta, tb = tb, ta
                    t0, t1 = max(t0, ta), min(t1, tb)
            if ok and t1 - t0 > _EPS:
                cells.append((i, j))
    return tuple(cells)


@lru_cache(maxsize=None)
def ray_templates(depth: int, half: int):
    """Blocker lists for every offset of a (depth x 2*half+1) forward window."""
    return {
        (d, l): _crossed_cells(d, l)
        for d in range(depth)
        for l in range(-half, half + 1)
    }


@dataclass
class Observation:
    """Occlusion-masked egocentric patch; the policy input after encode().

    ``kinds[r, c]`` holds the cell code for visible cells and -1
    elsewhere; the agent sits at the bottom-center of the patch facing
    up, i.e. row k-1-d, column half+l for forward/lateral offset (d, l).
    """

    k: int
    kinds: np.ndarray
    visible: np.ndarray
    goal_class: int  # -1 when the task targets the GOAL cell
    step_frac: float

    def patch_index(self, d, l):
        return self.k - 1 - d, self.k // 2 + l

    def offsets(self):
        half = self.k // 2
        for d in range(self.k):
            for l in range(-half, half + 1):
                yield d, l

    def goal_offsets(self):
        """Forward/lateral offsets of visible goal cells."""
        goal_kind = GOAL if self.goal_class < 0 else OBJECT_BASE + self.goal_class
        out = []
        for d, l in self.offsets():
            r, c = self.patch_index(d, l)
            if self.visible[r, c] and self.kinds[r, c] == goal_kind:
                out.append((d, l))
        return out

    def encode(self, n_classes: int) -> np.ndarray:
        """Flat float vector: per-cell visibility + one-hot kind channels,
        then goal-class one-hot and the episode step fraction."""
        k = self.k
        n_ch = 5 + n_classes
        patch = np.zeros((k, k, n_ch))
        vis = self.visible
        patch[:, :, 0] = vis
        for ch, kind in enumerate((FREE, WALL, LAVA, GOAL), start=1):
            patch[:, :, ch] = vis & (self.kinds == kind)
        for cls in range(n_classes):
            patch[:, :, 5 + cls] = vis & (self.kinds == OBJECT_BASE + cls)
        goal_onehot = np.zeros(n_classes)
        if self.goal_class >= 0:
            goal_onehot[self.goal_class] = 1.0
        return np.concatenate([patch.ravel(), goal_onehot, [self.step_frac]])


def encoded_dim(k: int, n_classes: int) -> int:
    return k * k * (5 + n_classes) + n_classes + 1


def world_cell(pose: AgentPose, d: int, l: int):
    fx, fy = pose.forward_vec()
    rx, ry = pose.right_vec()
    return pose.x + d * fx + l * rx, pose.y + d * fy + l * ry


def visible_offsets(grid: GridMap, pose: AgentPose, depth: int, half: int):
    """Offsets (d, l) of the forward window visible from ``pose``."""
    templates = ray_templates(depth, half)
    out = []
    for (d, l), blockers in templates.items():
        x, y = world_cell(pose, d, l)
        if not grid.in_bounds(x, y):
            continue
        clear = True
        for bd, bl in blockers:
            bx, by = world_cell(pose, bd, bl)
            if grid.cells[by, bx] == WALL:
                clear = False
                break
        if clear:
            out.append((d, l))
    return out


def observe(grid: GridMap, pose: AgentPose, k: int, step_frac: float = 0.0) -> Observation:
    kinds = np.full((k, k), -1, dtype=np.int8)
    vis = np.zeros((k, k), dtype=bool)
    half = k // 2
    for d, l in visible_offsets(grid, pose, k, half):
        x, y = world_cell(pose, d, l)
        r, c = k - 1 - d, half + l
        vis[r, c] = True
        kinds[r, c] = grid.cells[y, x]
    goal_class = -1 if grid.goal_class is None else grid.goal_class
    return Observation(k, kinds, vis, goal_class, step_frac)


@dataclass
class CoverageTracker:
    covered: np.ndarray
    free_total: int

    @classmethod
    def for_grid(cls, grid: GridMap):
        return cls(np.zeros((grid.height, grid.width), dtype=bool), grid.free_total())

    @property
    def count(self) -> int:
        return int(np.sum(self.covered))

    def fraction(self) -> float:
        return self.count / self.free_total if self.free_total else 0.0


def update_coverage(tracker: CoverageTracker, grid: GridMap, pose: AgentPose, radius: int = 3):
    """Mark free cells within the forward field of view (Chebyshev radius,
    line-of-sight visible) as covered. Monotone and idempotent."""
    for d, l in visible_offsets(grid, pose, radius + 1, radius):
        x, y = world_cell(pose, d, l)
        if grid.cells[y, x] == FREE:
            tracker.covered[y, x] = True
    return tracker
