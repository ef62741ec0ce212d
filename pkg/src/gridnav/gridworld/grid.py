"""Grid maps, procedural task generators, and the ASCII map format.

Cells are int8 codes in a (height, width) array indexed [y, x]:
FREE, WALL, LAVA, GOAL, and OBJECT_BASE + class for semantic objects.
Object cells and walls are not walkable; lava is walkable but ends the
episode. The map border is always wall and every generated map is
solvable from its start pose.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FREE = 0
WALL = 1
LAVA = 2
GOAL = 3
OBJECT_BASE = 4

NORTH, EAST, SOUTH, WEST = 0, 1, 2, 3
HEADING_VECS = ((0, -1), (1, 0), (0, 1), (-1, 0))
HEADING_GLYPHS = "^>v<"

TASK_EMPTY = "empty"
TASK_FOUR_ROOMS = "four_rooms"
TASK_LAVA = "lava"
TASK_SEMANTIC = "semantic"
TASKS = (TASK_EMPTY, TASK_FOUR_ROOMS, TASK_LAVA, TASK_SEMANTIC)


@dataclass
class AgentPose:
    x: int
    y: int
    heading: int

    def forward_vec(self):
        return HEADING_VECS[self.heading]

    def right_vec(self):
        return HEADING_VECS[(self.heading + 1) % 4]


@dataclass
class GridMap:
    width: int
    height: int
    cells: np.ndarray
    start: AgentPose
    task: str
    goal_class: int = None  # None: navigate to the GOAL cell

    def goal_value(self) -> int:
        """Cell code that counts as the goal for this map."""
        if self.goal_class is None:
            return GOAL
        return OBJECT_BASE + self.goal_class

    def goal_cells(self):
        ys, xs = np.nonzero(self.cells == self.goal_value())
        return [(int(x), int(y)) for x, y in zip(xs, ys)]

    def kind(self, x, y) -> int:
        return int(self.cells[y, x])

    def in_bounds(self, x, y) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def walkable_mask(self) -> np.ndarray:
        return (self.cells == FREE) | (self.cells == GOAL)

    def free_total(self) -> int:
        return int(np.sum(self.cells == FREE))


def is_walkable(kind: int) -> bool:
    return kind == FREE or kind == GOAL


def _blank(size):
    cells = np.full((size, size), FREE, dtype=np.int8)
    cells[0, :] = WALL
    cells[-1, :] = WALL
    cells[:, 0] = WALL
    cells[:, -1] = WALL
    return cells


def _random_free_cell(cells, rng, exclude=()):
    ys, xs = np.nonzero(cells == FREE)
    order = rng.permutation(len(xs))
    for i in order:
        c = (int(xs[i]), int(ys[i]))
        if c not in exclude:
            return c
    raise ValueError("no free cell available")


def _gen_empty(size, rng):
    cells = _blank(size)
    gx, gy = size - 2, size - 2
    cells[gy, gx] = GOAL
    sx, sy = _random_free_cell(cells, rng)
    return GridMap(size, size, cells, AgentPose(sx, sy, int(rng.integers(4))), TASK_EMPTY)


def _four_rooms_cells(size, rng):
    cells = _blank(size)
    cx = cy = size // 2
    cells[cy, 1:-1] = WALL
    cells[1:-1, cx] = WALL
    # one random doorway per internal wall segment
    cells[int(rng.integers(1, cy)), cx] = FREE
    cells[int(rng.integers(cy + 1, size - 1)), cx] = FREE
    cells[cy, int(rng.integers(1, cx))] = FREE
    cells[cy, int(rng.integers(cx + 1, size - 1))] = FREE
    return cells


def _gen_four_rooms(size, rng):
    cells = _four_rooms_cells(size, rng)
    gx, gy = _random_free_cell(cells, rng)
    cells[gy, gx] = GOAL
    sx, sy = _random_free_cell(cells, rng)
    return GridMap(
        size, size, cells, AgentPose(sx, sy, int(rng.integers(4))), TASK_FOUR_ROOMS
    )


def _gen_lava(size, rng):
    cells = _blank(size)
    # vertical lava rivers on alternating interior columns, one gap each
    for col in range(2, size - 2, 2):
        cells[1:-1, col] = LAVA
        cells[int(rng.integers(1, size - 1)), col] = FREE
    cells[size - 2, size - 2] = GOAL
    return GridMap(size, size, cells, AgentPose(1, 1, EAST), TASK_LAVA)


def _gen_semantic(size, rng, n_classes=3, per_class=2):
    for _ in range(64):
        layout = _four_rooms_cells(size, rng)
        sx, sy = _random_free_cell(layout, rng)
        cells = layout.copy()
        ok = True
        for cls in range(n_classes):
            for _ in range(per_class):
                try:
                    ox, oy = _random_free_cell(cells, rng, exclude={(sx, sy)})
                except ValueError:
                    ok = False
                    break
                cells[oy, ox] = OBJECT_BASE + cls
            if not ok:
                break
        if not ok:
            continue
        goal_class = int(rng.integers(n_classes))
        grid = GridMap(
            size,
            size,
            cells,
            AgentPose(sx, sy, int(rng.integers(4))),
            TASK_SEMANTIC,
            goal_class=goal_class,
        )
        from .paths import shortest_path_length  # local import, avoids cycle

        if shortest_path_length(grid, (sx, sy)) is not None:
            return grid
    raise ValueError("could not place objects on a solvable layout")


def generate(task: str, size: int, seed) -> GridMap:
    """Procedurally generate a solvable map; identical seed, identical map."""
    if size < 5:
        raise ValueError(f"grid size must be >= 5, got {size}")
    rng = np.random.default_rng(seed)
    if task == TASK_EMPTY:
        return _gen_empty(size, rng)
    if task == TASK_FOUR_ROOMS:
        return _gen_four_rooms(size, rng)
    if task == TASK_LAVA:
        return _gen_lava(size, rng)
    if task == TASK_SEMANTIC:
        return _gen_semantic(size, rng)
    raise ValueError(f"unknown task {task!r}")


_ASCII = {FREE: ".", WALL: "#", LAVA: "L", GOAL: "G"}
_ASCII_REV = {v: k for k, v in _ASCII.items()}


def load_ascii(text: str, goal_class=None, task="ascii") -> GridMap:
    """Parse an ASCII map ('#' wall, '.' free, 'L' lava, 'G' goal,
    'A' start facing east, digits 0-9 object classes)."""
    rows = [r for r in text.splitlines() if r.strip()]
    if not rows:
        raise ValueError("empty map")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError("map rows have unequal length")
    height = len(rows)
    cells = np.zeros((height, width), dtype=np.int8)
    start = None
    for y, row in enumerate(rows):
        for x, ch in enumerate(row):
            if ch == "A":
                if start is not None:
                    raise ValueError("multiple start cells")
                start = AgentPose(x, y, EAST)
                cells[y, x] = FREE
            elif ch.isdigit():
                cells[y, x] = OBJECT_BASE + int(ch)
            elif ch in _ASCII_REV:
                cells[y, x] = _ASCII_REV[ch]
            else:
                raise ValueError(f"unknown map glyph {ch!r} at ({x},{y})")
    if start is None:
        raise ValueError("map has no start cell 'A'")
    border = np.concatenate([cells[0, :], cells[-1, :], cells[:, 0], cells[:, -1]])
    if not np.all(border == WALL):
        raise ValueError("map border must be wall")
    if goal_class is None and not np.any(cells == GOAL):
        raise ValueError("map has no goal cell and no goal class was given")
    grid = GridMap(width, height, cells, start, task, goal_class=goal_class)
    if not grid.goal_cells():
        raise ValueError(f"no cells of goal class {goal_class}")
    from .paths import shortest_path_length

    if shortest_path_length(grid, (start.x, start.y)) is None:
        raise ValueError("no path from start to any goal")
    return grid


def dump_ascii(grid: GridMap) -> str:
    out = []
    for y in range(grid.height):
        row = []
        for x in range(grid.width):
            k = grid.kind(x, y)
            if (x, y) == (grid.start.x, grid.start.y):
                row.append("A")
            elif k >= OBJECT_BASE:
                row.append(str(k - OBJECT_BASE))
            else:
                row.append(_ASCII[k])
        out.append("".join(row))
    return "\n".join(out)
