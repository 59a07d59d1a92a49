"""Semantic map, path planning and frontier selection.

Grid arrays are indexed ``[y, x]``. Unknown cells are optimistically treated
as traversable; bumps and range readings correct that.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..scene import HEADINGS, AgentPose, Cell, Edge, canonical_edge, neighbor
from ..sensors import ObservationBundle, straight_rays, terminal_edge
from .profile import AgentProfile, ProfileKind

UNKNOWN, FREE, BLOCKED = 0, 1, 2


@dataclass
class SemanticMap:
    width: int
    height: int
    obstacle: np.ndarray
    explored: np.ndarray
    semantic: dict[str, np.ndarray] = field(default_factory=dict)
    blocked_edges: set[Edge] = field(default_factory=set)
    # Cells where the agent has confirmed a class is absent.
    refuted: dict[str, set[Cell]] = field(default_factory=dict)

    @classmethod
    def fresh(cls, width: int, height: int) -> "SemanticMap":
        return cls(
            width, height,
            np.zeros((height, width), dtype=np.int8),
            np.zeros((height, width), dtype=bool),
        )

    def copy(self) -> "SemanticMap":
        return SemanticMap(
            self.width, self.height, self.obstacle.copy(), self.explored.copy(),
            {k: v.copy() for k, v in self.semantic.items()},
            set(self.blocked_edges),
            {k: set(v) for k, v in self.refuted.items()},
        )

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def mark_free(self, cell: Cell) -> None:
        x, y = cell
        self.explored[y, x] = True
        if self.obstacle[y, x] == UNKNOWN:
            self.obstacle[y, x] = FREE

    def passable(self, a: Cell, b: Cell) -> bool:
        return (
            self.in_bounds(b)
            and self.obstacle[b[1], b[0]] != BLOCKED
            and canonical_edge(a, b) not in self.blocked_edges
        )

    def observe_class(self, cls: str, cell: Cell) -> None:
        if not self.in_bounds(cell) or cell in self.refuted.get(cls, ()):
            return
        grid = self.semantic.get(cls)
        if grid is None:
            grid = self.semantic[cls] = np.zeros((self.height, self.width), dtype=np.int32)
        grid[cell[1], cell[0]] += 1

    def forget(self, cls: str, cell: Cell, refute: bool = False) -> None:
        grid = self.semantic.get(cls)
        if grid is not None and self.in_bounds(cell):
            grid[cell[1], cell[0]] = 0
        if refute:
            self.refuted.setdefault(cls, set()).add(cell)

    def best_cell(self, cls: str) -> Optional[Cell]:
        """Cell with the most sightings of ``cls``; ties go to row-major order."""
        grid = self.semantic.get(cls)
        if grid is None or not grid.any():
            return None
        flat = int(np.argmax(grid))  # argmax returns the first maximum in row-major order
        return (flat % self.width, flat // self.width)

    def top_class(self) -> dict[Cell, str]:
        out: dict[Cell, str] = {}
        best: dict[Cell, int] = {}
        for cls in sorted(self.semantic):
            ys, xs = np.nonzero(self.semantic[cls])
            for x, y in zip(xs.tolist(), ys.tolist()):
                n = int(self.semantic[cls][y, x])
                if n > best.get((x, y), 0):
                    best[(x, y)] = n
                    out[(x, y)] = cls
        return out


def _geometry_channel(obs: ObservationBundle, profile: AgentProfile):
    if profile.kind is ProfileKind.VISION_ONLY:
        return obs.vision_range
    if profile.kind is ProfileKind.MAP_DEPTH:
        return obs.depth
    return obs.gt_depth


def integrate(
    m: SemanticMap, obs: ObservationBundle, pose: AgentPose, profile: AgentProfile
) -> list[Edge]:
    """In-place update; returns edges newly added to ``blocked_edges``."""
    added: list[Edge] = []
    m.mark_free(pose.cell)
    if obs.bump:
        edge = canonical_edge(pose.cell, pose.faced_cell())
        if edge not in m.blocked_edges:
            m.blocked_edges.add(edge)
            added.append(edge)

    ranges = _geometry_channel(obs, profile)
    if ranges is not None:
        cfg = profile.cfg
        bearings = cfg.bearings()
        rays = straight_rays(m.width, m.height, pose, cfg)
        for i, r in enumerate(ranges):
            if not np.isfinite(r):
                continue
            for cell, enter in rays[i]:
                if enter >= r - 1e-9:
                    break
                m.mark_free(cell)
            edge = terminal_edge(pose, float(bearings[i]), float(r), cfg.max_range)
            if edge is not None and edge not in m.blocked_edges:
                a, b = edge
                if m.in_bounds(a) or m.in_bounds(b):
                    m.blocked_edges.add(edge)
                    added.append(edge)

    for d in obs.vision:
        if d.apparent_cell is not None:
            m.observe_class(d.object_class, d.apparent_cell)
    return added


def update_map(
    m: SemanticMap, obs: ObservationBundle, pose: AgentPose, profile: AgentProfile
) -> SemanticMap:
    """Pure variant of :func:`integrate`."""
    out = m.copy()
    integrate(out, obs, pose, profile)
    return out


def plan_path(m: SemanticMap, start: Cell, goal: Cell) -> Optional[list[Cell]]:
    """Shortest 4-connected path, expanding neighbours in N, E, S, W order."""
    if start == goal:
        return [start]
    if not m.in_bounds(goal):
        return None
    parent: dict[Cell, Cell] = {start: start}
    queue = deque([start])
    while queue:
        c = queue.popleft()
        for h in HEADINGS:
            n = neighbor(c, h)
            if n in parent or not m.passable(c, n):
                continue
            parent[n] = c
            if n == goal:
                path = [n]
                while path[-1] != start:
                    path.append(parent[path[-1]])
                return path[::-1]
            queue.append(n)
    return None


def distances(m: SemanticMap, start: Cell) -> dict[Cell, int]:
    dist = {start: 0}
    queue = deque([start])
    while queue:
        c = queue.popleft()
        for h in HEADINGS:
            n = neighbor(c, h)
            if n not in dist and m.passable(c, n):
                dist[n] = dist[c] + 1
                queue.append(n)
    return dist


def frontier_targets(m: SemanticMap) -> set[Cell]:
    """Unknown cells reachable in one step from an explored free cell."""
    out = set()
    ys, xs = np.nonzero(m.explored & (m.obstacle == FREE))
    for x, y in zip(xs.tolist(), ys.tolist()):
        for h in HEADINGS:
            n = neighbor((x, y), h)
            if m.in_bounds(n) and not m.explored[n[1], n[0]] and m.passable((x, y), n):
                out.add(n)
    return out


def next_frontier(m: SemanticMap, pose: AgentPose) -> Optional[Cell]:
    """Nearest unexplored cell on the frontier of explored free space.

    Distance is planned path length from the agent; ties go to row-major order.
    """
    targets = frontier_targets(m)
    if not targets:
        return None
    dist = distances(m, pose.cell)
    reachable = [c for c in targets if c in dist]
    if not reachable:
        return None
    return min(reachable, key=lambda c: (dist[c], c[1], c[0]))
