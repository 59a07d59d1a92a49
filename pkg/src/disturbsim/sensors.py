"""Modality channels: semantic vision, depth, ground-truth depth.

Rays walk the grid edge by edge (Amanatides-Woo style). Whenever a ray meets
a wall, the outcome depends on the sensing mode and the wall material:

=============  ========  ========  =========
mode           opaque    glass     mirror
=============  ========  ========  =========
vision         stop      pass      reflect
depth          stop      pass      stop
ground truth   stop      stop      stop
=============  ========  ========  =========

Vision rays reflect at most ``reflection_cap`` times; a further mirror stops
the ray. Only walls occlude; objects are small and never block a ray.
"""

from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .scene import AgentPose, Cell, Edge, Material, Scene, canonical_edge


class Mode(str, enum.Enum):
    VISION = "vision"
    DEPTH = "depth"
    GROUND_TRUTH = "gt_depth"


class Interaction(enum.Enum):
    STOP = "stop"
    PASS = "pass"
    REFLECT = "reflect"


INTERACTION: dict[tuple[Mode, Material], Interaction] = {
    (Mode.VISION, Material.OPAQUE): Interaction.STOP,
    (Mode.VISION, Material.GLASS): Interaction.PASS,
    (Mode.VISION, Material.MIRROR): Interaction.REFLECT,
    (Mode.DEPTH, Material.OPAQUE): Interaction.STOP,
    (Mode.DEPTH, Material.GLASS): Interaction.PASS,
    (Mode.DEPTH, Material.MIRROR): Interaction.STOP,
    (Mode.GROUND_TRUTH, Material.OPAQUE): Interaction.STOP,
    (Mode.GROUND_TRUTH, Material.GLASS): Interaction.STOP,
    (Mode.GROUND_TRUTH, Material.MIRROR): Interaction.STOP,
}


@dataclass(frozen=True)
class SensorConfig:
    fov: float = 90.0
    ray_count: int = 31
    max_range: float = 8.0
    light_floor: float = 0.25
    reflection_cap: int = 2

    def __post_init__(self) -> None:
        if not 0 < self.fov <= 180:
            raise ValueError(f"fov must lie in (0, 180], got {self.fov}")
        if self.ray_count < 1 or self.ray_count % 2 == 0:
            raise ValueError(f"ray_count must be odd and positive, got {self.ray_count}")
        if self.max_range < 1:
            raise ValueError(f"max_range must be >= 1, got {self.max_range}")
        if not 0 < self.light_floor <= 1:
            raise ValueError(f"light_floor must lie in (0, 1], got {self.light_floor}")
        if self.reflection_cap < 0:
            raise ValueError("reflection_cap must be >= 0")

    @property
    def center_ray(self) -> int:
        return self.ray_count // 2

    def bearings(self) -> np.ndarray:
        """Ray bearings in degrees relative to heading; positive is clockwise."""
        if self.ray_count == 1:
            return np.zeros(1)
        return np.linspace(-self.fov / 2, self.fov / 2, self.ray_count)


# -- ray terminals -------------------------------------------------------------


@dataclass(frozen=True)
class Surface:
    material: Material
    edge: Edge


@dataclass(frozen=True)
class ObjectCell:
    object_id: str


@dataclass(frozen=True)
class MaxRange:
    pass


Terminal = Union[Surface, ObjectCell, MaxRange]


@dataclass(frozen=True)
class RayHit:
    mode: Mode
    path_length: float
    terminal: Terminal
    reflected: bool = False


@dataclass(frozen=True)
class CellVisit:
    """One stretch of a ray inside a cell.

    ``near`` is the path length at the point of the stretch closest to the
    cell centre; it is the range reported for anything sitting in the cell.
    ``offset`` is the distance from the cell centre at that point.
    """

    cell: Cell
    enter: float
    exit: float
    near: float
    reflections: int
    offset: float = 0.0


@dataclass(frozen=True)
class Crossing:
    edge: Edge
    material: Material
    distance: float
    outcome: Interaction


@dataclass
class RayTrace:
    mode: Mode
    path_length: float
    terminal: Terminal
    reflections: int
    visits: list[CellVisit] = field(default_factory=list)
    crossings: list[Crossing] = field(default_factory=list)

    def hit(self) -> RayHit:
        return RayHit(
            self.mode, self.path_length, self.terminal,
            self.mode is Mode.VISION and self.reflections > 0,
        )


def _start_index(p: float, d: float) -> int:
    i = math.floor(p)
    if p == i and d < 0:
        i -= 1
    return i


def trace_ray(
    scene: Scene,
    origin: tuple[float, float],
    direction: tuple[float, float],
    mode: Mode,
    max_range: float,
    reflection_cap: int = 2,
) -> RayTrace:
    """Walk a ray edge by edge through ``scene`` and record everything it meets."""
    px, py = float(origin[0]), float(origin[1])
    dx, dy = float(direction[0]), float(direction[1])
    cx, cy = _start_index(px, dx), _start_index(py, dy)
    travelled = 0.0
    reflections = 0
    visits: list[CellVisit] = []
    crossings: list[Crossing] = []

    while True:
        tx = (cx + 1 - px) / dx if dx > 0 else (cx - px) / dx if dx < 0 else math.inf
        ty = (cy + 1 - py) / dy if dy > 0 else (cy - py) / dy if dy < 0 else math.inf
        step = min(tx, ty)
        # Closest approach of this stretch to the cell centre.
        proj = (cx + 0.5 - px) * dx + (cy + 0.5 - py) * dy
        limit = min(step, max_range - travelled)
        s = min(max(proj, 0.0), limit)
        near = travelled + s
        offset = math.hypot(px + s * dx - cx - 0.5, py + s * dy - cy - 0.5)
        if travelled + step > max_range:
            visits.append(CellVisit((cx, cy), travelled, max_range, near, reflections, offset))
            return RayTrace(mode, max_range, MaxRange(), reflections, visits, crossings)
        visits.append(CellVisit((cx, cy), travelled, travelled + step, near, reflections, offset))
        travelled += step
        if tx <= ty:
            nxt = (cx + (1 if dx > 0 else -1), cy)
            px, py = float(cx + 1 if dx > 0 else cx), py + step * dy
        else:
            nxt = (cx, cy + (1 if dy > 0 else -1))
            px, py = px + step * dx, float(cy + 1 if dy > 0 else cy)
        material = scene.material_between((cx, cy), nxt)
        if material is None:
            cx, cy = nxt
            continue
        edge = canonical_edge((cx, cy), nxt)
        outcome = INTERACTION[(mode, material)]
        if outcome is Interaction.REFLECT and reflections >= reflection_cap:
            outcome = Interaction.STOP
        crossings.append(Crossing(edge, material, travelled, outcome))
        if outcome is Interaction.STOP:
            return RayTrace(mode, travelled, Surface(material, edge), reflections, visits, crossings)
        if outcome is Interaction.PASS:
            cx, cy = nxt
            continue
        reflections += 1
        if nxt[0] != cx:
            dx = -dx
        else:
            dy = -dy


def cast_ray(
    scene: Scene,
    origin: tuple[float, float],
    direction: tuple[float, float],
    mode: Mode,
    max_range: float,
    reflection_cap: int = 2,
) -> RayHit:
    """First thing a ray meets.

    Vision rays end at the first cell holding a visible entity; depth modes
    ignore objects entirely.
    """
    trace = trace_ray(scene, origin, direction, mode, max_range, reflection_cap)
    if mode is Mode.VISION:
        occupied = _visible_entities(scene)
        for v in trace.visits:
            ids = occupied.get(v.cell)
            if ids:
                return RayHit(mode, v.near, ObjectCell(ids[0]), v.reflections > 0)
    return trace.hit()


def _visible_entities(scene: Scene) -> dict[Cell, list[str]]:
    out: dict[Cell, list[str]] = {}
    for cell, eid, _cls in visible_entities(scene):
        out.setdefault(cell, []).append(eid)
    return out


def visible_entities(scene: Scene) -> list[tuple[Cell, str, str]]:
    """``(cell, id, class)`` for every appliance and every exposed object."""
    closed = {a.id for a in scene.appliances if a.is_open is False}
    out = [(a.cell, a.id, a.cls) for a in scene.appliances]
    for o in scene.objects:
        if o.cell is None or o.held or (o.inside is not None and o.inside in closed):
            continue
        out.append((o.cell, o.id, o.cls))
    return out


# -- cached per-pose geometry ----------------------------------------------------


@dataclass(frozen=True)
class PoseRays:
    """Geometry of every ray cast from one pose in one mode."""

    traces: tuple[RayTrace, ...]
    # cell -> (range, ray index) for the unreflected and reflected sightings
    # along the ray passing closest to the cell centre (nearest range breaks ties).
    direct: dict
    mirrored: dict


_CACHE: dict[tuple, PoseRays] = {}
_CACHE_LIMIT = 200_000


def ray_directions(pose: AgentPose, cfg: SensorConfig) -> list[tuple[float, float]]:
    out = []
    for b in cfg.bearings():
        a = math.radians(pose.heading.angle + float(b))
        out.append((math.cos(a), math.sin(a)))
    return out


def pose_rays(scene: Scene, pose: AgentPose, cfg: SensorConfig, mode: Mode) -> PoseRays:
    key = (scene.geometry_key, pose.cell, pose.heading, cfg, mode)
    hit = _CACHE.get(key)
    if hit is not None:
        return hit
    origin = (pose.cell[0] + 0.5, pose.cell[1] + 0.5)
    traces = tuple(
        trace_ray(scene, origin, d, mode, cfg.max_range, cfg.reflection_cap)
        for d in ray_directions(pose, cfg)
    )
    best: tuple[dict, dict] = ({}, {})
    for i, tr in enumerate(traces):
        for v in tr.visits:
            table = best[1 if v.reflections else 0]
            rank = (round(v.offset, 9), v.near, i)
            if v.cell not in table or rank < table[v.cell]:
                table[v.cell] = rank
    direct = {c: (k[1], k[2]) for c, k in best[0].items()}
    mirrored = {c: (k[1], k[2]) for c, k in best[1].items()}
    result = PoseRays(traces, direct, mirrored)
    if len(_CACHE) > _CACHE_LIMIT:
        _CACHE.clear()
    _CACHE[key] = result
    return result


# -- detection draws -------------------------------------------------------------


class DrawStream:
    """Counter-based uniforms keyed by ``(seed, step, key)``.

    Every draw is a pure function of its key, so results never depend on the
    order objects are visited in and any step can be replayed in isolation.
    """

    def __init__(self, seed: int, step: int = 0):
        self.seed = int(seed)
        self.step = int(step)

    def at(self, step: int) -> "DrawStream":
        return DrawStream(self.seed, step)

    def uniform(self, key: str) -> float:
        digest = hashlib.blake2b(
            f"{self.seed}:{self.step}:{key}".encode(), digest_size=8
        ).digest()
        return int.from_bytes(digest, "big") / 2.0**64


def detection_probability(light_level: float, light_floor: float) -> float:
    return min(1.0, light_level / light_floor)


@dataclass(frozen=True)
class Detection:
    object_class: str
    apparent_range: float
    apparent_bearing: float
    phantom: bool
    apparent_cell: Optional[Cell] = None
    # Simulator-side provenance for logs and tests; agents never read it.
    source_id: str = ""


def _apparent_cell(pose: AgentPose, rng: float, bearing: float) -> Cell:
    a = math.radians(pose.heading.angle + bearing)
    x = pose.cell[0] + 0.5 + rng * math.cos(a)
    y = pose.cell[1] + 0.5 + rng * math.sin(a)
    return (math.floor(x + 1e-9 * math.cos(a)), math.floor(y + 1e-9 * math.sin(a)))


def candidate_visible(
    scene: Scene, pose: AgentPose, cfg: SensorConfig
) -> list[tuple[str, str, bool, float, int]]:
    """Every ``(id, class, phantom, range, ray)`` sighting before any light dropout."""
    rays = pose_rays(scene, pose, cfg, Mode.VISION)
    out = []
    for cell, eid, cls in visible_entities(scene):
        for phantom, table in ((False, rays.direct), (True, rays.mirrored)):
            seen = table.get(cell)
            if seen is not None:
                out.append((eid, cls, phantom, seen[0], seen[1]))
    return out


def sense_vision(
    scene: Scene, pose: AgentPose, cfg: SensorConfig, rng: DrawStream
) -> list[Detection]:
    p = detection_probability(scene.light_level, cfg.light_floor)
    bearings = cfg.bearings()
    out = []
    for eid, cls, phantom, rng_, ray in candidate_visible(scene, pose, cfg):
        if not rng.uniform(eid) < p:
            continue
        bearing = float(bearings[ray])
        if phantom:
            cell = _apparent_cell(pose, rng_, bearing)
        else:
            cell = _true_cell(scene, eid)
        out.append(Detection(cls, rng_, bearing, phantom, cell, eid))
    out.sort(key=lambda d: (d.apparent_range, d.source_id, d.phantom))
    return out


def _true_cell(scene: Scene, eid: str) -> Cell:
    for a in scene.appliances:
        if a.id == eid:
            return a.cell
    return scene.object(eid).cell


def sense_vision_range(
    scene: Scene, pose: AgentPose, cfg: SensorConfig, rng: DrawStream
) -> np.ndarray:
    """Apparent free range along each vision ray, NaN where too dark to tell.

    A reflected ray reports its full folded length along the emitted bearing,
    which is how the world looks from behind a mirror.
    """
    p = detection_probability(scene.light_level, cfg.light_floor)
    rays = pose_rays(scene, pose, cfg, Mode.VISION)
    out = np.array([t.path_length for t in rays.traces], dtype=float)
    for i in range(len(out)):
        if not rng.uniform(f"ray{i}") < p:
            out[i] = np.nan
    return out


def sense_depth(scene: Scene, pose: AgentPose, cfg: SensorConfig) -> np.ndarray:
    rays = pose_rays(scene, pose, cfg, Mode.DEPTH)
    return np.array([t.path_length for t in rays.traces], dtype=float)


def sense_gt_depth(scene: Scene, pose: AgentPose, cfg: SensorConfig) -> np.ndarray:
    rays = pose_rays(scene, pose, cfg, Mode.GROUND_TRUTH)
    return np.array([t.path_length for t in rays.traces], dtype=float)


@dataclass
class ObservationBundle:
    vision: list[Detection]
    depth: np.ndarray
    bump: bool = False
    gt_depth: Optional[np.ndarray] = None
    vision_range: Optional[np.ndarray] = None
    last_success: bool = True


def observe(
    scene: Scene,
    pose: AgentPose,
    cfg: SensorConfig,
    draws: DrawStream,
    *,
    gt_depth: bool = False,
    bump: bool = False,
    last_success: bool = True,
) -> ObservationBundle:
    return ObservationBundle(
        vision=sense_vision(scene, pose, cfg, draws),
        depth=sense_depth(scene, pose, cfg),
        bump=bump,
        gt_depth=sense_gt_depth(scene, pose, cfg) if gt_depth else None,
        vision_range=sense_vision_range(scene, pose, cfg, draws),
        last_success=last_success,
    )


def terminal_edge(
    pose: AgentPose, bearing: float, rng: float, max_range: float
) -> Optional[Edge]:
    """Edge a straight ray along ``bearing`` meets at distance ``rng``.

    Returns None at max range, and for rays that end exactly on a lattice
    corner: such a reading cannot tell which of the two edges stopped it.
    """
    if not rng < max_range:
        return None
    a = math.radians(pose.heading.angle + bearing)
    dx, dy = math.cos(a), math.sin(a)
    x = pose.cell[0] + 0.5 + rng * dx
    y = pose.cell[1] + 0.5 + rng * dy
    eps = 1e-7
    before = (math.floor(x - eps * dx), math.floor(y - eps * dy))
    after = (math.floor(x + eps * dx), math.floor(y + eps * dy))
    if before == after:
        return None
    if abs(before[0] - after[0]) + abs(before[1] - after[1]) != 1:
        return None
    return canonical_edge(before, after)


_STRAIGHT: dict[tuple, tuple] = {}


def straight_rays(
    width: int, height: int, pose: AgentPose, cfg: SensorConfig
) -> tuple[tuple[tuple[Cell, float], ...], ...]:
    """Per ray, the ``(cell, entry distance)`` pairs of an unobstructed straight ray.

    This is what an agent assumes a reading describes: it cannot tell a
    reflected ray from a straight one.
    """
    key = (width, height, pose.cell, pose.heading, cfg)
    hit = _STRAIGHT.get(key)
    if hit is not None:
        return hit
    empty = Scene(width, height)
    origin = (pose.cell[0] + 0.5, pose.cell[1] + 0.5)
    out = []
    for d in ray_directions(pose, cfg):
        trace = trace_ray(empty, origin, d, Mode.DEPTH, cfg.max_range, 0)
        out.append(tuple((v.cell, v.enter) for v in trace.visits))
    result = tuple(out)
    if len(_STRAIGHT) > _CACHE_LIMIT:
        _STRAIGHT.clear()
    _STRAIGHT[key] = result
    return result
