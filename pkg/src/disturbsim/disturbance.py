"""Static scene transforms that degrade particular sensing modalities.

A disturbance is applied to a floorplan before an episode starts and never
changes mid-episode. Only ``walls`` and ``light_level`` are ever touched.

Disturbance file format (same family as scene files)::

    dimlight L
    glasswall X1 Y1 X2 Y2 [X1 Y1 X2 Y2 ...]
    mirror X1 Y1 X2 Y2 [...]

Statements are applied in file order.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence, Union

from .scene import (
    Edge,
    EdgeWall,
    Material,
    Scene,
    SceneSyntaxError,
    Violation,
    adjacent,
    canonical_edge,
    tokenize,
)


@dataclass(frozen=True)
class DimLight:
    level: float


@dataclass(frozen=True)
class GlassWall:
    edges: tuple[Edge, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "edges", _canonical_edges(self.edges))


@dataclass(frozen=True)
class MirrorWall:
    edges: tuple[Edge, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "edges", _canonical_edges(self.edges))


Disturbance = Union[DimLight, GlassWall, MirrorWall]


def _canonical_edges(edges) -> tuple[Edge, ...]:
    # Non-adjacent pairs are kept as given so that validate() can report them.
    out = []
    for a, b in edges:
        a, b = tuple(a), tuple(b)
        out.append(canonical_edge(a, b) if adjacent(a, b) else (a, b))
    return tuple(sorted(set(out)))


class DisturbanceError(ValueError):
    def __init__(self, violations: list[Violation], index: int | None = None):
        where = "" if index is None else f"disturbance #{index}: "
        super().__init__(where + "; ".join(str(v) for v in violations))
        self.violations = violations
        self.index = index


def validate(scene: Scene, d: Disturbance) -> list[Violation]:
    if isinstance(d, DimLight):
        if not 0.0 <= d.level <= 1.0:
            return [Violation("LightOutOfRange", "dimlight", f"level {d.level}")]
        return []
    name = "glasswall" if isinstance(d, GlassWall) else "mirror"
    if not d.edges:
        return [Violation("EmptyEdgeList", name)]
    out = []
    for a, b in d.edges:
        label = f"{a[0]} {a[1]} {b[0]} {b[1]}"
        if not adjacent(a, b):
            out.append(Violation("EdgeAdjacency", label, "cells not 4-adjacent"))
        elif not (scene.in_bounds(a) and scene.in_bounds(b)):
            out.append(Violation("EdgeOutOfBounds", label))
    return out


def apply(scene: Scene, d: Disturbance) -> Scene:
    """Return a new scene with ``d`` applied; ``scene`` itself is untouched."""
    problems = validate(scene, d)
    if problems:
        raise DisturbanceError(problems)
    if isinstance(d, DimLight):
        return replace(scene, light_level=float(d.level))
    material = Material.GLASS if isinstance(d, GlassWall) else Material.MIRROR
    walls = dict(scene.wall_map)
    for edge in d.edges:
        walls[edge] = material
    return scene.with_walls(EdgeWall(e, m) for e, m in walls.items())


def compose(scene: Scene, ds: Sequence[Disturbance]) -> Scene:
    for i, d in enumerate(ds):
        problems = validate(scene, d)
        if problems:
            raise DisturbanceError(problems, index=i)
        scene = apply(scene, d)
    return scene


def parse_disturbances(text: str) -> list[Disturbance]:
    out: list[Disturbance] = []
    for tok in tokenize(text):
        head = tok.words[0]
        if head == "dimlight":
            out.append(DimLight(tok.float(1, "light level")))
            if len(tok.words) > 2:
                raise tok.error(2, f"unexpected token {tok.words[2]!r}")
        elif head in ("glasswall", "mirror"):
            coords = [tok.int(i, "edge coordinate") for i in range(1, len(tok.words))]
            if not coords or len(coords) % 4:
                raise tok.error(len(tok.words), "edge list needs groups of four coordinates")
            edges = [
                ((coords[i], coords[i + 1]), (coords[i + 2], coords[i + 3]))
                for i in range(0, len(coords), 4)
            ]
            out.append(GlassWall(edges) if head == "glasswall" else MirrorWall(edges))
        else:
            raise tok.error(0, f"unknown disturbance {head!r}")
    return out


def serialize_disturbances(ds: Sequence[Disturbance]) -> str:
    lines = []
    for d in ds:
        if isinstance(d, DimLight):
            lines.append(f"dimlight {d.level!r}")
        else:
            head = "glasswall" if isinstance(d, GlassWall) else "mirror"
            coords = " ".join(f"{a[0]} {a[1]} {b[0]} {b[1]}" for a, b in d.edges)
            lines.append(f"{head} {coords}")
    return "".join(line + "\n" for line in lines)


def load_disturbances(path) -> list[Disturbance]:
    with open(path, encoding="utf-8") as fh:
        return parse_disturbances(fh.read())


__all__ = [
    "DimLight",
    "GlassWall",
    "MirrorWall",
    "Disturbance",
    "DisturbanceError",
    "SceneSyntaxError",
    "apply",
    "compose",
    "validate",
    "parse_disturbances",
    "serialize_disturbances",
    "load_disturbances",
]
