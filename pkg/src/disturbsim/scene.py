"""Discrete household world: grid geometry, edge walls, objects and appliances.

Cells are ``(x, y)`` integer pairs with ``y`` growing southwards. Walls live
on the edges between 4-adjacent cells, so a glass door occupies no floor area.
The perimeter is implicitly opaque; a boundary edge may still be listed
explicitly to give it another material (a mirror hung on an outer wall).

Scene file format (one statement per line, ``#`` starts a comment)::

    size W H
    light L
    wall X1 Y1 X2 Y2 opaque|glass|mirror
    appliance ID KIND X Y [open|closed] [on|off]
    object ID CLASS X Y [heated] [cleaned] [cooled] [examined] [in=ID]
    object ID CLASS held [flags...]

``serialize_scene`` emits the canonical form: header, then walls sorted by
edge, appliances sorted by id, objects sorted by id.
"""

from __future__ import annotations

import enum
import hashlib
import shlex
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Iterator, Optional, Union

Cell = tuple[int, int]
Edge = tuple[Cell, Cell]


class Material(str, enum.Enum):
    OPAQUE = "opaque"
    GLASS = "glass"
    MIRROR = "mirror"


class Heading(enum.Enum):
    NORTH = (0, -1)
    EAST = (1, 0)
    SOUTH = (0, 1)
    WEST = (-1, 0)

    @property
    def dx(self) -> int:
        return self.value[0]

    @property
    def dy(self) -> int:
        return self.value[1]

    @property
    def angle(self) -> float:
        """Heading in degrees, clockwise from east on the y-down grid."""
        return _HEADING_ANGLE[self]

    def left(self) -> "Heading":
        return HEADINGS[(HEADINGS.index(self) - 1) % 4]

    def right(self) -> "Heading":
        return HEADINGS[(HEADINGS.index(self) + 1) % 4]

    @property
    def letter(self) -> str:
        return self.name[0]

    @classmethod
    def parse(cls, token: str) -> "Heading":
        for h in HEADINGS:
            if token.upper() in (h.name, h.letter):
                return h
        raise ValueError(f"unknown heading {token!r}")


# Fixed tie-break order used everywhere: N, E, S, W.
HEADINGS: tuple[Heading, ...] = (Heading.NORTH, Heading.EAST, Heading.SOUTH, Heading.WEST)
_HEADING_ANGLE = {Heading.EAST: 0.0, Heading.SOUTH: 90.0, Heading.WEST: 180.0, Heading.NORTH: 270.0}


class ApplianceKind(str, enum.Enum):
    MICROWAVE = "Microwave"
    SINK = "Sink"
    FRIDGE = "Fridge"
    LAMP = "Lamp"
    COUNTERTOP = "CounterTop"

    @property
    def openable(self) -> bool:
        return self in (ApplianceKind.MICROWAVE, ApplianceKind.FRIDGE)

    @property
    def toggleable(self) -> bool:
        return self in (ApplianceKind.MICROWAVE, ApplianceKind.LAMP)

    @property
    def receptacle(self) -> bool:
        return self is not ApplianceKind.LAMP


OBJECT_FLAGS = ("Heated", "Cleaned", "Cooled", "Examined", "Held")


def neighbor(cell: Cell, heading: Heading) -> Cell:
    return (cell[0] + heading.dx, cell[1] + heading.dy)


def adjacent(a: Cell, b: Cell) -> bool:
    return abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1


def canonical_edge(a: Cell, b: Cell) -> Edge:
    """Order-independent key for the edge shared by two 4-adjacent cells."""
    if not adjacent(a, b):
        raise ValueError(f"cells {a} and {b} are not 4-adjacent")
    return (a, b) if a <= b else (b, a)


def heading_between(a: Cell, b: Cell) -> Heading:
    d = (b[0] - a[0], b[1] - a[1])
    for h in HEADINGS:
        if h.value == d:
            return h
    raise ValueError(f"cells {a} and {b} are not 4-adjacent")


@dataclass(frozen=True, order=True)
class EdgeWall:
    edge: Edge
    material: Material = Material.OPAQUE

    def __post_init__(self) -> None:
        object.__setattr__(self, "edge", canonical_edge(*self.edge))
        object.__setattr__(self, "material", Material(self.material))


@dataclass(frozen=True)
class ObjectInstance:
    id: str
    cls: str
    cell: Optional[Cell]
    flags: frozenset[str] = frozenset()
    inside: Optional[str] = None

    @property
    def held(self) -> bool:
        return "Held" in self.flags


@dataclass(frozen=True)
class Appliance:
    id: str
    kind: ApplianceKind
    cell: Cell
    is_open: Optional[bool] = None
    is_on: Optional[bool] = None

    @property
    def cls(self) -> str:
        return self.kind.value


@dataclass(frozen=True)
class AgentPose:
    cell: Cell
    heading: Heading

    def faced_cell(self) -> Cell:
        return neighbor(self.cell, self.heading)

    def __str__(self) -> str:
        return f"{self.cell[0]} {self.cell[1]} {self.heading.letter}"


@dataclass(frozen=True)
class Scene:
    """Immutable grid world. Per-episode state changes produce new scenes."""

    width: int
    height: int
    walls: tuple[EdgeWall, ...] = ()
    objects: tuple[ObjectInstance, ...] = ()
    appliances: tuple[Appliance, ...] = ()
    light_level: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "walls", tuple(sorted(self.walls)))
        object.__setattr__(self, "objects", tuple(sorted(self.objects, key=lambda o: o.id)))
        object.__setattr__(self, "appliances", tuple(sorted(self.appliances, key=lambda a: a.id)))
        object.__setattr__(self, "light_level", float(self.light_level))

    @cached_property
    def wall_map(self) -> dict[Edge, Material]:
        return {w.edge: w.material for w in self.walls}

    @cached_property
    def geometry_key(self) -> str:
        """Digest of everything rays and motion depend on (size and walls)."""
        text = f"{self.width} {self.height};" + ";".join(
            f"{w.edge}{w.material.value}" for w in self.walls
        )
        return hashlib.sha1(text.encode()).hexdigest()

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def cells(self) -> Iterator[Cell]:
        """All cells in row-major order."""
        for y in range(self.height):
            for x in range(self.width):
                yield (x, y)

    def material_between(self, a: Cell, b: Cell) -> Optional[Material]:
        edge = canonical_edge(a, b)
        m = self.wall_map.get(edge)
        if m is not None:
            return m
        if not (self.in_bounds(a) and self.in_bounds(b)):
            return Material.OPAQUE
        return None

    def object(self, oid: str) -> ObjectInstance:
        for o in self.objects:
            if o.id == oid:
                return o
        raise KeyError(oid)

    def appliance(self, aid: str) -> Appliance:
        for a in self.appliances:
            if a.id == aid:
                return a
        raise KeyError(aid)

    def held_object(self) -> Optional[ObjectInstance]:
        for o in self.objects:
            if o.held:
                return o
        return None

    def replace_object(self, obj: ObjectInstance) -> "Scene":
        return replace(self, objects=tuple(obj if o.id == obj.id else o for o in self.objects))

    def replace_appliance(self, app: Appliance) -> "Scene":
        return replace(
            self, appliances=tuple(app if a.id == app.id else a for a in self.appliances)
        )

    def with_walls(self, walls: Iterable[EdgeWall]) -> "Scene":
        return replace(self, walls=tuple(walls))

    def digest(self) -> str:
        return hashlib.sha256(serialize_scene(self).encode()).hexdigest()


def edge_between(a: Cell, b: Union[Cell, Heading], scene: Scene) -> Optional[EdgeWall]:
    """Wall on the edge shared by ``a`` and ``b`` (a cell or a direction).

    Boundary edges always yield a wall: opaque unless listed otherwise.
    Raises ``ValueError`` for non-adjacent cells.
    """
    if isinstance(b, Heading):
        b = neighbor(a, b)
    edge = canonical_edge(a, b)
    if not (scene.in_bounds(a) or scene.in_bounds(b)):
        raise ValueError(f"edge {edge} lies entirely outside the grid")
    m = scene.material_between(a, b)
    return None if m is None else EdgeWall(edge, m)


# -- validation --------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    invariant: str
    entity: str = ""
    detail: str = ""

    def __str__(self) -> str:
        text = f"{self.invariant}({self.entity})" if self.entity else self.invariant
        return f"{text}: {self.detail}" if self.detail else text


def _edge_name(edge: Edge) -> str:
    (x1, y1), (x2, y2) = edge
    return f"{x1} {y1} {x2} {y2}"


def validate_scene(scene: Scene) -> list[Violation]:
    """Every invariant violation in ``scene``; an empty list means valid."""
    out: list[Violation] = []
    if scene.width < 1 or scene.height < 1:
        out.append(Violation("SizeInvalid", f"{scene.width}x{scene.height}"))
    if not 0.0 <= scene.light_level <= 1.0:
        out.append(Violation("LightOutOfRange", "", f"light_level {scene.light_level}"))

    seen_edges: set[Edge] = set()
    for w in scene.walls:
        a, b = w.edge
        if w.edge in seen_edges:
            out.append(Violation("DuplicateEdge", _edge_name(w.edge)))
        seen_edges.add(w.edge)
        if not (scene.in_bounds(a) or scene.in_bounds(b)):
            out.append(Violation("WallOutOfBounds", _edge_name(w.edge)))

    ids: set[str] = set()
    for entity in (*scene.appliances, *scene.objects):
        if entity.id in ids:
            out.append(Violation("DuplicateId", entity.id))
        ids.add(entity.id)

    for app in scene.appliances:
        if not scene.in_bounds(app.cell):
            out.append(Violation("ApplianceOutOfBounds", app.id, f"cell {app.cell}"))
        if (app.is_open is not None) != app.kind.openable:
            out.append(Violation("ApplianceState", app.id, f"{app.kind.value} open state"))
        if (app.is_on is not None) != app.kind.toggleable:
            out.append(Violation("ApplianceState", app.id, f"{app.kind.value} power state"))

    containers = {a.id: a for a in scene.appliances}
    objects = {o.id: o for o in scene.objects}
    held = [o for o in scene.objects if o.held]
    if len(held) > 1:
        out.append(Violation("MultipleHeld", ",".join(o.id for o in held)))
    for obj in scene.objects:
        unknown = set(obj.flags) - set(OBJECT_FLAGS)
        if unknown:
            out.append(Violation("UnknownFlag", obj.id, ",".join(sorted(unknown))))
        if obj.held:
            if obj.cell is not None:
                out.append(Violation("HeldWithCell", obj.id))
            if obj.inside is not None:
                out.append(Violation("HeldInsideReceptacle", obj.id))
            continue
        if obj.cell is None:
            out.append(Violation("MissingCell", obj.id))
            continue
        if not scene.in_bounds(obj.cell):
            out.append(Violation("ObjectOutOfBounds", obj.id, f"cell {obj.cell}"))
            continue
        closed_in = False
        if obj.inside is not None:
            host = containers.get(obj.inside)
            if host is None and obj.inside in objects and obj.inside != obj.id:
                host_cell = objects[obj.inside].cell
            elif host is not None and host.kind.receptacle:
                host_cell = host.cell
                closed_in = host.is_open is False
            else:
                out.append(Violation("UnknownReceptacle", obj.id, f"in={obj.inside}"))
                continue
            if host_cell != obj.cell:
                out.append(Violation("ReceptacleCell", obj.id, f"not in the cell of {obj.inside}"))
        if not closed_in and all(
            scene.material_between(obj.cell, neighbor(obj.cell, h)) is Material.OPAQUE
            for h in HEADINGS
        ):
            out.append(Violation("ObjectEnclosed", obj.id))
    return out


# -- parsing -----------------------------------------------------------------


class SceneError(ValueError):
    pass


class SceneSyntaxError(SceneError):
    def __init__(self, line: int, column: int, message: str):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class SceneSemanticError(SceneError):
    def __init__(self, violations: list[Violation]):
        super().__init__("; ".join(str(v) for v in violations))
        self.violations = violations


@dataclass
class _Tokens:
    """Tokenised line with column bookkeeping for error messages."""

    lineno: int
    raw: str
    words: list[str] = field(default_factory=list)
    cols: list[int] = field(default_factory=list)

    def error(self, index: int, message: str) -> SceneSyntaxError:
        col = self.cols[index] if index < len(self.cols) else len(self.raw.rstrip()) + 1
        return SceneSyntaxError(self.lineno, col, message)

    def int(self, index: int, what: str) -> int:
        try:
            return int(self.words[index])
        except IndexError:
            raise self.error(index, f"missing {what}") from None
        except ValueError:
            raise self.error(index, f"expected integer {what}, got {self.words[index]!r}") from None

    def float(self, index: int, what: str) -> float:
        try:
            return float(self.words[index])
        except IndexError:
            raise self.error(index, f"missing {what}") from None
        except ValueError:
            raise self.error(index, f"expected number {what}, got {self.words[index]!r}") from None

    def word(self, index: int, what: str) -> str:
        if index >= len(self.words):
            raise self.error(index, f"missing {what}")
        return self.words[index]


def tokenize(text: str) -> Iterator[_Tokens]:
    """Yield non-empty lines split into shell-style words with 1-based columns."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        lexer = shlex.shlex(raw, posix=True)
        lexer.whitespace_split = True
        lexer.commenters = "#"
        try:
            words = list(lexer)
        except ValueError as exc:
            raise SceneSyntaxError(lineno, len(raw) + 1, str(exc)) from None
        if not words:
            continue
        cols, pos = [], 0
        for w in words:
            while pos < len(raw) and raw[pos].isspace():
                pos += 1
            cols.append(pos + 1)
            end = raw.find(" ", pos)
            pos = len(raw) if end < 0 else end
        yield _Tokens(lineno, raw, words, cols)


def parse_scene(text: str, *, validate: bool = True) -> Scene:
    """Parse a scene file; raises ``SceneSyntaxError`` or ``SceneSemanticError``."""
    size: Optional[tuple[int, int]] = None
    light = 1.0
    walls: list[EdgeWall] = []
    objects: list[ObjectInstance] = []
    appliances: list[Appliance] = []
    semantic: list[Violation] = []
    seen_edges: set[Edge] = set()

    for tok in tokenize(text):
        head = tok.words[0]
        if head == "size":
            if size is not None:
                raise tok.error(0, "duplicate size statement")
            size = (tok.int(1, "width"), tok.int(2, "height"))
            _expect_len(tok, 3)
        elif head == "light":
            light = tok.float(1, "light level")
            _expect_len(tok, 2)
        elif head == "wall":
            a = (tok.int(1, "x1"), tok.int(2, "y1"))
            b = (tok.int(3, "x2"), tok.int(4, "y2"))
            try:
                material = Material(tok.word(5, "material").lower())
            except ValueError:
                raise tok.error(5, f"unknown material {tok.words[5]!r}") from None
            _expect_len(tok, 6)
            if not adjacent(a, b):
                semantic.append(
                    Violation("WallAdjacency", f"{a[0]} {a[1]} {b[0]} {b[1]}", "cells not 4-adjacent")
                )
                continue
            edge = canonical_edge(a, b)
            if edge in seen_edges:
                semantic.append(Violation("DuplicateEdge", _edge_name(edge)))
                continue
            seen_edges.add(edge)
            walls.append(EdgeWall(edge, material))
        elif head == "object":
            objects.append(_parse_object(tok))
        elif head == "appliance":
            appliances.append(_parse_appliance(tok, semantic))
        else:
            raise tok.error(0, f"unknown statement {head!r}")

    if size is None:
        raise SceneSyntaxError(1, 1, "missing size statement")
    scene = Scene(size[0], size[1], tuple(walls), tuple(objects), tuple(appliances), light)
    if validate:
        semantic.extend(validate_scene(scene))
        if semantic:
            raise SceneSemanticError(semantic)
    return scene


def _expect_len(tok: _Tokens, n: int) -> None:
    if len(tok.words) > n:
        raise tok.error(n, f"unexpected token {tok.words[n]!r}")


def _parse_object(tok: _Tokens) -> ObjectInstance:
    oid = tok.word(1, "object id")
    cls = tok.word(2, "object class")
    if tok.word(3, "cell or 'held'") == "held":
        cell, rest, flags = None, 4, {"Held"}
    else:
        cell, rest, flags = (tok.int(3, "x"), tok.int(4, "y")), 5, set()
    inside = None
    for i in range(rest, len(tok.words)):
        w = tok.words[i]
        if w.startswith("in="):
            inside = w[3:]
            if not inside:
                raise tok.error(i, "empty receptacle id")
        elif w.capitalize() in OBJECT_FLAGS and w != "held":
            flags.add(w.capitalize())
        else:
            raise tok.error(i, f"unknown object state {w!r}")
    return ObjectInstance(oid, cls, cell, frozenset(flags), inside)


def _parse_appliance(tok: _Tokens, semantic: list[Violation]) -> Appliance:
    aid = tok.word(1, "appliance id")
    try:
        kind = ApplianceKind(tok.word(2, "appliance kind"))
    except ValueError:
        raise tok.error(2, f"unknown appliance kind {tok.words[2]!r}") from None
    cell = (tok.int(3, "x"), tok.int(4, "y"))
    is_open = False if kind.openable else None
    is_on = False if kind.toggleable else None
    for i in range(5, len(tok.words)):
        w = tok.words[i]
        if w in ("open", "closed"):
            if not kind.openable:
                semantic.append(Violation("ApplianceState", aid, f"{kind.value} is not openable"))
            else:
                is_open = w == "open"
        elif w in ("on", "off"):
            if not kind.toggleable:
                semantic.append(Violation("ApplianceState", aid, f"{kind.value} is not toggleable"))
            else:
                is_on = w == "on"
        else:
            raise tok.error(i, f"unknown appliance state {w!r}")
    return Appliance(aid, kind, cell, is_open, is_on)


def serialize_scene(scene: Scene) -> str:
    lines = [f"size {scene.width} {scene.height}", f"light {scene.light_level!r}"]
    for w in scene.walls:
        lines.append(f"wall {_edge_name(w.edge)} {w.material.value}")
    for a in scene.appliances:
        parts = ["appliance", a.id, a.kind.value, str(a.cell[0]), str(a.cell[1])]
        if a.is_open is not None:
            parts.append("open" if a.is_open else "closed")
        if a.is_on is not None:
            parts.append("on" if a.is_on else "off")
        lines.append(" ".join(parts))
    for o in scene.objects:
        parts = ["object", o.id, o.cls]
        parts += ["held"] if o.cell is None else [str(o.cell[0]), str(o.cell[1])]
        parts += [f.lower() for f in OBJECT_FLAGS if f in o.flags and f != "Held"]
        if o.inside is not None:
            parts.append(f"in={o.inside}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def load_scene(path) -> Scene:
    with open(path, encoding="utf-8") as fh:
        return parse_scene(fh.read())
