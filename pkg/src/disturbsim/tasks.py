"""Declarative tasks, goal checking and start-position generation.

Task file format::

    task ID floorplan=PATH
    goal objectin CLASS KIND
    goal state CLASS FLAG
    goal twoin CLASS KIND
    goal examined CLASS
    variant "goal phrasing"      (exactly three)
    start X Y HEADING            (exactly four; HEADING is N, E, S or W)
    mindist D                    (optional, default 3)

``floorplan`` is resolved relative to the task file.
"""

from __future__ import annotations

import os
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .scene import (
    HEADINGS,
    AgentPose,
    Cell,
    Heading,
    Scene,
    SceneSyntaxError,
    Violation,
    load_scene,
    neighbor,
    tokenize,
)

VARIANTS_PER_TASK = 3
STARTS_PER_TASK = 4
DEFAULT_MIN_DIST = 3


@dataclass(frozen=True)
class ObjectIn:
    cls: str
    kind: str


@dataclass(frozen=True)
class ObjectState:
    cls: str
    flag: str


@dataclass(frozen=True)
class TwoObjectsIn:
    cls: str
    kind: str


@dataclass(frozen=True)
class ExaminedInLight:
    cls: str


GoalCondition = Union[ObjectIn, ObjectState, TwoObjectsIn, ExaminedInLight]


@dataclass(frozen=True)
class TaskSpec:
    id: str
    floorplan: str
    goal: tuple[GoalCondition, ...] = ()
    variants: tuple[str, ...] = ()
    starts: tuple[AgentPose, ...] = ()
    min_dist: int = DEFAULT_MIN_DIST
    # Directory the floorplan path is relative to; not serialized.
    base_dir: str = field(default="", compare=False)

    def floorplan_path(self) -> Path:
        return Path(self.base_dir) / self.floorplan

    def load_floorplan(self) -> Scene:
        return load_scene(self.floorplan_path())


# -- goal checking ------------------------------------------------------------------


def _container_kind(scene: Scene, container_id: str) -> Optional[str]:
    for a in scene.appliances:
        if a.id == container_id:
            return a.kind.value
    for o in scene.objects:
        if o.id == container_id:
            return o.cls
    return None


def _holds(scene: Scene, cond: GoalCondition) -> bool:
    if isinstance(cond, ObjectState):
        return any(o.cls == cond.cls and cond.flag in o.flags for o in scene.objects)
    if isinstance(cond, ExaminedInLight):
        return any(o.cls == cond.cls and "Examined" in o.flags for o in scene.objects)
    inside = [
        o for o in scene.objects
        if o.cls == cond.cls and o.inside is not None
        and _container_kind(scene, o.inside) == cond.kind
    ]
    if isinstance(cond, ObjectIn):
        return len(inside) >= 1
    return len({o.id for o in inside}) >= 2


def check_goal(scene: Scene, task: Union[TaskSpec, Sequence[GoalCondition]]) -> list[bool]:
    """Per-condition truth values; the task succeeds when all are true."""
    goal = task.goal if isinstance(task, TaskSpec) else task
    return [_holds(scene, c) for c in goal]


def task_succeeded(scene: Scene, task: Union[TaskSpec, Sequence[GoalCondition]]) -> bool:
    return all(check_goal(scene, task))


# -- subgoal progress --------------------------------------------------------------


def subgoal_done(subgoal, record) -> bool:
    """Whether ``record`` (one logged step) witnesses the subgoal's postcondition."""
    kind, target = subgoal.kind, subgoal.target
    if kind == "Find":
        return target in record.detected or target in record.reach
    if kind == "GoTo":
        return target in record.reach
    if kind == "Pickup":
        return f"pickup:{target}" in record.events
    if kind == "PlaceIn":
        return any(e.startswith("put:") and e.endswith(f":{target}") for e in record.events)
    if kind == "Heat":
        return f"heat:{target}" in record.events
    if kind == "Examine":
        return f"examine:{target}" in record.events
    raise ValueError(f"unknown subgoal kind {kind!r}")


def completed_subgoals(steps: Iterable, plan) -> int:
    """Length of the plan prefix whose postconditions held, in order."""
    subgoals = list(plan.subgoals if hasattr(plan, "subgoals") else plan)
    done = 0
    for record in steps:
        while done < len(subgoals) and subgoal_done(subgoals[done], record):
            done += 1
    return done


def subgoal_progress(log, plan, final_scene: Optional[Scene] = None, task=None) -> Fraction:
    """Fraction of subgoals completed in an episode.

    A successful episode counts as fully complete, so Goal Condition Success
    can never fall below Task Success.
    """
    subgoals = list(plan.subgoals if hasattr(plan, "subgoals") else plan)
    if not subgoals:
        return Fraction(1) if getattr(log, "outcome", "Success") == "Success" else Fraction(0)
    if task is not None and final_scene is not None and task_succeeded(final_scene, task):
        return Fraction(1)
    return Fraction(completed_subgoals(log.steps, subgoals), len(subgoals))


# -- start positions -----------------------------------------------------------------


class InfeasibleStarts(ValueError):
    pass


def _components(scene: Scene) -> list[list[Cell]]:
    seen: set[Cell] = set()
    comps = []
    for cell in scene.cells():
        if cell in seen:
            continue
        comp, queue = [], deque([cell])
        seen.add(cell)
        while queue:
            c = queue.popleft()
            comp.append(c)
            for h in HEADINGS:
                n = neighbor(c, h)
                if scene.in_bounds(n) and n not in seen and scene.material_between(c, n) is None:
                    seen.add(n)
                    queue.append(n)
        comps.append(sorted(comp, key=lambda c: (c[1], c[0])))
    return comps


def start_cells(scene: Scene) -> list[Cell]:
    """Cells an agent may start on: the largest open region, minus appliance cells."""
    comps = _components(scene)
    best = max(comps, key=len)
    taken = {a.cell for a in scene.appliances}
    return [c for c in best if c not in taken]


def manhattan(a: Cell, b: Cell) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def generate_start_positions(
    scene: Scene,
    n: int,
    min_dist: int,
    rng: Union[np.random.Generator, int],
    existing: Sequence[AgentPose] = (),
    max_draws: int = 10_000,
) -> list[AgentPose]:
    """Rejection-sample ``n`` poses pairwise at least ``min_dist`` apart (Manhattan).

    ``existing`` poses constrain the distance but are not returned.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    cells = start_cells(scene)
    if not cells:
        raise InfeasibleStarts("no reachable cell to start from")
    chosen: list[AgentPose] = []
    taken = [p.cell for p in existing]
    for _ in range(max_draws):
        if len(chosen) == n:
            break
        cell = cells[int(rng.integers(len(cells)))]
        heading = HEADINGS[int(rng.integers(4))]
        if all(manhattan(cell, c) >= min_dist for c in taken) and cell not in taken:
            chosen.append(AgentPose(cell, heading))
            taken.append(cell)
    if len(chosen) < n:
        raise InfeasibleStarts(
            f"min_dist={min_dist}: only {len(chosen)} of {n} start positions "
            f"found after {max_draws} draws"
        )
    return chosen


# -- validation ----------------------------------------------------------------------


def validate_task(task: TaskSpec, scene: Scene) -> list[Violation]:
    out = []
    if len(task.variants) != VARIANTS_PER_TASK:
        out.append(Violation("VariantCount", task.id, f"{len(task.variants)} variants"))
    if len(task.starts) != STARTS_PER_TASK:
        out.append(Violation("StartCount", task.id, f"{len(task.starts)} start positions"))
    allowed = set(start_cells(scene))
    cells = [p.cell for p in task.starts]
    for p in task.starts:
        if p.cell not in allowed:
            out.append(Violation("StartInvalid", task.id, f"start {p}"))
    if len(set(cells)) != len(cells):
        out.append(Violation("StartDuplicate", task.id))
    for i, a in enumerate(cells):
        for b in cells[i + 1:]:
            if manhattan(a, b) < task.min_dist:
                out.append(Violation("StartTooClose", task.id, f"{a} and {b}"))
    classes = {o.cls for o in scene.objects} | {a.kind.value for a in scene.appliances}
    for cond in task.goal:
        for name in (getattr(cond, "cls", None), getattr(cond, "kind", None)):
            if name is not None and name not in classes:
                out.append(Violation("UnknownClass", task.id, name))
    return out


# -- parsing ---------------------------------------------------------------------------


def parse_task(text: str, base_dir: Union[str, os.PathLike] = "") -> TaskSpec:
    tid = floorplan = None
    goal: list[GoalCondition] = []
    variants: list[str] = []
    starts: list[AgentPose] = []
    min_dist = DEFAULT_MIN_DIST
    for tok in tokenize(text):
        head = tok.words[0]
        if head == "task":
            tid = tok.word(1, "task id")
            spec = tok.word(2, "floorplan=PATH")
            if not spec.startswith("floorplan="):
                raise tok.error(2, "expected floorplan=PATH")
            floorplan = spec[len("floorplan="):]
        elif head == "goal":
            kind = tok.word(1, "goal kind")
            if kind == "objectin":
                goal.append(ObjectIn(tok.word(2, "class"), tok.word(3, "container kind")))
            elif kind == "state":
                goal.append(ObjectState(tok.word(2, "class"), tok.word(3, "flag").capitalize()))
            elif kind == "twoin":
                goal.append(TwoObjectsIn(tok.word(2, "class"), tok.word(3, "container kind")))
            elif kind == "examined":
                goal.append(ExaminedInLight(tok.word(2, "class")))
            else:
                raise tok.error(1, f"unknown goal kind {kind!r}")
        elif head == "variant":
            variants.append(tok.word(1, "variant text"))
        elif head == "start":
            try:
                heading = Heading.parse(tok.word(3, "heading"))
            except ValueError as exc:
                raise tok.error(3, str(exc)) from None
            starts.append(AgentPose((tok.int(1, "x"), tok.int(2, "y")), heading))
        elif head == "mindist":
            min_dist = tok.int(1, "minimum distance")
        else:
            raise tok.error(0, f"unknown statement {head!r}")
    if tid is None:
        raise SceneSyntaxError(1, 1, "missing task statement")
    return TaskSpec(
        tid, floorplan, tuple(goal), tuple(variants), tuple(starts), min_dist, str(base_dir)
    )


def serialize_task(task: TaskSpec) -> str:
    lines = [f"task {task.id} floorplan={task.floorplan}"]
    for c in task.goal:
        if isinstance(c, ObjectIn):
            lines.append(f"goal objectin {c.cls} {c.kind}")
        elif isinstance(c, ObjectState):
            lines.append(f"goal state {c.cls} {c.flag}")
        elif isinstance(c, TwoObjectsIn):
            lines.append(f"goal twoin {c.cls} {c.kind}")
        else:
            lines.append(f"goal examined {c.cls}")
    for v in task.variants:
        escaped = v.replace("\\", "\\\\").replace('"', '\\"')
        lines.append(f'variant "{escaped}"')
    for p in task.starts:
        lines.append(f"start {p}")
    lines.append(f"mindist {task.min_dist}")
    return "\n".join(lines) + "\n"


def load_task(path: Union[str, os.PathLike]) -> TaskSpec:
    path = Path(path)
    return parse_task(path.read_text(encoding="utf-8"), base_dir=path.parent)


def load_corpus(directory: Union[str, os.PathLike, None] = None) -> list[TaskSpec]:
    """Every ``*.task`` file in ``directory`` (default: the bundled corpus), by id."""
    directory = Path(directory) if directory is not None else data_dir() / "tasks"
    return sorted((load_task(p) for p in directory.glob("*.task")), key=lambda t: t.id)


def data_dir() -> Path:
    return Path(__file__).resolve().parent / "data"
