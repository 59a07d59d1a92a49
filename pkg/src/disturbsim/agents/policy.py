"""Template task decomposition and the classical map-and-search policy."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from ..scene import AgentPose, Cell, Edge, heading_between, neighbor
from ..sensors import ObservationBundle
from ..tasks import ExaminedInLight, GoalCondition, ObjectIn, ObjectState, TaskSpec, TwoObjectsIn
from .actions import MOVE_AHEAD, ROTATE_LEFT, ROTATE_RIGHT, STOP, Action
from .mapping import SemanticMap, integrate, next_frontier, plan_path
from .profile import AgentProfile

SUBGOAL_KINDS = ("Find", "GoTo", "Pickup", "PlaceIn", "Heat", "Examine")


@dataclass(frozen=True)
class Subgoal:
    kind: str
    target: str

    def __post_init__(self) -> None:
        if self.kind not in SUBGOAL_KINDS:
            raise ValueError(f"unknown subgoal kind {self.kind!r}")

    def __str__(self) -> str:
        return f"{self.kind}({self.target})"


@dataclass
class SubgoalPlan:
    subgoals: tuple[Subgoal, ...] = ()
    cursor: int = 0

    def __len__(self) -> int:
        return len(self.subgoals)

    @property
    def current(self) -> Optional[Subgoal]:
        return self.subgoals[self.cursor] if self.cursor < len(self.subgoals) else None


class UnknownGoalKind(ValueError):
    pass


def _pick_place(obj: str, kind: str) -> list[Subgoal]:
    return [
        Subgoal("Find", obj), Subgoal("GoTo", obj), Subgoal("Pickup", obj),
        Subgoal("GoTo", kind), Subgoal("PlaceIn", kind),
    ]


def _heat_place(obj: str, kind: str) -> list[Subgoal]:
    return [
        Subgoal("Find", obj), Subgoal("GoTo", obj), Subgoal("Pickup", obj),
        Subgoal("Find", "Microwave"), Subgoal("GoTo", "Microwave"), Subgoal("Heat", obj),
        Subgoal("Find", kind), Subgoal("GoTo", kind), Subgoal("PlaceIn", kind),
    ]


def _examine(obj: str) -> list[Subgoal]:
    return [
        Subgoal("Find", obj), Subgoal("GoTo", obj), Subgoal("Pickup", obj),
        Subgoal("Find", "Lamp"), Subgoal("GoTo", "Lamp"), Subgoal("Examine", obj),
    ]


def decompose(task: TaskSpec | Sequence[GoalCondition]) -> SubgoalPlan:
    """Expand goal conditions into a subgoal plan.

    ``[state C Heated, objectin C K]`` becomes heat-and-place (9 subgoals),
    ``objectin C K`` pick-and-place (5), ``twoin C K`` two rounds of
    pick-and-place (10) and ``examined C`` examine-in-light (6).
    """
    goal = list(task.goal if isinstance(task, TaskSpec) else task)
    out: list[Subgoal] = []
    i = 0
    while i < len(goal):
        c = goal[i]
        nxt = goal[i + 1] if i + 1 < len(goal) else None
        if (
            isinstance(c, ObjectState) and c.flag == "Heated"
            and isinstance(nxt, ObjectIn) and nxt.cls == c.cls
        ):
            out += _heat_place(c.cls, nxt.kind)
            i += 2
            continue
        if isinstance(c, ObjectIn):
            out += _pick_place(c.cls, c.kind)
        elif isinstance(c, TwoObjectsIn):
            out += _pick_place(c.cls, c.kind) + _pick_place(c.cls, c.kind)
        elif isinstance(c, ExaminedInLight):
            out += _examine(c.cls)
        else:
            raise UnknownGoalKind(f"no template for goal {c}")
        i += 1
    return SubgoalPlan(tuple(out))


_MACROS = {
    "Heat": lambda obj: [
        Action("Put", "Microwave"), Action("ToggleOn", "Microwave"),
        Action("ToggleOff", "Microwave"), Action("Pickup", obj),
    ],
    "Examine": lambda obj: [Action("ToggleOn", "Lamp"), Action("Examine", obj)],
}
# Macro steps whose failure is tolerated (the lamp may already be on).
_OPTIONAL = {("Examine", 0)}
_MACRO_RETRIES = 2


@dataclass
class Agent:
    """Map, search and template policy shared by all profiles.

    The profile only decides which range channel feeds the obstacle map.
    The agent tracks its own pose and inventory from action feedback.
    """

    profile: AgentProfile
    plan: SubgoalPlan
    pose: AgentPose
    width: int
    height: int
    map: SemanticMap = field(init=False)
    holding: Optional[str] = None
    last_action: Optional[Action] = None
    halted: bool = False
    nav_target: Optional[Cell] = None
    new_edges: list[Edge] = field(default_factory=list)
    _macro: list[Action] = field(default_factory=list)
    _macro_pos: int = 0
    _macro_fails: int = 0

    def __post_init__(self) -> None:
        self.map = SemanticMap.fresh(self.width, self.height)

    # -- bookkeeping ---------------------------------------------------------------

    def _absorb(self, obs: ObservationBundle) -> None:
        a = self.last_action
        if a is None:
            return
        ok = obs.last_success
        if a.name == "MoveAhead" and ok and not obs.bump:
            self.pose = AgentPose(neighbor(self.pose.cell, self.pose.heading), self.pose.heading)
        elif a.name == "RotateLeft":
            self.pose = AgentPose(self.pose.cell, self.pose.heading.left())
        elif a.name == "RotateRight":
            self.pose = AgentPose(self.pose.cell, self.pose.heading.right())
        elif a.name == "Pickup" and ok:
            self.holding = a.target
            self.map.forget(a.target, self.pose.cell)
        elif a.name == "Put" and ok and self.holding is not None:
            # The placed object is accounted for; never fetch it again.
            self.map.forget(self.holding, self.pose.cell, refute=True)
            self.holding = None

        sg = self.plan.current
        if sg is None:
            return
        if self._macro:
            if ok or (sg.kind, self._macro_pos) in _OPTIONAL:
                self._macro_pos += 1
                self._macro_fails = 0
            else:
                self._macro_fails += 1
            if self._macro_pos >= len(self._macro):
                self._macro = []
                self._macro_pos = 0
                self.plan.cursor += 1
            elif self._macro_fails > _MACRO_RETRIES:
                # Wrong place after all: forget the appliance and look again.
                self._abandon_macro(sg)
        elif sg.kind == "Pickup" and a.name == "Pickup":
            if ok:
                self.plan.cursor += 1
            else:
                self.map.forget(sg.target, self.pose.cell, refute=True)
                self.plan.cursor -= 1
        elif sg.kind == "PlaceIn" and a.name == "Put":
            if ok:
                self.plan.cursor += 1
            else:
                self.map.forget(sg.target, self.pose.cell, refute=True)
                self.plan.cursor -= 1

    def _abandon_macro(self, sg: Subgoal) -> None:
        appliance = "Microwave" if sg.kind == "Heat" else "Lamp"
        self.map.forget(appliance, self.pose.cell, refute=True)
        self._macro = []
        self._macro_pos = 0
        self._macro_fails = 0
        self.plan.cursor -= 1

    # -- policy ------------------------------------------------------------------------

    def step(self, obs: ObservationBundle) -> Action:
        self._absorb(obs)
        self.new_edges = integrate(self.map, obs, self.pose, self.profile)
        action = STOP if self.halted else self._decide()
        self.last_action = action
        return action

    def _decide(self) -> Action:
        for _ in range(4 * len(self.plan) + 8):
            sg = self.plan.current
            if sg is None:
                return self._halt()
            if self._macro:
                return self._macro[self._macro_pos]
            if sg.kind == "Find":
                if self.map.best_cell(sg.target) is not None:
                    self.plan.cursor += 1
                    continue
                return self._explore()
            if sg.kind == "GoTo":
                loc = self.map.best_cell(sg.target)
                if loc is None:
                    return self._explore()
                if loc == self.pose.cell:
                    self.plan.cursor += 1
                    continue
                path = plan_path(self.map, self.pose.cell, loc)
                if path is None:
                    self.map.forget(sg.target, loc, refute=True)
                    continue
                self.nav_target = loc
                return self._move_toward(path[1])
            # Interaction subgoals act on the agent's own cell.
            where = self._interaction_site(sg)
            if where is None or where != self.pose.cell:
                self.plan.cursor -= 1
                continue
            if sg.kind == "Pickup":
                if self.holding == sg.target:
                    self.plan.cursor += 1
                    continue
                return Action("Pickup", sg.target)
            if sg.kind == "PlaceIn":
                return Action("Put", sg.target)
            self._macro = _MACROS[sg.kind](sg.target)
            self._macro_pos = 0
            self._macro_fails = 0
            return self._macro[0]
        return self._halt()

    def _interaction_site(self, sg: Subgoal) -> Optional[Cell]:
        if sg.kind == "Pickup":
            if self.holding == sg.target:
                return self.pose.cell
            return self.map.best_cell(sg.target)
        if sg.kind == "PlaceIn":
            return self.map.best_cell(sg.target)
        if sg.kind == "Heat":
            return self.map.best_cell("Microwave")
        return self.map.best_cell("Lamp")

    def _halt(self) -> Action:
        self.halted = True
        self.nav_target = None
        return STOP

    def _explore(self) -> Action:
        target = next_frontier(self.map, self.pose)
        if target is None:
            return self._halt()
        path = plan_path(self.map, self.pose.cell, target)
        self.nav_target = target
        return self._move_toward(path[1])

    def _move_toward(self, cell: Cell) -> Action:
        want = heading_between(self.pose.cell, cell)
        if want == self.pose.heading:
            return MOVE_AHEAD
        if want == self.pose.heading.left():
            return ROTATE_LEFT
        return ROTATE_RIGHT
