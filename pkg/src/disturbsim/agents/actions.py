"""Discrete action space and the environment transition."""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Optional

from ..scene import AgentPose, Appliance, ApplianceKind, Cell, ObjectInstance, Scene

ACTION_NAMES = (
    "MoveAhead", "RotateLeft", "RotateRight", "Pickup", "Put", "Open", "Close",
    "ToggleOn", "ToggleOff", "Examine", "Stop",
)
_TARGETED = {"Pickup", "Put", "Open", "Close", "ToggleOn", "ToggleOff", "Examine"}


@dataclass(frozen=True)
class Action:
    """An action name plus, for interactions, a target.

    Targets are an entity id or a class/kind name; kinds resolve to the first
    matching entity within reach (own cell before faced cell, then by id).
    """

    name: str
    target: str = ""

    def __post_init__(self) -> None:
        if self.name not in ACTION_NAMES:
            raise ValueError(f"unknown action {self.name!r}")
        if (self.name in _TARGETED) != bool(self.target):
            raise ValueError(f"action {self.name} target mismatch: {self.target!r}")

    def __str__(self) -> str:
        return f"{self.name}({self.target})" if self.target else self.name

    @classmethod
    def parse(cls, text: str) -> "Action":
        m = re.fullmatch(r"(\w+)(?:\((\w*)\))?", text.strip())
        if not m:
            raise ValueError(f"malformed action {text!r}")
        return cls(m.group(1), m.group(2) or "")


MOVE_AHEAD = Action("MoveAhead")
ROTATE_LEFT = Action("RotateLeft")
ROTATE_RIGHT = Action("RotateRight")
STOP = Action("Stop")


@dataclass(frozen=True)
class ActionResult:
    success: bool
    bump: bool = False
    events: tuple[str, ...] = ()
    message: str = ""


def reach_cells(scene: Scene, pose: AgentPose) -> list[Cell]:
    """Own cell, plus the faced cell when no wall stands in between."""
    cells = [pose.cell]
    faced = pose.faced_cell()
    if scene.in_bounds(faced) and scene.material_between(pose.cell, faced) is None:
        cells.append(faced)
    return cells


def reach_classes(scene: Scene, pose: AgentPose) -> list[str]:
    cells = set(reach_cells(scene, pose))
    found = {a.cls for a in scene.appliances if a.cell in cells}
    found |= {o.cls for o in scene.objects if o.cell in cells and not o.held}
    return sorted(found)


def _appliance_in_reach(scene: Scene, pose: AgentPose, target: str) -> Optional[Appliance]:
    for cell in reach_cells(scene, pose):
        for a in scene.appliances:
            if a.cell == cell and target in (a.id, a.kind.value):
                return a
    return None


def _fail(message: str, bump: bool = False) -> ActionResult:
    return ActionResult(False, bump=bump, message=message)


def execute_action(
    scene: Scene, pose: AgentPose, action: Action
) -> tuple[Scene, AgentPose, ActionResult]:
    """Apply ``action``; failures leave scene and pose unchanged.

    The agent's inventory is the scene object flagged ``Held``.
    """
    name = action.name
    if name == "Stop":
        return scene, pose, ActionResult(True)
    if name == "RotateLeft":
        return scene, AgentPose(pose.cell, pose.heading.left()), ActionResult(True)
    if name == "RotateRight":
        return scene, AgentPose(pose.cell, pose.heading.right()), ActionResult(True)
    if name == "MoveAhead":
        nxt = pose.faced_cell()
        if not scene.in_bounds(nxt) or scene.material_between(pose.cell, nxt) is not None:
            return scene, pose, _fail("blocked", bump=True)
        return scene, AgentPose(nxt, pose.heading), ActionResult(True)

    held = scene.held_object()
    closed = {a.id for a in scene.appliances if a.is_open is False}

    if name == "Pickup":
        if held is not None:
            return scene, pose, _fail("hands full")
        for cell in reach_cells(scene, pose):
            for o in scene.objects:
                if (
                    o.cell == cell and action.target in (o.id, o.cls)
                    and not (o.inside is not None and o.inside in closed)
                ):
                    taken = replace(o, cell=None, inside=None, flags=o.flags | {"Held"})
                    return scene.replace_object(taken), pose, ActionResult(
                        True, events=(f"pickup:{o.cls}",)
                    )
        return scene, pose, _fail(f"no {action.target} within reach")

    if name == "Put":
        if held is None:
            return scene, pose, _fail("holding nothing")
        host = _appliance_in_reach(scene, pose, action.target)
        if host is None or not host.kind.receptacle:
            return scene, pose, _fail(f"no {action.target} receptacle within reach")
        if host.is_open is False:
            return scene, pose, _fail(f"{host.id} is closed")
        placed = replace(held, cell=host.cell, inside=host.id, flags=held.flags - {"Held"})
        return scene.replace_object(placed), pose, ActionResult(
            True, events=(f"put:{held.cls}:{host.kind.value}",)
        )

    if name in ("Open", "Close"):
        host = _appliance_in_reach(scene, pose, action.target)
        want = name == "Open"
        if host is None or not host.kind.openable or host.is_open == want:
            return scene, pose, _fail(f"cannot {name.lower()} {action.target}")
        return scene.replace_appliance(replace(host, is_open=want)), pose, ActionResult(
            True, events=(f"{name.lower()}:{host.kind.value}",)
        )

    if name in ("ToggleOn", "ToggleOff"):
        host = _appliance_in_reach(scene, pose, action.target)
        want = name == "ToggleOn"
        if host is None or not host.kind.toggleable or host.is_on == want:
            return scene, pose, _fail(f"cannot toggle {action.target}")
        scene = scene.replace_appliance(replace(host, is_on=want))
        events = [f"{name.lower()}:{host.kind.value}"]
        if not want and host.kind is ApplianceKind.MICROWAVE:
            for o in scene.objects:
                if o.inside == host.id:
                    scene = scene.replace_object(replace(o, flags=o.flags | {"Heated"}))
                    events.append(f"heat:{o.cls}")
        return scene, pose, ActionResult(True, events=tuple(events))

    if name == "Examine":
        subject: Optional[ObjectInstance] = None
        if held is not None and action.target in (held.id, held.cls):
            subject = held
        else:
            cells = reach_cells(scene, pose)
            for o in scene.objects:
                if o.cell in cells and action.target in (o.id, o.cls):
                    subject = o
                    break
        lamp = _appliance_in_reach(scene, pose, ApplianceKind.LAMP.value)
        if subject is None:
            return scene, pose, _fail(f"no {action.target} to examine")
        if lamp is None or not lamp.is_on:
            return scene, pose, _fail("no lit lamp within reach")
        examined = replace(subject, flags=subject.flags | {"Examined"})
        return scene.replace_object(examined), pose, ActionResult(
            True, events=(f"examine:{subject.cls}",)
        )

    return scene, pose, _fail(f"unsupported action {action}")
