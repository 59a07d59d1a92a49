from .actions import (
    MOVE_AHEAD,
    ROTATE_LEFT,
    ROTATE_RIGHT,
    STOP,
    Action,
    ActionResult,
    execute_action,
    reach_cells,
    reach_classes,
)
from .mapping import (
    BLOCKED,
    FREE,
    UNKNOWN,
    SemanticMap,
    distances,
    frontier_targets,
    integrate,
    next_frontier,
    plan_path,
    update_map,
)
from .policy import Agent, Subgoal, SubgoalPlan, UnknownGoalKind, decompose
from .profile import AgentProfile, ProfileKind

__all__ = [
    "Action", "ActionResult", "execute_action", "reach_cells", "reach_classes",
    "MOVE_AHEAD", "ROTATE_LEFT", "ROTATE_RIGHT", "STOP",
    "SemanticMap", "UNKNOWN", "FREE", "BLOCKED", "integrate", "update_map",
    "plan_path", "next_frontier", "frontier_targets", "distances",
    "Agent", "Subgoal", "SubgoalPlan", "UnknownGoalKind", "decompose",
    "AgentProfile", "ProfileKind",
]
