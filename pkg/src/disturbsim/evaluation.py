"""Episode runner, run matrix, metrics, semantic-map renders and export.

Task Success is the share of episodes whose goal conditions all hold at
termination. Goal Condition Success pools completed subgoals over all
episodes of a group (micro average); the per-episode mean (macro average) is
reported alongside it.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from decimal import ROUND_HALF_UP, Decimal, localcontext
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .agents import (
    BLOCKED,
    FREE,
    Agent,
    AgentProfile,
    SemanticMap,
    decompose,
    execute_action,
    reach_classes,
)
from .disturbance import Disturbance, compose
from .scene import AgentPose, Heading, Scene
from .sensors import DrawStream, observe
from .tasks import TaskSpec, completed_subgoals, task_succeeded

SCHEMA_VERSION = 1
DEFAULT_STEP_BUDGET = 500
OUTCOMES = ("Success", "FailLimit", "StepBudget")


@dataclass(frozen=True)
class Condition:
    label: str
    disturbances: tuple[Disturbance, ...] = ()


@dataclass
class StepRecord:
    t: int
    pose: str
    action: str
    success: bool
    bump: bool = False
    events: list[str] = field(default_factory=list)
    detected: list[str] = field(default_factory=list)
    phantoms: list[list] = field(default_factory=list)
    reach: list[str] = field(default_factory=list)
    target: Optional[list[int]] = None
    new_edges: list[list[int]] = field(default_factory=list)


@dataclass
class EpisodeLog:
    task_id: str
    variant: int
    start: int
    condition: str
    profile: str
    seed: int
    fail_limit: int
    step_budget: int
    outcome: str
    failed: int
    steps: list[StepRecord] = field(default_factory=list)
    # Trailing no-op Stop steps after the agent halted, run out to the budget.
    idle_tail: int = 0
    subgoals: list[str] = field(default_factory=list)
    subgoals_done: int = 0
    final_scene_digest: str = ""
    final_map: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    @property
    def key(self) -> tuple:
        return (self.profile, self.condition, self.task_id, self.variant, self.start)

    @property
    def total_steps(self) -> int:
        return len(self.steps) + self.idle_tail

    @property
    def actions(self) -> list[str]:
        return [s.action for s in self.steps]

    @property
    def bumps(self) -> int:
        return sum(1 for s in self.steps if s.bump)

    @property
    def subgoals_total(self) -> int:
        return len(self.subgoals)

    def gc_fraction(self) -> Fraction:
        if not self.subgoals:
            return Fraction(1 if self.outcome == "Success" else 0)
        return Fraction(self.subgoals_done, len(self.subgoals))

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":")) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EpisodeLog":
        raw = json.loads(text)
        if raw.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported log schema_version {raw.get('schema_version')!r}")
        raw["steps"] = [StepRecord(**s) for s in raw["steps"]]
        return cls(**raw)


def episode_seed(master_seed: int, task_id: str, variant: int, start: int,
                 condition: str, profile: str) -> int:
    """Stable per-episode seed, so any matrix cell can be rerun on its own."""
    key = f"{master_seed}|{task_id}|{variant}|{start}|{condition}|{profile}"
    return int.from_bytes(hashlib.blake2b(key.encode(), digest_size=8).digest(), "big") >> 1


def _edge_list(edge) -> list[int]:
    (x1, y1), (x2, y2) = edge
    return [x1, y1, x2, y2]


def map_to_dict(m: SemanticMap) -> dict:
    return {
        "width": m.width,
        "height": m.height,
        "obstacle": ["".join(str(int(v)) for v in row) for row in m.obstacle],
        "blocked_edges": sorted(_edge_list(e) for e in m.blocked_edges),
        "classes": {f"{x},{y}": c for (x, y), c in sorted(m.top_class().items())},
    }


def map_from_dict(d: dict) -> SemanticMap:
    m = SemanticMap.fresh(d["width"], d["height"])
    for y, row in enumerate(d["obstacle"]):
        for x, ch in enumerate(row):
            m.obstacle[y, x] = int(ch)
            m.explored[y, x] = int(ch) != 0
    m.blocked_edges = {((a, b), (c, e)) for a, b, c, e in d["blocked_edges"]}
    for key, cls in d.get("classes", {}).items():
        x, y = (int(v) for v in key.split(","))
        m.observe_class(cls, (x, y))
    return m


def run_episode(
    scene: Scene,
    task: TaskSpec,
    variant: int,
    start: int,
    condition: Union[Condition, str],
    profile: AgentProfile,
    seed: int,
    step_budget: int = DEFAULT_STEP_BUDGET,
    agent_hook=None,
) -> EpisodeLog:
    """Run one episode on an already-disturbed scene.

    Ends on success, on reaching the failed-action limit, or when the step
    budget runs out. ``agent_hook(t, agent)``, if given, is called after
    every decision (for tests that inspect the agent's map).
    """
    label = condition.label if isinstance(condition, Condition) else condition
    plan = decompose(task)
    log = EpisodeLog(
        task.id, variant, start, label, profile.name, seed, profile.fail_limit,
        step_budget, "StepBudget", 0, subgoals=[str(s) for s in plan.subgoals],
    )
    pose = task.starts[start]
    agent = Agent(profile, plan, pose, scene.width, scene.height)
    draws = DrawStream(seed)
    bump, last_success = False, True

    if task_succeeded(scene, task):
        log.outcome = "Success"
    else:
        for t in range(step_budget):
            if agent.halted:
                # A halted agent only emits Stop, which changes nothing.
                log.idle_tail = step_budget - t
                break
            obs = observe(
                scene, pose, profile.cfg, draws.at(t),
                gt_depth=profile.wants_gt_depth, bump=bump, last_success=last_success,
            )
            action = agent.step(obs)
            if agent_hook is not None:
                agent_hook(t, agent)
            before = reach_classes(scene, pose)
            scene, new_pose, result = execute_action(scene, pose, action)
            log.steps.append(StepRecord(
                t=t,
                pose=str(pose),
                action=str(action),
                success=result.success,
                bump=result.bump,
                events=list(result.events),
                detected=sorted({d.object_class for d in obs.vision}),
                phantoms=[
                    [d.object_class, *d.apparent_cell] for d in obs.vision
                    if d.phantom and d.apparent_cell is not None
                ],
                reach=sorted(set(before) | set(reach_classes(scene, new_pose))),
                target=list(agent.nav_target) if agent.nav_target is not None else None,
                new_edges=[_edge_list(e) for e in agent.new_edges],
            ))
            pose = new_pose
            bump, last_success = result.bump, result.success
            if not result.success:
                log.failed += 1
            if task_succeeded(scene, task):
                log.outcome = "Success"
                break
            if log.failed >= profile.fail_limit:
                log.outcome = "FailLimit"
                break

    if log.outcome == "Success":
        log.subgoals_done = len(plan)
    else:
        log.subgoals_done = completed_subgoals(log.steps, plan)
    log.final_scene_digest = scene.digest()
    log.final_map = map_to_dict(agent.map)
    return log


def replay(log: EpisodeLog, scene: Scene, task: TaskSpec, profile: AgentProfile) -> EpisodeLog:
    """Re-execute the episode described by ``log``."""
    return run_episode(
        scene, task, log.variant, log.start, log.condition, profile, log.seed, log.step_budget
    )


# -- run matrix ---------------------------------------------------------------------


@dataclass
class MatrixConfig:
    tasks: Sequence[TaskSpec]
    conditions: Sequence[Condition]
    profiles: Sequence[AgentProfile]
    master_seed: int = 0
    step_budget: int = DEFAULT_STEP_BUDGET
    workers: int = 1
    variants: Optional[int] = None
    starts: Optional[int] = None


class ConfigError(ValueError):
    pass


def validate_matrix(cfg: MatrixConfig) -> dict[tuple[str, str], Scene]:
    """Check the configuration and build every (task, condition) scene."""
    labels = [c.label for c in cfg.conditions]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"duplicate condition labels in {labels}")
    names = [p.name for p in cfg.profiles]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate agent profiles in {names}")
    scenes: dict[tuple[str, str], Scene] = {}
    floorplans: dict[str, Scene] = {}
    for task in cfg.tasks:
        path = str(task.floorplan_path())
        if path not in floorplans:
            try:
                floorplans[path] = task.load_floorplan()
            except OSError as exc:
                raise ConfigError(f"task {task.id}: cannot read floorplan {path}: {exc}") from exc
        base = floorplans[path]
        for cond in cfg.conditions:
            try:
                scenes[(task.id, cond.label)] = compose(base, cond.disturbances)
            except ValueError as exc:
                raise ConfigError(f"condition {cond.label} on task {task.id}: {exc}") from exc
    return scenes


def matrix_cells(cfg: MatrixConfig) -> list[tuple]:
    cells = []
    for task in sorted(cfg.tasks, key=lambda t: t.id):
        nv = len(task.variants) if cfg.variants is None else cfg.variants
        ns = len(task.starts) if cfg.starts is None else cfg.starts
        for v in range(nv):
            for s in range(ns):
                for cond in cfg.conditions:
                    for prof in cfg.profiles:
                        cells.append((task, v, s, cond, prof))
    return cells


def _run_cell(args) -> EpisodeLog:
    scene, task, v, s, cond, prof, seed, budget = args
    return run_episode(scene, task, v, s, cond, prof, seed, budget)


def run_matrix(cfg: MatrixConfig) -> list[EpisodeLog]:
    """Every tasks x variants x starts x conditions x profiles episode.

    Results come back in matrix order whatever the worker count.
    """
    scenes = validate_matrix(cfg)
    jobs = [
        (
            scenes[(task.id, cond.label)], task, v, s, cond, prof,
            episode_seed(cfg.master_seed, task.id, v, s, cond.label, prof.name),
            cfg.step_budget,
        )
        for task, v, s, cond, prof in matrix_cells(cfg)
    ]
    if cfg.workers <= 1 or len(jobs) <= 1:
        return [_run_cell(j) for j in jobs]
    # Large chunks keep each worker's ray caches warm; map() preserves order.
    chunk = max(1, len(jobs) // (cfg.workers * 4))
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(_run_cell, jobs, chunksize=chunk))


# -- metrics --------------------------------------------------------------------------


def percent(num: Union[int, Fraction], den: int) -> float:
    """``100 * num / den`` rounded to two decimals, half-up."""
    if den == 0:
        return 0.0
    frac = Fraction(num) * 100 / den
    with localcontext() as ctx:
        ctx.prec = 60
        exact = Decimal(frac.numerator) / Decimal(frac.denominator)
    return float(exact.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


@dataclass
class ReportRow:
    profile: str
    condition: str
    episodes: int
    successes: int
    success_rate: float
    subgoals_total: int
    subgoals_done: int
    gc_rate_micro: float
    gc_rate_macro: float
    task: str = ""

    @property
    def goal_condition_rate(self) -> float:
        return self.gc_rate_micro


REPORT_COLUMNS = [
    "profile", "condition", "episodes", "successes", "success_rate",
    "subgoals_total", "subgoals_done", "gc_rate_micro", "gc_rate_macro",
]


@dataclass
class Report:
    rows: list[ReportRow]
    tasks: list[ReportRow] = field(default_factory=list)
    schema_version: int = SCHEMA_VERSION

    def row(self, profile: str, condition: str) -> ReportRow:
        for r in self.rows:
            if r.profile == profile and r.condition == condition:
                return r
        raise KeyError((profile, condition))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for r in self.rows:
            writer.writerow([
                r.profile, r.condition, r.episodes, r.successes, f"{r.success_rate:.2f}",
                r.subgoals_total, r.subgoals_done, f"{r.gc_rate_micro:.2f}", f"{r.gc_rate_macro:.2f}",
            ])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Report":
        raw = json.loads(text)
        return cls(
            [ReportRow(**r) for r in raw["rows"]],
            [ReportRow(**r) for r in raw["tasks"]],
            raw.get("schema_version", SCHEMA_VERSION),
        )

    def table(self) -> str:
        header = f"{'profile':<12} {'condition':<14} {'episodes':>8} {'SR %':>7} {'GC %':>7} {'GC macro %':>10}"
        lines = [header, "-" * len(header)]
        for r in self.rows:
            lines.append(
                f"{r.profile:<12} {r.condition:<14} {r.episodes:>8} "
                f"{r.success_rate:>7.2f} {r.gc_rate_micro:>7.2f} {r.gc_rate_macro:>10.2f}"
            )
        return "\n".join(lines)


class DuplicateEpisode(ValueError):
    pass


def _summarize(profile: str, condition: str, group: list[EpisodeLog], task: str = "") -> ReportRow:
    n = len(group)
    successes = sum(1 for g in group if g.outcome == "Success")
    total = sum(g.subgoals_total for g in group)
    done = sum(g.subgoals_total if g.outcome == "Success" else g.subgoals_done for g in group)
    macro = sum((g.gc_fraction() for g in group), Fraction(0))
    return ReportRow(
        profile, condition, n, successes, percent(successes, n),
        total, done, percent(done, total), percent(macro, n), task,
    )


def aggregate(logs: Iterable[EpisodeLog]) -> Report:
    """Task Success and Goal Condition Success per (profile, condition)."""
    groups: dict[tuple[str, str], list[EpisodeLog]] = {}
    per_task: dict[tuple[str, str, str], list[EpisodeLog]] = {}
    seen = set()
    for log in logs:
        if log.key in seen:
            raise DuplicateEpisode(f"duplicate matrix key {log.key}")
        seen.add(log.key)
        groups.setdefault((log.profile, log.condition), []).append(log)
        per_task.setdefault((log.profile, log.condition, log.task_id), []).append(log)
    rows = [_summarize(p, c, g) for (p, c), g in sorted(groups.items())]
    tasks = [_summarize(p, c, g, t) for (p, c, t), g in sorted(per_task.items())]
    return Report(rows, tasks)


# -- rendering ---------------------------------------------------------------------------

_SHADE_UNKNOWN, _SHADE_FREE, _SHADE_BLOCKED = 128, 235, 40
_SHADE_WALL, _SHADE_OPEN, _SHADE_TRAIL, _SHADE_AGENT, _SHADE_GLYPH = 0, 205, 90, 20, 170
_ARROWS = {Heading.NORTH: "^", Heading.EAST: ">", Heading.SOUTH: "v", Heading.WEST: "<"}


@dataclass
class RenderedMap:
    ascii: str
    image: np.ndarray
    scale: int

    def pgm(self) -> bytes:
        h, w = self.image.shape
        return f"P5\n{w} {h}\n255\n".encode() + self.image.astype(np.uint8).tobytes()


def _parse_pose(text: str) -> AgentPose:
    x, y, h = text.split()
    return AgentPose((int(x), int(y)), Heading.parse(h))


def render_map(
    source: Union[SemanticMap, EpisodeLog],
    trajectory: Sequence[tuple[int, int]] = (),
    agent: Optional[AgentPose] = None,
    scale: int = 8,
) -> RenderedMap:
    """Draw a semantic map as a grayscale image and as ASCII.

    Obstacles are dark, explored free space light, unknown mid-grey. Blocked
    edges are drawn as dark lines on the cell lattice. For an episode log the
    trajectory and the final pose come from the log itself.
    """
    if isinstance(source, EpisodeLog):
        m = map_from_dict(source.final_map)
        poses = [_parse_pose(s.pose) for s in source.steps]
        if poses:
            last = source.steps[-1]
            final = poses[-1]
            if last.action == "MoveAhead" and last.success:
                final = AgentPose(
                    (final.cell[0] + final.heading.dx, final.cell[1] + final.heading.dy),
                    final.heading,
                )
            elif last.action in ("RotateLeft", "RotateRight"):
                turn = final.heading.left() if last.action == "RotateLeft" else final.heading.right()
                final = AgentPose(final.cell, turn)
            poses.append(final)
        trajectory = [p.cell for p in poses]
        agent = poses[-1] if poses else None
    else:
        m = source
    classes = m.top_class()
    trail = set(trajectory)
    W, H, S = m.width, m.height, scale

    def is_wall(a, b) -> bool:
        inside = m.in_bounds(a) and m.in_bounds(b)
        return not inside or (min(a, b), max(a, b)) in m.blocked_edges

    # ASCII on a (2H+1) x (2W+1) lattice.
    grid = [[" "] * (2 * W + 1) for _ in range(2 * H + 1)]
    for y in range(H + 1):
        for x in range(W + 1):
            grid[2 * y][2 * x] = "+"
    for y in range(H):
        for x in range(W):
            grid[2 * y + 1][2 * x] = "|" if is_wall((x - 1, y), (x, y)) else " "
            grid[2 * y][2 * x + 1] = "-" if is_wall((x, y - 1), (x, y)) else " "
            state = int(m.obstacle[y, x])
            ch = "#" if state == BLOCKED else "." if state == FREE else "?"
            if (x, y) in classes:
                ch = classes[(x, y)][0]
            if (x, y) in trail:
                ch = "*"
            if agent is not None and agent.cell == (x, y):
                ch = _ARROWS[agent.heading]
            grid[2 * y + 1][2 * x + 1] = ch
        grid[2 * y + 1][2 * W] = "|"
    for x in range(W):
        grid[2 * H][2 * x + 1] = "-"
    text = "\n".join("".join(row) for row in grid) + "\n"

    img = np.full((H * S + 1, W * S + 1), _SHADE_OPEN, dtype=np.uint8)
    for y in range(H):
        for x in range(W):
            state = int(m.obstacle[y, x])
            shade = _SHADE_BLOCKED if state == BLOCKED else _SHADE_FREE if state == FREE else _SHADE_UNKNOWN
            img[y * S + 1:(y + 1) * S, x * S + 1:(x + 1) * S] = shade
            cy, cx = y * S + S // 2, x * S + S // 2
            if (x, y) in classes:
                img[y * S + 1:y * S + 3, x * S + 1:x * S + 3] = _SHADE_GLYPH
            if (x, y) in trail:
                img[cy - 1:cy + 1, cx - 1:cx + 1] = _SHADE_TRAIL
            if agent is not None and agent.cell == (x, y):
                img[cy - 2:cy + 2, cx - 2:cx + 2] = _SHADE_AGENT
    for y in range(H):
        for x in range(W + 1):
            if is_wall((x - 1, y), (x, y)):
                img[y * S:(y + 1) * S + 1, x * S] = _SHADE_WALL
    for y in range(H + 1):
        for x in range(W):
            if is_wall((x, y - 1), (x, y)):
                img[y * S, x * S:(x + 1) * S + 1] = _SHADE_WALL
    return RenderedMap(text, img, S)


# -- export ----------------------------------------------------------------------------------


def log_filename(log: EpisodeLog) -> str:
    return f"{log.profile}__{log.condition}__{log.task_id}__v{log.variant}__s{log.start}.json"


class ExportError(OSError):
    pass


def export(report: Report, logs: Sequence[EpisodeLog], out_dir: Union[str, os.PathLike]) -> list[Path]:
    """Write ``report.csv``, ``report.json`` and one JSON file per episode under ``logs/``."""
    out = Path(out_dir)
    written = []
    try:
        (out / "logs").mkdir(parents=True, exist_ok=True)
        for name, body in (("report.csv", report.to_csv()), ("report.json", report.to_json())):
            (out / name).write_text(body, encoding="utf-8")
            written.append(out / name)
        for log in sorted(logs, key=lambda g: g.key):
            path = out / "logs" / log_filename(log)
            path.write_text(log.to_json(), encoding="utf-8")
            written.append(path)
    except OSError as exc:
        raise ExportError(f"cannot write under {out}: {exc}") from exc
    return written


def load_log(path: Union[str, os.PathLike]) -> EpisodeLog:
    return EpisodeLog.from_json(Path(path).read_text(encoding="utf-8"))


def load_logs(directory: Union[str, os.PathLike]) -> list[EpisodeLog]:
    directory = Path(directory)
    if (directory / "logs").is_dir():
        directory = directory / "logs"
    return [load_log(p) for p in sorted(directory.glob("*.json"))]
