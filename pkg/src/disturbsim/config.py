"""Experiment configuration files.

A run config is an INI file::

    [run]
    master_seed = 7
    tasks = ../tasks/*.task
    profiles = visiononly mapdepth mapgtdepth
    fail_limit = 10
    step_budget = 500
    workers = 1
    output = results/glasswall

    [sensor]
    fov = 90

    [condition baseline]
    disturbances =

    [condition glasswall]
    disturbances = ../disturbances/glasswall.dist

Relative paths in ``tasks`` and ``disturbances`` resolve against the
config file's directory; ``output`` resolves against the working directory.
Conditions keep their file order.
"""

from __future__ import annotations

import configparser
import glob
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

from .agents import AgentProfile, ProfileKind
from .disturbance import load_disturbances
from .evaluation import DEFAULT_STEP_BUDGET, Condition, ConfigError, MatrixConfig
from .scene import SceneError
from .sensors import SensorConfig
from .tasks import TaskSpec, load_task, validate_task


@dataclass
class RunConfig:
    master_seed: int
    task_paths: list[Path]
    conditions: list[Condition]
    profiles: list[AgentProfile]
    sensor: SensorConfig = field(default_factory=SensorConfig)
    fail_limit: int = 10
    step_budget: int = DEFAULT_STEP_BUDGET
    workers: int = 1
    output: Path = Path("results")
    tasks: list[TaskSpec] = field(default_factory=list)
    source: Optional[Path] = None

    def matrix(self, workers: Optional[int] = None) -> MatrixConfig:
        return MatrixConfig(
            self.tasks, self.conditions, self.profiles, self.master_seed,
            self.step_budget, self.workers if workers is None else workers,
        )

    def cardinality(self) -> int:
        per_task = sum(len(t.variants) * len(t.starts) for t in self.tasks)
        return per_task * len(self.conditions) * len(self.profiles)


class ConfigIOError(OSError):
    pass


_SENSOR_FIELDS = {"fov": float, "ray_count": int, "max_range": float,
                  "light_floor": float, "reflection_cap": int}


def _resolve(base: Path, text: str) -> Path:
    p = Path(os.path.expanduser(text))
    return p if p.is_absolute() else base / p


def parse_config(text: str, base_dir: Union[str, os.PathLike] = ".") -> RunConfig:
    """Parse and fully validate a run config; referenced files are loaded."""
    base = Path(base_dir)
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax: {exc}") from exc
    if not cp.has_section("run"):
        raise ConfigError("missing [run] section")
    run = cp["run"]
    try:
        master_seed = run.getint("master_seed", 0)
        fail_limit = run.getint("fail_limit", 10)
        step_budget = run.getint("step_budget", DEFAULT_STEP_BUDGET)
        workers = run.getint("workers", 1)
    except ValueError as exc:
        raise ConfigError(f"[run]: {exc}") from exc
    if step_budget < 1 or workers < 1:
        raise ConfigError("[run]: step_budget and workers must be positive")

    sensor_kwargs = {}
    if cp.has_section("sensor"):
        for key, value in cp["sensor"].items():
            if key not in _SENSOR_FIELDS:
                raise ConfigError(f"[sensor]: unknown key {key!r}")
            try:
                sensor_kwargs[key] = _SENSOR_FIELDS[key](value)
            except ValueError as exc:
                raise ConfigError(f"[sensor] {key}: {exc}") from exc
    try:
        sensor = SensorConfig(**sensor_kwargs)
        profiles = [
            AgentProfile(ProfileKind(name), sensor, fail_limit)
            for name in run.get("profiles", "visiononly").split()
        ]
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    task_paths: list[Path] = []
    for pattern in run.get("tasks", "").split():
        full = _resolve(base, pattern)
        matches = sorted(glob.glob(str(full)))
        if not matches:
            raise ConfigIOError(f"no task file matches {full}")
        task_paths += [Path(m) for m in matches]

    conditions: list[Condition] = []
    for section in cp.sections():
        if not section.startswith("condition "):
            if section not in ("run", "sensor"):
                raise ConfigError(f"unknown section [{section}]")
            continue
        label = section.split(None, 1)[1].strip()
        ds = []
        for item in cp[section].get("disturbances", "").split():
            path = _resolve(base, item)
            try:
                ds += load_disturbances(path)
            except OSError as exc:
                raise ConfigIOError(f"condition {label}: cannot read {path}: {exc}") from exc
            except SceneError as exc:
                raise ConfigError(f"condition {label}: {path}: {exc}") from exc
        conditions.append(Condition(label, tuple(ds)))
    if not conditions:
        conditions = [Condition("baseline")]
    if not any(not c.disturbances for c in conditions):
        raise ConfigError("at least one condition must be the undisturbed baseline")

    cfg = RunConfig(
        master_seed, task_paths, conditions, profiles, sensor, fail_limit,
        step_budget, workers, Path(run.get("output", "results")),
    )
    cfg.tasks = _load_tasks(task_paths)
    return cfg


def _load_tasks(paths: list[Path]) -> list[TaskSpec]:
    tasks = []
    seen = set()
    for path in paths:
        try:
            task = load_task(path)
        except OSError as exc:
            raise ConfigIOError(f"cannot read task {path}: {exc}") from exc
        except SceneError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if task.id in seen:
            raise ConfigError(f"{path}: duplicate task id {task.id}")
        seen.add(task.id)
        try:
            scene = task.load_floorplan()
        except OSError as exc:
            raise ConfigIOError(f"task {task.id}: cannot read floorplan {task.floorplan_path()}: {exc}") from exc
        except SceneError as exc:
            raise ConfigError(f"task {task.id}: floorplan {task.floorplan_path()}: {exc}") from exc
        problems = validate_task(task, scene)
        if problems:
            raise ConfigError(f"{path}: " + "; ".join(str(v) for v in problems))
        tasks.append(task)
    return tasks


def load_config(path: Union[str, os.PathLike]) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigIOError(f"cannot read config {path}: {exc}") from exc
    cfg = parse_config(text, path.parent)
    return replace(cfg, source=path)
