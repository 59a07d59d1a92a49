"""Command-line entry point.

Exit codes: 0 ok, 1 usage, 2 validation or parse failure, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import ConfigIOError, load_config
from .disturbance import DisturbanceError, compose, load_disturbances
from .evaluation import (
    ConfigError,
    DuplicateEpisode,
    ExportError,
    aggregate,
    export,
    load_log,
    load_logs,
    render_map,
    run_matrix,
)
from .scene import SceneError, SceneSemanticError, load_scene, serialize_scene, validate_scene
from .tasks import load_task, validate_task

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_IO = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigIOError as exc:
        return _fail(EXIT_IO, str(exc))
    except ConfigError as exc:
        return _fail(EXIT_INVALID, f"{args.config}: {exc}")
    if args.seed is not None:
        cfg.master_seed = args.seed
    n = cfg.cardinality()
    if args.dry_run:
        print(
            f"{len(cfg.tasks)} tasks x {len(cfg.conditions)} conditions x "
            f"{len(cfg.profiles)} profiles -> {n} episodes"
        )
        return EXIT_OK
    try:
        logs = run_matrix(cfg.matrix(args.workers))
    except ConfigError as exc:
        return _fail(EXIT_INVALID, str(exc))
    report = aggregate(logs)
    out = Path(args.out) if args.out else cfg.output
    try:
        export(report, logs, out)
    except ExportError as exc:
        return _fail(EXIT_IO, str(exc))
    print(report.table())
    print(f"\n{len(logs)} episodes; report and logs written to {out}")
    return EXIT_OK


def _diff_summary(before, after) -> list[str]:
    lines = []
    if before.light_level != after.light_level:
        lines.append(f"light {before.light_level!r} -> {after.light_level!r}")
    old, new = before.wall_map, after.wall_map
    for edge in sorted(set(old) | set(new)):
        (x1, y1), (x2, y2) = edge
        name = f"wall {x1} {y1} {x2} {y2}"
        if edge not in old:
            lines.append(f"+ {name} {new[edge].value}")
        elif edge not in new:
            lines.append(f"- {name} {old[edge].value}")
        elif old[edge] is not new[edge]:
            lines.append(f"~ {name} {old[edge].value} -> {new[edge].value}")
    return lines


def cmd_mutate(args) -> int:
    try:
        scene = load_scene(args.scene)
        ds = load_disturbances(args.disturbances)
    except OSError as exc:
        return _fail(EXIT_IO, str(exc))
    except SceneError as exc:
        return _fail(EXIT_INVALID, str(exc))
    try:
        out = compose(scene, ds)
    except DisturbanceError as exc:
        return _fail(EXIT_INVALID, f"{args.disturbances}: {exc}")
    try:
        Path(args.out).write_text(serialize_scene(out), encoding="utf-8")
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot write {args.out}: {exc}")
    changes = _diff_summary(scene, out)
    for line in changes or ["no changes"]:
        print(line)
    return EXIT_OK


def cmd_render(args) -> int:
    try:
        log = load_log(args.log)
    except OSError as exc:
        return _fail(EXIT_IO, str(exc))
    except json.JSONDecodeError as exc:
        return _fail(EXIT_INVALID, f"{args.log}:{exc.lineno}:{exc.colno}: {exc.msg}")
    except (ValueError, TypeError, KeyError) as exc:
        return _fail(EXIT_INVALID, f"{args.log}: malformed log: {exc}")
    rendered = render_map(log, scale=args.scale)
    out = Path(args.out)
    try:
        out.write_bytes(rendered.pgm())
        out.with_suffix(".txt").write_text(rendered.ascii, encoding="utf-8")
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot write {out}: {exc}")
    if args.ascii:
        print(rendered.ascii, end="")
    return EXIT_OK


def _validate_path(path: Path) -> list[str]:
    suffix = path.suffix
    if suffix == ".scene":
        from .scene import parse_scene

        try:
            scene = parse_scene(path.read_text(encoding="utf-8"), validate=False)
        except SceneSemanticError as exc:
            return [str(v) for v in exc.violations]
        return [str(v) for v in validate_scene(scene)]
    if suffix == ".dist":
        load_disturbances(path)
        return []
    if suffix == ".task":
        task = load_task(path)
        return [str(v) for v in validate_task(task, task.load_floorplan())]
    if suffix == ".cfg":
        load_config(path)
        return []
    if suffix == ".json":
        load_log(path)
        return []
    raise ValueError(f"don't know how to validate {path.name!r}")


def cmd_validate(args) -> int:
    code = EXIT_OK
    for raw in args.paths:
        path = Path(raw)
        try:
            problems = _validate_path(path)
        except (OSError, ConfigIOError) as exc:
            print(f"{path}: {exc}", file=sys.stderr)
            code = max(code, EXIT_IO)
            continue
        except json.JSONDecodeError as exc:
            problems = [f"{exc.lineno}:{exc.colno}: {exc.msg}"]
        except (SceneError, ConfigError, ValueError, TypeError, KeyError) as exc:
            problems = [str(exc)]
        for p in problems:
            print(f"{path}: {p}")
        if problems:
            code = max(code, EXIT_INVALID)
    return code


def cmd_report(args) -> int:
    try:
        logs = load_logs(args.logs)
    except OSError as exc:
        return _fail(EXIT_IO, str(exc))
    except (ValueError, TypeError, KeyError) as exc:
        return _fail(EXIT_INVALID, f"{args.logs}: {exc}")
    if not logs:
        return _fail(EXIT_IO, f"no episode logs under {args.logs}")
    try:
        report = aggregate(logs)
    except DuplicateEpisode as exc:
        return _fail(EXIT_INVALID, str(exc))
    if args.out:
        try:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            (out / "report.csv").write_text(report.to_csv(), encoding="utf-8")
            (out / "report.json").write_text(report.to_json(), encoding="utf-8")
        except OSError as exc:
            return _fail(EXIT_IO, f"cannot write {args.out}: {exc}")
    print(report.table())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="disturbsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run an experiment matrix and export the report")
    p.add_argument("config", help="experiment config (.cfg)")
    p.add_argument("--dry-run", action="store_true", help="print the matrix size and exit")
    p.add_argument("--workers", type=int, default=None, help="episode worker processes")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--seed", type=int, default=None, help="override master_seed")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("mutate", help="apply disturbances to a scene")
    p.add_argument("scene")
    p.add_argument("disturbances")
    p.add_argument("out")
    p.set_defaults(func=cmd_mutate)

    p = sub.add_parser("render", help="render an episode's final semantic map")
    p.add_argument("log", help="episode log (.json)")
    p.add_argument("out", help="output pixmap (.pgm); an ASCII copy goes next to it as .txt")
    p.add_argument("--scale", type=int, default=8, help="pixels per cell")
    p.add_argument("--ascii", action="store_true", help="also print the ASCII render")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("validate", help="check scene, disturbance, task, config or log files")
    p.add_argument("paths", nargs="+")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("report", help="re-aggregate exported episode logs")
    p.add_argument("logs", help="directory of episode logs (or a run output directory)")
    p.add_argument("--out", help="write report.csv and report.json here")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "workers", None) is not None and args.workers < 1:
        return _fail(EXIT_USAGE, "--workers must be >= 1")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
