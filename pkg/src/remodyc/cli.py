"""Command line front end.

Exit codes: 0 success, 1 model or configuration errors, 2 I/O problems,
3 a run aborted mid-simulation (completed frames are kept on disk).
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import TRACE_FORMAT_VERSION, ast
from .interp import ConfigError, Engine, RuntimeAbort, parse_config
from .memory import FileBackend, InMemoryBackend
from .parser import SourceError, format_number, parse_model, pretty_print
from .typecheck import check_model, errors_only


class _Failure(Exception):
    def __init__(self, code: int, message: str | None = None):
        super().__init__(message)
        self.code = code
        self.message = message


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="remodyc",
        description="Agent-based models with measurement units and full-trace replay.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    check = commands.add_parser("check", help="parse and unit-check a model")
    check.add_argument("model")
    check.add_argument("--config", help="also validate a run configuration")

    run = commands.add_parser("run", help="simulate a model deterministically")
    run.add_argument("model")
    run.add_argument("config")
    run.add_argument("--out", help="run directory for the trace")
    run.add_argument("--backend", choices=["file", "memory"], default="file")

    replay = commands.add_parser("replay", help="print one stored tick")
    replay.add_argument("run_dir")
    replay.add_argument("tick", type=int)

    chart = commands.add_parser("chart", help="population counts per tick")
    chart.add_argument("run_dir")
    chart.add_argument("stage")

    fmt = commands.add_parser("fmt", help="rewrite a model canonically")
    fmt.add_argument("model")

    args = parser.parse_args(argv)
    handler = {
        "check": _check,
        "run": _run,
        "replay": _replay,
        "chart": _chart,
        "fmt": _fmt,
    }[args.command]
    try:
        return handler(args)
    except _Failure as failure:
        if failure.message:
            print(failure.message, file=sys.stderr)
        return failure.code


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as err:
        raise _Failure(2, f"cannot read {path}: {err.strerror}")


def _parse_model_file(path: str) -> ast.Model:
    try:
        return parse_model(_read_text(path))
    except SourceError as err:
        raise _Failure(1, f"{path}:{err}")


def _parse_config_file(path: str):
    try:
        return parse_config(_read_text(path))
    except ConfigError as err:
        raise _Failure(1, f"{path}: {err}")


def _diagnose(model: ast.Model, path: str, config=None) -> None:
    diagnostics = check_model(model, config)
    for diagnostic in diagnostics:
        print(diagnostic.render(path), file=sys.stderr)
    if errors_only(diagnostics):
        raise _Failure(1)


def _check(args) -> int:
    model = _parse_model_file(args.model)
    config = _parse_config_file(args.config) if args.config else None
    _diagnose(model, args.model, config)
    return 0


def _meta_lines(config) -> list[str]:
    return [
        f"version={TRACE_FORMAT_VERSION}",
        f"seed={config.seed}",
        f"delta_time={format_number(config.delta_time)}",
        f"steps={config.steps}",
        f"world_width={format_number(config.world_width)}",
        f"world_height={format_number(config.world_height)}",
        f"patch_size={format_number(config.patch_size)}",
        f"patches_x={config.patches_x}",
        f"patches_y={config.patches_y}",
        "rng=splitmix64, one global stream consumed in task and animat order",
    ]


def _run(args) -> int:
    model_text = _read_text(args.model)
    try:
        model = parse_model(model_text)
    except SourceError as err:
        raise _Failure(1, f"{args.model}:{err}")
    config = _parse_config_file(args.config)
    _diagnose(model, args.model, config)

    meta_path = None
    if args.backend == "memory":
        backend = InMemoryBackend()
    else:
        if not args.out:
            raise _Failure(2, "run: --out is required with the file backend")
        run_dir = Path(args.out)
        if run_dir.exists() and any(run_dir.iterdir()):
            raise _Failure(2, f"run directory {run_dir} is not empty")
        try:
            run_dir.mkdir(parents=True, exist_ok=True)
            (run_dir / "model.rmd").write_text(model_text)
            meta_path = run_dir / "meta.txt"
            meta_path.write_text("\n".join(_meta_lines(config)) + "\n")
        except OSError as err:
            raise _Failure(2, f"cannot prepare {run_dir}: {err.strerror}")
        backend = FileBackend(run_dir)

    engine = Engine(model, config, backend)
    try:
        rows = engine.run()
    except RuntimeAbort as abort:
        if meta_path is not None:
            with open(meta_path, "a") as handle:
                handle.write(f"abort={abort.render()}\n")
        print(f"aborted: {abort.render()}", file=sys.stderr)
        return 3
    print("tick,stage,count")
    for tick, stage, count in rows:
        print(f"{tick},{stage},{count}")
    return 0


def _open_run_dir(path: str) -> tuple[Path, ast.Model]:
    run_dir = Path(path)
    if not (run_dir / "rng.csv").exists():
        raise _Failure(2, f"{path} is not a run directory")
    meta = {}
    for line in _read_text(run_dir / "meta.txt").splitlines():
        key, _, value = line.partition("=")
        meta[key] = value
    if meta.get("version") != TRACE_FORMAT_VERSION:
        raise _Failure(
            1,
            f"trace version {meta.get('version')!r} is not supported "
            f"(expected {TRACE_FORMAT_VERSION})",
        )
    model = _parse_model_file(str(run_dir / "model.rmd"))
    return run_dir, model


def _declarations(agent) -> tuple:
    if isinstance(agent, ast.StageDefinition):
        return agent.all_attributes
    return agent.attributes


def _replay(args) -> int:
    run_dir, model = _open_run_dir(args.run_dir)
    backend = FileBackend(run_dir)
    try:
        frame = backend.load_frame(args.tick)
    except ValueError as err:
        raise _Failure(1, str(err))
    agents = {agent.name: agent for agent in model.agents}
    print("address,stage,attribute,value")
    for base in sorted(frame.animats):
        kind, _ = frame.animats[base]
        for slot, declaration in enumerate(_declarations(agents[kind])):
            value = frame.values[base + slot] / declaration.unit.scale
            rendered = format_number(value)
            label = declaration.unit.label or ""
            if label:
                rendered += f" {label}"
            print(f"{base + slot},{kind},{declaration.identifier},{rendered}")
    return 0


def _chart(args) -> int:
    run_dir, model = _open_run_dir(args.run_dir)
    stage = model.agent_named(args.stage)
    if not isinstance(stage, ast.StageDefinition):
        raise _Failure(1, f"unknown stage {args.stage!r}")
    backend = FileBackend(run_dir)
    counts: dict[int, int] = {}
    with open(run_dir / "animats.csv") as handle:
        next(handle)
        for line in handle:
            tick, _, kind, _ = line.rstrip("\n").split(",")
            if kind == args.stage:
                counts[int(tick)] = counts.get(int(tick), 0) + 1
    print("tick,count")
    for tick in range(1, backend.frame_count() + 1):
        print(f"{tick},{counts.get(tick, 0)}")
    return 0


def _fmt(args) -> int:
    text = _read_text(args.model)
    try:
        model = parse_model(text)
    except SourceError as err:
        raise _Failure(1, f"{args.model}:{err}")
    canonical = pretty_print(model)
    if canonical != text:
        try:
            Path(args.model).write_text(canonical)
        except OSError as err:
            raise _Failure(2, f"cannot write {args.model}: {err.strerror}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
