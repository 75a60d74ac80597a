"""Synchronous simulation engine.

Every tick runs all tasks in declaration order over all performers, with
reads served from the last committed frame and writes held back, then
commits once.  Lifecycle events (die, become, spawn) are recorded while
evaluating and applied between the last task and the commit, so results
never depend on iteration order within a tick.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

from . import ast, rng
from .memory import MemoryImage, StorageBackend, TraceFrame
from .units import parse_unit, same_dimension

SECONDS = parse_unit("s")
METERS = parse_unit("m")
_DEFAULT_EDGE = 1000.0


class ConfigError(Exception):
    pass


class RuntimeAbort(Exception):
    """Unrecoverable evaluation failure; the trace keeps all completed
    frames."""

    def __init__(self, message, tick=None, stage=None, pos=None):
        super().__init__(message)
        self.message = message
        self.tick = tick
        self.stage = stage
        self.pos = pos

    def render(self) -> str:
        parts = [f"tick {self.tick}" if self.tick else None,
                 self.stage,
                 f"line {self.pos.line}" if self.pos else None]
        context = ", ".join(p for p in parts if p)
        return f"{self.message} ({context})" if context else self.message


@dataclass(frozen=True)
class SimulationConfig:
    """Run parameters; lengths in meters, the time step in seconds."""

    delta_time: float
    steps: int
    seed: int
    world_width: float = _DEFAULT_EDGE
    world_height: float = _DEFAULT_EDGE
    patch_size: float = _DEFAULT_EDGE
    populations: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        if self.delta_time <= 0:
            raise ConfigError("delta_time must be positive")
        if self.steps < 1:
            raise ConfigError("steps must be at least 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        for name in ("world_width", "world_height", "patch_size"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for extent in (self.world_width, self.world_height):
            patches = extent / self.patch_size
            if abs(patches - round(patches)) > 1e-9 or round(patches) < 1:
                raise ConfigError(
                    "world extent must be a whole number of patches, got "
                    f"{extent} / {self.patch_size}"
                )

    @property
    def patches_x(self) -> int:
        return round(self.world_width / self.patch_size)

    @property
    def patches_y(self) -> int:
        return round(self.world_height / self.patch_size)


_QUANTITY_KEYS = {
    "delta_time": SECONDS,
    "world_width": METERS,
    "world_height": METERS,
    "patch_size": METERS,
}
_INTEGER_KEYS = ("steps", "seed")


def parse_config(text: str) -> SimulationConfig:
    """Line-based ``key = value`` plus ``populate N Stage`` lines."""
    settings: dict[str, float | int] = {}
    populations: list[tuple[int, str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("populate"):
            parts = line.split()
            if len(parts) != 3:
                raise ConfigError(f"line {lineno}: expected 'populate <count> <stage>'")
            try:
                count = int(parts[1])
            except ValueError:
                raise ConfigError(f"line {lineno}: bad count {parts[1]!r}") from None
            if count < 0:
                raise ConfigError(f"line {lineno}: population must be non-negative")
            populations.append((count, parts[2]))
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in settings:
            raise ConfigError(f"line {lineno}: duplicate {key!r}")
        if key in _INTEGER_KEYS:
            try:
                settings[key] = int(value)
            except ValueError:
                raise ConfigError(f"line {lineno}: {key} must be an integer") from None
        elif key in _QUANTITY_KEYS:
            settings[key] = _parse_quantity(value, _QUANTITY_KEYS[key], lineno)
        else:
            raise ConfigError(f"line {lineno}: unknown setting {key!r}")
    for key in ("delta_time", "steps", "seed"):
        if key not in settings:
            raise ConfigError(f"missing required setting {key!r}")
    return SimulationConfig(populations=tuple(populations), **settings)


def _parse_quantity(value: str, expected, lineno: int) -> float:
    parts = value.split()
    if len(parts) not in (1, 2):
        raise ConfigError(f"line {lineno}: expected '<number> <unit>'")
    try:
        magnitude = float(parts[0])
    except ValueError:
        raise ConfigError(f"line {lineno}: bad number {parts[0]!r}") from None
    if len(parts) == 1:
        return magnitude
    try:
        unit = parse_unit(parts[1])
    except Exception:
        raise ConfigError(f"line {lineno}: bad unit {parts[1]!r}") from None
    if not same_dimension(unit, expected):
        raise ConfigError(f"line {lineno}: {parts[1]!r} has the wrong dimension")
    return magnitude * unit.scale


def substitute(e: ast.Expression, bindings: dict[str, ast.Expression]) -> ast.Expression:
    """Replace every placeholder reference with its bound expression."""
    match e:
        case ast.PlaceholderRef(identifier=name):
            return bindings[name]
        case ast.Arithmetics(op=op, args=args):
            return dataclasses.replace(
                e, args=tuple(substitute(a, bindings) for a in args)
            )
        case ast.Apply(args=args):
            return dataclasses.replace(
                e, args=tuple(substitute(a, bindings) for a in args)
            )
        case ast.UniformDist(low=low, high=high):
            return dataclasses.replace(
                e, low=substitute(low, bindings), high=substitute(high, bindings)
            )
        case ast.NormalDist(mean=mean, sigma=sigma):
            return dataclasses.replace(
                e, mean=substitute(mean, bindings), sigma=substitute(sigma, bindings)
            )
        case ast.GammaDist(shape=shape, scale=scale):
            return dataclasses.replace(
                e, shape=substitute(shape, bindings), scale=substitute(scale, bindings)
            )
        case ast.LogLogisticDist(scale_param=scale, shape_param=shape):
            return dataclasses.replace(
                e,
                scale_param=substitute(scale, bindings),
                shape_param=substitute(shape, bindings),
            )
        case ast.EnUnit(expr=inner) | ast.DeUnit(expr=inner):
            return dataclasses.replace(e, expr=substitute(inner, bindings))
        case _:
            return e


def instantiate_task(
    action: ast.ActionDefinition, bindings: dict[str, ast.Expression]
) -> ast.ActionDefinition:
    """One syntactic pass: placeholders in expressions and in definition
    targets are replaced by the task's bound expressions."""

    def target(variable):
        if isinstance(variable, ast.Placeholder):
            return bindings[variable.identifier]
        return variable

    definitions = tuple(
        dataclasses.replace(
            d, variable=target(d.variable), expression=substitute(d.expression, bindings)
        )
        for d in action.definitions
    )
    utilities = tuple(
        dataclasses.replace(u, expression=substitute(u.expression, bindings))
        for u in action.utilities
    )

    def guarded(comparison):
        if comparison is None:
            return None
        return dataclasses.replace(
            comparison,
            left=substitute(comparison.left, bindings),
            right=substitute(comparison.right, bindings),
        )

    lifecycle = []
    for directive in action.lifecycle:
        directive = dataclasses.replace(directive, guard=guarded(directive.guard))
        if isinstance(directive, ast.Spawn):
            directive = dataclasses.replace(
                directive, count=substitute(directive.count, bindings)
            )
        lifecycle.append(directive)
    return dataclasses.replace(
        action, definitions=definitions, utilities=utilities, lifecycle=tuple(lifecycle)
    )


_IN_PROGRESS = object()


@dataclass
class _Activation:
    """One action evaluation: performer identity plus utility cache."""

    base: int
    kind: str
    utilities: dict[str, ast.UtilityDefinition]
    cache: dict[str, float] = field(default_factory=dict)


class Engine:
    """Runs a checked model; all numeric state is SI floats."""

    def __init__(self, model: ast.Model, config: SimulationConfig, backend: StorageBackend):
        self.model = model
        self.config = config
        self.backend = backend
        self.image = MemoryImage()
        self.rng_state = rng.seed_state(config.seed)
        self.slots: dict[str, dict[str, int]] = {}
        self.sizes: dict[str, int] = {}
        for agent in model.agents:
            declarations = (
                agent.all_attributes
                if isinstance(agent, ast.StageDefinition)
                else agent.attributes
            )
            self.slots[agent.name] = {
                declaration.identifier: slot
                for slot, declaration in enumerate(declarations)
            }
            self.sizes[agent.name] = ast.size_of_agent(agent)
        self.world_base: int | None = None
        self.patch_bases: list[int] = []

    # -- setup ---------------------------------------------------------

    def setup(self) -> TraceFrame:
        world = self.model.world
        if world is not None:
            self.world_base = self.image.allocate("World", self.sizes["World"])
            self._write_initializers(world, self.world_base)
        patch = self.model.patch
        if patch is not None:
            for _ in range(self.config.patches_x * self.config.patches_y):
                base = self.image.allocate("Patch", self.sizes["Patch"])
                self.patch_bases.append(base)
                self._write_initializers(patch, base)
        for count, stage_name in self.config.populations:
            stage = self.model.agent_named(stage_name)
            for _ in range(count):
                base = self.image.allocate(stage.name, self.sizes[stage.name])
                self.rng_state, x = rng.sample_uniform(
                    self.rng_state, 0.0, self.config.world_width
                )
                self.rng_state, y = rng.sample_uniform(
                    self.rng_state, 0.0, self.config.world_height
                )
                self.image.write(base, x)
                self.image.write(base + 1, y)
                self._write_initializers(stage, base, from_slot=2)
        return self._commit()

    def _write_initializers(self, agent, base: int, from_slot: int = 0) -> None:
        for slot, declaration in enumerate(agent.attributes, start=from_slot):
            if declaration.initial is not None:
                value = declaration.initial.value * declaration.initial.unit.scale
                self.image.write(base + slot, value)

    def _commit(self) -> TraceFrame:
        frame = self.image.store(self.backend, self.rng_state)
        self.image.apply_frame(frame, self.image.ticks + 1)
        return frame

    def resume(self, tick: int) -> None:
        """Continue a stored run from the state after ``tick``."""
        self.rng_state = self.image.load(self.backend, tick)
        self.world_base = None
        self.patch_bases = []
        for base, (kind, _) in sorted(self.image.animats.items()):
            if kind == "World":
                self.world_base = base
            elif kind == "Patch":
                self.patch_bases.append(base)

    # -- stepping ------------------------------------------------------

    def step(self) -> TraceFrame:
        events: list[tuple] = []
        for task in self.model.tasks:
            action = self.model.action_named(task.action)
            instantiated = instantiate_task(action, dict(task.bindings))
            utilities = {u.identifier: u for u in instantiated.utilities}
            performers = sorted(
                base
                for base, (kind, _) in self.image.animats.items()
                if kind == task.agent
            )
            for base in performers:
                frame = _Activation(base, task.agent, utilities)
                self._perform(instantiated, frame, events)
        self._apply_events(events)
        return self._commit()

    def run(self) -> list[tuple[int, str, int]]:
        """Full run: initial frame plus ``steps`` ticks; returns
        (tick, stage, count) rows for every declared stage."""
        rows: list[tuple[int, str, int]] = []
        frame = self.setup()
        rows.extend(self._census(frame, 1))
        for tick in range(2, self.config.steps + 2):
            frame = self.step()
            rows.extend(self._census(frame, tick))
        return rows

    def _census(self, frame: TraceFrame, tick: int) -> list[tuple[int, str, int]]:
        counts = {stage.name: 0 for stage in self.model.stages}
        for kind, _ in frame.animats.values():
            if kind in counts:
                counts[kind] += 1
        return [(tick, name, count) for name, count in counts.items()]

    def _perform(self, action, frame: _Activation, events: list) -> None:
        for definition in action.definitions:
            value = self.evaluate(definition.expression, frame)
            variable = definition.variable
            address = self._target_address(variable, frame)
            if definition.decorator is ast.Decorator.ASSIGN:
                self.image.write(address, value)
            elif definition.decorator is ast.Decorator.DELTA:
                self.image.write_delta(address, value)
            else:
                self.image.write_delta(address, value * self.config.delta_time)
        for directive in action.lifecycle:
            self._lifecycle(directive, frame, events)

    def _lifecycle(self, directive, frame: _Activation, events: list) -> None:
        guard = directive.guard
        if guard is not None and not self._holds(guard, frame):
            return
        match directive:
            case ast.Die():
                events.append(("die", frame.base))
            case ast.StageTransition(target=target):
                events.append(("become", frame.base, frame.kind, target))
            case ast.Spawn(stage=stage, count=count):
                value = self.evaluate(count, frame)
                if math.isnan(value) or value < 0:
                    self._abort(f"spawn count {value} out of range", frame, directive.pos)
                events.append(("spawn", frame.base, frame.kind, stage, math.floor(value)))

    def _holds(self, guard: ast.Comparison, frame: _Activation) -> bool:
        left = self.evaluate(guard.left, frame)
        right = self.evaluate(guard.right, frame)
        match guard.relop:
            case "<":
                return left < right
            case "<=":
                return left <= right
            case ">":
                return left > right
            case _:
                return left >= right

    def _apply_events(self, events: list) -> None:
        for event in events:
            match event:
                case ("die", base):
                    self.image.kill(base)
                case ("become", base, kind, target):
                    self._become(base, kind, target)
                case ("spawn", base, kind, stage, count):
                    for _ in range(count):
                        self._spawn(base, kind, stage)

    def _pending(self, address: int) -> float:
        return self.image.next[address] + self.image.delta[address]

    def _become(self, base: int, kind: str, target: str) -> None:
        stage = self.model.agent_named(target)
        new_base = self.image.allocate(stage.name, self.sizes[stage.name])
        source_slots = self.slots[kind]
        for slot, declaration in enumerate(stage.all_attributes):
            if declaration.identifier in source_slots:
                value = self._pending(base + source_slots[declaration.identifier])
            elif declaration.initial is not None:
                value = declaration.initial.value * declaration.initial.unit.scale
            else:
                value = 0.0
            self.image.write(new_base + slot, value)
        self.image.kill(base)

    def _spawn(self, base: int, kind: str, target: str) -> None:
        stage = self.model.agent_named(target)
        new_base = self.image.allocate(stage.name, self.sizes[stage.name])
        parent_slots = self.slots[kind]
        self.image.write(new_base, self._pending(base + parent_slots["x"]))
        self.image.write(new_base + 1, self._pending(base + parent_slots["y"]))
        self._write_initializers(stage, new_base, from_slot=2)

    # -- evaluation ----------------------------------------------------

    def evaluate(self, e: ast.Expression, frame: _Activation) -> float:
        match e:
            case ast.Literal(value=value, unit=unit):
                return value * unit.scale
            case ast.DeltaTime():
                return self.config.delta_time
            case ast.AttributeVariable():
                return self.image.read(self._attribute_address(e, frame))
            case ast.UtilityVariable(identifier=name):
                return self._utility(name, frame, e.pos)
            case ast.Arithmetics(op=op, args=args):
                return self._arithmetic(op, args, frame, e.pos)
            case ast.Apply(function=function, args=args):
                return self._call(function, args, frame, e.pos)
            case ast.UniformDist(low=low, high=high):
                a = self.evaluate(low, frame)
                b = self.evaluate(high, frame)
                try:
                    self.rng_state, value = rng.sample_uniform(self.rng_state, a, b)
                except ValueError as err:
                    self._abort(str(err), frame, e.pos)
                return value
            case ast.NormalDist(mean=mean, sigma=sigma):
                a = self.evaluate(mean, frame)
                b = self.evaluate(sigma, frame)
                try:
                    self.rng_state, value = rng.sample_normal(self.rng_state, a, b)
                except ValueError as err:
                    self._abort(str(err), frame, e.pos)
                return value
            case ast.GammaDist(shape=shape, scale=scale):
                a = self.evaluate(shape, frame)
                b = self.evaluate(scale, frame)
                try:
                    self.rng_state, value = rng.sample_gamma(self.rng_state, a, b)
                except ValueError as err:
                    self._abort(str(err), frame, e.pos)
                return value
            case ast.LogLogisticDist(scale_param=scale, shape_param=shape):
                a = self.evaluate(scale, frame)
                b = self.evaluate(shape, frame)
                try:
                    self.rng_state, value = rng.sample_loglogistic(self.rng_state, a, b)
                except ValueError as err:
                    self._abort(str(err), frame, e.pos)
                return value
            case ast.EnUnit(expr=inner, unit=unit):
                return self.evaluate(inner, frame) * unit.scale
            case ast.DeUnit(expr=inner, unit=unit):
                return self.evaluate(inner, frame) / unit.scale
            case ast.Direction(attribute=attribute):
                return self._direction(attribute, frame)
        raise RuntimeAbort(f"cannot evaluate {type(e).__name__}")

    def _utility(self, name: str, frame: _Activation, pos) -> float:
        cached = frame.cache.get(name)
        if cached is _IN_PROGRESS:
            self._abort(f"utility {name!r} depends on itself", frame, pos)
        if cached is not None:
            return cached
        frame.cache[name] = _IN_PROGRESS
        value = self.evaluate(frame.utilities[name].expression, frame)
        frame.cache[name] = value
        return value

    def _arithmetic(self, op, args, frame: _Activation, pos) -> float:
        if len(args) == 1:
            return -self.evaluate(args[0], frame)
        left = self.evaluate(args[0], frame)
        right = self.evaluate(args[1], frame)
        try:
            match op:
                case "+":
                    return left + right
                case "-":
                    return left - right
                case "*":
                    return left * right
                case "/":
                    if right == 0.0:
                        self._abort("division by zero", frame, pos)
                    return left / right
                case _:
                    return math.pow(left, right)
        except (ValueError, OverflowError, ZeroDivisionError) as err:
            self._abort(str(err) or "arithmetic failure", frame, pos)

    def _call(self, function, args, frame: _Activation, pos) -> float:
        values = [self.evaluate(a, frame) for a in args]
        try:
            match function:
                case "cos":
                    return math.cos(values[0])
                case "sin":
                    return math.sin(values[0])
                case "tan":
                    return math.tan(values[0])
                case "exp":
                    return math.exp(values[0])
                case "ln":
                    return math.log(values[0])
                case "log":
                    return math.log10(values[0])
                case "sqrt":
                    return math.sqrt(values[0])
                case "abs":
                    return abs(values[0])
                case "floor":
                    return float(math.floor(values[0]))
                case "ceiling":
                    return float(math.ceil(values[0]))
                case "min":
                    return min(values)
                case _:
                    return max(values)
        except (ValueError, OverflowError) as err:
            self._abort(f"{function}: {err}", frame, pos)

    def _attribute_address(self, e: ast.AttributeVariable, frame: _Activation) -> int:
        if e.agent is None:
            return frame.base + self.slots[frame.kind][e.identifier]
        if e.agent == "world":
            return self.world_base + self.slots["World"][e.identifier]
        if frame.kind == "Patch":
            return frame.base + self.slots["Patch"][e.identifier]
        x = self.image.read(frame.base + self.slots[frame.kind]["x"])
        y = self.image.read(frame.base + self.slots[frame.kind]["y"])
        return self._patch_base_at(x, y) + self.slots["Patch"][e.identifier]

    def _target_address(self, variable: ast.AttributeVariable, frame: _Activation) -> int:
        return self._attribute_address(variable, frame)

    def _patch_index(self, position: float, extent: int) -> int:
        index = math.floor(position / self.config.patch_size)
        return min(max(index, 0), extent - 1)

    def _patch_base_at(self, x: float, y: float) -> int:
        px = self._patch_index(x, self.config.patches_x)
        py = self._patch_index(y, self.config.patches_y)
        return self.patch_bases[py * self.config.patches_x + px]

    def _direction(self, attribute: str, frame: _Activation) -> float:
        x = self.image.read(frame.base + self.slots[frame.kind]["x"])
        y = self.image.read(frame.base + self.slots[frame.kind]["y"])
        px = self._patch_index(x, self.config.patches_x)
        py = self._patch_index(y, self.config.patches_y)
        slot = self.slots["Patch"][attribute]
        best = None
        best_value = -math.inf
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                cx, cy = px + dx, py + dy
                if not (0 <= cx < self.config.patches_x and 0 <= cy < self.config.patches_y):
                    continue
                value = self.image.read(
                    self.patch_bases[cy * self.config.patches_x + cx] + slot
                )
                if value > best_value:
                    best_value = value
                    best = (cx, cy)
        if best == (px, py):
            return 0.0
        edge = self.config.patch_size
        center_x = (best[0] + 0.5) * edge
        center_y = (best[1] + 0.5) * edge
        return math.atan2(center_y - y, center_x - x)

    def _abort(self, message: str, frame: _Activation, pos) -> None:
        raise RuntimeAbort(
            message, tick=self.image.ticks + 1, stage=frame.kind, pos=pos
        )
