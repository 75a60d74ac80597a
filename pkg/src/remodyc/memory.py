"""Simulation memory: flat float store, synchronous commit, full trace.

Reads see the last committed frame while writes accumulate in pending
stores (``next`` for assignments, ``delta`` for increments), so update
order inside a tick cannot leak into results.  ``store`` folds pending
state into a frame and appends it to a backend; ``load`` rebuilds the
image from any stored frame, which is all replay needs.
"""
from __future__ import annotations

import abc
from dataclasses import dataclass
from pathlib import Path

from .parser import format_number
from .rng import format_state, parse_state


class AddressError(Exception):
    """Access to an address outside the allocated domain."""


@dataclass(frozen=True)
class TraceFrame:
    """Committed state after one tick (tick 1 is the initial state)."""

    values: dict[int, float]
    animats: dict[int, tuple[str, int]]
    rng_state: int


class StorageBackend(abc.ABC):
    @abc.abstractmethod
    def append_frame(self, frame: TraceFrame) -> None: ...

    @abc.abstractmethod
    def load_frame(self, tick: int) -> TraceFrame: ...

    @abc.abstractmethod
    def frame_count(self) -> int: ...


class InMemoryBackend(StorageBackend):
    def __init__(self):
        self.frames: list[TraceFrame] = []

    def append_frame(self, frame: TraceFrame) -> None:
        self.frames.append(
            TraceFrame(dict(frame.values), dict(frame.animats), frame.rng_state)
        )

    def load_frame(self, tick: int) -> TraceFrame:
        if not 1 <= tick <= len(self.frames):
            raise ValueError(f"no frame {tick} (have {len(self.frames)})")
        return self.frames[tick - 1]

    def frame_count(self) -> int:
        return len(self.frames)


class FileBackend(StorageBackend):
    """Three growing CSVs; every append hits the disk before returning,
    so an aborted run keeps all frames completed so far."""

    def __init__(self, run_dir):
        self.run_dir = Path(run_dir)
        self._values_path = self.run_dir / "frames.csv"
        self._animats_path = self.run_dir / "animats.csv"
        self._rng_path = self.run_dir / "rng.csv"
        if self._rng_path.exists():
            with open(self._rng_path) as handle:
                self._count = sum(1 for _ in handle) - 1
        else:
            self.run_dir.mkdir(parents=True, exist_ok=True)
            self._write_header(self._values_path, "tick,address,value")
            self._write_header(self._animats_path, "tick,base_address,stage,index")
            self._write_header(self._rng_path, "tick,state_hex")
            self._count = 0

    @staticmethod
    def _write_header(path: Path, header: str) -> None:
        with open(path, "w") as handle:
            handle.write(header + "\n")
            handle.flush()

    def append_frame(self, frame: TraceFrame) -> None:
        tick = self._count + 1
        with open(self._values_path, "a") as handle:
            for address in sorted(frame.values):
                handle.write(f"{tick},{address},{format_number(frame.values[address])}\n")
            handle.flush()
        with open(self._animats_path, "a") as handle:
            for base in sorted(frame.animats):
                stage, index = frame.animats[base]
                handle.write(f"{tick},{base},{stage},{index}\n")
            handle.flush()
        with open(self._rng_path, "a") as handle:
            handle.write(f"{tick},{format_state(frame.rng_state)}\n")
            handle.flush()
        self._count = tick

    def load_frame(self, tick: int) -> TraceFrame:
        if not 1 <= tick <= self._count:
            raise ValueError(f"no frame {tick} (have {self._count})")
        values: dict[int, float] = {}
        with open(self._values_path) as handle:
            next(handle)
            for line in handle:
                t, address, value = line.rstrip("\n").split(",")
                if int(t) == tick:
                    values[int(address)] = float(value)
        animats: dict[int, tuple[str, int]] = {}
        with open(self._animats_path) as handle:
            next(handle)
            for line in handle:
                t, base, stage, index = line.rstrip("\n").split(",")
                if int(t) == tick:
                    animats[int(base)] = (stage, int(index))
        rng_state = None
        with open(self._rng_path) as handle:
            next(handle)
            for line in handle:
                t, state_hex = line.rstrip("\n").split(",")
                if int(t) == tick:
                    rng_state = parse_state(state_hex)
        if rng_state is None:
            raise ValueError(f"frame {tick} missing from rng.csv")
        return TraceFrame(values, animats, rng_state)

    def frame_count(self) -> int:
        return self._count


class MemoryImage:
    """The working image: committed values plus the tick's pending writes."""

    def __init__(self):
        self.vals: dict[int, float] = {}
        self.next: dict[int, float] = {}
        self.delta: dict[int, float] = {}
        self.deads: set[int] = set()
        self.animats: dict[int, tuple[str, int]] = {}
        self.sizes: dict[int, int] = {}
        self.stage_indices: dict[str, int] = {}
        self.next_free = 1
        self.ticks = 0

    def read(self, address: int) -> float:
        try:
            return self.vals[address]
        except KeyError:
            raise AddressError(f"read from unallocated address {address}") from None

    def write(self, address: int, value: float) -> None:
        if address not in self.next:
            raise AddressError(f"write to unallocated address {address}")
        self.next[address] = value

    def write_delta(self, address: int, value: float) -> None:
        if address not in self.delta:
            raise AddressError(f"write to unallocated address {address}")
        self.delta[address] += value

    def allocate(self, stage: str, size: int) -> int:
        """Zeroed contiguous block; returns its base address.  A block
        always takes at least one slot so bases stay distinct."""
        base = self.next_free
        for address in range(base, base + max(size, 1)):
            self.vals[address] = 0.0
            self.next[address] = 0.0
            self.delta[address] = 0.0
        index = self.stage_indices.get(stage, 0) + 1
        self.stage_indices[stage] = index
        self.animats[base] = (stage, index)
        self.sizes[base] = max(size, 1)
        self.next_free = base + max(size, 1)
        return base

    def kill(self, base: int) -> None:
        """Mark a whole block dead; its values stay readable until the
        frame boundary drops them."""
        if base not in self.animats:
            raise AddressError(f"kill of unallocated base {base}")
        if base in self.deads:
            return
        self.deads.update(range(base, base + self.sizes[base]))

    def store(self, backend: StorageBackend, rng_state: int) -> TraceFrame:
        if self.ticks != backend.frame_count():
            raise ValueError(
                f"image at tick {self.ticks} cannot append frame "
                f"{backend.frame_count() + 1}"
            )
        values = {
            address: self.next[address] + self.delta[address]
            for address in self.next
            if address not in self.deads
        }
        animats = {
            base: entry for base, entry in self.animats.items() if base not in self.deads
        }
        frame = TraceFrame(values, animats, rng_state)
        backend.append_frame(frame)
        return frame

    def apply_frame(self, frame: TraceFrame, tick: int) -> None:
        self.vals = dict(frame.values)
        self.next = dict(frame.values)
        self.delta = {address: 0.0 for address in frame.values}
        self.deads = set()
        self.animats = dict(frame.animats)
        self.ticks = tick
        self.next_free = max(frame.values, default=0) + 1
        bases = sorted(self.animats)
        self.sizes = {
            base: following - base
            for base, following in zip(bases, bases[1:] + [self.next_free])
        }
        self.stage_indices = {}
        for stage, index in self.animats.values():
            if index > self.stage_indices.get(stage, 0):
                self.stage_indices[stage] = index

    def load(self, backend: StorageBackend, tick: int) -> int:
        """Rebuild the image from a stored frame; returns its RNG state."""
        frame = backend.load_frame(tick)
        self.apply_frame(frame, tick)
        return frame.rng_state
