"""Memory image semantics and trace storage."""
import pytest
from hypothesis import given, strategies as st

from remodyc.memory import (
    AddressError,
    FileBackend,
    InMemoryBackend,
    MemoryImage,
    TraceFrame,
)


def image_with_block(stage="Egg", size=3):
    image = MemoryImage()
    base = image.allocate(stage, size)
    return image, base


class TestImageBasics:
    def test_allocation_is_contiguous_and_zeroed(self):
        image = MemoryImage()
        first = image.allocate("Egg", 3)
        second = image.allocate("Egg", 3)
        assert (first, second) == (1, 4)
        assert all(image.read(a) == 0.0 for a in range(1, 7))
        assert image.animats == {1: ("Egg", 1), 4: ("Egg", 2)}

    def test_instance_indices_count_per_stage(self):
        image = MemoryImage()
        image.allocate("Egg", 2)
        image.allocate("Adult", 2)
        image.allocate("Egg", 2)
        assert [image.animats[b] for b in sorted(image.animats)] == [
            ("Egg", 1),
            ("Adult", 1),
            ("Egg", 2),
        ]

    def test_empty_block_still_occupies_an_address(self):
        image = MemoryImage()
        first = image.allocate("World", 0)
        second = image.allocate("Patch", 0)
        assert first != second

    def test_reads_guarded(self):
        image, _ = image_with_block()
        with pytest.raises(AddressError):
            image.read(99)

    def test_writes_guarded(self):
        image, _ = image_with_block()
        with pytest.raises(AddressError):
            image.write(99, 1.0)
        with pytest.raises(AddressError):
            image.write_delta(0, 1.0)

    def test_writes_invisible_until_commit(self):
        image, base = image_with_block()
        image.write(base, 5.0)
        image.write_delta(base + 1, 2.0)
        assert image.read(base) == 0.0
        assert image.read(base + 1) == 0.0

    def test_deltas_accumulate(self):
        image, base = image_with_block()
        image.write_delta(base, 1.25)
        image.write_delta(base, 2.5)
        frame = image.store(InMemoryBackend(), 0)
        assert frame.values[base] == 3.75


class TestStore:
    def test_commit_folds_next_plus_delta(self):
        image, base = image_with_block()
        image.write(base, 5.0)
        image.write_delta(base, 0.5)
        image.write_delta(base + 1, 2.0)
        frame = image.store(InMemoryBackend(), 7)
        assert frame.values == {base: 5.5, base + 1: 2.0, base + 2: 0.0}
        assert frame.rng_state == 7

    def test_killed_blocks_dropped_but_readable_before(self):
        image = MemoryImage()
        egg = image.allocate("Egg", 2)
        adult = image.allocate("Adult", 2)
        image.write(egg, 9.0)
        image.kill(egg)
        assert image.read(egg) == 0.0
        image.kill(egg)
        frame = image.store(InMemoryBackend(), 0)
        assert set(frame.values) == {adult, adult + 1}
        assert frame.animats == {adult: ("Adult", 1)}

    def test_kill_unknown_base(self):
        image, base = image_with_block()
        with pytest.raises(AddressError):
            image.kill(base + 1)

    def test_store_requires_backend_in_step(self):
        image, _ = image_with_block()
        backend = InMemoryBackend()
        image.store(backend, 0)
        with pytest.raises(ValueError):
            image.store(backend, 0)


class TestApplyAndLoad:
    def test_round_trip(self):
        backend = InMemoryBackend()
        image, base = image_with_block()
        image.write(base, 1.5)
        frame = image.store(backend, 11)
        image.apply_frame(frame, 1)
        assert image.read(base) == 1.5
        assert image.delta == {a: 0.0 for a in frame.values}
        assert image.ticks == 1
        assert image.next_free == base + 3

    def test_load_restores_any_stored_tick(self):
        backend = InMemoryBackend()
        image, base = image_with_block()
        for tick, value in enumerate([1.0, 2.0, 3.0], start=1):
            image.write(base, value)
            image.apply_frame(image.store(backend, tick * 100), tick)
        fresh = MemoryImage()
        assert fresh.load(backend, 2) == 200
        assert fresh.read(base) == 2.0
        assert fresh.animats == image.animats

    def test_allocation_continues_after_load(self):
        backend = InMemoryBackend()
        image, _ = image_with_block()
        image.apply_frame(image.store(backend, 0), 1)
        fresh = MemoryImage()
        fresh.load(backend, 1)
        assert fresh.allocate("Egg", 3) == 4
        assert fresh.animats[4] == ("Egg", 2)

    def test_kill_works_after_load(self):
        backend = InMemoryBackend()
        image = MemoryImage()
        egg = image.allocate("Egg", 2)
        adult = image.allocate("Adult", 2)
        image.apply_frame(image.store(backend, 0), 1)
        fresh = MemoryImage()
        fresh.load(backend, 1)
        fresh.kill(egg)
        frame = fresh.store(backend, 0)
        assert set(frame.values) == {adult, adult + 1}


class TestInMemoryBackend:
    def test_stored_frames_are_isolated(self):
        backend = InMemoryBackend()
        values = {1: 1.0}
        backend.append_frame(TraceFrame(values, {1: ("Egg", 1)}, 0))
        values[1] = 99.0
        assert backend.load_frame(1).values == {1: 1.0}

    def test_range_checks(self):
        backend = InMemoryBackend()
        with pytest.raises(ValueError):
            backend.load_frame(1)


class TestFileBackend:
    def fill(self, path):
        backend = FileBackend(path)
        image = MemoryImage()
        base = image.allocate("Egg", 3)
        image.write(base, 2.5)
        image.write_delta(base + 1, 0.5)
        image.apply_frame(image.store(backend, 0xE220A8397B1DCDAF), 1)
        image.write(base, 86400.0)
        image.apply_frame(image.store(backend, 0x1B39896A51A8749B), 2)
        return backend, image, base

    def test_exact_file_contents(self, tmp_path):
        self.fill(tmp_path)
        assert (tmp_path / "frames.csv").read_text() == (
            "tick,address,value\n"
            "1,1,2.5\n1,2,0.5\n1,3,0\n"
            "2,1,86400\n2,2,0.5\n2,3,0\n"
        )
        assert (tmp_path / "animats.csv").read_text() == (
            "tick,base_address,stage,index\n1,1,Egg,1\n2,1,Egg,1\n"
        )
        assert (tmp_path / "rng.csv").read_text() == (
            "tick,state_hex\n1,e220a8397b1dcdaf\n2,1b39896a51a8749b\n"
        )

    def test_load_frame_round_trips(self, tmp_path):
        backend, image, base = self.fill(tmp_path)
        frame = backend.load_frame(1)
        assert frame.values == {base: 2.5, base + 1: 0.5, base + 2: 0.0}
        assert frame.animats == {base: ("Egg", 1)}
        assert frame.rng_state == 0xE220A8397B1DCDAF

    def test_reopen_resumes_numbering(self, tmp_path):
        _, image, base = self.fill(tmp_path)
        reopened = FileBackend(tmp_path)
        assert reopened.frame_count() == 2
        image.write(base, 7.0)
        image.apply_frame(image.store(reopened, 3), 3)
        assert reopened.load_frame(3).values[base] == 7.0

    def test_matches_in_memory_backend(self, tmp_path):
        _, image, base = self.fill(tmp_path)
        memory_backend = InMemoryBackend()
        replay = MemoryImage()
        replay.allocate("Egg", 3)
        replay.write(base, 2.5)
        replay.write_delta(base + 1, 0.5)
        replay.apply_frame(replay.store(memory_backend, 0xE220A8397B1DCDAF), 1)
        replay.write(base, 86400.0)
        replay.apply_frame(replay.store(memory_backend, 0x1B39896A51A8749B), 2)
        disk = FileBackend(tmp_path)
        for tick in (1, 2):
            assert disk.load_frame(tick) == memory_backend.load_frame(tick)

    def test_range_check(self, tmp_path):
        backend, _, _ = self.fill(tmp_path)
        with pytest.raises(ValueError):
            backend.load_frame(3)


@st.composite
def operations(draw):
    ops = []
    for _ in range(draw(st.integers(0, 30))):
        kind = draw(st.sampled_from(["write", "delta"]))
        address = draw(st.integers(1, 5))
        value = draw(st.floats(-1e6, 1e6, allow_nan=False))
        ops.append((kind, address, value))
    return ops


@given(operations())
def test_commit_matches_dict_oracle(ops):
    image = MemoryImage()
    image.allocate("S", 5)
    committed = {a: 0.0 for a in range(1, 6)}
    pending = dict(committed)
    increments = {a: 0.0 for a in range(1, 6)}
    for kind, address, value in ops:
        if kind == "write":
            image.write(address, value)
            pending[address] = value
        else:
            image.write_delta(address, value)
            increments[address] += value
        assert {a: image.read(a) for a in committed} == committed
    frame = image.store(InMemoryBackend(), 0)
    assert frame.values == {a: pending[a] + increments[a] for a in pending}


@given(operations())
def test_delta_order_is_irrelevant(ops):
    deltas = [(address, value) for kind, address, value in ops if kind == "delta"]
    forward = MemoryImage()
    forward.allocate("S", 5)
    backward = MemoryImage()
    backward.allocate("S", 5)
    for address, value in deltas:
        forward.write_delta(address, value)
    for address, value in reversed(deltas):
        backward.write_delta(address, value)
    original = forward.store(InMemoryBackend(), 0)
    reversed_frame = backward.store(InMemoryBackend(), 0)
    assert set(original.values) == set(reversed_frame.values)
    for address, value in original.values.items():
        assert value == pytest.approx(reversed_frame.values[address], rel=1e-9, abs=1e-9)
