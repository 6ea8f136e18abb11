"""Frame generation and iterative interference cancellation.

A frame is a bipartite graph between packets and slots: each transmitting
packet places ``l`` copies of itself in ``l`` distinct slots chosen
uniformly at random. The receiver peels the graph: any slot holding exactly
one not-yet-decoded copy reveals its packet, and all copies of a decoded
packet are cancelled from their slots, possibly freeing further slots.

One decode iteration is a synchronous sweep: every currently-clean slot is
read, then all cancellations are applied together. This makes the iteration
count well defined and the result independent of slot processing order.
Cancellation is assumed perfect, so interference among copies is the only
decoding impairment.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig, sample_degrees
from .errors import ValidationError


@dataclass(frozen=True)
class FrameGraph:
    """Slot occupancy of one frame: ``packets`` maps packet id to the set of
    slots holding its copies."""

    frame_size: int
    packets: tuple[tuple[int, frozenset[int]], ...]

    def __post_init__(self):
        if self.frame_size < 1:
            raise ValidationError(f"frame_size must be >= 1, got {self.frame_size}")
        seen = set()
        for pid, slots in self.packets:
            if pid in seen:
                raise ValidationError(f"duplicate packet id {pid}")
            seen.add(pid)
            if not slots:
                raise ValidationError(f"packet {pid} has no slots")
            for s in slots:
                if not 0 <= s < self.frame_size:
                    raise ValidationError(f"packet {pid} slot {s} outside [0, {self.frame_size})")

    @property
    def num_packets(self) -> int:
        return len(self.packets)

    def dump(self) -> str:
        """Debug text dump, one line per packet: id then sorted slots.
        Not a stability-guaranteed format."""
        lines = [f"{pid}: {' '.join(str(s) for s in sorted(slots))}"
                 for pid, slots in self.packets]
        return "\n".join(lines)


@dataclass(frozen=True)
class DecodeResult:
    """Outcome of peeling one frame."""

    decoded_ids: frozenset[int]
    iterations_used: int
    per_iteration_decoded: tuple[int, ...]

    def __post_init__(self):
        if sum(self.per_iteration_decoded) != len(self.decoded_ids):
            raise ValidationError("per-iteration counts do not sum to the decoded total")
        if self.iterations_used != len(self.per_iteration_decoded):
            raise ValidationError("iterations_used does not match per-iteration counts")


def sample_slot_sets(degrees: np.ndarray, frame_size: int,
                     rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Choose distinct slots for every packet, vectorized over packets.

    ``degrees[i]`` copies are placed for packet ``i``, each set drawn
    uniformly without replacement from ``frame_size`` slots. Returns flat
    arrays ``(copy_packet, copy_slot)`` where packet ``i`` owns the
    contiguous run of ``degrees[i]`` entries.
    """
    degrees = np.asarray(degrees, dtype=np.int64)
    if degrees.size and degrees.max() > frame_size:
        raise ValidationError("burst degree exceeds frame size")
    total = int(degrees.sum())
    copy_packet = np.repeat(np.arange(degrees.size), degrees)
    copy_slot = np.empty(total, dtype=np.int64)
    offsets = np.concatenate(([0], np.cumsum(degrees)))
    for l in np.unique(degrees):
        l = int(l)
        rows = np.flatnonzero(degrees == l)
        dest = offsets[rows][:, None] + np.arange(l)
        if l * (l - 1) <= frame_size:
            # rejection sampling: collision probability is at most ~1/2,
            # so redraws die out geometrically
            draws = rng.integers(0, frame_size, size=(rows.size, l))
            if l > 1:
                while True:
                    srt = np.sort(draws, axis=1)
                    bad = np.flatnonzero((np.diff(srt, axis=1) == 0).any(axis=1))
                    if bad.size == 0:
                        break
                    draws[bad] = rng.integers(0, frame_size, size=(bad.size, l))
        else:
            # dense degrees: take the first l entries of a random permutation
            keys = rng.random((rows.size, frame_size))
            draws = np.argpartition(keys, l - 1, axis=1)[:, :l]
        copy_slot[dest] = draws
    return copy_packet, copy_slot


def build_frame(num_packets: int, config: SystemConfig, rng: np.random.Generator) -> FrameGraph:
    """Generate one frame: every packet samples its own degree and slot set."""
    if num_packets < 0:
        raise ValidationError(f"num_packets must be >= 0, got {num_packets}")
    degrees = sample_degrees(config.degree_dist, num_packets, rng)
    copy_packet, copy_slot = sample_slot_sets(degrees, config.frame_size, rng)
    packets = []
    pos = 0
    for pid in range(num_packets):
        l = int(degrees[pid])
        packets.append((pid, frozenset(int(s) for s in copy_slot[pos:pos + l])))
        pos += l
    return FrameGraph(config.frame_size, tuple(packets))


def peel_flat(copy_packet: np.ndarray, copy_slot: np.ndarray, num_packets: int,
              num_slots: int, max_iterations: int) -> tuple[np.ndarray, list[int]]:
    """Synchronous peeling on a flat copy list (vectorized engine).

    Frames packed into disjoint slot ranges peel independently, so many
    frames can be decoded in one call; the sweep cap then applies to each
    frame individually.

    Returns a boolean decoded mask over packets and the per-sweep decode
    counts.
    """
    decoded = np.zeros(num_packets, dtype=bool)
    alive = np.ones(copy_packet.size, dtype=bool)
    per_iter: list[int] = []
    for _ in range(max_iterations):
        counts = np.bincount(copy_slot[alive], minlength=num_slots)
        clean = alive & (counts[copy_slot] == 1)
        new_ids = np.unique(copy_packet[clean])
        if new_ids.size == 0:
            break
        decoded[new_ids] = True
        alive &= ~decoded[copy_packet]
        per_iter.append(int(new_ids.size))
    return decoded, per_iter


def _peel_sets(slot_members: list[set[int]], packet_slots: dict[int, frozenset[int]],
               max_iterations: int) -> tuple[set[int], list[int]]:
    """Synchronous peeling on per-slot member sets (small-frame engine)."""
    decoded: set[int] = set()
    per_iter: list[int] = []
    for _ in range(max_iterations):
        newly = {next(iter(m)) for m in slot_members if len(m) == 1}
        if not newly:
            break
        for pid in newly:
            for s in packet_slots[pid]:
                slot_members[s].discard(pid)
        decoded |= newly
        per_iter.append(len(newly))
    return decoded, per_iter


def sic_decode(frame: FrameGraph, max_iterations: int) -> DecodeResult:
    """Peel a frame for at most ``max_iterations`` synchronous sweeps.

    Within one sweep, a packet decoded through several clean copies counts
    once. The result (decoded set and sweep count) does not depend on packet
    ids or slot processing order.
    """
    if max_iterations < 1:
        raise ValidationError(f"max_iterations must be >= 1, got {max_iterations}")
    slot_members: list[set[int]] = [set() for _ in range(frame.frame_size)]
    packet_slots = {pid: slots for pid, slots in frame.packets}
    for pid, slots in frame.packets:
        for s in slots:
            slot_members[s].add(pid)
    decoded, per_iter = _peel_sets(slot_members, packet_slots, max_iterations)
    return DecodeResult(frozenset(decoded), len(per_iter), tuple(per_iter))


def throughput_of(result: DecodeResult, frame_size: int) -> float:
    """Decoded packets per slot."""
    if frame_size < 1:
        raise ValidationError(f"frame_size must be >= 1, got {frame_size}")
    return len(result.decoded_ids) / frame_size
