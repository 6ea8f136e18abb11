import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from sicaloha import (FrameGraph, SystemConfig, ValidationError, build_frame,
                      make_irregular, make_regular, sic_decode, throughput_of)
from sicaloha.frame import peel_flat, sample_slot_sets


def brute_force_peel(frame: FrameGraph) -> set[int]:
    """Independent oracle: cancel one clean copy at a time, restarting the
    scan after every removal, until no slot holds exactly one copy. Peeling
    is confluent, so any removal order reaches the same fixpoint as the
    synchronous-sweep decoder."""
    members = [set() for _ in range(frame.frame_size)]
    slots_of = dict(frame.packets)
    for pid, slots in frame.packets:
        for s in slots:
            members[s].add(pid)
    decoded = set()
    progress = True
    while progress:
        progress = False
        for m in members:
            if len(m) == 1:
                pid = next(iter(m))
                for s in slots_of[pid]:
                    members[s].discard(pid)
                decoded.add(pid)
                progress = True
                break
    return decoded


def frame_from_slot_sets(frame_size, slot_sets) -> FrameGraph:
    return FrameGraph(frame_size,
                      tuple((i, frozenset(s)) for i, s in enumerate(slot_sets)))


random_frames = st.integers(2, 12).flatmap(
    lambda n_f: st.lists(
        st.sets(st.integers(0, n_f - 1), min_size=1, max_size=min(4, n_f)),
        min_size=0, max_size=10,
    ).map(lambda sets: frame_from_slot_sets(n_f, sets)))


class TestBuildFrame:
    def test_empty_frame(self, crdsa_config):
        frame = build_frame(0, crdsa_config, np.random.default_rng(0))
        assert frame.num_packets == 0

    def test_single_packet_two_distinct_slots(self, crdsa_config):
        frame = build_frame(1, crdsa_config, np.random.default_rng(1))
        (pid, slots), = frame.packets
        assert pid == 0
        assert len(slots) == 2
        assert all(0 <= s < 100 for s in slots)

    def test_degrees_follow_distribution(self):
        config = SystemConfig(50, 10, make_irregular([(2, 0.5), (3, 0.5)]))
        frame = build_frame(4000, config, np.random.default_rng(2))
        sizes = np.array([len(slots) for _, slots in frame.packets])
        assert set(sizes) == {2, 3}
        assert abs(np.mean(sizes == 2) - 0.5) < 3 * 0.5 / np.sqrt(4000)

    def test_slot_placement_uniform_chi_square(self, crdsa_config):
        # 10^4 degree-2 packets over 100 slots: occupancy counts must be
        # consistent with uniform placement at the 1% significance level
        frame = build_frame(10**4, crdsa_config, np.random.default_rng(3))
        counts = np.zeros(100)
        for _, slots in frame.packets:
            for s in slots:
                counts[s] += 1
        assert stats.chisquare(counts).pvalue > 0.01

    def test_rejects_negative_count(self, crdsa_config):
        with pytest.raises(ValidationError):
            build_frame(-1, crdsa_config, np.random.default_rng(0))

    def test_full_degree_uses_every_slot(self):
        config = SystemConfig(4, 5, make_regular(4))
        frame = build_frame(3, config, np.random.default_rng(4))
        for _, slots in frame.packets:
            assert slots == frozenset(range(4))

    def test_dump_format(self):
        frame = frame_from_slot_sets(8, [{7, 3}, {0}])
        assert frame.dump() == "0: 3 7\n1: 0"


class TestSampleSlotSets:
    @pytest.mark.parametrize("degree", [1, 2, 3, 7, 9, 10])
    def test_distinct_slots_every_degree(self, degree):
        # spans both the rejection and the permutation sampling paths
        degrees = np.full(500, degree)
        copy_packet, copy_slot = sample_slot_sets(degrees, 10, np.random.default_rng(degree))
        assert copy_packet.size == 500 * degree
        for pid in range(500):
            mine = copy_slot[copy_packet == pid]
            assert len(set(mine.tolist())) == degree
            assert mine.min() >= 0 and mine.max() < 10

    def test_rejects_degree_above_frame_size(self):
        with pytest.raises(ValidationError):
            sample_slot_sets(np.array([5]), 4, np.random.default_rng(0))


class TestSicDecode:
    def test_lone_packet_decodes_first_sweep(self):
        frame = frame_from_slot_sets(10, [{3, 7}])
        result = sic_decode(frame, 20)
        assert result.decoded_ids == {0}
        assert result.iterations_used == 1

    def test_twin_packets_form_stopping_set(self):
        frame = frame_from_slot_sets(10, [{3, 7}, {3, 7}])
        result = sic_decode(frame, 20)
        assert result.decoded_ids == frozenset()
        assert result.iterations_used == 0

    def test_chain_peels_in_order(self):
        # A:{0,1} B:{1,2} C:{2,3} - A is clean in slot 0, cancelling it
        # frees B in slot 1, then C in slot 2
        frame = frame_from_slot_sets(4, [{0, 1}, {1, 2}, {2, 3}])
        result = sic_decode(frame, 20)
        assert result.decoded_ids == {0, 1, 2}
        assert result.iterations_used <= 3
        assert result.decoded_ids == brute_force_peel(frame)
        assert throughput_of(result, 4) == 0.75

    def test_iteration_cap_respected(self):
        frame = frame_from_slot_sets(4, [{0, 1}, {1, 2}, {2, 3}])
        capped = sic_decode(frame, 1)
        # only the copies already clean decode in a single sweep: A, and C
        # (clean in slot 3) but not B
        assert capped.iterations_used == 1
        assert capped.decoded_ids == {0, 2}

    @given(random_frames)
    @settings(max_examples=300, deadline=None)
    def test_matches_brute_force_oracle(self, frame):
        result = sic_decode(frame, frame.frame_size + frame.num_packets + 1)
        assert result.decoded_ids == brute_force_peel(frame)

    @given(random_frames, st.integers(1, 6))
    @settings(max_examples=200, deadline=None)
    def test_monotone_in_iterations(self, frame, k):
        assert sic_decode(frame, k).decoded_ids <= sic_decode(frame, k + 1).decoded_ids

    @given(random_frames, st.randoms(use_true_random=False))
    @settings(max_examples=200, deadline=None)
    def test_order_independent(self, frame, rnd):
        # relabel packets and reorder them: decoded sets must correspond
        # and the sweep count must not change
        ids = list(range(frame.num_packets))
        rnd.shuffle(ids)
        relabeled = FrameGraph(frame.frame_size, tuple(
            (ids[pid], slots) for pid, slots in sorted(
                frame.packets, key=lambda _: rnd.random())))
        base = sic_decode(frame, frame.frame_size + 10)
        perm = sic_decode(relabeled, frame.frame_size + 10)
        assert perm.decoded_ids == {ids[pid] for pid in base.decoded_ids}
        assert perm.iterations_used == base.iterations_used
        assert perm.per_iteration_decoded == base.per_iteration_decoded

    @given(random_frames)
    @settings(max_examples=100, deadline=None)
    def test_termination_bound(self, frame):
        result = sic_decode(frame, 10**6)
        assert result.iterations_used <= frame.num_packets
        assert sum(result.per_iteration_decoded) == len(result.decoded_ids)

    def test_degree_one_is_plain_slotted_aloha(self):
        config = SystemConfig(20, 10, make_regular(1))
        rng = np.random.default_rng(5)
        frame = build_frame(15, config, rng)
        result = sic_decode(frame, 10)
        slot_counts: dict[int, int] = {}
        for _, slots in frame.packets:
            (s,) = slots
            slot_counts[s] = slot_counts.get(s, 0) + 1
        expected = {pid for pid, slots in frame.packets
                    if slot_counts[next(iter(slots))] == 1}
        assert result.decoded_ids == expected
        # extra sweeps cannot help without cancellation chains
        assert sic_decode(frame, 1).decoded_ids == expected


class TestPeelFlat:
    @given(random_frames)
    @settings(max_examples=200, deadline=None)
    def test_flat_engine_matches_set_engine(self, frame):
        # the vectorized engine used for batch estimation must agree with
        # the reference decoder packet for packet
        copy_packet = np.array([pid for pid, slots in frame.packets for _ in slots],
                               dtype=np.int64)
        copy_slot = np.array([s for _, slots in frame.packets for s in sorted(slots)],
                             dtype=np.int64)
        decoded, per_iter = peel_flat(copy_packet, copy_slot, frame.num_packets,
                                      frame.frame_size, frame.frame_size + 10)
        result = sic_decode(frame, frame.frame_size + 10)
        assert set(np.flatnonzero(decoded).tolist()) == result.decoded_ids
        assert tuple(per_iter) == result.per_iteration_decoded


class TestThroughputOf:
    def test_simple_ratio(self):
        # 55 packets in distinct clean slots all decode
        frame = frame_from_slot_sets(100, [{i} for i in range(55)])
        result = sic_decode(frame, 20)
        assert throughput_of(result, 100) == 0.55

    def test_empty_frame(self):
        result = sic_decode(frame_from_slot_sets(10, []), 5)
        assert throughput_of(result, 10) == 0.0
