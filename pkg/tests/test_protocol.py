import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from crowdfind.protocol import (
    FrameVector,
    HashFamily,
    InvalidParameter,
    OwnerKey,
    PollRequest,
    SealedLocation,
    batch_frames,
    hash_slot,
    open_location,
    reply_slots,
    run_frame,
    run_selected_frame,
    seal_location,
)

u64 = st.integers(min_value=0, max_value=2**64 - 1)


def frame_from_slots(slot_sets, f):
    bits = np.zeros(f, dtype=bool)
    for s in slot_sets:
        bits[list(s)] = True
    return bits


class TestHashSlot:
    @pytest.mark.parametrize("tag_id,seed", [(0, 0), (17, 42), (2**64 - 1, 5), (123456789, 2**63)])
    def test_single_slot_frame(self, tag_id, seed):
        assert hash_slot(tag_id, seed, 1, 1) == 0

    def test_golden_value(self):
        # pinned at first run; guards cross-platform determinism of the mixer
        assert hash_slot(17, 42, 1, 300) == 255
        assert [hash_slot(17, 42, a, 300) for a in range(1, 11)] == [
            255, 223, 21, 186, 116, 271, 155, 110, 119, 130,
        ]

    def test_repeatable(self):
        assert hash_slot(99, 7, 3, 300) == hash_slot(99, 7, 3, 300)

    def test_zero_frame_rejected(self):
        with pytest.raises(InvalidParameter):
            hash_slot(1, 1, 1, 0)

    def test_alpha_out_of_range(self):
        with pytest.raises(InvalidParameter):
            HashFamily(3).slot(1, 1, 4, 300)
        with pytest.raises(InvalidParameter):
            HashFamily(3).slot(1, 1, 0, 300)

    def test_vector_and_scalar_paths_agree(self):
        ids = [1, 2, 3, 2**40 + 7]
        mat = HashFamily(5).slots(ids, 11, 97)
        for i, tid in enumerate(ids):
            assert list(mat[i]) == [hash_slot(tid, 11, a, 97) for a in range(1, 6)]

    def test_uniform_over_slots(self):
        f, n = 300, 100_000
        rng = np.random.default_rng(2024)
        ids = rng.integers(0, 2**64, size=n, dtype=np.uint64)
        counts = np.bincount(HashFamily(1).slots(ids, 12345, f)[:, 0], minlength=f)
        expected = n / f
        sigma = np.sqrt(expected * (1 - 1 / f))
        assert np.all(np.abs(counts - expected) < 5 * sigma)
        assert stats.chisquare(counts).pvalue > 0.001

    @given(u64, u64, st.integers(1, 20), st.integers(1, 500))
    def test_range(self, tag_id, seed, alpha, f):
        assert 0 <= hash_slot(tag_id, seed, alpha, f, k=20) < f


class TestReplySlots:
    def test_single_hash_is_singleton(self):
        assert len(reply_slots(5, 6, 300, 1)) == 1

    def test_single_slot_frame(self):
        assert reply_slots(5, 6, 1, 7) == {0}

    def test_recomputation(self):
        tag_id, seed = 31337, 271828
        expected = {hash_slot(tag_id, seed, a, 300) for a in range(1, 11)}
        assert reply_slots(tag_id, seed, 300, 10) == expected

    @given(u64, u64, st.integers(1, 50), st.integers(1, 12))
    def test_size_bounds(self, tag_id, seed, f, k):
        assert 1 <= len(reply_slots(tag_id, seed, f, k)) <= min(k, f)


class TestRunFrame:
    def test_empty(self):
        frame, responses = run_frame([], 1, 40, 3)
        assert frame.length == 40 and frame.ones() == 0 and responses == 0

    def test_single_tag(self):
        frame, responses = run_frame([77], 9, 300, 10)
        slots = reply_slots(77, 9, 300, 10)
        assert np.array_equal(frame.bits, frame_from_slots([slots], 300))
        assert responses == len(slots)

    def test_two_tags_or(self):
        a, _ = run_frame([1], 3, 50, 4)
        b, _ = run_frame([2], 3, 50, 4)
        both, responses = run_frame([1, 2], 3, 50, 4)
        assert both == (a | b)
        assert responses == len(reply_slots(1, 3, 50, 4)) + len(reply_slots(2, 3, 50, 4))

    @settings(max_examples=50, deadline=None)
    @given(st.sets(u64, max_size=12), st.sets(u64, max_size=12), u64, st.integers(1, 64), st.integers(1, 8))
    def test_or_composition(self, A, B, seed, f, k):
        B = B - A
        fa, ra = run_frame(A, seed, f, k)
        fb, rb = run_frame(B, seed, f, k)
        fab, rab = run_frame(A | B, seed, f, k)
        assert fab == (fa | fb)
        assert rab == ra + rb

    def test_hash_ops_counted_per_tag(self):
        _, _, hops = batch_frames(np.array([0, 0, 1]), [5, 6, 7], 1, 2, 30, 4)
        assert hops == 12


class TestSelectedFrame:
    def test_disjoint_positions(self):
        tags, seed, f, k = [10, 11], 4, 300, 3
        used = reply_slots(10, seed, f, k) | reply_slots(11, seed, f, k)
        free = [p for p in range(f) if p not in used][:15]
        frame, responses = run_selected_frame(tags, PollRequest(seed, f, tuple(free)), k)
        assert frame.length == 15 and frame.ones() == 0 and responses == 0

    def test_all_positions_is_full_frame(self):
        tags, seed, f, k = [3, 4, 5], 8, 60, 5
        full, r_full = run_frame(tags, seed, f, k)
        sel, r_sel = run_selected_frame(tags, PollRequest(seed, f, tuple(range(f))), k)
        assert sel == full and r_sel == r_full

    @settings(max_examples=50, deadline=None)
    @given(st.sets(u64, min_size=1, max_size=15), u64, st.data())
    def test_masks_full_frame(self, tags, seed, data):
        f = data.draw(st.integers(2, 80))
        k = data.draw(st.integers(1, 6))
        positions = tuple(sorted(data.draw(st.sets(st.integers(0, f - 1), min_size=1, max_size=f))))
        full, _ = run_frame(tags, seed, f, k)
        sel, responses = run_selected_frame(tags, PollRequest(seed, f, positions), k)
        assert np.array_equal(sel.bits, full.bits[list(positions)])
        assert responses == sum(len(reply_slots(t, seed, f, k) & set(positions)) for t in tags)

    @pytest.mark.parametrize("positions", [(), (3, 3), (5, 2), (-1, 4), (0, 300)])
    def test_invalid_positions(self, positions):
        with pytest.raises(InvalidParameter):
            PollRequest(1, 300, positions)

    def test_needs_positions(self):
        with pytest.raises(InvalidParameter):
            run_selected_frame([1], PollRequest(1, 30), 2)


class TestFrameVector:
    def test_immutable(self):
        fv = FrameVector([1, 0, 1])
        with pytest.raises(ValueError):
            fv.bits[0] = False

    def test_empty_rejected(self):
        with pytest.raises(InvalidParameter):
            FrameVector([])


class TestSealing:
    def test_round_trip(self):
        key = OwnerKey()
        sealed = seal_location((10.0, 20.0), 99, key.public)
        assert open_location(sealed, key) == (99, (10.0, 20.0))

    def test_two_seals_distinct_but_equal_payload(self):
        key = OwnerKey()
        a = seal_location((1.0, 2.0), 5, key.public)
        b = seal_location((1.0, 2.0), 5, key.public)
        assert a is not b and a != b
        assert open_location(a, key) == open_location(b, key)

    def test_foreign_key_cannot_open(self):
        mine, other = OwnerKey(), OwnerKey()
        sealed = seal_location((1.0, 2.0), 5, mine.public)
        with pytest.raises(PermissionError):
            open_location(sealed, other)

    def test_sealed_value_carries_no_payload(self):
        sealed = seal_location((1.0, 2.0), 5, OwnerKey().public)
        public = {name for name in vars(SealedLocation).get("__dataclass_fields__", {})}
        assert public == {"key_id", "_token"}
        assert (1.0, 2.0) not in vars(sealed).values()

    def test_public_key_has_no_open(self):
        key = OwnerKey()
        assert not hasattr(key.public, "open")
        assert not any(name.startswith("open") or name == "_open" for name in dir(key.public))
