import math

import numpy as np
import pytest

from latorbit.lattice import (
    BudgetExceededError,
    LatticeElement,
    SubgroupSpec,
    count_norm_ball,
    enumerate_lattice,
    iter_element_blocks,
    norm_sq_threshold,
    read_element_dump,
    write_element_dump,
)

from brute_force import brute_elements


def collect(n, T, **kw):
    blocks = list(iter_element_blocks(n, T, **kw))
    if not blocks:
        return np.empty((0, n * n), dtype=np.int64)
    return np.concatenate(blocks, axis=0)


class TestThreshold:
    @pytest.mark.parametrize(
        "T,expected",
        [
            (1.5, 2),
            (2.0, 3),
            (6.0, 35),
            (1.0, 0),
            (12.0, 143),
            (math.sqrt(2), 2),
        ],
    )
    def test_values(self, T, expected):
        assert norm_sq_threshold(T) == expected

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            norm_sq_threshold(0.0)
        with pytest.raises(ValueError):
            norm_sq_threshold(math.inf)


class TestFrozenCounts:
    """Counts pinned by hand-checkable small cases."""

    def test_n2_tiny(self):
        # norm^2 <= 2: only the identity, its negative, and the two
        # rotation-like matrices with off-diagonal +-1
        elems = collect(2, 1.5)
        assert elems.shape[0] == 4
        expected = {
            (1, 0, 0, 1),
            (-1, 0, 0, -1),
            (0, 1, -1, 0),
            (0, -1, 1, 0),
        }
        assert set(map(tuple, elems)) == expected

    def test_n2_radius_two(self):
        assert count_norm_ball(2, 2.0) == 20

    def test_n3_signed_permutations(self):
        # norm^2 <= 3 forces one +-1 per row/column; det 1 keeps half
        assert count_norm_ball(3, 1.8) == 24

    def test_congruence_level_two(self):
        elems = collect(2, 2.0, subgroup=SubgroupSpec.congruence(2))
        assert elems.shape[0] == 2
        assert set(map(tuple, elems)) == {(1, 0, 0, 1), (-1, 0, 0, -1)}

    def test_below_minimum_norm(self):
        assert count_norm_ball(2, 1.2) == 0
        assert count_norm_ball(3, 1.5) == 0


class TestAgainstBruteForce:
    @pytest.mark.parametrize("T", [1.5, 2.0, 2.5, 3.0, 4.2, 5.0, 6.0])
    def test_n2_exact_sets(self, T):
        expected = brute_elements(2, T)
        got = sorted(map(tuple, collect(2, T)))
        assert got == expected

    @pytest.mark.parametrize("T", [1.8, 2.0, 2.3])
    def test_n3_exact_sets(self, T):
        expected = brute_elements(3, T)
        got = sorted(map(tuple, collect(3, T)))
        assert got == expected

    def test_n4_exact_sets(self):
        expected = brute_elements(4, 2.1)
        got = sorted(map(tuple, collect(4, 2.1)))
        assert got == expected

    @pytest.mark.parametrize("q,T", [(2, 3.0), (3, 4.2)])
    def test_congruence_against_brute(self, q, T):
        expected = brute_elements(2, T, q=q)
        got = sorted(map(tuple, collect(2, T, subgroup=SubgroupSpec.congruence(q))))
        assert got == expected


class TestFastVsGeneric:
    def test_n2_moderate(self):
        fast = collect(2, 20.0)
        slow = collect(2, 20.0, force_generic=True)
        assert fast.shape == slow.shape
        assert np.array_equal(fast, slow)

    def test_n3_moderate(self):
        fast = collect(3, 5.0)
        slow = collect(3, 5.0, force_generic=True)
        assert fast.shape == slow.shape
        assert np.array_equal(fast, slow)


class TestOrderingAndStreaming:
    def test_lexicographic(self):
        elems = collect(2, 6.0)
        tuples = list(map(tuple, elems))
        assert tuples == sorted(tuples)
        elems3 = collect(3, 3.0)
        tuples3 = list(map(tuple, elems3))
        assert tuples3 == sorted(tuples3)

    def test_parallel_matches_serial(self):
        serial = collect(2, 30.0)
        par = collect(2, 30.0, threads=3)
        assert np.array_equal(serial, par)

    def test_count_matches_stream(self):
        n_stream = sum(b.shape[0] for b in iter_element_blocks(2, 15.0))
        assert count_norm_ball(2, 15.0) == n_stream

    def test_monotone_in_radius(self):
        counts = [count_norm_ball(2, T) for T in (2.0, 3.0, 5.0, 8.0, 13.0)]
        assert all(a <= b for a, b in zip(counts, counts[1:]))

    def test_growth_rate_n2(self):
        # leading-order count is proportional to T^2; the ratio at T=40
        # should sit near its T=25 value
        c1 = count_norm_ball(2, 25.0) / 25.0**2
        c2 = count_norm_ball(2, 40.0) / 40.0**2
        assert abs(c1 - c2) / c2 < 0.1

    @pytest.mark.parametrize("threads", [1, 3])
    def test_blocks_stay_bounded(self, threads):
        # completions per first row explode with the radius at n=3; the
        # adaptive batching must keep single blocks far below the whole
        # two-million-element ball so memory stays flat
        from latorbit.lattice import _BLOCK_TARGET

        sizes = [b.shape[0] for b in iter_element_blocks(3, 8.0, threads=threads)]
        assert sum(sizes) == count_norm_ball(3, 8.0)
        assert len(sizes) >= 3
        assert max(sizes) <= 8 * _BLOCK_TARGET


class TestBudget:
    def test_budget_enforced(self):
        with pytest.raises(BudgetExceededError):
            list(iter_element_blocks(2, 10.0, max_elements=50))

    def test_budget_roomy_ok(self):
        assert count_norm_ball(2, 10.0, max_elements=10**6) > 0


class TestElements:
    def test_all_det_one(self):
        for el in enumerate_lattice(2, 4.0):
            assert isinstance(el, LatticeElement)
            m = el.mat
            assert m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0] == 1

    def test_det_validation(self):
        with pytest.raises(ValueError):
            LatticeElement(np.array([[1, 0], [0, 2]]))
        with pytest.raises(ValueError):
            LatticeElement(np.array([[1.0, 0.0], [0.0, 1.0]]))

    def test_norm_sq(self):
        el = LatticeElement(np.array([[2, 1], [1, 1]]))
        assert el.norm_sq() == 7


class TestSubgroupSpec:
    def test_full(self):
        s = SubgroupSpec.full()
        assert s.kind == "full" and s.q == 1

    def test_modulus_one_is_full(self):
        assert SubgroupSpec.from_modulus(1) == SubgroupSpec.full()
        assert SubgroupSpec.from_modulus(3) == SubgroupSpec.congruence(3)

    def test_invalid(self):
        with pytest.raises(ValueError):
            SubgroupSpec(kind="borel")
        with pytest.raises(ValueError):
            SubgroupSpec.congruence(1)
        with pytest.raises(ValueError):
            SubgroupSpec(kind="full", q=5)


class TestDump:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "elements.txt"
        blocks = list(iter_element_blocks(2, 4.0))
        nlines = write_element_dump(path, iter(blocks))
        data = read_element_dump(path, 2)
        assert data.shape[0] == nlines
        assert np.array_equal(data, np.concatenate(blocks, axis=0))

    def test_read_rejects_ragged(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("1 0 0 1\n1 0 0\n")
        with pytest.raises(ValueError):
            read_element_dump(path, 2)
