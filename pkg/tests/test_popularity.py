from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poplens.ingest import Interaction, InteractionSet
from poplens.popularity import (GROUP_NICHE, GROUP_POPULAR, classify_items,
                                classify_users, compute_item_stats,
                                group_counts, write_partition, write_segments)


def iset(pairs):
    return InteractionSet.from_rows(
        [Interaction(u, i, 3.0, ts) for ts, (u, i) in enumerate(pairs)])


class TestItemStats:
    def test_direct_count(self):
        stats = compute_item_stats(iset([(1, 10), (2, 10), (1, 11)]), {10, 11, 12})
        assert stats.counts == {10: 2, 11: 1, 12: 0}
        assert stats.total_items == 3

    def test_empty_train(self):
        stats = compute_item_stats(InteractionSet.from_rows([]), {1, 2, 3, 4, 5})
        assert all(c == 0 for c in stats.counts.values())
        assert stats.total_items == 5

    def test_item_outside_catalog_named(self):
        with pytest.raises(ValueError, match="99"):
            compute_item_stats(iset([(1, 99)]), {1, 2})

    def test_zipf_draws_match_independent_tally(self):
        rng = np.random.default_rng(11)
        n_items = 100
        ranks = np.arange(1, n_items + 1, dtype=float)
        probs = (1.0 / ranks) / (1.0 / ranks).sum()
        draws = rng.choice(n_items, size=10_000, p=probs)
        train = iset([(u % 37, int(item)) for u, item in enumerate(draws)])
        stats = compute_item_stats(train, set(range(n_items)))
        oracle = Counter(int(i) for i in draws)  # independent tally
        for item in range(n_items):
            assert stats.counts[item] == oracle.get(item, 0)


class TestClassifyItems:
    def test_top_20_percent_by_count(self):
        # 10 items with distinct counts: item i consumed i+1 times
        rows = [(u, i) for i in range(10) for u in range(i + 1)]
        stats = compute_item_stats(iset(rows), set(range(10)))
        part = classify_items(stats, 0.2)
        assert part.popular == {8, 9}
        assert part.niche == set(range(8))

    def test_full_tie_resolved_by_ascending_id(self):
        stats = compute_item_stats(InteractionSet.from_rows([]), set(range(10)))
        part = classify_items(stats, 0.2)
        assert part.popular == {0, 1}

    def test_zipf_catalog_popular_sum_dominates(self):
        rng = np.random.default_rng(3)
        n_items = 1000
        ranks = np.arange(1, n_items + 1, dtype=float)
        probs = (1.0 / ranks) / (1.0 / ranks).sum()
        draws = rng.choice(n_items, size=50_000, p=probs)
        train = iset([(u % 101, int(item)) for u, item in enumerate(draws)])
        stats = compute_item_stats(train, set(range(n_items)))
        part = classify_items(stats, 0.2)
        assert len(part.popular) == 200
        # sort-based oracle: no other 200-item subset can out-count it
        ordered = sorted(stats.counts.values(), reverse=True)
        best_possible = sum(ordered[:200])
        assert sum(stats.counts[i] for i in part.popular) == best_possible

    def test_degenerate_catalog(self):
        stats = compute_item_stats(InteractionSet.from_rows([]), {1})
        with pytest.raises(ValueError):
            classify_items(stats, 0.2)

    def test_fraction_range(self):
        stats = compute_item_stats(InteractionSet.from_rows([]), {1, 2, 3})
        for bad in (0.0, 1.0, -1.0):
            with pytest.raises(ValueError):
                classify_items(stats, bad)

    def test_minimum_one_popular(self):
        stats = compute_item_stats(InteractionSet.from_rows([]), {1, 2, 3})
        assert len(classify_items(stats, 0.05).popular) == 1

    def test_partition_is_disjoint_and_exhaustive(self):
        catalog = set(range(17))
        stats = compute_item_stats(iset([(1, 3), (1, 3), (2, 5)]), catalog)
        part = classify_items(stats, 0.3)
        assert part.popular | part.niche == catalog
        assert not (part.popular & part.niche)

    def test_count_dominance_without_ties(self):
        rows = [(u, i) for i in range(8) for u in range(2 * i + 1)]
        stats = compute_item_stats(iset(rows), set(range(8)))
        part = classify_items(stats, 0.25)
        min_pop = min(stats.counts[i] for i in part.popular)
        max_niche = max(stats.counts[i] for i in part.niche)
        assert min_pop > max_niche


def six_four_user():
    # user 1: six interactions on item 0 (popular), four on items 1..4 (niche)
    rows = [(1, 0)] * 6 + [(1, 1), (1, 2), (1, 3), (1, 4)]
    # filler users give item 0 the top count
    rows += [(2, 0), (3, 0)]
    train = iset(rows)
    stats = compute_item_stats(train, set(range(5)))
    part = classify_items(stats, 0.2)
    assert part.popular == {0}
    return train, part


class TestClassifyUsers:
    def test_sixty_percent_is_p_at_half(self):
        train, part = six_four_user()
        seg = classify_users(train, part, 0.5)
        assert seg.ratios[1] == pytest.approx(0.6)
        assert seg.groups[1] == GROUP_POPULAR

    def test_zero_popular_is_n(self):
        rows = [(1, 0), (1, 0), (2, 1), (2, 2)]
        train = iset(rows)
        part = classify_items(compute_item_stats(train, {0, 1, 2, 3}), 0.25)
        seg = classify_users(train, part, 0.5)
        assert seg.ratios[2] == 0.0
        assert seg.groups[2] == GROUP_NICHE

    def test_boundary_is_inclusive(self):
        # exactly at the threshold classifies as P ("at least")
        rows = [(1, 0)] * 8 + [(1, 1), (1, 2)] + [(2, 0), (3, 0)]
        train = iset(rows)
        part = classify_items(compute_item_stats(train, {0, 1, 2, 3, 4}), 0.2)
        seg = classify_users(train, part, 0.8)
        assert seg.ratios[1] == pytest.approx(0.8)
        assert seg.groups[1] == GROUP_POPULAR

    def test_threshold_monotonicity(self):
        train, part = six_four_user()
        was_p = None
        for threshold in (0.1, 0.3, 0.5, 0.7, 0.9):
            seg = classify_users(train, part, threshold)
            is_p = seg.groups[1] == GROUP_POPULAR
            if was_p is not None:
                assert not (is_p and not was_p)  # raising t never flips N -> P
            was_p = is_p

    def test_uses_training_set_only(self):
        train, part = six_four_user()
        seg = classify_users(train, part, 0.5)
        # a different "test set" cannot matter: the API never sees one
        again = classify_users(train, part, 0.5)
        assert seg == again


@given(threshold=st.floats(0.05, 0.95),
       rows=st.lists(st.tuples(st.integers(1, 6), st.integers(0, 9)),
                     min_size=1, max_size=50))
@settings(max_examples=60, deadline=None)
def test_groups_match_ratio_rule(threshold, rows):
    train = iset(rows)
    part = classify_items(compute_item_stats(train, set(range(10))), 0.2)
    seg = classify_users(train, part, threshold)
    for user, ratio in seg.ratios.items():
        assert 0.0 <= ratio <= 1.0
        expected = GROUP_POPULAR if ratio >= threshold else GROUP_NICHE
        assert seg.groups[user] == expected


def test_export_round_trip(tmp_path):
    train, part = six_four_user()
    seg = classify_users(train, part, 0.5)
    with open(tmp_path / "partition.csv", "w") as fh:
        write_partition(part, fh)
    with open(tmp_path / "segments.csv", "w") as fh:
        write_segments(seg, fh)
    lines = (tmp_path / "partition.csv").read_text().splitlines()
    assert lines[0] == "item_id,class"
    assert len(lines) == 1 + 5
    assert "0,P" in lines
    seg_lines = (tmp_path / "segments.csv").read_text().splitlines()
    assert seg_lines[0] == "user_id,ratio,group"
    assert "1,0.600000,P" in seg_lines
    assert group_counts(seg) == {"P": 3, "N": 0}
