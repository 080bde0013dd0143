import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poplens.ingest import (GOODBOOKS, MOVIELENS, Interaction, InteractionSet,
                            ParseError, filter_min_interactions, parse_catalog,
                            parse_interactions, temporal_split)


def ml_file(rows):
    return io.StringIO("userId,movieId,rating,timestamp\n" + "".join(r + "\n" for r in rows))


def gb_file(rows):
    return io.StringIO("user_id,book_id,rating\n" + "".join(r + "\n" for r in rows))


class TestParse:
    def test_movielens_row(self):
        iset = parse_interactions(ml_file(["1,296,5.0,1147880044"]), MOVIELENS)
        assert len(iset) == 1
        assert iset.row(0) == Interaction(1, 296, 5.0, 1147880044)

    def test_goodbooks_row_has_no_timestamp(self):
        iset = parse_interactions(gb_file(["314,1,5"]), GOODBOOKS)
        assert iset.row(0) == Interaction(314, 1, 5.0, None)
        assert iset.timestamps is None

    def test_header_only(self):
        iset = parse_interactions(ml_file([]), MOVIELENS)
        assert len(iset) == 0
        assert iset.users() == []

    def test_wrong_column_count_names_row(self):
        with pytest.raises(ParseError) as excinfo:
            parse_interactions(ml_file(["1,296,5.0,1147880044", "1,296"]), MOVIELENS)
        assert excinfo.value.row == 3
        assert "row 3" in str(excinfo.value)

    def test_unparsable_number_names_row(self):
        with pytest.raises(ParseError) as excinfo:
            parse_interactions(ml_file(["1,xyz,5.0,1147880044"]), MOVIELENS)
        assert excinfo.value.row == 2

    def test_negative_id_rejected(self):
        with pytest.raises(ParseError):
            parse_interactions(ml_file(["-1,296,5.0,1147880044"]), MOVIELENS)

    def test_rating_out_of_scale_rejected(self):
        with pytest.raises(ParseError):
            parse_interactions(ml_file(["1,296,9.5,1147880044"]), MOVIELENS)

    def test_unknown_format(self):
        with pytest.raises(ValueError, match="unknown dataset format"):
            parse_interactions(ml_file([]), "netflix")

    def test_rows_keep_file_order(self):
        iset = parse_interactions(
            ml_file(["7,1,3.0,300", "7,2,3.0,100", "7,3,3.0,200"]), MOVIELENS)
        assert [iset.row(i).item_id for i in range(3)] == [1, 2, 3]
        # temporal index sorts by timestamp
        assert [iset.row(int(p)).item_id for p in iset.user_positions(7)] == [2, 3, 1]

    def test_timestamp_ties_stay_stable(self):
        iset = parse_interactions(
            ml_file(["7,1,3.0,100", "7,2,3.0,100", "7,3,3.0,100"]), MOVIELENS)
        assert [iset.row(int(p)).item_id for p in iset.user_positions(7)] == [1, 2, 3]


class TestParseCatalog:
    def test_movielens_quoted_title(self):
        fh = io.StringIO('movieId,title,genres\n296,"Pulp Fiction (1994)",Crime\n'
                         '1,"American President, The (1995)",Comedy|Drama|Romance\n')
        titles = parse_catalog(fh, MOVIELENS)
        assert titles == {296: "Pulp Fiction (1994)",
                          1: "American President, The (1995)"}

    def test_goodbooks_columns_by_header(self):
        fh = io.StringIO("book_id,goodreads_book_id,authors,title\n"
                         "1,2767052,Suzanne Collins,The Hunger Games\n")
        titles = parse_catalog(fh, GOODBOOKS)
        assert titles == {1: "The Hunger Games"}

    def test_goodbooks_missing_title_column(self):
        with pytest.raises(ParseError):
            parse_catalog(io.StringIO("book_id,authors\n1,X\n"), GOODBOOKS)


def synthetic_counts(counts):
    """One user per count in `counts`, with that many interactions."""
    rows = []
    for user, count in enumerate(counts, start=1):
        for step in range(count):
            rows.append(Interaction(user, step, 3.0, step))
    return InteractionSet.from_rows(rows)


class TestFilter:
    def test_threshold_30(self):
        iset = synthetic_counts([30, 29])
        kept = filter_min_interactions(iset, 30)
        assert kept.users() == [1]
        assert len(kept) == 30

    def test_min_one_is_identity(self):
        iset = synthetic_counts([3, 1, 5])
        kept = filter_min_interactions(iset, 1)
        assert len(kept) == len(iset)
        assert kept.users() == iset.users()

    def test_counts_1_to_100(self):
        # independent enumeration: users surviving a >=30 filter
        expected = len([c for c in range(1, 101) if c >= 30])
        assert expected == 71
        iset = synthetic_counts(list(range(1, 101)))
        kept = filter_min_interactions(iset, 30)
        assert len(kept.users()) == expected
        # every surviving user keeps all interactions
        for user in kept.users():
            assert len(kept.user_positions(user)) == user

    def test_idempotent(self):
        iset = synthetic_counts([5, 2, 9, 1])
        once = filter_min_interactions(iset, 3)
        twice = filter_min_interactions(once, 3)
        assert [r for r in twice.iter_rows()] == [r for r in once.iter_rows()]


class TestSplit:
    def test_10_at_70(self):
        iset = synthetic_counts([10])
        pair = temporal_split(iset, 0.7)
        assert len(pair.train) == 7
        assert len(pair.test) == 3

    def test_2_at_50(self):
        iset = synthetic_counts([2])
        pair = temporal_split(iset, 0.5)
        assert len(pair.train) == 1
        assert len(pair.test) == 1

    def test_9_at_70_uses_ceil(self):
        # ceil(9 * 0.7) = ceil(6.3) = 7
        iset = synthetic_counts([9])
        pair = temporal_split(iset, 0.7)
        assert len(pair.train) == 7
        assert len(pair.test) == 2

    def test_float_boundary_is_exact(self):
        # 10 * 0.3 must behave as exactly 3, not 3.0000000000000004
        iset = synthetic_counts([10])
        pair = temporal_split(iset, 0.3)
        assert len(pair.train) == 3

    def test_single_interaction_user_rejected(self):
        iset = synthetic_counts([1, 5])
        with pytest.raises(ValueError, match="user 1"):
            temporal_split(iset, 0.7)

    def test_bad_ratio(self):
        iset = synthetic_counts([5])
        for ratio in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(ValueError):
                temporal_split(iset, ratio)

    def test_train_precedes_test_per_user(self):
        rows = [Interaction(1, i, 3.0, ts) for i, ts in
                enumerate([50, 10, 40, 20, 30])]
        pair = temporal_split(InteractionSet.from_rows(rows), 0.6)
        max_train = max(r.timestamp for r in pair.train.iter_rows())
        min_test = min(r.timestamp for r in pair.test.iter_rows())
        assert max_train <= min_test


interaction_sets = st.lists(
    st.tuples(st.integers(0, 5), st.integers(0, 20), st.integers(0, 1000)),
    min_size=1, max_size=60,
).map(lambda triples: InteractionSet.from_rows(
    [Interaction(u, i, 3.0, ts) for u, i, ts in triples]))


@given(iset=interaction_sets, ratio=st.floats(0.05, 0.95),
       min_count=st.integers(1, 10))
@settings(max_examples=60, deadline=None)
def test_split_properties(iset, ratio, min_count):
    iset = filter_min_interactions(iset, max(min_count, 2))
    if not iset.users():
        return
    pair = temporal_split(iset, ratio)
    # disjoint and jointly exhaustive (as multisets of rows)
    all_rows = sorted((r.user_id, r.item_id, r.timestamp) for r in iset.iter_rows())
    split_rows = sorted((r.user_id, r.item_id, r.timestamp)
                        for part in (pair.train, pair.test)
                        for r in part.iter_rows())
    assert all_rows == split_rows
    for user in iset.users():
        n = len(iset.user_positions(user))
        n_train = len(pair.train.user_positions(user)) if user in pair.train.users() else 0
        # exact ceil rule
        import math
        from fractions import Fraction
        assert n_train == math.ceil(Fraction(str(ratio)) * n)
        # leakage freedom
        if user in pair.train.users() and user in pair.test.users():
            train_ts = [r.timestamp for r in pair.train.user_interactions(user)]
            test_ts = [r.timestamp for r in pair.test.user_interactions(user)]
            assert max(train_ts) <= min(test_ts)
