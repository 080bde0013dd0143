"""Dataset loading and preprocessing.

Readers for the MovieLens and Goodbooks delimited formats, the minimum
interaction-count user filter, and the per-user temporal train/test split.
Interactions are stored column-oriented (numpy) so the 20M-row datasets fit
in a sane footprint; the per-user index orders each user's rows by ascending
timestamp with file order breaking ties. Goodbooks carries no timestamps, so
file order stands in as the pseudo-temporal order there.
"""

from __future__ import annotations

import csv
import io
import math
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

MOVIELENS = "movielens"
GOODBOOKS = "goodbooks"
FORMATS = (MOVIELENS, GOODBOOKS)

# rating scale per format, inclusive
_RATING_RANGE = {MOVIELENS: (0.5, 5.0), GOODBOOKS: (1.0, 5.0)}


class ParseError(ValueError):
    """Malformed input row; `row` is the 1-based line number (header = 1)."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


@dataclass(frozen=True)
class Interaction:
    """One (user, item, rating, timestamp) event."""

    user_id: int
    item_id: int
    rating: float
    timestamp: int | None = None


class InteractionSet:
    """Immutable set of interactions with a per-user temporal index.

    Rows keep their source (file) order; `user_positions` returns each
    user's row positions sorted by ascending timestamp, stable on ties.
    Missing timestamps sort as 0, so an all-timestampless set keeps file
    order per user.
    """

    def __init__(self, user_ids: np.ndarray, item_ids: np.ndarray,
                 ratings: np.ndarray, timestamps: np.ndarray | None):
        n = len(user_ids)
        if not (len(item_ids) == len(ratings) == n) or (
                timestamps is not None and len(timestamps) != n):
            raise ValueError("column arrays must have equal length")
        self.user_ids = user_ids
        self.item_ids = item_ids
        self.ratings = ratings
        self.timestamps = timestamps  # int64 array or None (absent)
        self._per_user = self._build_index()

    @classmethod
    def from_rows(cls, rows: Iterable[Interaction]) -> "InteractionSet":
        rows = list(rows)
        users = np.fromiter((r.user_id for r in rows), dtype=np.int64, count=len(rows))
        items = np.fromiter((r.item_id for r in rows), dtype=np.int64, count=len(rows))
        ratings = np.fromiter((r.rating for r in rows), dtype=np.float64, count=len(rows))
        if any(r.timestamp is not None for r in rows):
            ts = np.fromiter(
                (r.timestamp if r.timestamp is not None else 0 for r in rows),
                dtype=np.int64, count=len(rows))
        else:
            ts = None
        return cls(users, items, ratings, ts)

    def _build_index(self) -> dict[int, np.ndarray]:
        n = len(self.user_ids)
        ts_key = self.timestamps if self.timestamps is not None else np.zeros(n, dtype=np.int64)
        # lexsort is stable; last key is primary. Row position breaks ties.
        order = np.lexsort((np.arange(n), ts_key, self.user_ids))
        sorted_users = self.user_ids[order]
        index: dict[int, np.ndarray] = {}
        if n == 0:
            return index
        bounds = np.flatnonzero(np.diff(sorted_users)) + 1
        for chunk in np.split(order, bounds):
            index[int(self.user_ids[chunk[0]])] = chunk
        return index

    def __len__(self) -> int:
        return len(self.user_ids)

    def users(self) -> list[int]:
        """Distinct user ids, ascending."""
        return sorted(self._per_user)

    def user_positions(self, user_id: int) -> np.ndarray:
        """Row positions of one user's interactions, temporal order."""
        return self._per_user[user_id]

    def user_interactions(self, user_id: int) -> list[Interaction]:
        return [self.row(int(p)) for p in self._per_user[user_id]]

    def row(self, pos: int) -> Interaction:
        ts = int(self.timestamps[pos]) if self.timestamps is not None else None
        return Interaction(int(self.user_ids[pos]), int(self.item_ids[pos]),
                           float(self.ratings[pos]), ts)

    def iter_rows(self) -> Iterator[Interaction]:
        return (self.row(i) for i in range(len(self)))

    def item_id_set(self) -> set[int]:
        return {int(i) for i in np.unique(self.item_ids)}

    def take(self, positions: Sequence[int]) -> "InteractionSet":
        """Subset by row positions, preserving file order."""
        pos = np.sort(np.asarray(positions, dtype=np.int64))
        ts = self.timestamps[pos] if self.timestamps is not None else None
        return InteractionSet(self.user_ids[pos], self.item_ids[pos],
                              self.ratings[pos], ts)


@dataclass(frozen=True)
class SplitPair:
    """Per-user temporal train/test split."""

    train: InteractionSet
    test: InteractionSet
    ratio: float


def _open_source(source) -> tuple[IO[str], bool]:
    """Accepts a path, '-' (stdin), or an open text stream."""
    if isinstance(source, (str, Path)):
        if str(source) == "-":
            return sys.stdin, False
        return open(source, "r", encoding="utf-8", newline=""), True
    return source, False


def _parse_int(text: str, what: str, row: int) -> int:
    try:
        value = int(text)
    except ValueError:
        raise ParseError(f"unparsable {what} {text!r}", row) from None
    if value < 0:
        raise ParseError(f"negative {what} {value}", row)
    return value


def parse_interactions(source, fmt: str) -> InteractionSet:
    """Parse a ratings file into an InteractionSet.

    `fmt` is 'movielens' (userId,movieId,rating,timestamp) or 'goodbooks'
    (user_id,book_id,rating; no timestamp column). The header row is
    required and skipped. Malformed rows raise ParseError with the 1-based
    line number.
    """
    if fmt not in FORMATS:
        raise ValueError(f"unknown dataset format {fmt!r} (expected one of {FORMATS})")
    has_ts = fmt == MOVIELENS
    ncols = 4 if has_ts else 3
    lo, hi = _RATING_RANGE[fmt]

    users: list[int] = []
    items: list[int] = []
    ratings: list[float] = []
    stamps: list[int] = []

    fh, owned = _open_source(source)
    try:
        reader = csv.reader(fh)
        for lineno, fields in enumerate(reader, start=1):
            if lineno == 1:
                continue  # header
            if not fields:
                continue  # blank line
            if len(fields) != ncols:
                raise ParseError(f"expected {ncols} columns, got {len(fields)}", lineno)
            users.append(_parse_int(fields[0], "user id", lineno))
            items.append(_parse_int(fields[1], "item id", lineno))
            try:
                rating = float(fields[2])
            except ValueError:
                raise ParseError(f"unparsable rating {fields[2]!r}", lineno) from None
            if not (lo <= rating <= hi):
                raise ParseError(f"rating {rating} outside [{lo}, {hi}]", lineno)
            ratings.append(rating)
            if has_ts:
                stamps.append(_parse_int(fields[3], "timestamp", lineno))
    finally:
        if owned:
            fh.close()

    n = len(users)
    return InteractionSet(
        np.asarray(users, dtype=np.int64).reshape(n),
        np.asarray(items, dtype=np.int64).reshape(n),
        np.asarray(ratings, dtype=np.float64).reshape(n),
        np.asarray(stamps, dtype=np.int64).reshape(n) if has_ts else None,
    )


def parse_catalog(source, fmt: str) -> dict[int, str]:
    """Parse an item-metadata file into {item_id: title}.

    MovieLens movies.csv (movieId,title,genres; titles may contain quoted
    commas) or Goodbooks books.csv (columns located by header name; only
    book_id and title are consumed).
    """
    if fmt not in FORMATS:
        raise ValueError(f"unknown dataset format {fmt!r} (expected one of {FORMATS})")
    titles: dict[int, str] = {}
    fh, owned = _open_source(source)
    try:
        reader = csv.reader(fh)
        id_col, title_col = 0, 1
        for lineno, fields in enumerate(reader, start=1):
            if lineno == 1:
                if fmt == GOODBOOKS:
                    try:
                        id_col = fields.index("book_id")
                        title_col = fields.index("title")
                    except ValueError:
                        raise ParseError("header lacks book_id/title columns", 1) from None
                continue
            if not fields:
                continue
            if len(fields) <= max(id_col, title_col):
                raise ParseError(f"expected at least {max(id_col, title_col) + 1} columns", lineno)
            item = _parse_int(fields[id_col], "item id", lineno)
            titles[item] = fields[title_col]
    finally:
        if owned:
            fh.close()
    return titles


def filter_min_interactions(iset: InteractionSet, min_count: int) -> InteractionSet:
    """Keep exactly the users with at least `min_count` interactions."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    keep = [u for u in iset._per_user if len(iset._per_user[u]) >= min_count]
    if len(keep) == len(iset._per_user):
        return iset
    mask = np.isin(iset.user_ids, np.asarray(keep, dtype=np.int64))
    return iset.take(np.flatnonzero(mask))


def temporal_split(iset: InteractionSet, train_ratio: float,
                   min_per_user: int = 2) -> SplitPair:
    """Split each user's timeline: first ceil(n * train_ratio) rows to train.

    The boundary is computed with exact rational arithmetic so e.g. a 0.3
    ratio on 10 rows yields ceil(3) = 3, not a float artifact. Users with
    fewer than `min_per_user` interactions raise ValueError (with the
    default of 2, train and test could not otherwise both be nonempty).
    """
    if not (0.0 < train_ratio < 1.0):
        raise ValueError(f"train_ratio must be in (0, 1), got {train_ratio}")
    frac = Fraction(str(train_ratio))
    train_pos: list[np.ndarray] = []
    test_pos: list[np.ndarray] = []
    for user, positions in iset._per_user.items():
        n = len(positions)
        if n < min_per_user:
            raise ValueError(
                f"user {user} has {n} interaction(s); needs at least {min_per_user} to split")
        n_train = math.ceil(frac * n)
        train_pos.append(positions[:n_train])
        test_pos.append(positions[n_train:])
    train = iset.take(np.concatenate(train_pos) if train_pos else np.empty(0, dtype=np.int64))
    test = iset.take(np.concatenate(test_pos) if test_pos else np.empty(0, dtype=np.int64))
    return SplitPair(train=train, test=test, ratio=train_ratio)
