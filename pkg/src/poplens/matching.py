"""Free-text title resolution against the item catalog.

Titles are normalized (unicode folding, year stripping, article handling),
looked up exactly, then fuzzily via normalized edit similarity with a
configurable threshold. Out-of-catalog titles stay in their rank slot as
unmatched so cutoff metrics reflect what the model actually emitted.
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass, field
from typing import IO, Mapping

from poplens import editdist
from poplens.prompts import Strategy
from poplens.providers import RawRecommendation

_YEAR_RE = re.compile(r"\s*\((\d{4})\)\s*$")
# MovieLens-style trailing article: "Matrix, The" -> "The Matrix"
_TRAILING_ARTICLE_RE = re.compile(r"^(?P<body>.*\S)\s*,\s*(?P<article>the|a|an)$")
_ARTICLES = ("the", "a", "an")
_NON_ALNUM_RE = re.compile(r"[^0-9a-z\s]", re.UNICODE)


def extract_year(title: str) -> int | None:
    """Trailing parenthetical 4-digit year, if any."""
    m = _YEAR_RE.search(title)
    return int(m.group(1)) if m else None


def normalize_title(title: str) -> str:
    """Canonical form used for catalog keys and similarity scoring.

    Steps: NFKD fold + combining-mark removal, casefold, strip one trailing
    parenthetical year, relocate a trailing ", the/a/an" to the front,
    punctuation to spaces, whitespace collapse, then drop leading articles
    (repeatedly, always keeping at least one token). Idempotent.
    """
    s = unicodedata.normalize("NFKD", title)
    s = "".join(ch for ch in s if not unicodedata.combining(ch))
    s = s.casefold()
    s = _YEAR_RE.sub("", s)
    s = s.strip()
    m = _TRAILING_ARTICLE_RE.match(s)
    if m:
        s = f"{m.group('article')} {m.group('body')}"
    s = _NON_ALNUM_RE.sub(" ", s)
    tokens = s.split()
    while len(tokens) > 1 and tokens[0] in _ARTICLES:
        tokens.pop(0)
    return " ".join(tokens)


@dataclass
class CatalogIndex:
    """Normalized-title lookup structures over one catalog.

    `exact` maps each normalized title to the lowest item id carrying it;
    `entries` holds every item exactly once (ascending id) for the fuzzy
    scan; `collisions` lists normalized titles shared by several items.
    """

    exact: dict[str, int]
    entries: list[tuple[str, int]]
    by_norm: dict[str, list[int]]
    year_of: dict[int, int | None]
    collisions: list[str]

    _entry_strings: list[str] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not self._entry_strings:
            self._entry_strings = [title for title, _ in self.entries]


@dataclass(frozen=True)
class MatchSlot:
    """Outcome for one rank position of a recommendation list."""

    raw_title: str
    item_id: int | None = None
    kind: str | None = None  # "exact" | "fuzzy" for matched slots
    score: float = 0.0
    duplicate: bool = False

    @property
    def matched(self) -> bool:
        return self.item_id is not None

    def outcome(self) -> str:
        if self.matched:
            return self.kind or "exact"
        return "duplicate" if self.duplicate else "unmatched"


@dataclass(frozen=True)
class MatchedList:
    """A recommendation list after title resolution, slot order preserved."""

    user_id: int
    strategy: Strategy
    slots: tuple[MatchSlot, ...]

    def matched_ids(self) -> list[int]:
        return [s.item_id for s in self.slots if s.item_id is not None]


def build_index(catalog: Mapping[int, str]) -> CatalogIndex:
    """Index a catalog of {item_id: title} for exact and fuzzy lookup."""
    by_norm: dict[str, list[int]] = {}
    entries: list[tuple[str, int]] = []
    year_of: dict[int, int | None] = {}
    for item_id in sorted(catalog):
        title = catalog[item_id]
        norm = normalize_title(title)
        entries.append((norm, item_id))
        by_norm.setdefault(norm, []).append(item_id)
        year_of[item_id] = extract_year(title)
    exact = {norm: ids[0] for norm, ids in by_norm.items()}
    collisions = sorted(norm for norm, ids in by_norm.items() if len(ids) > 1)
    return CatalogIndex(exact=exact, entries=entries, by_norm=by_norm,
                        year_of=year_of, collisions=collisions)


def _resolve_exact(index: CatalogIndex, norm: str, year: int | None) -> int:
    """Pick among items sharing a normalized title.

    A year on the recommendation disambiguates (plus or minus one) before
    the lowest-id collision rule applies.
    """
    ids = index.by_norm[norm]
    if len(ids) > 1 and year is not None:
        near = [i for i in ids if index.year_of[i] is not None
                and abs(index.year_of[i] - year) <= 1]
        if near:
            return min(near)
    return ids[0]


def match_titles(rec: RawRecommendation, index: CatalogIndex,
                 fuzzy_threshold: float = 0.9) -> MatchedList:
    """Resolve a recommendation's titles to catalog ids.

    Exact normalized hits win outright; otherwise the best fuzzy candidate
    at similarity >= fuzzy_threshold (ties: higher score, then lower item
    id). A resolved id repeating within the list is demoted to an unmatched
    duplicate slot, so no item occupies two ranks.
    """
    if not (0.0 < fuzzy_threshold <= 1.0):
        raise ValueError(f"fuzzy_threshold must be in (0, 1], got {fuzzy_threshold}")
    slots: list[MatchSlot] = []
    seen: set[int] = set()
    for raw in rec.titles:
        norm = normalize_title(raw)
        if not norm:
            slots.append(MatchSlot(raw_title=raw))
            continue
        item_id: int | None = None
        kind = None
        score = 0.0
        if norm in index.by_norm:
            item_id = _resolve_exact(index, norm, extract_year(raw))
            kind, score = "exact", 1.0
        else:
            idx, best = editdist.best_match(norm, index._entry_strings, fuzzy_threshold)
            if idx >= 0:
                item_id = index.entries[idx][1]
                kind, score = "fuzzy", best
        if item_id is None:
            slots.append(MatchSlot(raw_title=raw))
        elif item_id in seen:
            slots.append(MatchSlot(raw_title=raw, duplicate=True))
        else:
            seen.add(item_id)
            slots.append(MatchSlot(raw_title=raw, item_id=item_id, kind=kind, score=score))
    return MatchedList(user_id=rec.user_id, strategy=rec.strategy,
                       slots=tuple(slots))


def write_match_audit(lists, fh: IO[str]) -> None:
    """Line-delimited audit: one JSON record per rank slot."""
    for mlist in lists:
        for rank, slot in enumerate(mlist.slots, start=1):
            fh.write(json.dumps({
                "user_id": mlist.user_id,
                "strategy": mlist.strategy.value,
                "rank": rank,
                "raw_title": slot.raw_title,
                "outcome": slot.outcome(),
                "item_id": slot.item_id,
                "score": round(slot.score, 6),
            }, sort_keys=True) + "\n")
