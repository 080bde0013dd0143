"""Pure-Python edit-distance kernel.

Fallback used when the compiled extension (_editdist) is unavailable.
Both implementations must stay behaviourally identical; tests compare them
on random inputs.
"""

from __future__ import annotations

from typing import Sequence


def levenshtein(a: str, b: str, limit: int | None = None) -> int:
    """Levenshtein distance between two strings.

    When `limit` is given, gives up as soon as the distance provably exceeds
    it and returns `limit + 1`. This keeps catalog scans cheap for
    candidates that cannot reach the similarity threshold.
    """
    la, lb = len(a), len(b)
    if la < lb:
        a, b, la, lb = b, a, lb, la
    if lb == 0:
        if limit is not None and la > limit:
            return limit + 1
        return la
    if limit is not None and la - lb > limit:
        return limit + 1

    prev = list(range(lb + 1))
    cur = [0] * (lb + 1)
    for i in range(1, la + 1):
        cur[0] = i
        ca = a[i - 1]
        row_min = cur[0]
        for j in range(1, lb + 1):
            cost = 0 if ca == b[j - 1] else 1
            c = prev[j - 1] + cost
            d = prev[j] + 1
            if d < c:
                c = d
            e = cur[j - 1] + 1
            if e < c:
                c = e
            cur[j] = c
            if c < row_min:
                row_min = c
        if limit is not None and row_min > limit:
            return limit + 1
        prev, cur = cur, prev
    return prev[lb]


def similarity(a: str, b: str) -> float:
    """Normalized edit similarity: 1 - distance / max(len); 1.0 for two empties."""
    m = max(len(a), len(b))
    if m == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / m


def best_match(query: str, candidates: Sequence[str], min_score: float) -> tuple[int, float]:
    """Scan `candidates` for the best similarity to `query`.

    Returns (index, score) of the first candidate attaining the highest
    score >= min_score, or (-1, 0.0) if none qualifies. Later candidates
    replace the current best only on a strictly greater score, so ties keep
    the earliest index.
    """
    n = len(query)
    best_idx = -1
    best_score = 0.0
    for idx, cand in enumerate(candidates):
        m = max(n, len(cand))
        if m == 0:
            # Both empty: perfect score; ties keep the earliest.
            if best_score < 1.0:
                best_idx, best_score = idx, 1.0
            continue
        # Length difference lower-bounds the distance, upper-bounding the score.
        upper = 1.0 - abs(n - len(cand)) / m
        if best_idx >= 0:
            if upper <= best_score:
                continue
            needed = best_score
        else:
            if upper < min_score:
                continue
            needed = min_score
        limit = int((1.0 - needed) * m) + 1  # loose bound; exact check below
        dist = levenshtein(query, cand, limit)
        score = 1.0 - dist / m
        if score >= min_score and score > best_score:
            best_idx, best_score = idx, score
    if best_idx < 0:
        return -1, 0.0
    return best_idx, best_score
