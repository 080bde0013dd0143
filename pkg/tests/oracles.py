"""Independent brute-force reference implementations.

These deliberately share no code with the package: metrics are computed
with explicit loops over plain data (lists of matched item ids with None
for unmatched slots), and edit distance uses full-matrix DP. Tests compare
package outputs against these on small random instances.
"""

from __future__ import annotations

import math


def lev_brute(a: str, b: str) -> int:
    """Full-matrix Levenshtein, no shortcuts."""
    n, m = len(a), len(b)
    d = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        d[i][0] = i
    for j in range(m + 1):
        d[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            d[i][j] = min(d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost)
    return d[n][m]


def ltc_brute(lists: dict[int, list[int | None]], niche: set[int]) -> float:
    covered = set()
    for slots in lists.values():
        for item in slots:
            if item is not None and item in niche:
                covered.add(item)
    return len(covered) / len(niche)


def kl_brute(p, q) -> float:
    total = 0.0
    for pi, qi in zip(p, q):
        if pi > 0.0:
            total += pi * math.log(pi / qi)
    return total


def hellinger_brute(p, q) -> float:
    total = 0.0
    for pi, qi in zip(p, q):
        total += (math.sqrt(pi) - math.sqrt(qi)) ** 2
    return math.sqrt(total) / math.sqrt(2.0)


def chisq_brute(p, q) -> float:
    total = 0.0
    for pi, qi in zip(p, q):
        total += (pi - qi) ** 2 / qi
    return total


_DIV_BRUTE = {"kl": kl_brute, "hellinger": hellinger_brute, "chisq": chisq_brute}


def smooth_brute(dist, alpha):
    return tuple((1.0 - alpha) * x + alpha * (1.0 / len(dist)) for x in dist)


def mc_brute(target, prefix: list[int | None], popular: set[int],
             kind: str, alpha: float) -> float:
    matched = [item for item in prefix if item is not None]
    if not matched:
        return 1.0
    pop = sum(1 for item in matched if item in popular)
    q = (pop / len(matched), (len(matched) - pop) / len(matched))
    fn = _DIV_BRUTE[kind]
    p_s = smooth_brute(target, alpha)
    q_s = smooth_brute(q, alpha)
    worst = max(fn(p_s, smooth_brute((1.0, 0.0), alpha)),
                fn(p_s, smooth_brute((0.0, 1.0), alpha)))
    if worst == 0.0:
        return 0.0
    value = fn(p_s, q_s) / worst
    return min(1.0, max(0.0, value))


def rmc_brute(target, slots: list[int | None], popular: set[int],
              kind: str, alpha: float, depth: int) -> float:
    total = 0.0
    for k in range(1, depth + 1):
        total += mc_brute(target, slots[:k], popular, kind, alpha)
    return total / depth


def mrmc_brute(lists: dict[int, list[int | None]], targets: dict[int, tuple],
               popular: set[int], kind: str, alpha: float, depth: int) -> float:
    total = 0.0
    for user, slots in lists.items():
        total += rmc_brute(targets[user], slots, popular, kind, alpha, depth)
    return total / len(lists)


def mrr_brute(lists: dict[int, list[int | None]],
              relevance: dict[int, set[int]], k: int) -> float:
    total = 0.0
    included = 0
    for user, slots in lists.items():
        relevant = relevance.get(user, set())
        if not relevant:
            continue
        included += 1
        for rank in range(1, min(k, len(slots)) + 1):
            item = slots[rank - 1]
            if item is not None and item in relevant:
                total += 1.0 / rank
                break
    return total / included if included else 0.0


def prf_brute(lists: dict[int, list[int | None]],
              relevance: dict[int, set[int]], k: int):
    """Mean (precision@k, recall@k, f1@k) over users with relevant items."""
    p_total = r_total = f_total = 0.0
    included = 0
    for user, slots in lists.items():
        relevant = relevance.get(user, set())
        if not relevant:
            continue
        included += 1
        top = {item for item in slots[:k] if item is not None}
        hits = len(top & relevant)
        precision = hits / k
        recall = hits / len(relevant)
        f1 = 0.0
        if precision + recall > 0:
            f1 = 2 * precision * recall / (precision + recall)
        p_total += precision
        r_total += recall
        f_total += f1
    if included == 0:
        return 0.0, 0.0, 0.0
    return p_total / included, r_total / included, f_total / included
