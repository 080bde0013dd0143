"""Fairness and accuracy metrics over matched recommendation lists.

Item-side fairness is long-tail coverage (LtC): the fraction of all niche
items that any evaluated list surfaced. User-side fairness is the rank
miscalibration stack: MC normalizes a divergence between a target
popularity split and a list prefix's realized split by the worst-case
(single-bin) divergence, RMC averages MC over prefix depths, MRMC averages
RMC over users. Accuracy is MRR@k and precision/recall/F1@k against
test-split relevance.

Distributions are (popular, niche) mass pairs. Unmatched slots occupy rank
positions but contribute no mass; an all-unmatched prefix scores the
worst-case MC of 1.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

from poplens.ingest import InteractionSet
from poplens.matching import MatchedList, MatchSlot
from poplens.popularity import (GROUP_NICHE, GROUP_POPULAR, ItemStats,
                                PopularityPartition, UserSegments)

BinDist = tuple[float, float]  # (popular mass, niche mass)

EMPTY_DIST: BinDist = (0.0, 0.0)


class Divergence(enum.Enum):
    KL = "kl"
    HELLINGER = "hellinger"
    CHI_SQ = "chisq"


def divergence(p: BinDist, q: BinDist, kind: Divergence) -> float:
    """Divergence F(p, q) between two proper bin distributions.

    KL and chi-squared require every q component positive (smooth first);
    a zero p component contributes nothing to KL.
    """
    if kind is Divergence.HELLINGER:
        s = sum((math.sqrt(pi) - math.sqrt(qi)) ** 2 for pi, qi in zip(p, q))
        return math.sqrt(s) / math.sqrt(2.0)
    if any(qi == 0.0 for qi in q):
        raise ValueError(f"{kind.value} divergence needs positive q components; "
                         "apply smoothing first")
    if kind is Divergence.KL:
        return sum(pi * math.log(pi / qi) for pi, qi in zip(p, q) if pi > 0.0)
    if kind is Divergence.CHI_SQ:
        return sum((pi - qi) ** 2 / qi for pi, qi in zip(p, q))
    raise ValueError(f"unknown divergence kind {kind!r}")


def smooth(dist: BinDist, alpha: float) -> BinDist:
    """Mix with the uniform distribution: (1 - alpha) * dist + alpha / 2."""
    return ((1.0 - alpha) * dist[0] + alpha * 0.5,
            (1.0 - alpha) * dist[1] + alpha * 0.5)


def bin_shares(slots: Sequence[MatchSlot], partition: PopularityPartition) -> BinDist:
    """Popularity-bin shares of the matched items in a slot sequence.

    Mass is renormalized over matched slots only; with none, the designated
    empty distribution comes back.
    """
    popular = 0
    niche = 0
    for slot in slots:
        if slot.item_id is None:
            continue
        if slot.item_id in partition.popular:
            popular += 1
        else:
            niche += 1
    total = popular + niche
    if total == 0:
        return EMPTY_DIST
    return popular / total, niche / total


def miscalibration(target: BinDist, prefix: Sequence[MatchSlot],
                   partition: PopularityPartition, kind: Divergence,
                   alpha: float = 0.01) -> float:
    """Normalized miscalibration MC of one list prefix against a target.

    Both the target and the prefix's realized distribution are smoothed
    toward uniform by `alpha`; the normalizer is the worst smoothed
    single-bin point mass, so MC lands in [0, 1]. A prefix with no matched
    items is the void list and scores exactly 1.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    q = bin_shares(prefix, partition)
    if q == EMPTY_DIST:
        return 1.0
    p_s = smooth(target, alpha)
    q_s = smooth(q, alpha)
    worst = max(divergence(p_s, smooth((1.0, 0.0), alpha), kind),
                divergence(p_s, smooth((0.0, 1.0), alpha), kind))
    if worst == 0.0:
        return 0.0
    value = divergence(p_s, q_s, kind) / worst
    return min(1.0, max(0.0, value))


def rmc(target: BinDist, mlist: MatchedList, partition: PopularityPartition,
        kind: Divergence, depth: int, alpha: float = 0.01) -> float:
    """Mean MC over prefixes of length 1..depth.

    Depths beyond the list reuse the full list, so a short list is judged
    at every requested cutoff rather than silently at fewer.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    total = 0.0
    for k in range(1, depth + 1):
        total += miscalibration(target, mlist.slots[:k], partition, kind, alpha)
    return total / depth


def mrmc(lists: Sequence[MatchedList], targets: Mapping[int, BinDist],
         partition: PopularityPartition, kind: Divergence, depth: int,
         alpha: float = 0.01) -> float:
    """Mean RMC over all users holding a list."""
    if not lists:
        raise ValueError("MRMC needs at least one list")
    ordered = sorted(lists, key=lambda l: l.user_id)
    total = 0.0
    for mlist in ordered:
        total += rmc(targets[mlist.user_id], mlist, partition, kind, depth, alpha)
    return total / len(ordered)


def ltc(lists: Iterable[MatchedList], partition: PopularityPartition,
        test_users: set[int] | None = None) -> float:
    """Long-tail coverage: fraction of niche items surfaced by any list."""
    if not partition.niche:
        raise ValueError("LtC is undefined with an empty niche set")
    recommended: set[int] = set()
    for mlist in lists:
        if test_users is not None and mlist.user_id not in test_users:
            raise ValueError(f"list for user {mlist.user_id} outside the test user set")
        recommended.update(mlist.matched_ids())
    return len(recommended & partition.niche) / len(partition.niche)


def relevance_from_test(test: InteractionSet,
                        min_rating: float | None = None) -> dict[int, frozenset[int]]:
    """Ground-truth relevant items per user from the test split.

    By default every test interaction counts; `min_rating` optionally
    restricts relevance to ratings at or above the floor.
    """
    relevant: dict[int, set[int]] = {}
    for user in test.users():
        items = set()
        for pos in test.user_positions(user):
            if min_rating is not None and test.ratings[pos] < min_rating:
                continue
            items.add(int(test.item_ids[pos]))
        if items:
            relevant[user] = items
    return {u: frozenset(s) for u, s in relevant.items()}


def mrr_at_k(lists: Sequence[MatchedList],
             relevance: Mapping[int, frozenset[int]], k: int) -> float:
    """Mean reciprocal rank of the first relevant item within the top k.

    Unmatched slots keep their rank position and can never be relevant.
    Users with no relevant test items are excluded from the mean.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    total = 0.0
    included = 0
    for mlist in sorted(lists, key=lambda l: l.user_id):
        relevant = relevance.get(mlist.user_id)
        if not relevant:
            continue
        included += 1
        for rank, slot in enumerate(mlist.slots[:k], start=1):
            if slot.item_id is not None and slot.item_id in relevant:
                total += 1.0 / rank
                break
    return total / included if included else 0.0


class F1Result(NamedTuple):
    precision: float
    recall: float
    f1: float
    excluded_users: int


def f1_at_k(lists: Sequence[MatchedList],
            relevance: Mapping[int, frozenset[int]], k: int) -> F1Result:
    """Mean precision@k, recall@k and F1@k over users with relevant items.

    Precision keeps k in the denominator (unmatched slots count as misses);
    F1 is the per-user harmonic mean, 0 when both components are 0. Users
    with no relevant test items are excluded and tallied.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    p_total = r_total = f_total = 0.0
    included = 0
    excluded = 0
    for mlist in sorted(lists, key=lambda l: l.user_id):
        relevant = relevance.get(mlist.user_id)
        if not relevant:
            excluded += 1
            continue
        included += 1
        hits = len({s.item_id for s in mlist.slots[:k] if s.item_id is not None}
                   & relevant)
        precision = hits / k
        recall = hits / len(relevant)
        f1 = (2 * precision * recall / (precision + recall)
              if precision + recall > 0 else 0.0)
        p_total += precision
        r_total += recall
        f_total += f1
    if included == 0:
        return F1Result(0.0, 0.0, 0.0, excluded)
    return F1Result(p_total / included, r_total / included,
                    f_total / included, excluded)


def out_of_catalog_rate(lists: Sequence[MatchedList]) -> float:
    """Share of slots whose title resolved to no catalog item.

    Duplicate-suppressed slots did resolve, so they do not count here.
    """
    slots = 0
    unmatched = 0
    for mlist in lists:
        for slot in mlist.slots:
            slots += 1
            if slot.item_id is None and not slot.duplicate:
                unmatched += 1
    return unmatched / slots if slots else 0.0


def user_targets(segments: UserSegments) -> dict[int, BinDist]:
    """User-specific calibration targets: each user's training bin shares."""
    return {u: (r, 1.0 - r) for u, r in segments.ratios.items()}


def global_target(stats: ItemStats, partition: PopularityPartition) -> BinDist:
    """Global calibration target: the training set's overall bin shares."""
    popular = sum(c for i, c in stats.counts.items() if i in partition.popular)
    total = stats.total_interactions
    if total == 0:
        return EMPTY_DIST
    return popular / total, 1.0 - popular / total


@dataclass(frozen=True)
class GroupMetrics:
    """One user group's slice of the report."""

    users: int
    ltc: float | None = None
    mrmc: float | None = None
    mrr_at_k: float | None = None
    precision_at_k: float | None = None
    recall_at_k: float | None = None
    f1_at_k: float | None = None


@dataclass(frozen=True)
class MetricsReport:
    """All metrics for one experiment cell."""

    ltc: float
    mrmc: float
    mrr_at_k: float
    precision_at_k: float
    recall_at_k: float
    f1_at_k: float
    out_of_catalog_rate: float
    divergence: str
    k: int
    excluded_users: int
    per_group: dict[str, GroupMetrics] = field(default_factory=dict)


def compute_report(lists: Sequence[MatchedList], *, partition: PopularityPartition,
                   segments: UserSegments, relevance: Mapping[int, frozenset[int]],
                   kind: Divergence = Divergence.KL, k: int = 10,
                   alpha: float = 0.01,
                   targets: Mapping[int, BinDist] | None = None) -> MetricsReport:
    """Assemble the full metric suite for one set of matched lists.

    `targets` defaults to user-specific training shares; pass a constant
    mapping for a global target. RMC depth equals k.
    """
    if not lists:
        raise ValueError("cannot score zero lists")
    if targets is None:
        targets = user_targets(segments)
    f1 = f1_at_k(lists, relevance, k)
    per_group: dict[str, GroupMetrics] = {}
    for label in (GROUP_POPULAR, GROUP_NICHE):
        members = [l for l in lists if segments.groups.get(l.user_id) == label]
        if not members:
            per_group[label] = GroupMetrics(users=0)
            continue
        g_f1 = f1_at_k(members, relevance, k)
        per_group[label] = GroupMetrics(
            users=len(members),
            ltc=ltc(members, partition),
            mrmc=mrmc(members, targets, partition, kind, k, alpha),
            mrr_at_k=mrr_at_k(members, relevance, k),
            precision_at_k=g_f1.precision,
            recall_at_k=g_f1.recall,
            f1_at_k=g_f1.f1,
        )
    return MetricsReport(
        ltc=ltc(lists, partition),
        mrmc=mrmc(lists, targets, partition, kind, k, alpha),
        mrr_at_k=mrr_at_k(lists, relevance, k),
        precision_at_k=f1.precision,
        recall_at_k=f1.recall,
        f1_at_k=f1.f1,
        out_of_catalog_rate=out_of_catalog_rate(lists),
        divergence=kind.value,
        k=k,
        excluded_users=f1.excluded_users,
        per_group=per_group,
    )
