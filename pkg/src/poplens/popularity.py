"""Catalog popularity partition and user segmentation.

Items are split 20/80 by training interaction counts (Pareto rule): the
top `pareto_fraction` of the catalog by count is the popular set, the rest
the niche set. Users are segmented by the share of their training
interactions that land on popular items: ratio >= threshold puts a user in
group P, otherwise N. Everything here reads the training split only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import IO, Iterable, Mapping

import numpy as np

from poplens.ingest import InteractionSet

GROUP_POPULAR = "P"
GROUP_NICHE = "N"


@dataclass(frozen=True)
class ItemStats:
    """Training interaction count per catalog item (0 for unseen items)."""

    counts: dict[int, int]

    @property
    def total_items(self) -> int:
        return len(self.counts)

    @property
    def total_interactions(self) -> int:
        return sum(self.counts.values())


@dataclass(frozen=True)
class PopularityPartition:
    """Disjoint, exhaustive split of the catalog into popular and niche ids."""

    popular: frozenset[int]
    niche: frozenset[int]
    pareto_fraction: float


@dataclass(frozen=True)
class UserSegments:
    """Per-user popular-consumption ratio and P/N group at one threshold."""

    ratios: dict[int, float]
    threshold: float
    groups: dict[int, str]


def compute_item_stats(train: InteractionSet, catalog: Iterable[int]) -> ItemStats:
    """Count training interactions per item over the full catalog."""
    counts = {int(i): 0 for i in sorted(catalog)}
    items, tallies = np.unique(train.item_ids, return_counts=True)
    for item, tally in zip(items, tallies):
        item = int(item)
        if item not in counts:
            raise ValueError(f"training set references item {item} outside the catalog")
        counts[item] = int(tally)
    return ItemStats(counts=counts)


def classify_items(stats: ItemStats, pareto_fraction: float) -> PopularityPartition:
    """Top floor(pareto_fraction * total_items) items by count become popular.

    Ties at the boundary resolve to the lower item id. The popular set never
    goes below one item.
    """
    if not (0.0 < pareto_fraction < 1.0):
        raise ValueError(f"pareto_fraction must be in (0, 1), got {pareto_fraction}")
    total = stats.total_items
    if total < 2:
        raise ValueError(f"catalog must hold at least 2 items, got {total}")
    n_popular = max(1, math.floor(Fraction(str(pareto_fraction)) * total))
    ranked = sorted(stats.counts, key=lambda i: (-stats.counts[i], i))
    popular = frozenset(ranked[:n_popular])
    niche = frozenset(ranked[n_popular:])
    return PopularityPartition(popular=popular, niche=niche,
                               pareto_fraction=pareto_fraction)


def classify_users(train: InteractionSet, partition: PopularityPartition,
                   threshold: float) -> UserSegments:
    """Segment training users by their popular-consumption share.

    ratio(u) = popular training interactions of u / all training
    interactions of u; group is P when ratio >= threshold ("at least"),
    N otherwise.
    """
    if not (0.0 < threshold < 1.0):
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    popular_ids = np.asarray(sorted(partition.popular), dtype=np.int64)
    on_popular = np.isin(train.item_ids, popular_ids)
    ratios: dict[int, float] = {}
    groups: dict[int, str] = {}
    for user in train.users():
        positions = train.user_positions(user)
        ratio = float(on_popular[positions].mean())
        ratios[user] = ratio
        groups[user] = GROUP_POPULAR if ratio >= threshold else GROUP_NICHE
    return UserSegments(ratios=ratios, threshold=threshold, groups=groups)


def write_partition(partition: PopularityPartition, fh: IO[str]) -> None:
    """Audit export: one `item_id,class` line per catalog item."""
    fh.write("item_id,class\n")
    labeled = [(i, GROUP_POPULAR) for i in partition.popular]
    labeled += [(i, GROUP_NICHE) for i in partition.niche]
    for item, label in sorted(labeled):
        fh.write(f"{item},{label}\n")


def write_segments(segments: UserSegments, fh: IO[str]) -> None:
    """Audit export: one `user_id,ratio,group` line per user."""
    fh.write("user_id,ratio,group\n")
    for user in sorted(segments.ratios):
        fh.write(f"{user},{segments.ratios[user]:.6f},{segments.groups[user]}\n")


def group_counts(segments: UserSegments) -> dict[str, int]:
    """Number of users per group label."""
    counts = {GROUP_POPULAR: 0, GROUP_NICHE: 0}
    for group in segments.groups.values():
        counts[group] += 1
    return counts
