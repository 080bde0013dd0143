"""Result emission: per-cell tables, item-exposure data, run manifests.

Tables carry one row per experiment cell with fixed columns (LtC, MRMC,
MRR@k, F1@k, out-of-catalog rate) rendered to 3 decimals (round-half-even,
Python's float formatting). Exposure files list per-item recommendation
counts for external plotting. Every emitted file embeds the run manifest
digest; manifests stay free of wall-clock data so identical runs are
byte-identical.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

from poplens.matching import MatchedList
from poplens.metrics import MetricsReport
from poplens.popularity import GROUP_POPULAR, ItemStats, PopularityPartition
from poplens.prompts import Strategy

TABLE_FORMATS = ("csv", "md")

_THRESHOLD_LABELS = {0.5: "55", 0.8: "82"}


def threshold_label(threshold: float | None) -> str | None:
    """Paper-style segmentation tag: 0.5 -> '55', 0.8 -> '82'."""
    if threshold is None:
        return None
    return _THRESHOLD_LABELS.get(threshold, str(int(round(threshold * 100))))


def cell_label(strategy: Strategy, threshold: float | None) -> str:
    tag = threshold_label(threshold)
    return strategy.display if tag is None else f"{strategy.display} ({tag})"


@dataclass(frozen=True)
class ExperimentCell:
    """One (strategy, threshold) result row plus its provenance manifest."""

    strategy: Strategy
    threshold: float | None
    provider: str
    report: MetricsReport
    manifest: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        return cell_label(self.strategy, self.threshold)


def manifest_digest(manifest: Mapping) -> str:
    """Stable digest of a manifest mapping (canonical JSON, sha256)."""
    blob = json.dumps(manifest, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _fmt(value: float) -> str:
    return format(value, ".3f")


def emit_table(cells: Sequence[ExperimentCell], fmt: str, digest: str) -> bytes:
    """Render the results table in `fmt` ('csv' or 'md'), rows in input order."""
    if not cells:
        raise ValueError("cannot emit a table with no cells")
    if fmt not in TABLE_FORMATS:
        raise ValueError(f"unknown table format {fmt!r} (expected one of {TABLE_FORMATS})")
    rows = [
        (c.label, _fmt(c.report.ltc), _fmt(c.report.mrmc), _fmt(c.report.mrr_at_k),
         _fmt(c.report.f1_at_k), _fmt(c.report.out_of_catalog_rate))
        for c in cells
    ]
    k = cells[0].report.k
    if fmt == "csv":
        lines = [f"# manifest={digest}",
                 f"strategy,ltc,mrmc,mrr_at_{k},f1_at_{k},out_of_catalog_rate"]
        lines += [",".join(('"' + row[0] + '"',) + row[1:]) for row in rows]
    else:
        header = f"| Strategy | LtC | MRMC | MRR@{k} | F1@{k} | OOC rate |"
        lines = [header, "|" + " --- |" * 6]
        lines += ["| " + " | ".join(row) + " |" for row in rows]
        lines += ["", f"Manifest: `{digest}`"]
    return ("\n".join(lines) + "\n").encode("utf-8")


def emit_cells_json(cells: Sequence[ExperimentCell], digest: str) -> bytes:
    """Structured record of every cell, full precision, for downstream tools."""
    payload = {
        "manifest": digest,
        "cells": [
            {
                "label": c.label,
                "strategy": c.strategy.value,
                "threshold": c.threshold,
                "provider": c.provider,
                "metrics": asdict(c.report),
                "manifest": c.manifest,
            }
            for c in cells
        ],
    }
    return (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode("utf-8")


def exposure_counts(lists: Iterable[MatchedList]) -> dict[int, int]:
    """Recommendation count per item over all matched slots."""
    counts: dict[int, int] = {}
    for mlist in lists:
        for item in mlist.matched_ids():
            counts[item] = counts.get(item, 0) + 1
    return counts


def emit_exposure(lists: Sequence[MatchedList], stats: ItemStats,
                  partition: PopularityPartition, digest: str) -> bytes:
    """Per-item exposure with popularity class, sorted by training popularity.

    Covers the whole catalog (zero rows included) so the long-tail shape is
    plottable directly.
    """
    counts = exposure_counts(lists)
    lines = [f"# manifest={digest}", "item_id,train_count,class,exposure"]
    ranked = sorted(stats.counts, key=lambda i: (-stats.counts[i], i))
    for item in ranked:
        label = GROUP_POPULAR if item in partition.popular else "N"
        lines.append(f"{item},{stats.counts[item]},{label},{counts.get(item, 0)}")
    return ("\n".join(lines) + "\n").encode("utf-8")
