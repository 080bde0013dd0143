"""The four prompt strategies.

Vanilla, Diversity and Pop.Debiasing are fixed request strings; FairLRM
additionally conditions the model on the segmentation rules, the user's
group, and their recent training history tagged H-class (popular) or
T-class (long-tail). Rendering is pure: identical inputs give identical
bytes, and history comes exclusively from the training split.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import IO, Iterable, Mapping

from poplens.ingest import InteractionSet
from poplens.popularity import GROUP_POPULAR, PopularityPartition, UserSegments


class Strategy(enum.Enum):
    VANILLA = "vanilla"
    DIVERSITY = "diversity"
    POP_DEBIASING = "pop_debiasing"
    FAIRLRM = "fairlrm"

    @property
    def display(self) -> str:
        return _DISPLAY[self]

    @property
    def code(self) -> int:
        """Stable small integer, used to derive per-strategy random streams."""
        return _CODES[self]


_DISPLAY = {
    Strategy.VANILLA: "Vanilla",
    Strategy.DIVERSITY: "Diversity",
    Strategy.POP_DEBIASING: "Pop.Debiasing",
    Strategy.FAIRLRM: "FairLRM",
}
_CODES = {
    Strategy.VANILLA: 0,
    Strategy.DIVERSITY: 1,
    Strategy.POP_DEBIASING: 2,
    Strategy.FAIRLRM: 3,
}

VANILLA_TEMPLATE = "I need {n} movies or TV shows."
DIVERSITY_TEMPLATE = "Please recommend a diverse list of {n} movies."
POP_DEBIASING_PROMPT = (
    "Please apply popularity debiasing: avoid recommending only popular "
    "movies; include long-tail movies when appropriate."
)
SEGMENTATION_RULES = (
    "The user segmentation rules are as follows: users who watch more than "
    "50% of H-class movies are classified as popular users, those who watch "
    "more than 50% of T-class movies are classified as niche users, and the "
    "remaining are ordinary users. For popular users, more H-class movies "
    "should be recommended, while for niche users, more T-class movies "
    "should be recommended."
)

HISTORY_LIMIT = 20


@dataclass(frozen=True)
class PromptRequest:
    """One prompt to render: user, strategy, optional history context."""

    user_id: int
    strategy: Strategy
    history_sample: tuple[tuple[str, str], ...] = ()  # (title, "H" | "T")
    list_length: int = 10


def build_history(train: InteractionSet, user_id: int, titles: Mapping[int, str],
                  partition: PopularityPartition,
                  limit: int = HISTORY_LIMIT) -> tuple[tuple[str, str], ...]:
    """Most recent `limit` training titles for a user, tagged H or T."""
    positions = train.user_positions(user_id)[-limit:]
    sample = []
    for pos in positions:
        item = int(train.item_ids[pos])
        tag = "H" if item in partition.popular else "T"
        sample.append((titles[item], tag))
    return tuple(sample)


def build_prompt(request: PromptRequest, segments: UserSegments | None,
                 partition: PopularityPartition | None = None) -> str:
    """Render one strategy's prompt text.

    FairLRM requires `segments` and a segmented user; Vanilla must not be
    handed segments (it is the no-context baseline).
    """
    n = request.list_length
    if request.strategy is Strategy.VANILLA:
        if segments is not None:
            raise ValueError("Vanilla prompts take no user segmentation")
        return VANILLA_TEMPLATE.format(n=n)
    if request.strategy is Strategy.DIVERSITY:
        return DIVERSITY_TEMPLATE.format(n=n)
    if request.strategy is Strategy.POP_DEBIASING:
        return POP_DEBIASING_PROMPT
    # FairLRM
    if segments is None:
        raise ValueError("FairLRM prompts require user segmentation")
    if request.user_id not in segments.groups:
        raise ValueError(f"user {request.user_id} is not segmented")
    label = "popular" if segments.groups[request.user_id] == GROUP_POPULAR else "niche"
    lines = [SEGMENTATION_RULES, "", f"This user is a {label} user."]
    if request.history_sample:
        lines.append("Recently watched (H = popular, T = long-tail):")
        lines.extend(f"- {title} [{tag}]" for title, tag in request.history_sample)
    lines.append("")
    lines.append(VANILLA_TEMPLATE.format(n=n))
    return "\n".join(lines)


def write_prompts(records: Iterable[tuple[PromptRequest, float | None, str]],
                  fh: IO[str]) -> None:
    """Line-delimited audit/replay export: (user, strategy, threshold, prompt)."""
    for request, threshold, prompt in records:
        fh.write(json.dumps({
            "user_id": request.user_id,
            "strategy": request.strategy.value,
            "threshold": threshold,
            "prompt": prompt,
        }, sort_keys=True) + "\n")
