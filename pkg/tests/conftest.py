import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # makes `oracles` importable

from poplens.ingest import Interaction, InteractionSet
from poplens.matching import MatchedList, MatchSlot
from poplens.prompts import Strategy


@pytest.fixture
def tiny_train():
    """Three users, five items, timestamps in file order."""
    rows = [
        Interaction(1, 10, 5.0, 100),
        Interaction(1, 11, 4.0, 200),
        Interaction(1, 10, 3.0, 300),
        Interaction(2, 10, 5.0, 100),
        Interaction(2, 12, 4.5, 200),
        Interaction(3, 13, 2.0, 100),
        Interaction(3, 14, 1.0, 200),
    ]
    return InteractionSet.from_rows(rows)


def make_list(user_id, items, strategy=Strategy.VANILLA):
    """MatchedList from a list of item ids (None = unmatched slot)."""
    slots = []
    for item in items:
        if item is None:
            slots.append(MatchSlot(raw_title="unknown"))
        else:
            slots.append(MatchSlot(raw_title=f"title {item}", item_id=item,
                                   kind="exact", score=1.0))
    return MatchedList(user_id=user_id, strategy=strategy, slots=tuple(slots))


@pytest.fixture
def list_factory():
    return make_list
