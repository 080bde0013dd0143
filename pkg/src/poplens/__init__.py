"""poplens: offline popularity-bias evaluation for LLM-based recommenders.

Pipeline: ingest interaction data, partition the catalog into popular/niche
items, segment users by their popularity appetite, render prompt strategies,
collect recommendation lists (live chat-completion endpoint or built-in
simulator), resolve free-text titles against the catalog, and score fairness
(long-tail coverage, rank miscalibration) alongside accuracy (MRR@k, F1@k).
"""

__version__ = "0.1.0"
