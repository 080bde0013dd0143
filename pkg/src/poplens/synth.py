"""Seeded synthetic datasets for desk-scale runs and verification.

The generated population mixes a small cohort of prolific, popularity-
concentrated "heavy" users (their consumption follows a Zipf law over the
catalog, creating a genuine head) with a majority of light users who browse
the catalog near-uniformly. A popularity-following recommender then
demonstrably under-serves the majority, which is the regime the fairness
metrics are meant to expose. Output is MovieLens-format CSV, so the
standard ingest path applies unchanged.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

_ARTICLE_EVERY = 7  # sprinkle "..., The (year)" titles to exercise matching


def zipf_weights(n: int, s: float) -> np.ndarray:
    """Normalized Zipf(s) probabilities over ranks 1..n."""
    ranks = np.arange(1, n + 1, dtype=np.float64)
    weights = ranks ** (-s)
    return weights / weights.sum()


def item_title(item_id: int) -> str:
    """Deterministic synthetic movie title for one item id."""
    year = 1920 + (item_id * 13) % 100
    if item_id % _ARTICLE_EVERY == 0:
        return f"Synthetic Saga {item_id:04d}, The ({year})"
    return f"Synthetic Film {item_id:04d} ({year})"


def generate_dataset(out_dir: str | Path, *, n_users: int = 200, n_items: int = 500,
                     seed: int = 0, heavy_fraction: float = 0.1,
                     heavy_interactions: int = 400, light_interactions: int = 40,
                     zipf_s: float = 1.0) -> tuple[Path, Path]:
    """Write ratings.csv and movies.csv for a seeded synthetic population.

    Item ids run 1..n_items with id order equal to Zipf rank. Heavy users
    (the first `heavy_fraction` of user ids) draw `heavy_interactions`
    distinct items Zipf(zipf_s)-weighted; the rest draw `light_interactions`
    distinct items uniformly. Timestamps increase within each user.
    """
    if heavy_interactions > n_items or light_interactions > n_items:
        raise ValueError("per-user interaction count cannot exceed the catalog size")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ratings_path = out / "ratings.csv"
    movies_path = out / "movies.csv"

    rng = np.random.default_rng(seed)
    zipf_p = zipf_weights(n_items, zipf_s)
    n_heavy = int(round(n_users * heavy_fraction))

    with open(ratings_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("userId,movieId,rating,timestamp\n")
        for user in range(1, n_users + 1):
            heavy = user <= n_heavy
            m = heavy_interactions if heavy else light_interactions
            items = rng.choice(n_items, size=m, replace=False,
                               p=zipf_p if heavy else None) + 1
            ratings = rng.integers(6, 11, size=m) / 2.0  # 3.0..5.0 in halves
            base_ts = 1_000_000_000 + user * 100_000
            for step, (item, rating) in enumerate(zip(items, ratings)):
                fh.write(f"{user},{item},{rating},{base_ts + step}\n")

    with open(movies_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("movieId,title,genres\n")
        for item in range(1, n_items + 1):
            fh.write(f'{item},"{item_title(item)}",Synthetic\n')

    return ratings_path, movies_path
