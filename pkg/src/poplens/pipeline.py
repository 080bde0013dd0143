"""End-to-end experiment orchestration.

One RunConfig drives: ingest -> partition/segment -> prompts -> query (live
endpoint with a replay cache, or the simulator) -> match -> score -> report.
Every artifact lands in the output directory; identical (config, seed,
cache) always reproduces identical bytes. Failures surface as StageError
naming the pipeline stage that broke.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Mapping

from poplens import ingest, matching, metrics, popularity, prompts, providers, report
from poplens.metrics import Divergence
from poplens.prompts import Strategy

STAGES = ("ingest", "partition", "segment", "prompts", "query", "match",
          "score", "report")


class StageError(RuntimeError):
    """Failure attributed to one pipeline stage."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


_ALL_STRATEGIES = (Strategy.VANILLA, Strategy.DIVERSITY,
                   Strategy.POP_DEBIASING, Strategy.FAIRLRM)


@dataclass
class RunConfig:
    """Everything a run needs; defaults follow the evaluation protocol."""

    ratings_path: str = ""
    catalog_path: str = ""
    dataset_format: str = ingest.MOVIELENS
    min_interactions: int = 30
    train_ratio: float = 0.7
    pareto_fraction: float = 0.2
    thresholds: tuple[float, ...] = (0.5, 0.8)
    strategies: tuple[Strategy, ...] = _ALL_STRATEGIES
    list_length: int = 10
    k: int = 10
    divergence: str = "kl"
    alpha: float = 0.01
    fuzzy_threshold: float = 0.9
    target: str = "user"  # "user" | "global"
    min_rating: float | None = None
    provider: str = "simulator"  # "simulator" | "live"
    endpoint: str = ""
    model: str = "simulator"
    api_key_env: str = "POPLENS_API_KEY"
    max_in_flight: int = 4
    timeout: float = 30.0
    retries: int = 3
    bias_exponent: float = 1.0
    max_users: int = 0  # 0 = every user
    seed: int = 0
    out_dir: str = "out"

    def validate(self) -> None:
        if not self.ratings_path:
            raise ValueError("ratings_path is required")
        if self.dataset_format not in ingest.FORMATS:
            raise ValueError(f"unknown dataset format {self.dataset_format!r}")
        if self.min_interactions < 1:
            raise ValueError("min_interactions must be >= 1")
        if not (0.0 < self.train_ratio < 1.0):
            raise ValueError("train_ratio must be in (0, 1)")
        if not (0.0 < self.pareto_fraction < 1.0):
            raise ValueError("pareto_fraction must be in (0, 1)")
        if not self.thresholds:
            raise ValueError("at least one threshold is required")
        for t in self.thresholds:
            if not (0.0 < t < 1.0):
                raise ValueError(f"threshold {t} outside (0, 1)")
        if not self.strategies:
            raise ValueError("at least one strategy must be selected")
        if self.list_length < 1 or self.k < 1:
            raise ValueError("list_length and k must be >= 1")
        Divergence(self.divergence)  # raises on unknown kind
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha must be in (0, 1)")
        if not (0.0 < self.fuzzy_threshold <= 1.0):
            raise ValueError("fuzzy_threshold must be in (0, 1]")
        if self.target not in ("user", "global"):
            raise ValueError("target must be 'user' or 'global'")
        if self.provider not in ("simulator", "live"):
            raise ValueError("provider must be 'simulator' or 'live'")
        if self.provider == "live" and not self.endpoint:
            raise ValueError("live provider needs an endpoint")
        if self.bias_exponent < 0:
            raise ValueError("bias_exponent must be >= 0")
        if self.max_users < 0:
            raise ValueError("max_users must be >= 0")
        providers.ProviderConfig(endpoint=self.endpoint, model=self.model,
                                 api_key_env=self.api_key_env,
                                 max_in_flight=self.max_in_flight,
                                 timeout=self.timeout, retries=self.retries,
                                 seed=self.seed).validate()

    def public_mapping(self) -> dict:
        """Config as plain data for the manifest; out_dir is excluded so the
        same experiment written elsewhere hashes identically."""
        data = asdict(self)
        data.pop("out_dir")
        data["strategies"] = [s.value for s in self.strategies]
        data["thresholds"] = list(self.thresholds)
        return data

    def digest(self) -> str:
        blob = json.dumps(self.public_mapping(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


_BOOL_KEYS = frozenset()
_INT_KEYS = frozenset({"min_interactions", "list_length", "k", "max_in_flight",
                       "retries", "max_users", "seed"})
_FLOAT_KEYS = frozenset({"train_ratio", "pareto_fraction", "alpha", "fuzzy_threshold",
                         "timeout", "bias_exponent", "min_rating"})


def load_config_file(path: str | Path) -> dict[str, str]:
    """Parse a plain `key = value` config file ('#' starts a comment)."""
    mapping: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            mapping[key.strip()] = value.strip()
    return mapping


def config_from_mapping(mapping: Mapping[str, str], **overrides) -> RunConfig:
    """Build a RunConfig from string key-values plus keyword overrides."""
    known = {f.name for f in fields(RunConfig)}
    kwargs: dict = {}
    for key, raw in mapping.items():
        if key not in known:
            raise ValueError(f"unknown configuration key {key!r}")
        if key == "strategies":
            kwargs[key] = tuple(Strategy(part.strip())
                                for part in raw.split(",") if part.strip())
        elif key == "thresholds":
            kwargs[key] = tuple(float(part) for part in raw.split(",") if part.strip())
        elif key in _INT_KEYS:
            kwargs[key] = int(raw)
        elif key in _FLOAT_KEYS:
            kwargs[key] = None if raw.lower() == "none" else float(raw)
        else:
            kwargs[key] = raw
    for key, value in overrides.items():
        if value is not None:
            kwargs[key] = value
    return RunConfig(**kwargs)


def _sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class PreparedData:
    """Ingest through segmentation, shared by every downstream stage."""

    split: ingest.SplitPair
    catalog: dict[int, str]
    stats: popularity.ItemStats
    partition: popularity.PopularityPartition
    segments: dict[float, popularity.UserSegments]
    users: list[int]  # evaluation users (sorted, possibly capped)


def prepare(config: RunConfig) -> PreparedData:
    """Run the data-side stages: ingest, partition, segment."""
    try:
        raw = ingest.parse_interactions(config.ratings_path, config.dataset_format)
        if config.catalog_path:
            catalog = ingest.parse_catalog(config.catalog_path, config.dataset_format)
        else:
            catalog = {i: f"Item {i}" for i in sorted(raw.item_id_set())}
        filtered = ingest.filter_min_interactions(raw, config.min_interactions)
        split = ingest.temporal_split(filtered, config.train_ratio)
    except (OSError, ValueError) as exc:
        raise StageError("ingest", exc) from exc
    try:
        stats = popularity.compute_item_stats(split.train, catalog.keys())
        partition = popularity.classify_items(stats, config.pareto_fraction)
    except ValueError as exc:
        raise StageError("partition", exc) from exc
    try:
        segments = {t: popularity.classify_users(split.train, partition, t)
                    for t in config.thresholds}
    except ValueError as exc:
        raise StageError("segment", exc) from exc
    users = split.train.users()
    if config.max_users:
        users = users[:config.max_users]
    return PreparedData(split=split, catalog=catalog, stats=stats,
                        partition=partition, segments=segments, users=users)


def experiment_cells(config: RunConfig) -> list[tuple[Strategy, float | None]]:
    """The (strategy, threshold) grid; Vanilla is threshold-free."""
    cells: list[tuple[Strategy, float | None]] = []
    if Strategy.VANILLA in config.strategies:
        cells.append((Strategy.VANILLA, None))
    for strategy in (Strategy.DIVERSITY, Strategy.POP_DEBIASING, Strategy.FAIRLRM):
        if strategy in config.strategies:
            cells.extend((strategy, t) for t in config.thresholds)
    return cells


@dataclass
class CellRun:
    """Work product of one cell as it moves through the stages."""

    strategy: Strategy
    threshold: float | None
    requests: list[prompts.PromptRequest] = field(default_factory=list)
    prompt_texts: list[str] = field(default_factory=list)
    raw: list[providers.RawRecommendation] = field(default_factory=list)
    lists: list[matching.MatchedList] = field(default_factory=list)


def build_cell_prompts(config: RunConfig, data: PreparedData) -> list[CellRun]:
    """Render every cell's prompts for the evaluation users."""
    try:
        cells = []
        for strategy, threshold in experiment_cells(config):
            cell = CellRun(strategy=strategy, threshold=threshold)
            segments = data.segments[threshold] if threshold is not None else None
            for user in data.users:
                history: tuple = ()
                if strategy is Strategy.FAIRLRM:
                    history = prompts.build_history(data.split.train, user,
                                                    data.catalog, data.partition)
                request = prompts.PromptRequest(user_id=user, strategy=strategy,
                                                history_sample=history,
                                                list_length=config.list_length)
                cell.requests.append(request)
                cell.prompt_texts.append(prompts.build_prompt(
                    request,
                    segments if strategy is Strategy.FAIRLRM else None,
                    data.partition))
            cells.append(cell)
        return cells
    except (KeyError, ValueError) as exc:
        raise StageError("prompts", exc) from exc


def run_queries(config: RunConfig, data: PreparedData, cells: list[CellRun],
                cache: providers.ResponseCache | None = None) -> None:
    """Fill each cell with raw recommendations (simulator or cache-first live)."""
    try:
        if config.provider == "simulator":
            for cell in cells:
                cell.raw = [providers.simulate_recommendations(
                    request, data.stats, data.catalog,
                    bias_exponent=config.bias_exponent, seed=config.seed)
                    for request in cell.requests]
            return
        provider_config = providers.ProviderConfig(
            endpoint=config.endpoint, model=config.model,
            api_key_env=config.api_key_env, max_in_flight=config.max_in_flight,
            timeout=config.timeout, retries=config.retries, seed=config.seed)
        # Distinct prompts only: identical prompts (e.g. Vanilla for every
        # user) cost one request and share the response.
        pending: dict[str, str | None] = {}
        for cell in cells:
            for text in cell.prompt_texts:
                if text not in pending:
                    hit = cache.get(config.model, text) if cache else None
                    pending[text] = hit
        misses = [text for text, hit in pending.items() if hit is None]

        def fetch(text: str) -> str:
            rec = providers.request_recommendations(
                text, provider_config, user_id=0, strategy=Strategy.VANILLA,
                list_length=config.list_length)
            return rec.raw_response

        responses = providers.fetch_all(misses, fetch, config.max_in_flight)
        for text, response in zip(misses, responses):
            pending[text] = response
            if cache:
                cache.put(config.model, text, response)
        for cell in cells:
            cell.raw = []
            for request, text in zip(cell.requests, cell.prompt_texts):
                body = pending[text]
                assert body is not None
                cell.raw.append(providers.RawRecommendation(
                    user_id=request.user_id, strategy=request.strategy,
                    titles=tuple(providers.extract_titles(body, config.list_length)),
                    raw_response=body, provenance=providers.PROVENANCE_LIVE))
    except (providers.TransportError, providers.ProviderError, ValueError) as exc:
        raise StageError("query", exc) from exc


def match_cells(config: RunConfig, data: PreparedData, cells: list[CellRun]) -> None:
    try:
        index = matching.build_index(data.catalog)
        for cell in cells:
            cell.lists = [matching.match_titles(rec, index, config.fuzzy_threshold)
                          for rec in cell.raw]
    except ValueError as exc:
        raise StageError("match", exc) from exc


def score_cells(config: RunConfig, data: PreparedData, cells: list[CellRun],
                run_manifest: dict) -> list[report.ExperimentCell]:
    try:
        relevance = metrics.relevance_from_test(data.split.test, config.min_rating)
        kind = Divergence(config.divergence)
        scored = []
        for cell in cells:
            segments = data.segments[cell.threshold if cell.threshold is not None
                                     else config.thresholds[0]]
            if config.target == "global":
                constant = metrics.global_target(data.stats, data.partition)
                targets = {u: constant for u in segments.ratios}
            else:
                targets = metrics.user_targets(segments)
            cell_report = metrics.compute_report(
                cell.lists, partition=data.partition, segments=segments,
                relevance=relevance, kind=kind, k=config.k, alpha=config.alpha,
                targets=targets)
            manifest = dict(run_manifest)
            manifest["strategy"] = cell.strategy.value
            manifest["threshold"] = cell.threshold
            scored.append(report.ExperimentCell(
                strategy=cell.strategy, threshold=cell.threshold,
                provider=config.provider, report=cell_report, manifest=manifest))
        return scored
    except (KeyError, ValueError) as exc:
        raise StageError("score", exc) from exc


def _cell_slug(strategy: Strategy, threshold: float | None) -> str:
    tag = report.threshold_label(threshold)
    return strategy.value if tag is None else f"{strategy.value}_{tag}"


def write_prompt_log(cells: list[CellRun], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for cell in cells:
            prompts.write_prompts(
                ((req, cell.threshold, text)
                 for req, text in zip(cell.requests, cell.prompt_texts)), fh)


def write_responses(cells: list[CellRun], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for cell in cells:
            for text, rec in zip(cell.prompt_texts, cell.raw):
                fh.write(json.dumps({
                    "user_id": rec.user_id,
                    "strategy": rec.strategy.value,
                    "threshold": cell.threshold,
                    "provenance": rec.provenance,
                    "prompt_sha256": hashlib.sha256(text.encode()).hexdigest(),
                    "titles": list(rec.titles),
                    "raw_response": rec.raw_response,
                }, sort_keys=True) + "\n")


def load_responses(path: Path) -> dict[tuple[str, float | None, int], dict]:
    """Replay log keyed by (strategy value, threshold, user id)."""
    records: dict[tuple[str, float | None, int], dict] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            records[(record["strategy"], record["threshold"],
                     record["user_id"])] = record
    return records


def replay_queries(cells: list[CellRun], path: Path) -> None:
    """Fill cells from a responses.jsonl written by an earlier query stage."""
    try:
        records = load_responses(path)
        for cell in cells:
            cell.raw = []
            for request in cell.requests:
                key = (cell.strategy.value, cell.threshold, request.user_id)
                if key not in records:
                    raise ValueError(f"no recorded response for strategy="
                                     f"{key[0]} threshold={key[1]} user={key[2]}")
                record = records[key]
                cell.raw.append(providers.RawRecommendation(
                    user_id=request.user_id, strategy=cell.strategy,
                    titles=tuple(record["titles"]),
                    raw_response=record["raw_response"],
                    provenance=record["provenance"]))
    except (OSError, ValueError, KeyError) as exc:
        raise StageError("score", exc) from exc


@dataclass
class RunResult:
    out_dir: Path
    cells: list[report.ExperimentCell]
    files: list[Path]


def write_outputs(config: RunConfig, data: PreparedData, cells: list[CellRun],
                  scored: list[report.ExperimentCell], run_manifest: dict) -> RunResult:
    try:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        digest = report.manifest_digest(run_manifest)
        files: list[Path] = []

        def emit(name: str, payload: bytes) -> None:
            path = out / name
            path.write_bytes(payload)
            files.append(path)

        emit("manifest.json", (json.dumps(
            {"digest": digest, **run_manifest}, indent=2, sort_keys=True) + "\n").encode())
        emit("table.csv", report.emit_table(scored, "csv", digest))
        emit("table.md", report.emit_table(scored, "md", digest))
        emit("cells.json", report.emit_cells_json(scored, digest))

        with open(out / "partition.csv", "w", encoding="utf-8") as fh:
            popularity.write_partition(data.partition, fh)
        files.append(out / "partition.csv")
        for threshold, segments in data.segments.items():
            name = f"segments_{report.threshold_label(threshold)}.csv"
            with open(out / name, "w", encoding="utf-8") as fh:
                popularity.write_segments(segments, fh)
            files.append(out / name)

        write_prompt_log(cells, out / "prompts.jsonl")
        files.append(out / "prompts.jsonl")
        write_responses(cells, out / "responses.jsonl")
        files.append(out / "responses.jsonl")

        with open(out / "match_audit.jsonl", "w", encoding="utf-8") as fh:
            for cell in cells:
                matching.write_match_audit(cell.lists, fh)
        files.append(out / "match_audit.jsonl")

        for cell in cells:
            name = f"exposure_{_cell_slug(cell.strategy, cell.threshold)}.csv"
            emit(name, report.emit_exposure(cell.lists, data.stats,
                                            data.partition, digest))
        return RunResult(out_dir=out, cells=scored, files=files)
    except OSError as exc:
        raise StageError("report", exc) from exc


def build_run_manifest(config: RunConfig, data: PreparedData) -> dict:
    """Run provenance: seed, config, dataset checksums.

    Deliberately free of wall-clock fields so identical runs hash (and
    byte-compare) identically.
    """
    return {
        "seed": config.seed,
        "config": config.public_mapping(),
        "config_digest": config.digest(),
        "datasets": {
            "ratings_sha256": _sha256_file(config.ratings_path),
            "catalog_sha256": (_sha256_file(config.catalog_path)
                               if config.catalog_path else None),
        },
        "pseudo_temporal_order": data.split.train.timestamps is None,
    }


def run_experiment(config: RunConfig) -> RunResult:
    """Execute the full pipeline for one configuration."""
    config.validate()
    data = prepare(config)
    run_manifest = build_run_manifest(config, data)
    cells = build_cell_prompts(config, data)
    cache = None
    if config.provider == "live":
        cache = providers.ResponseCache(Path(config.out_dir) / "response_cache.jsonl")
    try:
        run_queries(config, data, cells, cache)
    finally:
        if cache:
            cache.close()
    match_cells(config, data, cells)
    scored = score_cells(config, data, cells, run_manifest)
    return write_outputs(config, data, cells, scored, run_manifest)


def compute_ingest_stats(config: RunConfig) -> dict:
    """Dataset summary: raw counts plus P/N group counts at each threshold,
    with the user filter both applied (post_filter) and skipped (pre_filter),
    since published summaries do not pin the ordering down."""
    raw = ingest.parse_interactions(config.ratings_path, config.dataset_format)
    catalog_ids: set[int] = set()
    if config.catalog_path:
        catalog_ids = set(ingest.parse_catalog(config.catalog_path,
                                               config.dataset_format))
    observed = raw.item_id_set()
    filtered = ingest.filter_min_interactions(raw, config.min_interactions)

    def group_variant(base: ingest.InteractionSet) -> dict[str, dict[str, int]]:
        split = ingest.temporal_split(base, config.train_ratio, min_per_user=1)
        stats = popularity.compute_item_stats(split.train,
                                              catalog_ids | observed)
        partition = popularity.classify_items(stats, config.pareto_fraction)
        out = {}
        for t in config.thresholds:
            segments = popularity.classify_users(split.train, partition, t)
            out[str(t)] = popularity.group_counts(segments)
        return out

    return {
        "dataset_format": config.dataset_format,
        "users_raw": len(raw.users()),
        "items_catalog": len(catalog_ids) if catalog_ids else None,
        "items_observed": len(observed),
        "interactions_raw": len(raw),
        "min_interactions": config.min_interactions,
        "users_filtered": len(filtered.users()),
        "interactions_filtered": len(filtered),
        "groups": {
            "pre_filter": group_variant(raw),
            "post_filter": group_variant(filtered),
        },
    }
