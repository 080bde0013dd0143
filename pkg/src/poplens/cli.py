"""Command-line interface.

Subcommands mirror the pipeline stages (ingest-stats, partition, segment,
prompts, query, score) plus `run` for the whole thing and `synth` for a
seeded synthetic dataset. Settings come from an optional `key = value`
config file with flag overrides on top; API keys only ever come from the
environment.
"""

from __future__ import annotations

import json
from pathlib import Path

import click

from poplens import ingest, pipeline, popularity, providers, report, synth
from poplens.pipeline import RunConfig, StageError


def _config_options(fn):
    options = [
        click.option("--config", "config_path", type=click.Path(), default=None,
                     help="key = value configuration file"),
        click.option("--ratings", "ratings_path", default=None,
                     help="ratings CSV path ('-' for stdin)"),
        click.option("--catalog", "catalog_path", default=None,
                     help="item metadata CSV path"),
        click.option("--format", "dataset_format",
                     type=click.Choice(ingest.FORMATS), default=None),
        click.option("--out", "out_dir", default=None, help="output directory"),
        click.option("--seed", type=int, default=None),
        click.option("--simulate", is_flag=True, default=False,
                     help="force the built-in simulator provider"),
        click.option("--strategies", default=None,
                     help="comma list: vanilla,diversity,pop_debiasing,fairlrm"),
        click.option("--thresholds", default=None, help="comma list, e.g. 0.5,0.8"),
        click.option("--min-interactions", type=int, default=None),
        click.option("--train-ratio", type=float, default=None),
        click.option("--bias-exponent", type=float, default=None),
        click.option("--max-users", type=int, default=None),
        click.option("--endpoint", default=None, help="chat-completion URL"),
        click.option("--model", default=None),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _build_config(config_path, simulate, **overrides) -> RunConfig:
    mapping: dict[str, str] = {}
    if config_path:
        try:
            mapping = pipeline.load_config_file(config_path)
        except OSError as exc:
            raise click.ClickException(f"config: {exc}")
    for key, value in overrides.items():
        if value is not None:
            mapping[key] = str(value)
    if simulate:
        mapping["provider"] = "simulator"
    try:
        return pipeline.config_from_mapping(mapping)
    except (ValueError, KeyError) as exc:
        raise click.ClickException(f"config: {exc}")


def _run_stage(fn, *args):
    try:
        return fn(*args)
    except StageError as exc:
        raise click.ClickException(str(exc))
    except ValueError as exc:
        raise click.ClickException(f"config: {exc}")


@click.group()
def main():
    """Popularity-bias evaluation harness for LLM-based recommenders."""


@main.command("synth")
@click.option("--out", "out_dir", required=True)
@click.option("--users", type=int, default=200, show_default=True)
@click.option("--items", type=int, default=500, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--heavy-fraction", type=float, default=0.1, show_default=True)
@click.option("--heavy-interactions", type=int, default=400, show_default=True)
@click.option("--light-interactions", type=int, default=40, show_default=True)
@click.option("--zipf-s", type=float, default=1.0, show_default=True)
def synth_cmd(out_dir, users, items, seed, heavy_fraction, heavy_interactions,
              light_interactions, zipf_s):
    """Generate a seeded synthetic MovieLens-format dataset."""
    ratings, movies = synth.generate_dataset(
        out_dir, n_users=users, n_items=items, seed=seed,
        heavy_fraction=heavy_fraction, heavy_interactions=heavy_interactions,
        light_interactions=light_interactions, zipf_s=zipf_s)
    click.echo(f"wrote {ratings}")
    click.echo(f"wrote {movies}")


@main.command("ingest-stats")
@_config_options
@click.option("--json", "as_json", is_flag=True, help="emit machine-readable JSON")
def ingest_stats(config_path, simulate, as_json, **overrides):
    """Dataset summary: raw counts and P/N group counts per threshold."""
    config = _build_config(config_path, simulate, **overrides)
    try:
        stats = pipeline.compute_ingest_stats(config)
    except (OSError, ValueError) as exc:
        raise click.ClickException(f"ingest: {exc}")
    if as_json:
        click.echo(json.dumps(stats, indent=2, sort_keys=True))
        return
    click.echo(f"dataset format     : {stats['dataset_format']}")
    click.echo(f"users (raw)        : {stats['users_raw']}")
    click.echo(f"items (catalog)    : {stats['items_catalog']}")
    click.echo(f"items (observed)   : {stats['items_observed']}")
    click.echo(f"interactions (raw) : {stats['interactions_raw']}")
    click.echo(f"users >= {stats['min_interactions']} inter. : {stats['users_filtered']}")
    click.echo(f"interactions kept  : {stats['interactions_filtered']}")
    for variant in ("pre_filter", "post_filter"):
        for threshold, counts in stats["groups"][variant].items():
            click.echo(f"P/N groups ({variant}, threshold {threshold}): "
                       f"{counts['P']}/{counts['N']}")


@main.command()
@_config_options
def partition(config_path, simulate, **overrides):
    """Write the popular/niche item partition (partition.csv)."""
    config = _build_config(config_path, simulate, **overrides)
    data = _run_stage(pipeline.prepare, config)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "partition.csv", "w", encoding="utf-8") as fh:
        popularity.write_partition(data.partition, fh)
    click.echo(f"popular={len(data.partition.popular)} "
               f"niche={len(data.partition.niche)}")
    click.echo(f"wrote {out / 'partition.csv'}")


@main.command()
@_config_options
def segment(config_path, simulate, **overrides):
    """Write user segments for each configured threshold."""
    config = _build_config(config_path, simulate, **overrides)
    data = _run_stage(pipeline.prepare, config)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for threshold, segments in data.segments.items():
        name = f"segments_{report.threshold_label(threshold)}.csv"
        with open(out / name, "w", encoding="utf-8") as fh:
            popularity.write_segments(segments, fh)
        counts = popularity.group_counts(segments)
        click.echo(f"threshold {threshold}: P={counts['P']} N={counts['N']} "
                   f"-> {out / name}")


@main.command("prompts")
@_config_options
def prompts_cmd(config_path, simulate, **overrides):
    """Render every cell's prompts (prompts.jsonl)."""
    config = _build_config(config_path, simulate, **overrides)
    data = _run_stage(pipeline.prepare, config)
    cells = _run_stage(pipeline.build_cell_prompts, config, data)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pipeline.write_prompt_log(cells, out / "prompts.jsonl")
    total = sum(len(c.prompt_texts) for c in cells)
    click.echo(f"wrote {total} prompts -> {out / 'prompts.jsonl'}")


@main.command()
@_config_options
def query(config_path, simulate, **overrides):
    """Collect raw recommendations (responses.jsonl), cache-first when live."""
    config = _build_config(config_path, simulate, **overrides)
    data = _run_stage(pipeline.prepare, config)
    cells = _run_stage(pipeline.build_cell_prompts, config, data)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cache = None
    if config.provider == "live":
        cache = providers.ResponseCache(out / "response_cache.jsonl")
    try:
        _run_stage(pipeline.run_queries, config, data, cells, cache)
    finally:
        if cache:
            cache.close()
    pipeline.write_responses(cells, out / "responses.jsonl")
    total = sum(len(c.raw) for c in cells)
    click.echo(f"wrote {total} responses -> {out / 'responses.jsonl'}")


@main.command()
@_config_options
def score(config_path, simulate, **overrides):
    """Re-score recorded responses without touching any provider."""
    config = _build_config(config_path, simulate, **overrides)
    data = _run_stage(pipeline.prepare, config)
    cells = _run_stage(pipeline.build_cell_prompts, config, data)
    out = Path(config.out_dir)
    _run_stage(pipeline.replay_queries, cells, out / "responses.jsonl")
    _run_stage(pipeline.match_cells, config, data, cells)
    run_manifest = pipeline.build_run_manifest(config, data)
    scored = _run_stage(pipeline.score_cells, config, data, cells, run_manifest)
    result = _run_stage(pipeline.write_outputs, config, data, cells, scored,
                        run_manifest)
    _echo_table(result)


@main.command()
@_config_options
def run(config_path, simulate, **overrides):
    """Full pipeline: ingest through report."""
    config = _build_config(config_path, simulate, **overrides)
    result = _run_stage(pipeline.run_experiment, config)
    _echo_table(result)


def _echo_table(result) -> None:
    for cell in result.cells:
        r = cell.report
        click.echo(f"{cell.label}: LtC={r.ltc:.3f} MRMC={r.mrmc:.3f} "
                   f"MRR@{r.k}={r.mrr_at_k:.3f} F1@{r.k}={r.f1_at_k:.3f} "
                   f"OOC={r.out_of_catalog_rate:.3f}")
    click.echo(f"outputs in {result.out_dir}")


if __name__ == "__main__":
    main()
