"""Command line entry points: ingest, query, ask, feedback, eval, serve,
and synthetic corpus generation."""

from __future__ import annotations

import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

import click

from .config import EngineConfig
from .eval_harness import evaluate_profiles, format_table, load_qrels, write_report_files
from .storage import ingest_to_index, load_engine
from .synthetic import write_demo_corpus, write_table_benchmark_corpus

DEFAULT_INDEX = os.environ.get("ENGINE_INDEX", "./index")


def _load_config(path: str | None) -> EngineConfig:
    if path:
        return EngineConfig.from_file(path)
    return EngineConfig()


@click.group()
def main():
    """Hybrid retrieval engine for enterprise text and tables."""


@main.command()
@click.option("--corpus", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def ingest(corpus, config_path, out_dir):
    """Ingest a corpus directory and build the index."""
    config = _load_config(config_path)
    count, version = ingest_to_index(corpus, config, out_dir)
    click.echo(f"ingested {count} chunks (index_version={version}) -> {out_dir}")


@main.command()
@click.option("--index", "index_dir", default=DEFAULT_INDEX, type=click.Path(exists=True, file_okay=False))
@click.option("--profile", default="advanced")
@click.option("--q", "query_text", required=True)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
def query(index_dir, profile, query_text, config_path):
    """Print the scored candidate pool for a query as JSON lines."""
    engine = load_engine(index_dir, _load_config(config_path) if config_path else None)
    pool = engine.retrieve_pool(query_text, profile)
    for cand in pool:
        click.echo(json.dumps(asdict(cand)))


@main.command()
@click.option("--index", "index_dir", default=DEFAULT_INDEX, type=click.Path(exists=True, file_okay=False))
@click.option("--profile", default="advanced")
@click.option("--session", "session_id", default="cli")
@click.option("--q", "query_text", required=True)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
def ask(index_dir, profile, session_id, query_text, config_path):
    """Answer a query with the full grounded pipeline."""
    engine = load_engine(index_dir, _load_config(config_path) if config_path else None)
    answer = engine.answer_query(query_text, session_id, profile)
    click.echo(f"turn: {answer.turn_id}")
    if answer.reformulated:
        click.echo(f"refined query: {answer.final_query}")
    click.echo(answer.answer_text)
    if answer.summary:
        click.echo(answer.summary)
    if answer.citations:
        click.echo(f"citations: {', '.join(answer.citations)}")


@main.command()
@click.option("--index", "index_dir", default=DEFAULT_INDEX, type=click.Path(exists=True, file_okay=False))
@click.option("--session", "session_id", required=True)
@click.option("--turn", "turn_id", required=True)
@click.option("--verdict", type=click.Choice(["up", "down"]), required=True)
@click.option("--profile", default="advanced")
def feedback(index_dir, session_id, turn_id, verdict, profile):
    """Log thumbs feedback; a down verdict retries with an expanded query."""
    engine = load_engine(index_dir)
    outcome = engine.handle_feedback(session_id, turn_id, verdict, profile)
    if outcome.retried and outcome.new_answer:
        click.echo(f"retried with: {outcome.new_answer.final_query}")
        click.echo(outcome.new_answer.answer_text)
    elif outcome.budget_exhausted:
        click.echo("feedback logged; retry budget exhausted for this session")
    else:
        click.echo("feedback logged")


@main.command("eval")
@click.option("--index", "index_dir", default=DEFAULT_INDEX, type=click.Path(exists=True, file_okay=False))
@click.option("--qrels", "qrels_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--profiles", default="naive,advanced")
@click.option("--out", "out_dir", type=click.Path(file_okay=False))
@click.option("--k", default=5, show_default=True)
def eval_cmd(index_dir, qrels_path, profiles, out_dir, k):
    """Compare retrieval profiles on a judged query set."""
    engine = load_engine(index_dir)
    qrels = load_qrels(qrels_path)
    names = [p.strip() for p in profiles.split(",") if p.strip()]
    report = evaluate_profiles(engine, qrels, names, k=k)
    click.echo(format_table(report))
    if out_dir:
        paths = write_report_files(report, out_dir)
        click.echo(
            f"wrote {paths['json'].name}, {paths['tsv'].name}, {paths['png'].name} -> {out_dir}"
        )


@main.command()
@click.option("--index", "index_dir", default=DEFAULT_INDEX, type=click.Path(exists=True, file_okay=False))
@click.option("--addr", default="127.0.0.1:8080", show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
def serve(index_dir, addr, config_path):
    """Serve the /v1 HTTP API over a persisted index."""
    from .service_api import serve as run_server

    run_server(index_dir, addr, _load_config(config_path) if config_path else None)


@main.command()
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--kind", type=click.Choice(["demo", "tables"]), default="demo", show_default=True)
@click.option("--qrels", "qrels_path", type=click.Path(dir_okay=False))
@click.option("--seed", default=7, show_default=True)
def synth(out_dir, kind, qrels_path, seed):
    """Generate a synthetic corpus for demos and benchmarks."""
    if kind == "demo":
        write_demo_corpus(out_dir)
        click.echo(f"wrote demo corpus -> {out_dir}")
    else:
        _, n_queries = write_table_benchmark_corpus(out_dir, qrels_path, seed=seed)
        click.echo(f"wrote table benchmark corpus ({n_queries} queries) -> {out_dir}")
        if qrels_path:
            click.echo(f"wrote qrels -> {qrels_path}")


if __name__ == "__main__":
    sys.exit(main())
