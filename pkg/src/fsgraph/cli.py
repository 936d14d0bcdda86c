"""Command-line driver: stage subcommands, evaluation, QA, and the
annotation server. Exit codes: 0 ok, 2 config error, 3 stage failure."""
from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from .config import PipelineConfig, load_config
from .errors import ConfigError, FsgraphError
from .graph import from_json, qa_query
from .jsonutil import read_json, write_json
from .pipeline import STAGES, ScenePipeline, evaluate_workspace, make_model_client
from .pipeline import run as run_stages

EXIT_CONFIG = 2
EXIT_STAGE = 3

logger = logging.getLogger(__name__)


def _load(config_path: str) -> PipelineConfig:
    try:
        return load_config(config_path)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)


def _run(target: str, config_path: str) -> None:
    cfg = _load(config_path)
    try:
        run_stages(target, cfg)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except FsgraphError as exc:
        click.echo(f"stage failure: {exc}", err=True)
        sys.exit(EXIT_STAGE)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool):
    """Construct and evaluate functional 3D scene graphs."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _stage_command(stage: str):
    @main.command(name=stage, help=f"Run the {stage} stage.")
    @click.option("-c", "--config", "config_path", required=True, type=click.Path())
    def _cmd(config_path: str, _stage=stage):
        _run(_stage, config_path)
    return _cmd


for _stage in STAGES:
    _stage_command(_stage)


@main.command(name="all", help="Run every stage in pipeline order.")
@click.option("-c", "--config", "config_path", required=True, type=click.Path())
def run_all(config_path: str):
    _run("all", config_path)


@main.command(name="run", help="Run STAGE (or 'all').")
@click.argument("stage")
@click.option("-c", "--config", "config_path", required=True, type=click.Path())
def run_cmd(stage: str, config_path: str):
    _run(stage, config_path)


@main.command(name="eval", help="Score predictions against ground-truth annotations.")
@click.option("-c", "--config", "config_path", required=True, type=click.Path())
@click.option("--gt-dir", type=click.Path(), default=None,
              help="Ground-truth directory (default: <output_dir>/gt).")
def eval_cmd(config_path: str, gt_dir: str | None):
    cfg = _load(config_path)
    try:
        result = evaluate_workspace(cfg, Path(gt_dir) if gt_dir else None)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except FsgraphError as exc:
        click.echo(f"stage failure: {exc}", err=True)
        sys.exit(EXIT_STAGE)
    click.echo(result["overall"].table())
    click.echo(f"report written to {cfg.output_dir / 'report.json'}")


@main.command(name="qa", help="Answer an inventory question about a scene graph.")
@click.argument("question")
@click.option("-c", "--config", "config_path", required=True, type=click.Path())
@click.option("--scene", "scene_id", required=True)
def qa_cmd(question: str, config_path: str, scene_id: str):
    cfg = _load(config_path)
    graph_path = cfg.output_dir / scene_id / "graph.json"
    if not graph_path.is_file():
        click.echo(f"stage failure: no graph.json for scene {scene_id}", err=True)
        sys.exit(EXIT_STAGE)
    try:
        llm = make_model_client(cfg, "llm")
        result = qa_query(from_json(graph_path.read_text()), question, llm)
    except FsgraphError as exc:
        click.echo(f"stage failure: {exc}", err=True)
        sys.exit(EXIT_STAGE)
    log_path = cfg.output_dir / scene_id / "qa_log.json"
    log = read_json(log_path) if log_path.is_file() else {"entries": []}
    log["entries"].append({"question": question, "prompt": result.prompt,
                           "answer": result.answer})
    write_json(log_path, log)
    click.echo(result.answer)


@main.command(name="serve", help="Serve the annotation/inspection HTTP API.")
@click.option("-c", "--config", "config_path", required=True, type=click.Path())
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8008, type=int)
@click.option("--gt-dir", type=click.Path(), default=None)
def serve_cmd(config_path: str, host: str, port: int, gt_dir: str | None):
    from .server import serve

    cfg = _load(config_path)
    serve(cfg, host=host, port=port, gt_dir=Path(gt_dir) if gt_dir else None)


@main.command(name="fixtures-record",
              help="Run the pipeline recording live backend responses as replay fixtures.")
@click.option("-c", "--config", "config_path", required=True, type=click.Path())
@click.option("--into", "fixtures_dir", required=True, type=click.Path(),
              help="Directory to write the recorded fixtures to.")
def fixtures_record(config_path: str, fixtures_dir: str):
    cfg = _load(config_path)
    cfg.cache_dir = Path(fixtures_dir)
    try:
        run_stages("all", cfg)
    except FsgraphError as exc:
        click.echo(f"stage failure: {exc}", err=True)
        sys.exit(EXIT_STAGE)
    click.echo(f"fixtures recorded under {fixtures_dir}")


if __name__ == "__main__":
    main()
