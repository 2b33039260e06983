"""Service entry point: `courselens serve --config path.conf`."""

from __future__ import annotations

import sys

import click
import uvicorn

from courselens.api import create_app
from courselens.config import ConfigError, ServiceConfig, load_config
from courselens.embedding import EmbedderConfig, make_embedder
from courselens.gateway import LlmGateway
from courselens.service import CourseService, ServiceSettings
from courselens.store import EventStore


def build_service(config: ServiceConfig) -> CourseService:
    embedder = make_embedder(
        EmbedderConfig(
            backend=config.embed_backend,
            endpoint_url=config.runner_url,
            model_name=config.embed_model,
            dimension=config.embed_dimension,
            mock_seed=config.seed,
        )
    )
    gateway = LlmGateway(runner_url=config.runner_url, model_name=config.chat_model)
    settings = ServiceSettings(
        tau_topic=config.tau_topic,
        tau_faq=config.tau_faq,
        promote_at=config.promote_at,
        serve_cached_first=config.serve_cached_first,
        auto_publish=config.auto_publish,
    )
    return CourseService(
        store=EventStore(config.store_path),
        embedder=embedder,
        gateway=gateway,
        settings=settings,
    )


@click.group()
def main():
    """Course chat mediation and question analytics service."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--mock-embedder", is_flag=True, help="Use the deterministic mock embedding backend.")
@click.option("--seed", type=int, default=None, help="Seed for the mock embedder.")
@click.option("--listen", default=None, help="host:port to bind.")
def serve(config_path, mock_embedder, seed, listen):
    """Start the HTTP service."""
    try:
        config = load_config(
            config_path,
            embed_backend="mock" if mock_embedder else None,
            seed=seed,
            listen=listen,
        )
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(2)
    service = build_service(config)
    app = create_app(service, config)
    host, _, port = config.listen.partition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8080))


if __name__ == "__main__":
    main()
