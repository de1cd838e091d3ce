"""Sidecar command line: make-checkpoint, serve, finetune."""

from __future__ import annotations

import logging

import click

from .model import make_checkpoint
from .serving import ServeConfig, create_app
from .training import TrainConfig, finetune


@click.group()
def main():
    """Generation/scoring service and fine-tuning companion."""
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")


@main.command("make-checkpoint")
@click.argument("out_dir", type=click.Path())
@click.option("--seed", type=int, default=0, show_default=True)
@click.option(
    "--corpus",
    "corpus_files",
    multiple=True,
    type=click.Path(exists=True),
    help="Files whose vocabulary the tokenizer should cover. Repeatable.",
)
def cmd_make_checkpoint(out_dir, seed, corpus_files):
    """Build the deterministic tiny default checkpoint."""
    path = make_checkpoint(out_dir, seed=seed, corpus_files=tuple(corpus_files))
    click.echo(f"checkpoint written to {path}")


@main.command("serve")
@click.argument("checkpoint", type=click.Path(exists=True))
@click.option("--port", type=int, default=8321, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--beam-size", type=int, default=100, show_default=True)
def cmd_serve(checkpoint, port, host, beam_size):
    """Serve /generate and /score over HTTP."""
    import uvicorn

    config = ServeConfig(checkpoint=checkpoint, beam_size=beam_size, port=port)
    uvicorn.run(create_app(config), host=host, port=port)


@main.command("finetune")
@click.argument("pairs_path", type=click.Path(exists=True))
@click.argument("base_checkpoint", type=click.Path(exists=True))
@click.argument("out_dir", type=click.Path())
@click.option("--learning-rate", type=float, default=3e-4, show_default=True)
@click.option("--dropout", type=float, default=0.10, show_default=True)
@click.option("--epochs", type=int, default=4, show_default=True)
@click.option("--batch-size", type=int, default=6, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def cmd_finetune(pairs_path, base_checkpoint, out_dir, learning_rate, dropout, epochs, batch_size, seed):
    """Fine-tune on a source/target pair TSV."""
    config = TrainConfig(
        pairs_path=pairs_path,
        base_checkpoint=base_checkpoint,
        out_dir=out_dir,
        learning_rate=learning_rate,
        dropout=dropout,
        epochs=epochs,
        batch_size=batch_size,
        seed=seed,
    )
    path, losses = finetune(config)
    if losses:
        click.echo(f"{len(losses)} steps, first loss {losses[0]:.4f}, last {losses[-1]:.4f}")
    click.echo(f"checkpoint written to {path}")


if __name__ == "__main__":
    main()
