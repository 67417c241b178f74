"""Command line for training encoders and emitting the wire-format files."""

from __future__ import annotations

import json
from pathlib import Path

import click

from .data import dataset_fingerprint, load_examples
from .model import EncoderSpec, load_artifact, make_classifier, make_nli, save_artifact
from .slices import emit_slice_logits
from .training import CONTEXT_MODES, TrainConfig, train_and_save
from .zeroshot import VARIANTS, emit_zeroshot_scores


def _spec_options(fn):
    fn = click.option("--vocab-size", type=int, default=2048, show_default=True)(fn)
    fn = click.option("--hidden", type=int, default=32, show_default=True)(fn)
    fn = click.option("--layers", type=int, default=2, show_default=True)(fn)
    fn = click.option("--max-len", type=int, default=256, show_default=True,
                      help="Maximum sequence length for context inputs.")(fn)
    return fn


def _make_spec(vocab_size, hidden, layers, max_len, dropout=0.3) -> EncoderSpec:
    return EncoderSpec(vocab_size=vocab_size, hidden=hidden, layers=layers, max_len=max_len, dropout=dropout)


def _write_manifest(path, body: dict) -> None:
    Path(path).write_text(json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8")


@click.group()
def main() -> None:
    """Train tiny transformer encoders and emit slice-logit / zero-shot files."""


@main.command()
@click.option("--train", "train_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--dev", "dev_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--context", type=click.Choice(CONTEXT_MODES), default="sentence", show_default=True)
@click.option("--batch-sizes", default="8,16,32", show_default=True)
@click.option("--learning-rates", default="1e-5,2e-5,3e-5,5e-5", show_default=True)
@click.option("--max-epochs", type=int, default=25, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--output", type=click.Path(dir_okay=False), required=True)
@click.option("--log", "log_path", type=click.Path(dir_okay=False), default=None,
              help="Write the full grid-search log JSON here.")
@_spec_options
def train(train_path, dev_path, context, batch_sizes, learning_rates, max_epochs, seed,
          output, log_path, vocab_size, hidden, layers, max_len):
    """Grid-search fine-tune one encoder and save the best checkpoint."""
    cfg = TrainConfig(
        batch_sizes=tuple(int(b) for b in batch_sizes.split(",")),
        learning_rates=tuple(float(lr) for lr in learning_rates.split(",")),
        max_epochs=max_epochs,
        seed=seed,
        spec=_make_spec(vocab_size, hidden, layers, max_len),
    )
    try:
        train_examples = load_examples(train_path)
        dev_examples = load_examples(dev_path)
        log = train_and_save(train_examples, dev_examples, cfg, context, output, log_path)
    except ValueError as exc:
        raise click.ClickException(f"[train] {exc}")
    selected = log["selected"]
    click.echo(
        f"train: best dev F1 {selected['dev_f1']:.3f} at batch={selected['batch_size']} "
        f"lr={selected['learning_rate']} epoch={selected['epoch']}",
        err=True,
    )


@main.command()
@click.option("--kind", type=click.Choice(["classifier", "nli"]), default="classifier", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--output", type=click.Path(dir_okay=False), required=True)
@_spec_options
def init(kind, seed, output, vocab_size, hidden, layers, max_len):
    """Save a randomly initialized encoder (for contract tests and smoke runs)."""
    spec = _make_spec(vocab_size, hidden, layers, max_len)
    model = make_classifier(spec, seed) if kind == "classifier" else make_nli(spec, seed)
    save_artifact(model, output, extra={"initialized": "random", "seed": seed, "kind": kind})
    click.echo(f"init: wrote untrained {kind} to {output}", err=True)


@main.command(name="emit-logits")
@click.option("--model-sentence", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--model-context", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--dataset", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--output", type=click.Path(dir_okay=False), required=True)
@click.option("--manifest", type=click.Path(dir_okay=False), default=None)
def emit_logits(model_sentence, model_context, dataset, output, manifest):
    """Write the four-slice logit file for every dataset sentence."""
    ms, extra_s = load_artifact(model_sentence)
    mc, extra_c = load_artifact(model_context)
    try:
        examples = load_examples(dataset)
    except ValueError as exc:
        raise click.ClickException(f"[emit-logits] {exc}")
    n = emit_slice_logits(ms, mc, examples, output)
    if manifest:
        _write_manifest(
            manifest,
            {
                "encoder": "tiny-transformer",
                "sentence_model": {"path": str(model_sentence), **extra_s.get("log", {})},
                "context_model": {"path": str(model_context), **extra_c.get("log", {})},
                "dataset_fingerprint": dataset_fingerprint(dataset),
                "sentences": n,
            },
        )
    click.echo(f"emit-logits: {n} sentences -> {output}", err=True)


@main.command(name="emit-zeroshot")
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="NLI checkpoint; omitted -> randomly initialized with --seed.")
@click.option("--dataset", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--variant", type=click.Choice(VARIANTS), default="sublabels", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--output", type=click.Path(dir_okay=False), required=True)
@click.option("--manifest", type=click.Path(dir_okay=False), default=None)
@_spec_options
def emit_zeroshot(model_path, dataset, variant, seed, output, manifest,
                  vocab_size, hidden, layers, max_len):
    """Write per-sub-label entailment probabilities for every sentence."""
    if model_path:
        model, _ = load_artifact(model_path)
    else:
        model = make_nli(_make_spec(vocab_size, hidden, layers, max_len), seed)
    try:
        examples = load_examples(dataset)
    except ValueError as exc:
        raise click.ClickException(f"[emit-zeroshot] {exc}")
    n = emit_zeroshot_scores(model, examples, variant, output)
    if manifest:
        _write_manifest(
            manifest,
            {
                "encoder": "tiny-transformer-nli",
                "variant": variant,
                "dataset_fingerprint": dataset_fingerprint(dataset),
                "sentences": n,
            },
        )
    click.echo(f"emit-zeroshot: {n} sentences ({variant}) -> {output}", err=True)


if __name__ == "__main__":
    main()
