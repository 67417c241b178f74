"""Pipeline command-line interface.

Every stage reads and writes the JSON-lines formats documented in its
module, emits progress to stderr only, and is deterministic given its
``--seed`` where randomness exists.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from . import index as index_store
from . import metrics as metrics_mod
from . import service as service_mod
from .annotate import (
    AnnotationSet,
    KeywordLexicon,
    aggregate_labels,
    label_distribution,
    pairwise_agreement,
    sample_candidates,
    stratified_split,
    SplitAssignment,
)
from .errors import GapSearchError, ValidationError
from .ingest import CleaningConfig, ingest_corpus
from .linking import (
    EntityLink,
    EntityVocabulary,
    KbEntity,
    KbIndex,
    MentionRecord,
    VocabEntry,
    build_entity_vocabulary,
    link_mention,
)
from .records import (
    LabelPair,
    PaperRecord,
    SentenceRecord,
    SliceLogits,
    canonical_json,
    write_jsonl,
)
from .scoring import (
    CombineStrategy,
    PolarityLexicon,
    ScoredSentence,
    ZeroShotScores,
    agreement_stats,
    decide,
    keyword_score,
    polarity_score,
    slice_combine,
    zeroshot_decide,
)


def _fail(stage: str, message: str) -> "click.ClickException":
    return click.ClickException(f"[{stage}] {message}")


def _read_jsonl(path, from_dict, stage: str):
    """Load a whole JSON-lines file, reporting the failing line on error."""
    out = []
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise _fail(stage, f"cannot open {path}: {exc}")
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError, GapSearchError) as exc:
                raise _fail(stage, f"{path} line {lineno}: {exc}")
    return out


def _progress(message: str) -> None:
    click.echo(message, err=True)


def _load_lexicon(path, stage: str) -> KeywordLexicon:
    if path is None:
        return KeywordLexicon.seed()
    try:
        return KeywordLexicon.from_file(path)
    except (OSError, GapSearchError) as exc:
        raise _fail(stage, f"cannot load lexicon {path}: {exc}")


def _label_from_dict(d: dict) -> LabelPair:
    if "gold" in d:
        return LabelPair.from_dict(d["gold"])
    if "decision" in d:
        lp = LabelPair.from_dict(d["decision"])
        if lp.challenge_prob is None and "probs" in d:
            return LabelPair(lp.challenge, lp.direction, d["probs"][0], d["probs"][1])
        return lp
    return LabelPair.from_dict(d)


@click.group()
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="JSON file of per-command option defaults, e.g. "
    '{"index": {"challenge_threshold": 0.99}}; explicit flags override it.',
)
@click.pass_context
def main(ctx: click.Context, config_path) -> None:
    """Challenge/direction extraction, indexing and search pipeline."""
    if config_path:
        try:
            ctx.default_map = json.loads(Path(config_path).read_text("utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise _fail("config", f"cannot load {config_path}: {exc}")


@main.command()
@click.option("--corpus", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--output", type=click.Path(dir_okay=False), required=True)
@click.option("--report", type=click.Path(dir_okay=False), default=None, help="Cleaning report JSON.")
@click.option("--min-tokens", type=int, default=6, show_default=True)
@click.option("--max-tokens", type=int, default=128, show_default=True)
@click.option("--stopword-ratio-min", type=float, default=0.05, show_default=True)
@click.option("--digit-symbol-ratio-max", type=float, default=0.5, show_default=True)
def ingest(corpus, output, report, min_tokens, max_tokens, stopword_ratio_min, digit_symbol_ratio_max):
    """Stream the corpus, filter sentences, emit SentenceRecords with context."""
    try:
        cfg = CleaningConfig(
            min_tokens=min_tokens,
            max_tokens=max_tokens,
            stopword_ratio_min=stopword_ratio_min,
            digit_symbol_ratio_max=digit_symbol_ratio_max,
        )
        with open(corpus, "r", encoding="utf-8") as fh:
            records, cleaning, parser = ingest_corpus(fh, cfg)
    except (OSError, GapSearchError) as exc:
        raise _fail("ingest", str(exc))
    write_jsonl(output, records)
    report_dict = cleaning.to_dict()
    report_dict["malformed_lines"] = parser.skipped
    if report:
        Path(report).write_text(canonical_json(report_dict) + "\n", encoding="utf-8")
    _progress(
        f"ingest: {cleaning.kept} sentences kept, {cleaning.total - cleaning.kept} rejected, "
        f"{parser.skipped} malformed lines skipped"
    )


@main.command()
@click.option("--sentences", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--lexicon", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Keyword lexicon file; defaults to the built-in seed lexicon.")
@click.option("--n-total", type=int, required=True)
@click.option("--nonkeyword-fraction", type=float, default=0.25, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--output", type=click.Path(dir_okay=False), required=True)
def sample(sentences, lexicon, n_total, nonkeyword_fraction, seed, output):
    """Draw annotation candidates with keyword upsampling."""
    lex = _load_lexicon(lexicon, "sample")
    records = _read_jsonl(sentences, SentenceRecord.from_dict, "sample")
    try:
        ids = sample_candidates(records, lex, n_total, nonkeyword_fraction, seed)
    except GapSearchError as exc:
        raise _fail("sample", str(exc))
    write_jsonl(output, ({"sentence_id": sid} for sid in ids))
    _progress(f"sample: {len(ids)} candidates written")


@main.command()
@click.option("--annotations", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--output", type=click.Path(dir_okay=False), required=True)
@click.option("--agreement-report", type=click.Path(dir_okay=False), default=None,
              help="Write pairwise inter-annotator agreement JSON.")
def aggregate(annotations, output, agreement_report):
    """Majority-vote gold labels from per-annotator label sets."""
    raw = _read_jsonl(annotations, lambda d: d, "aggregate")
    rows = []
    sets = []
    for d in raw:
        try:
            ann = AnnotationSet.from_dict(d)
        except (KeyError, GapSearchError) as exc:
            raise _fail("aggregate", f"bad annotation record for {d.get('sentence_id')}: {exc}")
        gold, (ch_tie, dr_tie) = aggregate_labels(ann)
        row = {
            "sentence_id": ann.sentence_id,
            "gold": gold.to_dict(),
            "ties": {"challenge": ch_tie, "direction": dr_tie},
        }
        if "paper_id" in d:
            row["paper_id"] = d["paper_id"]
        rows.append(row)
        sets.append(ann)
    write_jsonl(output, rows)
    ties = sum(1 for r in rows if r["ties"]["challenge"] or r["ties"]["direction"])
    _progress(f"aggregate: {len(rows)} sentences, {ties} with ties needing adjudication")
    if agreement_report:
        annotators = sorted({a for ann in sets for a in ann.labels})
        pairs = {}
        for i, a in enumerate(annotators):
            for b in annotators[i + 1 :]:
                shared = {
                    ann.sentence_id: (ann.labels[a], ann.labels[b])
                    for ann in sets
                    if a in ann.labels and b in ann.labels
                }
                if not shared:
                    continue
                res = pairwise_agreement(
                    {sid: pair[0] for sid, pair in shared.items()},
                    {sid: pair[1] for sid, pair in shared.items()},
                )
                pairs[f"{a}|{b}"] = {"n_sentences": len(shared), **res.to_dict()}
        Path(agreement_report).write_text(canonical_json(pairs) + "\n", encoding="utf-8")
        _progress(f"aggregate: agreement over {len(pairs)} annotator pairs written")


@main.command()
@click.option("--examples", type=click.Path(exists=True, dir_okay=False), required=True,
              help="JSON-lines with sentence_id, paper_id and gold labels.")
@click.option("--ratios", default="0.4,0.1,0.5", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--output", type=click.Path(dir_okay=False), required=True)
@click.option("--distribution", type=click.Path(dir_okay=False), default=None,
              help="Write per-split joint-label distribution JSON.")
def split(examples, ratios, seed, output, distribution):
    """Paper-disjoint stratified train/dev/test split."""
    rows = _read_jsonl(examples, lambda d: d, "split")
    try:
        triples = [(d["sentence_id"], d["paper_id"], _label_from_dict(d)) for d in rows]
    except KeyError as exc:
        raise _fail("split", f"examples need sentence_id, paper_id and labels ({exc} missing)")
    try:
        ratio_tuple = tuple(float(r) for r in ratios.split(","))
        if len(ratio_tuple) != 3:
            raise ValidationError("need exactly three ratios")
        assignment = stratified_split(triples, ratio_tuple, seed)
    except (ValueError, GapSearchError) as exc:
        raise _fail("split", str(exc))
    write_jsonl(
        output,
        ({"sentence_id": sid, "split": assignment.assignment[sid]} for sid, _, _ in triples),
    )
    dist = label_distribution(triples, assignment)
    if distribution:
        Path(distribution).write_text(canonical_json(dist) + "\n", encoding="utf-8")
    sizes = {s: sum(dist[s].values()) for s in ("train", "dev", "test")}
    _progress(f"split: sizes {sizes}")


@main.command()
@click.option("--scorer", type=click.Choice(["keyword", "polarity", "zeroshot", "logits"]), required=True)
@click.option("--sentences", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--lexicon", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--valences", type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON map word->valence for the polarity scorer.")
@click.option("--neg-threshold", type=float, default=-0.1, show_default=True)
@click.option("--pos-threshold", type=float, default=0.1, show_default=True)
@click.option("--scores", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Zero-shot sub-label probability file.")
@click.option("--zeroshot-threshold", type=float, default=0.9, show_default=True)
@click.option("--logits", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--strategy", default="mean", show_default=True)
@click.option("--challenge-threshold", type=float, default=0.5, show_default=True)
@click.option("--direction-threshold", type=float, default=0.5, show_default=True)
@click.option("--output", type=click.Path(dir_okay=False), required=True)
def score(scorer, sentences, lexicon, valences, neg_threshold, pos_threshold, scores,
          zeroshot_threshold, logits, strategy, challenge_threshold, direction_threshold, output):
    """Score sentences with one of the baseline or neural-logit scorers."""
    rows = []
    if scorer in ("keyword", "polarity"):
        if not sentences:
            raise _fail("score", f"--sentences is required for the {scorer} scorer")
        records = _read_jsonl(sentences, SentenceRecord.from_dict, "score")
        if scorer == "keyword":
            lex = _load_lexicon(lexicon, "score")
            for rec in records:
                rows.append({"sentence_id": rec.sentence_id, **keyword_score(rec, lex).to_dict()})
        else:
            plex = PolarityLexicon.built_in()
            if valences:
                try:
                    plex = PolarityLexicon(json.loads(Path(valences).read_text("utf-8")))
                except (OSError, json.JSONDecodeError, GapSearchError) as exc:
                    raise _fail("score", f"bad valence file {valences}: {exc}")
            for rec in records:
                label = polarity_score(rec, plex, neg_threshold, pos_threshold)
                rows.append({"sentence_id": rec.sentence_id, **label.to_dict()})
    elif scorer == "zeroshot":
        if not scores:
            raise _fail("score", "--scores is required for the zeroshot scorer")
        for z in _read_jsonl(scores, ZeroShotScores.from_dict, "score"):
            rows.append({"sentence_id": z.sentence_id, **zeroshot_decide(z, zeroshot_threshold).to_dict()})
    else:
        if not logits:
            raise _fail("score", "--logits is required for the logits scorer")
        try:
            strat = CombineStrategy.parse(strategy)
        except (ValueError, GapSearchError) as exc:
            raise _fail("score", f"bad strategy {strategy!r}: {exc}")
        for sl in _read_jsonl(logits, SliceLogits.from_dict, "score"):
            scored = slice_combine(sl, strat)
            label = decide(scored, challenge_threshold, direction_threshold)
            rows.append({"sentence_id": sl.sentence_id, **label.to_dict()})
    rows.sort(key=lambda r: r["sentence_id"])
    write_jsonl(output, rows)
    _progress(f"score: {len(rows)} sentences scored with {scorer}")


@main.command()
@click.option("--logits", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--strategy", default="mean", show_default=True,
              help="mean | median | majority_vote | logodds_extremize[:alpha]")
@click.option("--slices", "slices_spec", default="1,2,3,4", show_default=True,
              help="Slice subset to combine, e.g. 1,2 for the sentence-model ablation.")
@click.option("--output", type=click.Path(dir_okay=False), required=True)
def combine(logits, strategy, slices_spec, output):
    """Combine per-slice logits into calibrated sentence scores."""
    try:
        strat = CombineStrategy.parse(strategy)
        subset = tuple(int(i) for i in slices_spec.split(","))
    except (ValueError, GapSearchError) as exc:
        raise _fail("combine", str(exc))
    records = _read_jsonl(logits, SliceLogits.from_dict, "combine")
    try:
        scored = [slice_combine(sl, strat, subset) for sl in records]
    except GapSearchError as exc:
        raise _fail("combine", str(exc))
    scored.sort(key=lambda s: s.sentence_id)
    write_jsonl(output, scored)
    _progress(f"combine: {len(scored)} sentences combined with {strategy}")


@main.command()
@click.option("--pred", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--gold", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--output", type=click.Path(dir_okay=False), required=True)
@click.option("--plot", type=click.Path(dir_okay=False), default=None,
              help="Render the PR curves to this image file (svg/png/pdf).")
@click.option("--curve-csv", type=click.Path(dir_okay=False), default=None,
              help="Write PR curve points as CSV.")
@click.option("--sampling-scheme", default=None,
              help="Recorded in the report: how the evaluated sentences were drawn.")
def evaluate(pred, gold, output, plot, curve_csv, sampling_scheme):
    """Per-label P/R/F1 plus AP, AUC-PR and PR curves when scores exist."""
    pred_rows = _read_jsonl(pred, lambda d: d, "evaluate")
    gold_rows = _read_jsonl(gold, lambda d: d, "evaluate")
    try:
        pred_labels = {d["sentence_id"]: _label_from_dict(d) for d in pred_rows}
        gold_labels = {d["sentence_id"]: _label_from_dict(d) for d in gold_rows}
    except KeyError as exc:
        raise _fail("evaluate", f"records must carry sentence_id and labels ({exc})")
    scores = None
    if all(lp.challenge_prob is not None and lp.direction_prob is not None for lp in pred_labels.values()):
        scores = {sid: (lp.challenge_prob, lp.direction_prob) for sid, lp in pred_labels.items()}
    try:
        report = metrics_mod.evaluation_report(pred_labels, gold_labels, scores, sampling_scheme)
    except GapSearchError as exc:
        raise _fail("evaluate", str(exc))
    Path(output).write_text(canonical_json(report) + "\n", encoding="utf-8")
    if curve_csv:
        from .plots import write_pr_csv

        write_pr_csv(report, curve_csv)
    if plot:
        from .plots import save_pr_figure

        save_pr_figure(report, plot)
    for label in ("challenge", "direction"):
        entry = report["labels"][label]
        summary = f"P={entry['precision']:.3f} R={entry['recall']:.3f} F1={entry['f1']:.3f}"
        if "average_precision" in entry:
            summary += f" AP={entry['average_precision']:.3f} AUC-PR={entry['auc_pr']:.3f}"
        _progress(f"evaluate[{label}]: {summary}")


@main.command()
@click.option("--mentions", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--kb", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--threshold", type=float, default=0.9, show_default=True)
@click.option("--use-idf", is_flag=True, default=False,
              help="Weight trigrams by idf computed over KB names and aliases.")
@click.option("--output", type=click.Path(dir_okay=False), required=True)
def link(mentions, kb, threshold, use_idf, output):
    """Ground NER mentions to KB entities by trigram cosine similarity."""
    entities = _read_jsonl(kb, KbEntity.from_dict, "link")
    mention_records = _read_jsonl(mentions, MentionRecord.from_dict, "link")
    try:
        kb_index = KbIndex(entities, use_idf=use_idf)
    except GapSearchError as exc:
        raise _fail("link", str(exc))
    links = []
    for m in mention_records:
        result = link_mention(m, kb_index, threshold)
        if result is not None:
            links.append(result)
    links.sort(key=lambda l: (l.sentence_id, l.entity_id, l.surface))
    write_jsonl(output, links)
    _progress(f"link: {len(links)} of {len(mention_records)} mentions linked")


@main.command()
@click.option("--links", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--kb", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Attach canonical names and aliases from this KB file.")
@click.option("--min-sentences", type=int, default=10, show_default=True)
@click.option("--top-k", type=int, default=30000, show_default=True)
@click.option("--output", type=click.Path(dir_okay=False), required=True)
def vocab(links, kb, min_sentences, top_k, output):
    """Select the entity vocabulary eligible for indexing."""
    link_records = _read_jsonl(links, EntityLink.from_dict, "vocab")
    entities = _read_jsonl(kb, KbEntity.from_dict, "vocab") if kb else None
    vocabulary = build_entity_vocabulary(link_records, min_sentences, top_k, entities)
    write_jsonl(output, vocabulary.entries)
    _progress(f"vocab: {len(vocabulary)} entities kept")


@main.command(name="index")
@click.option("--scored", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--links", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--vocab", "vocab_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--corpus", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--challenge-threshold", type=float, default=0.99, show_default=True)
@click.option("--direction-threshold", type=float, default=0.99, show_default=True)
@click.option("--output", type=click.Path(dir_okay=False), required=True)
def index_cmd(scored, links, vocab_path, corpus, challenge_threshold, direction_threshold, output):
    """Build and persist the immutable search snapshot."""
    scored_records = _read_jsonl(scored, ScoredSentence.from_dict, "index")
    link_records = _read_jsonl(links, EntityLink.from_dict, "index")
    vocab_entries = _read_jsonl(vocab_path, VocabEntry.from_dict, "index")
    papers = _read_jsonl(corpus, PaperRecord.from_dict, "index")
    try:
        snapshot = index_store.build_index(
            scored_records,
            link_records,
            EntityVocabulary(entries=tuple(vocab_entries)),
            papers,
            challenge_threshold,
            direction_threshold,
        )
        index_store.persist(snapshot, output)
    except GapSearchError as exc:
        raise _fail("index", str(exc))
    counts = snapshot.manifest["counts"]
    _progress(
        f"index: {counts['sentences']} sentences, {counts['entities']} entities -> {output}"
    )


@main.command()
@click.option("--snapshot", type=click.Path(dir_okay=False), default=None,
              help="Snapshot path; defaults to $SNAPSHOT_PATH.")
@click.option("--bind", default=None, help="host:port; defaults to $BIND_ADDR or 127.0.0.1:8000.")
@click.option("--cors-origin", multiple=True, help="Allowed CORS origin (repeatable).")
def serve(snapshot, bind, cors_origin):
    """Serve a snapshot over the JSON query API."""
    snapshot = snapshot or os.environ.get("SNAPSHOT_PATH")
    bind = bind or os.environ.get("BIND_ADDR", "127.0.0.1:8000")
    if not snapshot:
        raise _fail("serve", "no snapshot: pass --snapshot or set SNAPSHOT_PATH")
    if not Path(snapshot).exists():
        raise _fail("serve", f"snapshot {snapshot} does not exist")
    try:
        service_mod.serve(snapshot, bind, service_mod.ServiceConfig(cors_origins=tuple(cors_origin)))
    except GapSearchError as exc:
        raise _fail("serve", str(exc))


@main.command()
@click.option("--snapshot", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--logits", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Report the per-label slice agreement histogram for a logits file.")
@click.option("--output", type=click.Path(dir_okay=False), default=None,
              help="Write the report here instead of stdout.")
def stats(snapshot, logits, output):
    """Inspect a snapshot manifest or slice-agreement statistics."""
    if (snapshot is None) == (logits is None):
        raise _fail("stats", "pass exactly one of --snapshot or --logits")
    if snapshot:
        try:
            idx = index_store.load(snapshot)
        except GapSearchError as exc:
            raise _fail("stats", str(exc))
        body = idx.manifest
    else:
        records = _read_jsonl(logits, SliceLogits.from_dict, "stats")
        body = agreement_stats(records)
    text = canonical_json(body) + "\n"
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


if __name__ == "__main__":
    main()
