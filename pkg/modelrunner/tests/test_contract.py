"""Round-trip contract tests: files emitted by a randomly initialized tiny
encoder must pass the search pipeline's own loaders, exercised through its
CLI so the two packages stay decoupled at the code level."""

import json
import math
import subprocess
import sys
import time

import pytest

from modelrunner.data import Example
from modelrunner.model import EncoderSpec, make_classifier, make_nli
from modelrunner.slices import compute_slices, emit_slice_logits
from modelrunner.zeroshot import (
    CHALLENGE_SUBLABELS,
    DIRECTION_SUBLABELS,
    emit_zeroshot_scores,
    hypothesis_lists,
    score_example,
)

SPEC = EncoderSpec(vocab_size=1024, hidden=16, layers=1, heads=2, ff_dim=32, max_len=96)


def fixture_examples(n=25):
    out = []
    for i in range(n):
        out.append(
            Example(
                sentence_id=f"fix{i:03d}",
                paper_id=f"paper{i // 5}",
                text=f"However, the impact of treatment {i} on recovery remains unknown.",
                prev_text=None if i % 5 == 0 else "An earlier sentence provides context.",
                next_text=None if i % 5 == 4 else "A later sentence continues the passage.",
            )
        )
    return out


def run_primary_cli(args):
    return subprocess.run(
        [sys.executable, "-m", "gapsearch.cli", *args],
        capture_output=True,
        text=True,
        timeout=60,
    )


class TestSliceLogitContract:
    def test_emitted_file_feeds_primary_combine(self, tmp_path):
        start = time.time()
        model_sentence = make_classifier(SPEC, seed=1)
        model_context = make_classifier(SPEC, seed=2)
        logits_path = tmp_path / "logits.jsonl"
        n = emit_slice_logits(model_sentence, model_context, fixture_examples(), logits_path)
        assert n == 25

        scored_path = tmp_path / "scored.jsonl"
        result = run_primary_cli(
            ["combine", "--logits", str(logits_path), "--strategy", "mean", "--output", str(scored_path)]
        )
        assert result.returncode == 0, result.stderr
        rows = [json.loads(line) for line in scored_path.read_text().splitlines()]
        assert len(rows) == 25
        assert all(0.0 <= rows[0]["probs"][i] <= 1.0 for i in (0, 1))
        assert time.time() - start < 120  # CPU budget, no GPU

    def test_l1_equals_direct_sentence_inference(self):
        model_sentence = make_classifier(SPEC, seed=1)
        model_context = make_classifier(SPEC, seed=2)
        examples = fixture_examples(6)
        rows = compute_slices(model_sentence, model_context, examples)
        from modelrunner.training import predict_logits

        direct = predict_logits(model_sentence, sorted(examples, key=lambda e: e.sentence_id), "sentence")
        for i, row in enumerate(rows):
            assert row["l1"] == [round(float(v), 6) for v in direct[i]]

    def test_sentence_without_context_uses_empty_segments(self):
        model_sentence = make_classifier(SPEC, seed=1)
        model_context = make_classifier(SPEC, seed=2)
        bare = Example(sentence_id="x", paper_id="p", text="no context at all")
        rows = compute_slices(model_sentence, model_context, [bare])
        assert len(rows) == 1
        for key in ("l1", "l2", "l3", "l4"):
            assert all(math.isfinite(v) for v in rows[0][key])

    def test_output_sorted_by_sentence_id(self, tmp_path):
        model = make_classifier(SPEC, seed=1)
        path = tmp_path / "logits.jsonl"
        examples = list(reversed(fixture_examples(5)))
        emit_slice_logits(model, model, examples, path)
        ids = [json.loads(line)["sentence_id"] for line in path.read_text().splitlines()]
        assert ids == sorted(ids)


class TestZeroShotContract:
    def test_sublabel_counts(self):
        model = make_nli(SPEC, seed=3)
        row = score_example(model, fixture_examples(1)[0], "sublabels")
        assert len(row["challenge_sublabel_probs"]) == 8
        assert len(row["direction_sublabel_probs"]) == 6

    def test_concatenated_variant_single_probability(self):
        model = make_nli(SPEC, seed=3)
        row = score_example(model, fixture_examples(1)[0], "concatenated")
        assert len(row["challenge_sublabel_probs"]) == 1
        assert len(row["direction_sublabel_probs"]) == 1
        (key,) = row["challenge_sublabel_probs"]
        assert key == ", ".join(CHALLENGE_SUBLABELS)

    def test_probabilities_in_unit_interval(self):
        model = make_nli(SPEC, seed=3)
        for ex in fixture_examples(5):
            row = score_example(model, ex, "sublabels")
            for probs in (row["challenge_sublabel_probs"], row["direction_sublabel_probs"]):
                assert all(0.0 <= p <= 1.0 for p in probs.values())

    def test_variant_lists(self):
        assert hypothesis_lists("class_name") == (("challenge",), ("direction",))
        template_c, template_d = hypothesis_lists("template")
        assert "This sentence is about a" in template_c[0]
        with pytest.raises(ValueError):
            hypothesis_lists("nonsense")

    def test_emitted_file_feeds_primary_zeroshot_scorer(self, tmp_path):
        model = make_nli(SPEC, seed=3)
        scores_path = tmp_path / "zs.jsonl"
        n = emit_zeroshot_scores(model, fixture_examples(10), "sublabels", scores_path)
        assert n == 10
        pred_path = tmp_path / "pred.jsonl"
        result = run_primary_cli(
            ["score", "--scorer", "zeroshot", "--scores", str(scores_path), "--output", str(pred_path)]
        )
        assert result.returncode == 0, result.stderr
        rows = [json.loads(line) for line in pred_path.read_text().splitlines()]
        assert len(rows) == 10
        assert all(isinstance(r["challenge"], bool) for r in rows)
