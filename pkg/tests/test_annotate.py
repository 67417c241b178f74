import pytest
from hypothesis import given, strategies as st

from gapsearch.annotate import (
    AnnotationSet,
    KeywordLexicon,
    SPLIT_NAMES,
    aggregate_labels,
    joint_class,
    label_distribution,
    lemma_tokens,
    lemmatize,
    lexicon_match,
    pairwise_agreement,
    sample_candidates,
    stratified_split,
)
from gapsearch.errors import AlignmentError, ValidationError
from gapsearch.records import LabelPair, SentenceRecord


def sent(text, paper_id="p1", position=0):
    return SentenceRecord.build(paper_id, position, text)


class TestLemmatizer:
    @pytest.mark.parametrize(
        "word,lemma",
        [
            ("limits", "limit"),
            ("limited", "limit"),
            ("limiting", "limit"),
            ("challenges", lemmatize("challenge")),
            ("exploring", lemmatize("explore")),
            ("suggested", "suggest"),
            ("running", "run"),
            ("classes", "class"),
            ("studies", "study"),
            ("hypotheses", "hypothesis"),
            ("was", "be"),
            ("may", "may"),
            ("unknown", "unknown"),
            ("however", "however"),
        ],
    )
    def test_known_forms(self, word, lemma):
        assert lemmatize(word) == lemma

    @given(st.text(alphabet="abcdefghijklmnopqrstuvwxyz", min_size=1, max_size=15))
    def test_idempotent_on_own_output_is_stable(self, word):
        # Not linguistically idempotent, but always deterministic.
        assert lemmatize(word) == lemmatize(word)

    def test_lemma_tokens_strips_edge_punctuation(self):
        assert lemma_tokens("However, results!") == ["however", "result"]


class TestLexicon:
    def test_section_file_parsing(self):
        lex = KeywordLexicon.from_text("[challenge]\nunknown\n\n# comment\n[direction]\nfuture work\n")
        assert "unknown" in lex.challenge_terms
        assert any("work" in t for t in lex.direction_terms)

    def test_term_before_section_rejected(self):
        with pytest.raises(ValidationError):
            KeywordLexicon.from_text("unknown\n[challenge]\n")

    def test_unknown_section_rejected(self):
        with pytest.raises(ValidationError):
            KeywordLexicon.from_text("[nonsense]\nterm\n")

    def test_seed_lexicon_loads(self):
        lex = KeywordLexicon.seed()
        assert lex.challenge_terms and lex.direction_terms


class TestLexiconMatch:
    def test_both_terms_hit(self):
        lex = KeywordLexicon(("however", "unknown"), ())
        hits, _ = lexicon_match(sent("However, results were unknown."), lex)
        assert sorted(hits) == ["however", "unknown"]

    def test_context_blind_match(self):
        lex = KeywordLexicon(("limit",), ())
        hits, _ = lexicon_match(sent("we limit the discussion"), lex)
        assert hits == ["limit"]

    def test_no_shared_lemmas(self):
        lex = KeywordLexicon(("unknown",), ("suggest",))
        assert lexicon_match(sent("The cat sat on the mat."), lex) == ([], [])

    def test_phrase_matches_contiguously(self):
        lex = KeywordLexicon((), ("future work",))
        _, hits = lexicon_match(sent("We leave this to future work."), lex)
        assert len(hits) == 1
        _, hits = lexicon_match(sent("future studies may work"), lex)
        assert hits == []

    def test_inflected_sentence_form_matches_base_term(self):
        lex = KeywordLexicon(("limit",), ("explore",))
        ch, dr = lexicon_match(sent("These limits were explored further."), lex)
        assert ch and dr


class TestSampleCandidates:
    def make_corpus(self, n_keyword=40, n_other=60):
        recs = [sent(f"the results were unknown case {i}", "pk", i) for i in range(n_keyword)]
        recs += [sent(f"the cat sat on mat {i}", "po", i) for i in range(n_other)]
        return recs

    def test_exact_counts_when_pools_suffice(self):
        lex = KeywordLexicon(("unknown",), ())
        corpus = self.make_corpus(n_keyword=80, n_other=40)
        ids = sample_candidates(corpus, lex, 100, 0.25, seed=7)
        keyword_ids = {r.sentence_id for r in corpus[:80]}
        n_kw = sum(1 for i in ids if i in keyword_ids)
        assert n_kw == 75 and len(ids) == 100

    def test_zero_fraction_all_keyword(self):
        lex = KeywordLexicon(("unknown",), ())
        corpus = self.make_corpus(n_keyword=50, n_other=10)
        ids = sample_candidates(corpus, lex, 30, 0.0, seed=1)
        keyword_ids = {r.sentence_id for r in corpus[:50]}
        assert all(i in keyword_ids for i in ids) and len(ids) == 30

    def test_deterministic_given_seed(self):
        lex = KeywordLexicon(("unknown",), ())
        corpus = self.make_corpus()
        a = sample_candidates(corpus, lex, 50, 0.25, seed=3)
        b = sample_candidates(corpus, lex, 50, 0.25, seed=3)
        assert a == b
        c = sample_candidates(corpus, lex, 50, 0.25, seed=4)
        assert a != c

    def test_partial_sample_warns(self):
        lex = KeywordLexicon(("unknown",), ())
        corpus = self.make_corpus(n_keyword=10, n_other=90)
        with pytest.warns(UserWarning):
            ids = sample_candidates(corpus, lex, 80, 0.25, seed=0)
        assert len(ids) == 10 + 20  # whole keyword pool + ceil-complement from other

    def test_overdraw_rejected(self):
        lex = KeywordLexicon(("unknown",), ())
        with pytest.raises(ValidationError):
            sample_candidates(self.make_corpus(10, 10), lex, 21, 0.25, seed=0)


def ann(sentence_id, votes):
    labels = {
        f"a{i}": LabelPair(challenge=bool(c), direction=bool(d)) for i, (c, d) in enumerate(votes)
    }
    return AnnotationSet(sentence_id=sentence_id, labels=labels)


class TestAggregateLabels:
    def test_majority(self):
        gold, (ch_tie, dr_tie) = aggregate_labels(ann("s", [(1, 0), (1, 0), (0, 0)]))
        assert gold.challenge is True and gold.direction is False
        assert not ch_tie and not dr_tie

    def test_even_split_flags_tie(self):
        gold, (ch_tie, dr_tie) = aggregate_labels(ann("s", [(1, 1), (1, 0), (0, 1), (0, 0)]))
        assert ch_tie and dr_tie
        assert gold.challenge is False and gold.direction is False

    def test_single_annotator(self):
        gold, ties = aggregate_labels(ann("s", [(1, 0)]))
        assert gold.challenge is True and ties == (False, False)

    def test_empty_annotator_set_rejected(self):
        with pytest.raises(ValidationError):
            AnnotationSet("s", {})


class TestPairwiseAgreement:
    def worked_example(self):
        a = {f"s{i}": LabelPair(challenge=c, direction=False) for i, c in enumerate([True, True, False, False])}
        b = {f"s{i}": LabelPair(challenge=c, direction=False) for i, c in enumerate([True, False, False, True])}
        return a, b

    def test_worked_four_sentence_example(self):
        a, b = self.worked_example()
        res = pairwise_agreement(a, b)
        # challenge: TP=1, FP=1, FN=1 -> 0.5; direction both-empty -> 1.0
        assert res.challenge_f1 == pytest.approx(0.5)
        assert res.direction_f1 == pytest.approx(1.0)
        assert res.macro_f1 == pytest.approx(0.75)
        assert res.micro_f1 == pytest.approx(0.5)

    def test_identity_scores_one(self):
        a, _ = self.worked_example()
        res = pairwise_agreement(a, a)
        assert res.micro_f1 == res.macro_f1 == res.challenge_f1 == res.direction_f1 == 1.0

    def test_complement_scores_zero(self):
        a = {
            "s0": LabelPair(True, True),
            "s1": LabelPair(False, False),
            "s2": LabelPair(True, False),
        }
        b = {sid: LabelPair(not lp.challenge, not lp.direction) for sid, lp in a.items()}
        res = pairwise_agreement(a, b)
        assert res.challenge_f1 == 0.0 and res.direction_f1 == 0.0

    def test_disjoint_sets_rejected(self):
        a, b = self.worked_example()
        del b["s0"]
        with pytest.raises(AlignmentError):
            pairwise_agreement(a, b)


def synthetic_examples(n_papers=40, sentences_per_paper=5, seed=11):
    import random

    rng = random.Random(seed)
    examples = []
    for p in range(n_papers):
        pid = f"paper{p:03d}"
        for s in range(sentences_per_paper):
            gold = LabelPair(challenge=rng.random() < 0.4, direction=rng.random() < 0.25)
            examples.append((f"{pid}:s{s}", pid, gold))
    return examples


class TestStratifiedSplit:
    def test_paper_disjoint(self):
        examples = synthetic_examples()
        assignment = stratified_split(examples, (0.4, 0.1, 0.5), seed=0)
        split_of_paper = {}
        for sid, pid, _ in examples:
            split = assignment.assignment[sid]
            assert split_of_paper.setdefault(pid, split) == split

    def test_total_partition(self):
        examples = synthetic_examples()
        assignment = stratified_split(examples, seed=0)
        assert set(assignment.assignment) == {sid for sid, _, _ in examples}
        assert set(assignment.assignment.values()) <= set(SPLIT_NAMES)

    def test_deterministic_given_seed(self):
        examples = synthetic_examples()
        a = stratified_split(examples, seed=5).assignment
        b = stratified_split(examples, seed=5).assignment
        assert a == b

    def test_sizes_near_targets(self):
        examples = synthetic_examples(n_papers=60, sentences_per_paper=6)
        assignment = stratified_split(examples, (0.4, 0.1, 0.5), seed=2)
        sizes = {s: 0 for s in SPLIT_NAMES}
        for split in assignment.assignment.values():
            sizes[split] += 1
        n = len(examples)
        assert abs(sizes["train"] - 0.4 * n) <= 0.03 * 0.4 * n + 6
        assert abs(sizes["dev"] - 0.1 * n) <= 0.03 * 0.1 * n + 6
        assert abs(sizes["test"] - 0.5 * n) <= 0.03 * 0.5 * n + 6

    def test_bad_ratios_rejected(self):
        with pytest.raises(ValidationError):
            stratified_split(synthetic_examples(), (0.5, 0.4, 0.4), seed=0)

    def test_too_few_papers_rejected(self):
        examples = [("s1", "p1", LabelPair(False, False)), ("s2", "p2", LabelPair(True, False))]
        with pytest.raises(ValidationError):
            stratified_split(examples, seed=0)


class TestLabelDistribution:
    def test_empty_input_all_zeros(self):
        dist = label_distribution([])
        assert dist == {"total": {"neither": 0, "direction_only": 0, "challenge_only": 0, "both": 0}}

    def test_counts_match_construction(self):
        examples = (
            [(f"n{i}", "p1", LabelPair(False, False)) for i in range(4)]
            + [(f"d{i}", "p1", LabelPair(False, True)) for i in range(4)]
            + [(f"c{i}", "p1", LabelPair(True, False)) for i in range(4)]
            + [(f"b{i}", "p1", LabelPair(True, True)) for i in range(2)]
        )
        dist = label_distribution(examples)
        assert dist["total"] == {"neither": 4, "direction_only": 4, "challenge_only": 4, "both": 2}

    def test_joint_class_mapping(self):
        assert joint_class(LabelPair(False, False)) == "neither"
        assert joint_class(LabelPair(False, True)) == "direction_only"
        assert joint_class(LabelPair(True, False)) == "challenge_only"
        assert joint_class(LabelPair(True, True)) == "both"
