"""Acceptance suite: one test per release criterion, each checked against an
independent oracle or an exactly constructed fixture.  The conftest hook
prints a PASS/FAIL line per criterion after the run."""

import io
import json
import math
import os
import random
import statistics
import time
from fractions import Fraction

import pytest

from gapsearch.annotate import (
    KeywordLexicon,
    SPLIT_NAMES,
    label_distribution,
    pairwise_agreement,
    sample_candidates,
    stratified_split,
)
from gapsearch.index import autocomplete, build_index, cooccurring, load, persist, query
from gapsearch.ingest import ingest_corpus
from gapsearch.linking import (
    EntityLink,
    KbEntity,
    KbIndex,
    build_entity_vocabulary,
    cosine,
    link_mention,
    MentionRecord,
    trigram_profile,
)
from gapsearch.metrics import average_precision, prf
from gapsearch.records import (
    LabelPair,
    SentenceRecord,
    SliceLogits,
    canonical_json,
    make_sentence_id,
)
from gapsearch.scoring import (
    CHALLENGE_SUBLABELS,
    DIRECTION_SUBLABELS,
    CombineStrategy,
    ZeroShotScores,
    slice_combine,
    zeroshot_decide,
)
from gapsearch.service import SearchRequest, handle_search


# --------------------------------------------------------------------------
# Slice-Combine correctness
# --------------------------------------------------------------------------


def test_slice_combine_oracle_equivalence():
    """1,000 random slice records: mean/median match a brute-force oracle to
    1e-9, all-equal identity holds exactly, and the batch runs in under 1s."""
    rng = random.Random(1234)
    records = [
        SliceLogits(
            f"s{i:04d}",
            *[(rng.uniform(-8, 8), rng.uniform(-8, 8)) for _ in range(4)],
        )
        for i in range(1000)
    ]
    start = time.perf_counter()
    combined_mean = [slice_combine(r, CombineStrategy("mean")) for r in records]
    combined_median = [slice_combine(r, CombineStrategy("median")) for r in records]
    elapsed = time.perf_counter() - start
    for rec, m, md in zip(records, combined_mean, combined_median):
        for axis in (0, 1):
            values = [pair[axis] for pair in rec.slices]
            oracle_mean = math.fsum(values) / 4.0
            mid = sorted(values)
            oracle_median = (mid[1] + mid[2]) / 2.0
            assert abs(m.combined_logits[axis] - oracle_mean) <= 1e-9
            assert abs(md.combined_logits[axis] - oracle_median) <= 1e-9
    for value in (-3.25, 0.0, 1.5):
        rec = SliceLogits("x", *[(value, -value)] * 4)
        for kind in ("mean", "median", "majority_vote"):
            out = slice_combine(rec, CombineStrategy(kind))
            assert out.combined_logits == (value, -value)
    assert elapsed < 1.0, f"slice combination took {elapsed:.3f}s"


# --------------------------------------------------------------------------
# Metric oracle equivalence
# --------------------------------------------------------------------------


def _brute_force_ap(scores, gold):
    items = sorted(scores, key=lambda sid: (-scores[sid], sid))
    n_pos = sum(1 for sid in gold if gold[sid])
    total = Fraction(0)
    for sid in items:
        if not gold[sid]:
            continue
        rank = items.index(sid) + 1
        hits = sum(1 for other in items[:rank] if gold[other])
        total += Fraction(hits, rank)
    return float(total / n_pos)


def test_metric_oracle_equivalence():
    rng = random.Random(99)
    for trial in range(200):
        n = rng.randint(1, 12)
        scores = {f"s{i}": rng.choice([0.1, 0.3, 0.5, 0.7, 0.9]) for i in range(n)}
        gold = {f"s{i}": rng.random() < 0.5 for i in range(n)}
        if not any(gold.values()):
            gold[f"s{rng.randrange(n)}"] = True
        assert average_precision(scores, gold) == _brute_force_ap(scores, gold), f"trial {trial}"

    # prf against hand-built confusion counts, 50 constructed cases
    for case in range(50):
        case_rng = random.Random(1000 + case)
        n = case_rng.randint(1, 20)
        if case == 0:  # zero predicted positives
            pred_pos, gold_pos = set(), set(range(n))
        elif case == 1:  # zero gold positives
            pred_pos, gold_pos = set(range(n)), set()
        elif case == 2:  # nothing positive anywhere
            pred_pos, gold_pos = set(), set()
        else:
            pred_pos = {i for i in range(n) if case_rng.random() < 0.5}
            gold_pos = {i for i in range(n) if case_rng.random() < 0.5}
        pred = {f"s{i}": LabelPair(i in pred_pos, False) for i in range(n)}
        gold = {f"s{i}": LabelPair(i in gold_pos, False) for i in range(n)}
        tp = len(pred_pos & gold_pos)
        fp = len(pred_pos - gold_pos)
        fn = len(gold_pos - pred_pos)
        expect_p = tp / (tp + fp) if tp + fp else 0.0
        expect_r = tp / (tp + fn) if tp + fn else 0.0
        expect_f1 = (
            2 * expect_p * expect_r / (expect_p + expect_r) if expect_p + expect_r else 0.0
        )
        assert prf(pred, gold, "challenge") == (expect_p, expect_r, expect_f1), f"case {case}"


# --------------------------------------------------------------------------
# Agreement tooling
# --------------------------------------------------------------------------


def test_agreement_worked_example():
    a = {f"s{i}": LabelPair(c, False) for i, c in enumerate([True, True, False, False])}
    b = {f"s{i}": LabelPair(c, False) for i, c in enumerate([True, False, False, True])}
    res = pairwise_agreement(a, b)
    assert res.challenge_f1 == 0.5
    assert res.direction_f1 == 1.0
    assert res.macro_f1 == 0.75
    assert res.micro_f1 == 0.5
    identical = pairwise_agreement(a, a)
    assert (
        identical.micro_f1
        == identical.macro_f1
        == identical.challenge_f1
        == identical.direction_f1
        == 1.0
    )


# --------------------------------------------------------------------------
# Split integrity
# --------------------------------------------------------------------------


def _split_corpus(seed=2021):
    """1,000 sentences over 120 papers with Table-1-like label proportions."""
    rng = random.Random(seed)
    sizes = []
    total = 0
    while len(sizes) < 119:
        size = rng.randint(4, 13)
        sizes.append(size)
        total += size
    last = 1000 - total
    while not (3 <= last <= 14):
        i = rng.randrange(len(sizes))
        delta = rng.choice([-1, 1])
        if 4 <= sizes[i] + delta <= 13:
            sizes[i] += delta
            last -= delta
    sizes.append(last)
    examples = []
    for p, size in enumerate(sizes):
        pid = f"paper{p:03d}"
        for s in range(size):
            r = rng.random()
            if r < 0.516:
                c, d = False, False
            elif r < 0.603:
                c, d = False, True
            elif r < 0.860:
                c, d = True, False
            else:
                c, d = True, True
            examples.append((f"{pid}:s{s}", pid, LabelPair(c, d)))
    return examples


def test_split_integrity():
    examples = _split_corpus()
    assert len(examples) == 1000
    assert len({pid for _, pid, _ in examples}) == 120

    assignment = stratified_split(examples, (0.4, 0.1, 0.5), seed=7)

    # zero paper overlap (hard constraint)
    paper_split = {}
    for sid, pid, _ in examples:
        split = assignment.assignment[sid]
        assert paper_split.setdefault(pid, split) == split

    dist = label_distribution(examples, assignment)
    sizes = {s: sum(dist[s].values()) for s in SPLIT_NAMES}
    for split, target in (("train", 400), ("dev", 100), ("test", 500)):
        assert abs(sizes[split] - target) <= 0.03 * target, f"{split}: {sizes[split]} vs {target}"

    total = dist["total"]
    n = sum(total.values())
    for split in SPLIT_NAMES:
        split_n = sum(dist[split].values())
        for cls, count in total.items():
            assert abs(dist[split][cls] / split_n - count / n) <= 0.05, (split, cls)

    again = stratified_split(examples, (0.4, 0.1, 0.5), seed=7)
    assert again.assignment == assignment.assignment


# --------------------------------------------------------------------------
# Sampler contract
# --------------------------------------------------------------------------


def test_sampler_contract():
    lex = KeywordLexicon(("unknown",), ())
    keyword = [
        SentenceRecord.build("pk", i, f"the result was unknown in case {i}") for i in range(400)
    ]
    other = [SentenceRecord.build("po", i, f"the cat sat on mat {i}") for i in range(400)]
    keyword_ids = {r.sentence_id for r in keyword}
    for n_total in (100, 101, 17, 3):
        ids = sample_candidates(keyword + other, lex, n_total, 0.25, seed=5)
        drawn_kw = sum(1 for sid in ids if sid in keyword_ids)
        assert drawn_kw == math.ceil(0.75 * n_total), n_total
        assert len(ids) == n_total
        assert ids == sample_candidates(keyword + other, lex, n_total, 0.25, seed=5)


# --------------------------------------------------------------------------
# Entity linker
# --------------------------------------------------------------------------


def test_entity_linker_criteria():
    kb = [
        KbEntity("D0001", "COVID-19", ("covid", "SARS-CoV-2 infection")),
        KbEntity("D0002", "Remdesivir", ("GS-5734",)),
        KbEntity("D0003", "Lopinavir", ()),
    ]
    index = KbIndex(kb)

    exact = link_mention(
        MentionRecord("s1", "GS-5734", (0, 7), "m"), index, threshold=0.9
    )
    assert exact is not None and exact.similarity == pytest.approx(1.0)

    worked = cosine(trigram_profile("abcd", pad=False), trigram_profile("abcde", pad=False))
    assert abs(worked - 0.8165) <= 1e-4

    _, sim = index.best_match("lopinavire")
    assert 0.80 < sim < 0.90
    assert link_mention(MentionRecord("s1", "lopinavire", (0, 10), "m"), index, 0.9) is None

    links = []
    for eid, n in (("E1", 9), ("E2", 10), ("E3", 25), ("E4", 11), ("E5", 40)):
        links += [EntityLink(f"{eid}-s{i}", eid, "x", 0.95) for i in range(n)]
    vocab = build_entity_vocabulary(links, min_sentences=10, top_k=30000)
    assert "E1" not in vocab
    assert {e.entity_id for e in vocab.entries} == {"E2", "E3", "E4", "E5"}
    capped = build_entity_vocabulary(links, min_sentences=10, top_k=2)
    assert [e.entity_id for e in capped.entries] == ["E5", "E3"]
    assert all(e.sentence_count >= 10 for e in capped.entries)


# --------------------------------------------------------------------------
# Index/search end to end
# --------------------------------------------------------------------------

_FIXTURE_ENTITIES = [
    ("E%02d" % i, name)
    for i, name in enumerate(
        [
            "alphavirin", "betacilin", "gammazol", "deltamab", "epsiline",
            "zetaprexin", "etavastat", "thetacort", "iotamycin", "kappafen",
        ]
    )
]


def _e2e_fixture():
    rng = random.Random(77)
    template = (
        "However, the effect of {ent} on patient outcomes in group {i} remains under active study."
    )
    papers = []
    mentions_spec = []  # (paper_id, position, [entity names])
    for p in range(50):
        pid = f"paper{p:03d}"
        sentences = []
        for s in range(10):
            picked = rng.sample(_FIXTURE_ENTITIES, rng.choice([1, 1, 2, 3]))
            names = " and ".join(name for _, name in picked)
            sentences.append(template.format(ent=names, i=f"{p}-{s}"))
            mentions_spec.append((pid, s, [name for _, name in picked]))
        papers.append(
            {
                "paper_id": pid,
                "title": f"Study {p}",
                "date": "2021-06-15",
                "url": f"https://example.org/{pid}",
                "journal": "Synthetic Journal",
                "sentences": sentences,
            }
        )
    corpus_bytes = "\n".join(canonical_json(p) for p in papers) + "\n"
    return corpus_bytes, mentions_spec


def test_index_search_end_to_end(tmp_path):
    corpus_bytes, mentions_spec = _e2e_fixture()
    rng = random.Random(4040)

    start = time.perf_counter()

    # ingest
    sentence_records, report, _ = ingest_corpus(io.StringIO(corpus_bytes))
    assert report.kept == 500

    # inject probabilities through the real combine path
    def logit(p):
        return math.log(p / (1.0 - p))

    scored = []
    injected = {}
    for rec in sentence_records:
        cp = rng.choice([0.9995, 0.995, 0.992, 0.8, 0.5, 0.2])
        dp = rng.choice([0.999, 0.991, 0.7, 0.4, 0.1])
        injected[rec.sentence_id] = (cp, dp)
        sl = SliceLogits(rec.sentence_id, *[(logit(cp), logit(dp))] * 4)
        scored.append(slice_combine(sl, CombineStrategy("mean")))

    # entity links via the real linker (surfaces equal KB aliases)
    kb = [KbEntity(eid, name.capitalize(), (name,)) for eid, name in _FIXTURE_ENTITIES]
    kb_index = KbIndex(kb)
    by_pos = {(r.paper_id, r.position): r for r in sentence_records}
    links = []
    for pid, pos, names in mentions_spec:
        rec = by_pos[(pid, pos)]
        for name in names:
            start_ix = rec.text.index(name)
            mention = MentionRecord(rec.sentence_id, name, (start_ix, start_ix + len(name)), "fixture")
            link = link_mention(mention, kb_index, threshold=0.9)
            assert link is not None
            links.append(link)

    vocab = build_entity_vocabulary(links, min_sentences=10, top_k=30000, kb=kb)
    papers = [json.loads(line) for line in corpus_bytes.splitlines()]
    from gapsearch.records import PaperRecord

    paper_records = [PaperRecord.from_dict(d) for d in papers]
    idx = build_index(scored, links, vocab, paper_records, 0.99, 0.99)

    sample_page = query(idx, [vocab.entries[0].entity_id], label="both", limit=10)
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0, f"pipeline took {elapsed:.2f}s"
    assert sample_page.total > 0

    # threshold gate: indexed iff cp >= 0.99 or dp >= 0.99
    expected_ids = {sid for sid, (cp, dp) in injected.items() if cp >= 0.99 or dp >= 0.99}
    assert set(idx.sentences) == expected_ids

    # postings completeness against brute force
    links_of = {}
    for link in links:
        links_of.setdefault(link.sentence_id, set()).add(link.entity_id)
    for sid in expected_ids:
        for eid in links_of.get(sid, ()):
            page = query(idx, [eid], label="both", limit=500)
            assert sid in {s.sentence_id for s in page.items}

    # co-occurrence symmetry and brute-force counts
    brute = {}
    for sid in expected_ids:
        ents = sorted(links_of.get(sid, ()))
        for i, a in enumerate(ents):
            for b in ents[i + 1 :]:
                brute[(a, b)] = brute.get((a, b), 0) + 1
    for (a, b), count in brute.items():
        assert dict(cooccurring(idx, a))[b] == count
        assert dict(cooccurring(idx, b))[a] == count

    # persist/load round trip is byte-identical
    p1, p2 = tmp_path / "snap1.bin", tmp_path / "snap2.bin"
    persist(idx, p1)
    loaded = load(p1)
    persist(loaded, p2)
    assert p1.read_bytes() == p2.read_bytes()

    # 10,000 replayed queries return deterministic bodies
    loaded_again = load(p1)
    entity_ids = [e.entity_id for e in vocab.entries]
    requests = []
    req_rng = random.Random(11)
    for _ in range(10_000):
        k = req_rng.choice([1, 1, 2])
        ents = tuple(req_rng.sample(entity_ids, k))
        label = req_rng.choice(["challenge", "direction", "both"])
        offset = req_rng.choice([0, 0, 5, 50])
        requests.append(SearchRequest(entities=ents, label=label, offset=offset, limit=10))
    first_pass = [canonical_json(handle_search(loaded, r)) for r in requests]
    second_pass = [canonical_json(handle_search(loaded_again, r)) for r in requests]
    assert first_pass == second_pass

    # autocomplete works against the loaded snapshot
    assert autocomplete(loaded, _FIXTURE_ENTITIES[0][1][:3])


# --------------------------------------------------------------------------
# Zero-shot decision logic
# --------------------------------------------------------------------------


def test_zeroshot_decision_logic():
    rng = random.Random(2718)
    assert len(CHALLENGE_SUBLABELS) == 8 and len(DIRECTION_SUBLABELS) == 6
    pool = [0.05, 0.2, 0.45, 0.6, 0.85, 0.89, 0.9, 0.95, 1.0]
    for case in range(100):
        ch = {name: rng.choice(pool) for name in CHALLENGE_SUBLABELS}
        dr = {name: rng.choice(pool) for name in DIRECTION_SUBLABELS}
        if case % 10 == 0:  # force the exact boundary value through max
            ch = {name: min(v, 0.89) for name, v in ch.items()}
            ch["problem"] = 0.9
        z = ZeroShotScores(f"s{case}", ch, dr)
        label = zeroshot_decide(z, threshold=0.9)
        m_c, m_d = max(ch.values()), max(dr.values())
        assert label.challenge == (m_c >= 0.9), case
        assert label.direction == (m_d >= 0.9), case
        assert label.challenge_prob == m_c and label.direction_prob == m_d
        if case % 10 == 0:
            assert m_c == 0.9 and label.challenge is True


# --------------------------------------------------------------------------
# Optional dataset-dependent check
# --------------------------------------------------------------------------


@pytest.mark.skipif(
    "GAPSEARCH_DATASET" not in os.environ,
    reason="released dataset not available; set GAPSEARCH_DATASET to a JSONL test split to enable",
)
def test_keyword_baseline_on_released_dataset():
    """With the released test split (JSONL: sentence_id, text, challenge,
    direction), the keyword baseline should recall at least 0.70 of the
    challenge sentences."""
    path = os.environ["GAPSEARCH_DATASET"]
    lex = KeywordLexicon.seed()
    pred, gold = {}, {}
    with open(path, "r", encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            d = json.loads(line)
            rec = SentenceRecord.build(d.get("paper_id", "p"), d.get("position", i), d["text"])
            from gapsearch.scoring import keyword_score

            pred[rec.sentence_id] = keyword_score(rec, lex)
            gold[rec.sentence_id] = LabelPair(bool(d["challenge"]), bool(d["direction"]))
    _, recall, _ = prf(pred, gold, "challenge")
    assert recall >= 0.70
