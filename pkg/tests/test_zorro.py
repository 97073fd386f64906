"""Minimal-pair suite tests: templates, generation, scoring, reporting."""

import math
import random

import numpy as np
import pytest

from helpers import (BigramOracle, MaskedBigramOracle,
                     brute_force_pseudo_logprob, brute_force_sequence_logprob,
                     random_log_table)
from tinylm.errors import ConfigError, EmptySlot
from tinylm.vocab import build_vocab
from tinylm.zorro import (MinimalPair, Template, evaluate_suite,
                          filter_template, instantiate_suite,
                          instantiate_template, intersect_vocab, load_templates,
                          parse_templates, read_suite, report_csv_rows,
                          score_pair, score_sentences, write_suite)

TEMPLATE_TEXT = """\
# agreement demo
test: sv_agreement
phenomenon: agreement
good: the <NN> <VBZ> now
bad: the <NN> <VBP> now
lexicon NN: dog cat boy girl
lexicon VBZ: runs jumps
lexicon VBP: run jump

test: swap
phenomenon: order
good: <A> before <B>
bad: <B> before <A>
lexicon A: one two
lexicon B: one three
"""


def corpus_vocab(words):
    return build_vocab([list(words)])


# ---------------------------------------------------------------------------
# parsing and filtering


def test_parse_templates_structure():
    templates = parse_templates(TEMPLATE_TEXT)
    assert [t.test_name for t in templates] == ["sv_agreement", "swap"]
    t = templates[0]
    assert t.phenomenon == "agreement"
    assert t.frame_good == ("the", "<NN>", "<VBZ>", "now")
    assert t.slot_types() == ["NN", "VBZ", "VBP"]
    assert t.slot_lexicons["NN"] == ("dog", "cat", "boy", "girl")


def test_parse_rejects_malformed_input():
    with pytest.raises(ConfigError):
        parse_templates("good: before any test\n")
    with pytest.raises(ConfigError):
        parse_templates("test: x\nnot a key value line\n")
    with pytest.raises(ConfigError):
        parse_templates("test: x\nwhat: ever\n")
    with pytest.raises(ConfigError):
        parse_templates("# only comments\n")
    with pytest.raises(ConfigError):  # frames identical
        parse_templates("test: x\ngood: a b\nbad: a b\n")
    with pytest.raises(ConfigError):  # slot without lexicon
        parse_templates("test: x\ngood: <NN> a\nbad: a <NN>\n")


def test_load_templates_round_trip(tmp_path):
    path = tmp_path / "t.txt"
    path.write_text(TEMPLATE_TEXT, encoding="utf-8")
    assert len(load_templates(path)) == 2


def test_intersect_vocab():
    a = corpus_vocab(["dog", "cat", "runs"])
    b = corpus_vocab(["dog", "runs", "jump"])
    assert intersect_vocab([a, b]) == {"dog", "runs"}
    assert intersect_vocab([a]) == {"dog", "cat", "runs"}
    with pytest.raises(ConfigError):
        intersect_vocab([])


def test_filter_template_restricts_lexicons():
    t = parse_templates(TEMPLATE_TEXT)[0]
    kept = filter_template(t, {"the", "now", "dog", "cat", "runs", "run", "jumps", "jump"})
    assert kept.slot_lexicons["NN"] == ("dog", "cat")
    with pytest.raises(EmptySlot):  # literal frame word missing
        filter_template(t, {"dog", "runs", "run", "now"})
    with pytest.raises(EmptySlot):  # a slot empties out
        filter_template(t, {"the", "now", "runs", "run", "jumps", "jump"})


# ---------------------------------------------------------------------------
# instantiation


def test_exhaustive_enumeration_when_space_is_small():
    t = parse_templates(TEMPLATE_TEXT)[0]
    vocab = {"the", "now", "dog", "cat", "boy", "girl", "runs", "run", "jumps", "jump"}
    pairs = instantiate_template(t, vocab, pairs_per_test=1000, rng=random.Random(0))
    assert len(pairs) == 4 * 2 * 2  # full slot product
    assert len(set(pairs)) == len(pairs)
    # every pair differs exactly at the verb slot
    for pair in pairs:
        assert pair.good[0] == "the" and pair.good[3] == "now"
        diffs = [i for i, (g, b) in enumerate(zip(pair.good, pair.bad)) if g != b]
        assert diffs == [2]


def test_shared_slot_filler_across_frames():
    # <A>/<B> appear in both frames; each pair must reuse one filler per slot
    t = parse_templates(TEMPLATE_TEXT)[1]
    pairs = instantiate_template(t, {"before", "one", "two", "three"},
                                 pairs_per_test=100, rng=random.Random(0))
    for pair in pairs:
        a, b = pair.good[0], pair.good[2]
        assert pair.bad == (b, "before", a)
    # identical realizations (A == B == "one") are skipped
    assert all(p.good != p.bad for p in pairs)
    assert len(pairs) == 3  # 2*2 combos minus the one degenerate


def test_sampling_used_for_large_spaces_is_seeded_and_unique():
    lex = tuple(f"w{i}" for i in range(30))
    t = Template("big", "x", ("<A>", "<B>"), ("<B>", "<A>"),
                 {"A": lex, "B": lex})
    vocab = set(lex)
    a = instantiate_template(t, vocab, 50, random.Random(5))
    b = instantiate_template(t, vocab, 50, random.Random(5))
    c = instantiate_template(t, vocab, 50, random.Random(6))
    assert a == b and a != c
    assert len(a) == 50 and len(set(a)) == 50


def test_sampling_stall_raises():
    t = Template("stall", "x", ("<A>", "x"), ("x", "<A>"), {"A": ("w",) * 99})
    # 99 copies of one word -> slot space looks big but collapses to one combo
    with pytest.raises(ConfigError):
        instantiate_template(t, {"w", "x"}, 10, random.Random(0))


def test_instantiate_suite_concatenates_tests():
    templates = parse_templates(TEMPLATE_TEXT)
    vocab = {"the", "now", "dog", "cat", "boy", "girl", "runs", "run",
             "jumps", "jump", "before", "one", "two", "three"}
    pairs = instantiate_suite(templates, vocab, pairs_per_test=100, seed=0)
    names = {p.test_name for p in pairs}
    assert names == {"sv_agreement", "swap"}


# ---------------------------------------------------------------------------
# scoring against the bigram oracle


def oracle_setup(seed=0):
    words = [f"w{i}" for i in range(12)]
    vocab = corpus_vocab(words)
    table = random_log_table(len(vocab), seed=seed)
    return words, vocab, table


def test_causal_scores_match_enumeration():
    words, vocab, table = oracle_setup()
    oracle = BigramOracle(table)
    rng = random.Random(0)
    sentences = [tuple(rng.choices(words, k=rng.randint(2, 6))) for _ in range(20)]
    got = score_sentences(oracle, vocab, sentences)
    want = [brute_force_sequence_logprob(table, vocab.encode(list(s)))
            for s in sentences]
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_masked_scores_match_enumeration():
    words, vocab, table = oracle_setup(seed=1)
    oracle = MaskedBigramOracle(table)
    rng = random.Random(1)
    sentences = [tuple(rng.choices(words, k=rng.randint(2, 6))) for _ in range(20)]
    got = score_sentences(oracle, vocab, sentences)
    want = [brute_force_pseudo_logprob(table, vocab.encode(list(s)))
            for s in sentences]
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_length_normalization_divides_by_scored_tokens():
    words, vocab, table = oracle_setup(seed=2)
    oracle = BigramOracle(table)
    sent = (words[0], words[1], words[2])
    raw = score_sentences(oracle, vocab, [sent])[0]
    norm = score_sentences(oracle, vocab, [sent], normalize=True)[0]
    assert norm == pytest.approx(raw / 4.0)  # 3 words + eos targets
    masked_oracle = MaskedBigramOracle(table)
    raw_m = score_sentences(masked_oracle, vocab, [sent])[0]
    norm_m = score_sentences(masked_oracle, vocab, [sent], normalize=True)[0]
    assert norm_m == pytest.approx(raw_m / 3.0)  # 3 maskable positions


def test_verdicts_match_brute_force_on_random_pairs():
    words, vocab, table = oracle_setup(seed=3)
    oracle = BigramOracle(table)
    rng = random.Random(3)
    for _ in range(50):
        good = tuple(rng.choices(words, k=rng.randint(2, 5)))
        bad = tuple(rng.choices(words, k=rng.randint(2, 5)))
        pair = MinimalPair(good, bad, "t", "p")
        want = (brute_force_sequence_logprob(table, vocab.encode(list(good))) >
                brute_force_sequence_logprob(table, vocab.encode(list(bad))))
        assert score_pair(oracle, vocab, pair) == want


def test_tied_scores_count_incorrect():
    words, vocab, table = oracle_setup(seed=4)
    oracle = BigramOracle(table)
    pair = MinimalPair((words[0],), (words[0],), "tie", "p")
    assert score_pair(oracle, vocab, pair) is False


def test_evaluate_suite_accuracy_bookkeeping():
    words, vocab, table = oracle_setup(seed=5)
    oracle = BigramOracle(table)
    # craft pairs with known verdicts: identical (incorrect) + ordered copies
    s_hi = max(((w1, w2) for w1 in words[:4] for w2 in words[:4]),
               key=lambda s: brute_force_sequence_logprob(table, vocab.encode(list(s))))
    s_lo = min(((w1, w2) for w1 in words[:4] for w2 in words[:4]),
               key=lambda s: brute_force_sequence_logprob(table, vocab.encode(list(s))))
    pairs = [MinimalPair(s_hi, s_lo, "easy", "ph1")] * 3 \
        + [MinimalPair(s_lo, s_hi, "hard", "ph1")] * 1 \
        + [MinimalPair(s_hi, s_hi, "tie", "ph2")] * 2
    report = evaluate_suite(oracle, vocab, pairs)
    by_name = {t.test_name: t for t in report.tests}
    assert by_name["easy"].accuracy == 1.0 and by_name["easy"].n_pairs == 3
    assert by_name["hard"].accuracy == 0.0
    assert by_name["tie"].accuracy == 0.0
    assert report.phenomenon_means["ph1"] == pytest.approx(0.5)
    assert report.phenomenon_means["ph2"] == 0.0
    assert report.overall == pytest.approx((1.0 + 0.0 + 0.0) / 3)
    with pytest.raises(ConfigError):
        evaluate_suite(oracle, vocab, [])


def test_suite_file_round_trip(tmp_path):
    pairs = [MinimalPair(("a", "b"), ("b", "a"), "t1", "p1"),
             MinimalPair(("x", "y", "z"), ("z", "y", "x"), "t2", "p2")]
    path = tmp_path / "suite.tsv"
    write_suite(pairs, path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "b a\ta b\tt1\tp1"  # bad TAB good TAB test TAB phenomenon
    assert read_suite(path) == pairs
    bad = tmp_path / "bad.tsv"
    bad.write_text("only\ttwo\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        read_suite(bad)
    empty = tmp_path / "empty.tsv"
    empty.write_text("\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        read_suite(empty)


def test_report_rows_include_overall():
    words, vocab, table = oracle_setup(seed=6)
    oracle = BigramOracle(table)
    pairs = [MinimalPair((words[0], words[1]), (words[1], words[0]), "t", "p")]
    rows = report_csv_rows(evaluate_suite(oracle, vocab, pairs))
    assert rows[0] == ["test", "phenomenon", "n", "accuracy"]
    assert rows[-1][0] == "OVERALL"
    assert rows[1][2] == "1"
