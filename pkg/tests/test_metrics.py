import math
import random

import numpy as np
import pytest

from chatforge.metrics import (
    BleuConfig,
    EvalPair,
    bleu,
    coherence,
    distinct_n,
    embed_tf,
    evaluate_corpus,
    ngram_counts,
    perplexity,
    rouge_n,
    split_sentences,
)

from .oracles import brute_bleu, brute_distinct, brute_ngram_counts, brute_rouge


def random_tokens(rng, max_len=15, vocab=6, min_len=0):
    length = rng.randint(min_len, max_len)
    return [f"t{rng.randrange(vocab)}" for _ in range(length)]


class TestNgramCounts:
    def test_hand_counts(self):
        counts = ngram_counts(["a", "a", "b"], 1)
        assert counts.counts == {("a",): 2, ("b",): 1}
        assert counts.total == 3

    def test_shorter_than_n(self):
        counts = ngram_counts(["a", "b"], 3)
        assert counts.total == 0
        assert not counts.counts

    def test_bigrams(self):
        counts = ngram_counts(["a", "b", "a", "b"], 2)
        assert counts.counts == {("a", "b"): 2, ("b", "a"): 1}
        assert counts.total == 3

    def test_zero_order_rejected(self):
        with pytest.raises(ValueError):
            ngram_counts(["a"], 0)

    def test_matches_bruteforce_on_random_sequences(self):
        rng = random.Random(1234)
        for _ in range(100):
            tokens = random_tokens(rng, max_len=20, vocab=5)
            n = rng.randint(1, 4)
            got = ngram_counts(tokens, n)
            want_counts, want_total = brute_ngram_counts(tokens, n)
            assert dict(got.counts) == want_counts
            assert got.total == want_total


class TestBleu:
    def test_identity_is_one(self):
        tokens = ["the", "cat", "sat", "on", "the", "mat"]
        assert bleu(tokens, [tokens]) == 1.0

    def test_degenerate_repetition_clips_to_quarter(self):
        score = bleu(["the"] * 4, [["the", "cat"]], BleuConfig(max_order=1))
        assert score == 0.25

    def test_disjoint_is_zero(self):
        assert bleu(["a", "b"], [["c", "d"]], BleuConfig(max_order=1)) == 0.0

    def test_empty_arguments_rejected(self):
        with pytest.raises(ValueError):
            bleu([], [["a"]])
        with pytest.raises(ValueError):
            bleu(["a"], [])
        with pytest.raises(ValueError):
            bleu(["a"], [[]])

    def test_brevity_penalty_short_candidate(self):
        # candidate shorter than the only reference: BP = exp(1 - r/c)
        score = bleu(["a", "b"], [["a", "b", "c", "d"]], BleuConfig(max_order=1))
        assert score == pytest.approx(math.exp(1 - 4 / 2) * 1.0, rel=1e-12)

    def test_tie_breaks_toward_shorter_reference(self):
        # c=3; refs of length 2 and 4 tie on distance; shorter (r=2 < c) wins -> BP=1
        refs = [["a", "b"], ["a", "b", "c", "d"]]
        assert bleu(["a", "b", "c"], refs, BleuConfig(max_order=1)) == 1.0

    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError):
            BleuConfig(max_order=2, weights=[0.9, 0.2])

    def test_smoothing_lifts_zero_precision(self):
        cfg = BleuConfig(max_order=4, smoothing="add_epsilon")
        score = bleu(["a", "b"], [["a", "b"]], cfg)
        assert 0.0 < score < 1.0  # 3- and 4-gram orders get epsilon only

    def test_relabeling_invariance(self):
        rng = random.Random(7)
        for _ in range(50):
            cand = random_tokens(rng, min_len=1)
            refs = [random_tokens(rng, min_len=1) for _ in range(rng.randint(1, 3))]
            relabel = {f"t{i}": f"u{(i * 3 + 1) % 7}x" for i in range(8)}
            score = bleu(cand, refs, BleuConfig(max_order=2))
            relabeled = bleu(
                [relabel[t] for t in cand],
                [[relabel[t] for t in r] for r in refs],
                BleuConfig(max_order=2),
            )
            assert score == pytest.approx(relabeled, abs=1e-15)

    def test_matches_bruteforce(self):
        rng = random.Random(99)
        for _ in range(200):
            cand = random_tokens(rng, min_len=1)
            refs = [random_tokens(rng, min_len=1) for _ in range(rng.randint(1, 3))]
            order = rng.randint(1, 4)
            smoothing = rng.random() < 0.5
            cfg = BleuConfig(max_order=order, smoothing="add_epsilon" if smoothing else "none")
            assert bleu(cand, refs, cfg) == pytest.approx(
                brute_bleu(cand, refs, max_order=order, smoothing=smoothing), abs=1e-12
            )


class TestRouge:
    def test_hand_fixture(self):
        score = rouge_n(["the", "cat", "sat"], [["the", "cat", "sat", "on", "the", "mat"]], 1)
        assert score == 0.5

    def test_identity(self):
        tokens = ["a", "b", "c"]
        assert rouge_n(tokens, [tokens], 1) == 1.0
        assert rouge_n(tokens, [tokens], 2) == 1.0

    def test_disjoint(self):
        assert rouge_n(["a"], [["b", "c"]], 1) == 0.0

    def test_all_references_too_short(self):
        with pytest.raises(ValueError):
            rouge_n(["a", "b"], [["x"]], 2)

    def test_matches_bruteforce(self):
        rng = random.Random(41)
        for _ in range(200):
            cand = random_tokens(rng)
            refs = [random_tokens(rng, min_len=1) for _ in range(rng.randint(1, 3))]
            n = rng.randint(1, 3)
            try:
                want = brute_rouge(cand, refs, n)
            except ValueError:
                with pytest.raises(ValueError):
                    rouge_n(cand, refs, n)
                continue
            assert rouge_n(cand, refs, n) == pytest.approx(want, abs=1e-12)

    def test_relabeling_invariance(self):
        rng = random.Random(59)
        relabel = {f"t{i}": f"z{(i * 5 + 2) % 11}q" for i in range(8)}
        for _ in range(50):
            cand = random_tokens(rng, min_len=1)
            refs = [random_tokens(rng, min_len=2) for _ in range(rng.randint(1, 3))]
            score = rouge_n(cand, refs, 1)
            relabeled = rouge_n(
                [relabel[t] for t in cand], [[relabel[t] for t in r] for r in refs], 1
            )
            assert score == pytest.approx(relabeled, abs=1e-15)


class TestDistinct:
    def test_unigram_fixture(self):
        assert distinct_n([["a", "a", "b"]], 1) == pytest.approx(2 / 3, abs=1e-12)

    def test_bigram_fixture(self):
        assert distinct_n([["a", "b", "a", "b"]], 2) == pytest.approx(2 / 3, abs=1e-12)

    def test_all_unique_is_one(self):
        assert distinct_n([["a"], ["b"], ["c"]], 1) == 1.0

    def test_equality_iff_all_unique(self):
        rng = random.Random(5)
        for _ in range(100):
            responses = [random_tokens(rng) for _ in range(rng.randint(1, 4))]
            try:
                score = distinct_n(responses, 1)
            except ValueError:
                continue
            pooled = [t for r in responses for t in r]
            assert score <= 1.0
            assert (score == 1.0) == (len(set(pooled)) == len(pooled))

    def test_no_ngrams_rejected(self):
        with pytest.raises(ValueError):
            distinct_n([["a"]], 2)

    def test_per_response_mean_mode(self):
        score = distinct_n([["a", "a"], ["b", "c"]], 1, per_response_mean=True)
        assert score == pytest.approx((0.5 + 1.0) / 2, abs=1e-12)

    def test_matches_bruteforce(self):
        rng = random.Random(77)
        for _ in range(100):
            responses = [random_tokens(rng) for _ in range(rng.randint(1, 5))]
            n = rng.randint(1, 3)
            try:
                want = brute_distinct(responses, n)
            except ValueError:
                continue
            assert distinct_n(responses, n) == pytest.approx(want, abs=1e-12)

    def test_relabeling_invariance(self):
        rng = random.Random(61)
        relabel = {f"t{i}": f"y{(i * 7 + 3) % 13}k" for i in range(8)}
        for _ in range(50):
            responses = [random_tokens(rng, min_len=1) for _ in range(rng.randint(1, 4))]
            score = distinct_n(responses, 2) if all(len(r) >= 2 for r in responses) else None
            if score is None:
                continue
            relabeled = distinct_n([[relabel[t] for t in r] for r in responses], 2)
            assert score == pytest.approx(relabeled, abs=1e-15)


class TestEmbedding:
    def test_hand_vector(self):
        vec = embed_tf(["a", "a", "b"], {"a": 0, "b": 1})
        assert np.allclose(vec, np.array([2.0, 1.0]) / math.sqrt(5))

    def test_empty_is_zero(self):
        assert not embed_tf([], {"a": 0}).any()

    def test_out_of_vocab_ignored(self):
        assert not embed_tf(["z"], {"a": 0}).any()


class TestCoherence:
    def test_identical_sentences(self):
        assert coherence("the cat sat. the cat sat.") == 1.0

    def test_orthogonal_sentences(self):
        assert coherence("alpha beta. gamma delta.") == 0.0

    def test_three_sentence_fixture(self):
        assert coherence("a b. a c. a b.") == pytest.approx(0.5, abs=1e-12)

    def test_single_sentence_undefined(self):
        assert coherence("just one sentence here") is None
        assert coherence("only one.") is None

    def test_splitter(self):
        assert split_sentences("one two! three? four.") == ["one two", "three", "four"]
        assert split_sentences("") == []

    def test_range(self):
        rng = random.Random(11)
        for _ in range(200):
            n_sent = rng.randint(2, 5)
            text = ". ".join(" ".join(random_tokens(rng, min_len=1)) for _ in range(n_sent)) + "."
            score = coherence(text)
            if score is not None:
                assert -1.0 - 1e-12 <= score <= 1.0 + 1e-12


class TestPerplexity:
    def test_uniform_model(self):
        assert perplexity([math.log(4)] * 10) == pytest.approx(4.0, rel=1e-12)

    def test_perfect_model(self):
        assert perplexity([0.0, 0.0]) == 1.0

    def test_geometric_mean_fixture(self):
        assert perplexity([math.log(2), math.log(8)]) == pytest.approx(4.0, rel=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            perplexity([])

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            perplexity([-0.1])


class TestEvaluateCorpus:
    def test_identity_pair(self):
        report = evaluate_corpus([EvalPair("a b c d", ["a b c d"])])
        assert report.bleu == 1.0
        assert report.rouge_1 == 1.0
        assert report.n_pairs == 1
        assert report.skipped == 0

    def test_matches_per_pair_means(self):
        rng = random.Random(3)
        pairs = []
        for _ in range(10):
            cand = random_tokens(rng, min_len=4)
            ref = random_tokens(rng, min_len=4)
            pairs.append(EvalPair(" ".join(cand), [" ".join(ref)]))
        report = evaluate_corpus(pairs)
        cfg = BleuConfig()
        per_bleu = [bleu(p.candidate_tokens(), p.reference_tokens(), cfg) for p in pairs]
        per_r1 = [rouge_n(p.candidate_tokens(), p.reference_tokens(), 1) for p in pairs]
        assert report.bleu == pytest.approx(sum(per_bleu) / len(per_bleu), abs=1e-12)
        assert report.rouge_1 == pytest.approx(sum(per_r1) / len(per_r1), abs=1e-12)
        assert report.distinct_1 == pytest.approx(
            distinct_n([p.candidate_tokens() for p in pairs], 1), abs=1e-12
        )

    def test_empty_candidate_skipped(self):
        pairs = [EvalPair("a b c d", ["a b c d"]) for _ in range(9)]
        pairs.append(EvalPair("", ["a b"]))
        report = evaluate_corpus(pairs)
        assert report.n_pairs == 10
        assert report.skipped == 1
        assert report.bleu == 1.0  # the nine identical pairs

    def test_report_keys_exact(self):
        report = evaluate_corpus([EvalPair("a b", ["a b"])])
        assert set(report.to_dict()) == {
            "bleu",
            "rouge_1",
            "rouge_2",
            "coherence",
            "distinct_1",
            "distinct_2",
            "perplexity",
            "n_pairs",
            "skipped",
        }

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError):
            evaluate_corpus([])

    def test_score_ranges_on_random_corpora(self):
        rng = random.Random(13)
        for _ in range(50):
            pairs = [
                EvalPair(
                    " ".join(random_tokens(rng, min_len=1)),
                    [" ".join(random_tokens(rng, min_len=1))],
                )
                for _ in range(rng.randint(1, 6))
            ]
            report = evaluate_corpus(pairs)
            for value in (report.bleu, report.rouge_1, report.rouge_2, report.distinct_1, report.distinct_2):
                if value is not None:
                    assert 0.0 <= value <= 1.0 + 1e-12
            if report.coherence is not None:
                assert -1.0 - 1e-12 <= report.coherence <= 1.0 + 1e-12
