import numpy as np
import pytest

from dspn.metrics import acd_f1, acsa_accuracy, confusion, rp_accuracy


class TestAcdF1:
    def test_perfect(self):
        sets = [{"a", "b"}, {"c"}, set()]
        assert acd_f1(sets, sets) == 1.0

    def test_disjoint(self):
        assert acd_f1([{"a"}, {"b"}], [{"c"}, {"d"}]) == 0.0

    def test_hand_count(self):
        # TP=2 (a on both reviews), FP=1 (b on r2), FN=1 (b on r1):
        # precision = recall = 2/3, so F1 = 2/3
        gold = [{"a", "b"}, {"a"}]
        pred = [{"a"}, {"a", "b"}]
        assert abs(acd_f1(pred, gold) - 2 / 3) < 1e-15

    def test_all_empty_predictions(self):
        assert acd_f1([set(), set()], [{"a"}, {"b"}]) == 0.0

    def test_perfect_iff_equal(self):
        rng = np.random.default_rng(5)
        universe = list("abcdef")
        for _ in range(50):
            gold = [set(rng.choice(universe, size=rng.integers(0, 4), replace=False))
                    for _ in range(6)]
            pred = [set(s) for s in gold]
            if rng.random() < 0.5:
                # perturb one review's set
                i = int(rng.integers(0, 6))
                pred[i] = pred[i] ^ {"a"}
                assert acd_f1(pred, gold) < 1.0 or not any(gold) and not any(pred)
            elif any(gold):
                assert acd_f1(pred, gold) == 1.0

    def test_order_invariant(self):
        gold = [{"a"}, {"b", "c"}, set(), {"a", "c"}]
        pred = [{"a", "b"}, {"c"}, {"a"}, {"a"}]
        perm = [2, 0, 3, 1]
        assert acd_f1(pred, gold) == acd_f1([pred[i] for i in perm],
                                            [gold[i] for i in perm])

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length"):
            acd_f1([{"a"}], [{"a"}, {"b"}])

    def test_bounded(self):
        rng = np.random.default_rng(9)
        universe = list("abcd")
        for _ in range(50):
            gold = [set(rng.choice(universe, size=rng.integers(1, 4), replace=False))
                    for _ in range(5)]
            pred = [set(rng.choice(universe, size=rng.integers(0, 4), replace=False))
                    for _ in range(5)]
            assert 0.0 <= acd_f1(pred, gold) <= 1.0


class TestAcsaAccuracy:
    def test_all_correct(self):
        gold = [{"food": "positive"}, {"service": "negative", "price": "neutral"}]
        assert acsa_accuracy(gold, gold) == 1.0

    def test_three_of_four(self):
        gold = [{"a": "positive", "b": "negative"},
                {"a": "neutral", "b": "positive"}]
        pred = [{"a": "positive", "b": "negative"},
                {"a": "neutral", "b": "negative"}]
        assert acsa_accuracy(pred, gold) == 0.75

    def test_absent_aspects_excluded(self):
        # gold annotates 2 of 5 aspects; predictions exist for all 5
        gold = [{"a": "positive", "b": "negative"}]
        pred = [{"a": "positive", "b": "negative", "c": "neutral",
                 "d": "positive", "e": "negative"}]
        assert acsa_accuracy(pred, gold) == 1.0

    def test_missing_prediction_counts_wrong(self):
        gold = [{"a": "positive", "b": "negative"}]
        pred = [{"a": "positive"}]
        assert acsa_accuracy(pred, gold) == 0.5

    def test_no_gold_pairs(self):
        with pytest.raises(ValueError, match="gold"):
            acsa_accuracy([{}, {}], [{}, None])

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length"):
            acsa_accuracy([{}], [{}, {}])


class TestRpAccuracy:
    def test_identical(self):
        gold = ["positive", "negative", "neutral"]
        assert rp_accuracy(gold, gold) == 1.0
        M = confusion(gold, gold)
        assert np.array_equal(np.diag(np.diag(M)), M)

    def test_constant_predictor_balanced(self):
        gold = ["negative", "neutral", "positive"] * 4
        pred = ["neutral"] * 12
        assert rp_accuracy(pred, gold) == pytest.approx(1 / 3)

    def test_matches_tally_oracle(self):
        rng = np.random.default_rng(13)
        classes = ["negative", "neutral", "positive"]
        gold = [classes[i] for i in rng.integers(0, 3, size=20)]
        pred = [classes[i] for i in rng.integers(0, 3, size=20)]
        hits = 0
        for p, g in zip(pred, gold):
            if p == g:
                hits += 1
        assert rp_accuracy(pred, gold) == hits / 20
        M = confusion(pred, gold)
        for gi, gname in enumerate(classes):
            for pi, pname in enumerate(classes):
                tally = sum(1 for p, g in zip(pred, gold) if g == gname and p == pname)
                assert M[gi, pi] == tally

    def test_indices_and_names_mix(self):
        assert rp_accuracy([2, "negative"], ["positive", 0]) == 1.0

    def test_confusion_sums_to_total(self):
        rng = np.random.default_rng(17)
        gold = list(rng.integers(0, 3, size=30))
        pred = list(rng.integers(0, 3, size=30))
        M = confusion(pred, gold)
        assert M.sum() == 30
        assert np.trace(M) / 30 == rp_accuracy(pred, gold)

    def test_rows_are_gold(self):
        M = confusion(["positive"], ["negative"])
        assert M[0, 2] == 1 and M.sum() == 1

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            rp_accuracy([], [])
        with pytest.raises(ValueError, match="empty"):
            confusion([], [])

    def test_order_invariance(self):
        rng = np.random.default_rng(19)
        gold = list(rng.integers(0, 3, size=15))
        pred = list(rng.integers(0, 3, size=15))
        perm = rng.permutation(15)
        assert rp_accuracy([pred[i] for i in perm], [gold[i] for i in perm]) \
            == rp_accuracy(pred, gold)

    def test_bad_index(self):
        with pytest.raises(ValueError, match="range"):
            rp_accuracy([5], [0])
