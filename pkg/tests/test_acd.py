import math

import numpy as np
import pytest

from dspn.acd import (
    AspectModel,
    NegSampleConfig,
    acd_loss,
    aspect_importance,
    detect_aspects,
    hinge_terms,
    reconstruct,
    sample_negatives,
    uniqueness_penalty,
    uniqueness_penalty_backward,
)
from dspn.encoder import EncodedReview
from dspn.gradkernel import ParamSet, check_gradient


def enc(z):
    z = np.asarray(z, dtype=np.float64)
    return EncodedReview(z=z, H=z[None, :], n=1)


def naive_softmax(v):
    exps = [math.exp(float(c)) for c in v]
    s = sum(exps)
    return np.array([e / s for e in exps])


class TestAspectImportance:
    def test_uniform_when_unparameterized(self):
        model = AspectModel(W1=np.zeros((4, 3)), b1=np.zeros(4), T=np.ones((4, 3)))
        p = aspect_importance(np.ones(3), model)
        assert np.max(np.abs(p - 0.25)) < 1e-15

    def test_bias_saturation(self):
        model = AspectModel(W1=np.zeros((2, 3)), b1=np.array([10.0, -10.0]), T=np.ones((2, 3)))
        p = aspect_importance(np.zeros(3), model)
        assert abs(p[0] - 1.0) < 1e-8 and p[1] < 1e-8

    def test_matches_composition_oracle(self):
        rng = np.random.default_rng(51)
        for _ in range(20):
            model = AspectModel(W1=rng.normal(size=(3, 5)), b1=rng.normal(size=3),
                                T=rng.normal(size=(3, 5)))
            z = rng.normal(size=5)
            logits = [float(model.W1[k] @ z + model.b1[k]) for k in range(3)]
            assert np.max(np.abs(aspect_importance(z, model) - naive_softmax(logits))) < 1e-12

    def test_sums_to_one(self):
        rng = np.random.default_rng(53)
        model = AspectModel(W1=rng.normal(size=(6, 4)), b1=rng.normal(size=6),
                            T=rng.normal(size=(6, 4)))
        for _ in range(50):
            assert abs(aspect_importance(rng.normal(size=4), model).sum() - 1.0) < 1e-12


class TestReconstruct:
    def model(self, rng, n=4, d=3):
        return AspectModel(W1=rng.normal(size=(n, d)), b1=rng.normal(size=n),
                           T=rng.normal(size=(n, d)))

    def test_one_hot_selects_row(self):
        model = self.model(np.random.default_rng(57))
        p = np.array([0.0, 0.0, 1.0, 0.0])
        assert np.array_equal(reconstruct(model, p), model.T[2])

    def test_even_mix_averages(self):
        model = self.model(np.random.default_rng(59), n=2)
        r = reconstruct(model, np.array([0.5, 0.5]))
        assert np.max(np.abs(r - (model.T[0] + model.T[1]) / 2)) < 1e-15

    def test_matches_weighted_sum_oracle(self):
        rng = np.random.default_rng(61)
        for _ in range(20):
            model = self.model(rng)
            p = rng.dirichlet(np.ones(4))
            expected = np.zeros(3)
            for k in range(4):
                expected += p[k] * model.T[k]
            assert np.max(np.abs(reconstruct(model, p) - expected)) < 1e-12

    def test_stays_in_convex_hull(self):
        rng = np.random.default_rng(63)
        for _ in range(50):
            model = self.model(rng)
            r = reconstruct(model, rng.dirichlet(np.ones(4)))
            lo = model.T.min(axis=0) - 1e-12
            hi = model.T.max(axis=0) + 1e-12
            assert np.all(r >= lo) and np.all(r <= hi)

    def test_shape_mismatch(self):
        model = self.model(np.random.default_rng(3))
        with pytest.raises(ValueError, match="shape"):
            reconstruct(model, np.ones(5))


class TestSampleNegatives:
    def test_m_zero_empty(self):
        out = sample_negatives(4, NegSampleConfig(m=0, seed=1))
        assert len(out) == 4 and all(a.size == 0 for a in out)

    def test_batch_of_two_forced(self):
        out = sample_negatives(2, NegSampleConfig(m=1, seed=5))
        assert list(out[0]) == [1] and list(out[1]) == [0]

    def test_deterministic(self):
        a = sample_negatives(8, NegSampleConfig(m=3, seed=9))
        b = sample_negatives(8, NegSampleConfig(m=3, seed=9))
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_never_self(self):
        for seed in range(20):
            for i, draws in enumerate(sample_negatives(5, NegSampleConfig(m=10, seed=seed))):
                assert i not in draws
                assert draws.min() >= 0 and draws.max() < 5

    def test_singleton_batch_rejected(self):
        with pytest.raises(ValueError, match="at least 2"):
            sample_negatives(1, NegSampleConfig(m=1, seed=0))

    def test_m_validation(self):
        with pytest.raises(ValueError, match="m"):
            NegSampleConfig(m=-1)


class TestUniquenessPenalty:
    def test_orthogonal_rows_zero(self):
        T = np.array([[2.0, 0.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, 0.5]])
        assert uniqueness_penalty(T) < 1e-12

    def test_identical_unit_rows_sqrt2(self):
        T = np.array([[1.0, 0.0], [1.0, 0.0]])
        # Tn Tn^T = [[1,1],[1,1]]; minus I leaves two off-diagonal ones
        assert abs(uniqueness_penalty(T) - 1.4142135623730951) < 1e-15

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(67)
        for _ in range(20):
            T = rng.normal(size=(4, 6))
            rows = [T[k] / math.sqrt(float(T[k] @ T[k])) for k in range(4)]
            acc = 0.0
            for a in range(4):
                for b in range(4):
                    g = float(np.dot(rows[a], rows[b])) - (1.0 if a == b else 0.0)
                    acc += g * g
            assert abs(uniqueness_penalty(T) - math.sqrt(acc)) < 1e-10

    def test_row_rescale_invariance(self):
        rng = np.random.default_rng(71)
        T = rng.normal(size=(3, 4))
        scaled = T.copy()
        scaled[1] *= 7.5
        assert abs(uniqueness_penalty(T) - uniqueness_penalty(scaled)) < 1e-12

    def test_zero_row_rejected(self):
        T = np.array([[1.0, 0.0], [0.0, 0.0]])
        with pytest.raises(ValueError, match="zero row"):
            uniqueness_penalty(T)

    def test_gradient_passes_check(self):
        for seed in range(20):
            rng = np.random.default_rng(100 + seed)
            ps = ParamSet()
            ps.add("T", rng.normal(size=(3, 4)))

            def loss(params, compute_grads):
                val = uniqueness_penalty(params["T"])
                if compute_grads:
                    params.add_grad("T", uniqueness_penalty_backward(params["T"]))
                return val

            assert check_gradient(loss, ps, h=1e-5).max_rel_err < 1e-4


class TestAcdLoss:
    def margin_fixture(self, rz, rn):
        # W1=0, b1=0 gives uniform p; identical T rows make r = t regardless
        # of z, so r.z and r.n are set directly by the chosen vectors
        t = np.array([2.0, 0.0])
        model = AspectModel(W1=np.zeros((2, 2)), b1=np.zeros(2), T=np.stack([t, t]))
        z = np.array([rz / 2.0, 5.0])   # second coord never touches r
        n = np.array([rn / 2.0, -3.0])
        return model, enc(z), enc(n)

    def test_margin_satisfied_is_zero(self):
        model, a, b = self.margin_fixture(rz=2.0, rn=0.5)
        # only instance 0 carries a negative; instance 1 contributes nothing
        loss = acd_loss([a, b], model, NegSampleConfig(m=1), lam_acd=0.0,
                        neg_indices=[np.array([1]), np.array([], dtype=np.intp)])
        assert loss == 0.0

    def test_margin_arithmetic(self):
        model, a, b = self.margin_fixture(rz=0.2, rn=0.5)
        loss = acd_loss([a, b], model, NegSampleConfig(m=1), lam_acd=0.0,
                        neg_indices=[np.array([1]), np.array([], dtype=np.intp)])
        assert abs(loss - 1.3) < 1e-12

    def test_self_negative_is_exactly_one(self):
        # z = n makes the r.z and r.n terms cancel, leaving the margin
        rng = np.random.default_rng(73)
        model = AspectModel(W1=rng.normal(size=(3, 4)), b1=rng.normal(size=3),
                            T=rng.normal(size=(3, 4)))
        z = enc(rng.normal(size=4))
        loss = acd_loss([z], model, NegSampleConfig(m=1), lam_acd=0.0,
                        neg_indices=[np.array([0])])
        assert loss == 1.0

    def test_m_zero_equals_uniqueness_term(self):
        rng = np.random.default_rng(79)
        model = AspectModel(W1=rng.normal(size=(3, 4)), b1=rng.normal(size=3),
                            T=rng.normal(size=(3, 4)))
        batch = [enc(rng.normal(size=4)) for _ in range(3)]
        lam = 0.7
        loss = acd_loss(batch, model, NegSampleConfig(m=0), lam_acd=lam)
        assert loss == lam * uniqueness_penalty(model.T)

    def test_nonnegative(self):
        rng = np.random.default_rng(83)
        for seed in range(20):
            model = AspectModel(W1=rng.normal(size=(3, 4)), b1=rng.normal(size=3),
                                T=rng.normal(size=(3, 4)))
            batch = [enc(rng.normal(size=4)) for _ in range(4)]
            loss = acd_loss(batch, model, NegSampleConfig(m=5, seed=seed), lam_acd=1.0)
            assert loss >= 0.0

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(89)
        for seed in range(10):
            model = AspectModel(W1=rng.normal(size=(3, 4)), b1=rng.normal(size=3),
                                T=rng.normal(size=(3, 4)))
            batch = [enc(rng.normal(size=4)) for _ in range(5)]
            cfg = NegSampleConfig(m=4, seed=seed)
            negs = sample_negatives(5, cfg)
            expected = 0.5 * uniqueness_penalty(model.T)
            for i, e in enumerate(batch):
                p = naive_softmax([float(model.W1[k] @ e.z + model.b1[k]) for k in range(3)])
                r = sum(p[k] * model.T[k] for k in range(3))
                for j in negs[i]:
                    expected += max(0.0, 1.0 - float(r @ e.z) + float(r @ batch[j].z))
            got = acd_loss(batch, model, cfg, lam_acd=0.5, neg_indices=negs)
            assert abs(got - expected) < 1e-10

    def test_hinge_terms_shapes(self):
        z = np.ones(3)
        r = np.ones(3)
        assert hinge_terms(z, r, np.zeros((0, 3))).shape == (0,)
        assert hinge_terms(z, r, np.ones((2, 3))).shape == (2,)


class TestDetectAspects:
    def test_paper_threshold_selection(self):
        assert detect_aspects(np.array([0.9999, 5e-5]), 1e-4) == {0}

    def test_uniform_above_threshold(self):
        assert detect_aspects(np.full(7, 1 / 7), 1e-4) == set(range(7))

    def test_zero_threshold(self):
        assert detect_aspects(np.array([0.5, 0.0, 0.5]), 0.0) == {0, 2}

    def test_threshold_validation(self):
        for bad in (-0.1, 1.0, 2.0):
            with pytest.raises(ValueError, match="threshold"):
                detect_aspects(np.array([1.0]), bad)

    def test_never_empty_below_uniform(self):
        rng = np.random.default_rng(97)
        for _ in range(50):
            n = int(rng.integers(2, 9))
            p = rng.dirichlet(np.ones(n))
            assert detect_aspects(p, threshold=1.0 / n - 1e-9 if 1.0 / n > 1e-9 else 0.0)
