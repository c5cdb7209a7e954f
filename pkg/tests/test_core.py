import math

import numpy as np
import pytest

from fuzzyrunoff import core
from fuzzyrunoff.core import (
    FiringVector,
    GaussianMf,
    TsModel,
    TsRule,
    firing_strength,
    mf_eval,
    predict,
    predict_batch,
    rule_output,
)


def single_input_rule(mean, width, theta):
    return TsRule((GaussianMf(mean, width),), np.asarray(theta, dtype=float))


def x_for_membership(mf: GaussianMf, target: float) -> float:
    """Input right of the mean where the membership equals ``target``."""
    return mf.mean + mf.width * math.sqrt(-math.log(target))


class TestGaussianMf:
    def test_peak_at_mean(self):
        assert mf_eval(GaussianMf(5.0, 2.0), 5.0) == 1.0

    def test_unit_offset(self):
        assert mf_eval(GaussianMf(0.0, 1.0), 1.0) == pytest.approx(math.exp(-1), rel=1e-12)

    def test_far_tail(self):
        assert mf_eval(GaussianMf(0.0, 1.0), 10.0) == pytest.approx(math.exp(-100), rel=1e-12)

    def test_no_factor_two_in_denominator(self):
        # exp(-(x-m)^2 / s^2), not exp(-(x-m)^2 / (2 s^2))
        assert mf_eval(GaussianMf(0.0, 2.0), 2.0) == pytest.approx(math.exp(-1), rel=1e-12)

    def test_symmetry_about_mean(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            mf = GaussianMf(rng.normal(), abs(rng.normal()) + 0.1)
            d = rng.normal() * 3
            left = mf_eval(mf, mf.mean - d)
            right = mf_eval(mf, mf.mean + d)
            assert abs(left - right) <= 1e-12

    def test_result_in_unit_interval(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            mf = GaussianMf(rng.normal(), abs(rng.normal()) + 1e-3)
            v = mf_eval(mf, rng.normal() * 10)
            assert 0.0 <= v <= 1.0

    def test_rejects_nonpositive_width(self):
        with pytest.raises(ValueError):
            GaussianMf(0.0, 0.0)
        with pytest.raises(ValueError):
            GaussianMf(0.0, -1.0)

    def test_rejects_nonfinite_input(self):
        with pytest.raises(ValueError):
            mf_eval(GaussianMf(0.0, 1.0), float("nan"))
        with pytest.raises(ValueError):
            mf_eval(GaussianMf(0.0, 1.0), float("inf"))


class TestFiring:
    def test_minimum_of_memberships(self):
        mfs = (GaussianMf(0.0, 1.0), GaussianMf(0.0, 1.0), GaussianMf(0.0, 1.0))
        rule = TsRule(mfs, np.zeros(4))
        x = np.array([x_for_membership(m, t) for m, t in zip(mfs, (0.8, 0.3, 0.5))])
        assert firing_strength(rule, x) == pytest.approx(0.3, rel=1e-12)

    def test_all_mfs_peak(self):
        rule = TsRule((GaussianMf(1.0, 0.5), GaussianMf(-2.0, 3.0)), np.zeros(3))
        assert firing_strength(rule, [1.0, -2.0]) == 1.0

    def test_single_input_equals_mf_eval(self):
        mf = GaussianMf(2.0, 1.5)
        rule = TsRule((mf,), np.zeros(2))
        assert firing_strength(rule, [3.3]) == mf_eval(mf, 3.3)

    def test_dimension_mismatch(self):
        rule = single_input_rule(0.0, 1.0, [0.0, 0.0])
        with pytest.raises(ValueError):
            firing_strength(rule, [1.0, 2.0])


class TestRuleOutput:
    def test_affine(self):
        assert rule_output(single_input_rule(0, 1, [1.0, 2.0]), [3.0]) == 7.0

    def test_zero_coefficients(self):
        rule = TsRule((GaussianMf(0, 1), GaussianMf(0, 1)), np.zeros(3))
        assert rule_output(rule, [17.0, -4.0]) == 0.0

    def test_intercept_only(self):
        rule = TsRule((GaussianMf(0, 1), GaussianMf(0, 1)), [5.5, 0.0, 0.0])
        assert rule_output(rule, [123.0, -9.0]) == 5.5


class TestPredict:
    def test_single_rule_cancellation(self):
        rule = single_input_rule(0.0, 1.0, [2.0, -1.0])
        model = TsModel((rule,))
        # any firing > 0 cancels in the weighted average
        assert predict(model, [2.5]) == rule_output(rule, [2.5])

    def test_two_rules_equal_firing(self):
        # symmetric rules, sample at midpoint -> equal weights
        r1 = single_input_rule(-1.0, 1.0, [2.0, 0.0])
        r2 = single_input_rule(1.0, 1.0, [4.0, 0.0])
        model = TsModel((r1, r2))
        assert predict(model, [0.0]) == pytest.approx(3.0, rel=1e-12)

    def test_weighted_mean_arithmetic(self):
        w = np.array([0.25, 0.75])
        outputs = np.array([0.0, 4.0])
        assert (w * outputs).sum() / w.sum() == pytest.approx(3.0, rel=1e-15)
        # through the model: pick inputs so the firings hit 0.25 / 0.75
        m1 = GaussianMf(0.0, 1.0)
        x0 = x_for_membership(m1, 0.25)
        # second rule centred so its membership at x0 is 0.75
        shift = 1.0 * math.sqrt(-math.log(0.75))
        r1 = TsRule((m1,), [0.0, 0.0])
        r2 = TsRule((GaussianMf(x0 - shift, 1.0),), [4.0, 0.0])
        model = TsModel((r1, r2))
        assert predict(model, [x0]) == pytest.approx(3.0, rel=1e-9)

    def test_firing_scale_invariance(self):
        # the aggregation normalises, so scaling every firing cancels
        rng = np.random.default_rng(3)
        w = rng.random(5) + 0.01
        out = rng.normal(size=5)
        base = (w * out).sum() / w.sum()
        scaled = ((7.3 * w) * out).sum() / (7.3 * w).sum()
        assert abs(base - scaled) <= 1e-12 * max(1.0, abs(base))

    def test_zero_rules_rejected(self):
        with pytest.raises(ValueError):
            TsModel(())

    def test_output_bounded_by_rule_outputs(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            c, n = int(rng.integers(1, 5)), int(rng.integers(1, 4))
            rules = tuple(
                TsRule(
                    tuple(GaussianMf(rng.normal(), rng.random() + 0.2) for _ in range(n)),
                    rng.normal(size=n + 1),
                )
                for _ in range(c)
            )
            model = TsModel(rules)
            x = rng.normal(size=n)
            outs = [rule_output(r, x) for r in rules]
            y = predict(model, x)
            assert min(outs) - 1e-9 <= y <= max(outs) + 1e-9


class TestPredictBatch:
    def test_empty_matrix(self):
        model = TsModel((single_input_rule(0, 1, [0, 1]),))
        out = predict_batch(model, np.zeros((0, 1)))
        assert out.shape == (0,)

    def test_single_row(self):
        model = TsModel((single_input_rule(0, 1, [1, 2]),))
        out = predict_batch(model, [[3.0]])
        assert out.shape == (1,)
        assert out[0] == predict(model, [3.0])

    def test_identical_rows_identical_outputs(self):
        model = TsModel((
            single_input_rule(0, 1, [1, 2]),
            single_input_rule(4, 2, [-1, 0.5]),
        ))
        out = predict_batch(model, [[2.0], [2.0]])
        assert out[0] == out[1]

    def test_matches_predict_exactly(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            c, n = int(rng.integers(1, 5)), int(rng.integers(1, 4))
            rules = tuple(
                TsRule(
                    tuple(GaussianMf(rng.normal(), rng.random() + 0.2) for _ in range(n)),
                    rng.normal(size=n + 1),
                )
                for _ in range(c)
            )
            model = TsModel(rules)
            X = rng.normal(size=(17, n)) * 3
            batch = predict_batch(model, X)
            for k in range(X.shape[0]):
                assert batch[k] == predict(model, X[k])

    def test_row_index_in_error(self):
        model = TsModel((single_input_rule(0, 1, [0, 1]),))
        X = np.array([[1.0], [np.nan], [2.0]])
        with pytest.raises(ValueError, match="row 1"):
            predict_batch(model, X)


class TestDegenerateFallback:
    def make_far_model(self):
        # two tight rules; inputs far from both underflow the firing sum
        r1 = single_input_rule(0.0, 0.1, [1.0, 0.0])
        r2 = single_input_rule(10.0, 0.1, [2.0, 0.0])
        return TsModel((r1, r2))

    def test_fallback_picks_nearest_rule(self):
        model = self.make_far_model()
        core.reset_degenerate_fallback_count()
        assert predict(model, [-500.0]) == 1.0   # nearest premise mean is rule 0
        assert predict(model, [510.0]) == 2.0    # nearest is rule 1
        assert core.degenerate_fallback_count() == 2
        core.reset_degenerate_fallback_count()

    def test_firing_vector_degeneracy_flag(self):
        assert FiringVector(np.array([0.0, 0.0])).degenerate
        assert not FiringVector(np.array([0.5, 0.2])).degenerate

    def test_fallback_is_continuous_by_region(self):
        model = self.make_far_model()
        core.reset_degenerate_fallback_count()
        # everything left of the midpoint maps to rule 0's output
        for x in (-300.0, -100.0, -50.0):
            assert predict(model, [x]) == 1.0
        core.reset_degenerate_fallback_count()


class TestImmutability:
    def test_model_fields_frozen(self):
        model = TsModel((single_input_rule(0, 1, [0, 1]),))
        with pytest.raises(AttributeError):
            model.rules = ()

    def test_parameter_arrays_read_only(self):
        rule = single_input_rule(0, 1, [0.5, 1.5])
        model = TsModel((rule,))
        with pytest.raises(ValueError):
            rule.consequent[0] = 9.9
        with pytest.raises(ValueError):
            model.premise_means[0, 0] = 9.9
        with pytest.raises(ValueError):
            model.consequents[0, 0] = 9.9


class TestSerialization:
    def roundtrip(self, model):
        return core.parse_model(core.dump_model(model))

    def test_value_exact_roundtrip(self):
        rng = np.random.default_rng(13)
        for _ in range(10):
            c, n = int(rng.integers(1, 6)), int(rng.integers(1, 5))
            rules = tuple(
                TsRule(
                    tuple(GaussianMf(rng.normal() * 1e3, rng.random() * 1e-3 + 1e-8)
                          for _ in range(n)),
                    rng.normal(size=n + 1) * 1e5,
                )
                for _ in range(c)
            )
            model = TsModel(rules)
            back = self.roundtrip(model)
            assert np.array_equal(back.premise_means, model.premise_means)
            assert np.array_equal(back.premise_widths, model.premise_widths)
            assert np.array_equal(back.consequents, model.consequents)

    def test_file_roundtrip(self, tmp_path):
        model = TsModel((single_input_rule(1 / 3, math.pi, [math.e, -1 / 7]),))
        path = tmp_path / "model.txt"
        core.save_model(model, path)
        back = core.load_model(path)
        assert np.array_equal(back.consequents, model.consequents)

    def test_rejects_unknown_format(self):
        with pytest.raises(ValueError, match="format"):
            core.parse_model("format tsmodel-v9\ninput_dim 1\nrule_count 0\n")

    def test_rejects_rule_count_mismatch(self):
        text = core.dump_model(TsModel((single_input_rule(0, 1, [0, 1]),)))
        text = text.replace("rule_count 1", "rule_count 2")
        with pytest.raises(ValueError):
            core.parse_model(text)
