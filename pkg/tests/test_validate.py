import numpy as np
import pytest
from scipy.stats import kstest
from scipy.stats import t as student_t

from gldakit.errors import DataValidationError
from gldakit.ingest import OutcomeTable
from gldakit.validate import (compare_models, ols_univariate, render_comparison,
                              render_results, significance_band,
                              validate_weights)


class TestOlsUnivariate:
    def test_perfect_fit(self):
        x = np.arange(10.0)
        r = ols_univariate(x, 2.0 * x)
        assert r.slope == pytest.approx(2.0, abs=1e-12)
        assert r.p_value < 1e-12
        assert r.r2_adj == pytest.approx(1.0, abs=1e-12)

    def test_hand_dataset_normal_equations(self):
        # oracle: explicit normal-equation arithmetic for x=[1..4], y=[2,4,5,8]
        # Sxx=5, Sxy=9.5, Syy=18.75 -> slope 1.9, intercept 0,
        # R^2 = 9.5^2/(5*18.75) = 0.962666..., adj = 1 - (1-R^2)*3/2 = 0.944
        r = ols_univariate([1.0, 2.0, 3.0, 4.0], [2.0, 4.0, 5.0, 8.0])
        assert r.slope == pytest.approx(1.9, abs=1e-10)
        assert r.intercept == pytest.approx(0.0, abs=1e-10)
        assert r.r2_adj == pytest.approx(0.944, abs=1e-10)
        r2 = 1.0 - (1.0 - r.r2_adj) * 2 / 3
        assert r2 == pytest.approx(90.25 / 93.75, abs=1e-10)

    def test_p_value_matches_t_distribution(self, rng):
        x = rng.standard_normal(30)
        y = 0.4 * x + rng.standard_normal(30)
        r = ols_univariate(x, y)
        # cross-check the incomplete-beta p-value against scipy's t CDF
        xbar = x.mean()
        sxx = np.sum((x - xbar) ** 2)
        resid = y - r.intercept - r.slope * x
        se = np.sqrt(resid @ resid / 28 / sxx)
        expected = 2 * student_t.sf(abs(r.slope / se), 28)
        assert r.p_value == pytest.approx(expected, abs=1e-12)

    def test_null_p_values_uniform(self):
        pvals = []
        for seed in range(500):
            rng = np.random.default_rng(seed)
            x = rng.standard_normal(1000)
            y = rng.standard_normal(1000)
            pvals.append(ols_univariate(x, y).p_value)
        assert kstest(pvals, "uniform").pvalue > 0.01

    def test_null_r2_adj_near_zero_in_expectation(self):
        vals = []
        for seed in range(300):
            rng = np.random.default_rng(10_000 + seed)
            vals.append(ols_univariate(rng.standard_normal(50),
                                       rng.standard_normal(50)).r2_adj)
        assert abs(np.mean(vals)) < 0.02

    def test_affine_invariance(self, rng):
        x = rng.standard_normal(40)
        y = 0.7 * x + rng.standard_normal(40)
        a = ols_univariate(x, y)
        b = ols_univariate(3.0 * x - 5.0, -2.0 * y + 11.0)
        assert b.p_value == pytest.approx(a.p_value, rel=1e-9)
        assert b.r2_adj == pytest.approx(a.r2_adj, rel=1e-9)

    def test_degenerate_predictor(self):
        with pytest.raises(DataValidationError, match="degenerate predictor"):
            ols_univariate([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    def test_too_few_points(self):
        with pytest.raises(DataValidationError):
            ols_univariate([1.0, 2.0], [1.0, 2.0])


class TestSignificanceBand:
    @pytest.mark.parametrize("p,band", [
        (0.005, "**"), (0.02, "*"), (0.07, "."), (0.5, ""),
        (0.0099, "**"), (0.01, "*"), (0.05, "."), (0.1, ""),
    ])
    def test_thresholds(self, p, band):
        assert significance_band(p) == band


def make_outcomes(ids, **columns):
    names = sorted(columns)
    values = np.column_stack([columns[n] for n in names])
    return OutcomeTable(tuple(ids), tuple(names), values)


class TestValidateWeights:
    def test_constructed_perfect_predictor(self, rng):
        weights = rng.dirichlet(np.ones(2), size=12)
        ids = [f"P{i}" for i in range(12)]
        outcomes = make_outcomes(ids, score=5.0 * weights[:, 0] + 3.0)
        results = validate_weights(weights, ids, outcomes, "glda")
        r = next(x for x in results if x.predictor == "glda:class0")
        assert r.p_value < 1e-10

    def test_cardinality(self, rng):
        weights = rng.dirichlet(np.ones(3), size=10)
        ids = [f"P{i}" for i in range(10)]
        outcomes = make_outcomes(ids, a=rng.standard_normal(10),
                                 b=rng.standard_normal(10),
                                 c=rng.standard_normal(10))
        results = validate_weights(weights, ids, outcomes, "glda")
        assert len(results) == 9

    def test_subject_row_order_irrelevant(self, rng):
        weights = rng.dirichlet(np.ones(2), size=8)
        ids = [f"P{i}" for i in range(8)]
        y = rng.standard_normal(8)
        a = validate_weights(weights, ids, make_outcomes(ids, s=y), "m")
        perm = rng.permutation(8)
        shuffled = make_outcomes([ids[i] for i in perm], s=y[perm])
        b = validate_weights(weights, ids, shuffled, "m")
        for ra, rb in zip(a, b):
            assert ra.p_value == pytest.approx(rb.p_value, abs=1e-12)
            assert ra.slope == pytest.approx(rb.slope, abs=1e-12)

    def test_pairwise_deletion(self, rng):
        weights = rng.dirichlet(np.ones(2), size=6)
        ids = [f"P{i}" for i in range(6)]
        y = rng.standard_normal(6)
        y[0] = np.nan
        results = validate_weights(weights, ids, make_outcomes(ids, s=y), "m")
        assert all(r.n == 5 for r in results)

    def test_too_little_overlap(self, rng):
        weights = rng.dirichlet(np.ones(2), size=5)
        outcomes = make_outcomes(["Q1", "Q2"], s=[1.0, 2.0])
        with pytest.raises(DataValidationError):
            validate_weights(weights, [f"P{i}" for i in range(5)], outcomes,
                             "m")


class TestCompareModels:
    def _results(self, rng, label, k=3):
        ids = [f"P{i}" for i in range(15)]
        weights = rng.dirichlet(np.ones(k), size=15)
        outcomes = make_outcomes(ids, a=rng.standard_normal(15),
                                 b=rng.standard_normal(15),
                                 c=rng.standard_normal(15))
        return validate_weights(weights, ids, outcomes, label)

    def test_identical_inputs_tie(self, rng):
        a = self._results(rng, "glda")
        b = [r.__class__(**{**r.__dict__, "predictor":
                            r.predictor.replace("glda", "gmm")}) for r in a]
        cells = compare_models(a, b)
        assert all(c["winner"] == "tie" for c in cells)

    def test_grid_shape(self, rng):
        cells = compare_models(self._results(rng, "glda"),
                               self._results(rng, "gmm"))
        assert len(cells) == 9  # 3 classes x 3 outcomes, two models per cell
        assert {c["winner"] for c in cells} <= {"glda", "gmm", "tie"}

    def test_alignment_permutes_gmm_classes(self, rng):
        a = self._results(rng, "glda")
        b = self._results(rng, "gmm")
        glda_means = np.array([[0.0, 0.0], [5.0, 5.0], [-5.0, 5.0]])
        gmm_means = glda_means[[2, 0, 1]]
        cells = compare_models(a, b, glda_means=glda_means,
                               gmm_means=gmm_means)
        lookup = {(c["class"], c["outcome"]): c for c in cells}
        grid_b = {(int(r.predictor[-1]), r.outcome): r for r in b}
        # glda class 0 pairs with gmm class 1 under this permutation
        cell = lookup[(0, "a")]
        assert cell["gmm"]["p_value"] == grid_b[(1, "a")].p_value

    def test_k_mismatch(self, rng):
        with pytest.raises(DataValidationError):
            compare_models(self._results(rng, "glda", k=3),
                           self._results(rng, "gmm", k=2))


class TestRendering:
    def test_text_and_json_agree(self, rng):
        results = TestCompareModels()._results(rng, "glda")
        import json
        from gldakit.validate import results_to_json
        doc = json.loads(results_to_json(results))
        text = render_results(results)
        for rec in doc:
            assert f"{rec['p_value']:.6g}" in text
        assert "no multiple-comparison correction" in text

    def test_comparison_renders(self, rng):
        cells = compare_models(self._r(rng, "glda"), self._r(rng, "gmm"))
        text = render_comparison(cells)
        assert "winner" in text and "glda_p" in text

    def _r(self, rng, label):
        return TestCompareModels()._results(rng, label)
