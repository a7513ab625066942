"""Univariate OLS validation of subject-level outcomes against class
weights/proportions, and the side-by-side model comparison report."""

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import betainc

from .errors import DataValidationError
from .glda import align_labels


def significance_band(p):
    """Marker per the conventional thresholds: ** below 0.01, * below 0.05,
    . below 0.1, empty otherwise."""
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    if p < 0.1:
        return "."
    return ""


@dataclass(frozen=True)
class RegressionResult:
    outcome: str
    predictor: str
    n: int
    slope: float
    intercept: float
    p_value: float
    r2_adj: float
    significance_band: str


def _t_two_sided_p(t, df):
    # P(|T| > t) via the regularized incomplete beta function
    t2 = float(t) * float(t)
    if not np.isfinite(t2):
        return 0.0
    return float(betainc(df / 2.0, 0.5, df / (df + t2)))


def ols_univariate(x, y, outcome="y", predictor="x"):
    """Closed-form univariate OLS with a two-sided slope t-test.

    Adjusted R^2 uses the univariate penalty 1 - (1-R^2)(n-1)/(n-2).
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    n = x.size
    if n != y.size:
        raise DataValidationError("x and y must have equal length")
    if n < 3:
        raise DataValidationError("need at least 3 points")
    xbar, ybar = x.mean(), y.mean()
    sxx = float(np.sum((x - xbar) ** 2))
    sxy = float(np.sum((x - xbar) * (y - ybar)))
    syy = float(np.sum((y - ybar) ** 2))
    if sxx <= 0.0:
        raise DataValidationError("degenerate predictor (zero variance)")
    if syy <= 0.0:
        raise DataValidationError("degenerate response (zero variance)")
    slope = sxy / sxx
    intercept = ybar - slope * xbar
    ss_res = max(syy - slope * sxy, 0.0)
    r2 = 1.0 - ss_res / syy
    df = n - 2
    if ss_res == 0.0:
        p = 0.0
    else:
        se = np.sqrt(ss_res / df / sxx)
        p = _t_two_sided_p(slope / se, df)
    r2_adj = 1.0 - (1.0 - r2) * (n - 1) / (n - 2)
    return RegressionResult(outcome=outcome, predictor=predictor, n=n,
                            slope=slope, intercept=intercept, p_value=p,
                            r2_adj=r2_adj, significance_band=significance_band(p))


def validate_weights(weights, subject_ids, outcomes, model_label):
    """One regression per (class, outcome) pair over the subjects present in
    both tables; subjects missing a given outcome are dropped pairwise."""
    weights = np.asarray(weights, dtype=float)
    if weights.ndim != 2 or weights.shape[0] != len(subject_ids):
        raise DataValidationError("weights must be (M, K) matching subject_ids")
    k = weights.shape[1]
    lookup = {sid: i for i, sid in enumerate(outcomes.subject_ids)}
    rows = [(m, lookup[sid]) for m, sid in enumerate(subject_ids)
            if sid in lookup]
    if len(rows) < 3:
        raise DataValidationError("fewer than 3 subjects overlap the outcomes")
    widx = np.asarray([r[0] for r in rows])
    oidx = np.asarray([r[1] for r in rows])

    results = []
    for name in outcomes.outcome_names:
        y_all = outcomes.column(name)[oidx]
        ok = ~np.isnan(y_all)
        if ok.sum() < 3:
            raise DataValidationError(
                f"fewer than 3 subjects with outcome {name!r}")
        for j in range(k):
            results.append(ols_univariate(
                weights[widx[ok], j], y_all[ok],
                outcome=name, predictor=f"{model_label}:class{j}"))
    return results


def compare_models(glda_results, gmm_results, glda_means=None, gmm_means=None):
    """Side-by-side p / adjusted-R^2 grid per (class, outcome), flagging the
    model with the lower p-value in each cell.

    When component means are supplied, GMM classes are first aligned to the
    nearest GLDA component means so matching rows describe matching states.
    """
    def index(results):
        grid = {}
        for r in results:
            j = int(r.predictor.rsplit("class", 1)[1])
            grid[(j, r.outcome)] = r
        return grid

    g1, g2 = index(glda_results), index(gmm_results)
    classes1 = sorted({c for c, _ in g1})
    classes2 = sorted({c for c, _ in g2})
    outcomes1 = sorted({o for _, o in g1})
    if classes1 != classes2 or outcomes1 != sorted({o for _, o in g2}):
        raise DataValidationError("result grids have mismatched classes/outcomes")

    if glda_means is not None and gmm_means is not None:
        perm = align_labels(glda_means, gmm_means)
    else:
        perm = np.arange(len(classes1))

    cells = []
    for j in classes1:
        for outcome in outcomes1:
            a, b = g1[(j, outcome)], g2[(int(perm[j]), outcome)]
            if a.p_value < b.p_value:
                winner = "glda"
            elif b.p_value < a.p_value:
                winner = "gmm"
            else:
                winner = "tie"
            cells.append({"class": j, "outcome": outcome,
                          "glda": asdict(a), "gmm": asdict(b),
                          "winner": winner})
    return cells


# ---------------------------------------------------------------------------
# Report rendering
# ---------------------------------------------------------------------------

def _num(x):
    return f"{x:.6g}"


def render_results(results):
    """Aligned text grid of regression results (one row per pair).

    Raw per-pair p-values; no multiple-comparison correction is applied.
    """
    header = ["predictor", "outcome", "n", "slope", "p", "band", "adj_r2"]
    rows = [[r.predictor, r.outcome, str(r.n), _num(r.slope),
             _num(r.p_value), r.significance_band, _num(r.r2_adj)]
            for r in results]
    widths = [max(len(h), *(len(row[i]) for row in rows))
              for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    lines.append("(p-values are raw per-pair values; no multiple-comparison "
                 "correction)")
    return "\n".join(lines) + "\n"


def render_comparison(cells):
    header = ["class", "outcome", "glda_p", "glda_adj_r2",
              "gmm_p", "gmm_adj_r2", "winner"]
    rows = [[str(c["class"]), c["outcome"],
             _num(c["glda"]["p_value"]), _num(c["glda"]["r2_adj"]),
             _num(c["gmm"]["p_value"]), _num(c["gmm"]["r2_adj"]),
             c["winner"]] for c in cells]
    widths = [max(len(h), *(len(row[i]) for row in rows))
              for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines) + "\n"


def results_to_json(results):
    return json.dumps([asdict(r) for r in results], indent=2, sort_keys=True)
