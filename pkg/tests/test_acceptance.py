"""Acceptance gate: the ten primary criteria at their stated tolerances.

Each test prints one PASS/FAIL line; the lines are repeated in the pytest
terminal summary. Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import time

import numpy as np
import pytest

from conftest import GOLDEN, moran_oracle, random_graph_matrix
from countyrisk import io as fio
from countyrisk.aggregate import aggregate_scores, quantile
from countyrisk.bayes import GibbsConfig, bayes_p, gibbs_lm, standardize
from countyrisk.car import CarOptions, fit_car, phi_bounds
from countyrisk.errors import CountyRiskError
from countyrisk.exposure import Track, below_elevation_fraction, buffer_fraction
from countyrisk.factor import fit_paf_array, minmax_normalize, varimax
from countyrisk.geometry import box
from countyrisk.graph import graph_from_edge_list, weights
from countyrisk.moran import moran_mc, morans_i
from countyrisk.synth import REFERENCE_LOADINGS, build_fixture, gen_car_field, grid_graph

RESULTS = {}


class Gate:
    def __init__(self, number, title):
        self.number, self.title = number, title
        self.checks = []

    def check(self, name, ok, detail=""):
        self.checks.append((name, bool(ok), detail))

    def run(self, name, fn):
        """Record ``fn()`` as a check; an exception counts as a failure."""
        try:
            ok, detail = fn()
        except CountyRiskError as exc:
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        self.check(name, ok, detail)

    def finish(self):
        failed = [c for c in self.checks if not c[1]]
        status = "FAIL" if failed else "PASS"
        parts = "; ".join(f"{n}={'ok' if ok else 'FAILED'}{f' ({d})' if d else ''}" for n, ok, d in self.checks)
        line = f"criterion {self.number:2d} {status}  {self.title}: {parts}"
        RESULTS[self.number] = line
        print(line)
        assert not failed, line


def graph_from_matrix(A):
    labels = [f"u{i:03d}" for i in range(A.shape[0])]
    n = A.shape[0]
    return graph_from_edge_list(labels, [(labels[i], labels[j]) for i in range(n) for j in range(i + 1, n) if A[i, j]])


def synthetic_regression(rng, n=46, p=10, sigma=0.5):
    x = rng.standard_normal((n, p - 1))
    beta = rng.normal(0, 0.5, p - 1)
    y = 0.3 + x @ beta + sigma * rng.standard_normal(n)
    return y, x


def test_criterion_01_flat_prior_ols():
    gate = Gate(1, "flat-prior OLS equivalence")
    y, x = synthetic_regression(np.random.default_rng(101))
    ys, xs, _ = standardize(y, x)
    X = np.column_stack([np.ones(46), xs])
    start = time.perf_counter()
    post = gibbs_lm(ys, X, GibbsConfig(n_chains=4, n_burn=1000, n_keep=10000, seed=1))
    elapsed = time.perf_counter() - start
    ols = np.linalg.lstsq(X, ys, rcond=None)[0]
    delta = float(np.max(np.abs(post.means - ols)))
    gate.check("max|delta|<0.01", delta < 0.01, f"{delta:.4f}")
    gate.check("runtime<10s", elapsed < 10.0, f"{elapsed:.2f}s")
    gate.check("draws=10000", post.n_draws == 10000)
    gate.finish()


def test_criterion_02_credible_coverage():
    gate = Gate(2, "95% credible-set coverage")
    rng = np.random.default_rng(202)
    hits = total = 0
    for rep in range(200):
        x = np.column_stack([np.ones(46), rng.standard_normal((46, 9))])
        beta = rng.normal(0, 1, 10)
        y = x @ beta + 0.5 * rng.standard_normal(46)
        sets = gibbs_lm(y, x, GibbsConfig(n_chains=2, n_burn=200, n_keep=2000, seed=rep)).credible_sets()
        hits += int(np.sum((sets[:, 0] <= beta) & (beta <= sets[:, 1])))
        total += beta.size
    rate = hits / total
    gate.check("rate in [0.90,0.99]", 0.90 <= rate <= 0.99, f"{rate:.3f} over {total} intervals")
    gate.finish()


def test_criterion_03_moran():
    gate = Gate(3, "Moran's I correctness")
    rng = np.random.default_rng(303)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(3, 51))
        w = weights(graph_from_matrix(random_graph_matrix(rng, n)), "row_standardized")
        y = rng.standard_normal(n)
        worst = max(worst, abs(morans_i(y, w).i_statistic - moran_oracle(y, w.values)))
    gate.check("sparse=loop to 1e-12", worst <= 1e-12, f"max diff {worst:.1e}")

    worst = 0.0
    for n in (3, 5, 10, 25):
        A = ~np.eye(n, dtype=bool)
        w = weights(graph_from_matrix(A), "row_standardized")
        worst = max(worst, abs(morans_i(rng.standard_normal(n), w).i_statistic + 1 / (n - 1)))
    gate.check("complete graph -1/(n-1)", worst <= 1e-12, f"max diff {worst:.1e}")

    w = weights(grid_graph(7, 7), "row_standardized")
    rej = sum(moran_mc(rng.standard_normal(49), w, 999, seed=rep).p_value <= 0.05 for rep in range(200))
    gate.check("level in [0.02,0.09]", 0.02 <= rej / 200 <= 0.09, f"{rej / 200:.3f}")
    gate.finish()


def test_criterion_04_car_recovery():
    gate = Gate(4, "CAR recovery")
    wb = weights(grid_graph(10, 10), "binary")
    lo, hi = phi_bounds(wb)
    inside = []

    def recover_015():
        est = []
        for rep in range(100):
            fit = fit_car(gen_car_field(wb, 0.15, 1.0, 0.0, seed=rep), wb)
            inside.append(lo < fit.phi < hi)
            est.append(fit.phi)
        m = float(np.mean(est))
        return abs(m - 0.15) <= 0.03, f"mean {m:.4f}"

    gate.run("phi=0.15 mean within 0.03", recover_015)

    better = 0
    for rep in range(100):
        y = gen_car_field(wb, 0.0, 1.0, 2.0, seed=1000 + rep)
        fit = fit_car(y, wb)
        inside.append(lo < fit.phi < hi)
        better += np.mean(np.abs(fit.smoothed - y.mean())) < np.mean(np.abs(y - y.mean()))
    gate.check("phi=0 smoothed MAD < raw MAD", better == 100, f"{better}/100")
    gate.check("phi strictly inside bounds", all(inside), f"{sum(inside)}/{len(inside)} fits, bounds ({lo:.4f}, {hi:.4f})")
    gate.finish()


def test_criterion_05_factor_recovery():
    gate = Gate(5, "factor recovery")
    lam = np.array(REFERENCE_LOADINGS)
    R = np.outer(lam, lam)
    np.fill_diagonal(R, 1.0)
    X = np.random.default_rng(505).multivariate_normal(np.zeros(3), R, size=4000)
    model = fit_paf_array(X)
    err = float(np.max(np.abs(model.loadings[:, 0] - lam)))
    gate.check("loadings within 0.05", err <= 0.05, f"{np.round(model.loadings[:, 0], 3).tolist()}")
    ident = float(np.max(np.abs(model.communalities - model.loadings[:, 0] ** 2)))
    gate.check("h2 = lambda^2 to 1e-10", ident <= 1e-10, f"{ident:.1e}")
    L = model.loadings.copy()
    rotated = varimax(L)
    gate.check("varimax k=1 bitwise", rotated is L or np.array_equal(rotated, L))
    gate.finish()


def test_criterion_06_normalization_aggregation():
    gate = Gate(6, "normalization and aggregation")
    raw = np.random.default_rng(606).standard_normal(500) * 3.7 + 1.1
    out, _, _ = minmax_normalize(raw)
    gate.check("min->0 max->1 exactly", out[np.argmin(raw)] == 0.0 and out[np.argmax(raw)] == 1.0)

    rng = np.random.default_rng(607)
    scores = rng.uniform(0, 1, 300)
    labels = [f"u{int(k)}" for k in rng.integers(0, 12, 300)]
    m = scores.mean()
    s2 = sum((v - m) ** 2 for v in scores) / (scores.size - 1)
    worst = max(abs(a.srs_variance - s2 / a.n) for a in aggregate_scores(labels, scores))
    gate.check("srs_variance = s2/n_j", worst <= 1e-15, f"max diff {worst:.1e}")

    hand = [([0.2, 0.4, 0.6, 0.8], 0.25, 0.35), ([0.2, 0.4, 0.6, 0.8], 0.75, 0.65),
            ([1.0, 2.0, 3.0, 4.0, 5.0], 0.25, 2.0), ([1.0, 2.0, 3.0, 4.0, 5.0], 0.75, 4.0),
            ([0.0, 1.0], 0.25, 0.25), ([3.0, 1.0, 2.0], 0.25, 1.5)]
    worst = max(abs(quantile(v, p) - q) for v, p, q in hand)
    gate.check("hand quantiles", worst <= 1e-12, f"max diff {worst:.1e}")
    gate.finish()


def test_criterion_07_exposure():
    gate = Gate(7, "exposure analytics")
    unit = box(0, 0, 1, 1)
    half = buffer_fraction(unit, [Track("T", "2000-01-01", [(0, -5), (0, 5)])], 0.5, 0.005)
    gate.check("half coverage 0.5+-0.01", abs(half - 0.5) <= 0.01, f"{half:.4f}")
    full = buffer_fraction(unit, [Track("T", "2000-01-01", [(0.5, -5), (0.5, 5)])], 5.0, 0.005)
    gate.check("full coverage 1.0", full == 1.0, f"{full}")

    fx = build_fixture(42)
    radii = (10.0, 25.0, 50.0, 100.0)
    thresholds = (10.0, 35.0, 60.0, 100.0)
    ok_r = ok_t = True
    for _, poly in fx.polygons:
        f = [buffer_fraction(poly, fx.tracks, r, 1.0) for r in radii]
        ok_r &= all(a <= b for a, b in zip(f, f[1:]))
        try:
            e = [below_elevation_fraction(poly, fx.elevation, t) for t in thresholds]
        except CountyRiskError:
            continue
        ok_t &= all(a <= b for a, b in zip(e, e[1:]))
    gate.check("monotone in radius", ok_r)
    gate.check("monotone in threshold", ok_t)
    gate.finish()


def test_criterion_08_bayes_p():
    gate = Gate(8, "posterior predictive calibration")
    rng = np.random.default_rng(808)
    inside = 0
    for rep in range(200):
        y, x = synthetic_regression(rng, 46, 4, 1.0)
        X = np.column_stack([np.ones(46), x])
        post = gibbs_lm(y, X, GibbsConfig(n_chains=2, n_burn=100, n_keep=1000, seed=rep))
        inside += 0.05 <= bayes_p(post, y, X, seed=rep) <= 0.95
    gate.check(">=90% in [0.05,0.95]", inside >= 180, f"{inside}/200")

    y, x = synthetic_regression(rng, 46, 4, 1.0)
    y[0] += 10.0
    X = np.column_stack([np.ones(46), x])
    p = bayes_p(gibbs_lm(y, X, GibbsConfig(n_chains=4, n_burn=500, n_keep=8000, seed=8)), y, X, seed=8)
    gate.check("10-sigma outlier p<0.05", p < 0.05, f"p = {p:.4f}")
    gate.finish()


def test_criterion_09_end_to_end_determinism(pipeline_runs):
    gate = Gate(9, "end-to-end determinism")
    names = sorted(p.name for p in (GOLDEN / "outputs").iterdir())
    for tag, res in pipeline_runs.items():
        bad = [n for n in names if (res.output_dir / n).read_bytes() != (GOLDEN / "outputs" / n).read_bytes()]
        gate.check(f"{tag} vs golden", not bad, ", ".join(bad) or f"{len(names)} files identical")
    gate.finish()


def test_criterion_10_table_shapes(pipeline_runs):
    gate = Gate(10, "table-shape conformance")
    report = fio.read_json(pipeline_runs["w1"].output_dir / "report.json")
    t4 = report["descriptives"]
    gate.check("descriptive table columns", all(list(r) == ["variable", "mean", "sd", "min", "max"] for r in t4),
               f"{len(t4)} variables")
    t5 = report["coefficients"]
    gate.check("coefficient table columns", all(list(r) == ["variable", "posterior_mean", "lower_95", "upper_95"] for r in t5),
               f"{len(t5)} coefficients")
    gate.check("bayes p and DIC", 0 <= report["bayes_p"] <= 1 and np.isfinite(report["dic"]),
               f"p={report['bayes_p']:.3f}, DIC={report['dic']:.2f}")
    gate.finish()


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v", "-s"]))
