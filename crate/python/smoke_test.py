"""Smoke test for the interp_lab extension module.

Build and expose the module, then run this script:

    cargo build --release -p interp-lab-py --features extension-module
    cp target/release/libinterp_lab_py.so python/interp_lab.so
    python3 python/smoke_test.py
"""

import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import interp_lab as il


def main():
    cov = il.Covariance.diagonal([1.0] + [0.01] * 999)
    r, big_r = cov.effective_ranks()
    assert abs(r - 10.99) < 1e-10, r
    assert abs(big_r - 10.99**2 / 1.0999) < 1e-8, big_r

    iso = il.Covariance.identity(200)
    prob = il.Problem(iso, [math.sqrt(0.5)] + [0.0] * 199, n=50, noise_variance=0.5)
    assert prob.null_risk() == 1.0 and prob.bayes_risk() == 0.5

    ds = prob.sample(seed=3)
    assert len(ds.x) == 50 and len(ds.x[0]) == 200
    l2 = ds.min_l2()
    resid = max(abs(sum(a * b for a, b in zip(row, l2["w"])) - y) for row, y in zip(ds.x, ds.y))
    assert resid < 1e-8, resid
    l1 = ds.min_l1()
    assert l1["norm"] <= sum(abs(v) for v in l2["w"]) + 1e-9
    assert prob.population_loss(l2["w"]) >= prob.bayes_risk()

    value, w = ds.worst_case_l2(prob, 2.0 * l2["norm"])
    assert value >= prob.population_loss(l2["w"]) - 1e-9

    mean, se = iso.gaussian_width("l2", samples=2000, seed=1)
    assert abs(mean - math.sqrt(200)) < 5 * se + 0.01, (mean, se)

    rep = il.ucb_main(prob, k=0, b=l2["norm"], delta=0.1, samples=500, seed=2)
    assert rep["value"] > 0 and "beta" in rep["terms"]
    k, best = il.optimize_split(prob, b=1.0, delta=0.1, family="euclid_risk")
    assert 0 <= k <= 50 and best["value"] > 0

    cfg = """
experiment = "figure1"
master_seed = 4
trials = 3
[problem]
n = 20
noise_variance = 0.5
lambdas = [1.0]
d_grid = [10, 40]
[problem.w_star]
kind = "first"
value = 0.7071067811865476
"""
    tables = dict(il.run_experiment(cfg))
    lines = tables["figure1_trials"].splitlines()
    assert lines[0] == "lambda,d,trial,loss,bound,null,bayes,norm_sq", lines[0]
    assert lines[1].split(",")[3] == "infeasible"
    assert tables == dict(il.run_experiment(cfg, threads=1))

    try:
        il.run_experiment(cfg.replace("figure1", "bound_check").replace("master_seed = 4", "delta = 0.3"))
    except ValueError as e:
        assert "1/4" in str(e)
    else:
        raise AssertionError("delta > 1/4 accepted")

    print("interp_lab", il.__version__, "smoke test passed")


if __name__ == "__main__":
    main()
