"""Smoke test for the rrm extension module.

Build and install first:  pip install --no-build-isolation ./crates/py
"""

import math

import rrm


def main():
    sol = rrm.solve_inner([0.0, 1.0, 2.0], 1.0 / 3.0)
    assert abs(sol.achieved_entropy - math.log(2.0)) < 1e-8, sol
    assert abs(sum(sol.weights) - 1.0) < 1e-12
    assert sol.weights[0] > sol.weights[1] > sol.weights[2]
    assert math.isinf(rrm.solve_inner([3.0, 1.0], 0.0).lambda_star)
    assert abs(rrm.entropy([0.5, 0.5]) - math.log(2.0)) < 1e-15
    w = rrm.weights_at_lambda([0.0, 1.0], 1.0)
    assert abs(w[0] / w[1] - math.e) < 1e-12

    xs = [-4.5 + i for i in range(10)]
    features = [[x, 1.0] for x in xs] + [[3.0, 1.0], [-4.0, 1.0]]
    targets = [1.5 * x - 0.5 for x in xs] + [80.0, -70.0]
    erm = rrm.fit_linreg(features, targets, robust=False)
    fit = rrm.fit_linreg(features, targets, eps_tilde=0.3)
    assert abs(fit.params[0] - 1.5) < 1e-8 and abs(fit.params[1] + 0.5) < 1e-8, fit
    assert abs(erm.params[0] - 1.5) > 0.1
    assert max(fit.weights[10:]) < 1e-6
    assert all(b <= a + 1e-12 for a, b in zip(fit.objectives, fit.objectives[1:]))

    x, labels, _ = rrm.generate_logreg(200, 0.05, seed=3)
    logit = rrm.fit_logreg(x, labels, eps_tilde=0.3)
    assert rrm.angle_deg(logit.params, [-1.0, 1.0, 1.0]) < 30.0

    pts, corrupted = rrm.generate_pca(60, 0.2, seed=4)
    assert len(pts) == 60 and len(corrupted) == 60
    direction = rrm.fit_pca(pts, eps_tilde=0.4).params
    assert abs(math.hypot(*direction) - 1.0) < 1e-10

    pts, _ = rrm.generate_covariance(50, 0.0, seed=5)
    g = rrm.fit_gaussian(pts, robust=False)
    assert rrm.cov_relative_error(g.covariance, [[1.0, 0.8], [0.8, 1.0]]) < 1.0

    feats, ys, _ = rrm.generate_linreg(40, 0.2, seed=6)
    assert len(feats[0]) == 10 and len(ys) == 40

    summary = rrm.run_experiment("pca", mc_runs=4, seed=1)
    assert summary["ERM"]["count"] + summary["ERM"]["excluded"] == 4
    assert len(summary["RRM"]["values"]) == summary["RRM"]["count"]

    try:
        rrm.run_experiment("ridge")
    except ValueError as e:
        assert "linreg" in str(e)
    else:
        raise AssertionError("unknown experiment accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
