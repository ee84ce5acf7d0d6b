"""Smoke test for the liqlab extension module.

Build and install first, e.g. `pip install ./crates/py --no-build-isolation`,
then run `python crates/py/python/smoke_test.py`.
"""

import math

import liqlab


def check_params():
    p = liqlab.SantaFeParams(lambda_=10.0, alpha_k=0.0, n=120, horizon=5.0, seed=3)
    assert p.lambda_ == 10.0 and p.n == 120
    p.horizon = 4.0
    assert p.to_dict()["horizon"] == 4.0
    try:
        liqlab.SantaFeParams(bogus=1)
    except TypeError:
        pass
    else:
        raise AssertionError("unknown parameter accepted")
    return p


def check_santafe(p):
    out = liqlab.run_santafe(p)
    assert out["crisis_time"] is None and not out["aborted"]
    sim = liqlab.SantaFeSim(p)
    first = sim.step()
    assert first is not None and first["time"] > 0.0
    sim.run_until(2.0)
    assert sim.best_bid < sim.best_ask and sim.spread >= 1
    assert len(sim.queues()) == 120


def check_spread():
    p = liqlab.SpreadParams(alpha=0.25, horizon=2e5, sample_points=0)
    path = liqlab.run_spread(p)
    want = liqlab.linear_theory(0.5, 1.0, 0.25)["p_open"]
    assert abs(path["p_open"] / want - 1.0) < 0.02, (path["p_open"], want)

    q = liqlab.SpreadParams(lambda0_plus=1.0, lambda0_minus=0.5, variant="quadratic", epsilon=0.3, sample_points=0)
    census = liqlab.escape_census(q, replicas=50, cap_time=500.0)
    assert len(census["escape_times"]) + census["censored"] == 50


def check_theory():
    z = 2.0 / math.sqrt(2.0 * 1.5 * 4.0)
    assert abs(liqlab.first_passage_prob(2.0, 4.0, 0.0, 1.5) - math.erfc(z)) < 1e-9
    pf = liqlab.price_feedback_theory(0.5, 1.0, 1.0)
    assert pf["regime"] == "linear_growth" and pf["alpha_star"] == 2.0
    assert liqlab.metastability_theory(1.0, 0.0, 1.0, 0.2)["barrier"] > 0.0


def check_analysis():
    alphas = [-0.4 + 0.005 * i for i in range(181)]
    curves = liqlab.planted_chi_curves([50, 100, 200, 400], [60, 120, 240], alphas)
    fit = liqlab.fss(curves)
    assert abs(fit["gamma"] - 2.0) < 0.2 and abs(fit["zeta"] - 3.0) < 0.3

    reg = liqlab.planted_flux_regression(horizon=2e5)
    assert abs(reg["c1"]["estimate"] + 2.0) < 0.2

    sample = [1.0 + math.floor(math.log(1.0 - (i + 0.5) / 4000) / math.log(0.5)) for i in range(4000)]
    assert abs(liqlab.fit_geometric(sample, min_support=1.0)["r"] - 0.5) < 0.03
    sf = liqlab.survival_function([1.0, 2.0, 2.0, 3.0])
    assert sf["support"] == [1.0, 2.0, 3.0] and sf["sf"][0] == 1.0
    assert liqlab.susceptibility([None, 10.0], 50.0) == 800.0


if __name__ == "__main__":
    check_santafe(check_params())
    check_spread()
    check_theory()
    check_analysis()
    print("liqlab", liqlab.__version__, "smoke test passed")
