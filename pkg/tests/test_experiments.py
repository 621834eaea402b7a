import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slelab import experiments as E
from slelab.params import make_params


def cfg(kappa=3.0, variant="two-sided", **kw):
    base = dict(dt=1e-3, n_samples=20, master_seed=11, stride=20)
    base.update(kw)
    return E.ExperimentConfig(make_params(kappa, variant), **base)


# ---------------------------------------------------------------- fitter


def test_fit_exact_power():
    f = E.fit_exponent([(1, 1), (2, 4), (4, 16)])
    assert f.slope == pytest.approx(2) and f.residual == pytest.approx(0, abs=1e-12)


def test_fit_constant():
    assert E.fit_exponent([(1, 3.0), (2, 3.0)]).slope == pytest.approx(0, abs=1e-12)


def test_fit_errors():
    with pytest.raises(ValueError):
        E.fit_exponent([(1, 1)])
    with pytest.raises(ValueError):
        E.fit_exponent([(1, 1), (2, 0)])
    with pytest.raises(ValueError):
        E.fit_exponent([(-1, 1), (2, 1)])


@settings(max_examples=50)
@given(st.floats(-3, 3), st.floats(0.1, 10),
       st.lists(st.floats(0.01, 100), min_size=2, max_size=8, unique=True))
def test_fit_recovers_synthetic(alpha, c, xs):
    if max(xs) / min(xs) < 1.01:
        return
    f = E.fit_exponent([(x, c * x ** alpha) for x in xs])
    assert f.slope == pytest.approx(alpha, abs=1e-8)
    assert math.exp(f.intercept) == pytest.approx(c, rel=1e-7)


# ---------------------------------------------------------------- config


def test_config_validation():
    with pytest.raises(ValueError):
        cfg(n_samples=0)
    with pytest.raises(ValueError):
        cfg(dt=0.0)
    with pytest.raises(ValueError):
        cfg(k=-1)


def test_config_round_trip():
    c = cfg(radii=(0.4, 0.2), eps_grid=(0.25, 0.125))
    d = json.loads(json.dumps(c.to_dict()))
    assert E.ExperimentConfig.from_dict(d) == c


# ---------------------------------------------------------------- return probability


def test_return_prob_n0_is_one():
    c = cfg(n=0, n_samples=5)
    assert E.return_prob_experiment(c).mean == 1.0


def test_return_prob_deterministic_and_bounded():
    c = cfg(n=1, horizon_m=2, n_samples=10)
    a = E.return_prob_experiment(c)
    b = E.return_prob_experiment(c)
    assert a == b
    assert 0 <= a.mean <= 1 and a.stderr <= 1 / (2 * math.sqrt(a.n_samples)) + 1e-15


def test_return_prob_shared_curves():
    c = cfg(n=1, horizon_m=2, n_samples=10)
    multi = E.return_prob_experiment(c, ns=[1, 2])
    assert multi[1].mean == E.return_prob_experiment(c).mean


def test_return_prob_errors():
    with pytest.raises(ValueError):
        E.return_prob_experiment(cfg(variant="chordal"))
    with pytest.raises(ValueError):
        E.return_prob_experiment(cfg(horizon_m=1))
    with pytest.raises(ValueError):
        E.return_prob_experiment(cfg(k=0))


def test_return_prob_horizon_monotone():
    short = E.return_prob_experiment(cfg(n=1, horizon_m=2, n_samples=30))
    long = E.return_prob_experiment(cfg(n=1, horizon_m=4, n_samples=30))
    assert long.mean >= short.mean - 3 * math.hypot(short.stderr, long.stderr)


# ---------------------------------------------------------------- crosscuts


def test_crosscut_frequencies_small():
    c = cfg(kappa=6, variant="radial", n_samples=10, radii=(0.8, 0.4))
    est = E.crosscut_frequencies(c, n_trunc=3)
    assert set(est) == {0.8, 0.4}
    assert est[0.8].mean >= est[0.4].mean  # nested arcs: the wider one is hit first
    assert all(0 <= e.mean <= 1 for e in est.values())


def _resolved(seed, n_stop=3, radius=0.4):
    p = make_params(6.0, "radial")
    U, curve = E._sample_curve(p, 1e-3, n_stop, seed, 8)
    return p, U, curve, E.resolve_near(U, curve, -1 + 0j, radius, 8, n_stop, seed)


def test_resolve_near_is_a_consistent_trace():
    from slelab import loewner as lw
    # find a curve that needs refinement near -1
    for seed in range(40):
        p, U0, c0, (U, c, level) = _resolved(seed)
        if level > 0:
            break
    assert level > 0
    assert U.n_steps > U0.n_steps
    assert np.array_equal(U.values[U.index_of(U0.times)], U0.values)
    # every point is what a direct trace of the refined path gives
    idx = U.index_of(c.times)
    pts, _, _ = lw.trace_kernel(U.values, U.times, idx, p.a, lw.TIP_DELTA,
                                lw.STEP_FRACTION, lw.MAX_SUBSTEPS, -np.inf, lw.TRACE_BLOCK)
    assert np.allclose(pts[1:], c.points[1:], atol=1e-12)
    assert lw.first_radius_time(c, 3) is not None
    if level < E.RESOLVE_LEVELS:
        t_end = lw.first_radius_time(c, 3)
        d = E._segment_distance(c.points, -1 + 0j)
        ln = np.abs(np.diff(c.points))
        near = (d - ln < 0.4) & (c.times[1:] <= t_end) & (np.diff(idx) == 1)
        assert np.all(ln[near] <= E.RESOLVE_ETA * d[near])


def test_resolve_near_noop_far_away():
    p = make_params(6.0, "radial")
    U, curve = E._sample_curve(p, 1e-3, 2, 5, 8)
    U2, c2, level = E.resolve_near(U, curve, -1 + 0j, 1e-9, 8, 2, 5, eta=10.0)
    assert level == 0 and U2 is U


def test_crosscut_errors():
    with pytest.raises(ValueError):
        E.crosscut_frequencies(cfg(variant="two-sided", radii=(0.4, 0.2)))
    with pytest.raises(ValueError):
        E.crosscut_frequencies(cfg(variant="radial", radii=(0.4,)))


# ---------------------------------------------------------------- bessel exponent


def test_bessel_exponent_small():
    c = E.ExperimentConfig(make_params(2.0, "radial"), 1e-3, 4000, 5,
                           eps_grid=(0.5, 0.25, 0.125))
    fit, est = E.bessel_exponent_experiment(c)
    assert 0.4 < fit.slope < 1.6
    assert est[0.5].mean > est[0.25].mean > est[0.125].mean


def test_bessel_exponent_errors():
    with pytest.raises(ValueError):
        E.bessel_exponent_experiment(E.ExperimentConfig(make_params(4.0), 1e-3, 10, 1,
                                                        eps_grid=(0.5, 0.25, 0.1)))
    with pytest.raises(ValueError):
        E.bessel_exponent_experiment(E.ExperimentConfig(make_params(2.0), 1e-3, 10, 1,
                                                        eps_grid=(0.5, 0.25)))


# ---------------------------------------------------------------- markov chain


def test_markov_zero_eps():
    for n in (1, 5, 10):
        assert E.markov_return_tail(np.zeros(n), n) == 0.0


def test_markov_forced_resets():
    assert E.markov_return_tail(np.full(4, 1 - 1e-12), 4) == pytest.approx(1.0, abs=1e-9)


def test_markov_geometric_dp_vs_mc():
    eps = E.geometric_eps(0.5, 10)
    ex = E.markov_return_tail(eps, 10, "exact")
    mc = E.markov_return_tail(eps, 10, "mc", 20000, 3)
    assert mc.within(ex, 3.0)


def test_markov_brute_force():
    # enumerate all 2^n paths for a small chain
    eps = np.array([0.6, 0.4, 0.3, 0.3, 0.1])
    n = 5
    total = 0.0
    for bits in range(2 ** n):
        x, prob = 0, 1.0
        for s in range(n):
            if bits >> s & 1:
                prob *= eps[x]
                x = 0
            else:
                prob *= 1 - eps[x]
                x += 1
        if 2 * x < n:
            total += prob
    assert E.markov_tail_exact(eps, n) == pytest.approx(total, abs=1e-15)


@settings(max_examples=40)
@given(st.lists(st.floats(0, 0.99), min_size=1, max_size=15), st.integers(1, 15))
def test_markov_dp_is_probability(vals, n):
    eps = np.sort(vals)[::-1]
    if eps.size < n:
        with pytest.raises(ValueError):
            E.markov_tail_exact(eps, n)
        return
    p = E.markov_tail_exact(eps, n)
    assert -1e-12 <= p <= 1 + 1e-12


def test_markov_errors():
    with pytest.raises(ValueError):
        E.markov_return_tail([0.1, 0.2, 0.3], 3)
    with pytest.raises(ValueError):
        E.markov_return_tail([0.5], 0)
    with pytest.raises(ValueError):
        E.markov_return_tail([1.0, 0.5], 2)
    with pytest.raises(ValueError):
        E.markov_return_tail([0.5], 1, "bogus")
    with pytest.raises(ValueError):
        E.geometric_eps(1.0, 3)


def test_geometric_eps():
    assert E.geometric_eps(0.5, 3).tolist() == [0.5, 0.25, 0.125]


# ---------------------------------------------------------------- output


def test_writers(tmp_path):
    E.write_summary(tmp_path, {"a": 1.5})
    E.write_points(tmp_path, ["x", "y"], [[0.1, 2], [1 / 3, 3]])
    assert json.loads((tmp_path / "summary.json").read_text()) == {"a": 1.5}
    raw = (tmp_path / "points.csv").read_bytes()
    assert b"\r" not in raw and raw.splitlines()[2] == b"0.33333333333333331,3"
    assert E.artifact_version().startswith("0.1.0+")
