"""Fast self-checks behind ``slelab verify``: the acceptance checks at a
small sample budget with a fixed seed.  The full-budget versions live in
the test suite."""

from __future__ import annotations

import math

import numpy as np

from . import bessel, experiments, geometry, loewner
from .params import make_params

PUBLISHED_SEED = 20240601


def _ode_closed_form():
    worst = 0.0
    for a in (0.5, 1.0):
        U = loewner.DrivingPath.constant(1e-4, 5.0)
        for th in (math.pi / 3, math.pi / 2, 3 * math.pi / 4):
            bf = loewner.boundary_angle_flow(U, th, 5.0, a)
            exact = np.exp(-a * U.times) * math.cos(th)
            worst = max(worst, float(np.abs(np.cos(bf.theta) - exact).max()))
    return worst <= 1e-8, f"max error {worst:.2e}"


def _quadrature():
    xs = np.linspace(0.01, math.pi / 2, 50)
    e1 = max(abs(bessel.exact_F(1.0, x) - 1 / math.tan(x)) for x in xs)
    e2 = max(abs(bessel.exact_F(2.0, x) - (1 / math.tan(x) + 1 / math.tan(x) ** 3 / 3))
             for x in xs)
    return max(e1, e2) <= 1e-10, f"max error {max(e1, e2):.2e}"


def _exit_prob(seed):
    est = bessel.mc_exit_prob(1.0, math.pi / 3, math.pi / 6, 4000, 1e-3, seed)
    ok = abs(est.mean - 1 / 3) <= max(3 * est.stderr, 0.02)
    return ok, f"{est.mean:.4f} +- {est.stderr:.4f} vs 1/3"


def _martingale(seed):
    s = bessel.sample_stopped(0.0, math.pi / 2, 0.3, 1.0, 4000, 1e-3, seed)
    parts = []
    ok = True
    for b in (0.5, 1.0, 2.0):
        w = s.normalized_martingale(b)
        m, se = w.mean(), w.std() / math.sqrt(w.size)
        ok &= abs(m - 1) <= 3 * se + 1e-12
        parts.append(f"beta={b}: {m:.4f}+-{se:.4f}")
    return bool(ok), "; ".join(parts)


def _koebe(seed):
    p = make_params(3.0, "radial")
    ok = True
    for i in range(3):
        U, _ = bessel.co_simulate_driving(p, math.pi / 2, 1e-3, 3 / (2 * p.a) + 0.1, seed + i)
        c = loewner.trace_curve(U, p, stride=5)
        for n in (1, 2, 3):
            rho = loewner.first_radius_time(c, n)
            if rho is None:
                continue
            lo, hi = loewner.koebe_bounds(n, p.a)
            tol = 5e-3 + 0.01 * rho
            ok &= lo - tol <= rho <= hi + tol
    return bool(ok), "3 curves, n = 1..3"


def _harmonic_disk():
    U = loewner.DrivingPath.constant(1e-3, 1.0)
    arc = geometry.CircleArc.unit(2.0, 2.0 + 2 * math.pi * 0.3)
    hl = geometry.harmonic_lengths(U, 0.0, arc, 1.0)
    return abs(hl.L - 0.3) <= 1e-6, f"L = {hl.L:.9f} for s = 0.3"


def _markov(seed):
    eps = experiments.geometric_eps(0.5, 12)
    ok = True
    vals = []
    for n in (4, 8, 12):
        ex = experiments.markov_tail_exact(eps, n)
        mc = experiments.markov_tail_mc(eps, n, 20000, seed)
        ok &= mc.within(ex, 3.0, 1e-12)
        vals.append(ex)
    ok &= vals[2] < vals[1] < vals[0]
    return bool(ok), "DP " + ", ".join(f"{v:.4f}" for v in vals)


def run_checks(seed: int = PUBLISHED_SEED):
    checks = [
        ("ode-closed-form", _ode_closed_form),
        ("quadrature-oracle", _quadrature),
        ("exit-probability", lambda: _exit_prob(seed)),
        ("martingale-normalization", lambda: _martingale(seed)),
        ("koebe-sandwich", lambda: _koebe(seed)),
        ("harmonic-full-disk", _harmonic_disk),
        ("markov-dp-vs-mc", lambda: _markov(seed)),
    ]
    out = []
    for name, fn in checks:
        ok, detail = fn()
        out.append((name, bool(ok), detail))
    return out
