import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slelab import geometry as G
from slelab import loewner as lw
from slelab.bessel import co_simulate_driving
from slelab.params import make_params

TWO_PI = 2 * math.pi


def polyline(*pts):
    pts = np.array(pts, dtype=complex)
    return lw.TraceCurve(np.arange(pts.size, dtype=float), pts)


@pytest.fixture(scope="module")
def slit():
    p = make_params(3)
    U = lw.DrivingPath.constant(1e-3, 5.0)
    return p, U, lw.trace_curve(U, p, stride=10)


@pytest.fixture(scope="module")
def wiggly():
    p = make_params(3)
    U = lw.DrivingPath.from_function(lambda t: 0.5 * math.sin(2 * t), 1e-3, 6.0)
    return p, U, lw.trace_curve(U, p, stride=5)


# ---------------------------------------------------------------- arcs


def test_circle_arc_validation():
    with pytest.raises(ValueError):
        G.CircleArc(1, 1.0, 1.0)
    with pytest.raises(ValueError):
        G.CircleArc(1, 0.0, TWO_PI)
    with pytest.raises(ValueError):
        G.CircleArc(-1, 0.0, 1.0)
    a = G.CircleArc(2, 0.0, math.pi)
    assert a.r == pytest.approx(math.exp(-2)) and a.diameter == pytest.approx(2 * a.r)
    assert a.contains_angle(0.5) and a.contains_angle(-TWO_PI + 0.5) and not a.contains_angle(4.0)


@given(st.floats(0.01, 1.9))
def test_near_minus_one_geometry(d):
    arc = G.CircleArc.near_minus_one(d)
    z1, z2 = arc.endpoints()
    assert abs(abs(z1) - 1) < 1e-12 and abs(abs(z2) - 1) < 1e-12
    assert abs(z1 - z2) == pytest.approx(d, rel=1e-12)
    assert abs(arc.midpoint()) < 1
    assert abs(arc.midpoint().imag) < 1e-15


# ---------------------------------------------------------------- hitting


def test_crosscut_transversal():
    arc = G.CircleArc(1, -0.5, 0.5)
    r = math.exp(-1)
    c = polyline(1.0, 0.0)
    assert G.crosscut_hit(c, arc) == pytest.approx(1 - r)


def test_crosscut_disjoint():
    arc = G.CircleArc(1, 1.0, 2.0)
    assert G.crosscut_hit(polyline(1.0, 0.0), arc) is None
    assert G.crosscut_hit(polyline(0.9, 0.8), G.CircleArc(1, -0.5, 0.5)) is None


def test_crosscut_t_start():
    arc = G.CircleArc(1, -0.5, 0.5)
    c = polyline(1.0, 0.0, 1.0)
    r = math.exp(-1)
    assert G.crosscut_hit(c, arc, 0.9) == pytest.approx(1 + r)
    with pytest.raises(ValueError):
        G.crosscut_hit(c, arc, 5.0)


@settings(max_examples=40)
@given(st.floats(-0.05, 0.05), st.floats(0.0, 0.3))
def test_near_tangent_matches_refined(offset, theta):
    r = math.exp(-1)
    arc = G.CircleArc(1, theta - 1.0, theta + 1.0)
    # chord nearly tangent to the circle at angle theta
    base = (r + offset) * complex(math.cos(theta), math.sin(theta))
    tang = 1j * complex(math.cos(theta), math.sin(theta))
    c = polyline(base - 0.2 * tang, base + 0.2 * tang)
    hit = G.crosscut_hit(c, arc)
    s = np.linspace(0.0, 1.0, 20001)
    z = c.points[0] + s * (c.points[1] - c.points[0])
    inside = np.abs(z) <= r
    if offset > 1e-6:
        assert hit is None and not inside.any()
    elif offset < -1e-6:
        first = np.argmax(inside)
        assert hit == pytest.approx(s[first], abs=1e-4)


def test_circle_hit():
    c = polyline(1.0, 0.1, 0.5)
    assert G.circle_hit(c, 0.5) == pytest.approx(0.5 / 0.9)
    assert G.circle_hit(c, 0.5, 1.0) == pytest.approx(2.0)
    assert G.circle_hit(c, 0.05) is None


# ---------------------------------------------------------------- arc components


@pytest.mark.parametrize("k,n", [(1, 2), (1, 3), (2, 4)])
def test_slit_single_arc(slit, k, n):
    p, U, c = slit
    fam = G.arc_components(U, c, n, k, 256)
    assert len(fam.arcs) == 1 and fam.star_index == 0
    arc = fam.arcs[0]
    # full circle minus a neighbourhood of angle 0
    assert arc.contains_angle(math.pi) and not arc.contains_angle(0.0)
    # the cut around the slit is symmetric about angle 0
    assert arc.theta_lo == pytest.approx(TWO_PI - arc.theta_hi, abs=1e-9)
    assert arc.width > TWO_PI - 4 * TWO_PI / 256
    double = G.arc_components(U, c, n, k, 512)
    assert len(double.arcs) == 1 and double.star_index == 0


def test_plunge_single_arc(wiggly):
    p, U, c = wiggly
    for k in (1, 2, 3):
        fam = G.arc_components(U, c, k + 1, k, 256)
        assert len(fam.arcs) == 1 and fam.star_index == 0


def test_arc_components_errors(slit):
    p, U, c = slit
    with pytest.raises(ValueError):
        G.arc_components(U, c, 2, 2, 256)
    with pytest.raises(ValueError):
        G.arc_components(U, c, 3, 1, 7)
    with pytest.raises(ValueError):
        G.arc_components(U, c, 40, 1, 256)  # rho_40 never reached


@pytest.mark.parametrize("seed", range(4))
def test_partition_and_json(seed):
    p = make_params(3, "two-sided")
    U, _ = co_simulate_driving(p, math.pi / 2, 1e-3, 5 / (2 * p.a) + 0.02, seed)
    c = lw.trace_curve(U, p, stride=5, stop_radius=math.exp(-5))
    fam = G.arc_components(U, c, 4, 2, 256)
    assert 0 < fam.total_width() < TWO_PI
    arcs = sorted(fam.arcs, key=lambda a: a.theta_lo)
    for a, b in zip(arcs, arcs[1:]):
        assert a.theta_hi <= b.theta_lo + 1e-12
    if len(arcs) > 1:
        assert arcs[-1].theta_hi <= arcs[0].theta_lo + TWO_PI + 1e-12
    d = json.loads(fam.dumps())
    assert set(d) == {"n", "k", "arcs", "star_index"}
    assert all(set(x) == {"theta_lo", "theta_hi"} for x in d["arcs"])
    # resolution stability: arcs only split or merge at sub-resolution scale
    fine = G.arc_components(U, c, 4, 2, 512)
    assert fam.star_index is not None and fine.star_index is not None
    assert abs(fine.total_width() - fam.total_width()) < 0.2


# ---------------------------------------------------------------- harmonic lengths


@given(st.floats(0.05, 0.9), st.floats(0.1, 5.0))
@settings(max_examples=30, deadline=None)
def test_harmonic_full_disk(s, lo):
    lo = min(lo, TWO_PI * (1 - s) - 0.01)
    U = lw.DrivingPath.constant(1e-3, 1.0)
    arc = G.CircleArc.unit(lo, lo + TWO_PI * s)
    hl = G.harmonic_lengths(U, 0.0, arc, 1.0)
    assert hl.L == pytest.approx(s, abs=1e-9)
    expect = min(lo, TWO_PI - arc.theta_hi) / TWO_PI
    assert hl.Lstar == pytest.approx(expect, abs=1e-9)


def test_slit_symmetric_sides(slit):
    p, U, c = slit
    t = lw.first_radius_time(c, 2)
    for half in (0.3, 1.0):
        arc = G.CircleArc.unit(math.pi - half, math.pi + half)
        hl = G.harmonic_lengths(U, t, arc, p.a)
        assert hl.L + 2 * hl.Lstar == pytest.approx(1.0, abs=1e-6)
    # sides equal: compare against the reflected arc
    arc = G.CircleArc.unit(math.pi - 0.5, math.pi + 0.9)
    mirror = G.CircleArc.unit(math.pi - 0.9, math.pi + 0.5)
    a1 = G.harmonic_lengths(U, t, arc, p.a)
    a2 = G.harmonic_lengths(U, t, mirror, p.a)
    assert a1.L == pytest.approx(a2.L, abs=1e-8) and a1.Lstar == pytest.approx(a2.Lstar, abs=1e-8)


def test_harmonic_length_decreases():
    p = make_params(4)
    U, _ = co_simulate_driving(p, math.pi / 2, 1e-3, 1.0, 5)
    arc = G.CircleArc(1, 2.0, 4.0)
    Ls = [G.harmonic_lengths(U, t, arc, p.a).L for t in np.arange(0.0, 0.31, 0.05)]
    assert all(x >= y - 1e-9 for x, y in zip(Ls, Ls[1:]))
    for t in (0.1, 0.3):
        hl = G.harmonic_lengths(U, t, arc, p.a)
        assert 0 <= hl.L <= 1 and 0 <= hl.Lstar <= 1 and hl.L + 2 * hl.Lstar <= 1 + 1e-9


def test_harmonic_rejects_shifted_circle():
    U = lw.DrivingPath.constant(1e-3, 1.0)
    with pytest.raises(ValueError):
        G.harmonic_lengths(U, 0.0, G.CircleArc.near_minus_one(0.3), 1.0)


# ---------------------------------------------------------------- walk on spheres


def test_wos_empty_curve():
    c = lw.TraceCurve([0.0], [1.0 + 0j])
    arc = G.CircleArc.unit(1.0, 1.0 + TWO_PI * 0.3)
    est = G.brownian_harmonic_measure(c, 0.0, arc, 0j, 4000, 1e-3, 3)
    assert est.within(0.3, 3.0)


def test_wos_errors(slit):
    p, U, c = slit
    arc = G.CircleArc.unit(2.0, 4.0)
    with pytest.raises(ValueError):
        G.brownian_harmonic_measure(c, 1.0, arc, 0j, 0, 1e-3, 1)
    with pytest.raises(ValueError):
        G.brownian_harmonic_measure(c, 1.0, arc, 0.999 + 0j, 10, 1e-3, 1)
    with pytest.raises(ValueError):
        G.brownian_harmonic_measure(c, 1.0, arc, 0.5 + 0.0005j, 10, 1e-3, 1)


def test_wos_deterministic(slit):
    p, U, c = slit
    arc = G.CircleArc.unit(2.0, 4.0)
    a = G.brownian_harmonic_measure(c, 1.0, arc, 0j, 500, 1e-3, 7)
    assert a == G.brownian_harmonic_measure(c, 1.0, arc, 0j, 500, 1e-3, 7)
