"""Crosscuts of the circles |z| = e^{-k}, trace/arc intersections and
harmonic measure of boundary arcs.

Connectivity questions (which arcs of dD_k face the origin, which of them
gives access to an outer circle) are answered on a log-polar cell grid:
columns are the angular samples, rows have the same width in log r, so
cells are roughly square at every scale and each circle e^{-j} falls on a
row boundary.  Cells touched by the trace polyline are walls.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from .loewner import (SWALLOW_TOL, STEP_FRACTION, MAX_SUBSTEPS, SWALLOWED, DrivingPath,
                      TraceCurve, first_radius_time, flow_g, forward_flow_point)
from .mc import McEstimate, estimate_from_samples, experiment_key, sample_seed64, uniform

TWO_PI = 2.0 * math.pi
MIN_RESOLUTION = 8


@dataclass(frozen=True)
class CircleArc:
    """Open arc {center + radius e^{i theta}: theta_lo < theta < theta_hi}.

    By default the circle is |z| = e^{-k}; k = 0 is the unit circle.  A
    different center/radius can be given for crosscuts that are not
    centered at 0 (``near_minus_one``).
    """

    k: int
    theta_lo: float
    theta_hi: float
    center: complex = 0j
    radius: Optional[float] = None

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 0:
            raise ValueError("k must be a nonnegative integer")
        width = self.theta_hi - self.theta_lo
        if not (0.0 < width < TWO_PI):
            raise ValueError(f"angular length must lie in (0, 2pi), got {width}")
        if self.radius is not None and not self.radius > 0:
            raise ValueError("radius must be positive")

    @property
    def r(self) -> float:
        return math.exp(-self.k) if self.radius is None else float(self.radius)

    @property
    def width(self) -> float:
        return self.theta_hi - self.theta_lo

    @property
    def on_unit_circle(self) -> bool:
        return self.center == 0 and abs(self.r - 1.0) < 1e-15

    def point(self, theta: float) -> complex:
        return complex(self.center) + self.r * complex(math.cos(theta), math.sin(theta))

    def endpoints(self) -> tuple[complex, complex]:
        return self.point(self.theta_lo), self.point(self.theta_hi)

    def midpoint(self) -> complex:
        return self.point(0.5 * (self.theta_lo + self.theta_hi))

    def contains_angle(self, theta: float) -> bool:
        """Closed-arc angular membership."""
        return (theta - self.theta_lo) % TWO_PI <= self.width + 1e-15

    @property
    def diameter(self) -> float:
        w = min(self.width, math.pi)
        return 2.0 * self.r * math.sin(0.5 * w)

    @classmethod
    def unit(cls, theta_lo: float, theta_hi: float) -> "CircleArc":
        return cls(0, theta_lo, theta_hi)

    @classmethod
    def near_minus_one(cls, diameter: float) -> "CircleArc":
        """Crosscut of D along |z + 1| = rho, symmetric about -1, with the given diameter.

        The circle meets the unit circle at e^{i(pi -+ psi)} with
        rho = 2 sin(psi/2); the chord between the endpoints is 2 sin(psi).
        """
        if not (0.0 < diameter < 2.0):
            raise ValueError("diameter must lie in (0, 2)")
        psi = math.asin(0.5 * diameter)
        rho = 2.0 * math.sin(0.5 * psi)
        end = complex(math.cos(math.pi - psi), math.sin(math.pi - psi)) + 1.0
        w = math.atan2(end.imag, end.real)
        return cls(0, -w, w, center=-1 + 0j, radius=rho)

    def to_dict(self) -> dict:
        return {"theta_lo": self.theta_lo, "theta_hi": self.theta_hi}


@dataclass(frozen=True)
class CrosscutFamily:
    """Arcs of dD_k facing the origin component of H_n cap D_k.

    ``access`` lists the arcs through which the origin reaches the unit
    circle; ``star_index`` is set when exactly one does.
    """

    n: int
    k: int
    arcs: tuple
    star_index: Optional[int]
    access: tuple = field(default=())

    def __post_init__(self):
        if not self.k < self.n:
            raise ValueError("need k < n")

    def total_width(self) -> float:
        return sum(a.width for a in self.arcs)

    def to_json(self) -> dict:
        return {"n": self.n, "k": self.k, "arcs": [a.to_dict() for a in self.arcs],
                "star_index": self.star_index}

    def dumps(self) -> str:
        return json.dumps(self.to_json())


@dataclass(frozen=True)
class HarmonicLengths:
    L: float
    Lstar: float


# ---------------------------------------------------------------- polyline vs circle


def _circle_crossings(points, times, center, radius):
    """All (time, angle) where the polyline meets the circle, in time order."""
    p0 = points[:-1] - center
    d = np.diff(points)
    A = (d * d.conjugate()).real
    B = 2.0 * (p0 * d.conjugate()).real
    C = (p0 * p0.conjugate()).real - radius * radius
    out_s = []
    out_i = []
    with np.errstate(invalid="ignore", divide="ignore"):
        disc = B * B - 4.0 * A * C
        ok = (disc >= 0) & (A > 0)
        sq = np.sqrt(np.where(ok, disc, 0.0))
        for sign in (-1.0, 1.0):
            s = (-B + sign * sq) / (2.0 * np.where(A > 0, A, 1.0))
            good = ok & (s >= 0.0) & (s <= 1.0)
            idx = np.nonzero(good)[0]
            out_i.append(idx)
            out_s.append(s[idx])
    idx = np.concatenate(out_i)
    s = np.concatenate(out_s)
    if idx.size == 0:
        return np.empty(0), np.empty(0)
    t = times[idx] + s * (times[idx + 1] - times[idx])
    z = points[idx] + s * d[idx] - center
    order = np.argsort(t, kind="stable")
    return t[order], np.angle(z[order])


def _clip(curve: TraceCurve, t_start: float, t_end: Optional[float] = None):
    """Polyline points/times restricted to [t_start, t_end], endpoints interpolated."""
    times, pts = curve.times, curve.points
    if t_end is None:
        t_end = times[-1]
    i0 = int(np.searchsorted(times, t_start, side="right")) - 1
    i1 = int(np.searchsorted(times, t_end, side="left"))
    i0 = max(i0, 0)
    i1 = min(i1, times.size - 1)
    ts = times[i0:i1 + 1].copy()
    ps = pts[i0:i1 + 1].copy()
    if ts.size >= 2:
        if t_start > ts[0]:
            f = (t_start - ts[0]) / (ts[1] - ts[0])
            ps[0] = ps[0] + f * (ps[1] - ps[0])
            ts[0] = t_start
        if t_end < ts[-1]:
            f = (t_end - ts[-2]) / (ts[-1] - ts[-2])
            ps[-1] = ps[-2] + f * (ps[-1] - ps[-2])
            ts[-1] = t_end
    return ts, ps


def crosscut_hit(curve: TraceCurve, arc: CircleArc, t_start: float = 0.0) -> Optional[float]:
    """First time >= t_start at which the trace polyline meets the closed arc."""
    if not (0.0 <= t_start <= curve.times[-1]):
        raise ValueError("t_start outside the curve's time range")
    ts, ps = _clip(curve, t_start)
    if ts.size < 2:
        return None
    t, ang = _circle_crossings(ps, ts, complex(arc.center), arc.r)
    for ti, ai in zip(t, ang):
        if arc.contains_angle(ai):
            return float(ti)
    return None


def circle_hit(curve: TraceCurve, radius: float, t_start: float = 0.0) -> Optional[float]:
    """First time >= t_start at which the polyline meets the full circle |z| = radius."""
    ts, ps = _clip(curve, t_start)
    if ts.size < 2:
        return None
    t, _ = _circle_crossings(ps, ts, 0j, radius)
    return float(t[0]) if t.size else None


# ---------------------------------------------------------------- flood fill


@njit(cache=True)
def _rasterize(points, log_rmin, m, G, nrows, blocked):
    """Mark the cells of the log-polar grid that the polyline passes through."""
    for s in range(points.size - 1):
        p = points[s]
        q = points[s + 1]
        rmin = max(min(abs(p), abs(q)), math.exp(log_rmin))
        length = abs(q - p)
        pieces = int(math.ceil(length / (0.3 * rmin / m))) + 1
        if pieces > 1_000_000:
            pieces = 1_000_000
        pi_prev = -1
        pj_prev = -1
        for u in range(pieces + 1):
            z = p + (q - p) * (u / pieces)
            r = abs(z)
            if r <= 0.0:
                continue
            lr = math.log(r)
            if lr < log_rmin:
                pi_prev = -1
                continue
            i = int((lr - log_rmin) * m)
            if i >= nrows:
                i = nrows - 1
            th = math.atan2(z.imag, z.real)
            if th < 0.0:
                th += 2.0 * math.pi
            j = int(th / (2.0 * math.pi) * G) % G
            blocked[i, j] = True
            if pi_prev >= 0 and pi_prev != i and pj_prev != j:
                # diagonal move: close the corner so 4-connected fill cannot slip through
                blocked[pi_prev, j] = True
            pi_prev = i
            pj_prev = j


@njit(cache=True)
def _label(blocked):
    """4-connected components, periodic in the angular index; -1 on walls."""
    nr, G = blocked.shape
    lab = np.full((nr, G), -1, dtype=np.int64)
    stack_i = np.empty(nr * G, dtype=np.int64)
    stack_j = np.empty(nr * G, dtype=np.int64)
    cur = 0
    for i0 in range(nr):
        for j0 in range(G):
            if blocked[i0, j0] or lab[i0, j0] >= 0:
                continue
            sp = 0
            stack_i[0] = i0
            stack_j[0] = j0
            lab[i0, j0] = cur
            sp = 1
            while sp > 0:
                sp -= 1
                i = stack_i[sp]
                j = stack_j[sp]
                for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    ii = i + di
                    if ii < 0 or ii >= nr:
                        continue
                    jj = (j + dj) % G
                    if blocked[ii, jj] or lab[ii, jj] >= 0:
                        continue
                    lab[ii, jj] = cur
                    stack_i[sp] = ii
                    stack_j[sp] = jj
                    sp += 1
            cur += 1
    return lab


@dataclass
class _Grid:
    """Log-polar wall grid for the trace up to some time, rows r in [e^{-(n+1)}, 1]."""

    blocked: np.ndarray
    m: int           # rows per unit of log r
    inner: int       # n + 1, log r_min = -inner

    @classmethod
    def build(cls, points: np.ndarray, n: int, G: int) -> "_Grid":
        m = int(math.ceil(G / TWO_PI))
        inner = n + 1
        nrows = inner * m
        blocked = np.zeros((nrows, G), dtype=np.bool_)
        _rasterize(np.ascontiguousarray(points, dtype=np.complex128), -float(inner), m, G,
                   nrows, blocked)
        return cls(blocked, m, inner)

    def row_of_circle(self, j: int) -> int:
        """Index of the first row outside |z| = e^{-j}."""
        return (self.inner - j) * self.m


def _origin_cells(grid: _Grid, k: int) -> np.ndarray:
    """Mask of cells inside D_k connected to the innermost disk (which holds 0)."""
    rk = grid.row_of_circle(k)
    lab = _label(grid.blocked[:rk])
    seeds = np.unique(lab[0][lab[0] >= 0])
    mask = np.zeros_like(grid.blocked)
    mask[:rk] = np.isin(lab, seeds)
    return mask


def _access_arcs(grid: _Grid, origin: np.ndarray, k: int, j: int, arc_cols) -> list:
    """Indices of arcs whose outer side connects to the circle e^{-j} in H_n minus
    the closure of the origin component."""
    walls = grid.blocked | origin
    lab = _label(walls)
    rk = grid.row_of_circle(k)
    rj = grid.row_of_circle(j) - 1
    far = set(np.unique(lab[rj][lab[rj] >= 0]).tolist())
    out = []
    for idx, cols in enumerate(arc_cols):
        labs = lab[rk, cols]
        if any(int(x) in far for x in labs if x >= 0):
            out.append(idx)
    return out


# ---------------------------------------------------------------- A_{n,k}


@njit(cache=True)
def _survivors(zs, values, ts, t_end, a):
    alive = np.empty(zs.size, dtype=np.bool_)
    for i in range(zs.size):
        _, status, _ = flow_g(zs[i], values, ts, 0.0, t_end, a, SWALLOW_TOL, STEP_FRACTION,
                              MAX_SUBSTEPS)
        alive[i] = status != SWALLOWED
    return alive


def _runs(alive: np.ndarray) -> list:
    """Maximal cyclic runs of True as (start, length)."""
    G = alive.size
    if alive.all():
        return [(0, G)]
    start = int(np.argmin(alive))  # a dead sample
    out = []
    i = 0
    while i < G:
        j = (start + i) % G
        if alive[j]:
            length = 0
            while i < G and alive[(start + i) % G]:
                length += 1
                i += 1
            out.append((j, length))
        else:
            i += 1
    return out


@dataclass(frozen=True)
class ArcAnalysis:
    """Result of :func:`analyze_crosscuts`: the family plus access counts per ring."""

    family: CrosscutFamily
    columns: tuple
    grid: _Grid
    origin: np.ndarray

    def access_to(self, j: int) -> list:
        """Arcs through which 0 connects to the circle |z| = e^{-j} (j < k)."""
        if not 0 <= j < self.family.k:
            raise ValueError("need 0 <= j < k")
        return _access_arcs(self.grid, self.origin, self.family.k, j, self.columns)


def analyze_crosscuts(U: DrivingPath, curve: TraceCurve, n: int, k: int,
                      angular_resolution: int = 256) -> ArcAnalysis:
    if int(n) != n or int(k) != k or not (1 <= k < n):
        raise ValueError("need integers 1 <= k < n")
    G = int(angular_resolution)
    if G < MIN_RESOLUTION:
        raise ValueError(f"angular_resolution must be at least {MIN_RESOLUTION}")
    rho = first_radius_time(curve, n)
    if rho is None:
        raise ValueError(f"curve never reaches |z| = e^-{n}")
    a = curve.params.a
    ts, ps = _clip(curve, 0.0, rho)

    thetas = (np.arange(G) + 0.5) * (TWO_PI / G)
    rk = math.exp(-k)
    zs = rk * np.exp(1j * thetas)
    alive = _survivors(zs, U.values, U.times, float(rho), a)
    # columns where the polyline crosses dD_k are cut as well
    _, cross = _circle_crossings(ps, ts, 0j, rk)
    for ang in cross:
        u = (ang % TWO_PI) / TWO_PI * G
        col = int(u) % G
        alive[col] = False
        # a crossing on a column edge belongs to both closed columns
        if u - math.floor(u) < 1e-9:
            alive[(col - 1) % G] = False
        elif math.ceil(u) - u < 1e-9:
            alive[(col + 1) % G] = False

    grid = _Grid.build(ps, n, G)
    origin = _origin_cells(grid, k)
    inner_row = grid.row_of_circle(k) - 1
    arcs = []
    cols = []
    for start, length in _runs(alive):
        if length < 2:
            continue  # sub-resolution
        c = (start + np.arange(length)) % G
        if not origin[inner_row, c].any():
            continue
        lo = start * TWO_PI / G
        width = length * TWO_PI / G
        if width >= TWO_PI:
            width = TWO_PI * (1.0 - 1e-12)
        arcs.append(CircleArc(int(k), lo, lo + width))
        cols.append(c)
    access = _access_arcs(grid, origin, k, 0, cols) if arcs else []
    star = access[0] if len(access) == 1 else None
    fam = CrosscutFamily(int(n), int(k), tuple(arcs), star, tuple(access))
    return ArcAnalysis(fam, tuple(cols), grid, origin)


def arc_components(U: DrivingPath, curve: TraceCurve, n: int, k: int,
                   angular_resolution: int = 256) -> CrosscutFamily:
    """The family A_{n,k} of arcs of dD_k on the boundary of the origin
    component of H_n cap D_k, with the distinguished arc l* marked."""
    return analyze_crosscuts(U, curve, n, k, angular_resolution).family


# ---------------------------------------------------------------- harmonic lengths


def harmonic_lengths(U: DrivingPath, t: float, arc: CircleArc, a: float) -> HarmonicLengths:
    """Harmonic measure from 0 of the arc and of the two boundary pieces
    between the arc and the tip, read off from g_t images."""
    if arc.center != 0:
        raise ValueError("harmonic_lengths expects an arc of a circle centered at 0")
    angles = []
    for theta in (arc.theta_lo, 0.5 * (arc.theta_lo + arc.theta_hi), arc.theta_hi):
        res = forward_flow_point(U, arc.point(theta), t, a)
        if res.swallowed:
            raise ValueError(f"arc point at angle {theta} swallowed at t={res.swallow_time}")
        angles.append(math.atan2(res.value.imag, res.value.real))
    p_lo, p_mid, p_hi = angles
    d = (p_hi - p_lo) % TWO_PI
    if (p_mid - p_lo) % TWO_PI <= d:
        start, width = p_lo, d
    else:
        start, width = p_hi, TWO_PI - d
    end = start + width
    tip = 2.0 * U(t)
    d_end = (tip - end) % TWO_PI
    d_start = (start - tip) % TWO_PI
    if d_end + d_start > TWO_PI - width + 1e-9:
        raise ValueError("tip image falls inside the arc image")
    return HarmonicLengths(width / TWO_PI, min(d_end, d_start) / TWO_PI)


# ---------------------------------------------------------------- walk on spheres


@njit(cache=True)
def _dist_polyline(z, pts):
    best = 1e300
    for s in range(pts.size - 1):
        p = pts[s]
        d = pts[s + 1] - p
        dd = d.real * d.real + d.imag * d.imag
        w = z - p
        if dd > 0.0:
            u = (w.real * d.real + w.imag * d.imag) / dd
            u = min(max(u, 0.0), 1.0)
        else:
            u = 0.0
        e = w - u * d
        r = e.real * e.real + e.imag * e.imag
        if r < best:
            best = r
    return math.sqrt(best)


@njit(cache=True)
def _angle_in(phi, lo, width):
    x = (phi - lo) % (2.0 * math.pi)
    return x <= width


@njit(cache=True)
def _dist_arc(z, c, R, lo, width):
    w = z - c
    if _angle_in(math.atan2(w.imag, w.real), lo, width):
        return abs(abs(w) - R)
    e1 = c + R * complex(math.cos(lo), math.sin(lo))
    e2 = c + R * complex(math.cos(lo + width), math.sin(lo + width))
    return min(abs(z - e1), abs(z - e2))


@njit(cache=True)
def _wos_kernel(pts, z0, c, R, lo, width, on_unit, step, master, key, n, max_steps):
    hits = np.zeros(n)
    state = np.zeros(1, dtype=np.uint64)
    for k in range(n):
        state[0] = sample_seed64(master, key, np.uint64(k))
        z = z0
        for _ in range(max_steps):
            d_out = 1.0 - abs(z)
            d_cur = _dist_polyline(z, pts) if pts.size > 1 else 1e300
            d_arc = 1e300 if on_unit else _dist_arc(z, c, R, lo, width)
            d = min(d_out, d_cur, d_arc)
            if d < step:
                if on_unit:
                    if d_out <= d_cur and _angle_in(math.atan2(z.imag, z.real), lo, width):
                        hits[k] = 1.0
                elif d_arc <= d_cur and d_arc <= d_out:
                    hits[k] = 1.0
                break
            phi = 2.0 * math.pi * uniform(state, 0)
            z = z + d * complex(math.cos(phi), math.sin(phi))
    return hits


def brownian_harmonic_measure(curve: TraceCurve, t: float, target: CircleArc, z0: complex,
                              n_walks: int, step: float, seed: int,
                              max_steps: int = 100_000) -> McEstimate:
    """Walk-on-spheres estimate of the probability that Brownian motion from z0
    leaves D_t through ``target`` (a unit-circle arc), or hits ``target`` before
    leaving D_t (an interior arc)."""
    if int(n_walks) != n_walks or n_walks < 1:
        raise ValueError("n_walks must be a positive integer")
    if not step > 0:
        raise ValueError("step must be positive")
    _, pts = _clip(curve, 0.0, t)
    pts = np.ascontiguousarray(pts, dtype=np.complex128)
    z0 = complex(z0)
    dist = min(1.0 - abs(z0), _dist_polyline(z0, pts) if pts.size > 1 else 1e300)
    if not target.on_unit_circle:
        dist = min(dist, _dist_arc(z0, complex(target.center), target.r, target.theta_lo,
                                   target.width))
    if not dist > 2.0 * step:
        raise ValueError("z0 is within 2*step of the boundary")
    exp_id = (f"wos:t={t!r}:arc=({target.theta_lo!r},{target.theta_hi!r},{target.r!r},"
              f"{complex(target.center)!r}):z0={z0!r}:step={step!r}")
    hits = _wos_kernel(pts, z0, complex(target.center), target.r, target.theta_lo,
                       target.width, target.on_unit_circle, float(step), np.uint64(seed),
                       np.uint64(experiment_key(exp_id)), int(n_walks), int(max_steps))
    return estimate_from_samples(hits, seed, exp_id)
