"""Radial Loewner flow in the unit disk.

Interior points are integrated in ``g`` directly; with ``g = exp(2ih)`` the
boundary version is ``dh/dt = a cot(h - U_t)``, integrated for real angles
together with the log-derivative.  The driving function is piecewise linear
between grid points, so the driving point rotates at constant speed inside a
grid interval.

Steps are classical RK4, subdivided so that no substep exceeds
``STEP_FRACTION * |sin(h - U)|**2 / a``; that is the time scale on which the
cot singularity changes the vector field.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from .params import SleParams

SWALLOW_TOL = 1e-6
TIP_DELTA = 1e-6
STEP_FRACTION = 0.02
ROT_STEP = 0.1           # max rotation (radians) of exp(2iU) per substep
MAX_SUBSTEPS = 200_000   # per grid interval
TRACE_BLOCK = 64

ALIVE = 0
SWALLOWED = 1
FAILED = 2


@dataclass(frozen=True)
class DrivingPath:
    """Driving function sampled on a grid, linear in between.

    The grid is uniform with spacing ``dt`` unless explicit ``grid`` times are
    given (as produced by :meth:`refine`); ``dt`` is then the coarse spacing.
    """

    dt: float
    values: np.ndarray
    grid: Optional[np.ndarray] = None

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if vals.ndim != 1 or vals.size < 1:
            raise ValueError("driving values must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(vals)):
            raise ValueError("driving values must be finite")
        if vals[0] != 0.0:
            raise ValueError("driving function must start at 0")
        if self.grid is None:
            ts = np.arange(vals.size) * float(self.dt)
        else:
            ts = np.array(self.grid, dtype=float)
            if ts.shape != vals.shape or ts[0] != 0.0 or np.any(np.diff(ts) <= 0):
                raise ValueError("grid must start at 0, increase, and match the values")
            ts.setflags(write=False)
            object.__setattr__(self, "grid", ts)
        vals.setflags(write=False)
        ts.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "_ts", ts)

    @property
    def n_steps(self) -> int:
        return self.values.size - 1

    @property
    def horizon(self) -> float:
        return float(self._ts[-1])

    @property
    def times(self) -> np.ndarray:
        return self._ts

    def index_of(self, t) -> np.ndarray:
        """Grid indices of grid times ``t`` (raises if a time is off the grid)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        i = np.clip(np.searchsorted(self._ts, t), 0, self.n_steps)
        lo = np.clip(i - 1, 0, self.n_steps)
        i = np.where(np.abs(self._ts[lo] - t) < np.abs(self._ts[i] - t), lo, i)
        if np.any(np.abs(self._ts[i] - t) > 1e-9 * max(1.0, self.horizon)):
            raise ValueError("time is not a grid time")
        return i.astype(np.int64)

    def refine(self, intervals, factor: int, seed: int) -> "DrivingPath":
        """Split the given grid intervals into ``factor`` pieces, filling in a
        standard Brownian bridge between the old values.

        For radial SLE the driving function is -B, so the refined path has
        exactly the law of the driving function on the finer grid.
        """
        factor = int(factor)
        if factor < 2:
            raise ValueError("factor must be at least 2")
        iv = np.unique(np.asarray(intervals, dtype=np.int64))
        if iv.size == 0:
            return self
        if iv[0] < 0 or iv[-1] >= self.n_steps:
            raise ValueError("interval index out of range")
        rng = np.random.default_rng(seed)
        ts, us = self._ts, self.values
        new_t = []
        new_u = []
        s = np.arange(1, factor) / factor
        for i in iv:
            h = ts[i + 1] - ts[i]
            w = np.cumsum(rng.normal(0.0, math.sqrt(h / factor), factor))
            bridge = w[:-1] - s * w[-1]  # pinned at both ends
            new_t.append(ts[i] + s * h)
            new_u.append(us[i] + s * (us[i + 1] - us[i]) + bridge)
        t_all = np.concatenate([ts] + new_t)
        u_all = np.concatenate([us] + new_u)
        order = np.argsort(t_all, kind="stable")
        return DrivingPath(self.dt, u_all[order], t_all[order])

    def __call__(self, t: float) -> float:
        return float(_drive(self.values, self._ts, t))

    @classmethod
    def constant(cls, dt: float, horizon: float) -> "DrivingPath":
        n = int(round(horizon / dt))
        return cls(dt, np.zeros(n + 1))

    @classmethod
    def from_function(cls, f, dt: float, horizon: float) -> "DrivingPath":
        n = int(round(horizon / dt))
        t = np.arange(n + 1) * dt
        vals = np.array([f(s) for s in t], dtype=float)
        vals[0] = 0.0
        return cls(dt, vals)


@dataclass(frozen=True)
class FlowResult:
    status: int
    value: complex = 0j
    swallow_time: Optional[float] = None
    logderiv: Optional[float] = None

    @property
    def alive(self) -> bool:
        return self.status == ALIVE

    @property
    def swallowed(self) -> bool:
        return self.status == SWALLOWED


@dataclass(frozen=True)
class BoundaryFlow:
    theta: np.ndarray
    x: np.ndarray
    logderiv: float
    swallowed: bool
    swallow_time: Optional[float] = None


@dataclass
class TraceCurve:
    times: np.ndarray
    points: np.ndarray
    params: Optional[SleParams] = None
    failed: np.ndarray = field(default=None)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.points = np.asarray(self.points, dtype=complex)
        if self.failed is None:
            self.failed = np.zeros(self.times.size, dtype=bool)
        if self.times.shape != self.points.shape:
            raise ValueError("times and points differ in length")

    def __len__(self) -> int:
        return self.times.size

    @property
    def radii(self) -> np.ndarray:
        return np.abs(self.points)

    def upto(self, t: float) -> "TraceCurve":
        m = self.times <= t + 1e-12
        return TraceCurve(self.times[m], self.points[m], self.params, self.failed[m])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "re", "im"])
            for t, z in zip(self.times, self.points):
                w.writerow([f"{t:.17g}", f"{z.real:.17g}", f"{z.imag:.17g}"])

    @classmethod
    def from_csv(cls, path, params: Optional[SleParams] = None) -> "TraceCurve":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1] + 1j * data[:, 2], params)


# ---------------------------------------------------------------- kernels


@njit(cache=True)
def _drive(values, ts, t):
    n = values.size - 1
    if n == 0 or t <= ts[0]:
        return values[0]
    if t >= ts[n]:
        return values[n]
    i = np.searchsorted(ts, t, side="right") - 1
    f = (t - ts[i]) / (ts[i + 1] - ts[i])
    return values[i] + f * (values[i + 1] - values[i])


@njit(cache=True)
def _rhs(g, e, a2):
    return a2 * g * (e + g) / (e - g)


@njit(cache=True)
def _abs_sin_g(g, e):
    # |sin(h - U)| for g = exp(2ih), e = exp(2iU)
    return abs(e - g) / (2.0 * math.sqrt(abs(g)))


@njit(cache=True)
def _advance(g, t, t_edge, a, u0, slope, t0, forward, swallow_tol, frac, max_sub):
    """RK4 on dg/dt = 2a g (e+g)/(e-g) with e = exp(2iU) over one grid interval."""
    a2 = 2.0 * a if forward else -2.0 * a
    h_rot = ROT_STEP / (2.0 * abs(slope)) if slope != 0.0 else np.inf
    count = 0
    while (t < t_edge) if forward else (t > t_edge):
        ph = 2.0 * (u0 + slope * (t - t0))
        e0 = complex(math.cos(ph), math.sin(ph))
        s = _abs_sin_g(g, e0)
        if forward and s < swallow_tol:
            return g, SWALLOWED, t
        step = min(frac * s * s / a, h_rot)
        remaining = abs(t_edge - t)
        last = step >= remaining
        if last:
            step = remaining
        # half-step rotation of the driving point; sign follows time direction
        hp = slope * step if forward else -slope * step
        rot = complex(math.cos(hp), math.sin(hp))
        em = e0 * rot
        e1 = em * rot
        k1 = _rhs(g, e0, a2)
        k2 = _rhs(g + 0.5 * step * k1, em, a2)
        k3 = _rhs(g + 0.5 * step * k2, em, a2)
        k4 = _rhs(g + step * k3, e1, a2)
        g = g + step * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        if last:
            t = t_edge
        else:
            t = t + step if forward else t - step
        count += 1
        if count > max_sub or not (math.isfinite(g.real) and math.isfinite(g.imag)):
            return g, SWALLOWED if forward else FAILED, t
    return g, ALIVE, t_edge


@njit(cache=True)
def flow_g(g, values, ts, t_from, t_to, a, swallow_tol, frac, max_sub):
    """Integrate the radial Loewner equation for g from t_from to t_to.

    Runs backward when t_to < t_from.  Returns (g, status, t_reached);
    forward runs report SWALLOWED once |sin(h - U)| < swallow_tol.
    """
    n = values.size - 1
    if t_to == t_from or g == 0:
        return g, ALIVE, t_to
    if n == 0:
        return _advance(g, t_from, t_to, a, values[0], 0.0, 0.0, t_to > t_from,
                        swallow_tol, frac, max_sub)
    forward = t_to > t_from
    t = t_from
    if forward:
        i = min(max(np.searchsorted(ts, t_from, side="right") - 1, 0), n - 1)
        i_last = min(max(np.searchsorted(ts, t_to, side="left") - 1, 0), n - 1)
        while i <= i_last:
            t_edge = t_to if i == i_last else ts[i + 1]
            slope = (values[i + 1] - values[i]) / (ts[i + 1] - ts[i])
            g, status, t = _advance(g, t, t_edge, a, values[i], slope, ts[i], True,
                                    swallow_tol, frac, max_sub)
            if status != ALIVE:
                return g, status, t
            i += 1
        ph = 2.0 * _drive(values, ts, t)
        if _abs_sin_g(g, complex(math.cos(ph), math.sin(ph))) < swallow_tol:
            return g, SWALLOWED, t
        return g, ALIVE, t
    i = min(max(np.searchsorted(ts, t_from, side="left") - 1, 0), n - 1)
    i_last = min(max(np.searchsorted(ts, t_to, side="right") - 1, 0), n - 1)
    while i >= i_last:
        t_edge = t_to if i == i_last else ts[i]
        slope = (values[i + 1] - values[i]) / (ts[i + 1] - ts[i])
        g, status, t = _advance(g, t, t_edge, a, values[i], slope, ts[i], False,
                                0.0, frac, max_sub)
        if status != ALIVE:
            return g, status, t
        i -= 1
    return g, ALIVE, t


@njit(cache=True)
def _boundary_rhs(x_theta, u, a):
    xx = x_theta - u
    sn = math.sin(xx)
    return a * math.cos(xx) / sn, -a / (sn * sn)


@njit(cache=True)
def boundary_flow_kernel(theta0, values, ts, n_end, a, swallow_tol, frac, max_sub):
    """Real boundary flow with log-derivative; grid-sampled output."""
    theta = np.empty(n_end + 1)
    theta[0] = theta0
    th = theta0
    ld = 0.0
    for i in range(n_end):
        u0 = values[i]
        dt = ts[i + 1] - ts[i]
        slope = (values[i + 1] - values[i]) / dt
        h_rot = ROT_STEP / (2.0 * abs(slope)) if slope != 0.0 else np.inf
        t = 0.0
        count = 0
        while t < dt:
            sn = abs(math.sin(th - (u0 + slope * t)))
            if sn < swallow_tol:
                return theta[: i + 1], ld, ts[i] + t, True
            step = min(frac * sn * sn / a, h_rot)
            if step >= dt - t:
                step = dt - t
            k1a, k1b = _boundary_rhs(th, u0 + slope * t, a)
            k2a, k2b = _boundary_rhs(th + 0.5 * step * k1a, u0 + slope * (t + 0.5 * step), a)
            k3a, k3b = _boundary_rhs(th + 0.5 * step * k2a, u0 + slope * (t + 0.5 * step), a)
            k4a, k4b = _boundary_rhs(th + step * k3a, u0 + slope * (t + step), a)
            th = th + step * (k1a + 2.0 * k2a + 2.0 * k3a + k4a) / 6.0
            ld = ld + step * (k1b + 2.0 * k2b + 2.0 * k3b + k4b) / 6.0
            t += step
            count += 1
            if count > max_sub:
                return theta[: i + 1], ld, ts[i] + t, True
        theta[i + 1] = th
    sn = abs(math.sin(th - values[n_end]))
    if sn < swallow_tol:
        return theta, ld, ts[n_end], True
    return theta, ld, ts[n_end], False


@njit(cache=True, error_model="numpy")
def _rk4_block(gr, gi, lo, hi, e0r, e0i, emr, emi, e1r, e1i, a2, h):
    """One RK4 step of dg/dt = a2 g (e+g)/(e-g) for g[lo:hi], in real arithmetic
    so the loop vectorizes (complex division in numba does not)."""
    for p in range(lo, hi):
        xr = gr[p]
        xi = gi[p]
        # stage 1
        nr = e0r + xr
        ni = e0i + xi
        dr = e0r - xr
        di = e0i - xi
        w = a2 / (dr * dr + di * di)
        qr = (nr * dr + ni * di) * w
        qi = (ni * dr - nr * di) * w
        k1r = xr * qr - xi * qi
        k1i = xr * qi + xi * qr
        # stage 2
        yr = xr + 0.5 * h * k1r
        yi = xi + 0.5 * h * k1i
        nr = emr + yr
        ni = emi + yi
        dr = emr - yr
        di = emi - yi
        w = a2 / (dr * dr + di * di)
        qr = (nr * dr + ni * di) * w
        qi = (ni * dr - nr * di) * w
        k2r = yr * qr - yi * qi
        k2i = yr * qi + yi * qr
        # stage 3
        yr = xr + 0.5 * h * k2r
        yi = xi + 0.5 * h * k2i
        nr = emr + yr
        ni = emi + yi
        dr = emr - yr
        di = emi - yi
        w = a2 / (dr * dr + di * di)
        qr = (nr * dr + ni * di) * w
        qi = (ni * dr - nr * di) * w
        k3r = yr * qr - yi * qi
        k3i = yr * qi + yi * qr
        # stage 4
        yr = xr + h * k3r
        yi = xi + h * k3i
        nr = e1r + yr
        ni = e1i + yi
        dr = e1r - yr
        di = e1i - yi
        w = a2 / (dr * dr + di * di)
        qr = (nr * dr + ni * di) * w
        qi = (ni * dr - nr * di) * w
        k4r = yr * qr - yi * qi
        k4i = yr * qi + yi * qr
        gr[p] = xr + h * (k1r + 2.0 * k2r + 2.0 * k3r + k4r) / 6.0
        gi[p] = xi + h * (k1i + 2.0 * k2i + 2.0 * k3i + k4i) / 6.0


@njit(cache=True)
def _trace_block(values, ts, ks, a, tip, frac, max_sub, out, failed):
    """Backward-flow the tips at grid indices ``ks`` (ascending) in lockstep.

    Every active point takes shared RK4 steps (one per grid interval, more
    when the driving point turns fast); points too close to the singularity
    for that step are then redone on the
    adaptive single-point path from their saved value.
    """
    m = ks.size
    gr = np.empty(m)
    gi = np.empty(m)
    sr = np.empty(m)
    si = np.empty(m)
    near = np.zeros(m, dtype=np.bool_)
    bad = np.zeros(m, dtype=np.bool_)
    a2 = -2.0 * a
    p_lo = m
    for i in range(ks[m - 1] - 1, -1, -1):
        while p_lo > 0 and ks[p_lo - 1] >= i + 1:
            p_lo -= 1
            k = ks[p_lo]
            gr[p_lo] = (1.0 - tip) * math.cos(2.0 * values[k])
            gi[p_lo] = (1.0 - tip) * math.sin(2.0 * values[k])
        dt = ts[i + 1] - ts[i]
        slope = (values[i + 1] - values[i]) / dt
        # equal substeps so the driving point turns at most ROT_STEP per step
        n_sub = max(1, int(math.ceil(2.0 * abs(values[i + 1] - values[i]) / ROT_STEP)))
        h = dt / n_sub
        lim = h * a / frac
        for q in range(n_sub, 0, -1):
            t1 = ts[i] + q * h
            t0 = t1 - h
            u1 = values[i] + slope * (t1 - ts[i])
            u0 = values[i] + slope * (t0 - ts[i])
            e0r, e0i = math.cos(2.0 * u1), math.sin(2.0 * u1)
            emr, emi = math.cos(u0 + u1), math.sin(u0 + u1)
            e1r, e1i = math.cos(2.0 * u0), math.sin(2.0 * u0)
            n_near = 0
            for p in range(p_lo, m):
                dr = e0r - gr[p]
                di = e0i - gi[p]
                s2 = (dr * dr + di * di) / (4.0 * math.sqrt(gr[p] * gr[p] + gi[p] * gi[p]))
                nb = s2 < lim or bad[p]
                near[p] = nb
                if nb:
                    sr[p] = gr[p]
                    si[p] = gi[p]
                    n_near += 1
            _rk4_block(gr, gi, p_lo, m, e0r, e0i, emr, emi, e1r, e1i, a2, h)
            if n_near == 0:
                continue
            for p in range(p_lo, m):
                if not near[p]:
                    continue
                if bad[p]:
                    gr[p] = sr[p]
                    gi[p] = si[p]
                    continue
                gn, status, _ = _advance(complex(sr[p], si[p]), t1, t0, a, values[i], slope,
                                         ts[i], False, 0.0, frac, max_sub)
                gr[p] = gn.real
                gi[p] = gn.imag
                if status != ALIVE:
                    bad[p] = True
    for p in range(m):
        if ks[p] == 0:
            out[p] = 1.0 + 0j
        elif bad[p] or not (math.isfinite(gr[p]) and math.isfinite(gi[p])):
            failed[p] = True
            out[p] = complex(np.nan, np.nan)
        else:
            out[p] = complex(gr[p], gi[p])


@njit(cache=True)
def trace_kernel(values, ts, idx, a, tip, frac, max_sub, stop_logr, block):
    """Trace the tips at grid indices ``idx`` (ascending), ``block`` at a time.

    Stops after the first block containing a point with log|z| <= stop_logr
    and truncates just after that point.  Returns (points, failed, count).
    """
    m = idx.size
    pts = np.empty(m, dtype=np.complex128)
    failed = np.zeros(m, dtype=np.bool_)
    b0 = 0
    while b0 < m:
        b1 = min(b0 + block, m)
        _trace_block(values, ts, idx[b0:b1], a, tip, frac, max_sub,
                     pts[b0:b1], failed[b0:b1])
        for j in range(b0, b1):
            if not failed[j] and math.log(abs(pts[j])) <= stop_logr:
                return pts[: j + 1], failed[: j + 1], j + 1
        b0 = b1
    return pts, failed, m


# ---------------------------------------------------------------- public API


def _check_time(U: DrivingPath, t_end: float) -> None:
    if t_end < 0 or t_end > U.horizon + 1e-9 * max(1.0, U.horizon):
        raise ValueError(f"t_end={t_end} outside driving horizon [0, {U.horizon}]")


def forward_flow_point(U: DrivingPath, z0: complex, t_end: float, a: float) -> FlowResult:
    """g_{t_end}(z0), or the swallowing time if z0 leaves D_t first."""
    _check_time(U, t_end)
    z0 = complex(z0)
    if abs(z0) > 1.0 + 1e-12:
        raise ValueError("z0 must lie in the closed unit disk")
    if z0 == 0:
        return FlowResult(ALIVE, 0j)
    if abs(z0 - 1.0) < 1e-15:
        return FlowResult(SWALLOWED, swallow_time=0.0)
    g, status, t = flow_g(z0, U.values, U.times, 0.0, float(t_end), a,
                          SWALLOW_TOL, STEP_FRACTION, MAX_SUBSTEPS)
    if status == SWALLOWED:
        return FlowResult(SWALLOWED, swallow_time=float(t))
    return FlowResult(ALIVE, complex(g))


def backward_flow_point(U: DrivingPath, w: complex, t: float, a: float) -> complex:
    """g_t^{-1}(w) for w in the open disk."""
    _check_time(U, t)
    g, status, _ = flow_g(complex(w), U.values, U.times, float(t), 0.0, a,
                          0.0, STEP_FRACTION, MAX_SUBSTEPS)
    if status == FAILED:
        raise FloatingPointError("backward flow blew up")
    return complex(g)


def boundary_angle_flow(U: DrivingPath, theta0: float, t_end: float, a: float) -> BoundaryFlow:
    """Flow the boundary point exp(2i theta0) on the grid up to t_end.

    ``logderiv`` is log|g_t'(exp(2i theta0))| = -a * int ds / sin^2(X_s).
    """
    _check_time(U, t_end)
    if not (0.0 < theta0 < math.pi):
        raise ValueError("theta0 must lie in (0, pi)")
    n_end = int(U.index_of(t_end)[0])
    theta, ld, t_stop, swallowed = boundary_flow_kernel(
        float(theta0), U.values, U.times, n_end, a, SWALLOW_TOL, STEP_FRACTION, MAX_SUBSTEPS)
    x = theta - U.values[: theta.size]
    return BoundaryFlow(theta, x, float(ld), bool(swallowed),
                        float(t_stop) if swallowed else None)


def trace_curve(U: DrivingPath, params: SleParams, stride: int = 1,
                stop_radius: Optional[float] = None) -> TraceCurve:
    """Trace gamma(t_j) = g_{t_j}^{-1}(exp(2i U_{t_j})) at every ``stride``-th grid time.

    The last grid time is always included.  With ``stop_radius`` the trace
    ends at the first point with |gamma| <= stop_radius.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    n = U.n_steps
    idx = np.arange(0, n + 1, stride, dtype=np.int64)
    if idx[-1] != n:
        idx = np.append(idx, n)
    stop_logr = math.log(stop_radius) if stop_radius else -np.inf
    pts, failed, count = trace_kernel(U.values, U.times, idx, params.a, TIP_DELTA,
                                      STEP_FRACTION, MAX_SUBSTEPS, stop_logr, TRACE_BLOCK)
    pts = pts.copy()
    pts[0] = 1.0 + 0j
    times = U.times[idx[:count]]
    return TraceCurve(times, pts, params, failed.copy())


def refine_trace(U: DrivingPath, curve: TraceCurve, segments) -> TraceCurve:
    """Add every grid time inside the flagged polyline segments.

    ``segments`` is a boolean mask of length len(curve) - 1; segment i joins
    points i and i + 1.  Each tip is an independent backward flow, so the new
    points are exactly those a stride-1 trace would produce there.
    """
    seg = np.asarray(segments, dtype=bool)
    if seg.shape != (len(curve) - 1,):
        raise ValueError("need one flag per polyline segment")
    if curve.params is None:
        raise ValueError("curve carries no parameters")
    idx = U.index_of(curve.times)
    extra = [np.arange(idx[i] + 1, idx[i + 1]) for i in np.nonzero(seg)[0]]
    extra = np.concatenate(extra) if extra else np.empty(0, dtype=np.int64)
    if extra.size == 0:
        return curve
    pts, failed, _ = trace_kernel(U.values, U.times, extra, curve.params.a, TIP_DELTA,
                                  STEP_FRACTION, MAX_SUBSTEPS, -np.inf, TRACE_BLOCK)
    all_idx = np.concatenate([idx, extra])
    order = np.argsort(all_idx, kind="stable")
    return TraceCurve(U.times[all_idx[order]],
                      np.concatenate([curve.points, pts])[order], curve.params,
                      np.concatenate([curve.failed, failed])[order])


def deriv_at_zero(params: SleParams, t: float) -> float:
    """g_t'(0) = exp(2at) in the a-radial parametrization."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return math.exp(2.0 * params.a * t)


def first_radius_time(curve: TraceCurve, n: int) -> Optional[float]:
    """First time |gamma| reaches exp(-n), interpolated linearly in log|gamma|."""
    if int(n) != n or n < 1:
        raise ValueError("n must be an integer >= 1")
    target = -float(n)
    logr = np.log(np.maximum(curve.radii, 1e-300))
    hits = np.nonzero(logr <= target)[0]
    if hits.size == 0:
        return None
    j = int(hits[0])
    if j == 0:
        return float(curve.times[0])
    l0, l1 = logr[j - 1], logr[j]
    t0, t1 = curve.times[j - 1], curve.times[j]
    f = (l0 - target) / (l0 - l1) if l0 != l1 else 1.0
    return float(t0 + f * (t1 - t0))


def koebe_bounds(n: float, a: float) -> tuple[float, float]:
    """Sandwich for rho_n from g_t'(0) = exp(2at), Koebe 1/4 and Schwarz."""
    return (n - math.log(4.0)) / (2.0 * a), n / (2.0 * a)


def slit_tip_radius(t: float, a: float) -> float:
    """Tip |gamma(t)| of the straight slit traced by U = 0.

    D minus [x, 1] has conformal radius 4x/(1+x)^2 at 0; solve for x.
    """
    c = math.exp(-2.0 * a * t)
    # 4x/(1+x)^2 = c  ->  c x^2 + (2c - 4) x + c = 0, root in (0, 1]
    disc = (2.0 * c - 4.0) ** 2 - 4.0 * c * c
    return ((4.0 - 2.0 * c) - math.sqrt(max(disc, 0.0))) / (2.0 * c)
