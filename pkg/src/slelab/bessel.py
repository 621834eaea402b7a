"""Radial Bessel process dX = beta cot X dt + dB on (0, pi).

Simulation is Euler-Maruyama on a uniform grid.  Near the boundary
(sin X < 0.05), or when a proposed step would leave (0, pi), the grid step is
split in half with a Brownian-bridge refinement of the increment, so the
drift alone decides whether the process reaches the boundary.  Stopping
barriers inside (0, pi) are checked both on the proposed step and with the
bridge crossing probability exp(-2 (x - b)(x' - b) / h).

Each sample draws from its own splitmix64 stream seeded by
``slelab.mc.sample_seed64``; normals use a ziggurat sampler.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numba import njit

from .mc import (McEstimate, estimate_from_samples, experiment_key, new_stream, normal,
                 sample_seed64, seed_for, uniform)
from .params import SleParams

BOUNDARY_TOL = 1e-6
REFINE_SIN = 0.05
REFINE_FRACTION = 0.01
H_MIN = 1e-14
STACK = 96
EXIT_HORIZON = 200.0

NONE = 0
HIT_LO = 1
HIT_HI = 2


@dataclass(frozen=True)
class BesselPath:
    dt: float
    values: np.ndarray
    beta: float
    absorbed: Optional[float] = None

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.values.size) * self.dt

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "x"])
            for t, x in zip(self.times, self.values):
                w.writerow([f"{t:.17g}", f"{x:.17g}"])


# ---------------------------------------------------------------- kernels


@njit(cache=True)
def _bridge_hit(x, xn, h, b, state, j):
    e = 2.0 * (x - b) * (xn - b) / h
    if e > 27.6:  # crossing probability below 1e-12
        return False
    return uniform(state, j) < math.exp(-e)


@njit(cache=True)
def _interval(x, c, H, dB, beta, lo, hi, state, j, stack_h, stack_b):
    """Advance X across one grid interval of length H with increment dB.

    ``c`` is cot(x), carried between calls so each accepted step costs one
    tan.  Returns (x, c, elapsed, d_integ, d_cot, code); code says whether
    lo or hi was reached, in which case x is the barrier value and elapsed
    the interpolated hitting time.  d_integ is the trapezoid increment of
    int ds / sin^2 X, d_cot that of int cot X ds (left point).
    """
    integ = 0.0
    cotint = 0.0
    elapsed = 0.0
    stack_h[0] = H
    stack_b[0] = dB
    sp = 1
    while sp > 0:
        sp -= 1
        h = stack_h[sp]
        db = stack_b[sp]
        inv = 1.0 + c * c  # 1/sin^2 x
        xn = x + beta * c * h + db
        if xn <= 0.0 or xn >= math.pi:
            split = True
            cn = 0.0
        else:
            # both ends of the step count: a step into the boundary layer must be resolved
            cn = 1.0 / math.tan(xn)
            m = max(inv, 1.0 + cn * cn)
            split = m > 1.0 / (REFINE_SIN * REFINE_SIN) and h * m > REFINE_FRACTION
        if split and h > H_MIN and sp < STACK - 2:
            db1 = 0.5 * db + 0.5 * math.sqrt(h) * normal(state, j)
            stack_h[sp] = 0.5 * h
            stack_b[sp] = db - db1
            stack_h[sp + 1] = 0.5 * h
            stack_b[sp + 1] = db1
            sp += 2
            continue
        b = -1.0
        f = 1.0
        if xn <= lo:
            b = lo
        elif xn >= hi:
            b = hi
        if b >= 0.0:
            f = (x - b) / (x - xn) if x != xn else 1.0
        elif _bridge_hit(x, xn, h, lo, state, j):
            b = lo
            f = 0.5
        elif _bridge_hit(x, xn, h, hi, state, j):
            b = hi
            f = 0.5
        if b >= 0.0:
            sb = math.sin(b)
            integ += 0.5 * f * h * (inv + 1.0 / (sb * sb))
            cotint += c * f * h
            return b, math.cos(b) / sb, elapsed + f * h, integ, cotint, HIT_LO if b == lo else HIT_HI
        integ += 0.5 * h * (inv + 1.0 + cn * cn)
        cotint += c * h
        elapsed += h
        x = xn
        c = cn
    return x, c, elapsed, integ, cotint, NONE


@njit(cache=True)
def _path_kernel(seed, x0, beta, dt, n_steps, lo, hi):
    state = new_stream(seed)
    stack_h = np.empty(STACK)
    stack_b = np.empty(STACK)
    xs = np.empty(n_steps + 1)
    xs[0] = x0
    sq = math.sqrt(dt)
    x = x0
    c = 1.0 / math.tan(x0)
    for i in range(n_steps):
        dB = sq * normal(state, 0)
        x, c, el, _, _, code = _interval(x, c, dt, dB, beta, lo, hi, state, 0, stack_h, stack_b)
        if code != NONE:
            return xs[: i + 1], i * dt + el
        xs[i + 1] = x
    return xs, -1.0


LANES = 8


@njit(cache=True)
def _stopped_kernel(master, key, n, x0, beta, dt, n_steps, lo, hi):
    """Per sample: run until lo/hi is reached or n_steps grid steps elapse.

    LANES samples are advanced side by side so their dependency chains
    overlap; each sample has its own stream, and the inline fast step
    consumes the same random numbers as ``_interval`` would, so results do
    not depend on the lane schedule.
    """
    x_out = np.empty(n)
    t_out = np.empty(n)
    i_out = np.empty(n)
    code_out = np.empty(n, dtype=np.int64)
    stack_h = np.empty(STACK)
    stack_b = np.empty(STACK)
    sq = math.sqrt(dt)
    c0 = 1.0 / math.tan(x0)
    inv_lim = 1.0 / (REFINE_SIN * REFINE_SIN)
    inside = lo < x0 < hi
    state = np.zeros(LANES, dtype=np.uint64)
    xs = np.empty(LANES)
    cs = np.empty(LANES)
    integ = np.zeros(LANES)
    steps = np.zeros(LANES, dtype=np.int64)
    owner = np.full(LANES, -1, dtype=np.int64)
    nxt = 0
    active = 0
    while True:
        # fill idle lanes; samples starting outside (lo, hi) finish at once
        for j in range(LANES):
            while owner[j] < 0 and nxt < n:
                k = nxt
                nxt += 1
                if not inside or n_steps == 0:
                    x_out[k] = x0
                    t_out[k] = 0.0
                    i_out[k] = 0.0
                    code_out[k] = NONE if inside else (HIT_LO if x0 <= lo else HIT_HI)
                    continue
                owner[j] = k
                state[j] = sample_seed64(master, key, np.uint64(k))
                xs[j] = x0
                cs[j] = c0
                integ[j] = 0.0
                steps[j] = 0
                active += 1
        if active == 0:
            break
        for j in range(LANES):
            if owner[j] < 0:
                continue
            x = xs[j]
            c = cs[j]
            dB = sq * normal(state, j)
            inv = 1.0 + c * c
            xn = x + beta * c * dt + dB
            code = NONE
            if (inv <= inv_lim and lo < xn < hi
                    and 2.0 * (x - lo) * (xn - lo) > 27.6 * dt
                    and 2.0 * (x - hi) * (xn - hi) > 27.6 * dt):
                cn = 1.0 / math.tan(xn)
                integ[j] += 0.5 * dt * (inv + 1.0 + cn * cn)
                el = dt
            else:
                xn, cn, el, di, _, code = _interval(x, c, dt, dB, beta, lo, hi, state, j,
                                                    stack_h, stack_b)
                integ[j] += di
            xs[j] = xn
            cs[j] = cn
            steps[j] += 1
            if code != NONE or steps[j] == n_steps:
                k = owner[j]
                x_out[k] = xn
                t_out[k] = (steps[j] - 1) * dt + el
                i_out[k] = integ[j]
                code_out[k] = code
                owner[j] = -1
                active -= 1
    return x_out, t_out, i_out, code_out


@njit(cache=True)
def _cosim_kernel(seed, x0, beta, a, dt, n_steps, lo, hi, truncate):
    state = new_stream(seed)
    stack_h = np.empty(STACK)
    stack_b = np.empty(STACK)
    xs = np.empty(n_steps + 1)
    us = np.empty(n_steps + 1)
    xs[0] = x0
    us[0] = 0.0
    sq = math.sqrt(dt)
    x = x0
    c = 1.0 / math.tan(x0)
    alive = True
    tau = -1.0
    n_x = n_steps + 1
    for i in range(n_steps):
        dB = sq * normal(state, 0)
        if alive:
            x, c, el, _, cint, code = _interval(x, c, dt, dB, beta, lo, hi, state, 0,
                                                stack_h, stack_b)
            if code != NONE:
                alive = False
                tau = i * dt + el
                n_x = i + 1
                if truncate:
                    return xs[: i + 1], us[: i + 1], tau, n_x
                us[i + 1] = us[i] - dB
            else:
                xs[i + 1] = x
                us[i + 1] = us[i] + (a - beta) * cint - dB
        else:
            us[i + 1] = us[i] - dB
    return xs[:n_x], us, tau, n_x


# ---------------------------------------------------------------- helpers


def _check_x(x: float) -> None:
    if not (0.0 < x < math.pi):
        raise ValueError(f"x must lie in (0, pi), got {x}")


def _n_steps(horizon: float, dt: float) -> int:
    if not dt > 0 or horizon < 0:
        raise ValueError("need dt > 0 and horizon >= 0")
    if horizon > 0 and dt > 1e-2 * horizon:
        raise ValueError("dt must be at most 1e-2 * horizon")
    return int(round(horizon / dt))


def _check_samples(n_samples: int) -> None:
    if int(n_samples) != n_samples or n_samples < 1:
        raise ValueError("n_samples must be a positive integer")


# ---------------------------------------------------------------- public API


def simulate_bessel(beta: float, x0: float, dt: float, horizon: float, seed: int) -> BesselPath:
    """One grid path, absorbed when X leaves (tol, pi - tol)."""
    _check_x(x0)
    n = _n_steps(horizon, dt)
    xs, tau = _path_kernel(np.uint64(seed_for(seed, "bessel-path", 0)), float(x0), float(beta), float(dt), n,
                           BOUNDARY_TOL, math.pi - BOUNDARY_TOL)
    return BesselPath(float(dt), xs.copy(), float(beta), None if tau < 0 else float(tau))


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(40)


def _panel_edges(c: float) -> np.ndarray:
    """0, 0.5, 1, then a geometric grid with ratio 1.5 up to c."""
    edges = [0.0, 0.5, 1.0]
    while edges[-1] * 1.5 < c:
        edges.append(edges[-1] * 1.5)
    edges = [e for e in edges if e < c]
    edges.append(c)
    return np.array(edges)


def exact_F(beta: float, x: float) -> float:
    """Scale function int_x^{pi/2} sin(t)^(-2 beta) dt.

    With u = cot t this is int_0^{cot x} (1 + u^2)^(beta - 1) du, whose
    integrand is smooth (poles only at +-i).  Panels grow geometrically with
    u, so each is a short interval relative to its distance from the poles,
    and a 40-point Gauss-Legendre rule per panel is accurate to rounding;
    the panel sums are added with math.fsum.
    """
    if not x > 0:
        raise ValueError("x must be positive")
    if x > math.pi / 2:
        raise ValueError("x must be at most pi/2")
    if not beta > 0.5:
        raise ValueError("beta must exceed 1/2")
    c = math.cos(x) / math.sin(x)
    if x == math.pi / 2 or c <= 0:
        return 0.0
    if beta == 1.0:
        return c
    edges = _panel_edges(c)
    lo, hi = edges[:-1, None], edges[1:, None]
    u = 0.5 * (hi - lo) * _GL_NODES + 0.5 * (hi + lo)
    vals = 0.5 * (hi - lo) * _GL_WEIGHTS * (1.0 + u * u) ** (beta - 1.0)
    return math.fsum(vals.ravel())


def exit_prob_exact(beta: float, x: float, eps: float) -> float:
    """P{X hits eps before pi/2 | X_0 = x} = F(x)/F(eps)."""
    if not (0.0 < eps < x <= math.pi / 2):
        raise ValueError("need 0 < eps < x <= pi/2")
    return exact_F(beta, x) / exact_F(beta, eps)


def stopped_samples(beta: float, x0: float, lo: float, hi: float, dt: float,
                    horizon: float, n_samples: int, seed: int, experiment_id: str):
    """Raw per-sample stopping data: (x_stop, t_stop, int ds/sin^2, code)."""
    _check_samples(n_samples)
    n_steps = int(math.ceil(horizon / dt - 1e-9))
    return _stopped_kernel(np.uint64(seed), np.uint64(experiment_key(experiment_id)),
                           int(n_samples), float(x0), float(beta), float(dt), n_steps,
                           float(lo), float(hi))


def mc_exit_prob(beta: float, x: float, eps: float, n_samples: int, dt: float,
                 seed: int) -> McEstimate:
    """Frequency of hitting eps before pi/2, started at x."""
    if not (0.0 < eps < x <= math.pi / 2):
        raise ValueError("need 0 < eps < x <= pi/2")
    _check_samples(n_samples)
    exp_id = f"exit-prob:beta={beta!r}:x={x!r}:eps={eps!r}:dt={dt!r}"
    _, _, _, code = stopped_samples(beta, x, eps, math.pi / 2, dt, EXIT_HORIZON,
                                    n_samples, seed, exp_id)
    return estimate_from_samples((code == HIT_LO).astype(float), seed, exp_id)


def min_sin_tail(beta: float, x0: float, t0: float, eps: float, n_samples: int,
                 dt: float, seed: int) -> McEstimate:
    """P{min_{t <= t0} sin X_t <= eps sin X_0}."""
    if not beta > 0.5:
        raise ValueError("beta must exceed 1/2")
    _check_x(x0)
    _check_samples(n_samples)
    if not (0.0 < eps <= 1.0):
        raise ValueError("eps must lie in (0, 1]")
    if not t0 > 0:
        raise ValueError("t0 must be positive")
    exp_id = f"min-sin:beta={beta!r}:x0={x0!r}:t0={t0!r}:eps={eps!r}:dt={dt!r}"
    if eps == 1.0:
        return estimate_from_samples(np.ones(int(n_samples)), seed, exp_id)
    lo = math.asin(eps * math.sin(x0))
    _, _, _, code = stopped_samples(beta, x0, lo, math.pi - lo, dt, t0,
                                    n_samples, seed, exp_id)
    return estimate_from_samples((code != NONE).astype(float), seed, exp_id)


def martingale_value(x, t, integral, beta):
    """M_{t,beta} = sin(x)^beta exp(beta^2 t/2) exp((1-beta) beta/2 * integral)."""
    x = np.asarray(x, dtype=float)
    return (np.sin(x) ** beta * np.exp(0.5 * beta * beta * np.asarray(t))
            * np.exp(0.5 * (1.0 - beta) * beta * np.asarray(integral)))


def martingale_weight(path: BesselPath, beta: float) -> np.ndarray:
    """M_t on the grid of an alive path segment (trapezoid integral)."""
    xs = path.values
    inv = 1.0 / np.sin(xs) ** 2
    integral = np.concatenate([[0.0], np.cumsum(0.5 * path.dt * (inv[1:] + inv[:-1]))])
    return martingale_value(xs, path.times, integral, beta)


@dataclass(frozen=True)
class StoppedSample:
    """Paths stopped at tau_eps ^ t0, with everything needed for reweighting."""

    beta: float
    x0: float
    eps: float
    t0: float
    x: np.ndarray
    t: np.ndarray
    integral: np.ndarray
    master_seed: int
    experiment_id: str

    def __len__(self) -> int:
        return self.x.size

    def normalized_martingale(self, beta: float) -> np.ndarray:
        m0 = math.sin(self.x0) ** beta
        return martingale_value(self.x, self.t, self.integral, beta) / m0


def sample_stopped(beta: float, x0: float, eps: float, t0: float, n_samples: int,
                   dt: float, seed: int) -> StoppedSample:
    """Simulate under ``beta`` and stop at tau_eps ^ t0, tau_eps = inf{sin X <= eps}."""
    _check_x(x0)
    _check_samples(n_samples)
    if not eps > 0:
        raise ValueError("eps must be positive (weights are unbounded at eps = 0)")
    if not math.sin(x0) > eps:
        raise ValueError("x0 must satisfy sin x0 > eps")
    lo = math.asin(min(eps, 1.0))
    exp_id = f"stopped:beta={beta!r}:x0={x0!r}:eps={eps!r}:t0={t0!r}:dt={dt!r}"
    x, t, integ, _ = stopped_samples(beta, x0, lo, math.pi - lo, dt, t0, n_samples,
                                     seed, exp_id)
    return StoppedSample(float(beta), float(x0), float(eps), float(t0), x, t, integ,
                         seed, exp_id)


def girsanov_reweight(samples: StoppedSample, target_beta: float,
                      functional: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> McEstimate:
    """Estimate E_target[functional(X_stop, t_stop)] from samples under another beta."""
    if len(samples) == 0:
        raise ValueError("empty sample set")
    if samples.beta == target_beta:
        w = np.ones(len(samples))
    else:
        w = samples.normalized_martingale(target_beta) / samples.normalized_martingale(samples.beta)
    vals = np.asarray(functional(samples.x, samples.t), dtype=float) * w
    exp_id = f"{samples.experiment_id}:reweight->{target_beta!r}"
    return estimate_from_samples(vals, samples.master_seed, exp_id)


def co_simulate_driving(params: SleParams, theta0: float, dt: float, horizon: float,
                        seed: int):
    """Jointly simulate the angle process X and the driving function U.

    dX = beta cot X dt + dB, dU = (a - beta) cot X dt - dB, so that
    theta = X + U follows the boundary Loewner flow of exp(2i theta0).
    Returns (DrivingPath, BesselPath).  For chordal (and any variant whose
    U depends on X) both paths end at absorption; otherwise U continues as
    -B after X is absorbed.
    """
    from .loewner import DrivingPath

    _check_x(theta0)
    n = _n_steps(horizon, dt)
    beta = params.beta
    truncate = abs(params.a - beta) > 0
    xs, us, tau, _ = _cosim_kernel(np.uint64(seed_for(seed, "co-simulate", 0)), float(theta0), beta,
                                   params.a, float(dt), n, BOUNDARY_TOL,
                                   math.pi - BOUNDARY_TOL, truncate)
    U = DrivingPath(float(dt), us[: (xs.size if truncate else us.size)].copy())
    X = BesselPath(float(dt), xs.copy(), beta, None if tau < 0 else float(tau))
    return U, X
