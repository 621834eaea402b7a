"""Monte Carlo drivers: return probabilities, crosscut hitting, the
min-sin exponent, and the reset Markov chain used for the decay argument.

Every experiment is a pure function of its config (including the master
seed).  Per-sample seeds come from ``slelab.mc.seed_for``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from numba import njit

from . import __version__
from .bessel import co_simulate_driving, min_sin_tail
from .geometry import CircleArc, circle_hit, crosscut_hit
from .loewner import (MAX_SUBSTEPS, STEP_FRACTION, TIP_DELTA, TRACE_BLOCK, TraceCurve,
                      first_radius_time, refine_trace, trace_curve, trace_kernel)
from .mc import (Accumulator, McEstimate, estimate_from_samples, experiment_key,
                 sample_seed64, seed_for, uniform)
from .params import SleParams, Variant, make_params

# angle of the co-simulated boundary target for two-sided radial (e^{2i theta0} = -1)
TWO_SIDED_THETA0 = math.pi / 2


@dataclass(frozen=True)
class ExperimentConfig:
    params: SleParams
    dt: float
    n_samples: int
    master_seed: int
    k: int = 1
    n: int = 1
    horizon_m: int = 6
    radii: tuple = ()
    eps_grid: tuple = ()
    x0: float = math.pi / 2
    t0: float = 1.0
    stride: int = 1

    def __post_init__(self):
        if int(self.n_samples) != self.n_samples or self.n_samples < 1:
            raise ValueError("n_samples must be a positive integer")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.k < 0 or self.n < 0 or self.horizon_m < 0 or self.stride < 1:
            raise ValueError("k, n, horizon_m must be nonnegative and stride >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = self.params.to_dict()
        d["radii"] = list(self.radii)
        d["eps_grid"] = list(self.eps_grid)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        p = d.pop("params")
        params = make_params(p["kappa"], p["variant"], p.get("beta"))
        d["radii"] = tuple(d.get("radii", ()))
        d["eps_grid"] = tuple(d.get("eps_grid", ()))
        return cls(params=params, **d)


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    intercept: float
    residual: float
    points: tuple

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "residual": self.residual,
                "points": [list(p) for p in self.points]}


def fit_exponent(points: Sequence[tuple]) -> ExponentFit:
    """Least squares line through (ln x, ln y)."""
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 2:
        raise ValueError("need at least two points")
    if any(not (x > 0 and y > 0) for x, y in pts):
        raise ValueError("all coordinates must be positive")
    lx = np.log([p[0] for p in pts])
    ly = np.log([p[1] for p in pts])
    if np.ptp(lx) == 0:
        raise ValueError("x values must not all coincide")
    A = np.vstack([lx, np.ones_like(lx)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = ly - (slope * lx + intercept)
    return ExponentFit(float(slope), float(intercept), float(np.sqrt(np.mean(res ** 2))),
                       tuple(zip(lx.tolist(), ly.tolist())))


# ---------------------------------------------------------------- curve sampling


def _sample_curve(params: SleParams, dt: float, n_reach: int, seed: int, stride: int):
    """Driving path and trace of one sample, traced until |gamma| <= e^{-n_reach}.

    The horizon n_reach/(2a) (plus one step) always suffices: rho_n <= n/(2a).
    """
    theta0 = TWO_SIDED_THETA0
    horizon = n_reach / (2.0 * params.a) + 2 * dt * stride
    U, _ = co_simulate_driving(params, theta0, dt, horizon, seed)
    curve = trace_curve(U, params, stride=stride, stop_radius=math.exp(-n_reach))
    return U, curve


# coarse segments closer than this (beyond the target radius) are retraced at every grid time
REFINE_MARGIN = 0.3


def _segment_distance(points: np.ndarray, z: complex) -> np.ndarray:
    """Distance from z to each polyline segment."""
    p0 = points[:-1] - z
    d = np.diff(points)
    dd = (d * d.conjugate()).real
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.clip(np.where(dd > 0, -(p0 * d.conjugate()).real / dd, 0.0), 0.0, 1.0)
    return np.abs(p0 + s * d)


def _refine_near(U, curve, z: complex, radius: float):
    """Retrace at full resolution wherever the polyline comes within radius + margin of z."""
    near = _segment_distance(curve.points, z) < radius + REFINE_MARGIN
    return refine_trace(U, curve, near) if near.any() else curve


# adaptive resolution near a boundary point: a segment of length l at distance d
# is split while l > RESOLVE_ETA * d, at most RESOLVE_LEVELS times (factor 4 each)
RESOLVE_ETA = 0.1
RESOLVE_LEVELS = 8


def resolve_near(U, curve, z: complex, radius: float, stride: int, n_stop: int, seed: int,
                 eta: float = RESOLVE_ETA, max_level: int = RESOLVE_LEVELS):
    """Refine the driving path where the trace passes close to z, and retrace.

    Polyline segments that could come within ``radius`` of z and are long
    compared with their distance to z get their driving intervals split by a
    Brownian bridge (exact in law for radial SLE).  Everything after the first
    refined time is retraced: the stride skeleton of the original grid, plus
    every grid time in windows already traced at full resolution.  Returns
    (U, curve, levels used).
    """
    skeleton = U.times[::stride]
    stop_logr = -float(n_stop)
    curve = _refine_near(U, curve, z, radius)
    for level in range(max_level):
        t_end = first_radius_time(curve, n_stop)
        pts = curve.points
        d = _segment_distance(pts, z)
        ln = np.abs(np.diff(pts))
        idx = U.index_of(curve.times)
        full = np.diff(idx) == 1
        bad = full & (ln > eta * d) & (d - ln < radius) & (curve.times[1:] <= t_end)
        if not bad.any():
            return U, curve, level
        t_first = curve.times[:-1][bad].min()
        U = U.refine(idx[:-1][bad], 4, seed_for(seed, "resolve", level))
        keep = curve.times <= t_first
        T = U.times
        sel = np.zeros(T.size, dtype=bool)
        for j in np.nonzero(full)[0]:
            if curve.times[j + 1] > t_first:
                lo = np.searchsorted(T, curve.times[j])
                hi = np.searchsorted(T, curve.times[j + 1], "right")
                sel[lo:hi] = True
        sel &= T > t_first
        new_t = np.union1d(T[sel], skeleton[skeleton > t_first])
        if new_t[-1] != T[-1]:
            new_t = np.append(new_t, T[-1])
        ni = U.index_of(new_t)
        p_new, f_new, count = trace_kernel(U.values, T, ni, curve.params.a, TIP_DELTA,
                                           STEP_FRACTION, MAX_SUBSTEPS, stop_logr,
                                           TRACE_BLOCK)
        curve = TraceCurve(np.concatenate([curve.times[keep], T[ni[:count]]]),
                           np.concatenate([curve.points[keep], p_new[:count]]),
                           curve.params,
                           np.concatenate([curve.failed[keep], f_new[:count]]))
        # skeleton segments that moved close to z get the full grid
        near = (_segment_distance(curve.points, z) < radius + REFINE_MARGIN)
        near &= np.diff(U.index_of(curve.times)) > 1
        if near.any():
            curve = refine_trace(U, curve, near)
    return U, curve, max_level


def return_prob_experiment(cfg: ExperimentConfig, ns: Optional[Sequence[int]] = None):
    """Frequency of gamma[rho_{n+k}, rho_{n+k+m}] meeting dD_k.

    With ``ns`` given, one curve per sample serves every n in ``ns`` and a
    dict n -> McEstimate is returned; otherwise the single estimate for
    ``cfg.n``.  The truncation at rho_{n+k+m} can only lower the frequency.
    """
    p = cfg.params
    if p.variant not in (Variant.RADIAL, Variant.TWO_SIDED):
        raise ValueError("return probabilities are defined for radial and two-sided radial")
    if cfg.horizon_m < 2:
        raise ValueError("horizon_m must be at least 2")
    if cfg.k < 1:
        raise ValueError("k must be at least 1")
    single = ns is None
    ns = [cfg.n] if single else [int(v) for v in ns]
    exp_id = f"return-prob:{json.dumps(p.to_dict(), sort_keys=True)}:k={cfg.k}:m={cfg.horizon_m}:dt={cfg.dt!r}:stride={cfg.stride}"
    accs = {n: Accumulator() for n in ns}
    n_reach = max(ns) + cfg.k + cfg.horizon_m
    r_k = math.exp(-cfg.k)
    for i in range(cfg.n_samples):
        if max(ns) == 0:
            for n in ns:
                accs[n].push(1.0)
            continue
        _, curve = _sample_curve(p, cfg.dt, n_reach, seed_for(cfg.master_seed, exp_id, i),
                                 cfg.stride)
        for n in ns:
            if n == 0:
                accs[n].push(1.0)  # gamma(rho_k) lies on dD_k
                continue
            t_lo = first_radius_time(curve, n + cfg.k)
            t_hi = first_radius_time(curve, n + cfg.k + cfg.horizon_m)
            if t_lo is None or t_hi is None:
                raise FloatingPointError("trace did not reach the truncation radius")
            hit = circle_hit(curve.upto(t_hi), r_k, t_lo)
            accs[n].push(1.0 if hit is not None else 0.0)
    out = {n: accs[n].estimate(cfg.master_seed, f"{exp_id}:n={n}") for n in ns}
    return out[cfg.n] if single else out


def crosscut_frequencies(cfg: ExperimentConfig, n_trunc: int = 6) -> dict:
    """Per diameter r, the frequency with which the radial trace (up to
    rho_{n_trunc}) meets the crosscut of D along |z + 1| = const of diameter r.

    Curves are traced every ``cfg.stride`` grid times; near -1, where the
    hits are decided, the driving path is refined and retraced (``resolve_near``)."""
    p = cfg.params
    if p.variant is not Variant.RADIAL:
        raise ValueError("crosscut experiment uses radial SLE")
    if len(cfg.radii) < 2:
        raise ValueError("need at least two radii")
    arcs = {float(r): CircleArc.near_minus_one(float(r)) for r in cfg.radii}
    reach = max(a.r for a in arcs.values())
    exp_id = f"crosscut:kappa={p.kappa!r}:N={n_trunc}:dt={cfg.dt!r}:stride={cfg.stride}"
    accs = {r: Accumulator() for r in arcs}
    for i in range(cfg.n_samples):
        U, curve = _sample_curve(p, cfg.dt, n_trunc, seed_for(cfg.master_seed, exp_id, i),
                                 cfg.stride)
        U, curve, _ = resolve_near(U, curve, -1 + 0j, reach, cfg.stride, n_trunc,
                                   seed_for(cfg.master_seed, exp_id + ":resolve", i))
        t_end = first_radius_time(curve, n_trunc)
        if t_end is None:
            raise FloatingPointError("trace did not reach the truncation radius")
        cut = curve.upto(t_end)
        for r, arc in arcs.items():
            accs[r].push(0.0 if crosscut_hit(cut, arc, 0.0) is None else 1.0)
    return {r: accs[r].estimate(cfg.master_seed, f"{exp_id}:r={r!r}") for r in arcs}


def crosscut_exponent_experiment(cfg: ExperimentConfig, n_trunc: int = 6):
    """Fit log(hit frequency) against log(diameter); returns (fit, per-r estimates).

    Radii with zero observed hits cannot enter a log-log fit and are left out
    (they remain in the per-r estimates)."""
    est = crosscut_frequencies(cfg, n_trunc)
    pts = [(r, e.mean) for r, e in sorted(est.items()) if e.mean > 0]
    if len(pts) < 2:
        raise ValueError("fewer than two radii with nonzero frequency")
    return fit_exponent(pts), est


def bessel_exponent_experiment(cfg: ExperimentConfig):
    """min-sin tail per eps; fit of log P against log eps.  Returns (fit, estimates)."""
    beta = cfg.params.beta
    if not beta > 0.5:
        raise ValueError("beta must exceed 1/2")
    if len(cfg.eps_grid) < 3:
        raise ValueError("need at least three eps values")
    est = {}
    for eps in cfg.eps_grid:
        est[float(eps)] = min_sin_tail(beta, cfg.x0, cfg.t0, float(eps), cfg.n_samples,
                                       cfg.dt, cfg.master_seed)
    pts = [(e, v.mean) for e, v in sorted(est.items()) if v.mean > 0]
    return fit_exponent(pts), est


# ---------------------------------------------------------------- reset chain


def geometric_eps(q: float, n: int) -> np.ndarray:
    """eps_j = q^(j+1), j = 0..n-1 (eps_0 = q keeps every value below 1)."""
    if not (0.0 <= q < 1.0):
        raise ValueError("q must lie in [0, 1)")
    return q ** (np.arange(n) + 1.0)


def _check_eps(eps_seq, n: int) -> np.ndarray:
    eps = np.asarray(eps_seq, dtype=float)
    if eps.ndim != 1 or eps.size < n:
        raise ValueError(f"need at least n={n} values eps_0..eps_(n-1)")
    eps = eps[:n]
    if np.any((eps < 0) | (eps >= 1)) or not np.all(np.isfinite(eps)):
        raise ValueError("eps values must lie in [0, 1)")
    if np.any(np.diff(eps) > 0):
        raise ValueError("eps sequence must be nonincreasing")
    return eps


def markov_tail_exact(eps_seq, n: int) -> float:
    """P{X_n < n/2 | X_0 = 0} by propagating the law over states 0..n."""
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    eps = _check_eps(eps_seq, n)
    dist = np.zeros(n + 1)
    dist[0] = 1.0
    for step in range(n):
        new = np.zeros(n + 1)
        live = dist[: step + 1]
        new[0] = float(np.dot(live, eps[: step + 1]))
        new[1: step + 2] = live * (1.0 - eps[: step + 1])
        dist = new
    return float(dist[np.arange(n + 1) < n / 2].sum())


@njit(cache=True)
def _chain_kernel(eps, n, master, key, n_samples):
    out = np.zeros(n_samples)
    state = np.zeros(1, dtype=np.uint64)
    for k in range(n_samples):
        state[0] = sample_seed64(master, key, np.uint64(k))
        x = 0
        for _ in range(n):
            if uniform(state, 0) < eps[x]:
                x = 0
            else:
                x += 1
        out[k] = 1.0 if 2 * x < n else 0.0
    return out


def markov_tail_mc(eps_seq, n: int, n_samples: int, seed: int) -> McEstimate:
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    if int(n_samples) != n_samples or n_samples < 1:
        raise ValueError("n_samples must be a positive integer")
    eps = _check_eps(eps_seq, n)
    exp_id = f"markov-tail:n={n}:eps={hashlib.blake2b(eps.tobytes(), digest_size=8).hexdigest()}"
    vals = _chain_kernel(eps, int(n), np.uint64(seed), np.uint64(experiment_key(exp_id)),
                         int(n_samples))
    return estimate_from_samples(vals, seed, exp_id)


def markov_return_tail(eps_seq, n: int, mode: str = "exact", n_samples: int = 0,
                       seed: int = 0):
    """P{X_n < n/2 | X_0 = 0} for the chain with p(j, 0) = eps_j, p(j, j+1) = 1 - eps_j."""
    if mode == "exact":
        return markov_tail_exact(eps_seq, n)
    if mode == "mc":
        return markov_tail_mc(eps_seq, n, n_samples, seed)
    raise ValueError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------- output


def artifact_version() -> str:
    """Package version plus a short digest of the installed sources."""
    h = hashlib.blake2b(digest_size=4)
    here = Path(__file__).parent
    for f in sorted(here.glob("*.py")):
        h.update(f.name.encode())
        h.update(f.read_bytes())
    return f"{__version__}+{h.hexdigest()}"


def write_summary(out_dir, summary: dict) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "summary.json"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_points(out_dir, header: Sequence[str], rows) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "points.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(header))
        for row in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])
    return path
