"""Command line front end.

    slelab exit-prob --beta 1 --x pi/3 --eps pi/6 --samples 20000
    slelab markov-tail --eps geometric:0.5 --n 10 --mode exact

Every run prints a JSON summary; with ``--out DIR`` it also writes
``DIR/summary.json`` and ``DIR/points.csv``.  ``--replay summary.json``
reruns a previous invocation from its summary.
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
from typing import Optional

import numpy as np

from . import bessel, experiments, geometry, loewner
from .experiments import ExperimentConfig, artifact_version, write_points, write_summary
from .params import Variant, make_params

EXIT_OK = 0
EXIT_ARGS = 2
EXIT_NUMERIC = 3

COMMANDS = ("oracle-f", "exit-prob", "min-sin", "girsanov-check", "trace", "arcs",
            "return-prob", "crosscut-exponent", "markov-tail", "verify")

_PI_RE = re.compile(r"^\s*([+-]?)\s*(?:(\d+(?:\.\d*)?|\.\d+)\s*\*?\s*)?pi\s*(?:/\s*(\d+(?:\.\d*)?|\.\d+))?\s*$")


class ArgError(ValueError):
    pass


def parse_number(text) -> float:
    """Decimal, or a multiple of pi such as ``pi/3``, ``2pi/3``, ``-3*pi/4``."""
    if isinstance(text, (int, float)):
        return float(text)
    s = str(text).strip().lower()
    m = _PI_RE.match(s)
    if m:
        sign = -1.0 if m.group(1) == "-" else 1.0
        num = float(m.group(2)) if m.group(2) else 1.0
        den = float(m.group(3)) if m.group(3) else 1.0
        if den == 0:
            raise ArgError(f"division by zero in {text!r}")
        return sign * num * math.pi / den
    try:
        return float(s)
    except ValueError:
        raise ArgError(f"not a number: {text!r}") from None


def parse_list(text) -> list:
    if isinstance(text, (list, tuple)):
        return [parse_number(v) for v in text]
    return [parse_number(v) for v in str(text).split(",") if v.strip()]


def parse_eps(text, n: Optional[int] = None):
    """``geometric:q`` (eps_j = q^(j+1)) or a comma list."""
    s = str(text).strip()
    if s.startswith("geometric:"):
        if n is None:
            raise ArgError("geometric eps needs --n")
        return experiments.geometric_eps(parse_number(s.split(":", 1)[1]), n)
    return np.array(parse_list(s))


# every option is declared once; values default to None so config/replay can fill them
_OPTIONS = [
    ("--kappa", dict(type=str, help="SLE parameter, 0 < kappa < 8")),
    ("--variant", dict(choices=["radial", "chordal", "two-sided"])),
    ("--beta", dict(type=str, help="drift of the angle process")),
    ("--x", dict(type=str, help="starting angle (decimal or pi/K)")),
    ("--eps", dict(type=str, help="number, comma list, or geometric:q")),
    ("--t0", dict(type=str, help="time horizon for stopped simulations")),
    ("--dt", dict(type=str)),
    ("--samples", dict(type=int)),
    ("--seed", dict(type=int)),
    ("--k", dict(type=int)),
    ("--n", dict(type=int)),
    ("--horizon-m", dict(type=int)),
    ("--horizon", dict(type=str, help="driving-path length for trace/arcs")),
    ("--radii", dict(type=str, help="comma list of crosscut diameters")),
    ("--stride", dict(type=int, help="trace every stride-th grid time")),
    ("--resolution", dict(type=int, help="angular samples for arcs")),
    ("--source-beta", dict(type=str, help="simulation beta for girsanov-check")),
    ("--mode", dict(choices=["exact", "mc"])),
    ("--out", dict(type=str)),
    ("--config", dict(type=str)),
    ("--replay", dict(type=str)),
]

DEFAULTS = {
    "kappa": "3", "variant": "radial", "beta": "1", "x": "pi/3", "eps": "pi/6", "t0": "1",
    "dt": "1e-3", "samples": 10000, "seed": 20240601, "k": 1, "n": 3, "horizon_m": 6,
    "horizon": None, "radii": "0.4,0.2,0.1,0.05", "stride": 10, "resolution": 256,
    "source_beta": "0", "mode": "exact",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ARGS, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    for flag, kw in _OPTIONS:
        common.add_argument(flag, default=None, **kw)
    parser = _Parser(prog="slelab", description="SLE numerics in the unit disk")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def read_config(path) -> dict:
    """Flat ``key = value`` file; '#' starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ArgError(f"{path}:{lineno}: expected key = value")
            key, val = (p.strip() for p in line.split("=", 1))
            key = key.lstrip("-").replace("-", "_")
            if key not in DEFAULTS and key != "out":
                raise ArgError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = val
    return out


def resolve(args: argparse.Namespace) -> tuple[str, dict]:
    """Merge defaults < replay < config file < explicit flags."""
    cmd = args.command
    opts = dict(DEFAULTS)
    if args.replay:
        with open(args.replay, encoding="utf-8") as fh:
            rep = json.load(fh)
        if rep.get("command") != cmd:
            raise ArgError(f"replay file is for {rep.get('command')!r}, not {cmd!r}")
        opts.update(rep["options"])
    if args.config:
        opts.update(read_config(args.config))
    for key, val in vars(args).items():
        if (key in DEFAULTS or key == "out") and val is not None:
            opts[key] = val
    for key in ("samples", "seed", "k", "n", "horizon_m", "stride", "resolution"):
        if opts[key] is not None:
            opts[key] = int(opts[key])
    return cmd, opts


def _num(opts, key) -> float:
    return parse_number(opts[key])


def _params(opts):
    variant = Variant.parse(str(opts["variant"]))
    return make_params(_num(opts, "kappa"), variant)


# ---------------------------------------------------------------- commands


def cmd_oracle_f(o):
    beta, x = _num(o, "beta"), _num(o, "x")
    val = bessel.exact_F(beta, x)
    return {"value": val}, ["beta", "x", "F"], [[beta, x, val]]


def cmd_exit_prob(o):
    beta, x, eps, dt = _num(o, "beta"), _num(o, "x"), _num(o, "eps"), _num(o, "dt")
    est = bessel.mc_exit_prob(beta, x, eps, o["samples"], dt, o["seed"])
    exact = bessel.exit_prob_exact(beta, x, eps) if beta > 0.5 else None
    return ({"estimate": est.to_json(), "exact": exact},
            ["beta", "x", "eps", "mean", "stderr", "exact"],
            [[beta, x, eps, est.mean, est.stderr, exact if exact is not None else ""]])


def cmd_min_sin(o):
    beta, x0, t0, dt = _num(o, "beta"), _num(o, "x"), _num(o, "t0"), _num(o, "dt")
    eps_list = parse_list(o["eps"])
    est = {e: bessel.min_sin_tail(beta, x0, t0, e, o["samples"], dt, o["seed"])
           for e in eps_list}
    rows = [[e, v.mean, v.stderr] for e, v in est.items()]
    summary = {"estimates": {repr(e): v.to_json() for e, v in est.items()},
               "expected_slope": 2 * beta - 1}
    pts = [(e, v.mean) for e, v in est.items() if v.mean > 0 and e < 1]
    if len(pts) >= 2:
        summary["fit"] = experiments.fit_exponent(pts).to_dict()
    return summary, ["eps", "mean", "stderr"], rows


def cmd_girsanov_check(o):
    beta, beta0 = _num(o, "beta"), _num(o, "source_beta")
    x0, t0, eps, dt = _num(o, "x"), _num(o, "t0"), _num(o, "eps"), _num(o, "dt")
    n, seed = o["samples"], o["seed"]

    def above(x, t):
        return (x > math.pi / 2).astype(float)

    direct = bessel.sample_stopped(beta, x0, eps, t0, n, dt, seed)
    source = bessel.sample_stopped(beta0, x0, eps, t0, n, dt, seed + 1)
    d = bessel.girsanov_reweight(direct, beta, above)
    w = bessel.girsanov_reweight(source, beta, above)
    comb = math.hypot(d.stderr, w.stderr)
    z = abs(d.mean - w.mean) / comb if comb > 0 else 0.0
    return ({"direct": d.to_json(), "reweighted": w.to_json(), "z": z, "agree": z <= 3.0},
            ["method", "mean", "stderr"],
            [["direct", d.mean, d.stderr], ["reweighted", w.mean, w.stderr]])


def _driving(o, params, horizon):
    dt = _num(o, "dt")
    U, _ = bessel.co_simulate_driving(params, math.pi / 2, dt, horizon, o["seed"])
    return U


def _trace_horizon(o, params) -> float:
    if o["horizon"] is not None:
        return parse_number(o["horizon"])
    return o["n"] / (2 * params.a) + 2 * _num(o, "dt") * o["stride"]


def cmd_trace(o):
    params = _params(o)
    U = _driving(o, params, _trace_horizon(o, params))
    curve = loewner.trace_curve(U, params, stride=o["stride"])
    rho = {}
    n = 1
    while True:
        r = loewner.first_radius_time(curve, n)
        if r is None:
            break
        rho[n] = r
        n += 1
    rows = [[t, p.real, p.imag] for t, p in zip(curve.times.tolist(), curve.points.tolist())]
    return ({"params": params.to_dict(), "n_points": len(curve), "failed": int(curve.failed.sum()),
             "rho": rho, "koebe": {m: loewner.koebe_bounds(m, params.a) for m in rho}},
            ["t", "re", "im"], rows)


def cmd_arcs(o):
    params = _params(o)
    n, k = o["n"], o["k"]
    U = _driving(o, params, _trace_horizon(o, params))
    curve = loewner.trace_curve(U, params, stride=o["stride"], stop_radius=math.exp(-n))
    fam = geometry.arc_components(U, curve, n, k, o["resolution"])
    rows = [[i, a.theta_lo, a.theta_hi, int(i == fam.star_index)] for i, a in enumerate(fam.arcs)]
    return {"family": fam.to_json(), "access": list(fam.access)}, \
        ["index", "theta_lo", "theta_hi", "star"], rows


def _config(o, **extra) -> ExperimentConfig:
    return ExperimentConfig(_params(o), _num(o, "dt"), o["samples"], o["seed"], k=o["k"],
                            n=o["n"], horizon_m=o["horizon_m"], stride=o["stride"], **extra)


def cmd_return_prob(o):
    cfg = _config(o)
    est = experiments.return_prob_experiment(cfg)
    return ({"estimate": est.to_json(), "config": cfg.to_dict(),
             "truncation": "event cut at rho_{n+k+m}; estimate is biased low"},
            ["n", "mean", "stderr"], [[cfg.n, est.mean, est.stderr]])


def cmd_crosscut_exponent(o):
    cfg = _config(o, radii=tuple(parse_list(o["radii"])))
    fit, est = experiments.crosscut_exponent_experiment(cfg, n_trunc=o["n"])
    return ({"fit": fit.to_dict(), "alpha": cfg.params.alpha, "config": cfg.to_dict(),
             "estimates": {repr(r): e.to_json() for r, e in est.items()}},
            ["r", "mean", "stderr"], [[r, e.mean, e.stderr] for r, e in sorted(est.items())])


def cmd_markov_tail(o):
    n = o["n"]
    eps = parse_eps(o["eps"], n)
    if o["mode"] == "exact":
        val = experiments.markov_return_tail(eps, n, "exact")
        return {"value": val, "n": n}, ["n", "value"], [[n, val]]
    est = experiments.markov_return_tail(eps, n, "mc", o["samples"], o["seed"])
    return {"estimate": est.to_json(), "n": n}, ["n", "mean", "stderr"], \
        [[n, est.mean, est.stderr]]


def cmd_verify(o):
    from .verify import run_checks

    results = run_checks(seed=o["seed"])
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}", file=sys.stderr)
    summary = {"checks": [{"name": n, "passed": ok, "detail": d} for n, ok, d in results],
               "all_passed": all(ok for _, ok, _ in results)}
    return summary, ["check", "passed"], [[n, int(ok)] for n, ok, _ in results]


HANDLERS = {
    "oracle-f": cmd_oracle_f, "exit-prob": cmd_exit_prob, "min-sin": cmd_min_sin,
    "girsanov-check": cmd_girsanov_check, "trace": cmd_trace, "arcs": cmd_arcs,
    "return-prob": cmd_return_prob, "crosscut-exponent": cmd_crosscut_exponent,
    "markov-tail": cmd_markov_tail, "verify": cmd_verify,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK
    try:
        cmd, opts = resolve(args)
        out_dir = opts.pop("out", None) or args.out
        summary, header, rows = HANDLERS[cmd](opts)
    except (ArgError, ValueError, KeyError, OSError) as e:
        print(f"slelab {args.command}: error: {e}", file=sys.stderr)
        return EXIT_ARGS
    except (ArithmeticError, FloatingPointError) as e:
        print(f"slelab {args.command}: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    summary = {"command": cmd, "options": opts, "result": summary,
               "version": artifact_version()}
    text = json.dumps(summary, indent=2, sort_keys=True, default=_jsonable)
    print(text)
    if out_dir:
        write_summary(out_dir, json.loads(text))
        write_points(out_dir, header, rows)
    if cmd == "verify" and not summary["result"]["all_passed"]:
        return EXIT_NUMERIC
    return EXIT_OK


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not serializable: {type(v)}")


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
