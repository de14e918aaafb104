"""Command line entry point: fit, rates, certify, separation, noise-check.

Exit status is 0 on success, 1 when a verification fails and 2 for bad input.
"""

from __future__ import annotations

import argparse
import csv
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import ConfigError, load_config
from .dictionary import DictionarySpec, DomainError
from .estimator import Observation, SolverConfig, error_decomposition, fit
from .experiments import (RateSettings, centred_support, certify, noise_check, rate_study,
                          separation)
from .kernel import DegenerateMetric, KernelContext, export_kernel_table, gaussian_limit, window_half_width
from .measure import GridMeasure
from .noise import NoiseModelError, make_noise


def build_context(cfg, T=None) -> KernelContext:
    d, g = cfg["dictionary"], cfg["grid"]
    T = T or g["T"]
    spec = DictionarySpec(d["family"], d["scale"])
    b = g["b"] if g["b"] is not None else window_half_width(T, d["scale"], g["growth"])
    a = g["a"] if g["a"] is not None else -b
    if g["limit"]:
        return KernelContext(spec, None, (a, b))
    m = GridMeasure.uniform(a, b, T)
    c, h = 0.5 * (a + b), 0.5 * (b - a) * (1 - g["shrink"])
    return KernelContext(spec, m, (c - h, c + h))


def _write_csv(path, rows):
    if not rows:
        Path(path).write_text("")
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return x


def _dump(path, obj):
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2))


def cmd_fit(cfg, args, out: Path):
    ctx = build_context(cfg)
    if ctx.is_limit:
        raise ConfigError("fit needs a sampling grid (grid.limit must be false)")
    rng = np.random.default_rng(args.seed)
    truth = None
    if cfg["data"]:
        data = np.loadtxt(cfg["data"], delimiter=",", ndmin=2)
        m = GridMeasure(data[:, 0], data[:, 1])
        ctx = KernelContext(ctx.spec, m, ctx.window)
        y = m.vector(data[:, 2])
        sigma, delta = cfg["noise"]["sigma"], float(np.max(m.weights))
    else:
        amps = np.asarray(cfg["truth"]["amplitudes"], dtype=float)
        theta = (np.asarray(cfg["truth"]["theta"], dtype=float) if cfg["truth"]["theta"] is not None
                 else centred_support(ctx, amps.size, cfg["truth"]["gap"]))
        truth = (theta, amps)
        nk = {k: v for k, v in cfg["noise"].items() if k != "kind" and v is not None}
        model = make_noise(cfg["noise"]["kind"], ctx.measure, **nk)
        sigma, delta = model.declared(ctx.measure)
        y = ctx.measure.vector(amps @ ctx.features(theta)[:, 0] + model.sample(ctx.measure, rng).values)
    s = cfg["solver"]
    scfg = SolverConfig(C1=s["C1"], kappa=s["kappa"], coarse_step=s["coarse_step"], max_atoms=s["max_atoms"])
    est = fit(ctx, Observation(y, sigma, delta, float(ctx.measure.size)), scfg,
              n_true=None if truth is None else truth[0].size)
    est.to_json(out / "estimate.json")
    files = ["estimate.json"]
    if truth is not None:
        from .certificates import optimal_radius
        from .kernel import gaussian_limit_constants

        r = optimal_radius(gaussian_limit_constants(ctx.spec.scale))
        dec = error_decomposition(ctx, est.theta, est.beta, truth[0], truth[1], r)
        _dump(out / "error.json", {"truth_theta": truth[0], "truth_beta": truth[1], **dec.to_dict()})
        files.append("error.json")
    print(f"fitted {est.theta.size} atoms, kappa={est.kappa:.4g}, converged={est.converged}")
    return 0, files


def cmd_rates(cfg, args, out: Path):
    r = cfg["rates"]
    st = RateSettings(T=r["T"], reps=r["reps"], sigma=r["sigma"], C1=r["C1"], gap=r["gap"],
                      amplitudes=r["amplitudes"], shrink=r["shrink"], growth=r["growth"],
                      sigma0=cfg["dictionary"]["scale"])
    rows, summary = rate_study(st, seed=args.seed, jobs=args.jobs)
    _write_csv(out / "rates.csv", rows)
    _dump(out / "rates_summary.json", summary)
    print(f"slope {summary['slope']:.3f}, ratio spread {summary['ratio_spread']:.3f}")
    return 0, ["rates.csv", "rates_summary.json"]


def cmd_certify(cfg, args, out: Path):
    c = cfg["certify"]
    ctx = build_context(cfg)
    report, extra = certify(ctx, c["s"], c["gap"], c["rho"], c["eta0"], c["r"])
    report.to_json(out / "certificates.json")
    _dump(out / "coefficients.json", extra)
    export_kernel_table(ctx, report.support, out / "kernel_table.csv")
    print(f"{'all clauses hold' if report.passed else str(len(report.failures())) + ' clause failures'}")
    return (0 if report.passed else 1), ["certificates.json", "coefficients.json", "kernel_table.csv"]


def cmd_separation(cfg, args, out: Path):
    c = cfg["separation"]
    scale = cfg["dictionary"]["scale"]
    lim = gaussian_limit(scale, (-40 * scale, 40 * scale))
    grid = None if cfg["grid"]["limit"] else build_context(cfg, T=c["T"])
    res = separation(lim, grid, c["s"], c["rho"], c["eta0"], c["restarts"], args.seed)
    _dump(out / "separation.json", res)
    print(", ".join(f"{k}={v:.4g}" for k, v in res.items()))
    return 0, ["separation.json"]


def cmd_noise_check(cfg, args, out: Path):
    c = cfg["noise_check"]
    noise = {k: v for k, v in cfg["noise"].items() if v is not None}
    noise["sigma"] = c["sigma"]
    rows = noise_check(c["T"], c["reps"], c["processes"], c["n_u"], args.seed, c["sigma"],
                       cfg["dictionary"]["scale"], cfg["grid"]["shrink"], cfg["grid"]["growth"], noise)
    _write_csv(out / "noise_check.csv", rows)
    bad = [r for r in rows if not r["ok"]]
    print(f"{len(rows) - len(bad)}/{len(rows)} tail points within bound")
    return (0 if not bad else 1), ["noise_check.csv"]


COMMANDS = {"fit": cmd_fit, "rates": cmd_rates, "certify": cmd_certify,
            "separation": cmd_separation, "noise-check": cmd_noise_check}


def make_parser():
    p = argparse.ArgumentParser(prog="offgrid", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        q = sub.add_parser(name)
        q.add_argument("--config", type=Path, default=None, help="YAML run configuration")
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--out", type=Path, default=Path("out"))
        q.add_argument("--jobs", type=int, default=1)
    return p


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return 2
    started = time.time()
    try:
        cfg = load_config(args.config)
        args.out.mkdir(parents=True, exist_ok=True)
        code, files = COMMANDS[args.command](cfg, args, args.out)
    except (ConfigError, DomainError, NoiseModelError, DegenerateMetric, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    manifest = {
        "command": args.command, "argv": sys.argv[1:] if argv is None else list(argv),
        "seed": args.seed, "jobs": args.jobs, "config": cfg,
        "versions": {"offgrid": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "started": started, "seconds": time.time() - started, "exit_code": code, "outputs": files,
    }
    _dump(args.out / "manifest.json", manifest)
    return code


if __name__ == "__main__":
    sys.exit(main())
