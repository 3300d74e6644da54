"""Command line: ``fracshe {validate,kernel,simulate,skeleton,rate,mdp-probe,verify}``.

Exit codes: 0 success, 1 validation failure, 2 runtime error, 3 verify failure.
Errors are reported on stderr as one JSON record.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import io as csvio
from .config import DEFAULT_CONFIG, parse_config, violations
from .errors import FracSHEError, TailTooRare, ValidationError
from .fields import THREADS_ENV, solve_deterministic, solve_spde
from .kernel import green_on_grid
from .rate import mdp_probe_mc, mdp_slope_linear, rate_endpoint
from .skeleton import solve_skeleton

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_VERIFY = 0, 1, 2, 3


def _load(args):
    text = DEFAULT_CONFIG
    if args.config:
        with open(args.config) as fh:
            text = fh.read()
    cfg = parse_config(text, validate=args.command != "validate")
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if getattr(args, "replicas", None) is not None:
        over["replicas"] = args.replicas
    if getattr(args, "eps", None) is not None:
        over["eps"] = tuple(args.eps)
    return cfg.with_(**over) if over else cfg


def _emit(args, header, rows):
    if args.out:
        csvio.write_rows(args.out, header, rows)
    else:
        csvio.write_rows(sys.stdout, header, rows)


def cmd_validate(cfg, args):
    bad = violations(cfg)
    checks = ["alpha in ]0,2] minus {1}", "|delta| <= min(alpha, 2-alpha)", "(C)/(D)",
              "(H_eta^alpha)", "speed: lambda -> inf, sqrt(eps)*lambda -> 0"]
    failed = {c for c, _ in bad}
    for c in checks:
        print(f"{'FAIL' if c in failed else 'ok  '} {c}")
    for c, m in bad:
        if c not in checks:
            print(f"FAIL {c}")
        print(f"     {m}")
    return EXIT_INVALID if bad else EXIT_OK


def cmd_kernel(cfg, args):
    kg = green_on_grid(cfg.params, args.t, cfg.grid)
    _emit(args, *csvio.kernel_rows(kg))
    return EXIT_OK


def cmd_simulate(cfg, args):
    eps = cfg.eps[0]
    grid = cfg.grid
    u = solve_spde(cfg.params, cfg.coeffs, cfg.mu, eps, grid, seed=cfg.seed,
                   replicas=cfg.replicas)
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        first = type(u)(grid, np.asarray(u.values)[0])
        csvio.write_rows(os.path.join(args.out_dir, "trajectory.csv"),
                         *csvio.trajectory_rows(first))
        csvio.write_rows(os.path.join(args.out_dir, "summary.csv"),
                         *csvio.summary_rows(u, cfg.site))
        with open(os.path.join(args.out_dir, "seeds.json"), "w") as fh:
            json.dump(_seed_record(cfg, eps), fh, indent=1, sort_keys=True)
            fh.write("\n")
    else:
        _emit(args, *csvio.summary_rows(u, cfg.site))
    return EXIT_OK


def _seed_record(cfg, eps):
    g = cfg.grid
    return {"seed": cfg.seed, "replicas": list(range(cfg.replicas)), "eps": eps,
            "generator": "Philox(SeedSequence(seed, spawn_key=(replica,)))",
            "normals_per_step": g.size, "steps": g.n_t,
            "normals_per_replica": g.size * g.n_t}


def cmd_skeleton(cfg, args):
    from .io import read_control
    grid = cfg.grid
    h = read_control(args.control, grid, cfg.mu, cfg.n_cells)
    u0 = solve_deterministic(cfg.params, cfg.coeffs, grid)
    z = solve_skeleton(cfg.params, cfg.coeffs, cfg.mu, u0, h, grid)
    _emit(args, *csvio.trajectory_rows(z))
    return EXIT_OK


def cmd_rate(cfg, args):
    levels = args.level if args.level else list(cfg.levels)
    grid = cfg.grid
    u0 = solve_deterministic(cfg.params, cfg.coeffs, grid)
    rows = []
    for a in levels:
        r = rate_endpoint(cfg.params, cfg.coeffs, cfg.mu, grid, cfg.site, a,
                          n_cells=cfg.n_cells, method=args.method, u_zero=u0)
        rows.append((a, r.value, r.iterations, r.gradient_norm, r.feasibility_gap))
        if args.control_out:
            csvio.write_rows(args.control_out, *csvio.control_rows(r.optimal_control))
    _emit(args, ["level", "rate", "iterations", "gradient_norm", "feasibility_gap"], rows)
    return EXIT_OK


def _is_linear_gaussian(co):
    return co.sigma.is_constant and co.b.is_linear


def cmd_mdp_probe(cfg, args):
    grid = cfg.grid
    co = cfg.coeffs
    a = (args.level or list(cfg.levels))[0]
    mode = args.mode
    if mode == "auto":
        mode = "analytic" if _is_linear_gaussian(co) else "mc"
    istar = rate_endpoint(cfg.params, co, cfg.mu, grid, cfg.site, a, n_cells=cfg.n_cells).value
    if mode == "analytic":
        if not _is_linear_gaussian(co):
            raise ValidationError("analytic slopes need constant sigma and linear b",
                                  "linear-Gaussian configuration")
        sigma = float(co.sigma(0.0))
        drift = float(co.b.deriv(0.0))
        table = mdp_slope_linear(cfg.params, cfg.mu, grid, cfg.site, a, cfg.speed, cfg.eps,
                                 sigma=sigma, drift=drift, rate_star=istar)
    else:
        try:
            table = mdp_probe_mc(cfg.params, co, cfg.mu, grid, cfg.site, a, cfg.speed, cfg.eps,
                                 cfg.replicas, cfg.seed, rate_star=istar)
        except TailTooRare as e:
            _emit(args, *csvio.probe_rows([e.row]))
            raise
    _emit(args, *csvio.probe_rows(table))
    return EXIT_OK


def cmd_verify(cfg, args):
    from .verify import run_suite
    stages = args.stage or None
    res = run_suite(cfg.seed, stages=stages, repeat=not args.once,
                    echo=lambda r: print(r.line(), flush=True))
    ok = all(r.passed for r in res)
    print(f"{sum(r.passed for r in res)}/{len(res)} passed")
    return EXIT_OK if ok else EXIT_VERIFY


COMMANDS = {
    "validate": cmd_validate,
    "kernel": cmd_kernel,
    "simulate": cmd_simulate,
    "skeleton": cmd_skeleton,
    "rate": cmd_rate,
    "mdp-probe": cmd_mdp_probe,
    "verify": cmd_verify,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="fracshe", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config (default: shipped config)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", help="CSV output path (default: stdout)")
    common.add_argument("--threads", type=int,
                        help=f"replica threads (default: ${THREADS_ENV} or 1)")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="print the condition report")
    k = sub.add_parser("kernel", parents=[common], help="Green kernel CSV")
    k.add_argument("--t", type=float, default=1.0)
    s = sub.add_parser("simulate", parents=[common], help="run replicas of the perturbed equation")
    s.add_argument("--replicas", type=int)
    s.add_argument("--eps", type=float, nargs="+")
    s.add_argument("--out-dir", help="write trajectory.csv, summary.csv and seeds.json here")
    sk = sub.add_parser("skeleton", parents=[common], help="solve Z^h for a control CSV")
    sk.add_argument("--control", required=True)
    r = sub.add_parser("rate", parents=[common], help="endpoint rate function")
    r.add_argument("--level", type=float, nargs="+")
    r.add_argument("--method", choices=("closed", "gradient"), default="closed")
    r.add_argument("--control-out", help="write the optimal control CSV")
    m = sub.add_parser("mdp-probe", parents=[common], help="tail-slope table")
    m.add_argument("--level", type=float, nargs="+")
    m.add_argument("--eps", type=float, nargs="+")
    m.add_argument("--replicas", type=int)
    m.add_argument("--mode", choices=("auto", "analytic", "mc"), default="auto")
    v = sub.add_parser("verify", parents=[common], help="run the property suite")
    v.add_argument("--stage", type=int, nargs="+", help="only these stages (1-11)")
    v.add_argument("--once", action="store_true", help="skip the determinism rerun")
    return ap


def _error(e, code):
    rec = {"error": type(e).__name__, "message": str(e), "exit": code}
    cond = getattr(e, "condition", None)
    if cond:
        rec["condition"] = cond
    for attr in ("line", "column", "required_L"):
        if getattr(e, attr, None) is not None:
            rec[attr] = getattr(e, attr)
    print(json.dumps(rec), file=sys.stderr)
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads:
        os.environ[THREADS_ENV] = str(args.threads)
    try:
        cfg = _load(args)
        return COMMANDS[args.command](cfg, args)
    except ValidationError as e:
        return _error(e, EXIT_INVALID)
    except (FracSHEError, ValueError, OSError, ArithmeticError) as e:
        return _error(e, EXIT_RUNTIME)


if __name__ == "__main__":
    sys.exit(main())
