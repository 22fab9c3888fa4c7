"""Command-line front end.

Exit codes: 0 success (or every check passed), 2 invalid input,
3 resource guard exceeded, 4 optimizer failure, 1 a verify check failed.
"""
from __future__ import annotations

import argparse
import io
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .channels import SpecError, load_spec
from .exponent import OmegaSolver, SearchSpec, f_sup
from .optimize import GridTooLarge, OptConfig, OptimizationError
from .oracle import CodeCountExceeded, verify_main_theorem
from .region import DEFAULT_MU_GRID, RatePoint, boundary
from .verify import CHECKS, run_suite

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_GUARD, EXIT_OPT = 0, 1, 2, 3, 4


class UsageError(ValueError):
    pass


def parse_grid(text: str) -> np.ndarray:
    """'a,b,c' lists values; 'lo:hi:n' is n log-spaced values from lo to hi."""
    try:
        if ":" in text:
            lo, hi, n = text.split(":")
            lo, hi, n = float(lo), float(hi), int(n)
            if lo <= 0 or hi < lo or n < 1:
                raise ValueError
            vals = np.logspace(math.log10(lo), math.log10(hi), n) if n > 1 else np.array([lo])
        else:
            vals = np.array([float(t) for t in text.split(",") if t.strip()])
    except ValueError:
        raise UsageError(f"bad grid {text!r}: use a comma list or lo:hi:n") from None
    if vals.size == 0 or np.any(vals <= 0) or np.any(np.diff(vals) <= 0):
        raise UsageError(f"grid {text!r} must be positive and strictly increasing")
    return vals


def write_csv(path, header: list[str], rows) -> None:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join("%.12g" % v for v in row) + "\n")
    data = buf.getvalue()
    if path in (None, "-"):
        sys.stdout.write(data)
    else:
        Path(path).write_text(data, encoding="utf-8", newline="\n")


def _cfg(args) -> OptConfig:
    return OptConfig(n_starts=args.starts, max_iters=args.max_iters, seed=args.seed)


def _search(args) -> SearchSpec:
    if args.grid_points < 1 or args.grid_refine < 0:
        raise UsageError("--grid-points must be >= 1 and --grid-refine >= 0")
    return SearchSpec.logspace(args.grid_points, refine_rounds=args.grid_refine)


def _p_s(spec, args):
    return None if getattr(args, "free_state", False) else spec.state_dist


def cmd_region(args) -> int:
    spec = load_spec(args.spec)
    mus = parse_grid(args.mu_grid) if args.mu_grid else np.asarray(DEFAULT_MU_GRID)
    curve = boundary(spec.channel, _p_s(spec, args), mus, _cfg(args))
    rds = np.linspace(0.0, args.rd_max, args.rd_points)
    write_csv(args.out, ["mu", "c_mu"], curve.entries)
    out2 = None if args.out in (None, "-") else str(Path(args.out).with_suffix("")) + "_boundary.csv"
    write_csv(out2, ["r_d", "c_of_r_d"], [(rd, curve.c_of(rd)) for rd in rds])
    return EXIT_OK


def cmd_exponent(args) -> int:
    spec = load_spec(args.spec)
    if args.rd < 0 or args.r < 0:
        raise UsageError("--rd and --r must be nonnegative")
    res = f_sup(spec.channel, RatePoint(args.rd, args.r), _search(args), _cfg(args))
    write_csv(args.out, ["alpha", "mu", "lambda", "omega_w", "f"],
              [(t.alpha, t.mu, t.lam, om, f) for t, om, f in res.surface.entries])
    t = res.tilt
    print(f"F={res.value:.6g} at alpha={t.alpha:.6g} mu={t.mu:.6g} lambda={t.lam:.6g}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    spec = load_spec(args.spec)
    rep = verify_main_theorem(spec.channel, spec.state_dist, args.n, args.k, args.m, _search(args), _cfg(args))
    code = rep.best_code
    print(f"G={rep.g_value:.6f}")
    print(f"Pc*={rep.pc_star:.6g}")
    print("state_enc=" + " ".join(map(str, code.state_enc)))
    for k, row in enumerate(code.chan_enc):
        print(f"chan_enc[{k}]=" + " ".join(map(str, row)))
    for m in range(code.m_size):
        print(f"decoder[:,{m}]=" + " ".join(map(str, code.decoder[:, m])))
    t = rep.exponent.tilt
    print(f"F={rep.f_value:.6g} at alpha={t.alpha:.6g} mu={t.mu:.6g} lambda={t.lam:.6g}")
    print(f"slack={rep.slack:.6g} {'PASS' if rep.passed else 'FAIL'}")
    return EXIT_OK if rep.passed else EXIT_FAIL


def _checks(text: str) -> tuple[str, ...]:
    names = tuple(t.strip() for t in text.split(",") if t.strip())
    bad = [n for n in names if n not in CHECKS]
    if bad or not names:
        raise UsageError(f"--checks takes a comma list from {', '.join(CHECKS)}")
    return names


def cmd_verify(args, omega_impl=None) -> int:
    spec = load_spec(args.spec)
    kw = {} if omega_impl is None else {"omega_impl": omega_impl}
    oracle = tuple((args.n, args.k, m) for m in range(1, args.m + 1))
    results = run_suite(spec.channel, spec.state_dist, _cfg(args), _search(args), samples=args.samples,
                        sep_points=args.sep_points, oracle=oracle, seed=args.seed,
                        literal_region=not args.fixed_state, checks=_checks(args.checks), **kw)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.ok for r in results) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sdc-converse", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, search=True):
        sp.add_argument("spec", help="channel spec JSON file, or a bundled channel name")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--starts", type=int, default=8, help="multi-start count per maximization")
        sp.add_argument("--max-iters", type=int, default=3000)
        if search:
            sp.add_argument("--grid-points", type=int, default=17, help="log-grid points per tilt axis on [1e-2, 1e2]")
            sp.add_argument("--grid-refine", type=int, default=2, help="local refinement rounds")

    r = sub.add_parser("region", help="support function C^mu and boundary C(R_d)",
                       description="Writes CSV 'mu,c_mu' to --out and 'r_d,c_of_r_d' to <out>_boundary.csv.")
    common(r, search=False)
    r.add_argument("--mu-grid", help="comma list or lo:hi:n (default 1e-2:1e2:41)")
    r.add_argument("--rd-max", type=float, default=2.0)
    r.add_argument("--rd-points", type=int, default=41)
    r.add_argument("--free-state", action="store_true", help="leave the S-marginal free")
    r.add_argument("--out", default="region.csv")
    r.set_defaults(func=cmd_region)

    e = sub.add_parser("exponent", help="F(R_d, R | W) by grid search",
                       description="Writes CSV 'alpha,mu,lambda,omega_w,f' with one row per evaluated tilt.")
    common(e)
    e.add_argument("--rd", type=float, required=True)
    e.add_argument("--r", type=float, required=True)
    e.add_argument("--out", default="exponent.csv")
    e.set_defaults(func=cmd_exponent)

    v = sub.add_parser("verify", help="run the property checks, one PASS/FAIL line each")
    common(v)
    v.add_argument("--samples", type=int, default=100, help="random (q, alpha, mu) triples")
    v.add_argument("--sep-points", type=int, default=4)
    v.add_argument("--n", type=int, default=1)
    v.add_argument("--k", type=int, default=2)
    v.add_argument("--m", type=int, default=2, help="oracle runs m_size = 1..m")
    v.add_argument("--checks", default=",".join(CHECKS), help="comma list of checks to run")
    v.add_argument("--fixed-state", action="store_true",
                   help="trace the separation region with the S-marginal pinned to state_dist")
    v.set_defaults(func=cmd_verify)

    o = sub.add_parser("oracle", help="exhaustive G^(n) and the converse slack")
    common(o)
    o.add_argument("--n", type=int, default=1)
    o.add_argument("--k", type=int, default=2)
    o.add_argument("--m", type=int, default=1)
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None, omega_impl=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "verify":
            return cmd_verify(args, omega_impl)
        return args.func(args)
    except CodeCountExceeded as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_GUARD
    except GridTooLarge as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_GUARD
    except OptimizationError as e:
        print(f"error: optimizer failure: {e}", file=sys.stderr)
        return EXIT_OPT
    except (SpecError, UsageError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
