"""Numerical property checks for the exponent machinery, each reported as PASS/FAIL/SKIPPED."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exponent import OmegaSolver, SearchSpec, TiltParams, f_sup, omega_q, omega_slope_at_zero
from .optimize import OptConfig
from .oracle import CodeCountExceeded, verify_main_theorem
from .prob import Channel
from .region import RatePoint, boundary, q_sizes, region_margin

CONVEXITY_TOL = 1e-9
SLOPE_TOL = 1e-4
SLOPE_LAMBDA = 1e-5
NONNEG_TOL = 1e-9
OUTSIDE_MIN = 1e-4
INSIDE_MAX = 1e-3
CHECKS = ("convexity", "slope", "nonnegativity", "separation", "oracle")


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str  # PASS, FAIL or SKIPPED
    slack: float
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status != "FAIL"

    def line(self) -> str:
        tail = f" {self.detail}" if self.detail else ""
        return f"{self.status} {self.name} slack={self.slack:.6g}{tail}"


def _status(slack: float) -> str:
    return "PASS" if slack >= 0 else "FAIL"


def sample_triples(channel: Channel, count: int, seed=0, lo: float = 0.1, hi: float = 3.0):
    """Seeded (q, alpha, mu) with q interior on the support of W and log-uniform alpha, mu."""
    rng = np.random.default_rng(seed)
    u, v = q_sizes(channel)
    shape = (u, v) + channel.w.shape
    support = np.broadcast_to(channel.w > 0, shape)
    out = []
    for _ in range(count):
        q = rng.dirichlet(np.ones(support.sum()))
        full = np.zeros(shape)
        full[support] = q
        a, m = np.exp(rng.uniform(math.log(lo), math.log(hi), 2))
        out.append((full, float(a), float(m)))
    return out


def convexity_check(channel: Channel, triples, lams=np.linspace(0.05, 0.45, 9), omega_impl=omega_q) -> CheckResult:
    lams = np.asarray(lams, float)
    worst = math.inf
    for q, a, m in triples:
        vals = np.array([omega_impl(q, channel, a, m, lam) for lam in lams])
        worst = min(worst, float(np.min(vals[:-2] - 2 * vals[1:-1] + vals[2:])))
    slack = worst + CONVEXITY_TOL
    return CheckResult("convexity", _status(slack), slack, f"min second difference {worst:.3g}")


def slope_check(channel: Channel, triples, omega_impl=omega_q) -> CheckResult:
    worst = 0.0
    for q, a, m in triples:
        est = omega_impl(q, channel, a, m, SLOPE_LAMBDA) / SLOPE_LAMBDA
        err = abs(est - omega_slope_at_zero(q, channel, a, m))
        worst = max(worst, err if np.isfinite(err) else math.inf)
    slack = SLOPE_TOL - worst
    return CheckResult("slope_identity", _status(slack), slack, f"max error {worst:.3g}")


def nonnegativity_check(solver: OmegaSolver, grid=tuple(np.logspace(-2, 2, 5)), rates=None) -> CheckResult:
    """Omega(W) >= 0 on the grid and F >= 0 on a rate grid, with the grid itself as search."""
    tilts = [TiltParams(a, m, l) for a in grid for m in grid for l in grid]
    vals = np.array([ov.value for ov in solver.solve(tilts)])
    low = float(np.min(vals))
    if rates is None:
        r = np.linspace(0.0, 1.0, 10)
        rates = [RatePoint(rd, rr) for rd in r for rr in r]
    search = SearchSpec(tuple(grid), tuple(grid), tuple(grid), refine_rounds=0)
    f_low = min(f_sup(solver.channel, pt, search, solver.cfg, solver).value for pt in rates)
    slack = min(low + NONNEG_TOL, f_low)
    return CheckResult("nonnegativity", _status(slack), slack, f"min Omega {low:.3g}, min F {f_low:.3g}")


def separation_points(curve, count: int, margin: float = 0.05, rd_max: float = 1.0, r_max: float = 1.5):
    """count points above the boundary and count below it, each at least `margin` away."""
    rds = np.linspace(0.0, rd_max, count)
    outside, inside = [], []
    for i, rd in enumerate(rds):
        c = curve.c_of(rd)
        hi = c + margin + (r_max - c - margin) * (i % 4 + 1) / 8
        outside.append(RatePoint(float(rd), float(hi)))
        if c - margin > 0:
            inside.append(RatePoint(float(rd), float((c - margin) * (1 - (i % 4 + 1) / 5))))
    return outside, inside


def separation_check(solver: OmegaSolver, curve, outside, inside, search: SearchSpec = SearchSpec(),
                     margin: float = 0.05) -> CheckResult:
    worst_out, worst_in = math.inf, -math.inf
    for pt in outside:
        if region_margin(curve, pt) > -margin:
            raise ValueError(f"{pt} is not outside the region by {margin}")
        worst_out = min(worst_out, f_sup(solver.channel, pt, search, solver.cfg, solver).value)
    for pt in inside:
        if region_margin(curve, pt) < margin:
            raise ValueError(f"{pt} is not inside the region by {margin}")
        worst_in = max(worst_in, f_sup(solver.channel, pt, search, solver.cfg, solver).value)
    slack = min(worst_out - OUTSIDE_MIN, INSIDE_MAX - worst_in)
    return CheckResult("separation", _status(slack), slack,
                       f"min F outside {worst_out:.3g}, max F inside {worst_in:.3g}")


def theorem_check(channel: Channel, p_s, n: int, k_size: int, m_size: int, search: SearchSpec,
                  cfg: OptConfig, solver: OmegaSolver | None = None) -> CheckResult:
    name = f"main_theorem(n={n},k={k_size},m={m_size})"
    try:
        rep = verify_main_theorem(channel, p_s, n, k_size, m_size, search, cfg, solver)
    except CodeCountExceeded as e:
        return CheckResult(name, "SKIPPED", math.nan, f"code count {e.count} exceeds {e.limit}")
    return CheckResult(name, "PASS" if rep.passed else "FAIL", rep.slack,
                       f"G={rep.g_value:.6f} F={rep.f_value:.6g} Pc*={rep.pc_star:.6g} bound={rep.pc_bound:.6g}")


def run_suite(channel: Channel, p_s, cfg: OptConfig = OptConfig(), search: SearchSpec = SearchSpec(),
              samples: int = 100, sep_points: int = 4, oracle=((1, 2, 1), (1, 2, 2)),
              omega_impl=omega_q, seed=0, literal_region: bool = True, checks=CHECKS) -> list[CheckResult]:
    """The selected property checks for one channel.

    The separation check traces the region with the S-marginal free when
    literal_region is set: F does not depend on the state distribution, so its
    positivity set is the complement of that region.
    """
    unknown = set(checks) - set(CHECKS)
    if unknown:
        raise ValueError(f"unknown checks {sorted(unknown)}; choose from {', '.join(CHECKS)}")
    out = []
    triples = sample_triples(channel, samples, seed)
    if "convexity" in checks:
        out.append(convexity_check(channel, triples, omega_impl=omega_impl))
    if "slope" in checks:
        out.append(slope_check(channel, triples, omega_impl=omega_impl))
    solver = OmegaSolver(channel, cfg, omega_impl=None if omega_impl is omega_q else omega_impl)
    if "nonnegativity" in checks:
        out.append(nonnegativity_check(solver))
    if "separation" in checks:
        curve = boundary(channel, None if literal_region else p_s, cfg=cfg)
        pts_out, pts_in = separation_points(curve, sep_points)
        out.append(separation_check(solver, curve, pts_out, pts_in, search))
    if "oracle" in checks:
        for n, k, m in oracle:
            out.append(theorem_check(channel, p_s, n, k, m, search, cfg, solver))
    return out
