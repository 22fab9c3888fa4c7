"""Strong-converse exponent F(R_d, R | W) and the tilted log-moment functional behind it.

For a joint q on U x V x S x X x Y the tilted weight is

    omega(s,x,y|u,v) = alpha ln[W / q_{Y|XSUV}]
                       + ln[q_{Y|UV} q_{S|V} / (q_{S|UV} q_{Y|V})]
                       - mu ln[q_{S|V} q_Y / (q_{Y|V} q_S)]

and Omega_q = ln E_q[exp(lambda omega)]. Expanding the conditionals,

    omega = alpha ln W - alpha ln q(uvsxy) + alpha ln q(uvsx) + ln q(uvy)
            - ln q(uvs) + (1-mu) ln q(vs) - (1-mu) ln q(vy) - mu ln q(y) + mu ln q(s),

a weighted sum of log-marginals, which is what the batched code evaluates.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .optimize import MASS_FLOOR, OptConfig, maximize_joint_batch
from .prob import Channel, _axes, _marg_any, _mass, conditional, divergence_term
from .region import RatePoint, gp_tradeoff_objective, q_sizes

log = logging.getLogger(__name__)

DEFAULT_GRID = tuple(np.logspace(-2, 2, 17))


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class TiltParams:
    alpha: float
    mu: float
    lam: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.mu > 0 and self.lam > 0):
            raise ValueError(f"alpha, mu, lambda must be positive: {self}")

    @property
    def denominator(self) -> float:
        return 1.0 + self.lam * (4.0 + self.alpha + 3.0 * self.mu)


@dataclass(frozen=True)
class ThetaParams:
    alpha: float
    mu: float
    theta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.mu > 0):
            raise ValueError("alpha and mu must be positive")
        if not 0 < self.theta < 1.0 / (2.0 + 2.0 * self.mu):
            raise ValueError(f"theta={self.theta} outside (0, 1/(2+2mu))")


def theta_to_lambda(tp: ThetaParams) -> TiltParams:
    lam = tp.theta / (1.0 - 2.0 * (1.0 + tp.mu) * tp.theta)
    return TiltParams(tp.alpha, tp.mu, lam)


def lambda_to_theta(tp: TiltParams) -> ThetaParams:
    theta = tp.lam / (1.0 + 2.0 * (1.0 + tp.mu) * tp.lam)
    return ThetaParams(tp.alpha, tp.mu, theta)


def f_via_theta(rate: RatePoint, tp: ThetaParams, omega_w_value: float) -> float:
    """Exponent in theta coordinates, with the single-letter bound on the potential.

    [theta (R - mu R_d) - Omega/(1 + 2(1+mu) lambda)] / [1 + theta (2 + alpha + mu)]
    """
    lam = theta_to_lambda(tp).lam
    potential = omega_w_value / (1.0 + 2.0 * (1.0 + tp.mu) * lam)
    return (tp.theta * (rate.r - tp.mu * rate.r_d) - potential) / (1.0 + tp.theta * (2.0 + tp.alpha + tp.mu))


def _terms(alpha, mu):
    alpha, mu = np.asarray(alpha, float), np.asarray(mu, float)
    return (("UVSXY", -alpha), ("UVSX", alpha), ("UVY", 1.0), ("UVS", -1.0),
            ("VS", 1.0 - mu), ("VY", mu - 1.0), ("Y", -mu), ("S", mu))


def _bcast(c, ndim_lead):
    c = np.asarray(c, float)
    return c.reshape(c.shape + (1,) * 5) if c.ndim else c


def _log_w(channel: Channel) -> np.ndarray:
    w = channel.w
    with np.errstate(divide="ignore"):
        return np.log(w)


def _marginals(m: np.ndarray) -> dict[str, np.ndarray]:
    """The keepdims marginals omega needs, each summed from a smaller parent."""
    out = {"UVSXY": m}
    out["UVSX"] = m.sum(axis=-1, keepdims=True)
    out["UVS"] = out["UVSX"].sum(axis=-2, keepdims=True)
    out["VS"] = out["UVS"].sum(axis=-5, keepdims=True)
    out["S"] = out["VS"].sum(axis=-4, keepdims=True)
    uvsy = m.sum(axis=-2, keepdims=True)
    out["UVY"] = uvsy.sum(axis=-3, keepdims=True)
    out["VY"] = out["UVY"].sum(axis=-5, keepdims=True)
    out["Y"] = out["VY"].sum(axis=-4, keepdims=True)
    return out


def omega_table(q, channel: Channel, alpha, mu) -> np.ndarray:
    """omega at every cell; alpha and mu may carry the leading batch axes of q."""
    m = _mass(q)
    lead = m.ndim - 5
    marg = _marginals(m)
    out = _bcast(alpha, lead) * _log_w(channel)
    with np.errstate(divide="ignore", invalid="ignore"):
        for axes, coef in _terms(alpha, mu):
            out = out + _bcast(coef, lead) * np.log(marg[axes])
    return out


class _FlatKernel:
    """omega, Omega_q and its gradient on flattened, strictly positive joints.

    Every marginal is a linear map of the cell masses, so all of them come from
    one product with a 0/1 incidence matrix, and the weighted log-marginals go
    back to the cells through its transpose.
    """

    def __init__(self, shape, channel: Channel):
        self.shape = tuple(shape)
        cells = int(np.prod(self.shape))
        idx = np.indices(self.shape).reshape(5, -1)
        blocks, self.term_of_col = [], []
        for t, (axes, _) in enumerate(_terms(0.0, 0.0)[1:]):
            keep = _axes(axes)
            sizes = [self.shape[a] for a in keep]
            col = np.ravel_multi_index(tuple(idx[a] for a in keep), sizes) if keep else np.zeros(cells, int)
            b = np.zeros((cells, int(np.prod(sizes))))
            b[np.arange(cells), col] = 1.0
            blocks.append(b)
            self.term_of_col += [t] * b.shape[1]
        self.inc = np.hstack(blocks)
        self.inc_t = np.ascontiguousarray(self.inc.T)
        self.term_of_col = np.array(self.term_of_col)
        with np.errstate(divide="ignore"):
            self.log_w = np.broadcast_to(np.log(channel.w), self.shape).reshape(-1)

    def _coefs(self, alpha, mu):
        # per-row coefficients of the non-cell log-marginals, one column per marginal entry
        c = np.stack([np.broadcast_to(np.asarray(c, float), np.shape(alpha))
                      for _, c in _terms(alpha, mu)[1:]], axis=-1)
        return c[:, self.term_of_col]

    def log_terms(self, m, alpha, mu, lam):
        """(z, coefs, marginals) with z = ln m + lambda omega."""
        mk = m @ self.inc
        coefs = self._coefs(alpha, mu)
        lm = np.log(m)
        om = alpha[:, None] * (self.log_w - lm) + (coefs * np.log(np.maximum(mk, 1e-300))) @ self.inc_t
        return lm + lam[:, None] * om, coefs, mk

    @staticmethod
    def _lse(z):
        top = z.max(axis=1, keepdims=True)
        return top, np.log(np.exp(z - top).sum(axis=1, keepdims=True)) + top

    def value(self, m, alpha, mu, lam):
        z, _, _ = self.log_terms(m, alpha, mu, lam)
        return self._lse(z)[1][:, 0]

    def grad(self, m, alpha, mu, lam):
        z, coefs, mk = self.log_terms(m, alpha, mu, lam)
        tilt = np.exp(z - self._lse(z)[1])
        tk = tilt @ self.inc
        g = (1.0 - lam * alpha)[:, None] * tilt / m
        return g + lam[:, None] * ((coefs * tk / np.maximum(mk, 1e-300)) @ self.inc_t)


def omega_weight(q, channel: Channel, alpha: float, mu: float, cell) -> float:
    """omega at one cell (u, v, s, x, y), built from the conditionals themselves."""
    m = _mass(q)
    u, v, s, x, y = cell

    def cond(target, given):
        c = conditional(m, target, given)
        idx = tuple(i if a in c.target + c.given else 0 for a, i in enumerate(cell))
        if not c.defined[idx]:
            raise DomainError(f"q_{{{target}|{given}}} undefined at cell {tuple(cell)}")
        return float(c.table[idx])

    w = channel.w[s, x, y]
    y_xsuv = cond("Y", "UVSX")
    y_uv, s_v, s_uv, y_v = cond("Y", "UV"), cond("S", "V"), cond("S", "UV"), cond("Y", "V")
    p_y = float(m.sum(axis=(0, 1, 2, 3))[y])
    p_s = float(m.sum(axis=(0, 1, 3, 4))[s])
    with np.errstate(divide="ignore"):
        t1 = alpha * (np.log(w) - np.log(y_xsuv))
        t2 = np.log(y_uv) + np.log(s_v) - np.log(s_uv) - np.log(y_v)
        t3 = -mu * (np.log(s_v) + np.log(p_y) - np.log(y_v) - np.log(p_s))
    return float(t1 + t2 + t3)


def _log_lambda_terms(m, channel, alpha, mu, lam):
    lead = m.ndim - 5
    om = omega_table(m, channel, alpha, mu)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(m > 0, np.log(m) + _bcast(lam, lead) * om, -np.inf)
    return z, om


def omega_q(q, channel: Channel, alpha, mu, lam):
    """Omega_q = ln sum_a q(a) exp(lambda omega(a)); +inf signals saturation."""
    m = _mass(q)
    z, _ = _log_lambda_terms(m, channel, alpha, mu, lam)
    if np.any(np.isposinf(z) | np.isnan(z)):
        z = np.where(np.isnan(z), np.inf, z)
    val = logsumexp(z, axis=(-5, -4, -3, -2, -1))
    return float(val) if np.ndim(val) == 0 else val


def omega_q_grad(q, channel: Channel, alpha, mu, lam) -> np.ndarray:
    """d Omega_q / d q(b) = t(b)/q(b) + lambda sum_K d_K T_K(b_K)/q_K(b_K), t the tilted law."""
    m = _mass(q)
    lead = m.ndim - 5
    z, _ = _log_lambda_terms(m, channel, alpha, mu, lam)
    big = logsumexp(z, axis=(-5, -4, -3, -2, -1), keepdims=True)
    tilt = np.exp(z - big)
    lam_b = _bcast(lam, lead)
    mm, tm = _marginals(m), _marginals(tilt)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(m > 0, tilt / m, 0.0)
        for axes, coef in _terms(alpha, mu):
            mk, tk = mm[axes], tm[axes]
            g = g + lam_b * _bcast(coef, lead) * np.where(mk > 0, tk / mk, 0.0)
    return g


def omega_slope_at_zero(q, channel: Channel, alpha: float, mu: float) -> float:
    """lim Omega_q/lambda as lambda -> 0: -alpha D(q_{Y|XSUV}||W|q_{XSUV}) + tradeoff(q, mu)."""
    d = divergence_term(q, channel)
    if math.isinf(d):
        return -math.inf
    return -alpha * d + gp_tradeoff_objective(q, mu)


def slope_by_expectation(q, channel: Channel, alpha: float, mu: float) -> float:
    """E_q[omega], the derivative of Omega_q at lambda = 0."""
    m = _mass(q)
    om = omega_table(m, channel, alpha, mu)
    pos = m > 0
    return float(np.sum(m[pos] * om[pos]))


def f_of(rate: RatePoint, tp: TiltParams, omega_w_value: float) -> float:
    """F^{alpha,mu,lambda} = [lambda (R - mu R_d) - Omega] / [1 + lambda (4 + alpha + 3 mu)]."""
    if math.isinf(omega_w_value) and omega_w_value > 0:
        return -math.inf
    return (tp.lam * (rate.r - tp.mu * rate.r_d) - omega_w_value) / tp.denominator


@dataclass
class OmegaValue:
    tilt: TiltParams
    value: float
    saturated: bool
    argmax: np.ndarray | None = None


def analytically_saturated(channel: Channel, tp: TiltParams) -> bool:
    """Triples where Omega(W) = +inf by an explicit diverging family of q.

    lambda alpha > 1 with |Y| >= 2: U, V degenerate and q_{Y|XS}(y) = eps at a
    y with W(y|x,s) > 0; the cell contributes eps^(1 - lambda alpha) W^(lambda alpha).

    lambda > 1 (or lambda mu > 1) with |S| >= 2: V (or U) degenerate, q = W
    given (s, x), and an auxiliary value of mass eps under which some state
    has conditional mass delta; omega carries -ln q_{S|U}(s|u) (or
    -mu ln q_{S|V}(s|v)), so that cell contributes eps delta^(1 - lambda)
    (or eps delta^(1 - lambda mu)).
    """
    if channel.y_size >= 2 and tp.lam * tp.alpha > 1.0:
        return True
    return channel.s_size >= 2 and max(tp.lam, tp.lam * tp.mu) > 1.0


def _seed_for(base: int, tp: TiltParams) -> tuple[int, int]:
    key = np.array([tp.alpha, tp.mu, tp.lam], dtype=np.float64).tobytes()
    return (base, int.from_bytes(key, "little"))


class OmegaSolver:
    """Omega^{alpha,mu,lambda}(W) = max over q of Omega_q, memoized per tilt triple.

    Every triple gets its own deterministic seed derived from the base seed and
    the triple itself, so values do not depend on which batch computed them.
    """

    def __init__(self, channel: Channel, cfg: OptConfig = OptConfig(), sizes=None,
                 omega_impl=None, max_cells: int = 3_000_000):
        self.channel = channel
        self.cfg = cfg
        u, v = sizes or q_sizes(channel)
        self.shape = (u, v) + channel.w.shape
        self.cache: dict[TiltParams, OmegaValue] = {}
        self.max_cells = max_cells
        self.omega_impl = omega_impl

    def zero_point(self) -> np.ndarray:
        """Channel-consistent joint with U, V independent of (S, X): omega == 0 there."""
        u, v, s, x, _ = self.shape
        return np.full((u, v, s, x), 1.0 / (u * v * s * x))[..., None] * self.channel.w

    def get(self, tp: TiltParams) -> OmegaValue:
        return self.solve([tp])[0]

    def solve(self, tilts) -> list[OmegaValue]:
        tilts = [t if isinstance(t, TiltParams) else TiltParams(*t) for t in tilts]
        todo = []
        for tp in dict.fromkeys(tilts):
            if tp in self.cache:
                continue
            if analytically_saturated(self.channel, tp):
                self.cache[tp] = OmegaValue(tp, math.inf, True)
            else:
                todo.append(tp)
        rows_per = self.cfg.n_starts + 1
        per_chunk = max(1, self.max_cells // (rows_per * int(np.prod(self.shape))))
        for i in range(0, len(todo), per_chunk):
            self._run(todo[i:i + per_chunk])
        return [self.cache[tp] for tp in tilts]

    def _run(self, tilts: list[TiltParams]):
        a = np.array([t.alpha for t in tilts])
        mu = np.array([t.mu for t in tilts])
        lam = np.array([t.lam for t in tilts])
        ch = self.channel
        kern = _FlatKernel(self.shape, ch)

        def flat(q):
            return q.reshape(q.shape[0], -1)

        def objective(q, rows):
            if self.omega_impl is not None:
                return self.omega_impl(q, ch, a[rows], mu[rows], lam[rows])
            return kern.value(flat(q), a[rows], mu[rows], lam[rows])

        def gradient(q, rows):
            return kern.grad(flat(q), a[rows], mu[rows], lam[rows]).reshape(q.shape)

        zero = self.zero_point()
        results = maximize_joint_batch(objective, self.shape, None, self.cfg, len(tilts), gradient=gradient,
                                       seeds=[_seed_for(self.cfg.seed, t) for t in tilts], initial=[zero])
        for tp, res in zip(tilts, results):
            sat = _floor_dominated(res.argmax, ch, tp)
            value = math.inf if sat else res.value
            if sat:
                log.info("Omega saturates at %s (mass pushed to the floor)", tp)
            self.cache[tp] = OmegaValue(tp, value, sat, res.argmax)


def _floor_dominated(q, channel: Channel, tp: TiltParams, share: float = 1e-3) -> bool:
    """True when cells sitting at the mass floor carry a visible share of Lambda.

    That only happens when the ascent is chasing a direction along which omega
    diverges faster than the mass vanishes.
    """
    z, _ = _log_lambda_terms(q, channel, tp.alpha, tp.mu, tp.lam)
    tilt = np.exp(z - logsumexp(z))
    tiny = q < 1e3 * MASS_FLOOR
    return bool(np.sum(tilt[tiny]) > share)


def omega_w(channel: Channel, tp: TiltParams, cfg: OptConfig = OptConfig()) -> float:
    return OmegaSolver(channel, cfg).get(tp).value


@dataclass(frozen=True)
class SearchSpec:
    alphas: tuple = DEFAULT_GRID
    mus: tuple = DEFAULT_GRID
    lams: tuple = DEFAULT_GRID
    refine_rounds: int = 2
    refine_points: int = 5

    def __post_init__(self):
        if not (len(self.alphas) and len(self.mus) and len(self.lams)):
            raise ValueError("search grids must be nonempty")
        if self.refine_points < 1 or self.refine_points % 2 == 0:
            raise ValueError("refine_points must be a positive odd integer")

    @classmethod
    def logspace(cls, points: int = 17, lo: float = 1e-2, hi: float = 1e2, **kw) -> "SearchSpec":
        g = tuple(np.logspace(np.log10(lo), np.log10(hi), points))
        return cls(g, g, g, **kw)

    def base(self) -> list[TiltParams]:
        return [TiltParams(a, m, l) for a in self.alphas for m in self.mus for l in self.lams]

    def local(self, center: TiltParams, round_: int) -> list[TiltParams]:
        half = self.refine_points // 2
        out = []
        axes = []
        for grid, c in ((self.alphas, center.alpha), (self.mus, center.mu), (self.lams, center.lam)):
            ratio = _log_step(grid) / 2 ** round_
            axes.append([c * math.exp(k * ratio) for k in range(-half, half + 1)])
        for a in axes[0]:
            for m in axes[1]:
                for l in axes[2]:
                    out.append(TiltParams(a, m, l))
        return out


def _log_step(grid) -> float:
    g = np.log(np.asarray(grid, float))
    return float(np.median(np.diff(np.sort(g)))) if g.size > 1 else math.log(10) / 4


@dataclass
class ExponentSurface:
    rate: RatePoint
    entries: list = field(default_factory=list)  # (TiltParams, omega_w, f_value)

    def recheck(self) -> float:
        """Largest gap between a stored F and its recomputation from Omega."""
        gaps = [abs(f - f_of(self.rate, tp, om)) for tp, om, f in self.entries if math.isfinite(f)]
        return max(gaps, default=0.0)


@dataclass
class ExponentResult:
    value: float
    tilt: TiltParams | None
    raw: float
    clamped: bool
    surface: ExponentSurface


def f_sup(channel: Channel, rate: RatePoint, search: SearchSpec = SearchSpec(), cfg: OptConfig = OptConfig(),
          solver: OmegaSolver | None = None) -> ExponentResult:
    """sup over (alpha, mu, lambda) of F^{alpha,mu,lambda}(R_d, R | W) on the search grid.

    Base log-grid, then `refine_rounds` local sub-grids around the incumbent.
    The result is clamped at 0, the lambda -> 0 limit of every F^{alpha,mu,lambda}.
    """
    solver = solver or OmegaSolver(channel, cfg)
    surface = ExponentSurface(rate)
    seen = set()
    best = (-math.inf, None)

    def evaluate(tilts):
        nonlocal best
        fresh = [t for t in tilts if t not in seen]
        for ov in solver.solve(fresh):
            seen.add(ov.tilt)
            f = f_of(rate, ov.tilt, ov.value)
            surface.entries.append((ov.tilt, ov.value, f))
            if f > best[0]:
                best = (f, ov.tilt)

    evaluate(search.base())
    for r in range(1, search.refine_rounds + 1):
        if best[1] is None:
            break
        evaluate(search.local(best[1], r))
    raw, tilt = best
    clamped = not raw >= 0
    if clamped:
        log.info("F clamped to 0 at rate %s (grid sup %.3g)", rate, raw)
    return ExponentResult(max(raw, 0.0), tilt, raw, clamped, surface)


def pc_bound_from_f(f: float, n: int) -> float:
    return min(1.0, 5.0 * math.exp(-n * f))


def pc_upper_bound(channel: Channel, rate: RatePoint, n: int, search: SearchSpec = SearchSpec(),
                   cfg: OptConfig = OptConfig(), solver: OmegaSolver | None = None) -> float:
    """min(1, 5 exp(-n F(R_d, R | W))): bound on the correct-decoding probability at blocklength n."""
    if n < 1:
        raise ValueError("blocklength must be >= 1")
    return pc_bound_from_f(f_sup(channel, rate, search, cfg, solver).value, n)
