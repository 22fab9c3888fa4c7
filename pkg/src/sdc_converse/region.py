"""Capacity region of the state-dependent channel with rate-limited decoder state information.

The region is carried by its support function mu -> C^mu(W): a rate pair
(R_d, R) is achievable iff R - mu R_d <= C^mu(W) for every mu > 0.

Two readings of the auxiliary-distribution set are supported. By default the
S-marginal is pinned to the physical state distribution p_S; passing
p_S=None lifts that constraint (the literal reading, in which S is free).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .optimize import Constraints, OptConfig, OptResult, maximize_joint, maximize_joint_batch
from .prob import Channel, as_dist, entropy_combination, entropy_combination_grad, mutual_info

log = logging.getLogger(__name__)

MEMBERSHIP_TOL = 1e-6
DEFAULT_MU_GRID = tuple(np.logspace(-2, 2, 41))


@dataclass(frozen=True)
class RatePoint:
    r_d: float
    r: float

    def __post_init__(self):
        if not (self.r_d >= 0 and self.r >= 0):
            raise ValueError(f"rates must be nonnegative, got ({self.r_d}, {self.r})")


@dataclass(frozen=True)
class SupportCurve:
    mus: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        mus = np.asarray(self.mus, float)
        if mus.size == 0 or np.any(np.diff(mus) <= 0) or np.any(mus <= 0):
            raise ValueError("mu values must be positive and strictly increasing")
        object.__setattr__(self, "mus", mus)
        object.__setattr__(self, "values", np.asarray(self.values, float))

    @property
    def entries(self) -> list[tuple[float, float]]:
        return list(zip(self.mus.tolist(), self.values.tolist()))

    def c_of(self, r_d):
        """Upper boundary C(R_d | W) = min_mu [mu R_d + C^mu(W)]."""
        r_d = np.asarray(r_d, float)
        out = np.min(self.mus * r_d[..., None] + self.values, axis=-1)
        return float(out) if out.ndim == 0 else out


# (axes, coefficient-of-mu, constant) for
# I(U;Y|V) - I(U;S|V) - mu [I(V;S) - I(V;Y)]
#   = H(UVS) - H(UVY) + (mu-1) H(VS) + (1-mu) H(VY) - mu H(S) + mu H(Y)
_TRADEOFF = (("UVS", 0.0, 1.0), ("UVY", 0.0, -1.0), ("VS", 1.0, -1.0),
             ("VY", -1.0, 1.0), ("S", -1.0, 0.0), ("Y", 1.0, 0.0))


def _tradeoff_terms(mu):
    return [(axes, a * np.asarray(mu) + b) for axes, a, b in _TRADEOFF]


def gp_tradeoff_objective(p, mu: float) -> float:
    """I_p(U;Y|V) - I_p(U;S|V) - mu [I_p(V;S) - I_p(V;Y)] in nats."""
    return (mutual_info(p, "U", "Y", "V") - mutual_info(p, "U", "S", "V")
            - mu * (mutual_info(p, "V", "S") - mutual_info(p, "V", "Y")))


def psh_sizes(channel: Channel) -> tuple[int, int]:
    """(|U|, |V|) for the hyperplane-form maximization."""
    s, x, y = channel.w.shape
    v = min(s * x, s + y - 1)
    return min(v * s * x, s + y - 1), v


def q_sizes(channel: Channel) -> tuple[int, int]:
    """(|U|, |V|) for the unconstrained auxiliary set, both |S| + |Y| - 1."""
    n = channel.s_size + channel.y_size - 1
    return n, n


def _s_constraint(channel: Channel, p_s):
    if p_s is None:
        return None
    p_s = as_dist(p_s, tol=1e-9, name="state distribution")
    if p_s.size != channel.s_size:
        raise ValueError("state distribution size does not match the channel")
    return p_s


def c_mu_results(channel: Channel, p_s, mus, cfg: OptConfig = OptConfig()) -> list[OptResult]:
    """Maximizers of the tradeoff objective over joints q(u,v,s,x) W, one per mu."""
    mus = np.asarray(mus, float)
    if np.any(mus <= 0):
        raise ValueError("mu must be positive")
    u, v = psh_sizes(channel)
    shape = (u, v) + channel.w.shape
    cons = Constraints(s_marginal=_s_constraint(channel, p_s), kernel=channel)

    def objective(q, rows):
        return entropy_combination(q, _tradeoff_terms(mus[rows]))

    def gradient(q, rows):
        return entropy_combination_grad(q, _tradeoff_terms(mus[rows]))

    return maximize_joint_batch(objective, shape, cons, cfg, len(mus), gradient=gradient,
                                seeds=[(cfg.seed, i) for i in range(len(mus))])


def c_mu(channel: Channel, p_s, mu: float, cfg: OptConfig = OptConfig()) -> float:
    """Support function C^mu(W); p_s=None drops the S-marginal constraint."""
    return c_mu_results(channel, p_s, [mu], cfg)[0].value


def _tilde_terms(alpha, mu):
    # -alpha D(q_{Y|XSUV}||W|q_{XSUV}) = alpha [H(UVSXY) - H(UVSX)] + alpha E_q[ln W]
    return _tradeoff_terms(mu) + [("UVSXY", alpha), ("UVSX", -np.asarray(alpha))]


def c_tilde_results(channel: Channel, params, cfg: OptConfig = OptConfig(), p_s=None,
                    initial=None) -> list[OptResult]:
    """Maximizers of the relaxed objective for each (alpha, mu) in params.

    Unless `initial` is given, each problem also starts from the maximizer of
    the unrelaxed objective at its mu: for large alpha the penalty is stiff and
    ascent from interior starts crawls toward the channel-consistent optimum.
    """
    params = np.asarray(params, float).reshape(-1, 2)
    if np.any(params <= 0):
        raise ValueError("alpha and mu must be positive")
    alpha, mus = params[:, 0], params[:, 1]
    u, v = q_sizes(channel)
    shape = (u, v) + channel.w.shape
    if initial is None:
        uniq, inv = np.unique(mus, return_inverse=True)
        warm = []
        for r in c_mu_results(channel, p_s, uniq, cfg):
            q = np.zeros(shape)
            q[:r.argmax.shape[0], :r.argmax.shape[1]] = r.argmax
            warm.append(q)
        initial = lambda p: [warm[inv[p]]]  # noqa: E731
    support = np.broadcast_to(channel.w > 0, shape)
    cons = Constraints(s_marginal=_s_constraint(channel, p_s), support=support)
    with np.errstate(divide="ignore"):
        log_w = np.where(channel.w > 0, np.log(np.where(channel.w > 0, channel.w, 1.0)), 0.0)

    def objective(q, rows):
        a = alpha[rows]
        lin = (q * log_w).sum(axis=(-5, -4, -3, -2, -1))
        return entropy_combination(q, _tilde_terms(a, mus[rows])) + a * lin

    def gradient(q, rows):
        a = alpha[rows].reshape(-1, 1, 1, 1, 1, 1)
        return entropy_combination_grad(q, _tilde_terms(alpha[rows], mus[rows])) + a * log_w

    return maximize_joint_batch(objective, shape, cons, cfg, len(params), gradient=gradient,
                                seeds=[(cfg.seed, i) for i in range(len(params))], initial=initial)


def c_tilde(channel: Channel, alpha: float, mu: float, cfg: OptConfig = OptConfig(), p_s=None) -> float:
    """Relaxed support function: channel mismatch allowed at price alpha D(q_{Y|XSUV} || W)."""
    return c_tilde_results(channel, [(alpha, mu)], cfg, p_s=p_s)[0].value


def boundary(channel: Channel, p_s, mu_grid=DEFAULT_MU_GRID, cfg: OptConfig = OptConfig()) -> SupportCurve:
    mus = np.asarray(mu_grid, float)
    if mus.size == 0:
        raise ValueError("mu grid must be nonempty")
    res = c_mu_results(channel, p_s, mus, cfg)
    return SupportCurve(mus, np.array([r.value for r in res]))


def membership(curve: SupportCurve, pt: RatePoint, tol: float = MEMBERSHIP_TOL) -> str:
    """'inside', 'outside' or 'boundary' relative to every supporting line of the curve."""
    slack = curve.mus * pt.r_d + curve.values - pt.r
    if np.all(slack > tol):
        return "inside"
    if np.any(slack < -tol):
        return "outside"
    return "boundary"


def region_margin(curve: SupportCurve, pt: RatePoint) -> float:
    """Signed vertical distance C(R_d) - R; positive inside."""
    return curve.c_of(pt.r_d) - pt.r


# I(U;Y) - I(U;S) = H(Y) - H(UY) - H(S) + H(US)
_GP_TERMS = (("Y", 1.0), ("UY", -1.0), ("S", -1.0), ("US", 1.0))


def gp_capacity_result(channel: Channel, p_s, cfg: OptConfig = OptConfig()) -> OptResult:
    p_s = _s_constraint(channel, p_s)
    if p_s is None:
        raise ValueError("the Gel'fand-Pinsker capacity needs the state distribution")
    shape = (channel.s_size * channel.x_size + 1, 1) + channel.w.shape
    cons = Constraints(s_marginal=p_s, kernel=channel)
    return maximize_joint(lambda q: entropy_combination(q, _GP_TERMS), shape, cons, cfg,
                          gradient=lambda q: entropy_combination_grad(q, _GP_TERMS))


def gp_capacity(channel: Channel, p_s, cfg: OptConfig = OptConfig()) -> float:
    """max over p_{UX|S} of I(U;Y) - I(U;S), with |U| = |S||X| + 1."""
    return gp_capacity_result(channel, p_s, cfg).value
