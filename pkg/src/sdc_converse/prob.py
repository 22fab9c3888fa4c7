"""Finite-alphabet probability arithmetic over joints on U x V x S x X x Y.

All routines act on the trailing five axes of a mass array, so a stack of
joints with leading batch axes is handled the same way as a single joint.
Logarithms are natural throughout.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

AXES = "UVSXY"
SUM_TOL = 1e-12


def _axes(spec) -> tuple[int, ...]:
    """Normalize an axis subset ("SY", ["S", "Y"], (2, 4)) to sorted ints."""
    if isinstance(spec, str):
        spec = list(spec)
    out = set()
    for a in spec:
        if isinstance(a, str):
            if a not in AXES:
                raise ValueError(f"unknown axis {a!r}; expected one of {AXES}")
            out.add(AXES.index(a))
        else:
            if not 0 <= int(a) < 5:
                raise ValueError(f"axis index {a} out of range")
            out.add(int(a))
    return tuple(sorted(out))


def as_dist(probs, tol: float = SUM_TOL, name: str = "distribution") -> np.ndarray:
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError(f"{name} must be a nonempty 1-d array")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError(f"{name} has negative or non-finite entries")
    if abs(p.sum() - 1.0) > tol:
        raise ValueError(f"{name} sums to {p.sum():.15g}, not 1")
    return p


@dataclass(frozen=True)
class Channel:
    """Stochastic matrix w[s, x, y] = W(y | x, s)."""

    w: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=float)
        if w.ndim != 3 or 0 in w.shape:
            raise ValueError("channel matrix must have shape (|S|, |X|, |Y|)")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("channel has negative or non-finite entries")
        sums = w.sum(axis=-1)
        bad = np.argwhere(np.abs(sums - 1.0) > 1e-9)
        if bad.size:
            s, x = bad[0]
            raise ValueError(f"channel row w[{s}][{x}] sums to {sums[s, x]:.12g}")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def s_size(self) -> int:
        return self.w.shape[0]

    @property
    def x_size(self) -> int:
        return self.w.shape[1]

    @property
    def y_size(self) -> int:
        return self.w.shape[2]

    @classmethod
    def state_independent(cls, w_yx, s_size: int = 1) -> "Channel":
        w_yx = np.asarray(w_yx, dtype=float)
        return cls(np.broadcast_to(w_yx, (s_size,) + w_yx.shape))


@dataclass(frozen=True)
class Joint5:
    """Joint pmf on U x V x S x X x Y."""

    mass: np.ndarray

    def __post_init__(self):
        m = np.array(self.mass, dtype=float)
        if m.ndim != 5:
            raise ValueError("joint mass must be 5-dimensional (U, V, S, X, Y)")
        if np.any(m < 0) or not np.all(np.isfinite(m)):
            raise ValueError("joint mass has negative or non-finite entries")
        if abs(m.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"joint mass sums to {m.sum():.15g}, not 1")
        m.setflags(write=False)
        object.__setattr__(self, "mass", m)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.mass.shape

    @classmethod
    def normalized(cls, mass) -> "Joint5":
        """Build from unnormalized nonnegative mass (explicit renormalization)."""
        m = np.asarray(mass, dtype=float)
        return cls(m / m.sum())

    @classmethod
    def from_parts(cls, q_uvsx, channel: Channel) -> "Joint5":
        return cls(extend(q_uvsx, channel))


def _mass(joint) -> np.ndarray:
    return joint.mass if isinstance(joint, Joint5) else np.asarray(joint, dtype=float)


def extend(q_uvsx, channel: Channel) -> np.ndarray:
    """q(u,v,s,x) W(y|x,s): the Markov extension (U,V) - (S,X) - Y."""
    q_uvsx = np.asarray(q_uvsx, dtype=float)
    return q_uvsx[..., None] * channel.w


def marginal(joint, keep, keepdims: bool = False) -> np.ndarray:
    """Sum the mass over every axis not in `keep`.

    With keepdims=True the dropped axes stay as singletons so the result
    broadcasts against the full joint.
    """
    keep = _axes(keep)
    if not keep:
        raise ValueError("keep must name at least one axis")
    m = _mass(joint)
    drop = tuple(a - 5 for a in range(5) if a not in keep)
    if not drop:
        return m
    return m.sum(axis=drop, keepdims=keepdims)


def _marg_any(m: np.ndarray, keep: tuple[int, ...]) -> np.ndarray:
    # keepdims marginal that also accepts the empty subset (total mass)
    drop = tuple(a - 5 for a in range(5) if a not in keep)
    return m.sum(axis=drop, keepdims=True) if drop else m


@dataclass(frozen=True)
class Conditional:
    """Conditional table over the axes target | given.

    `table` has singleton axes for everything outside target and given, so it
    broadcasts against the joint; rows whose conditioning event has zero mass
    are NaN and flagged False in `defined`.
    """

    table: np.ndarray
    defined: np.ndarray
    target: tuple[int, ...]
    given: tuple[int, ...]


def conditional(joint, target, given) -> Conditional:
    t, g = _axes(target), _axes(given)
    if not t:
        raise ValueError("target must name at least one axis")
    if set(t) & set(g):
        raise ValueError("target and given axes overlap")
    m = _mass(joint)
    num = _marg_any(m, tuple(sorted(t + g)))
    den = _marg_any(m, g)
    defined = den > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        table = np.where(defined, num / np.where(defined, den, 1.0), np.nan)
    return Conditional(table, np.broadcast_to(defined, table.shape), t, g)


def entropy(joint, axes) -> np.ndarray:
    """H of the marginal on `axes` (0 for the empty set)."""
    ax = _axes(axes)
    if not ax:
        return np.zeros(_mass(joint).shape[:-5])
    m = _marg_any(_mass(joint), ax)
    return -xlogy(m, m).sum(axis=(-5, -4, -3, -2, -1))


def mutual_info(joint, a, b, c="") -> np.ndarray | float:
    """I(A; B | C) in nats, clamped at zero."""
    A, B, C = _axes(a), _axes(b), _axes(c)
    if not A or not B:
        raise ValueError("a and b must be nonempty")
    if set(A) & set(B) or set(A) & set(C) or set(B) & set(C):
        raise ValueError("axis sets must be pairwise disjoint")
    val = (entropy(joint, A + C) + entropy(joint, B + C)
           - entropy(joint, A + B + C) - entropy(joint, C))
    val = np.maximum(val, 0.0)
    return float(val) if np.ndim(val) == 0 else val


def kl_cond(q_cond, channel: Channel, weights) -> float:
    """D(q_{Y|XSUV} || W | q_{XSUV}).

    q_cond has shape (U, V, S, X, Y), weights has shape (U, V, S, X).
    """
    q_cond = np.asarray(q_cond, dtype=float)
    weights = np.asarray(weights, dtype=float)
    w = channel.w
    if q_cond.shape[-3:] != w.shape or q_cond.shape[:-1] != weights.shape:
        raise ValueError("shape mismatch between q_cond, channel and weights")
    live = (weights > 0)[..., None] & (q_cond > 0)
    if np.any(live & (w == 0)):
        return float("inf")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(live, q_cond * np.log(np.where(live, q_cond / w, 1.0)), 0.0)
    return float(max((weights * terms.sum(axis=-1)).sum(), 0.0))


def divergence_term(joint, channel: Channel) -> float:
    """D(q_{Y|XSUV} || W | q_{XSUV}) read directly off a joint."""
    m = _mass(joint)
    cond = conditional(m, "Y", "UVSX")
    weights = marginal(m, "UVSX")
    return kl_cond(np.nan_to_num(cond.table), channel, weights)


def product_joint(q_u, q_v, q_s, q_x, channel: Channel) -> np.ndarray:
    """q_U q_V q_S q_X W: every auxiliary independent, Y driven by W."""
    q_uvsx = np.einsum("u,v,s,x->uvsx", q_u, q_v, q_s, q_x)
    return extend(q_uvsx, channel)


def random_joint(shape, rng: np.random.Generator, concentration: float = 1.0) -> np.ndarray:
    m = rng.dirichlet(np.full(int(np.prod(shape)), concentration))
    return m.reshape(shape)


def _safe_log(m: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.where(m > 0, np.log(np.where(m > 0, m, 1.0)), 0.0)


def entropy_combination(mass: np.ndarray, terms) -> np.ndarray:
    """sum_k c_k H(marginal on axes_k) for a stack of joints.

    terms is a sequence of (axes, coefficient); coefficients may be arrays
    over the leading batch axis.
    """
    total = 0.0
    for axes, coef in terms:
        total = total + np.asarray(coef) * entropy(mass, axes)
    return total


def entropy_combination_grad(mass: np.ndarray, terms) -> np.ndarray:
    """Gradient of entropy_combination with respect to every joint cell."""
    g = np.zeros_like(mass)
    lead = mass.shape[:-5]
    for axes, coef in terms:
        m = _marg_any(mass, _axes(axes))
        c = np.asarray(coef, float).reshape(np.shape(coef) + (1,) * 5) if np.ndim(coef) else coef
        g = g - c * (_safe_log(m) + 1.0)
    return np.broadcast_to(g, lead + mass.shape[-5:])
