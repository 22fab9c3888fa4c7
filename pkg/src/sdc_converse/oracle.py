"""Exhaustive small-blocklength codes: exact correct-decoding probabilities and G^(n).

Sequences of length n over an alphabet of size a are indexed by the integer
whose base-a digits are the symbols, first symbol most significant; this is
also the lexicographic order of the sequences.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .exponent import ExponentResult, OmegaSolver, SearchSpec, f_sup, pc_bound_from_f
from .optimize import OptConfig
from .prob import Channel, as_dist
from .region import RatePoint

CODE_LIMIT = 10**9
SLACK_TOL = 1e-9
TIE_TOL = 1e-12


class CodeCountExceeded(RuntimeError):
    def __init__(self, count: int, limit: int = CODE_LIMIT):
        super().__init__(f"exhaustive search over {count} codes exceeds the limit of {limit}")
        self.count = count
        self.limit = limit


@dataclass(frozen=True, eq=False)
class Code:
    """Deterministic (state encoder, channel encoder, decoder) tables.

    state_enc[s^n] -> m, chan_enc[k, s^n] -> x^n, decoder[y^n, m] -> k,
    all sequences given by their integer index.
    """

    n: int
    k_size: int
    m_size: int
    state_enc: np.ndarray
    chan_enc: np.ndarray
    decoder: np.ndarray

    def __post_init__(self):
        for name in ("state_enc", "chan_enc", "decoder"):
            arr = np.array(getattr(self, name), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.n < 1 or self.k_size < 1 or self.m_size < 1:
            raise ValueError("n, k_size and m_size must be positive")
        if self.state_enc.ndim != 1 or self.chan_enc.ndim != 2 or self.decoder.ndim != 2:
            raise ValueError("code tables have the wrong number of dimensions")
        if self.chan_enc.shape != (self.k_size, self.state_enc.size):
            raise ValueError("chan_enc must have shape (k_size, |S|^n)")
        if self.decoder.shape[1] != self.m_size:
            raise ValueError("decoder must have shape (|Y|^n, m_size)")
        if np.any(self.state_enc < 0) or np.any(self.state_enc >= self.m_size):
            raise ValueError("state_enc entries must lie in [0, m_size)")
        if np.any(self.decoder < 0) or np.any(self.decoder >= self.k_size):
            raise ValueError("decoder entries must lie in [0, k_size)")
        if np.any(self.chan_enc < 0):
            raise ValueError("chan_enc entries must be nonnegative")

    def __eq__(self, other):
        if not isinstance(other, Code):
            return NotImplemented
        return ((self.n, self.k_size, self.m_size) == (other.n, other.k_size, other.m_size)
                and all(np.array_equal(getattr(self, t), getattr(other, t))
                        for t in ("state_enc", "chan_enc", "decoder")))

    def __hash__(self):
        return hash((self.n, self.k_size, self.m_size, self.state_enc.tobytes(),
                     self.chan_enc.tobytes(), self.decoder.tobytes()))

    def check(self, channel: Channel):
        s, x, y = channel.w.shape
        n = self.n
        if self.state_enc.size != s ** n:
            raise ValueError(f"state_enc has {self.state_enc.size} entries, expected {s ** n}")
        if np.any(self.chan_enc >= x ** n):
            raise ValueError(f"chan_enc entries must lie in [0, {x ** n})")
        if self.decoder.shape[0] != y ** n:
            raise ValueError(f"decoder has {self.decoder.shape[0]} rows, expected {y ** n}")


def sequence_law(channel: Channel, p_s, n: int) -> tuple[np.ndarray, np.ndarray]:
    """(p_S^n[s^n], W^n[s^n, x^n, y^n]) by exact products."""
    p_s = as_dist(p_s, tol=1e-9, name="state distribution")
    if p_s.size != channel.s_size:
        raise ValueError("state distribution size does not match the channel")
    ps, wn = np.ones(1), np.ones((1, 1, 1))
    for _ in range(n):
        ps = np.multiply.outer(ps, p_s).reshape(-1)
        wn = np.einsum("abc,def->adbecf", wn, channel.w).reshape(
            wn.shape[0] * channel.s_size, wn.shape[1] * channel.x_size, wn.shape[2] * channel.y_size)
    return ps, wn


def pc_exact(channel: Channel, p_s, code: Code) -> float:
    """(1/|K|) sum_{k, s^n} p_S^n(s^n) W^n(decoder^{-1}(k, m(s^n)) | x^n(k, s^n), s^n)."""
    code.check(channel)
    ps, wn = sequence_law(channel, p_s, code.n)
    total = 0.0
    for k in range(code.k_size):
        for s in range(ps.size):
            hit = code.decoder[:, code.state_enc[s]] == k
            total += ps[s] * wn[s, code.chan_enc[k, s], hit].sum()
    return total / code.k_size


def pc_optimal_decoder(channel: Channel, p_s, n: int, state_probs, chan_probs) -> float:
    """Best correct-decoding probability for given, possibly stochastic, encoders.

    state_probs[s^n, m] = P(m | s^n); chan_probs[k, s^n, x^n] = P(x^n | k, s^n).
    The decoder picks argmax_k of the joint mass at every (y^n, m).
    """
    ps, wn = sequence_law(channel, p_s, n)
    state_probs = np.asarray(state_probs, float)
    chan_probs = np.asarray(chan_probs, float)
    # joint[k, m, y] = sum_s p(s) P(m|s) sum_x P(x|k,s) W(y|x,s)
    out_law = np.einsum("ksx,sxy->ksy", chan_probs, wn)
    joint = np.einsum("s,sm,ksy->kmy", ps, state_probs, out_law)
    return float(joint.max(axis=0).sum() / chan_probs.shape[0])


def code_count(channel: Channel, n: int, k_size: int, m_size: int) -> int:
    s, x, y = (a ** n for a in channel.w.shape)
    return m_size ** s * x ** (k_size * s) * k_size ** (y * m_size)


@dataclass(frozen=True)
class OracleResult:
    g_value: float
    pc_star: float
    best_code: Code
    count: int


def _map_decoder(scores: np.ndarray) -> np.ndarray:
    # scores[k, m, y]; smallest k among the (near-)maximizers
    top = scores.max(axis=0)
    ok = scores >= top - TIE_TOL * np.maximum(top, 1e-300)
    return np.argmax(ok, axis=0).T


def g_n_exhaustive(channel: Channel, p_s, n: int, k_size: int, m_size: int,
                   limit: int = CODE_LIMIT, chunk: int = 1 << 14) -> OracleResult:
    """min over deterministic codes of -(1/n) ln P_c, first optimum in lexicographic order.

    For each encoder pair the MAP decoder (lowest k on ties) is the
    lexicographically first optimal decoder, so the full decoder enumeration
    collapses to one decoder per encoder pair.
    """
    if n < 1 or k_size < 1 or m_size < 1:
        raise ValueError("n, k_size and m_size must be positive")
    count = code_count(channel, n, k_size, m_size)
    if count > limit:
        raise CodeCountExceeded(count, limit)
    ps, wn = sequence_law(channel, p_s, n)
    ns, nx = wn.shape[0], wn.shape[1]
    a = ps[:, None, None] * wn  # a[s, x, y]
    rows = np.array(list(itertools.product(range(nx), repeat=ns)), dtype=np.int64).reshape(-1, ns)
    # per channel-encoder row r and state code: mass[r, s, y] = a[s, r[s], y]
    row_mass = a[np.arange(ns), rows]
    best = (-1.0, None)
    for state_enc in itertools.product(range(m_size), repeat=ns):
        onehot = np.zeros((ns, m_size))
        onehot[np.arange(ns), state_enc] = 1.0
        b = np.einsum("rsy,sm->rmy", row_mass, onehot)  # b[r, m, y]
        combos = itertools.product(range(rows.shape[0]), repeat=k_size)
        while True:
            block = np.array(list(itertools.islice(combos, chunk)), dtype=np.int64).reshape(-1, k_size)
            if block.size == 0:
                break
            pc = b[block].max(axis=1).sum(axis=(1, 2)) / k_size
            i = int(np.argmax(pc))
            if pc[i] > best[0] + TIE_TOL:
                best = (float(pc[i]), (state_enc, block[i]))
    pc_star, (state_enc, combo) = best
    chan_enc = rows[combo]
    onehot = np.zeros((ns, m_size))
    onehot[np.arange(ns), state_enc] = 1.0
    scores = np.einsum("rsy,sm->rmy", row_mass[combo], onehot)
    code = Code(n, k_size, m_size, np.array(state_enc), chan_enc, _map_decoder(scores))
    return OracleResult(max(0.0, -math.log(pc_star) / n), pc_star, code, count)


@dataclass(frozen=True)
class TheoremReport:
    n: int
    k_size: int
    m_size: int
    rate: RatePoint
    g_value: float
    pc_star: float
    f_value: float
    pc_bound: float
    slack: float
    exponent: ExponentResult = field(repr=False)
    best_code: Code = field(repr=False)

    @property
    def passed(self) -> bool:
        return self.slack >= -SLACK_TOL and self.pc_star <= self.pc_bound + SLACK_TOL


def verify_main_theorem(channel: Channel, p_s, n: int, k_size: int, m_size: int,
                        search: SearchSpec = SearchSpec(), cfg: OptConfig = OptConfig(),
                        solver: OmegaSolver | None = None) -> TheoremReport:
    """Check G^(n) >= F - (ln 5)/n and P_c* <= min(1, 5 e^{-nF}) on one instance."""
    oracle = g_n_exhaustive(channel, p_s, n, k_size, m_size)
    rate = RatePoint(math.log(m_size) / n, math.log(k_size) / n)
    ex = f_sup(channel, rate, search, cfg, solver)
    slack = oracle.g_value - (ex.value - math.log(5) / n)
    return TheoremReport(n, k_size, m_size, rate, oracle.g_value, oracle.pc_star, ex.value,
                         pc_bound_from_f(ex.value, n), slack, ex, oracle.best_code)


def mc_pc(channel: Channel, p_s, code: Code, trials: int, seed=0) -> tuple[float, float]:
    """Monte Carlo estimate of P_c and its binomial standard error."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    code.check(channel)
    p_s = as_dist(p_s, tol=1e-9, name="state distribution")
    rng = np.random.default_rng(seed)
    n = code.n
    s_a, x_a, y_a = channel.w.shape
    k = rng.integers(code.k_size, size=trials)
    s = rng.choice(s_a, size=(trials, n), p=p_s)
    s_idx = _index(s, s_a)
    x = _digits(code.chan_enc[k, s_idx], x_a, n)
    cdf = np.cumsum(channel.w[s, x], axis=-1)
    u = rng.random((trials, n, 1))
    y = np.minimum((u > cdf).sum(axis=-1), y_a - 1)
    k_hat = code.decoder[_index(y, y_a), code.state_enc[s_idx]]
    p = float(np.mean(k_hat == k))
    return p, math.sqrt(p * (1 - p) / trials)


def _index(seq: np.ndarray, base: int) -> np.ndarray:
    out = np.zeros(seq.shape[0], dtype=np.int64)
    for t in range(seq.shape[1]):
        out = out * base + seq[:, t]
    return out


def _digits(idx: np.ndarray, base: int, n: int) -> np.ndarray:
    out = np.empty(idx.shape + (n,), dtype=np.int64)
    for t in range(n - 1, -1, -1):
        out[..., t] = idx % base
        idx = idx // base
    return out
