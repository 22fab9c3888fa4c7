"""Multi-start projected ascent over joint pmfs, plus an exhaustive-grid oracle.

The feasible set is a product of scaled simplices over the free cells:

* no constraint: one simplex over the whole joint;
* fixed S-marginal: one simplex per state s, of mass p_S(s);
* fixed kernel W: the free variable is q(u,v,s,x) and the joint is q * W.

An optional support mask pins cells to zero mass. Objectives receive full
joints stacked along a leading axis, shape (N, U, V, S, X, Y), and return N
values.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .prob import Channel

MASS_FLOOR = 1e-12
GRID_LIMIT = 10**8


class OptimizationError(RuntimeError):
    def __init__(self, message: str, point: np.ndarray | None = None):
        super().__init__(message)
        self.point = point


class GridTooLarge(ValueError):
    def __init__(self, size: int, limit: int = GRID_LIMIT):
        super().__init__(f"grid has {size} points, limit is {limit}")
        self.size = size


@dataclass(frozen=True)
class OptConfig:
    n_starts: int = 8
    max_iters: int = 3000
    step_init: float = 0.1
    tol: float = 1e-10
    seed: int = 0
    grid_step: float = 0.05
    method: str = "mirror"  # or "euclidean"

    def __post_init__(self):
        if self.method not in ("mirror", "euclidean"):
            raise ValueError("method must be 'mirror' or 'euclidean'")
        if self.n_starts < 1 or self.max_iters < 1:
            raise ValueError("n_starts and max_iters must be >= 1")
        if not (self.tol > 0 and self.step_init > 0 and self.grid_step > 0):
            raise ValueError("tol, step_init and grid_step must be positive")


@dataclass(frozen=True)
class Constraints:
    s_marginal: np.ndarray | None = None
    kernel: Channel | None = None
    support: np.ndarray | None = None  # bool mask over the free cells


@dataclass
class OptResult:
    argmax: np.ndarray
    value: float
    iters_used: int
    converged: bool
    start_index: int = 0
    start_values: list = field(default_factory=list)


class Feasible:
    """Free-variable layout, projection and start points for one feasible set."""

    def __init__(self, shape, constraints: Constraints | None = None):
        self.shape = tuple(int(n) for n in shape)
        if len(self.shape) != 5:
            raise ValueError("shape must list five alphabet sizes (U, V, S, X, Y)")
        c = constraints or Constraints()
        self.kernel = c.kernel
        if c.kernel is not None:
            if c.kernel.w.shape != self.shape[2:]:
                raise ValueError("kernel shape does not match (S, X, Y) sizes")
            self.free_shape = self.shape[:4]
        else:
            self.free_shape = self.shape
        self.size = int(np.prod(self.free_shape))
        support = np.ones(self.free_shape, bool) if c.support is None else np.asarray(c.support, bool)
        if support.shape != self.free_shape:
            raise ValueError("support mask must match the free-cell shape")
        flat_idx = np.arange(self.size).reshape(self.free_shape)
        if c.s_marginal is not None:
            ps = np.asarray(c.s_marginal, float)
            if ps.shape != (self.shape[2],) or abs(ps.sum() - 1) > 1e-9 or np.any(ps < 0):
                raise ValueError("s_marginal must be a distribution over S")
            parts = [(flat_idx[:, :, s][support[:, :, s]], float(ps[s])) for s in range(self.shape[2])]
        else:
            parts = [(flat_idx[support], 1.0)]
        self.groups = []
        for idx, mass in parts:
            if idx.size == 0 and mass > 0:
                raise ValueError("support mask leaves a positive-mass group empty")
            self.groups.append((idx, mass))
        self.active = np.zeros(self.size, bool)
        for idx, _ in self.groups:
            self.active[idx] = True

    def to_full(self, x: np.ndarray) -> np.ndarray:
        q = x.reshape((x.shape[0],) + self.free_shape)
        if self.kernel is not None:
            q = q[..., None] * self.kernel.w
        return q

    def to_free(self, q_full: np.ndarray) -> np.ndarray:
        q = np.asarray(q_full, float)
        if self.kernel is not None:
            q = q.sum(axis=-1)
        return q.reshape(q.shape[0], self.size)

    def grad_to_free(self, g_full: np.ndarray) -> np.ndarray:
        if self.kernel is not None:
            g_full = (g_full * self.kernel.w).sum(axis=-1)
        g = g_full.reshape(g_full.shape[0], self.size)
        return np.where(self.active, g, 0.0)

    def project(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros_like(x)
        for idx, mass in self.groups:
            if mass <= 0:
                continue
            floor = min(MASS_FLOOR, mass / (2 * idx.size))
            out[:, idx] = _project_simplex_rows(x[:, idx] - floor, mass - floor * idx.size) + floor
        return out

    def step(self, x: np.ndarray, g: np.ndarray, t: np.ndarray, method: str) -> np.ndarray:
        """Ascent step of length t along g, mapped back onto the feasible set."""
        if method == "euclidean":
            return self.project(x + t[:, None] * g)
        out = np.zeros_like(x)
        for idx, mass in self.groups:
            if mass <= 0:
                continue
            z = np.log(x[:, idx]) + t[:, None] * g[:, idx]
            z -= z.max(axis=1, keepdims=True)
            e = np.exp(z)
            out[:, idx] = mass * e / e.sum(axis=1, keepdims=True)
        # only rows that dipped below the floor need the Euclidean correction
        low = np.zeros(x.shape[0], bool)
        for idx, mass in self.groups:
            if mass > 0:
                low |= (out[:, idx] < min(MASS_FLOOR, mass / (2 * idx.size))).any(axis=1)
        if low.any():
            out[low] = self.project(out[low])
        return out

    def uniform(self) -> np.ndarray:
        x = np.zeros(self.size)
        for idx, mass in self.groups:
            if idx.size:
                x[idx] = mass / idx.size
        return x

    def dirichlet(self, rng: np.random.Generator) -> np.ndarray:
        x = np.zeros(self.size)
        for idx, mass in self.groups:
            if idx.size:
                x[idx] = mass * rng.dirichlet(np.ones(idx.size))
        return x

    def residual(self, q_full: np.ndarray) -> float:
        """Largest constraint violation of a full joint (for checks)."""
        q = np.asarray(q_full, float)[None]
        x = self.to_free(q)[0]
        worst = abs(q.sum() - 1.0)
        if self.kernel is not None:
            worst = max(worst, float(np.abs(q[0] - x.reshape(self.free_shape)[..., None] * self.kernel.w).max()))
        for idx, mass in self.groups:
            worst = max(worst, abs(x[idx].sum() - mass))
        worst = max(worst, float(np.abs(x[~self.active]).max(initial=0.0)))
        return worst


def _project_simplex_rows(v: np.ndarray, z: float) -> np.ndarray:
    """Euclidean projection of each row of v onto {y >= 0, sum(y) = z}."""
    n = v.shape[1]
    u = -np.sort(-v, axis=1)
    css = np.cumsum(u, axis=1) - z
    ind = np.arange(1, n + 1)
    rho = np.count_nonzero(u - css / ind > 0, axis=1)
    theta = css[np.arange(v.shape[0]), rho - 1] / rho
    return np.maximum(v - theta[:, None], 0.0)


def _numeric_grad(fun, x, rows, feas: Feasible, h: float = 1e-6):
    """Central differences over the active free coordinates, one batched call."""
    n, d = x.shape
    act = np.flatnonzero(feas.active)
    k = act.size
    plus = np.repeat(x[:, None, :], k, axis=1)
    minus = plus.copy()
    hi = x[:, act] + h
    lo = np.maximum(x[:, act] - h, 0.5 * MASS_FLOOR)
    ar = np.arange(k)
    plus[:, ar, act] = hi
    minus[:, ar, act] = lo
    pts = np.concatenate([plus, minus], axis=1).reshape(n * 2 * k, d)
    vals = fun(pts, np.repeat(rows, 2 * k)).reshape(n, 2, k)
    g = np.zeros_like(x)
    g[:, act] = (vals[:, 0] - vals[:, 1]) / (hi - lo)
    return g


def _ascend(fun, grad, x0, rows, feas: Feasible, cfg: OptConfig, window: int = 10):
    """Projected ascent on every row of x0 independently."""
    x = feas.project(x0)
    f = fun(x, rows)
    bad = ~np.isfinite(f)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise OptimizationError(f"objective is {f[i]} at a feasible start point", feas.to_full(x[i:i + 1])[0])
    n = x.shape[0]
    step = np.full(n, cfg.step_init)
    live = np.ones(n, bool)
    converged = np.zeros(n, bool)
    iters = np.zeros(n, int)
    hist = np.repeat(f[:, None], window, axis=1)
    g_all = np.empty_like(x)
    stale = np.ones(n, bool)
    for it in range(cfg.max_iters):
        idx = np.flatnonzero(live)
        if idx.size == 0:
            break
        xi = x[idx]
        # a rejected step leaves x, hence its gradient, unchanged
        redo = idx[stale[idx]]
        if redo.size:
            g_all[redo] = grad(x[redo], rows[redo])
            stale[redo] = False
        y = feas.step(xi, g_all[idx], step[idx], cfg.method)
        fy = fun(y, rows[idx])
        if np.any(np.isnan(fy) | np.isposinf(fy)):
            j = int(np.flatnonzero(np.isnan(fy) | np.isposinf(fy))[0])
            raise OptimizationError(f"objective is {fy[j]} at a feasible point", feas.to_full(y[j:j + 1])[0])
        ok = fy > f[idx]
        up = idx[ok]
        x[up] = y[ok]
        f[up] = fy[ok]
        stale[up] = True
        step[up] *= 2.0
        step[idx[~ok]] *= 0.5
        iters[idx] += 1
        slot = it % window
        old = hist[idx, slot].copy()
        hist[idx, slot] = f[idx]
        if it >= window - 1:
            done = (f[idx] - old < cfg.tol) | (step[idx] < 1e-20)
            converged[idx[done]] = True
            live[idx[done]] = False
    return x, f, iters, converged


def _start_points(feas: Feasible, cfg: OptConfig, seed, initial) -> np.ndarray:
    rng = np.random.default_rng(seed)
    pts = [feas.uniform()]
    pts += [feas.dirichlet(rng) for _ in range(cfg.n_starts - 1)]
    for q in initial or ():
        pts.append(feas.project(feas.to_free(np.asarray(q, float)[None]))[0])
    return np.array(pts)


def maximize_joint_batch(objective, shape, constraints: Constraints | None, cfg: OptConfig,
                         n_problems: int, gradient=None, seeds=None, initial=None) -> list[OptResult]:
    """Maximize `n_problems` objectives sharing one feasible set, in lockstep.

    objective(q, problem) and gradient(q, problem) receive full joints of shape
    (N, *shape) with the problem index of each row; gradient returns the full
    gradient d objective / d q(u,v,s,x,y). Without a gradient, central
    differences are used. `initial(p)` may supply extra start joints.
    """
    feas = Feasible(shape, constraints)
    if seeds is None:
        seeds = [(cfg.seed, p) for p in range(n_problems)]
    starts, rows = [], []
    for p in range(n_problems):
        extra = initial(p) if callable(initial) else initial
        s = _start_points(feas, cfg, seeds[p], extra)
        starts.append(s)
        rows.append(np.full(len(s), p))
    x0 = np.concatenate(starts)
    rows = np.concatenate(rows)

    def fun(x, r):
        return np.asarray(objective(feas.to_full(x), r), float)

    if gradient is None:
        def grad(x, r):
            return _numeric_grad(fun, x, r, feas)
    else:
        def grad(x, r):
            return feas.grad_to_free(np.asarray(gradient(feas.to_full(x), r), float))

    x, f, iters, conv = _ascend(fun, grad, x0, rows, feas, cfg)
    results = []
    for p in range(n_problems):
        sel = np.flatnonzero(rows == p)
        vals = f[sel]
        best = float(vals.max())
        k = int(np.flatnonzero(vals >= best - cfg.tol)[0])
        i = sel[k]
        results.append(OptResult(
            argmax=feas.to_full(x[i:i + 1])[0], value=float(f[i]), iters_used=int(iters[i]),
            converged=bool(conv[i]), start_index=k, start_values=[float(v) for v in vals]))
    return results


def maximize_joint(objective, shape, constraints: Constraints | None = None, cfg: OptConfig = OptConfig(),
                   gradient=None, initial=None) -> OptResult:
    """Best of cfg.n_starts projected-ascent runs (uniform start + seeded Dirichlet starts)."""
    grad = None if gradient is None else (lambda q, r: gradient(q))
    return maximize_joint_batch(lambda q, r: objective(q), shape, constraints, cfg, 1,
                                gradient=grad, seeds=[cfg.seed], initial=initial)[0]


def compositions(n_cells: int, units: int) -> np.ndarray:
    """All ways to put `units` indistinguishable units in `n_cells` cells, lexicographic."""
    if n_cells == 1:
        return np.array([[units]])
    bars = np.array(list(itertools.combinations(range(units + n_cells - 1), n_cells - 1)), dtype=np.int64)
    edges = np.concatenate([np.full((len(bars), 1), -1), bars, np.full((len(bars), 1), units + n_cells - 1)], axis=1)
    return np.diff(edges, axis=1) - 1


def grid_size(shape, constraints: Constraints | None, grid_step: float) -> int:
    feas = Feasible(shape, constraints)
    units = _units(grid_step)
    return math.prod(math.comb(units + idx.size - 1, idx.size - 1) for idx, m in feas.groups if idx.size)


def _units(grid_step: float) -> int:
    units = int(round(1.0 / grid_step))
    if units < 1 or abs(units * grid_step - 1.0) > 1e-9:
        raise ValueError("grid_step must be 1/K for a positive integer K")
    return units


def exhaustive_grid(objective, shape, constraints: Constraints | None = None, grid_step: float = 0.05,
                    chunk: int = 20000, limit: int = GRID_LIMIT) -> OptResult:
    """Evaluate the objective on every point of the simplex grid, keep the first best."""
    feas = Feasible(shape, constraints)
    size = grid_size(shape, constraints, grid_step)
    if size > limit:
        raise GridTooLarge(size, limit)
    units = _units(grid_step)
    tables = []
    for idx, mass in feas.groups:
        if idx.size:
            tables.append((idx, mass * compositions(idx.size, units) / units))
    counts = [len(t) for _, t in tables]
    best_val, best_x = -np.inf, None
    for start in range(0, size, chunk):
        flat = np.arange(start, min(start + chunk, size))
        picks = np.unravel_index(flat, counts)
        x = np.zeros((flat.size, feas.size))
        for (idx, table), pick in zip(tables, picks):
            x[:, idx] = table[pick]
        x = feas.project(x)
        vals = np.asarray(objective(feas.to_full(x)), float)
        k = int(np.argmax(np.where(np.isnan(vals), -np.inf, vals)))
        if vals[k] > best_val:
            best_val, best_x = float(vals[k]), x[k].copy()
    return OptResult(argmax=feas.to_full(best_x[None])[0], value=best_val, iters_used=size, converged=True)


def lipschitz_estimate(objective, shape, constraints: Constraints | None = None, n_samples: int = 64,
                       seed: int = 0, gradient=None) -> float:
    """Largest observed spread max_i g_i - min_i g_i of the free gradient within a group.

    Moving mass delta between two cells of a group changes the objective by at
    most about spread * delta, which is what the grid spacing controls.
    """
    feas = Feasible(shape, constraints)
    rng = np.random.default_rng(seed)
    x = feas.project(np.array([feas.dirichlet(rng) for _ in range(n_samples)]))
    rows = np.zeros(n_samples, int)
    if gradient is None:
        g = _numeric_grad(lambda z, r: np.asarray(objective(feas.to_full(z)), float), x, rows, feas)
    else:
        g = feas.grad_to_free(np.asarray(gradient(feas.to_full(x)), float))
    spread = 0.0
    for idx, mass in feas.groups:
        if idx.size > 1:
            gi = g[:, idx]
            spread = max(spread, float((gi.max(axis=1) - gi.min(axis=1)).max()))
    return spread
