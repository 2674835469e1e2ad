"""Seed allocation: class collapsing, the constrained continuous relaxation,
rounding to integer counts, and baseline strategies.

The relaxation maximizes the objective over the polytope
{x in [0,1]^v : w^T x <= M} by projected gradient ascent with Armijo
backtracking and multiple starts; any solver meeting the same
convergence contract would do.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import CommunityLabels, DCSBMParams


@dataclass
class UniqueClasses:
    """Grouping of stochastically identical nodes (same community, same theta)."""

    membership: np.ndarray   # length n, node -> class index
    community: np.ndarray    # length v
    theta: np.ndarray        # length v, representative theta per class
    w: np.ndarray            # length v, class multiplicities

    @property
    def n(self) -> int:
        return self.membership.size

    @property
    def v(self) -> int:
        return self.w.size

    @property
    def V(self) -> np.ndarray:
        """n x v binary membership matrix."""
        V = np.zeros((self.n, self.v))
        V[np.arange(self.n), self.membership] = 1.0
        return V

    def members(self, j: int) -> np.ndarray:
        return np.where(self.membership == j)[0]


@dataclass
class SolverOptions:
    restarts: int = 5
    gtol: float = 1e-6
    max_iter: int = 500
    seed: int = 0
    armijo: float = 1e-4


@dataclass
class RelaxedSolution:
    x: np.ndarray
    value: float
    iterations: int
    pg_norm: float
    converged: bool
    budget_active: bool
    box_active: np.ndarray  # -1 lower bound, +1 upper bound, 0 interior
    start_values: list = field(default_factory=list)


@dataclass
class SeedAllocation:
    """Integer seed counts per class plus the expanded node-level vector."""

    y: np.ndarray
    s: np.ndarray


def collapse_classes(params: DCSBMParams, labels: CommunityLabels,
                     theta_tol: float = 1e-9) -> UniqueClasses:
    """Group nodes by (community, theta) with theta matched to ``theta_tol``.

    theta_tol = 0 means exact float equality. Classes are ordered by
    (community, theta) ascending.
    """
    theta = params.theta
    if theta_tol > 0:
        tkey = np.round(theta / theta_tol).astype(np.int64)
    else:
        tkey = theta
    pairs = np.stack([labels.c.astype(float), np.asarray(tkey, dtype=float)], axis=1)
    uniq, membership = np.unique(pairs, axis=0, return_inverse=True)
    v = uniq.shape[0]
    comm = uniq[:, 0].astype(np.int64)
    w = np.bincount(membership, minlength=v)
    theta_rep = np.zeros(v)
    np.add.at(theta_rep, membership, theta)
    theta_rep /= w
    return UniqueClasses(membership=membership, community=comm,
                         theta=theta_rep, w=w.astype(np.int64))


def project_box_budget(z: np.ndarray, w: np.ndarray, M: float) -> np.ndarray:
    """Euclidean projection onto {x in [0,1]^v : w^T x <= M}.

    Clip to the box first; if the budget still binds, bisect on the
    multiplier of the budget constraint (the weighted shift is monotone).
    """
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    x = np.clip(z, 0.0, 1.0)
    if w @ x <= M + 1e-12:
        return x
    lo = 0.0
    hi = float(np.max(z / np.maximum(w, 1e-300))) + 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if w @ np.clip(z - mid * w, 0.0, 1.0) > M:
            lo = mid
        else:
            hi = mid
    return np.clip(z - hi * w, 0.0, 1.0)


def _pga(value_fn, grad_fn, x0, w, M, options: SolverOptions):
    """Projected gradient ascent with backtracking from one start."""
    x = project_box_budget(x0, w, M)
    f = value_fn(x)
    if not np.isfinite(f):
        raise ValueError(f"non-finite objective at start x = {x}")
    g = grad_fn(x)
    alpha = 1.0
    iters = 0
    for iters in range(1, options.max_iter + 1):
        pg = project_box_budget(x + g, w, M) - x
        pg_norm = float(np.linalg.norm(pg))
        if pg_norm < options.gtol:
            return x, f, iters - 1, pg_norm, True
        improved = False
        a = alpha
        for _ in range(60):
            xn = project_box_budget(x + a * g, w, M)
            fn = value_fn(xn)
            if not np.isfinite(fn):
                raise ValueError(f"non-finite objective at x = {xn}")
            step = xn - x
            if fn >= f + options.armijo * float(g @ step) and fn >= f:
                x, f = xn, fn
                g = grad_fn(x)
                alpha = min(a * 1.8, 1e8)
                improved = True
                break
            a *= 0.5
        if not improved:
            pg_norm = float(np.linalg.norm(project_box_budget(x + g, w, M) - x))
            return x, f, iters, pg_norm, pg_norm < options.gtol
    pg_norm = float(np.linalg.norm(project_box_budget(x + g, w, M) - x))
    return x, f, options.max_iter, pg_norm, pg_norm < options.gtol


def solve_relaxed(value_fn, grad_fn, classes: UniqueClasses, budget: int,
                  x0: np.ndarray | None = None,
                  options: SolverOptions | None = None) -> RelaxedSolution:
    """Maximize the objective over {x in [0,1]^v : w^T x <= M}, multi-start.

    The default start is x0_j = M / n; the remaining starts are random
    feasible points.  Returns the best solution across starts, with the
    final projected-gradient norm as the convergence diagnostic.
    """
    options = options or SolverOptions()
    w = classes.w.astype(float)
    M = float(budget)
    if budget <= 0 or budget > classes.n:
        raise ValueError(f"budget {budget} infeasible for n = {classes.n}")
    starts = []
    if x0 is not None:
        starts.append(np.asarray(x0, dtype=float))
    else:
        starts.append(np.full(classes.v, M / classes.n))
    rng = np.random.default_rng(options.seed)
    while len(starts) < max(options.restarts, 1):
        xr = rng.uniform(0.0, 1.0, classes.v)
        total = w @ xr
        if total > M:
            xr *= M / total
        starts.append(xr)
    best = None
    start_values = []
    for st in starts:
        x, f, iters, pg_norm, conv = _pga(value_fn, grad_fn, st, w, M, options)
        start_values.append(f)
        if best is None or f > best[1]:
            best = (x, f, iters, pg_norm, conv)
    x, f, iters, pg_norm, conv = best
    box = np.zeros(classes.v, dtype=np.int64)
    box[x <= 1e-9] = -1
    box[x >= 1.0 - 1e-9] = 1
    return RelaxedSolution(x=x, value=f, iterations=iters, pg_norm=pg_norm,
                           converged=conv, budget_active=bool(w @ x >= M - 1e-6),
                           box_active=box, start_values=start_values)


def round_allocation(x_star: np.ndarray, classes: UniqueClasses,
                     M: int) -> np.ndarray:
    """Floor w_j * x_j, then top up one seed at a time to the class with the
    largest remainder (ties to the lowest index) until the budget is met."""
    if M > classes.n:
        raise ValueError(f"budget {M} exceeds node count {classes.n}")
    x = np.asarray(x_star, dtype=float)
    w = classes.w
    y = np.minimum(np.floor(w * x).astype(np.int64), w)
    while y.sum() < M:
        resid = w * x - y
        resid[y >= w] = -np.inf
        y[int(np.argmax(resid))] += 1
    return y


def expand_seeds(y: np.ndarray, classes: UniqueClasses,
                 rng: np.random.Generator) -> np.ndarray:
    """Mark a uniformly random subset of size y_j within each class as seeds."""
    y = np.asarray(y, dtype=np.int64)
    s = np.zeros(classes.n, dtype=np.int64)
    for j in range(classes.v):
        if y[j] == 0:
            continue
        members = classes.members(j)
        if y[j] > members.size:
            raise ValueError(f"class {j} has {members.size} nodes, cannot seed {y[j]}")
        s[rng.choice(members, size=y[j], replace=False)] = 1
    return s


def baseline_allocation(strategy: str, sizes, M: int) -> np.ndarray:
    """Per-community seed counts for the equal / proportional / largest baselines."""
    sizes = np.asarray(sizes, dtype=np.int64)
    K = sizes.size
    if M > sizes.sum():
        raise ValueError(f"budget {M} exceeds node count {sizes.sum()}")
    y = np.zeros(K, dtype=np.int64)
    if strategy == "equal":
        y[:] = M // K
        # remainder to largest communities first (ties: lowest index)
        order = np.lexsort((np.arange(K), -sizes))
        for k in order[: M - int(y.sum())]:
            y[k] += 1
    elif strategy == "proportional":
        quota = M * sizes / sizes.sum()
        y = np.floor(quota).astype(np.int64)
        frac = quota - y
        order = np.lexsort((np.arange(K), -frac))
        for k in order[: M - int(y.sum())]:
            y[k] += 1
    elif strategy == "largest":
        # all seeds to the biggest community, spilling only if it is too small
        order = np.lexsort((np.arange(K), -sizes))
        left = M
        for k in order:
            take = min(left, int(sizes[k]))
            y[k] = take
            left -= take
            if left == 0:
                break
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    # never seed more nodes than a community holds
    if np.any(y > sizes):
        over = np.where(y > sizes)[0]
        spare = 0
        for k in over:
            spare += y[k] - sizes[k]
            y[k] = sizes[k]
        order = np.lexsort((np.arange(K), -sizes))
        for k in order:
            room = int(sizes[k] - y[k])
            add = min(room, spare)
            y[k] += add
            spare -= add
            if spare == 0:
                break
    return y
