"""Entropy fairness, the coverage-plus-fairness objective, and its gradient.

The objective over relaxed class-level seed variables x is

    f(x) = m(x) + lambda * H(p(x))

where m is the approximate total activated proportion, p is the
approximate per-community coverage normalized to sum 1, and H is entropy
in base K (1 for perfectly even coverage, 0 for fully concentrated).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ENTROPY_SUM_TOL = 1e-9


@dataclass
class ObjectiveConfig:
    """Weights and horizon for the relaxed objective."""

    lam: float
    t: int
    budget: int
    epsilon: float = 1e-9

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("fairness weight must be nonnegative")
        if self.t < 0:
            raise ValueError("horizon must be nonnegative")
        if self.budget <= 0:
            raise ValueError("budget must be positive")
        if not (0 < self.epsilon <= 1e-6):
            raise ValueError("epsilon must lie in (0, 1e-6]")


def entropy(p, K: int | None = None) -> float:
    """Base-K entropy of a probability vector, with 0 log 0 = 0.

    Raises ValueError on negative entries or if the vector does not sum
    to 1 within tolerance.
    """
    p = np.asarray(p, dtype=float)
    if K is None:
        K = p.size
    if np.any(p < 0):
        raise ValueError(f"negative probability p[{int(np.argmin(p))}] = {p.min()}")
    if abs(p.sum() - 1.0) > ENTROPY_SUM_TOL:
        raise ValueError(f"probabilities sum to {p.sum()}, expected 1")
    if K <= 1:
        return 0.0
    nz = p > 0
    return float(-(p[nz] * np.log(p[nz])).sum() / np.log(K))


def normalize_coverage(q, epsilon: float = 1e-9) -> np.ndarray:
    """q / sum(q), falling back to the uniform vector when sum(q) < epsilon."""
    q = np.asarray(q, dtype=float)
    s = q.sum()
    if s < epsilon:
        return np.full(q.size, 1.0 / q.size)
    return q / s


def gini(values) -> float:
    """Gini coefficient of nonnegative values (reporting metric only)."""
    x = np.asarray(values, dtype=float)
    if x.size == 0 or x.sum() == 0:
        return 0.0
    diffs = np.abs(x[:, None] - x[None, :]).sum()
    return float(diffs / (2.0 * x.size * x.sum()))


@dataclass
class ObjectiveValue:
    """Objective value with its intermediates."""

    f: float
    m: float
    H: float
    q: np.ndarray
    p: np.ndarray
    degenerate: bool  # sum of coverage below epsilon; uniform fallback used


@dataclass
class ReducedObjective:
    """Precomputed linear maps from class variables x to (q, m).

    ``coverage_map`` is K x v with q = coverage_map @ x; ``total_map``
    is length v with m = total_map @ x.  Built once per (operator, V, t),
    so repeated evaluations inside the solver are O(K v).
    """

    coverage_map: np.ndarray
    total_map: np.ndarray
    lam: float
    epsilon: float = 1e-9

    @property
    def K(self) -> int:
        return self.coverage_map.shape[0]

    @property
    def v(self) -> int:
        return self.coverage_map.shape[1]

    def value(self, x) -> ObjectiveValue:
        x = np.asarray(x, dtype=float)
        q = self.coverage_map @ x
        m = float(self.total_map @ x)
        degenerate = q.sum() < self.epsilon
        p = normalize_coverage(q, self.epsilon)
        H = entropy(p, self.K)
        return ObjectiveValue(f=m + self.lam * H, m=m, H=H, q=q, p=p,
                              degenerate=degenerate)

    def gradient(self, x) -> np.ndarray:
        """Analytic gradient; entropy derivative uses an epsilon-floored p."""
        x = np.asarray(x, dtype=float)
        q = self.coverage_map @ x
        sq = q.sum()
        if sq < self.epsilon:
            # degenerate region: entropy locked at the uniform fallback
            return self.total_map.copy()
        p = q / sq
        K = self.K
        H = entropy(p, K)
        pf = np.maximum(p, self.epsilon)
        # dH/dq_k = (-log_K p_k - H) / sum(q)
        dHdq = (-np.log(pf) / np.log(K) - H) / sq
        return self.total_map + self.lam * (self.coverage_map.T @ dHdq)


def reduce_objective(op, labels, pi, V: np.ndarray,
                     config: ObjectiveConfig) -> ReducedObjective:
    """Contract the spread operator through t steps onto the class basis.

    ``op`` is a SpreadOperator (anything with ``apply``); V is the n x v
    class membership matrix.
    """
    pi = np.asarray(pi, dtype=float)
    n = V.shape[0]
    PV = np.asarray(V, dtype=float).copy()
    for _ in range(config.t):
        PV = op.apply_matrix(PV)
    K = pi.size
    Zsum = np.zeros((K, PV.shape[1]))
    np.add.at(Zsum, labels.c, PV)
    coverage_map = Zsum / (pi * n)[:, None]
    total_map = PV.sum(axis=0) / n
    return ReducedObjective(coverage_map=coverage_map, total_map=total_map,
                            lam=config.lam, epsilon=config.epsilon)


def objective_value(op, labels, pi, x, V: np.ndarray,
                    config: ObjectiveConfig) -> ObjectiveValue:
    """f(x) = m + lambda H(p) with all intermediates, for one evaluation point."""
    red = reduce_objective(op, labels, pi, V, config)
    x = np.asarray(x, dtype=float)
    if x.size != V.shape[1]:
        raise ValueError(f"x has length {x.size}, expected {V.shape[1]}")
    return red.value(x)


def objective_gradient(op, labels, pi, x, V: np.ndarray,
                       config: ObjectiveConfig) -> np.ndarray:
    """Analytic gradient of objective_value with respect to x."""
    red = reduce_objective(op, labels, pi, V, config)
    x = np.asarray(x, dtype=float)
    if x.size != V.shape[1]:
        raise ValueError(f"x has length {x.size}, expected {V.shape[1]}")
    return red.gradient(x)
