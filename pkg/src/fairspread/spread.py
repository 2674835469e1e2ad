"""Independent-cascade simulation, exact activation recursion, and the
linearized spread operator with its matrix-power coverage approximations.

The operator has entries psi[i, j] = I(i != j) * beta_ij * theta_i *
theta_j * P[c_i, c_j]; its t-th power applied to a seed vector
approximates t-step spread.  Nodes sharing (community, theta) are
stochastically identical, so the operator also carries an exact
class-compressed form usable beyond the dense size cap.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .model import DENSE_CAP, CommunityLabels, DCSBMParams, Network
from .objective import entropy, normalize_coverage

NEVER = -1


@dataclass(frozen=True)
class TransmissionSpec:
    """Transmission probabilities: a single scalar or a K x K block matrix."""

    beta: float | None = None
    block: np.ndarray | None = None

    def __post_init__(self):
        if (self.beta is None) == (self.block is None):
            raise ValueError("specify exactly one of beta / block")
        if self.beta is not None and not (0.0 <= self.beta <= 1.0):
            raise ValueError(f"beta = {self.beta} outside [0, 1]")
        if self.block is not None:
            B = np.asarray(self.block, dtype=float)
            if np.any(B < 0) or np.any(B > 1):
                raise ValueError("block transmission probabilities outside [0, 1]")
            if np.abs(B - B.T).max() > 1e-12:
                raise ValueError("block transmission matrix must be symmetric")
            object.__setattr__(self, "block", B)

    @classmethod
    def scalar(cls, beta: float) -> "TransmissionSpec":
        return cls(beta=beta)

    @classmethod
    def blockwise(cls, within: float, between: float, K: int) -> "TransmissionSpec":
        B = np.full((K, K), between)
        np.fill_diagonal(B, within)
        return cls(block=B)

    def block_matrix(self, K: int) -> np.ndarray:
        """K x K matrix of pair probabilities by community."""
        if self.beta is not None:
            return np.full((K, K), self.beta)
        if self.block.shape != (K, K):
            raise ValueError(f"block matrix is {self.block.shape}, expected ({K}, {K})")
        return self.block


@dataclass
class ActivationTrace:
    """Activation time per node (0 for seeds, NEVER if unreached)."""

    activated_at: np.ndarray
    horizon: int

    def active_by(self, t: int) -> np.ndarray:
        return (self.activated_at >= 0) & (self.activated_at <= t)

    def frontier(self, step: int) -> np.ndarray:
        return np.where(self.activated_at == step)[0]


@dataclass
class CoverageSummary:
    """Per-community activated proportions and derived fairness numbers."""

    q: np.ndarray
    p: np.ndarray
    m: float
    H: float


@dataclass
class SpreadOperator:
    """The linear one-step transmission operator.

    Stores an exact class-compressed form (values per pair of
    stochastically identical node classes) and, for n <= DENSE_CAP, the
    dense n x n matrix.  The operator is symmetric.
    """

    n: int
    class_values: np.ndarray  # u x u psi value for (class a, class b) pairs
    membership: np.ndarray    # length n, node -> class
    counts: np.ndarray        # length u, class sizes
    dense: np.ndarray | None = None

    @property
    def num_classes(self) -> int:
        return self.class_values.shape[0]

    def apply(self, vec: np.ndarray) -> np.ndarray:
        """psi @ vec."""
        vec = np.asarray(vec, dtype=float)
        if self.dense is not None:
            return self.dense @ vec
        return self._apply_compressed(vec)

    def apply_compressed(self, vec: np.ndarray) -> np.ndarray:
        """psi @ vec via the class-compressed form (identical result)."""
        return self._apply_compressed(np.asarray(vec, dtype=float))

    def _apply_compressed(self, vec):
        agg = np.bincount(self.membership, weights=vec,
                          minlength=self.num_classes)
        full = (self.class_values @ agg)[self.membership]
        self_vals = np.diag(self.class_values)[self.membership]
        return full - self_vals * vec  # remove the i == j term

    def apply_matrix(self, mat: np.ndarray) -> np.ndarray:
        """psi @ mat, column-wise."""
        mat = np.asarray(mat, dtype=float)
        if self.dense is not None:
            return self.dense @ mat
        agg = np.zeros((self.num_classes, mat.shape[1]))
        np.add.at(agg, self.membership, mat)
        full = (self.class_values @ agg)[self.membership]
        self_vals = np.diag(self.class_values)[self.membership]
        return full - self_vals[:, None] * mat

    def apply_power(self, vec: np.ndarray, t: int) -> np.ndarray:
        """psi^t @ vec by t successive products (never an explicit power)."""
        out = np.asarray(vec, dtype=float).copy()
        for _ in range(t):
            out = self.apply(out)
        return out


def build_psi(params: DCSBMParams, labels: CommunityLabels,
              tspec: TransmissionSpec) -> SpreadOperator:
    """Construct the spread operator for the given model and transmission spec."""
    beta_block = tspec.block_matrix(params.K)
    # classes of stochastically identical nodes: exact (community, theta) pairs
    pairs = np.stack([labels.c.astype(float), params.theta], axis=1)
    uniq, membership = np.unique(pairs, axis=0, return_inverse=True)
    comm = uniq[:, 0].astype(np.int64)
    theta_u = uniq[:, 1]
    class_values = (beta_block[np.ix_(comm, comm)]
                    * np.outer(theta_u, theta_u)
                    * params.P[np.ix_(comm, comm)])
    if class_values.size and (class_values.min() < 0 or class_values.max() > 1.0 + 1e-12):
        a, b = np.unravel_index(np.argmax(class_values), class_values.shape)
        raise ValueError(
            f"operator entry {class_values[a, b]} outside [0, 1] for classes ({a}, {b})")
    counts = np.bincount(membership, minlength=comm.size)
    dense = None
    if params.n <= DENSE_CAP:
        dense = class_values[np.ix_(membership, membership)].copy()
        np.fill_diagonal(dense, 0.0)
    return SpreadOperator(n=params.n, class_values=class_values,
                          membership=membership, counts=counts, dense=dense)


def simulate_ic(network: Network, tspec: TransmissionSpec, s: np.ndarray,
                t: int, rng: np.random.Generator) -> ActivationTrace:
    """One independent-cascade realization on a fixed network.

    Every node activated at the previous step attempts transmission once
    to each of its unactivated neighbors, independently with the pair
    probability from ``tspec``.  Runs exactly t steps or until the
    frontier empties.
    """
    s = np.asarray(s)
    if s.size != network.n:
        raise ValueError("seed vector length mismatch")
    if tspec.block is not None and network.labels is None:
        raise ValueError("blockwise transmission requires labeled network")
    if network.labels is not None:
        beta_block = tspec.block_matrix(network.labels.K)
        c = network.labels.c
    else:
        beta_block = np.array([[tspec.beta]])
        c = np.zeros(network.n, dtype=np.int64)

    neigh = network.adjacency_lists()
    activated_at = np.full(network.n, NEVER, dtype=np.int64)
    activated_at[s.astype(bool)] = 0
    frontier = np.where(s.astype(bool))[0]
    for step in range(1, t + 1):
        if frontier.size == 0:
            break
        newly = []
        for u in frontier:
            targets = neigh[u]
            for w in targets:
                if activated_at[w] != NEVER:
                    continue
                if rng.random() < beta_block[c[u], c[w]]:
                    activated_at[w] = step
                    newly.append(w)
        frontier = np.array(newly, dtype=np.int64)
    return ActivationTrace(activated_at=activated_at, horizon=t)


def coverage(trace: ActivationTrace, labels: CommunityLabels,
             t: int) -> CoverageSummary:
    """Per-community activated proportions by time t, with entropy of the
    normalized proportions."""
    if t > trace.horizon:
        raise ValueError(f"t = {t} exceeds trace horizon {trace.horizon}")
    active = trace.active_by(t)
    sizes = labels.sizes
    counts = np.bincount(labels.c[active], minlength=labels.K)
    q = counts / np.maximum(sizes, 1)
    m = float(active.sum() / labels.n)
    p = normalize_coverage(q)
    return CoverageSummary(q=q, p=p, m=m, H=entropy(p, labels.K))


def exact_activation_probs(params: DCSBMParams, labels: CommunityLabels,
                           tspec: TransmissionSpec, s: np.ndarray,
                           t: int) -> np.ndarray:
    """Cumulative activation probabilities from the exact recursion.

    Maintains per-step activation probabilities as differences of
    cumulative ones; a node's probability of being activated by time t is
    1 minus the product over steps r < t and nodes j != i of
    (1 - psi[i, j] * P(j activated at step r)).  Seeds are held at 1.
    """
    if params.n > DENSE_CAP:
        raise ValueError(f"exact recursion uses a dense operator, n <= {DENSE_CAP}")
    psi = build_psi(params, labels, tspec).dense
    s = np.asarray(s, dtype=float)
    seeds = s > 0
    cum = s.copy()
    g = s.copy()  # per-step activation probabilities, step 0
    running = np.ones(params.n)  # product over completed steps
    for _ in range(t):
        factors = 1.0 - psi * g[None, :]
        running *= np.prod(factors, axis=1)
        new_cum = 1.0 - running
        new_cum[seeds] = 1.0
        g = np.maximum(new_cum - cum, 0.0)
        cum = new_cum
    return cum


def approx_total(op: SpreadOperator, s: np.ndarray, t: int) -> float:
    """Approximate total activated proportion (1/n) * 1^T psi^t s."""
    return float(op.apply_power(s, t).sum() / op.n)


def approx_by_community(op: SpreadOperator, labels: CommunityLabels, pi,
                        s: np.ndarray, t: int) -> np.ndarray:
    """Approximate per-community coverage Z_k^T psi^t s / (pi_k n).

    Values may exceed 1 for large t; they are returned unclamped so the
    approximation's degradation stays visible.
    """
    pi = np.asarray(pi, dtype=float)
    u = op.apply_power(s, t)
    num = np.zeros(labels.K)
    np.add.at(num, labels.c, u)
    return num / (pi * op.n)


def mc_activation_probs(params: DCSBMParams, labels: CommunityLabels,
                        tspec: TransmissionSpec, s: np.ndarray, t: int,
                        runs: int, rng: np.random.Generator,
                        batch: int = 20000) -> np.ndarray:
    """Monte-Carlo activation frequencies in resampled-network mode.

    Each run redraws the network from the model and then spreads with the
    IC dynamics, matching the expectation the exact recursion targets.
    Vectorized over runs; intended for small n.
    """
    n = params.n
    if n > 64:
        raise ValueError("resampled-network MC oracle is for small instances")
    c = labels.c
    pair_probs = (np.outer(params.theta, params.theta)
                  * params.P[np.ix_(c, c)])
    np.fill_diagonal(pair_probs, 0.0)
    beta_mat = tspec.block_matrix(params.K)[np.ix_(c, c)]
    s = np.asarray(s, dtype=bool)
    freq = np.zeros(n)
    done = 0
    while done < runs:
        R = min(batch, runs - done)
        upper = np.triu(rng.random((R, n, n)) < pair_probs, k=1)
        A = upper | np.transpose(upper, (0, 2, 1))
        active = np.broadcast_to(s, (R, n)).copy()
        frontier = active.copy()
        for _ in range(t):
            if not frontier.any():
                break
            success = A & frontier[:, None, :] & (rng.random((R, n, n)) < beta_mat)
            newly = success.any(axis=2) & ~active
            active |= newly
            frontier = newly
        freq += active.sum(axis=0)
        done += R
    return freq / runs


def trace_to_csv(trace: ActivationTrace, labels: CommunityLabels, path) -> None:
    """Write a trace as CSV rows (node, community, activation_time)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node", "community", "activation_time"])
        for i in range(labels.n):
            at = trace.activated_at[i]
            writer.writerow([i, int(labels.c[i]), "" if at == NEVER else int(at)])
