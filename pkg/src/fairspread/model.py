"""Block-model parameter types, validation, and network sampling.

Supports the plain stochastic block model (all degree parameters equal)
and its degree-corrected generalization, where the probability of an edge
between nodes i and j is theta_i * theta_j * P[c_i, c_j].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Largest node count for which dense n x n matrices are materialized.
DENSE_CAP = 5000

PI_SUM_TOL = 1e-12
SYMMETRY_TOL = 1e-12
THETA_CONSTRAINT_TOL = 1e-9


@dataclass
class CommunityLabels:
    """Per-node community assignments, 0-based in ``range(K)``."""

    c: np.ndarray
    K: int

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=np.int64)
        if self.c.ndim != 1:
            raise ValueError("labels must be a 1-d vector")
        if self.c.size and (self.c.min() < 0 or self.c.max() >= self.K):
            raise ValueError(f"labels must lie in [0, {self.K})")
        self.c.flags.writeable = False

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def sizes(self) -> np.ndarray:
        """Community sizes n_k, length K."""
        return np.bincount(self.c, minlength=self.K)

    @property
    def Z(self) -> np.ndarray:
        """n x K indicator matrix with one 1 per row."""
        Z = np.zeros((self.n, self.K))
        Z[np.arange(self.n), self.c] = 1.0
        return Z


@dataclass
class DCSBMParams:
    """DCSBM parameters: community proportions, block matrix, degree weights.

    ``theta`` is length n, all 1 for the plain SBM.  The parameters are
    treated as immutable once constructed; arrays are marked read-only.
    """

    n: int
    K: int
    pi: np.ndarray
    P: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        self.pi = np.asarray(self.pi, dtype=float)
        self.P = np.asarray(self.P, dtype=float)
        self.theta = np.asarray(self.theta, dtype=float)
        for arr in (self.pi, self.P, self.theta):
            arr.flags.writeable = False

    @classmethod
    def sbm(cls, n: int, pi, P) -> "DCSBMParams":
        """Plain SBM: all degree parameters equal to 1."""
        pi = np.asarray(pi, dtype=float)
        return cls(n=n, K=pi.size, pi=pi, P=np.asarray(P, dtype=float),
                   theta=np.ones(n))

    @property
    def is_sbm(self) -> bool:
        return bool(np.all(self.theta == self.theta[0]))


@dataclass
class Network:
    """Undirected simple graph with optional community labels.

    ``edges`` is an (m, 2) integer array with each row (i, j), i < j,
    deduplicated.  ``node_ids`` retains original identifiers when the
    network was read from a file or restricted to a component.
    """

    n: int
    edges: np.ndarray
    labels: CommunityLabels | None = None
    node_ids: np.ndarray | None = None

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if self.edges.size:
            if self.edges.min() < 0 or self.edges.max() >= self.n:
                raise ValueError("edge endpoint out of range")
            if np.any(self.edges[:, 0] == self.edges[:, 1]):
                raise ValueError("self-loops are not allowed")

    @property
    def m(self) -> int:
        return self.edges.shape[0]

    def degrees(self) -> np.ndarray:
        d = np.zeros(self.n, dtype=np.int64)
        if self.edges.size:
            np.add.at(d, self.edges[:, 0], 1)
            np.add.at(d, self.edges[:, 1], 1)
        return d

    def adjacency_lists(self) -> list[np.ndarray]:
        """Neighbor arrays per node, ascending order."""
        neigh = [[] for _ in range(self.n)]
        for i, j in self.edges:
            neigh[i].append(j)
            neigh[j].append(i)
        return [np.array(sorted(a), dtype=np.int64) for a in neigh]

    def adjacency_dense(self) -> np.ndarray:
        if self.n > DENSE_CAP:
            raise ValueError(f"dense adjacency capped at n <= {DENSE_CAP}")
        A = np.zeros((self.n, self.n))
        if self.edges.size:
            A[self.edges[:, 0], self.edges[:, 1]] = 1.0
            A[self.edges[:, 1], self.edges[:, 0]] = 1.0
        return A

    def adjacency_sparse(self):
        from scipy import sparse

        if not self.edges.size:
            return sparse.csr_matrix((self.n, self.n))
        i = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        j = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        return sparse.csr_matrix((np.ones(i.size), (i, j)),
                                 shape=(self.n, self.n))


def validate(params: DCSBMParams, labels: CommunityLabels | None = None) -> list[str]:
    """Check parameter invariants; returns a list of violations (empty if valid).

    Label-dependent checks (per-community theta normalization and the
    edge-probability bound over realized pairs) run only when ``labels``
    is given.
    """
    v: list[str] = []
    pi, P, theta = params.pi, params.P, params.theta
    if params.n <= 0:
        v.append(f"n must be positive, got {params.n}")
    if params.K <= 0:
        v.append(f"K must be positive, got {params.K}")
    if pi.shape != (params.K,):
        v.append(f"pi has shape {pi.shape}, expected ({params.K},)")
    else:
        if np.any(pi <= 0):
            bad = int(np.argmin(pi))
            v.append(f"pi[{bad}] = {pi[bad]} is not strictly positive")
        if abs(pi.sum() - 1.0) > PI_SUM_TOL:
            v.append(f"pi sums to {pi.sum()}")
    if P.shape != (params.K, params.K):
        v.append(f"P has shape {P.shape}, expected ({params.K}, {params.K})")
    else:
        if np.abs(P - P.T).max() > SYMMETRY_TOL:
            k, l = np.unravel_index(np.argmax(np.abs(P - P.T)), P.shape)
            v.append(f"P is not symmetric: P[{k},{l}]={P[k, l]} vs P[{l},{k}]={P[l, k]}")
        if np.any(P < 0) or np.any(P > 1):
            k, l = np.unravel_index(np.argmax(np.abs(P - 0.5)), P.shape)
            v.append(f"P entries must lie in [0,1]; P[{k},{l}]={P[k, l]}")
    if theta.shape != (params.n,):
        v.append(f"theta has length {theta.shape}, expected ({params.n},)")
    elif np.any(theta <= 0):
        bad = int(np.argmin(theta))
        v.append(f"theta[{bad}] = {theta[bad]} is not strictly positive")

    if labels is not None and theta.shape == (params.n,) and pi.shape == (params.K,):
        sizes = labels.sizes
        for k in range(params.K):
            if sizes[k] == 0:
                continue
            mean = theta[labels.c == k].sum() / (pi[k] * params.n)
            if abs(mean - 1.0) > THETA_CONSTRAINT_TOL:
                v.append(f"theta constraint violated in community {k}: "
                         f"(1/(pi_k n)) sum theta = {mean}")
        if P.shape == (params.K, params.K):
            # Bound check over realized pairs via per-community theta maxima.
            tmax = np.zeros(params.K)
            for k in range(params.K):
                if sizes[k]:
                    tmax[k] = theta[labels.c == k].max()
            worst = np.outer(tmax, tmax) * P
            if worst.max() > 1.0 + 1e-12:
                k, l = np.unravel_index(np.argmax(worst), worst.shape)
                v.append(f"edge probability exceeds 1 for communities ({k},{l}): "
                         f"theta_max^2 * P = {worst[k, l]}")
    return v


def normalize_theta(theta_raw: np.ndarray, labels: CommunityLabels,
                    pi: np.ndarray) -> np.ndarray:
    """Rescale theta within each community so (1/(pi_k n)) sum theta = 1.

    Ratios within a community are preserved; a community with no members
    raises ValueError.
    """
    theta_raw = np.asarray(theta_raw, dtype=float)
    pi = np.asarray(pi, dtype=float)
    if np.any(theta_raw <= 0):
        raise ValueError("theta entries must be strictly positive")
    n = theta_raw.size
    out = np.empty(n)
    for k in range(labels.K):
        mask = labels.c == k
        total = theta_raw[mask].sum()
        if not mask.any():
            raise ValueError(f"community {k} has no members")
        out[mask] = theta_raw[mask] * (pi[k] * n) / total
    return out


def sample_labels(pi, n: int, rng: np.random.Generator) -> CommunityLabels:
    """Draw n i.i.d. community labels from the proportions pi."""
    pi = np.asarray(pi, dtype=float)
    c = rng.choice(pi.size, size=n, p=pi)
    return CommunityLabels(c=c, K=pi.size)


def labels_from_sizes(sizes) -> CommunityLabels:
    """Fixed labels conditioning on exact community sizes (block order)."""
    sizes = np.asarray(sizes, dtype=np.int64)
    c = np.repeat(np.arange(sizes.size), sizes)
    return CommunityLabels(c=c, K=sizes.size)


def generate_network(params: DCSBMParams, labels: CommunityLabels,
                     rng: np.random.Generator) -> Network:
    """Sample a network: each unordered pair is Bernoulli(theta_i theta_j P).

    Raises ValueError naming the offending pair if any edge probability
    exceeds 1; probabilities are never clipped.
    """
    n = params.n
    c = labels.c
    theta = params.theta
    rows = []
    block = 256  # row-block sampling keeps memory at O(block * n)
    for start in range(0, n, block):
        stop = min(start + block, n)
        i_idx = np.arange(start, stop)
        probs = (theta[i_idx, None] * theta[None, :]
                 * params.P[np.ix_(c[i_idx], c)])
        probs[np.arange(stop - start), i_idx] = 0.0  # diagonal is not a pair
        if probs.max() > 1.0 + 1e-12:
            bi, j = np.unravel_index(np.argmax(probs), probs.shape)
            i = int(i_idx[bi])
            raise ValueError(
                f"edge probability {probs[bi, j]} > 1 for pair ({i}, {int(j)})")
        draw = rng.random(probs.shape) < probs
        # keep the strict upper triangle only
        draw &= np.arange(n)[None, :] > i_idx[:, None]
        bi, j = np.nonzero(draw)
        rows.append(np.column_stack([i_idx[bi], j]))
    edges = np.vstack(rows) if rows else np.empty((0, 2), dtype=np.int64)
    return Network(n=n, edges=edges, labels=labels)


def sbm_weight_matrix(a, off_diag: float = 1.0, scale: float = 0.01) -> np.ndarray:
    """Block matrix with ``a`` on the diagonal and ``off_diag`` elsewhere, times ``scale``."""
    a = np.asarray(a, dtype=float)
    if np.any(a < 0) or off_diag < 0:
        raise ValueError("weights must be nonnegative")
    P = np.full((a.size, a.size), off_diag)
    np.fill_diagonal(P, a)
    P = P * scale
    if P.size and P.max() > 1.0:
        k, l = np.unravel_index(np.argmax(P), P.shape)
        raise ValueError(f"entry P[{k},{l}] = {P[k, l]} exceeds 1")
    return P
