"""Replicated experiment pipelines: allocate, spread, summarize, write CSV.

A recipe sweeps fairness weights and transmission probabilities over a
synthetic model or an observed network, producing one result row per
(sweep point, strategy, replication) plus a summary table.  Runs are
deterministic given the base seed: every random stage draws from its own
seed-sequence stream.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .estimate import estimate_labels, estimate_params
from .model import (CommunityLabels, DCSBMParams, generate_network,
                    labels_from_sizes, normalize_theta, sample_labels)
from .netio import extract_lcc, read_edge_list
from .objective import (ObjectiveConfig, entropy, gini, normalize_coverage,
                        reduce_objective)
from .optimizer import (SeedAllocation, SolverOptions, baseline_allocation,
                        collapse_classes, expand_seeds, round_allocation,
                        solve_relaxed)
from .spread import TransmissionSpec, build_psi, coverage, simulate_ic

STRATEGIES = ("proposed", "equal", "proportional", "largest")

# stream tags for deterministic seed derivation
_LABELS, _THETA, _DETECT, _SOLVER, _REP = 1, 2, 3, 4, 5


@dataclass
class ModelSpec:
    """Synthetic model recipe; theta is drawn or normalized at materialization."""

    n: int
    K: int
    pi: np.ndarray
    P: np.ndarray
    theta_source: str = "constant"  # constant | poisson(<mean>) | explicit list

    def theta_is_constant(self) -> bool:
        return self.theta_source.strip() == "constant"

    def materialize(self, labels: CommunityLabels,
                    rng: np.random.Generator) -> DCSBMParams:
        src = self.theta_source.strip()
        if src == "constant":
            theta = np.ones(self.n)
        elif src.startswith("poisson(") and src.endswith(")"):
            mean = float(src[len("poisson("):-1])
            raw = rng.poisson(mean, size=self.n) + 1.0
            theta = normalize_theta(raw, labels, self.pi)
        else:
            raw = np.array([float(x) for x in src.split()])
            if raw.size != self.n:
                raise ValueError(f"explicit theta list has {raw.size} entries, "
                                 f"expected {self.n}")
            theta = normalize_theta(raw, labels, self.pi)
        return DCSBMParams(n=self.n, K=self.K, pi=self.pi, P=self.P, theta=theta)


@dataclass
class NetworkSource:
    """Observed network recipe (edge list plus labels or a community count)."""

    edges_path: str
    labels_path: str | None = None
    K: int | None = None
    estimate_labels: bool = True


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    model: ModelSpec | None = None
    network: NetworkSource | None = None
    t: int = 1
    t_alloc: int | None = None  # allocation horizon; defaults to t
    lambdas: tuple = (3.0,)
    betas: tuple = ((0.2, 0.2),)  # (within, between) pairs
    budget: int | str = 30  # integer or "sqrt"
    strategies: tuple = STRATEGIES
    replications: int = 50
    seed: int = 0
    resample_labels: bool = True
    fixed_sizes: bool = False
    theta_tol: float = 1e-3
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if (self.model is None) == (self.network is None):
            raise ValueError("configure exactly one of model / network source")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not self.lambdas or not self.betas:
            raise ValueError("sweep lists must be nonempty")
        for s in self.strategies:
            if s not in STRATEGIES:
                raise ValueError(f"unknown strategy {s!r}")


def seed_budget(n: int, rule) -> int:
    """Resolve the seed budget: an explicit count or floor(sqrt(n))."""
    if isinstance(rule, str):
        if rule.strip() != "sqrt":
            raise ValueError(f"unknown budget rule {rule!r}")
        M = int(math.isqrt(n))
    else:
        M = int(rule)
    if M > n:
        raise ValueError(f"budget {M} exceeds node count {n}")
    if M < 1:
        raise ValueError("budget must be at least 1")
    return M


def _rng(*key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(list(key)))


def _fixed_size_labels(pi: np.ndarray, n: int) -> CommunityLabels:
    sizes = np.floor(pi * n).astype(np.int64)
    sizes[0] += n - sizes.sum()  # absorb rounding into the first community
    return labels_from_sizes(sizes)


@dataclass
class _Resolved:
    """Materialized experiment inputs shared across sweep points."""

    params: DCSBMParams
    alloc_labels: CommunityLabels
    network: object | None  # fixed observed network, or None for synthetic
    resample: bool
    budget: int
    t_alloc: int
    notes: list


def _resolve(config: ExperimentConfig) -> _Resolved:
    notes = []
    if config.model is not None:
        spec = config.model
        if config.fixed_sizes:
            labels = _fixed_size_labels(spec.pi, spec.n)
        else:
            labels = sample_labels(spec.pi, spec.n, _rng(config.seed, _LABELS))
        params = spec.materialize(labels, _rng(config.seed, _THETA))
        resample = config.resample_labels
        if resample and not spec.theta_is_constant():
            # degree parameters are tied to the labels they were normalized
            # against; resampling would orphan the class-level allocation
            resample = False
            notes.append("resample_labels disabled: theta is label-dependent")
        network = None
        n = spec.n
    else:
        src = config.network
        network = extract_lcc(read_edge_list(src.edges_path, src.labels_path))
        if src.estimate_labels or network.labels is None:
            if src.K is None:
                if network.labels is None:
                    raise ValueError("network source needs labels or a community count")
                K = network.labels.K
            else:
                K = src.K
            labels = estimate_labels(network, K, _rng(config.seed, _DETECT))
            notes.append(f"labels estimated with K={K}")
        else:
            labels = network.labels
        network = replace_labels(network, labels)
        params = estimate_params(network, labels).params
        resample = False
        n = network.n
    budget = seed_budget(n, config.budget)
    t_alloc = config.t if config.t_alloc is None else config.t_alloc
    return _Resolved(params=params, alloc_labels=labels, network=network,
                     resample=resample, budget=budget, t_alloc=t_alloc,
                     notes=notes)


def replace_labels(network, labels: CommunityLabels):
    from .model import Network

    return Network(n=network.n, edges=network.edges, labels=labels,
                   node_ids=network.node_ids)


def _community_counts(y_class: np.ndarray, classes) -> np.ndarray:
    K = int(classes.community.max()) + 1
    out = np.zeros(K, dtype=np.int64)
    np.add.at(out, classes.community, y_class)
    return out


def _spread_entropy(trace, labels: CommunityLabels, t: int):
    """Entropy over per-capita coverage of spread-caused activations only.

    Seed self-activation is excluded: the linearized predictor estimates
    transmission coverage, and the strategy comparisons in the replicated
    experiments are made on the same scale.
    """
    active = (trace.activated_at >= 1) & (trace.activated_at <= t)
    sizes = np.maximum(labels.sizes, 1)
    q = np.bincount(labels.c[active], minlength=labels.K) / sizes
    return entropy(normalize_coverage(q), labels.K), q


def run_experiment(config: ExperimentConfig):
    """Run the recipe; returns (rows, summary_rows, echo_lines)."""
    res = _resolve(config)
    params = res.params
    K = params.K
    pi = params.pi
    M = res.budget

    rows = []
    sweep = [(lam, bw, bb) for lam in config.lambdas for bw, bb in config.betas]
    for sweep_idx, (lam, b_within, b_between) in enumerate(sweep):
        try:
            _run_sweep_point(config, res, rows, sweep_idx, lam,
                             b_within, b_between)
        except (ValueError, RuntimeError) as exc:
            raise RuntimeError(
                f"{config.name}: sweep point lambda={lam} "
                f"beta=({b_within}, {b_between}) failed: {exc}") from exc

    summary = _summarize(rows, K)
    echo = _config_echo(config, res)
    return rows, summary, echo


def _run_sweep_point(config: ExperimentConfig, res: _Resolved, rows: list,
                     sweep_idx: int, lam: float, b_within: float,
                     b_between: float) -> None:
    params = res.params
    K = params.K
    pi = params.pi
    M = res.budget
    if b_within == b_between:
        tspec = TransmissionSpec.scalar(b_within)
    else:
        tspec = TransmissionSpec.blockwise(b_within, b_between, K)
    op = build_psi(params, res.alloc_labels, tspec)
    classes = collapse_classes(params, res.alloc_labels, config.theta_tol)
    pred_reducer = reduce_objective(
        op, res.alloc_labels, pi, classes.V,
        ObjectiveConfig(lam=lam, t=config.t, budget=M))

    for strat_idx, strategy in enumerate(config.strategies):
        if strategy == "proposed":
            alloc_cfg = ObjectiveConfig(lam=lam, t=res.t_alloc, budget=M)
            reducer = reduce_objective(op, res.alloc_labels, pi,
                                       classes.V, alloc_cfg)
            opts = replace(config.solver,
                           seed=int(_rng(config.seed, _SOLVER,
                                         sweep_idx).integers(2**32)))
            sol = solve_relaxed(lambda x: reducer.value(x).f,
                                reducer.gradient, classes, M, options=opts)
            y_class = round_allocation(sol.x, classes, M)
            x_eff = y_class / classes.w
            seeds_comm = _community_counts(y_class, classes)
        else:
            # community counts spread uniformly over the community's classes
            y_class = None
            y_comm = baseline_allocation(strategy, res.alloc_labels.sizes, M)
            sizes = res.alloc_labels.sizes
            x_eff = y_comm[classes.community] / sizes[classes.community]
            seeds_comm = y_comm
        pred = pred_reducer.value(x_eff)
        pred_H = entropy(normalize_coverage(pred.q), K)

        for rep in range(config.replications):
            rng = _rng(config.seed, _REP, sweep_idx, strat_idx, rep)
            if res.network is None:
                labels_r = (sample_labels(pi, params.n, rng)
                            if res.resample else res.alloc_labels)
                net = generate_network(params, labels_r, rng)
            else:
                labels_r = res.alloc_labels
                net = res.network
            if y_class is not None and not res.resample:
                alloc = SeedAllocation(y=y_class,
                                       s=expand_seeds(y_class, classes, rng))
            else:
                # resampled labels: classes coincide with communities, so
                # community counts transfer to the fresh label draw
                alloc = SeedAllocation(
                    y=seeds_comm,
                    s=_expand_by_community(seeds_comm, labels_r, rng))
            trace = simulate_ic(net, tspec, alloc.s, config.t, rng)
            cov = coverage(trace, labels_r, config.t)
            H_spread, _ = _spread_entropy(trace, labels_r, config.t)
            row = {
                "experiment": config.name,
                "strategy": strategy,
                "lambda": lam,
                "beta_within": b_within,
                "beta_between": b_between,
                "t": config.t,
                "replication": rep,
            }
            for k in range(K):
                row[f"seeds_c{k + 1}"] = int(seeds_comm[k])
            for k in range(K):
                row[f"q_c{k + 1}"] = float(cov.q[k])
            row["m"] = cov.m
            row["entropy"] = H_spread
            row["entropy_cum"] = cov.H
            row["gini"] = gini(cov.q)
            row["pred_m"] = pred.m
            for k in range(K):
                row[f"pred_q_c{k + 1}"] = float(pred.q[k])
            row["pred_entropy"] = pred_H
            rows.append(row)


def _expand_by_community(y_comm: np.ndarray, labels: CommunityLabels,
                         rng: np.random.Generator) -> np.ndarray:
    s = np.zeros(labels.n, dtype=np.int64)
    for k in range(labels.K):
        if y_comm[k] == 0:
            continue
        members = np.where(labels.c == k)[0]
        if y_comm[k] > members.size:
            raise ValueError(f"community {k} has {members.size} nodes, "
                             f"cannot seed {y_comm[k]}")
        s[rng.choice(members, size=int(y_comm[k]), replace=False)] = 1
    return s


def _summarize(rows, K: int):
    """Mean/sd per configuration, in first-seen order."""
    groups: dict[tuple, list] = {}
    for row in rows:
        key = (row["strategy"], row["lambda"], row["beta_within"],
               row["beta_between"], row["t"])
        groups.setdefault(key, []).append(row)
    out = []
    for key, grp in groups.items():
        strategy, lam, bw, bb, t = key
        rec = {
            "strategy": strategy,
            "lambda": lam,
            "beta_within": bw,
            "beta_between": bb,
            "t": t,
            "n_reps": len(grp),
        }
        for col in ("m", "entropy", "entropy_cum"):
            vals = np.array([r[col] for r in grp])
            rec[f"{col}_mean"] = float(vals.mean())
            rec[f"{col}_sd"] = float(vals.std(ddof=1)) if len(grp) > 1 else 0.0
        for k in range(K):
            vals = np.array([r[f"q_c{k + 1}"] for r in grp])
            rec[f"q_c{k + 1}_mean"] = float(vals.mean())
        rec["pred_m"] = grp[0]["pred_m"]
        rec["pred_entropy"] = grp[0]["pred_entropy"]
        # the linearized coverage is unclamped; flag when it leaves [0, 1]
        rec["pred_overflow"] = any(grp[0][f"pred_q_c{k + 1}"] > 1.0
                                   for k in range(K))
        out.append(rec)
    return out


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


def write_results(rows, summary, out_dir, echo_lines) -> None:
    """Write results.csv, summary.csv, and config.echo (deterministic bytes)."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    res_path = os.path.join(out_dir, "results.csv")
    sum_path = os.path.join(out_dir, "summary.csv")
    echo_path = os.path.join(out_dir, "config.echo")
    header = list(rows[0].keys()) if rows else _default_header()
    with open(res_path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[col]) for col in header) + "\n")
    sum_header = list(summary[0].keys()) if summary else ["strategy"]
    with open(sum_path, "w", newline="") as fh:
        fh.write(",".join(sum_header) + "\n")
        for rec in summary:
            fh.write(",".join(_fmt(rec[col]) for col in sum_header) + "\n")
    with open(echo_path, "w") as fh:
        fh.write("\n".join(echo_lines) + "\n")


def _default_header():
    return ["experiment", "strategy", "lambda", "beta_within", "beta_between",
            "t", "replication", "m", "entropy", "entropy_cum", "gini",
            "pred_m", "pred_entropy"]


def _config_echo(config: ExperimentConfig, res: _Resolved) -> list[str]:
    lines = [
        f"name = {config.name}",
        f"t = {config.t}",
        f"t_alloc = {res.t_alloc}",
        f"lambdas = {' '.join(_fmt(x) for x in config.lambdas)}",
        f"betas = {' '.join(f'{_fmt(a)}/{_fmt(b)}' for a, b in config.betas)}",
        f"budget = {res.budget}",
        f"strategies = {' '.join(config.strategies)}",
        f"replications = {config.replications}",
        f"seed = {config.seed}",
        f"resample_labels = {res.resample}",
        f"fixed_sizes = {config.fixed_sizes}",
        f"theta_tol = {_fmt(config.theta_tol)}",
        f"solver = restarts:{config.solver.restarts} gtol:{_fmt(config.solver.gtol)} "
        f"max_iter:{config.solver.max_iter}",
        f"n = {res.params.n}",
        f"K = {res.params.K}",
        f"pi = {' '.join(_fmt(float(x)) for x in res.params.pi)}",
    ]
    for note in res.notes:
        lines.append(f"note = {note}")
    return lines


# ---------------------------------------------------------------------------
# recipe files


def load_config(path, **overrides) -> ExperimentConfig:
    """Read an experiment recipe from an INI-style file.

    Sections: [experiment], one of [model] / [network], [transmission],
    optional [solver].  Keyword overrides replace the parsed values.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    with open(path) as fh:
        parser.read_file(fh)

    kwargs = {}
    if parser.has_section("experiment"):
        sec = parser["experiment"]
        kwargs["name"] = sec.get("name", "experiment")
        kwargs["t"] = sec.getint("t", 1)
        if "t_alloc" in sec:
            kwargs["t_alloc"] = sec.getint("t_alloc")
        if "lambda" in sec:
            kwargs["lambdas"] = tuple(float(x) for x in sec["lambda"].split())
        budget = sec.get("budget", "30").strip()
        kwargs["budget"] = budget if budget == "sqrt" else int(budget)
        if "strategies" in sec:
            kwargs["strategies"] = tuple(sec["strategies"].split())
        kwargs["replications"] = sec.getint("replications", 50)
        kwargs["seed"] = sec.getint("seed", 0)
        kwargs["resample_labels"] = sec.getboolean("resample_labels", True)
        kwargs["fixed_sizes"] = sec.getboolean("fixed_sizes", False)

    if parser.has_section("model"):
        sec = parser["model"]
        n = sec.getint("n")
        K = sec.getint("K")
        pi = np.array([float(x) for x in sec["pi"].split()])
        P_flat = np.array([float(x) for x in sec["P"].split()])
        if P_flat.size != K * K:
            raise ValueError(f"P has {P_flat.size} entries, expected {K * K}")
        kwargs["model"] = ModelSpec(n=n, K=K, pi=pi,
                                    P=P_flat.reshape(K, K),
                                    theta_source=sec.get("theta", "constant"))
    if parser.has_section("network"):
        sec = parser["network"]
        kwargs["network"] = NetworkSource(
            edges_path=sec["edges"],
            labels_path=sec.get("labels"),
            K=sec.getint("k") if "k" in sec else None,
            estimate_labels=sec.getboolean("estimate_labels", True))

    if parser.has_section("transmission"):
        sec = parser["transmission"]
        if "beta" in sec:
            vals = [float(x) for x in sec["beta"].split()]
            kwargs["betas"] = tuple((b, b) for b in vals)
        else:
            within = [float(x) for x in sec["beta_within"].split()]
            between = [float(x) for x in sec["beta_between"].split()]
            kwargs["betas"] = tuple((bw, bb) for bw in within for bb in between)

    solver = SolverOptions()
    if parser.has_section("solver"):
        sec = parser["solver"]
        solver = SolverOptions(
            restarts=sec.getint("restarts", solver.restarts),
            gtol=sec.getfloat("gtol", solver.gtol),
            max_iter=sec.getint("max_iter", solver.max_iter),
            seed=sec.getint("seed", solver.seed))
        if "theta_tol" in sec:
            kwargs["theta_tol"] = sec.getfloat("theta_tol")
    kwargs["solver"] = solver

    kwargs.update(overrides)
    return ExperimentConfig(**kwargs)
