"""Command-line interface: generate / detect / allocate / simulate / experiment."""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from .estimate import estimate_labels, estimate_params
from .experiment import (load_config, run_experiment, seed_budget,
                         write_results)
from .model import generate_network, sample_labels
from .netio import extract_lcc, read_edge_list, write_labels_csv
from .objective import ObjectiveConfig, reduce_objective
from .optimizer import collapse_classes, round_allocation, solve_relaxed
from .spread import TransmissionSpec, build_psi, simulate_ic, trace_to_csv


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairspread",
        description="Fairness-aware seed allocation and spread experiments")
    sub = parser.add_subparsers(required=True)

    p = sub.add_parser("generate", help="sample a synthetic network to an edge list")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("detect", help="estimate community labels from an edge list")
    p.add_argument("--input", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("allocate", help="compute a seed allocation")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    _add_sweep_flags(p)
    p.set_defaults(func=_cmd_allocate)

    p = sub.add_parser("simulate", help="run one cascade given seeds")
    p.add_argument("--input", required=True, help="edge list path")
    p.add_argument("--labels", required=True, help="node,label csv")
    p.add_argument("--seeds", required=True, help="file of seed node ids")
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--beta-within", type=float, default=None)
    p.add_argument("--beta-between", type=float, default=None)
    p.add_argument("--t", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("experiment", help="run a full replicated recipe")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    _add_sweep_flags(p)
    p.set_defaults(func=_cmd_experiment)
    return parser


def _add_sweep_flags(p) -> None:
    p.add_argument("--strategy", default=None, help="space/comma separated list")
    p.add_argument("--lambda", dest="lambdas", default=None,
                   help="space/comma separated list")
    p.add_argument("--beta-within", default=None)
    p.add_argument("--beta-between", default=None)
    p.add_argument("--t", type=int, default=None)
    p.add_argument("--budget", default=None, help="integer or 'sqrt'")


def _overrides(args) -> dict:
    out = {}
    if getattr(args, "seed", None) is not None:
        out["seed"] = args.seed
    if getattr(args, "strategy", None):
        out["strategies"] = tuple(args.strategy.replace(",", " ").split())
    if getattr(args, "lambdas", None):
        out["lambdas"] = tuple(float(x) for x in
                               args.lambdas.replace(",", " ").split())
    bw = getattr(args, "beta_within", None)
    bb = getattr(args, "beta_between", None)
    if bw or bb:
        within = [float(x) for x in str(bw or bb).replace(",", " ").split()]
        between = [float(x) for x in str(bb or bw).replace(",", " ").split()]
        out["betas"] = tuple((a, b) for a in within for b in between)
    if getattr(args, "t", None) is not None:
        out["t"] = args.t
    if getattr(args, "budget", None):
        out["budget"] = (args.budget if args.budget == "sqrt"
                         else int(args.budget))
    return out


def _cmd_generate(args) -> int:
    config = load_config(args.config, **_overrides(args))
    if config.model is None:
        raise ValueError("generate needs a [model] section")
    spec = config.model
    rng = np.random.default_rng(config.seed)
    labels = sample_labels(spec.pi, spec.n, rng)
    params = spec.materialize(labels, rng)
    network = generate_network(params, labels, rng)
    os.makedirs(args.out, exist_ok=True)
    edge_path = os.path.join(args.out, "edges.txt")
    with open(edge_path, "w") as fh:
        for i, j in network.edges:
            fh.write(f"{i} {j}\n")
    write_labels_csv(os.path.join(args.out, "labels.csv"), network, labels)
    print(f"wrote {network.m} edges on {network.n} nodes to {args.out}")
    return 0


def _cmd_detect(args) -> int:
    network = extract_lcc(read_edge_list(args.input))
    labels = estimate_labels(network, args.k, np.random.default_rng(args.seed))
    write_labels_csv(args.out, network, labels)
    print(f"labeled {network.n} nodes into {args.k} communities -> {args.out}")
    return 0


def _cmd_allocate(args) -> int:
    config = load_config(args.config, **_overrides(args))
    lam = config.lambdas[0]
    b_within, b_between = config.betas[0]
    if config.model is not None:
        spec = config.model
        rng = np.random.default_rng(config.seed)
        labels = sample_labels(spec.pi, spec.n, rng)
        params = spec.materialize(labels, rng)
    else:
        src = config.network
        network = extract_lcc(read_edge_list(src.edges_path, src.labels_path))
        if src.estimate_labels or network.labels is None:
            K = src.K if src.K is not None else network.labels.K
            labels = estimate_labels(network, K,
                                     np.random.default_rng(config.seed))
        else:
            labels = network.labels
        params = estimate_params(network, labels).params
    n = params.n
    M = seed_budget(n, config.budget)
    tspec = (TransmissionSpec.scalar(b_within) if b_within == b_between
             else TransmissionSpec.blockwise(b_within, b_between, params.K))
    op = build_psi(params, labels, tspec)
    classes = collapse_classes(params, labels, config.theta_tol)
    t_alloc = config.t if config.t_alloc is None else config.t_alloc
    reducer = reduce_objective(op, labels, params.pi, classes.V,
                               ObjectiveConfig(lam=lam, t=t_alloc, budget=M))
    sol = solve_relaxed(lambda x: reducer.value(x).f, reducer.gradient,
                        classes, M, options=config.solver)
    y = round_allocation(sol.x, classes, M)
    per_comm = np.zeros(params.K, dtype=np.int64)
    np.add.at(per_comm, classes.community, y)
    print(f"objective {sol.value:.6f} after {sol.iterations} iterations "
          f"(pg norm {sol.pg_norm:.2e})")
    print("seeds per community:",
          " ".join(f"c{k + 1}={per_comm[k]}" for k in range(params.K)))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["class", "community", "theta", "size", "x", "y"])
            for j in range(classes.v):
                writer.writerow([j, int(classes.community[j]),
                                 format(classes.theta[j], ".10g"),
                                 int(classes.w[j]),
                                 format(sol.x[j], ".10g"), int(y[j])])
    return 0


def _cmd_simulate(args) -> int:
    network = read_edge_list(args.input, args.labels)
    if network.labels is None:
        raise ValueError("simulate needs labels")
    if args.beta is not None:
        tspec = TransmissionSpec.scalar(args.beta)
    elif args.beta_within is not None and args.beta_between is not None:
        tspec = TransmissionSpec.blockwise(args.beta_within, args.beta_between,
                                           network.labels.K)
    else:
        raise ValueError("give --beta or both --beta-within/--beta-between")
    id_index = {str(v): i for i, v in enumerate(network.node_ids)}
    s = np.zeros(network.n, dtype=np.int64)
    with open(args.seeds) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if line not in id_index:
                raise ValueError(f"{args.seeds}:{lineno}: unknown node {line!r}")
            s[id_index[line]] = 1
    trace = simulate_ic(network, tspec, s, args.t,
                        np.random.default_rng(args.seed))
    trace_to_csv(trace, network.labels, args.out)
    active = int(trace.active_by(args.t).sum())
    print(f"{active}/{network.n} nodes active after {args.t} steps -> {args.out}")
    return 0


def _cmd_experiment(args) -> int:
    config = load_config(args.config, **_overrides(args))
    rows, summary, echo = run_experiment(config)
    write_results(rows, summary, args.out, echo)
    print(f"wrote {len(rows)} result rows to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
