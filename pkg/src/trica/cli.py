"""Command line entry point: ``trica <command> ...``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .classify import PipelineConfig
from .experiment import (ExperimentConfig, as_binary_task, load_network_ref, parse_config,
                         results_csv, run_experiment, run_method)
from .factorization import FitConfig, fit_joint, select_k
from .graph import split_labeled
from .ingest import LinqsDataset, read_linqs, write_network
from .matrix_io import load_propagation, save_factorization, save_propagation
from .propagation import AffinityConfig, network_propagation

log = logging.getLogger("trica")

RULES = {"printed": "as_printed", "standard": "standard_tri_nmf"}


def cmd_ingest(args) -> int:
    network, stats = read_linqs(LinqsDataset(Path(args.content), Path(args.cites)))
    write_network(network, args.out)
    print(f"nodes={network.n} features={network.n_features} classes={len(network.label_set)} "
          f"raw_links={stats.raw_links} edges={stats.edges} dangling={stats.dangling} "
          f"self_links={stats.self_links}")
    return 0


def cmd_propagate(args) -> int:
    network = load_network_ref(args.network)
    config = AffinityConfig(args.kernel, args.sigma, args.alpha, args.squared_norm)
    pm = network_propagation(network, config, method=args.method)
    save_propagation(args.out, pm)
    print(f"n={pm.n} alpha={pm.alpha} min_entry={pm.p.min():.3g}")
    return 0


def _fit_config(args, k: int = 2) -> FitConfig:
    return FitConfig(k=k, beta=args.beta, max_sweeps=args.max_sweeps, rel_tol=args.rel_tol,
                     seed=args.seed, rule_set=RULES[args.rules], normalize=args.normalize)


def cmd_factorize(args) -> int:
    P_s, P_t = load_propagation(args.ps).p, load_propagation(args.pt).p
    state = fit_joint(P_s, P_t, _fit_config(args, args.k))
    save_factorization(args.out, state)
    h = state.objective_history
    print(f"sweeps={len(h) - 1} J_initial={h[0]:.6g} J_final={h[-1]:.6g} "
          f"increases={len(state.increases)} converged={state.converged}")
    return 0


def cmd_select_k(args) -> int:
    P_s, P_t = load_propagation(args.ps).p, load_propagation(args.pt).p
    target = as_binary_task(load_network_ref(args.target))
    if target.n != P_t.shape[0]:
        raise SystemExit(f"target has {target.n} nodes but P_t is {P_t.shape[0]} x {P_t.shape[0]}")
    split = split_labeled(target, args.labeled_frac, args.seed)
    k_star, scores = select_k(P_s, P_t, split.labeled, target.label_index(), args.kmax,
                              _fit_config(args), step=args.step, mode=args.mode)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["k", "quality_score"])
        writer.writerows((k, repr(q)) for k, q in scores)
    print(f"k*={k_star}")
    return 0


def cmd_train(args) -> int:
    target = as_binary_task(load_network_ref(args.target))
    source = load_network_ref(args.source) if args.source else None
    split = split_labeled(target, args.labeled_frac, args.seed)
    base = PipelineConfig()
    config = replace(
        base,
        affinity=AffinityConfig(args.kernel, args.sigma, args.alpha),
        fit=replace(_fit_config(args), k=2),
        k=None if args.k == "auto" else int(args.k),
        k_max=args.kmax, k_step=args.step,
        ica=replace(base.ica, seed=args.seed),
    )
    outcome = run_method(args.method, source, target, split, config)
    mask = split.labeled_mask(target.n)
    result = outcome.result
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["node_id", "predicted", "probability", "was_labeled"])
        for i, node in enumerate(target.node_ids):
            writer.writerow([node, result.label_set[result.predicted[i]], repr(float(result.probabilities[i])),
                             str(bool(mask[i])).lower()])
    print(f"method={args.method} k={outcome.k} passes={result.passes} converged={result.converged}")
    return 0


def cmd_experiment(args) -> int:
    config: ExperimentConfig = parse_config(Path(args.config).read_text())
    results = run_experiment(config)
    text = results_csv(results, config.source or "", config.target)
    Path(args.out).write_text(text)
    failed = sum(r.failed for r in results)
    print(f"cells={len(results)} failed={failed}")
    return 1 if failed else 0


def _add_fit_args(p):
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rules", choices=sorted(RULES), default="printed")
    p.add_argument("--normalize", choices=["none", "rows", "columns"], default=None)
    p.add_argument("--max-sweeps", type=int, default=200)
    p.add_argument("--rel-tol", type=float, default=1e-6)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trica", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="convert LINQS .content/.cites to a network file")
    p.add_argument("--content", required=True)
    p.add_argument("--cites", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("propagate", help="write the label propagation matrix of a network")
    p.add_argument("--network", required=True)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--kernel", choices=["binary", "gaussian"], default="binary")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--squared-norm", action="store_true")
    p.add_argument("--method", choices=["solve", "neumann"], default="solve")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("factorize", help="joint tri-factorization of two propagation matrices")
    p.add_argument("--ps", required=True)
    p.add_argument("--pt", required=True)
    p.add_argument("--k", type=int, required=True)
    _add_fit_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_factorize)

    p = sub.add_parser("select-k", help="quality score over a k grid")
    p.add_argument("--ps", required=True)
    p.add_argument("--pt", required=True)
    p.add_argument("--target", required=True, help="target network (labels for the quality score)")
    p.add_argument("--labeled-frac", type=float, default=0.5)
    p.add_argument("--kmax", type=int, required=True)
    p.add_argument("--step", type=int, default=10)
    p.add_argument("--mode", choices=["max", "first_local_max"], default="max")
    _add_fit_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_select_k)

    p = sub.add_parser("train", help="classify a target network with ica, pica or trica")
    p.add_argument("--source")
    p.add_argument("--target", required=True)
    p.add_argument("--labeled-frac", type=float, required=True)
    p.add_argument("--method", choices=["ica", "pica", "trica"], default="trica")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--kernel", choices=["binary", "gaussian"], default="binary")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--k", default="auto")
    p.add_argument("--kmax", type=int, default=20)
    p.add_argument("--step", type=int, default=10)
    _add_fit_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("experiment", help="run a configured sweep and write results CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "train" and args.method == "trica" and not args.source:
        print("trica needs --source", file=sys.stderr)
        return 2
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
