"""Median KS tables on the default synthetic population.

Prints the node ordinary table, the node mass table and the link fanout
table.  ``--runs 100`` gives the full-size replication; the default of 20
matches the acceptance suite.

    python3 scripts/replicate_tables.py --runs 20 --align value
"""

import argparse
import time

from prisample.evaluation import EvalSpec, LINK_WEIGHTS, NODE_WEIGHTS, default_targets, format_table, run_eval
from prisample.model import Kind
from prisample.synth import SynthConfig, generate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0, help="synthetic population seed")
    ap.add_argument("--n", type=int, default=100_000, help="nodes and links")
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--k", type=int, default=1000)
    ap.add_argument("--align", choices=("value", "quantile"), default="value")
    ap.add_argument("--format", choices=("text", "rows"), default="text")
    args = ap.parse_args()

    t0 = time.perf_counter()
    nodes, links = generate(SynthConfig(n_nodes=args.n, n_links=args.n, seed=args.seed))
    print(f"# population: {len(nodes)} nodes, {len(links)} links ({time.perf_counter() - t0:.1f}s)")

    jobs = [
        ("node ordinary distribution", nodes, NODE_WEIGHTS, default_targets(Kind.NODE, False)),
        ("node mass distribution", nodes, NODE_WEIGHTS, default_targets(Kind.NODE, True)),
        ("link fanout mass distribution", links, LINK_WEIGHTS, default_targets(Kind.LINK, True)),
    ]
    for title, pop, weights, targets in jobs:
        t0 = time.perf_counter()
        spec = EvalSpec(pop, weights, targets, runs=args.runs, k=args.k, base_seed=args.seed, align=args.align)
        table = run_eval(spec)
        print(f"\n## {title} (k={args.k}, align={args.align}, {time.perf_counter() - t0:.1f}s)")
        print(format_table(table, args.format), end="")


if __name__ == "__main__":
    main()
