"""Command-line pipelines: synth, build, sample, extend, estimate, truth, qq, eval."""

from __future__ import annotations

import argparse
import json
import sys

from . import estimate as est_mod
from .errors import SamplingError
from .evaluation import (
    ALIGNMENTS,
    EvalSpec,
    default_targets,
    default_weights,
    format_qq,
    format_table,
    qq_curve,
    run_eval,
)
from .model import Population, parse_predicate, parse_weight, read_records, write_records
from .playout import extend_sample, load_sample, sample_by_predicate, sample_cost_limited, save_sample
from .sampler import create_master, load_master, save_master
from .synth import SynthConfig, generate_links, generate_nodes, load_config, true_cdf, true_mass


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2**64)")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _non_negative(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be a non-negative integer")
    return value


def cmd_synth(args) -> None:
    config = load_config(args.config) if args.config else SynthConfig()
    overrides = {"seed": args.seed}
    if args.n_nodes is not None:
        overrides["n_nodes"] = args.n_nodes
    if args.n_links is not None:
        overrides["n_links"] = args.n_links
    if args.spearman:
        a, b, c = (float(v) for v in args.spearman.split(","))
        overrides["spearman"] = ((1.0, a, b), (a, 1.0, c), (b, c, 1.0))
    config = SynthConfig.from_dict({**config.to_dict(), **overrides})
    nodes = generate_nodes(config)
    write_records(args.out, nodes)
    if args.links_out:
        write_records(args.links_out, generate_links(nodes, config.n_links, config.seed))


def cmd_build(args) -> None:
    records = read_records(args.input)
    master = create_master(records, parse_weight(args.weight), args.seed, args.kmax)
    save_master(master, args.out)


def _master_with_records(args):
    records = read_records(args.input)
    return load_master(args.master, records)


def cmd_sample(args) -> None:
    pred = parse_predicate(args.predicate)
    master = _master_with_records(args)
    play = sample_cost_limited if args.cost_limited else sample_by_predicate
    save_sample(play(master, pred, args.k), args.out)


def cmd_extend(args) -> None:
    prev = load_sample(args.sample)
    pred = parse_predicate(args.predicate) if args.predicate else None
    master = _master_with_records(args)
    save_sample(extend_sample(master, prev, args.j, pred), args.out)


def _curve_request(args, parser):
    if args.mass and not args.by:
        parser.error("--mass requires --by")
    if args.by and not args.mass:
        parser.error("--by requires --mass")


def cmd_estimate(args) -> None:
    sample = load_sample(args.sample)
    if args.predicate:
        sample = est_mod.restrict(sample, parse_predicate(args.predicate))
    if args.cdf:
        out = est_mod.format_estimate(est_mod.ordinary_cdf(sample, args.cdf), sample.z, args.format)
    elif args.mass:
        curve = est_mod.mass_distribution(sample, args.mass, args.by)
        out = est_mod.format_estimate(curve, sample.z, args.format)
    elif args.sum:
        value = est_mod.subset_sum(sample, args.sum)
        out = json.dumps({"type": "sum", "variable": args.sum, "z": sample.z, "estimate": value}) + "\n"
    else:
        value = est_mod.subset_count(sample)
        out = json.dumps({"type": "count", "z": sample.z, "estimate": value}) + "\n"
    _emit(out, args.out)


def cmd_truth(args) -> None:
    pop = Population.of(read_records(args.input))
    if args.cdf:
        curve = true_cdf(pop, args.cdf)
    else:
        curve = true_mass(pop, args.mass, args.by)
    _emit(est_mod.format_estimate(curve, 0.0, args.format), args.out)


def cmd_qq(args) -> None:
    pop = Population.of(read_records(args.input))
    sample = load_sample(args.sample)
    curve = est_mod.mass_distribution(sample, args.mass, args.by)
    _emit(format_qq(qq_curve(curve, true_mass(pop, args.mass, args.by), args.align)), args.out)


def cmd_eval(args) -> None:
    pop = Population.of(read_records(args.input))
    weights = (
        tuple(parse_weight(w) for w in args.weights.split(","))
        if args.weights else default_weights(pop.kind)
    )
    if args.targets:
        targets = []
        for t in args.targets.split(","):
            x, _, by = t.partition(":")
            targets.append((x, by or (x if args.table == "mass" else None)))
    else:
        targets = default_targets(pop.kind, args.table == "mass")
    spec = EvalSpec(pop, weights, tuple(targets), args.runs, args.k, args.seed, args.align)
    table = run_eval(spec)
    _emit(format_table(table, args.format), args.out)
    if args.raw_out:
        lines = ["w,X,X',run,ks"]
        for c in table.cells:
            lines += [f"{c.weight},{c.target},{c.by or ''},{i},{v!r}" for i, v in enumerate(c.values, 1)]
        _emit("\n".join(lines) + "\n", args.raw_out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="prisample", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic node (and link) population")
    s.add_argument("--seed", type=_seed, required=True)
    s.add_argument("--out", required=True, help="node CSV")
    s.add_argument("--links-out", help="link CSV")
    s.add_argument("--config", help="JSON SynthConfig")
    s.add_argument("--n-nodes", type=_non_negative)
    s.add_argument("--n-links", type=_non_negative)
    s.add_argument("--spearman", help="targets r(fo,fr),r(fo,ac),r(fr,ac)")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("build", help="build and persist a master sample")
    s.add_argument("--input", required=True)
    s.add_argument("--weight", required=True, help="uniform|feature:NAME|ratio:NUM/DEN")
    s.add_argument("--seed", type=_seed, required=True)
    s.add_argument("--kmax", type=_non_negative)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_build)

    for name, helptext in (("sample", "play out a sample"), ("extend", "extend a sample")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--master", required=True)
        s.add_argument("--input", required=True, help="records CSV the master was built from")
        s.add_argument("--out", required=True)
        if name == "sample":
            s.add_argument("--predicate", default="true")
            s.add_argument("--k", type=_positive, required=True)
            s.add_argument("--cost-limited", action="store_true",
                           help="scan only the first k master entries")
            s.set_defaults(func=cmd_sample)
        else:
            s.add_argument("--sample", required=True)
            s.add_argument("--j", type=_positive, required=True)
            s.add_argument("--predicate", help="must equal the sample's predicate")
            s.set_defaults(func=cmd_extend)

    s = sub.add_parser("estimate", help="HT estimates from a sample")
    s.add_argument("--sample", required=True)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--cdf", metavar="NAME")
    g.add_argument("--mass", metavar="NAME")
    g.add_argument("--sum", metavar="NAME")
    g.add_argument("--count", action="store_true")
    s.add_argument("--by", metavar="NAME")
    s.add_argument("--predicate", help="further restriction")
    s.add_argument("--format", choices=("text", "rows"), default="text")
    s.add_argument("--out")
    s.set_defaults(func=cmd_estimate, check=_curve_request)

    s = sub.add_parser("truth", help="exact population curves")
    s.add_argument("--input", required=True)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--cdf", metavar="NAME")
    g.add_argument("--mass", metavar="NAME")
    s.add_argument("--by", metavar="NAME")
    s.add_argument("--format", choices=("text", "rows"), default="text")
    s.add_argument("--out")
    s.set_defaults(func=cmd_truth, check=_curve_request)

    s = sub.add_parser("qq", help="estimated vs true mass curve pairs")
    s.add_argument("--input", required=True)
    s.add_argument("--sample", required=True)
    s.add_argument("--mass", metavar="NAME", required=True)
    s.add_argument("--by", metavar="NAME", required=True)
    s.add_argument("--align", choices=ALIGNMENTS, default="value")
    s.add_argument("--out")
    s.set_defaults(func=cmd_qq)

    s = sub.add_parser("eval", help="median KS tables over repeated master samples")
    s.add_argument("--input", required=True)
    s.add_argument("--seed", type=_seed, required=True, help="run r uses seed + r")
    s.add_argument("--runs", type=_positive, default=100)
    s.add_argument("--k", type=int, default=1000)
    s.add_argument("--table", choices=("ordinary", "mass"), default="mass")
    s.add_argument("--weights", help="comma-separated weight specs")
    s.add_argument("--targets", help="comma-separated X or X:X' items")
    s.add_argument("--align", choices=ALIGNMENTS, default="value")
    s.add_argument("--format", choices=("text", "rows"), default="text")
    s.add_argument("--out")
    s.add_argument("--raw-out", help="per-run KS values")
    s.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    check = getattr(args, "check", None)
    if check:
        check(args, parser)
    try:
        args.func(args)
    except (SamplingError, OSError, ValueError, KeyError) as exc:
        msg = str(exc).replace("\n", " ")
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
