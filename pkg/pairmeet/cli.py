"""Command-line entry point: ``pairmeet <subcommand> [options]``."""
import argparse
import json
import sys

import pandas as pd

from pairmeet import graphs
from pairmeet.graphs import ErParams
from pairmeet.graphs import er_sample
from pairmeet.graphs import read_graph
from pairmeet.graphs import format_graph
from pairmeet.graphs import degree_stats
from pairmeet.graphs import codegree_stats
from pairmeet.graphs import adjacency_sigma2
from pairmeet.markov import TransitionMatrix
from pairmeet.markov import srw_from_graph
from pairmeet.markov import stationary
from pairmeet.method import MethodFactory
from pairmeet.meeting import exact_meeting_times
from pairmeet.meeting import svd_killed
from pairmeet.pairspace import dense_threshold
from pairmeet.perturb import nu_from_eps
from pairmeet.perturb import perturbation_report
from pairmeet.experiment import ExperimentConfig
from pairmeet.experiment import run_er_experiment
from pairmeet.experiment import summarize_records
from pairmeet.experiment import concentration_study
from pairmeet.experiment import rank_k_error_curve
from pairmeet.experiment import write_records
from pairmeet.experiment import write_summaries
from pairmeet.experiment import write_plot_data
from pairmeet.logging import use_logging
from pairmeet.logging import finish_logging
from pairmeet.logging import write_log
from pairmeet.exception import PairMeetError

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_SEED_ERRORS = 2

def _star(n: int):
    # n counts vertices here, as for the other families.
    return graphs.star_graph(n - 1)


FAMILIES = {
    "complete": graphs.complete_graph,
    "cycle": graphs.cycle_graph,
    "path": graphs.path_graph,
    "star": _star,
}


def _common_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0,
                        help="Master seed (default: 0).")
    common.add_argument("--out", type=str, default=None,
                        help="Output path; standard output if omitted.")
    common.add_argument("--format", dest="fmt", choices=["json", "csv"],
                        default="json")
    common.add_argument("--log-file", type=str, default=None)
    common.add_argument("--verbose", "-v", action="count", default=0,
                        help="-v for progress, -vv for numeric diagnostics.")
    common.add_argument("--quiet", "-q", action="store_true",
                        help="No log output on the terminal.")
    common.add_argument("--config", type=str, default=None,
                        help="YAML file with experiment settings.")
    return common


def _add_graph_source(parser):
    source = parser.add_argument_group("graph source")
    source.add_argument("--graph", type=str, default=None,
                        help="Graph in the text edge-list format.")
    source.add_argument("--transition", type=str, default=None,
                        help="Transition matrix as CSV.")
    source.add_argument("--family", choices=sorted(FAMILIES), default=None)
    source.add_argument("--n", type=int, default=None,
                        help="Number of vertices.")
    source.add_argument("--beta", type=float, default=None)
    source.add_argument("--c", type=float, default=None)
    source.add_argument("--p", type=float, default=None)
    parser.add_argument("--lazy", action="store_true",
                        help="Use the lazy chain (I + P) / 2.")


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="pairmeet",
        description="Meeting times of two independent random walks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sample = sub.add_parser("sample", parents=[common],
                              help="Sample an Erdős–Rényi graph.")
    p_sample.add_argument("--n", type=int, required=True)
    p_sample.add_argument("--beta", type=float, default=None)
    p_sample.add_argument("--c", type=float, default=None)
    p_sample.add_argument("--p", type=float, default=None)

    p_meet = sub.add_parser("meet", parents=[common],
                            help="Meeting time from stationarity.")
    _add_graph_source(p_meet)
    p_meet.add_argument("--method", choices=["exact", "spectral", "rank-k",
                                             "mc"], default="exact")
    p_meet.add_argument("--k", type=int, default=1)
    p_meet.add_argument("--replicas", type=int, default=100000)
    p_meet.add_argument("--cap", type=int, default=None)
    p_meet.add_argument("--workers", type=int, default=None)
    p_meet.add_argument("--plot-data", type=str, default=None,
                        help="Write k vs rank-k error to this file.")
    p_meet.add_argument("--matrix-out", type=str, default=None,
                        help="Write the meeting-time matrix M as CSV.")
    p_meet.add_argument("--svd-out", type=str, default=None,
                        help="Write the singular values of L_kill as CSV.")

    p_perturb = sub.add_parser("perturb", parents=[common],
                               help="Perturbation report of L_kill.")
    _add_graph_source(p_perturb)
    p_perturb.add_argument("--epsilon1", type=float, default=None)
    p_perturb.add_argument("--bounds-only", action="store_true",
                           help="Use norm bounds instead of exact blocks.")

    p_sweep = sub.add_parser("er-sweep", parents=[common],
                             help="Erdős–Rényi meeting-time sweep.")
    p_sweep.add_argument("--sizes", type=int, nargs="+", default=None)
    p_sweep.add_argument("--beta", type=float, default=None)
    p_sweep.add_argument("--c", type=float, default=None)
    p_sweep.add_argument("--p", type=float, default=None)
    p_sweep.add_argument("--seeds", type=int, default=None)
    p_sweep.add_argument("--epsilon", type=float, default=None)
    p_sweep.add_argument("--epsilon1", type=float, default=None)
    p_sweep.add_argument("--method", choices=["exact", "spectral", "rank-k",
                                              "mc"], default=None)
    p_sweep.add_argument("--k", type=int, default=None)
    p_sweep.add_argument("--replicas", type=int, default=None)
    p_sweep.add_argument("--lazy", action="store_true", default=None)
    p_sweep.add_argument("--perturb", action="store_true", default=None)
    p_sweep.add_argument("--workers", type=int, default=None)
    p_sweep.add_argument("--plot-data", type=str, default=None,
                         help="Write n vs mean t/n to this file.")

    p_conc = sub.add_parser("concentration", parents=[common],
                            help="Concentration event frequencies.")
    p_conc.add_argument("--n", type=int, required=True)
    p_conc.add_argument("--p", type=float, required=True)
    p_conc.add_argument("--seeds", type=int, default=30)
    p_conc.add_argument("--nu1", type=float, default=None)
    p_conc.add_argument("--nu2", type=float, default=None)
    p_conc.add_argument("--epsilon1", type=float, default=None,
                        help="Derive nu1 = nu2 from eps1.")
    return parser


def _emit(text: str, fpath: str):
    if fpath:
        with open(fpath, "wt") as fout:
            fout.write(text)
    else:
        sys.stdout.write(text)


def _emit_json(obj, fpath):
    _emit(json.dumps(obj, indent=2) + "\n", fpath)


def _flat_row(obj: dict) -> dict:
    """One CSV row; nested values are JSON-encoded."""
    return {key: json.dumps(val) if isinstance(val, (dict, list)) else val
            for key, val in obj.items()}


def _emit_table(rows, fpath):
    _emit(pd.DataFrame(rows).to_csv(index=False), fpath)


def _emit_report(obj: dict, fpath, fmt: str):
    if fmt == "csv":
        _emit_table([_flat_row(obj)], fpath)
    else:
        _emit_json(obj, fpath)


def _load_chain(args):
    """(graph or None, d or None, TransitionMatrix) from the source flags."""
    g, d = None, None
    if args.transition:
        P = TransitionMatrix.from_csv(args.transition)
    else:
        if args.graph:
            g = read_graph(args.graph)
        elif args.family:
            g = FAMILIES[args.family](args.n)
        else:
            params = ErParams(args.n, beta=args.beta, c=args.c, p=args.p)
            g = er_sample(params, args.seed)
            d = params.d
        P = srw_from_graph(g)
        if d is None:
            d = float(g.degrees.mean())

    if args.lazy:
        P = P.lazy()
    return g, d, P


def cmd_sample(args) -> int:
    params = ErParams(args.n, beta=args.beta, c=args.c, p=args.p)
    g = er_sample(params, args.seed)
    write_log("%s connected=%s"%(g, g.is_connected()))
    if params.d > 0 and not g.isolated_vertices():
        write_log("R1=%.4g R2=%.4g sigma2=%.4g"%(
            degree_stats(g, params.d).R1,
            codegree_stats(g, params.d).R2,
            adjacency_sigma2(g, params.d)))
    _emit(format_graph(g), args.out)
    return EXIT_OK


def cmd_meet(args) -> int:
    _, _, P = _load_chain(args)
    pi = stationary(P)
    method = MethodFactory.create(args.method,
                                  k=args.k,
                                  replicas=args.replicas,
                                  seed=args.seed,
                                  cap=args.cap,
                                  workers=args.workers)
    result = method.compute(P, pi)
    out = {"n": P.n}
    out.update(result.to_dict())
    out["tmeet_over_n"] = result.tmeet_pi / P.n
    _emit_report(out, args.out, args.fmt)

    if args.plot_data:
        write_plot_data(rank_k_error_curve(P, pi), args.plot_data)
    if args.matrix_out:
        exact_meeting_times(P).to_csv(args.matrix_out)
    if args.svd_out:
        if P.n <= dense_threshold():
            svd = svd_killed(P)
        else:
            # The smallest k + 1 triplets, enough for a rank-k bound.
            svd = svd_killed(P, k_smallest=min(max(args.k + 1, 2), P.n**2))
        svd.to_csv(args.svd_out)
    return EXIT_OK


def cmd_perturb(args) -> int:
    g, d, P = _load_chain(args)
    pi = stationary(P)
    report = perturbation_report(P,
                                 pi,
                                 graph=g,
                                 d=d,
                                 epsilon1=args.epsilon1,
                                 exact=not args.bounds_only)
    _emit_report(report, args.out, args.fmt)
    return EXIT_OK


def cmd_er_sweep(args) -> int:
    overrides = {"sizes": args.sizes,
                 "beta": args.beta,
                 "c": args.c,
                 "p": args.p,
                 "num_seeds": args.seeds,
                 "master_seed": args.seed,
                 "epsilon": args.epsilon,
                 "epsilon1": args.epsilon1,
                 "method": args.method,
                 "k": args.k,
                 "replicas": args.replicas,
                 "lazy": args.lazy,
                 "perturb": args.perturb,
                 "output": args.out,
                 "fmt": args.fmt,
                 "workers": args.workers}
    if args.config:
        config = ExperimentConfig.from_yaml(args.config, **overrides)
    elif args.sizes is None:
        raise SystemExit("er-sweep: give --sizes or --config")
    else:
        config = ExperimentConfig(**{k: v for k, v in overrides.items()
                                     if v is not None})

    records = run_er_experiment(config)
    summaries = summarize_records(records, config.epsilon, config.epsilon1)

    if config.output:
        write_records(records, config.output, config.fmt)
        stem = config.output.rsplit(".", 1)[0]
        write_summaries(summaries,
                        "%s_summary.%s"%(stem, config.fmt),
                        config.fmt)
    elif config.fmt == "csv":
        _emit_table([r.to_row() for r in records], None)
        sys.stdout.write("\n")
        _emit_table(summaries, None)
    else:
        for record in records:
            sys.stdout.write(json.dumps(record.to_dict()) + "\n")
        for summary in summaries:
            sys.stdout.write(json.dumps(summary) + "\n")

    if args.plot_data:
        points = [(s["n"], s["mean_tmeet_over_n"]) for s in summaries
                  if s["mean_tmeet_over_n"] is not None]
        write_plot_data(points, args.plot_data)

    num_errors = sum(r.error is not None for r in records)
    if num_errors:
        write_log("%d seed(s) ended with an error."%(num_errors), "warning")
        return EXIT_SEED_ERRORS
    return EXIT_OK


def cmd_concentration(args) -> int:
    nu1, nu2 = args.nu1, args.nu2
    if args.epsilon1 is not None:
        nu1, nu2 = nu_from_eps(args.epsilon1)
    if nu1 is None or nu2 is None:
        raise SystemExit("concentration: give --nu1 and --nu2, or --epsilon1")

    report = concentration_study(args.n,
                                 args.p,
                                 args.seeds,
                                 nu1,
                                 nu2,
                                 master_seed=args.seed)
    if args.fmt == "csv":
        # One row per event; the study parameters repeat on every row.
        study = {key: report[key] for key in ("n", "p", "seeds",
                                               "master_seed", "nu1", "nu2")}
        _emit_table([dict(study, **event) for event in report["events"]],
                    args.out)
    else:
        _emit_json(report, args.out)
    return EXIT_OK


COMMANDS = {
    "sample": cmd_sample,
    "meet": cmd_meet,
    "perturb": cmd_perturb,
    "er-sweep": cmd_er_sweep,
    "concentration": cmd_concentration,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    level = {0: "warning", 1: "info"}.get(args.verbose, "debug")
    use_logging(stdout=not args.quiet,
                fout=args.log_file is not None,
                fpath=args.log_file,
                level=level)
    try:
        return COMMANDS[args.command](args)
    except PairMeetError as e:
        sys.stderr.write("pairmeet %s: %s\n"%(args.command, e.message))
        return EXIT_FAILURE
    finally:
        finish_logging()


if __name__ == "__main__":
    sys.exit(main())
