"""Command-line entry point: ``uncertnet <command> [options]``.

Every command writes its files, then prints a short summary (or the full
result document with ``--json``, or nothing with ``--quiet``).  Failures exit
with status 2 and print ``{"error": <category>, "message": ...}`` to stderr.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import io
from .benchmarks import community_benchmark, recovery_benchmark
from .em import EMOptions, em_fit, posterior_at
from .errors import UncertNetError
from .evaluation import DEFAULT_TAUS, aligned_accuracy, edge_posterior, roc
from .synth import BlockParams, NoiseRequest, generate_benchmark

EXIT_ERROR = 2


class UsageError(Exception):
    category = "usage"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _fresh_seed():
    # drawn once and echoed so that the run can be repeated exactly
    return int(np.random.SeedSequence().entropy % (2 ** 63))


def _tau_list(text):
    try:
        taus = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad tau list {text!r}") from None
    if not taus:
        raise argparse.ArgumentTypeError("tau list is empty")
    return taus


def _positive(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return value


def _add_fit_options(p, restarts=10):
    p.add_argument("--k", type=int, default=2, help="number of groups")
    p.add_argument("--mode", choices=("plain", "dc"), default="plain")
    p.add_argument("--restarts", type=int, default=restarts)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--tol", type=_positive, default=1e-6, help="EM parameter-change tolerance")
    p.add_argument("--tol-bp", type=_positive, default=1e-6)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--max-sweeps", type=int, default=300)
    p.add_argument("--damping", type=float, default=0.0)
    p.add_argument("--threads", type=int, default=None,
                   help="restart workers (default from UNCERTNET_THREADS, else 1)")


def _options(args):
    return EMOptions(restarts=args.restarts, seed=args.seed, tol_em=args.tol, tol_bp=args.tol_bp,
                     max_iters=args.max_iters, max_sweeps=args.max_sweeps, damping=args.damping,
                     threads=args.threads)


def _config(args):
    skip = {"func", "json", "quiet", "no_timestamp", "config", "verbose"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    out = common.add_argument_group("output")
    out.add_argument("--json", action="store_true", help="print the result document")
    out.add_argument("--quiet", action="store_true", help="print nothing on success")
    out.add_argument("--no-timestamp", action="store_true",
                     help="omit the timestamp so repeated runs give identical files")
    out.add_argument("--config", help="JSON file of option defaults (flags still win)")
    out.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="uncertnet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="sample a planted instance")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--omega-in", type=float, required=True)
    p.add_argument("--omega-out", type=float, required=True)
    p.add_argument("--b1", type=float, default=1.0)
    p.add_argument("--a1", type=float, default=None)
    p.add_argument("--c", type=float, default=None, help="non-edge nonzero fraction")
    p.add_argument("--noiseless", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--prefix", default="instance")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("fit", parents=[common], help="fit groups to an edge-probability file")
    p.add_argument("network")
    _add_fit_options(p)
    p.add_argument("--output", default="fit.json", help="result document path")
    p.add_argument("--partition", default="partition.tsv", help="hard partition path")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("recover", parents=[common], help="posterior edge probabilities")
    p.add_argument("network")
    _add_fit_options(p)
    p.add_argument("--fit", dest="fit_doc", default=None,
                   help="reuse the parameters of an earlier fit document")
    p.add_argument("--scores", default="scores.tsv")
    p.add_argument("--output", default="recover.json")
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("roc", parents=[common], help="ROC curve of scored pairs")
    p.add_argument("--scores", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--curve", default="roc.csv")
    p.set_defaults(func=cmd_roc)

    p = sub.add_parser("accuracy", parents=[common], help="aligned partition accuracy")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.set_defaults(func=cmd_accuracy)

    p = sub.add_parser("benchmark-fig2a", parents=[common],
                       help="fit versus thresholding on noisy planted instances")
    p.add_argument("--instances", type=int, default=5)
    p.add_argument("--n", type=int, default=4000)
    p.add_argument("--omega-in", type=float, default=0.02)
    p.add_argument("--omega-out", type=float, default=0.014)
    p.add_argument("--a1", type=float, default=1.4)
    p.add_argument("--b1", type=float, default=2.0)
    p.add_argument("--taus", type=_tau_list, default=list(DEFAULT_TAUS))
    _add_fit_options(p, restarts=3)
    p.add_argument("--table", default="fig2a.csv")
    p.set_defaults(func=cmd_benchmark_fig2a)

    p = sub.add_parser("benchmark-fig4", parents=[common], help="edge-recovery AUC by method")
    p.add_argument("--instances", type=int, default=5)
    p.add_argument("--n", type=int, default=4000)
    p.add_argument("--omega-in", type=float, default=0.05)
    p.add_argument("--omega-out", type=float, default=0.001)
    p.add_argument("--b1", type=float, default=4.0)
    p.add_argument("--c", type=float, default=None, help="default 1/(4n)")
    _add_fit_options(p, restarts=3)
    p.add_argument("--table", default="fig4.csv")
    p.set_defaults(func=cmd_benchmark_fig4)
    parser.commands = sub.choices
    return parser


def _emit(args, doc, summary):
    if args.quiet:
        return
    if args.json:
        sys.stdout.write(io.dump_document(doc))
    else:
        print(summary)


def _document(args, **sections):
    return io.result_document(args.command, _config(args), timestamp=not args.no_timestamp,
                              **sections)


def _out(args, name):
    return os.path.join(args.out_dir, f"{args.prefix}.{name}")


def cmd_generate(args):
    params = BlockParams.planted(args.k, args.omega_in, args.omega_out)
    request = NoiseRequest(b1=args.b1, a1=args.a1, c=args.c, noiseless=args.noiseless)
    inst = generate_benchmark(args.n, params, request, args.seed)
    paths = {"network": _out(args, "edges.tsv"), "partition": _out(args, "partition.tsv"),
             "truth": _out(args, "truth.tsv"), "document": _out(args, "json")}
    io.write_edgeprob_file(paths["network"], inst.network)
    io.write_partition_file(paths["partition"], inst.truth_partition)
    io.write_truth_file(paths["truth"], inst.truth_edges, args.n)
    noise = inst.noise
    doc = _document(args, files=paths,
                    noise={"a1": noise.a1, "b1": noise.b1, "a0": noise.a0, "b0": noise.b0,
                           "c": noise.c, "rho": noise.rho, "noiseless": noise.noiseless},
                    instance={"pairs": inst.network.num_pairs,
                              "true_edges": int(len(inst.truth_edges))})
    io.write_document(paths["document"], doc)
    _emit(args, doc, f"wrote {paths['network']} ({inst.network.num_pairs} pairs, "
                     f"{len(inst.truth_edges)} true edges, c={noise.c:.6g})")


def cmd_fit(args):
    net = io.parse_edgeprob_file(args.network)
    fit = em_fit(net, args.k, args.mode, _options(args))
    io.write_partition_file(args.partition, fit.hard_partition)
    doc = _document(args, **io.fit_sections(fit))
    io.write_document(args.output, doc)
    _emit(args, doc, f"bound {fit.bound:.6f}; gamma {np.round(fit.params.gamma, 4).tolist()}; "
                     f"partition written to {args.partition}")


def _params_from_document(path):
    doc = io.read_document(path)
    try:
        p = doc["params"]
        return BlockParams(np.asarray(p["gamma"], dtype=float), np.asarray(p["omega"], dtype=float),
                           check_range=doc["config"].get("mode", "plain") == "plain")
    except (KeyError, TypeError) as exc:
        raise io.ParseError(f"{path} is not a fit document: missing {exc}") from None


def cmd_recover(args):
    net = io.parse_edgeprob_file(args.network)
    if args.fit_doc:
        fit = posterior_at(net, _params_from_document(args.fit_doc), args.mode, seed=args.seed,
                           restarts=args.restarts, tol_bp=args.tol_bp, max_sweeps=args.max_sweeps)
    else:
        fit = em_fit(net, args.k, args.mode, _options(args))
    scores = edge_posterior(fit.t, fit.marginals.pair, net)
    io.write_scores_file(args.scores, scores, net.n)
    doc = _document(args, **io.fit_sections(fit), files={"scores": args.scores})
    io.write_document(args.output, doc)
    _emit(args, doc, f"scored {len(scores)} pairs; written to {args.scores}")


def cmd_roc(args):
    scores, n_scores = io.parse_scores_file(args.scores)
    truth, n_truth = io.parse_truth_file(args.truth)
    n = args.n or n_truth or n_scores
    if n is None:
        raise io.ValidationError("node count unknown: pass --n or add a '# nodes=' header")
    curve = roc(scores, truth, n)
    io.write_roc_csv(args.curve, curve)
    doc = _document(args, metrics={"auc": curve.auc}, files={"curve": args.curve})
    _emit(args, doc, f"AUC {curve.auc:.6f}")


def cmd_accuracy(args):
    truth = io.parse_partition_file(args.truth)
    pred = io.parse_partition_file(args.pred, n=truth.n)
    acc = aligned_accuracy(pred, truth)
    doc = _document(args, metrics={"accuracy": acc})
    _emit(args, doc, f"aligned accuracy {acc:.6f}")


def _benchmark_seed(args):
    return args.seed if args.seed is not None else 0


def cmd_benchmark_fig2a(args):
    seed = _benchmark_seed(args)
    opts = _options(args)
    res = community_benchmark(args.instances, seed, n=args.n, omega_in=args.omega_in,
                              omega_out=args.omega_out, a1=args.a1, b1=args.b1, k=args.k,
                              taus=args.taus, options=opts)
    header = ("tau", "baseline_mean", "baseline_stderr", "uncertain_mean", "uncertain_stderr")
    io.write_table_csv(args.table, header, res.table())
    best_tau, best = res.baseline_best()
    doc = _document(args, metrics={"uncertain_accuracies": res.accuracies,
                                   "baseline": [row[:3] for row in res.baseline],
                                   "baseline_best_tau": best_tau},
                    files={"table": args.table})
    _emit(args, doc, f"uncertain-network accuracy {res.mean:.4f}; best threshold "
                     f"tau={best_tau:g} at {best:.4f}; table written to {args.table}")


def cmd_benchmark_fig4(args):
    seed = _benchmark_seed(args)
    res = recovery_benchmark(args.instances, seed, n=args.n, omega_in=args.omega_in,
                             omega_out=args.omega_out, b1=args.b1, c=args.c, k=args.k,
                             options=_options(args))
    rows = [(m, mean, err) for m, (mean, err) in res.summary().items()]
    io.write_table_csv(args.table, ("method", "auc_mean", "auc_stderr"), rows)
    doc = _document(args, metrics={"auc": res.aucs, "c": res.c}, files={"table": args.table})
    _emit(args, doc, "; ".join(f"{m} AUC {mean:.4f}" for m, mean, _ in rows))


def _apply_config_file(parser, argv):
    """Re-parse with defaults taken from ``--config`` so explicit flags still win."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    with open(args.config, encoding="utf-8") as fh:
        defaults = json.load(fh)
    if not isinstance(defaults, dict):
        raise io.ParseError(f"{args.config} must hold a JSON object")
    parser.commands[args.command].set_defaults(**{k.replace("-", "_"): v for k, v in defaults.items()})
    return parser.parse_args(argv)


def main(argv=None):
    parser = build_parser()
    try:
        args = _apply_config_file(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if getattr(args, "seed", 0) is None and args.command in ("generate", "fit", "recover"):
            args.seed = _fresh_seed()
        args.func(args)
    except (UncertNetError, UsageError) as exc:
        return _fail(exc.category, str(exc))
    except OSError as exc:
        return _fail("io", str(exc))
    except (ValueError, json.JSONDecodeError) as exc:
        return _fail("invalid_argument", str(exc))
    return 0


def _fail(category, message):
    sys.stderr.write(json.dumps({"error": category, "message": message}) + "\n")
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
