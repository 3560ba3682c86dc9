"""``seglink`` command line: inspection, heuristics, training and self-checks.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import NumericError, SegLinkError
from .graph import (dump_graph, extract_enclosing_subgraph, format_pairs, load_edge_list, read_pairs)
from .model import SegConfig, load_model, save_model
from .structure import HEURISTICS, drnl_label, enumerate_simple_paths, heuristic_score, path_label
from .training import (SplitDataset, evaluate_model, format_loss_curve, generate_synthetic_benchmark,
                       score_heuristic, train)

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3

GRAPH_FILE, FEATURE_FILE = "graph.txt", "features.txt"
SPLIT_FILES = {"train_pos": "train.txt", "valid_pos": "valid.txt", "test_pos": "test.txt",
               "valid_neg": "valid_neg.txt", "test_neg": "test_neg.txt",
               "valid_mrr_neg": "valid_mrr_neg.txt", "test_mrr_neg": "test_mrr_neg.txt"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- file helpers ---------------------------------------------------------------

def _read_graph(path, features=None):
    with open(path, "rb") as fh:
        if features:
            with open(features, "rb") as ff:
                return load_edge_list(fh, ff)
        return load_edge_list(fh)


def _read_pairs_file(path):
    with open(path, "rb") as fh:
        return read_pairs(fh)


def _read_candidates(path, positives):
    pairs = _read_pairs_file(path)
    if len(positives) == 0 or len(pairs) % len(positives):
        raise SegLinkError(f"{path}: {len(pairs)} candidate lines do not divide into "
                           f"{len(positives)} positives")
    grouped = pairs.reshape(len(positives), -1, 2)
    if not np.all(grouped[:, :, 0] == positives[:, [0]]):
        raise SegLinkError(f"{path}: candidate sources must match their positive's source")
    return grouped[:, :, 1]


def load_dataset_dir(directory):
    """Read a benchmark directory as written by ``seglink synth``."""
    d = Path(directory)
    features = d / FEATURE_FILE
    g = _read_graph(d / GRAPH_FILE, features if features.exists() else None)
    fields = {}
    for name in ("train_pos", "valid_pos", "test_pos", "valid_neg", "test_neg"):
        path = d / SPLIT_FILES[name]
        if path.exists():
            fields[name] = _read_pairs_file(path)
        elif name.endswith("_pos"):
            fields[name] = np.zeros((0, 2), dtype=np.int64)
    for split in ("valid", "test"):
        path = d / SPLIT_FILES[f"{split}_mrr_neg"]
        if path.exists():
            fields[f"{split}_mrr_neg"] = _read_candidates(path, fields[f"{split}_pos"])
    splits = SplitDataset(**fields)
    splits.validate(g)
    return g, splits


def write_dataset_dir(directory, g, splits, header=()):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    header = ["seglink-format 1"] + list(header)
    edge_text, feat_text = dump_graph(g, header)
    (d / GRAPH_FILE).write_text(edge_text)
    if feat_text is not None:
        (d / FEATURE_FILE).write_text("".join(f"# {h}\n" for h in header) + feat_text)
    for name, fname in SPLIT_FILES.items():
        value = getattr(splits, name)
        if value is None:
            continue
        if name.endswith("_mrr_neg"):
            pos = getattr(splits, name.replace("_mrr_neg", "_pos"))
            pairs = [(u, w) for (u, _), row in zip(pos.tolist(), value.tolist()) for w in row]
            extra = [f"candidates_per_positive {value.shape[1]}"]
        else:
            pairs, extra = value, []
        (d / fname).write_text(format_pairs(pairs, header + extra))


# -- config -------------------------------------------------------------------

CONFIG_FLAGS = {f.name: f for f in dataclasses.fields(SegConfig)}


def _add_config_flags(p):
    p.add_argument("--config", help="JSON file with flat SegConfig keys; flags win")
    for name, f in CONFIG_FLAGS.items():
        flag = "--" + name.replace("_", "-")
        if f.type in (bool, "bool"):
            p.add_argument(flag, dest=name, action=argparse.BooleanOptionalAction, default=None)
        else:
            kind = {"int": int, "float": float, "str": str}.get(f.type if isinstance(f.type, str)
                                                              else f.type.__name__, str)
            p.add_argument(flag, dest=name, type=kind, default=None)
    p.add_argument("--lambda", dest="lam", type=int, default=None, help="alias of --lam")


def _resolve_config(args) -> SegConfig:
    values = {}
    if args.config:
        with open(args.config) as fh:
            values.update(json.load(fh))
    for name in CONFIG_FLAGS:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    return SegConfig.from_dict(values)


# -- commands -------------------------------------------------------------------

def cmd_paths(args, out):
    g = _read_graph(args.graph)
    i, j = args.pair
    sub = extract_enclosing_subgraph(g, i, j, args.k, not args.keep_target_edge)
    ps = enumerate_simple_paths(sub, args.lam)
    glob = sub.local_to_global
    rows = sorted(tuple(int(glob[u]) for u in p) for p in ps.paths)
    for p in sorted(rows, key=lambda r: (len(r), r)):
        print(" ".join(map(str, p)), file=out)


def cmd_label(args, out):
    g = _read_graph(args.graph)
    i, j = args.pair
    sub = extract_enclosing_subgraph(g, i, j, args.k, not args.keep_target_edge)
    if args.scheme == "pl":
        la = path_label(sub, enumerate_simple_paths(sub, args.lam), args.lam)
    else:
        la = drnl_label(sub)
    for local, label in sorted(zip(sub.local_to_global.tolist(), la.labels.tolist())):
        print(f"{local} {label}", file=out)


def cmd_score(args, out):
    g = _read_graph(args.graph)
    for u, v in _read_pairs_file(args.pairs).tolist():
        s = heuristic_score(g, u, v, args.method, args.katz_alpha, args.katz_max_len)
        print(f"{u} {v} {s:.10g}", file=out)


def cmd_synth(args, out):
    g, splits = generate_synthetic_benchmark(
        n=args.n, seed=args.seed, m=args.m, triangle_prob=args.triangle_prob, n_valid=args.n_valid,
        n_test=args.n_test, n_neg=args.n_neg, mrr_candidates=args.mrr_candidates,
        feature_dim=args.feature_dim)
    params = {k: getattr(args, k) for k in ("n", "seed", "m", "triangle_prob", "n_valid", "n_test",
                                            "n_neg", "mrr_candidates", "feature_dim")}
    write_dataset_dir(args.out, g, splits, ["synth " + json.dumps(params, sort_keys=True)])
    print(f"wrote {args.out}: {g.num_nodes} nodes, {g.num_edges} edges, "
          f"{len(splits.test_pos)} test positives", file=out)


def cmd_train(args, out):
    cfg = _resolve_config(args)
    g, splits = load_dataset_dir(args.data)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    reports = []
    for r in range(args.repeats):
        run_cfg = dataclasses.replace(cfg, seed=cfg.seed + r)
        suffix = "" if args.repeats == 1 else f"_r{r}"

        def progress(epoch, loss):
            print(f"epoch {epoch} loss {loss:.6f}", file=out)

        result = train(g, splits, run_cfg, kind=args.model, threads=args.threads, on_epoch=progress)
        echo = result.model.config_dict()
        (outdir / f"checkpoint{suffix}.json").write_text(
            save_model(result.model, {"loss_curve": result.loss_curve}))
        (outdir / f"loss{suffix}.csv").write_text(format_loss_curve(result.loss_curve, echo))
        if splits.test_neg is not None and len(splits.test_pos):
            report = evaluate_model(result.model, result.graph, splits, "test", args.ks, args.threads)
            (outdir / f"report{suffix}.json").write_text(report.to_json())
            print(report.table(), file=out)
            reports.append(report)
    if len(reports) > 1:
        aucs = np.array([rep.auc for rep in reports])
        print(f"AUC over {len(reports)} runs: {aucs.mean():.4f} ± {aucs.std():.4f}", file=out)
        for k in args.ks:
            vals = np.array([rep.hits_at_k[k] for rep in reports])
            print(f"Hits@{k} over {len(reports)} runs: {vals.mean():.4f} ± {vals.std():.4f}", file=out)


def cmd_eval(args, out):
    g, splits = load_dataset_dir(args.data)
    if args.method:
        report = evaluate_model(None, g, splits, args.split, args.ks,
                                scorer=lambda graph, pairs: score_heuristic(graph, pairs, args.method))
        report.config = {"model": args.method}
    else:
        model, _ = load_model(Path(args.checkpoint).read_text())
        if model.cfg.train_on_valid:
            g = g.with_edges(splits.valid_pos)
        report = evaluate_model(model, g, splits, args.split, args.ks, args.threads)
    text = report.to_json()
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text, file=out)
    print(report.table(), file=sys.stderr if not args.out else out)


def cmd_predict(args, out):
    model, _ = load_model(Path(args.checkpoint).read_text())
    g = _read_graph(args.graph, args.features)
    for u, v in _read_pairs_file(args.pairs).tolist():
        o = model.predict_link(g, u, v)
        fmt = lambda x: "nan" if x is None else f"{x:.10g}"  # noqa: E731
        print(f"{u} {v} {fmt(o.s)} {fmt(o.s_semantic)} {fmt(o.s_structure)}", file=out)


def cmd_gradcheck(args, out):
    from .fixtures import seg_gradient_check
    cfg = _resolve_config(args)
    report = seg_gradient_check(cfg, tolerance=args.tolerance,
                                max_entries_per_param=args.max_entries, directions=args.directions)
    print(report.summary(), file=out)
    if not report.passed:
        raise NumericError(f"gradient check failed: {report.summary()}")


def build_parser():
    parser = _Parser(prog="seglink", description="Link prediction with path-labeled enclosing subgraphs")
    parser.add_argument("--version", action="version", version=f"seglink {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def inspect_parser(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--graph", required=True)
        p.add_argument("--pair", type=int, nargs=2, required=True, metavar=("I", "J"))
        p.add_argument("--k", type=int, default=1, help="hops of the enclosing subgraph")
        p.add_argument("--lambda", dest="lam", type=int, default=4)
        p.add_argument("--keep-target-edge", action="store_true")
        return p

    inspect_parser("paths", "list simple paths between a target pair").set_defaults(func=cmd_paths)
    p = inspect_parser("label", "print structural node labels")
    p.add_argument("--scheme", choices=("pl", "drnl"), default="pl")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("score", help="heuristic link scores")
    p.add_argument("--graph", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--method", choices=HEURISTICS, required=True)
    p.add_argument("--katz-alpha", type=float, default=0.05)
    p.add_argument("--katz-max-len", type=int, default=4)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("synth", help="write the triadic-closure benchmark")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--triangle-prob", type=float, default=0.6)
    p.add_argument("--n-valid", type=int, default=100)
    p.add_argument("--n-test", type=int, default=100)
    p.add_argument("--n-neg", type=int, default=300)
    p.add_argument("--mrr-candidates", type=int, default=20)
    p.add_argument("--feature-dim", type=int, default=8)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train SEG (or an ablation / baseline)")
    p.add_argument("--data", required=True, help="benchmark directory")
    p.add_argument("--out", required=True)
    p.add_argument("--model", choices=("seg", "mlp"), default="seg")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--ks", type=int, nargs="+", default=[10, 50, 100])
    p.add_argument("--threads", type=int, default=None)
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint or a heuristic")
    p.add_argument("--data", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--checkpoint")
    src.add_argument("--method", choices=HEURISTICS)
    p.add_argument("--split", choices=("valid", "test"), default="test")
    p.add_argument("--ks", type=int, nargs="+", default=[10, 50, 100])
    p.add_argument("--out")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="score pairs with a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--features")
    p.add_argument("--pairs", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("gradcheck", help="finite-difference check of the full model")
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--max-entries", type=int, default=4096)
    p.add_argument("--directions", type=int, default=3)
    _add_config_flags(p)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args, out)
    except NumericError as exc:
        print(f"seglink: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (SegLinkError, OSError, ValueError, KeyError) as exc:
        print(f"seglink: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
