"""Command-line entry point: ``scev <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .clusterers import ALGORITHMS, ClustererConfig, EnsembleEntry, generate_ensemble, run_entry
from .consensus import ReferencePolicy, TiePolicy, consensus_from_ensemble, with_reference
from .core import Dataset, Ensemble, Partition, canonicalize, validate_supervision
from .errors import SCEVError, UnknownObject
from .io import (
    PartitionTable,
    RunConfig,
    load_dataset,
    load_supervision,
    load_weights,
    make_gaussians,
    read_partition_table,
    save_dataset,
    save_labels,
    save_partitions,
    save_weights,
    write_json,
)
from .metrics import evaluate
from .report import build_report

logger = logging.getLogger("scev")


class _Stage:
    """Tag any package error raised inside the block with a stage name."""

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if isinstance(exc, SCEVError):
            exc.with_stage(self.name)
        elif isinstance(exc, OSError):
            raise SCEVError(f"{exc.strerror or exc}: {exc.filename or ''}".rstrip(": "),
                            stage=self.name) from exc
        return False


def _reorder(table: PartitionTable, object_ids, column: int = 0) -> Partition:
    """Column ``column`` of ``table`` reindexed to ``object_ids`` order."""
    if set(table.object_ids) != set(object_ids):
        missing = sorted(set(object_ids) - set(table.object_ids))[:3]
        extra = sorted(set(table.object_ids) - set(object_ids))[:3]
        raise UnknownObject(f"object ids differ (missing {missing}, unexpected {extra})")
    pos = {oid: i for i, oid in enumerate(table.object_ids)}
    order = np.array([pos[o] for o in object_ids])
    p = table.partitions[column]
    return replace(p, labels=p.labels[order])


def _parse_centers(text: str) -> list[list[float]]:
    try:
        return [[float(v) for v in c.split(",")] for c in text.split(";") if c.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad centers {text!r}; use '0,0;10,0;0,10'") from None


def cmd_synth(args) -> int:
    data, truth = make_gaussians(args.n_per_cluster, args.centers, args.sigma, args.seed)
    save_dataset(args.out, data)
    if args.truth:
        save_partitions(args.truth, data.object_ids, [truth], ["truth"])
    print(f"wrote {data.n} points in {data.d} dimensions to {args.out}")
    return 0


def cmd_cluster(args) -> int:
    with _Stage("load"):
        data = load_dataset(args.data)
        sup = load_supervision(args.seeds, args.constraints, data)
    cfg = ClustererConfig(args.k, args.max_iters, args.tol, args.seed, args.empty_policy)
    with _Stage(f"cluster:{args.algorithm}"):
        p = canonicalize(run_entry(data, EnsembleEntry(args.algorithm, cfg), sup))
    with _Stage("write"):
        save_partitions(args.out, data.object_ids, [p], [args.algorithm])
    return 0


def _run_ensemble(cfg: RunConfig):
    with _Stage("load"):
        data = load_dataset(cfg.dataset)
        sup = load_supervision(cfg.seeds, cfg.constraints, data)
        spec = cfg.ensemble_spec()
    with _Stage("ensemble"):
        ensemble = generate_ensemble(data, spec, sup)
    return data, sup, ensemble


def _entry_names(ensemble: Ensemble) -> list[str]:
    return [f"{p.provenance.algorithm}{j}" for j, p in enumerate(ensemble.partitions)]


def cmd_ensemble(args) -> int:
    with _Stage("config"):
        cfg = RunConfig.load(args.config)
    out = Path(args.output_dir) if args.output_dir else cfg.output_dir
    data, _, ensemble = _run_ensemble(cfg)
    with _Stage("write"):
        save_partitions(out / "partitions.csv", data.object_ids, ensemble.partitions,
                        _entry_names(ensemble))
        save_weights(out / "weights.csv", ensemble.weights)
    print(f"wrote {ensemble.m} partitions to {out}")
    return 0


def _write_consensus(out_labels, report_path, outcome, object_ids, names,
                     truth=None, sup=None, data=None):
    with _Stage("report"):
        report = build_report(outcome, object_ids, names, truth, sup, data)
    with _Stage("write"):
        tokens = outcome.audit.label_tokens
        labels = outcome.result.labels
        save_labels(out_labels, object_ids,
                    ["?" if l < 0 else tokens[l] for l in labels.tolist()], "consensus")
        if report_path:
            write_json(report_path, report)
    return report


def cmd_consensus(args) -> int:
    with _Stage("load"):
        table = read_partition_table(args.partitions)
        weights = load_weights(args.weights, len(table))
        truth = None
        if args.truth:
            truth = _reorder(read_partition_table(args.truth), table.object_ids)
    with _Stage("reference"):
        ensemble = Ensemble(table.partitions, tuple(weights), 0)
        ensemble = with_reference(ensemble, ReferencePolicy.parse(args.reference))
    with _Stage("consensus"):
        outcome = consensus_from_ensemble(ensemble, args.tie_policy, args.normalize)
    report = _write_consensus(args.out, args.report, outcome, table.object_ids,
                              table.names, truth)
    s = report["summary"]
    print(f"consensus over {ensemble.m} partitions, {s['n']} objects: "
          f"{s['ties']} ties, {s['unresolved']} unresolved")
    return 0


def cmd_eval(args) -> int:
    with _Stage("load"):
        a = read_partition_table(args.partition)
        b = read_partition_table(args.truth)
        p = a.partitions[args.column]
        q = _reorder(b, a.object_ids, args.truth_column)
        sup = None
        if args.constraints:
            sup = load_supervision(None, args.constraints)
    with _Stage("eval"):
        ids_only = Dataset(np.zeros((len(a.object_ids), 1)), a.object_ids)
        if sup is not None:
            sup = validate_supervision(sup, ids_only)
        report = evaluate(p, q, sup, ids_only).as_dict()
    text = json.dumps(report, indent=2)
    if args.out:
        with _Stage("write"):
            write_json(args.out, report)
    print(text)
    return 0


def cmd_pipeline(args) -> int:
    with _Stage("config"):
        cfg = RunConfig.load(args.config)
    out = Path(args.output_dir) if args.output_dir else cfg.output_dir
    data, sup, ensemble = _run_ensemble(cfg)
    truth = None
    if cfg.truth is not None:
        with _Stage("load"):
            truth = _reorder(read_partition_table(cfg.truth), data.object_ids)
    with _Stage("consensus"):
        outcome = consensus_from_ensemble(ensemble, cfg.tie, cfg.normalize)
    names = _entry_names(ensemble)
    with _Stage("write"):
        save_partitions(out / "partitions.csv", data.object_ids, ensemble.partitions, names)
        save_weights(out / "weights.csv", ensemble.weights)
    report = _write_consensus(out / "consensus.csv", out / "report.json", outcome,
                              data.object_ids, names, truth,
                              None if sup.is_empty else sup, data)
    msg = f"pipeline: {ensemble.m} partitions, reference {ensemble.reference_index}"
    if "metrics" in report:
        msg += f", ARI {report['metrics']['ari']:.4f}"
    print(msg)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scev", description="Semi-supervised clustering ensembles by relabeling and weighted voting.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate Gaussian blobs")
    p.add_argument("--centers", type=_parse_centers, required=True, help="e.g. '0,0;10,0;0,10'")
    p.add_argument("--n-per-cluster", type=int, default=50)
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--truth")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("cluster", help="run one base clusterer")
    p.add_argument("--data", required=True)
    p.add_argument("--algorithm", choices=ALGORITHMS, default="kmeans")
    p.add_argument("-k", type=int, required=True)
    p.add_argument("--seeds")
    p.add_argument("--constraints")
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--empty-policy", choices=("reseed-farthest", "drop"), default="reseed-farthest")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cluster)

    for name, func, helptext in (("ensemble", cmd_ensemble, "generate base partitions from a run config"),
                                 ("pipeline", cmd_pipeline, "ensemble + consensus + report")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="run config (JSON)")
        p.add_argument("--output-dir", help="overrides the config's output_dir")
        p.set_defaults(func=func)

    p = sub.add_parser("consensus", help="align and vote a partitions file")
    p.add_argument("--partitions", required=True)
    p.add_argument("--weights", help="partition_index,alpha,beta rows (default 1,1)")
    p.add_argument("--reference", default="0", help="partition index or 'random:SEED'")
    p.add_argument("--tie-policy", choices=[t.value for t in TiePolicy], default="unresolved")
    p.add_argument("--normalize", action="store_true", help="rescale weights to sum to m")
    p.add_argument("--truth", help="partitions file whose first column is the ground truth")
    p.add_argument("--out", required=True, help="consensus labels file")
    p.add_argument("--report", help="JSON audit report")
    p.set_defaults(func=cmd_consensus)

    p = sub.add_parser("eval", help="compare a partition with a reference labeling")
    p.add_argument("partition")
    p.add_argument("truth")
    p.add_argument("--column", type=int, default=0, help="column of the first file (0-based)")
    p.add_argument("--truth-column", type=int, default=0)
    p.add_argument("--constraints")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SCEVError as exc:
        print(f"scev {args.command}: error {exc}", file=sys.stderr)
        return 1
    except IndexError as exc:
        print(f"scev {args.command}: error {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
