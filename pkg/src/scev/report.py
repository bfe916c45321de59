"""JSON audit report for a consensus run."""

from __future__ import annotations

from typing import Sequence

from .consensus import ScevOutcome
from .core import MISSING, Dataset, Partition, SupervisionBundle
from .metrics import evaluate

TIE_NOTE = ("optimum not unique: the lexicographically smallest optimal mapping was used; "
            "'alternative_optima' lists every optimal mapping")


def _mapping_tokens(p: Partition, mapping, target_tokens) -> dict[str, str]:
    return {p.token(a): target_tokens[b] for a, b in enumerate(mapping)}


def build_report(outcome: ScevOutcome, object_ids: Sequence[str],
                 names: Sequence[str] | None = None,
                 truth: Partition | None = None,
                 constraints: SupervisionBundle | None = None,
                 data: Dataset | None = None) -> dict:
    audit, result = outcome.audit, outcome.result
    ens = audit.ensemble
    names = list(names) if names is not None else [f"C{j + 1}" for j in range(ens.m)]
    tokens = audit.label_tokens

    partitions = []
    for j, (p, rec, w) in enumerate(zip(ens.partitions, audit.alignments, ens.weights)):
        entry = {
            "index": j,
            "name": names[j],
            "algorithm": p.provenance.algorithm,
            "run": p.provenance.run,
            "seed": p.provenance.seed,
            "alpha": w.alpha,
            "beta": w.beta,
            "omega": float(audit.omega[j]),
            "labels": [p.token(a) for a in range(p.k)],
            "contingency": rec.table.counts.tolist(),
            "mapping": _mapping_tokens(p, rec.alignment.mapping, tokens),
            "score": rec.alignment.score,
            "optimum_unique": rec.unique,
        }
        if not rec.unique:
            entry["note"] = TIE_NOTE
            if rec.optima is not None:
                entry["alternative_optima"] = [_mapping_tokens(p, m, tokens) for m in rec.optima]
        partitions.append(entry)

    objects = []
    for i, oid in enumerate(object_ids):
        lab = int(result.labels[i])
        objects.append({
            "id": oid,
            "label": "?" if lab == MISSING else tokens[lab],
            "scores": {tokens[l]: s for l, s in result.scores_for(i).items()},
            "margin": float(result.margin[i]),
            "tie": bool(result.tie_flags[i]),
            "abstained": bool(result.abstained[i]),
        })

    report = {
        "reference_index": ens.reference_index,
        "reference_name": names[ens.reference_index],
        "tie_policy": audit.tie_policy.value,
        "normalized": audit.normalized,
        "omega": [float(w) for w in audit.omega],
        "label_space": list(tokens),
        "partitions": partitions,
        "summary": {
            "n": result.n,
            "ties": int(result.tie_flags.sum()),
            "unresolved": int((result.labels == MISSING).sum()),
            "abstained": int(result.abstained.sum()),
        },
        "objects": objects,
    }
    if truth is not None:
        consensus = outcome.consensus_partition()
        report["metrics"] = evaluate(consensus, truth, constraints, data).as_dict()
        report["base_metrics"] = [
            {"name": names[j], **evaluate(p, truth, constraints, data).as_dict()}
            for j, p in enumerate(ens.partitions)
        ]
    return report
