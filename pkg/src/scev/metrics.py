"""External validity indices and constraint checks.

Objects that are MISSING in either partition are dropped before any pair
or class is counted.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .alignment import contingency_table, optimal_alignment
from .core import MISSING, Dataset, Partition, SupervisionBundle, index_supervision
from .errors import LengthMismatch, TooFewObjects


@dataclass(frozen=True)
class MetricReport:
    ari: float
    nmi: float
    purity: float
    agreement: float
    constraint_violations: int

    def as_dict(self) -> dict:
        return asdict(self)


def _joint(p: Partition, q: Partition, minimum: int = 2) -> tuple[np.ndarray, np.ndarray]:
    if p.n != q.n:
        raise LengthMismatch(f"partitions have {p.n} and {q.n} objects")
    both = p.known & q.known
    if both.sum() < minimum:
        raise TooFewObjects(f"only {int(both.sum())} jointly labeled objects, need {minimum}")
    return p.labels[both], q.labels[both]


def _table(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    t = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(t, (ai, bi), 1)
    return t


def _pairs(x):
    return x * (x - 1) / 2.0


def adjusted_rand_index(p: Partition, q: Partition) -> float:
    """Hubert-Arabie adjusted Rand index.

    Two partitions that both put everything in one cluster score 1.0.
    """
    t = _table(*_joint(p, q)).astype(np.int64)
    # integer pair counts, scaled by the total pair count, so only the final division rounds
    comb2 = lambda x: int((x * (x - 1) // 2).sum())
    n_pairs = comb2(np.array([t.sum()]))
    index = comb2(t)
    sum_a = comb2(t.sum(axis=1))
    sum_b = comb2(t.sum(axis=0))
    num = 2 * (index * n_pairs - sum_a * sum_b)
    den = (sum_a + sum_b) * n_pairs - 2 * sum_a * sum_b
    if den == 0:
        return 1.0
    return num / den


def _entropy(counts: np.ndarray) -> float:
    prob = counts[counts > 0] / counts.sum()
    return float(-(prob * np.log(prob)).sum())


def normalized_mutual_information(p: Partition, q: Partition) -> float:
    """Mutual information over the arithmetic mean of the two entropies.

    Both single-cluster: 1.0. Exactly one single-cluster: 0.0.
    """
    t = _table(*_joint(p, q))
    h_p = _entropy(t.sum(axis=1))
    h_q = _entropy(t.sum(axis=0))
    if h_p == 0.0 and h_q == 0.0:
        return 1.0
    if h_p == 0.0 or h_q == 0.0:
        return 0.0
    n = t.sum()
    joint = t / n
    outer = np.outer(t.sum(axis=1), t.sum(axis=0)) / n**2
    nz = joint > 0
    mi = float((joint[nz] * np.log(joint[nz] / outer[nz])).sum())
    return float(np.clip(mi / ((h_p + h_q) / 2.0), 0.0, 1.0))


def purity(p: Partition, truth: Partition) -> float:
    t = _table(*_joint(p, truth, minimum=1))
    return float(t.max(axis=1).sum() / t.sum())


def agreement(p: Partition, truth: Partition) -> float:
    """Fraction of jointly labeled objects with identical labels once ``p`` is aligned to ``truth``."""
    _joint(p, truth, minimum=1)
    amap = optimal_alignment(contingency_table(p, truth))
    both = p.known & truth.known
    return float(amap.score / both.sum())


def constraint_violation_count(p: Partition, constraints: SupervisionBundle,
                               data: Dataset | None = None) -> int:
    """Must-link pairs split apart plus cannot-link pairs placed together.

    Must-links are counted over their transitive closure. Object ids are
    resolved through ``data``; without it they must be row indices.
    """
    if data is None:
        data = Dataset(np.zeros((p.n, 1)), tuple(str(i) for i in range(p.n)))
    sup = index_supervision(constraints, data)
    lab = p.labels
    bad = 0
    for group in sup.ml_groups:
        g = lab[list(group)]
        g = g[g != MISSING]
        if g.size > 1:
            counts = np.unique(g, return_counts=True)[1]
            same = _pairs(counts.astype(float)).sum()
            bad += int(_pairs(float(g.size)) - same)
    for a, b in sup.cannot_link:
        if lab[a] != MISSING and lab[a] == lab[b]:
            bad += 1
    return bad


def evaluate(p: Partition, truth: Partition, constraints: SupervisionBundle | None = None,
             data: Dataset | None = None) -> MetricReport:
    violations = 0 if constraints is None else constraint_violation_count(p, constraints, data)
    return MetricReport(
        ari=adjusted_rand_index(p, truth),
        nmi=normalized_mutual_information(p, truth),
        purity=purity(p, truth),
        agreement=agreement(p, truth),
        constraint_violations=violations,
    )
