"""Weighted relabel-and-vote consensus.

Every base partition is aligned onto a fixed reference partition, after
which each object takes the label with the largest sum of partition weights
``omega_j = alpha_j * beta_j``. Partitions that leave an object MISSING
abstain for it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .alignment import (
    ContingencyTable,
    alignment_is_unique,
    all_optimal_alignments,
    apply_alignment,
    contingency_table,
    optimal_alignment,
)
from .core import (
    MISSING,
    UNRESOLVED,
    AlignmentMap,
    ConsensusResult,
    Dataset,
    Ensemble,
    Partition,
    SupervisionBundle,
)
from .errors import (
    AllAbstained,
    AllZeroWeights,
    IndexOutOfRange,
    LengthMismatch,
    SCEVError,
    ValidationError,
)

#: Relative tolerance under which two vote totals count as tied.
TIE_RTOL = 1e-9


class TiePolicy(str, enum.Enum):
    UNRESOLVED = "unresolved"
    REFERENCE = "reference"
    LOWEST = "lowest"


@dataclass(frozen=True)
class ReferencePolicy:
    """Either a user-chosen partition index or a seeded uniform draw."""

    kind: str = "user"
    index: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("user", "random"):
            raise ValidationError(f"unknown reference policy {self.kind!r}")

    @classmethod
    def user(cls, index: int) -> "ReferencePolicy":
        return cls("user", index=int(index))

    @classmethod
    def random(cls, seed: int) -> "ReferencePolicy":
        return cls("random", seed=int(seed))

    @classmethod
    def parse(cls, text: str) -> "ReferencePolicy":
        """``"2"`` or ``"random:17"``."""
        text = str(text).strip()
        if text.startswith("random"):
            _, _, seed = text.partition(":")
            return cls.random(int(seed or 0))
        return cls.user(int(text))

    def describe(self) -> str:
        return f"user-index({self.index})" if self.kind == "user" else f"random({self.seed})"


def select_reference(ensemble: Ensemble | int, policy: ReferencePolicy) -> int:
    """Index of the reference partition. Accepts an ensemble or its size ``m``."""
    m = ensemble if isinstance(ensemble, int) else ensemble.m
    if m < 1:
        raise IndexOutOfRange("cannot select a reference from an empty ensemble")
    if policy.kind == "user":
        if not 0 <= policy.index < m:
            raise IndexOutOfRange(f"reference index {policy.index} outside [0, {m})")
        return policy.index
    return int(np.random.default_rng(policy.seed).integers(m))


def combine_weights(alpha: Sequence[float], beta: Sequence[float],
                    normalize: bool = False) -> np.ndarray:
    """Per-partition vote weights ``alpha * beta``.

    With ``normalize`` the weights are rescaled to sum to ``m``, which leaves
    every vote outcome unchanged.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    if alpha.shape != beta.shape or alpha.ndim != 1:
        raise LengthMismatch(f"alpha {alpha.shape} and beta {beta.shape} must be matching vectors")
    if (alpha < 0).any() or (beta < 0).any() or not (np.isfinite(alpha).all() and np.isfinite(beta).all()):
        raise ValidationError("weights must be finite and non-negative")
    omega = alpha * beta
    total = omega.sum()
    if total <= 0:
        raise AllZeroWeights("every partition has alpha*beta = 0")
    if normalize:
        omega = omega * (omega.size / total)
    return omega


def weighted_vote(aligned: Sequence[Partition], omega: Sequence[float],
                  tie_policy: TiePolicy | str = TiePolicy.UNRESOLVED,
                  reference_index: int | None = None,
                  strict: bool = False) -> ConsensusResult:
    """Weighted majority vote over partitions already in a common label space.

    Ties (totals equal within :data:`TIE_RTOL`) are settled by ``tie_policy``.
    ``REFERENCE`` takes the reference partition's label when it is among the
    tied ones and otherwise falls back to the lowest tied label. Objects for
    which every voter abstains come out UNRESOLVED; ``strict`` raises
    :class:`AllAbstained` instead.
    """
    tie_policy = TiePolicy(tie_policy)
    aligned = list(aligned)
    omega = np.asarray(omega, dtype=np.float64)
    if not aligned:
        raise ValidationError("nothing to vote on")
    if omega.shape != (len(aligned),):
        raise LengthMismatch(f"{omega.size} weights for {len(aligned)} partitions")
    if (omega < 0).any():
        raise ValidationError("vote weights must be non-negative")
    n = aligned[0].n
    n_labels = max(p.k for p in aligned)
    scores = np.zeros((n, n_labels))
    voters = np.zeros(n, dtype=np.int64)
    rows = np.arange(n)
    for p, w in zip(aligned, omega):
        if p.n != n:
            raise LengthMismatch(f"partition with {p.n} labels among {n}-object partitions")
        if w <= 0:
            continue
        known = p.known
        scores[rows[known], p.labels[known]] += w
        voters += known

    abstained = voters == 0
    if strict and abstained.any():
        first = int(np.flatnonzero(abstained)[0])
        raise AllAbstained(f"every partition abstains at object {first}")

    best = scores.max(axis=1)
    tied = (scores >= best[:, None] * (1.0 - TIE_RTOL)) & (scores > 0)
    n_tied = tied.sum(axis=1)
    tie_flags = n_tied >= 2
    labels = np.argmax(tied, axis=1)  # lowest label among the maxima

    if n_labels >= 2:
        second = np.partition(scores, n_labels - 2, axis=1)[:, n_labels - 2]
        margin = best - second
    else:
        margin = best.copy()
    margin[tie_flags] = 0.0

    if tie_policy is TiePolicy.UNRESOLVED:
        labels[tie_flags] = UNRESOLVED
    elif tie_policy is TiePolicy.REFERENCE:
        if reference_index is None:
            raise ValidationError("REFERENCE tie policy needs a reference index")
        ref = aligned[reference_index].labels
        use_ref = tie_flags & (ref != MISSING)
        use_ref[use_ref] = tied[rows[use_ref], ref[use_ref]]
        labels[use_ref] = ref[use_ref]
    labels[abstained] = UNRESOLVED
    margin[abstained] = 0.0
    tie_flags[abstained] = False
    return ConsensusResult(labels, scores, margin, tie_flags, abstained)


@dataclass(frozen=True, eq=False)
class AlignmentRecord:
    table: ContingencyTable
    alignment: AlignmentMap
    unique: bool
    optima: list[tuple[int, ...]] | None
    aligned: Partition


@dataclass(frozen=True, eq=False)
class Audit:
    """Every intermediate of one consensus run, for reporting."""

    ensemble: Ensemble
    alignments: tuple[AlignmentRecord, ...]
    omega: np.ndarray
    tie_policy: TiePolicy
    normalized: bool
    label_tokens: tuple[str, ...]


@dataclass(frozen=True, eq=False)
class ScevOutcome:
    result: ConsensusResult
    audit: Audit

    def consensus_partition(self) -> Partition:
        r = self.result
        labels = r.labels
        if (labels == MISSING).all():
            raise AllAbstained("consensus left every object unresolved")
        return r.to_partition(tokens=self.audit.label_tokens)


def target_tokens(reference: Partition, n_labels: int) -> tuple[str, ...]:
    """Names for the consensus label space: the reference's own, then fresh ones."""
    names = [reference.token(l) for l in range(reference.k)]
    names += [f"new{l - reference.k}" for l in range(reference.k, n_labels)]
    return tuple(names)


def align_to_reference(ensemble: Ensemble, detail: bool = True) -> list[AlignmentRecord]:
    ref = ensemble.reference
    records = []
    for p in ensemble.partitions:
        table = contingency_table(p, ref)
        amap = optimal_alignment(table)
        unique = alignment_is_unique(table, amap) if detail else True
        optima = None if (unique or not detail) else all_optimal_alignments(table)
        records.append(AlignmentRecord(table, amap, unique, optima, apply_alignment(p, amap)))
    return records


def consensus_from_ensemble(ensemble: Ensemble,
                            tie_policy: TiePolicy | str = TiePolicy.UNRESOLVED,
                            normalize: bool = False, detail: bool = True) -> ScevOutcome:
    """Align, weight and vote an existing ensemble.

    ``detail=False`` skips the tie analysis of each alignment that the audit
    report uses; the consensus itself is unaffected.
    """
    tie_policy = TiePolicy(tie_policy)
    try:
        records = align_to_reference(ensemble, detail)
    except SCEVError as exc:
        raise exc.with_stage("alignment")
    try:
        omega = combine_weights([w.alpha for w in ensemble.weights],
                                [w.beta for w in ensemble.weights], normalize)
        result = weighted_vote([r.aligned for r in records], omega, tie_policy,
                               ensemble.reference_index)
    except SCEVError as exc:
        raise exc.with_stage("voting")
    tokens = target_tokens(ensemble.reference, result.scores.shape[1])
    audit = Audit(ensemble, tuple(records), omega, tie_policy, normalize, tokens)
    return ScevOutcome(result, audit)


def scev_run(data: Dataset, spec, supervision: SupervisionBundle | None = None,
             tie_policy: TiePolicy | str = TiePolicy.UNRESOLVED,
             normalize: bool = False) -> ScevOutcome:
    """Full pipeline: base partitions, reference choice, alignment and vote."""
    from .clusterers import generate_ensemble

    ensemble = generate_ensemble(data, spec, supervision)
    return consensus_from_ensemble(ensemble, tie_policy, normalize)


def with_reference(ensemble: Ensemble, policy: ReferencePolicy) -> Ensemble:
    return replace(ensemble, reference_index=select_reference(ensemble, policy))
