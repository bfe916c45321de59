"""Domain types shared by every stage, plus validation helpers.

Labels are dense non-negative integers stored in read-only ``int64`` arrays.
Unknown assignments use the :data:`MISSING` sentinel. External label tokens
(``"A"``, ``"α"``, ``"Z"``...) are mapped to integers on ingestion and kept on
the :class:`Partition` so outputs can be written back in the original alphabet.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    AllZeroWeights,
    ConflictingConstraints,
    DegenerateInput,
    IndexOutOfRange,
    LengthMismatch,
    UnknownObject,
    ValidationError,
)

MISSING = -1
#: Consensus labels that could not be decided. Shares the MISSING value so a
#: consensus converts directly into a Partition; ``tie_flags`` and
#: ``abstained`` on :class:`ConsensusResult` tell the two causes apart.
UNRESOLVED = MISSING
MISSING_TOKEN = "?"


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


def natural_token_order(tokens: Iterable[str]) -> list[str]:
    """Sort distinct tokens, numerically when every token is an integer."""
    uniq = set(tokens)
    try:
        return sorted(uniq, key=lambda t: (int(t), t))
    except ValueError:
        return sorted(uniq)


@dataclass(frozen=True)
class Provenance:
    algorithm: str = "external"
    run: str = ""
    seed: int | None = None


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ``n x d`` feature matrix with stable object identifiers."""

    features: np.ndarray
    object_ids: tuple[str, ...]
    feature_names: tuple[str, ...] | None = None
    _index: Mapping[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        X = _frozen_array(self.features, np.float64)
        if X.ndim != 2:
            raise DegenerateInput(f"features must be 2-D, got shape {X.shape}")
        n, d = X.shape
        if n < 1 or d < 1:
            raise DegenerateInput(f"need n >= 1 and d >= 1, got {n}x{d}")
        if not np.isfinite(X).all():
            bad = np.argwhere(~np.isfinite(X))[0]
            raise ValidationError(f"non-finite feature at row {bad[0]}, column {bad[1]}")
        ids = tuple(str(i) for i in self.object_ids)
        if len(ids) != n:
            raise LengthMismatch(f"{len(ids)} object ids for {n} rows")
        index = {oid: i for i, oid in enumerate(ids)}
        if len(index) != n:
            seen = set()
            dup = next(o for o in ids if o in seen or seen.add(o))
            raise ValidationError(f"duplicate object id {dup!r}")
        names = self.feature_names
        if names is not None:
            names = tuple(str(s) for s in names)
            if len(names) != d:
                raise LengthMismatch(f"{len(names)} feature names for {d} columns")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "object_ids", ids)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "_index", MappingProxyType(index))

    @classmethod
    def from_array(cls, features, object_ids: Sequence | None = None) -> "Dataset":
        features = np.asarray(features, dtype=np.float64)
        if object_ids is None:
            object_ids = [f"x{i + 1}" for i in range(features.shape[0])]
        return cls(features, tuple(object_ids))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def index_of(self, object_id: str) -> int:
        try:
            return self._index[object_id]
        except KeyError:
            raise UnknownObject(f"object id {object_id!r} is not in the dataset") from None

    def __contains__(self, object_id: str) -> bool:
        return object_id in self._index


@dataclass(frozen=True, eq=False)
class Partition:
    """A hard labeling of ``n`` objects over ``{0..k-1}`` plus MISSING.

    ``tokens[j]``, when present, is the external name of label ``j``.
    """

    labels: np.ndarray
    k: int
    provenance: Provenance = Provenance()
    tokens: tuple[str, ...] | None = None

    def __post_init__(self):
        labels = _frozen_array(self.labels, np.int64)
        if labels.ndim != 1:
            raise ValidationError("labels must be one-dimensional")
        k = int(self.k)
        if k < 1:
            raise ValidationError(f"k must be >= 1, got {k}")
        known = labels[labels != MISSING]
        if known.size == 0:
            raise ValidationError("partition has no non-MISSING label")
        if known.min() < 0 or known.max() >= k:
            raise ValidationError(f"labels must lie in [0, {k}) or be MISSING")
        tokens = self.tokens
        if tokens is not None:
            tokens = tuple(str(t) for t in tokens)
            if len(tokens) != k:
                raise LengthMismatch(f"{len(tokens)} tokens for k={k}")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "tokens", tokens)

    @classmethod
    def from_labels(cls, labels, k: int | None = None, **kw) -> "Partition":
        labels = np.asarray(labels, dtype=np.int64)
        if k is None:
            k = int(labels.max()) + 1 if labels.size else 0
        return cls(labels, k, **kw)

    @classmethod
    def from_tokens(cls, tokens: Sequence[str], missing: str = MISSING_TOKEN,
                    provenance: Provenance = Provenance()) -> "Partition":
        """Map arbitrary label tokens onto ``0..k-1`` in natural sort order."""
        order = natural_token_order(t for t in tokens if t != missing)
        code = {t: i for i, t in enumerate(order)}
        labels = [MISSING if t == missing else code[t] for t in tokens]
        return cls(np.array(labels, dtype=np.int64), max(len(order), 1),
                   provenance, tuple(order) if order else None)

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    def __len__(self) -> int:
        return self.n

    @property
    def known(self) -> np.ndarray:
        return self.labels != MISSING

    def token(self, label: int) -> str:
        if label == MISSING:
            return MISSING_TOKEN
        if self.tokens is not None and 0 <= label < len(self.tokens):
            return self.tokens[label]
        return str(label)

    def as_tokens(self) -> list[str]:
        return [self.token(int(v)) for v in self.labels]

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return (self.k == other.k and self.tokens == other.tokens
                and self.provenance == other.provenance
                and np.array_equal(self.labels, other.labels))

    __hash__ = None


def canonicalize(p: Partition) -> Partition:
    """Relabel so labels read ``0..k'-1`` in order of first appearance."""
    remap: dict[int, int] = {}
    for v in p.labels.tolist():
        if v != MISSING and v not in remap:
            remap[v] = len(remap)
    lut = np.full(p.k, MISSING, dtype=np.int64)
    for old, new in remap.items():
        lut[old] = new
    out = np.where(p.known, lut[np.where(p.known, p.labels, 0)], MISSING)
    tokens = None
    if p.tokens is not None:
        inv = sorted(remap, key=remap.get)
        tokens = tuple(p.tokens[old] for old in inv)
    return Partition(out, len(remap), p.provenance, tokens)


def _pair(a: str, b: str) -> tuple[str, str]:
    a, b = str(a), str(b)
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True, eq=False)
class SupervisionBundle:
    """Seed labels plus must-link / cannot-link pairs, keyed by object id.

    ``closed`` is set by :func:`validate_supervision` once ``must_link`` holds
    every pair implied by transitivity.
    """

    seeds: Mapping[str, int] = field(default_factory=dict)
    must_link: frozenset = frozenset()
    cannot_link: frozenset = frozenset()
    closed: bool = False

    def __post_init__(self):
        seeds = {str(k): int(v) for k, v in dict(self.seeds).items()}
        if any(v < 0 for v in seeds.values()):
            raise ValidationError("seed class labels must be non-negative")
        object.__setattr__(self, "seeds", MappingProxyType(seeds))
        object.__setattr__(self, "must_link", frozenset(_pair(*p) for p in self.must_link))
        object.__setattr__(self, "cannot_link", frozenset(_pair(*p) for p in self.cannot_link))

    @property
    def is_empty(self) -> bool:
        return not (self.seeds or self.must_link or self.cannot_link)

    def __eq__(self, other):
        if not isinstance(other, SupervisionBundle):
            return NotImplemented
        return (dict(self.seeds) == dict(other.seeds) and self.must_link == other.must_link
                and self.cannot_link == other.cannot_link)

    __hash__ = None


def must_link_closure(pairs: Iterable[tuple[int, int]], n: int) -> list[list[int]]:
    """Connected components of the must-link graph over objects ``0..n-1``.

    Groups are sorted internally and ordered by their smallest member; every
    object appears in exactly one group (singletons included).
    """
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in pairs:
        if not (0 <= a < n and 0 <= b < n):
            raise IndexOutOfRange(f"pair ({a}, {b}) outside [0, {n})")
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values(), key=lambda g: g[0])


@dataclass(frozen=True)
class IndexedSupervision:
    """Index-space view of a validated bundle, as consumed by the clusterers."""

    seeds: Mapping[int, int]
    ml_groups: tuple[tuple[int, ...], ...]  # only groups of size >= 2
    cannot_link: tuple[tuple[int, int], ...]


def _check_ids(bundle: SupervisionBundle, data: Dataset) -> None:
    for oid in bundle.seeds:
        data.index_of(oid)
    for a, b in (*bundle.must_link, *bundle.cannot_link):
        data.index_of(a)
        data.index_of(b)


def validate_supervision(bundle: SupervisionBundle, data: Dataset) -> SupervisionBundle:
    """Check ids, close must-links transitively and reject contradictions."""
    _check_ids(bundle, data)
    idx = data.index_of
    groups = must_link_closure(((idx(a), idx(b)) for a, b in bundle.must_link), data.n)
    comp = np.empty(data.n, dtype=np.int64)
    for g, members in enumerate(groups):
        comp[members] = g
    for a, b in sorted(bundle.cannot_link):
        if comp[idx(a)] == comp[idx(b)]:
            raise ConflictingConstraints(
                f"cannot-link ({a}, {b}) contradicts the must-link closure")
    ids = data.object_ids
    closed = {
        _pair(ids[members[i]], ids[members[j]])
        for members in groups if len(members) > 1
        for i in range(len(members)) for j in range(i + 1, len(members))
    }
    return SupervisionBundle(bundle.seeds, frozenset(closed), bundle.cannot_link, closed=True)


def index_supervision(bundle: SupervisionBundle, data: Dataset) -> IndexedSupervision:
    _check_ids(bundle, data)
    idx = data.index_of
    groups = must_link_closure(((idx(a), idx(b)) for a, b in bundle.must_link), data.n)
    return IndexedSupervision(
        seeds=MappingProxyType({idx(o): c for o, c in bundle.seeds.items()}),
        ml_groups=tuple(tuple(g) for g in groups if len(g) > 1),
        cannot_link=tuple(sorted((min(idx(a), idx(b)), max(idx(a), idx(b)))
                                 for a, b in bundle.cannot_link)),
    )


@dataclass(frozen=True)
class PartitionWeights:
    """Algorithm weight ``alpha`` and feedback weight ``beta`` of one partition."""

    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v < 0:
                raise ValidationError(f"{name} must be a finite real >= 0, got {v}")
            object.__setattr__(self, name, v)

    @property
    def omega(self) -> float:
        return self.alpha * self.beta


@dataclass(frozen=True, eq=False)
class Ensemble:
    partitions: tuple[Partition, ...]
    weights: tuple[PartitionWeights, ...]
    reference_index: int = 0

    def __post_init__(self):
        parts = tuple(self.partitions)
        if not parts:
            raise ValidationError("ensemble needs at least one partition")
        weights = tuple(self.weights) if self.weights is not None else ()
        if len(weights) != len(parts):
            raise LengthMismatch(f"{len(weights)} weights for {len(parts)} partitions")
        n = parts[0].n
        for j, p in enumerate(parts):
            if p.n != n:
                raise LengthMismatch(f"partition {j} has {p.n} labels, expected {n}")
        if not 0 <= self.reference_index < len(parts):
            raise IndexOutOfRange(
                f"reference index {self.reference_index} outside [0, {len(parts)})")
        if not any(w.omega > 0 for w in weights):
            raise AllZeroWeights("every partition has alpha*beta = 0")
        object.__setattr__(self, "partitions", parts)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def unweighted(cls, partitions: Sequence[Partition], reference_index: int = 0) -> "Ensemble":
        return cls(tuple(partitions), tuple(PartitionWeights() for _ in partitions),
                   reference_index)

    @property
    def m(self) -> int:
        return len(self.partitions)

    @property
    def n(self) -> int:
        return self.partitions[0].n

    @property
    def reference(self) -> Partition:
        return self.partitions[self.reference_index]

    def __eq__(self, other):
        if not isinstance(other, Ensemble):
            return NotImplemented
        return (self.reference_index == other.reference_index
                and self.weights == other.weights
                and self.partitions == other.partitions)

    __hash__ = None


@dataclass(frozen=True)
class AlignmentMap:
    """Injective relabeling of a source partition into a target label space.

    Source labels that found no counterpart among the ``k_tgt`` target labels
    map to fresh labels ``k_tgt, k_tgt+1, ...``.
    """

    mapping: tuple[int, ...]
    k_tgt: int
    score: float

    def __post_init__(self):
        mapping = tuple(int(t) for t in self.mapping)
        if len(set(mapping)) != len(mapping):
            raise ValidationError(f"mapping {mapping} is not injective")
        if any(t < 0 for t in mapping):
            raise ValidationError("mapping targets must be non-negative")
        object.__setattr__(self, "mapping", mapping)

    @property
    def k_src(self) -> int:
        return len(self.mapping)

    @property
    def n_targets(self) -> int:
        return max(self.k_tgt, max(self.mapping, default=-1) + 1)

    def __getitem__(self, label: int) -> int:
        return self.mapping[label]


@dataclass(frozen=True, eq=False)
class ConsensusResult:
    """Final labels with the vote tallies behind them.

    ``scores[i, l]`` is the total weight object ``i`` received for label ``l``.
    """

    labels: np.ndarray
    scores: np.ndarray
    margin: np.ndarray
    tie_flags: np.ndarray
    abstained: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "labels", _frozen_array(self.labels, np.int64))
        object.__setattr__(self, "scores", _frozen_array(self.scores, np.float64))
        object.__setattr__(self, "margin", _frozen_array(self.margin, np.float64))
        object.__setattr__(self, "tie_flags", _frozen_array(self.tie_flags, bool))
        object.__setattr__(self, "abstained", _frozen_array(self.abstained, bool))

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    def scores_for(self, i: int) -> dict[int, float]:
        row = self.scores[i]
        return {int(l): float(row[l]) for l in np.flatnonzero(row > 0)}

    def to_partition(self, provenance: Provenance = Provenance("consensus"),
                     tokens: Sequence[str] | None = None) -> Partition:
        return Partition(self.labels, self.scores.shape[1], provenance,
                         None if tokens is None else tuple(tokens))
