"""Base partition generators and ensemble orchestration.

All variants share one Lloyd-style loop and differ in how centroids are
initialised and in what the assignment step is allowed to do:

* ``kmeans``: random distinct points, free assignment.
* ``seeded``: centroids start at the per-class mean of the seed objects.
* ``constrained``: as ``seeded``, but seed objects stay pinned to their class.
* ``cop``: must-link groups move as a block, cannot-link pairs never share a cluster.
* ``spherical``: unit-normalised rows, cosine similarity instead of distance.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .consensus import ReferencePolicy, select_reference
from .core import (
    Dataset,
    Ensemble,
    IndexedSupervision,
    Partition,
    PartitionWeights,
    Provenance,
    SupervisionBundle,
    canonicalize,
    index_supervision,
    validate_supervision,
)
from .errors import (
    DegenerateInput,
    InfeasibleAssignment,
    MissingSeedClass,
    SCEVError,
    ValidationError,
    ZeroVector,
)

logger = logging.getLogger(__name__)

ALGORITHMS = ("kmeans", "seeded", "constrained", "cop", "spherical")
EMPTY_POLICIES = ("reseed-farthest", "drop")


@dataclass(frozen=True)
class ClustererConfig:
    k: int
    max_iters: int = 100
    tol: float = 1e-6
    rng_seed: int = 0
    empty_cluster_policy: str = "reseed-farthest"

    def __post_init__(self):
        if int(self.k) < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        if int(self.max_iters) < 1:
            raise ValidationError(f"max_iters must be positive, got {self.max_iters}")
        if not self.tol >= 0:
            raise ValidationError(f"tol must be >= 0, got {self.tol}")
        if self.empty_cluster_policy not in EMPTY_POLICIES:
            raise ValidationError(f"empty_cluster_policy must be one of {EMPTY_POLICIES}")

    def check(self, data: Dataset) -> None:
        if self.k > data.n:
            raise DegenerateInput(f"k={self.k} exceeds the number of objects n={data.n}")


@dataclass
class Fit:
    """Raw output of a clustering run, kept for diagnostics and tests."""

    labels: np.ndarray
    centroids: np.ndarray
    objective: list[float] = field(default_factory=list)
    n_iter: int = 0
    converged: bool = False


def _sq_distances(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    diff = X[:, None, :] - C[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _random_init(X: np.ndarray, k: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    idx = rng.choice(X.shape[0], size=k, replace=False)
    return X[np.sort(idx)].copy()


def _seed_means(X: np.ndarray, seeds: Mapping[int, int], k: int) -> np.ndarray:
    missing = sorted(set(range(k)) - set(seeds.values()))
    if missing:
        raise MissingSeedClass(f"no seed for class(es) {missing} with k={k}")
    extra = sorted(set(seeds.values()) - set(range(k)))
    if extra:
        raise MissingSeedClass(f"seed class(es) {extra} outside [0, {k})")
    idx = np.fromiter(seeds.keys(), dtype=np.int64)
    cls = np.fromiter(seeds.values(), dtype=np.int64)
    C = np.zeros((k, X.shape[1]))
    np.add.at(C, cls, X[idx])
    return C / np.bincount(cls, minlength=k)[:, None]


def _fix_empty(labels, C, X, pinned, policy, cost_of):
    """Handle clusters that lost all members after an assignment step.

    ``reseed-farthest`` moves each empty centroid onto the unpinned object
    worst served by its current centroid and reassigns that object;
    ``drop`` removes the centroid.
    """
    k = C.shape[0]
    counts = np.bincount(labels, minlength=k)
    empty = np.flatnonzero(counts == 0)
    if empty.size == 0:
        return labels, C
    if policy == "drop":
        keep = np.flatnonzero(counts > 0)
        remap = np.full(k, -1)
        remap[keep] = np.arange(keep.size)
        return remap[labels], C[keep]
    cost = cost_of(labels, C)
    for e in empty:
        cand = cost.copy()
        cand[pinned] = -np.inf
        # never strip a cluster of its last member
        counts = np.bincount(labels, minlength=k)
        cand[counts[labels] <= 1] = -np.inf
        i = int(np.argmax(cand))
        if not np.isfinite(cand[i]):
            break
        labels[i] = e
        C[e] = X[i]
        cost[i] = -np.inf
    return labels, C


def _lloyd(X: np.ndarray, C: np.ndarray, cfg: ClustererConfig,
           pinned: Mapping[int, int] | None = None) -> Fit:
    """Euclidean Lloyd iterations from initial centroids ``C``.

    ``pinned`` forces object -> cluster in every assignment step.
    """
    C = np.array(C, dtype=np.float64)
    pin_idx = pin_cls = None
    pinned_mask = np.zeros(X.shape[0], dtype=bool)
    if pinned:
        pin_idx = np.fromiter(pinned.keys(), dtype=np.int64)
        pin_cls = np.fromiter(pinned.values(), dtype=np.int64)
        pinned_mask[pin_idx] = True
    wcss = lambda lab, cen: float(((X - cen[lab]) ** 2).sum())
    cost_of = lambda lab, cen: ((X - cen[lab]) ** 2).sum(axis=1)

    fit = Fit(labels=np.zeros(X.shape[0], dtype=np.int64), centroids=C)
    for it in range(1, cfg.max_iters + 1):
        labels = np.argmin(_sq_distances(X, C), axis=1)
        if pin_idx is not None:
            labels[pin_idx] = pin_cls
        labels, C = _fix_empty(labels, C, X, pinned_mask, cfg.empty_cluster_policy, cost_of)
        fit.objective.append(wcss(labels, C))
        k = C.shape[0]
        new_C = np.zeros_like(C)
        np.add.at(new_C, labels, X)
        new_C /= np.bincount(labels, minlength=k)[:, None]
        fit.objective.append(wcss(labels, new_C))
        shift = float(np.sqrt(((new_C - C) ** 2).sum(axis=1)).max())
        C = new_C
        fit.labels, fit.centroids, fit.n_iter = labels, C, it
        if shift < cfg.tol:
            fit.converged = True
            break
    return fit


def _partition(fit: Fit, k: int, name: str, cfg: ClustererConfig) -> Partition:
    k_out = fit.centroids.shape[0] if cfg.empty_cluster_policy == "drop" else k
    return Partition(fit.labels, k_out, Provenance(name, "", cfg.rng_seed))


def _assert_monotone(objective: Sequence[float], increasing: bool = False) -> None:
    if __debug__ and len(objective) > 1:
        obj = np.asarray(objective)
        step = np.diff(obj) if increasing else -np.diff(obj)
        slack = 1e-9 * max(1.0, float(np.abs(obj).max()))
        assert (step >= -slack).all(), f"objective not monotone: {obj.tolist()}"


def _index_seeds(seeds, data: Dataset) -> dict[int, int]:
    if isinstance(seeds, SupervisionBundle):
        seeds = seeds.seeds
    out = {}
    for key, cls in dict(seeds).items():
        i = key if isinstance(key, (int, np.integer)) else data.index_of(key)
        if not 0 <= i < data.n:
            raise ValidationError(f"seed index {i} outside [0, {data.n})")
        out[int(i)] = int(cls)
    return out


def lloyd_fit(data: Dataset, cfg: ClustererConfig, init_centroids=None) -> Fit:
    cfg.check(data)
    X = data.features
    if init_centroids is None:
        C = _random_init(X, cfg.k, cfg.rng_seed)
    else:
        C = np.asarray(init_centroids, dtype=np.float64)
        if C.shape != (cfg.k, data.d):
            raise ValidationError(f"init_centroids must have shape ({cfg.k}, {data.d}), got {C.shape}")
    fit = _lloyd(X, C, cfg)
    _assert_monotone(fit.objective)
    return fit


def lloyd_kmeans(data: Dataset, cfg: ClustererConfig, init_centroids=None) -> Partition:
    """Plain k-means (squared Euclidean). Unseeded starts use ``k`` distinct random rows."""
    return _partition(lloyd_fit(data, cfg, init_centroids), cfg.k, "kmeans", cfg)


def seeded_fit(data: Dataset, seeds, cfg: ClustererConfig, pin: bool = False) -> Fit:
    cfg.check(data)
    seeds = _index_seeds(seeds, data)
    C = _seed_means(data.features, seeds, cfg.k)
    fit = _lloyd(data.features, C, cfg, pinned=seeds if pin else None)
    _assert_monotone(fit.objective)
    return fit


def seeded_kmeans(data: Dataset, seeds, cfg: ClustererConfig) -> Partition:
    """k-means started from the mean of the seed objects of each class.

    ``seeds`` maps object id (or row index) to class in ``0..k-1``; every
    class needs at least one seed. Seed objects may change cluster later.
    """
    return _partition(seeded_fit(data, seeds, cfg), cfg.k, "seeded", cfg)


def constrained_kmeans(data: Dataset, seeds, cfg: ClustererConfig) -> Partition:
    """Seeded k-means whose seed objects never leave their seed class."""
    return _partition(seeded_fit(data, seeds, cfg, pin=True), cfg.k, "constrained", cfg)


def _cop_assign(D: np.ndarray, groups: list[np.ndarray], cl_of: list[list[int]]) -> np.ndarray:
    """One COP assignment pass in ascending object order.

    ``groups[g]`` holds the members of a must-link block (singletons
    included). A block goes to the nearest centroid, by mean squared
    distance of its members, at which none of its members has an already
    assigned cannot-link partner.
    """
    n, k = D.shape
    labels = np.full(n, -1, dtype=np.int64)
    for members in groups:
        dist = D[members].mean(axis=0)
        banned = set()
        for i in members.tolist():
            for j in cl_of[i]:
                if labels[j] >= 0:
                    banned.add(int(labels[j]))
        for c in np.argsort(dist, kind="stable").tolist():
            if c not in banned:
                labels[members] = c
                break
        else:
            raise InfeasibleAssignment(
                f"object {int(members[0])} (must-link block of {members.size}) has no "
                f"centroid free of cannot-link conflicts among {k} clusters")
    return labels


def cop_fit(data: Dataset, constraints, cfg: ClustererConfig, init_centroids=None) -> Fit:
    cfg.check(data)
    X = data.features
    if constraints is None:
        sup = IndexedSupervision({}, (), ())
    elif isinstance(constraints, IndexedSupervision):
        sup = constraints
    else:
        sup = index_supervision(constraints, data)
    n = data.n
    block_of = np.arange(n)
    for members in sup.ml_groups:
        block_of[list(members)] = members[0]
    for a, b in sup.cannot_link:
        if block_of[a] == block_of[b]:
            raise InfeasibleAssignment(f"objects {a} and {b} are both must- and cannot-linked")
    # blocks ordered by their first (smallest) member, i.e. ascending object order
    blocks: dict[int, list[int]] = {}
    for i, r in enumerate(block_of.tolist()):
        blocks.setdefault(r, []).append(i)
    groups = [np.asarray(g) for g in blocks.values()]
    cl_of: list[list[int]] = [[] for _ in range(n)]
    for a, b in sup.cannot_link:
        cl_of[a].append(b)
        cl_of[b].append(a)

    C = _random_init(X, cfg.k, cfg.rng_seed) if init_centroids is None \
        else np.asarray(init_centroids, dtype=np.float64)
    fit = Fit(labels=np.zeros(n, dtype=np.int64), centroids=C)
    for it in range(1, cfg.max_iters + 1):
        labels = _cop_assign(_sq_distances(X, C), groups, cl_of)
        new_C = C.copy()
        counts = np.bincount(labels, minlength=C.shape[0])
        sums = np.zeros_like(C)
        np.add.at(sums, labels, X)
        occupied = counts > 0
        new_C[occupied] = sums[occupied] / counts[occupied, None]
        if not occupied.all() and cfg.empty_cluster_policy == "reseed-farthest":
            # relocate only the centroid; members move on the next pass so constraints hold
            far = np.argsort(-((X - new_C[labels]) ** 2).sum(axis=1), kind="stable")
            for e, i in zip(np.flatnonzero(~occupied), far):
                new_C[e] = X[i]
        fit.objective.append(float(((X - new_C[labels]) ** 2).sum()))
        shift = float(np.sqrt(((new_C - C) ** 2).sum(axis=1)).max())
        C = new_C
        fit.labels, fit.centroids, fit.n_iter = labels, C, it
        if shift < cfg.tol:
            fit.converged = True
            break
    if cfg.empty_cluster_policy == "drop":
        used = np.unique(fit.labels)
        remap = np.full(C.shape[0], -1)
        remap[used] = np.arange(used.size)
        fit.labels, fit.centroids = remap[fit.labels], C[used]
    return fit


def cop_kmeans(data: Dataset, constraints: SupervisionBundle | None, cfg: ClustererConfig,
               init_centroids=None) -> Partition:
    """COP-KMeans: k-means whose assignments never violate the pair constraints.

    Seeds in ``constraints`` are ignored. Raises :class:`InfeasibleAssignment`
    when some object cannot be placed.
    """
    return _partition(cop_fit(data, constraints, cfg, init_centroids), cfg.k, "cop", cfg)


def _unit_rows(X: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(X, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise ZeroVector(f"row {int(zero[0])} is all zeros and has no direction")
    return X / norms[:, None]


def _normalize(C: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(C, axis=1)
    out = fallback.copy()
    ok = norms > 1e-12
    out[ok] = C[ok] / norms[ok, None]
    return out


def spherical_fit(data: Dataset, cfg: ClustererConfig, seeds=None) -> Fit:
    cfg.check(data)
    U = _unit_rows(data.features)
    if seeds:
        idx = _index_seeds(seeds, data)
        # a class whose seeds cancel out falls back to its first seed's direction
        first = {}
        for i, c in sorted(idx.items()):
            first.setdefault(c, i)
        C = _seed_means(U, idx, cfg.k)
        C = _normalize(C, U[[first[c] for c in range(cfg.k)]])
    else:
        C = _random_init(U, cfg.k, cfg.rng_seed)
    no_pins = np.zeros(U.shape[0], dtype=bool)
    cost_of = lambda lab, cen: 1.0 - (U * cen[lab]).sum(axis=1)
    cohesion = lambda lab, cen: float((U * cen[lab]).sum())

    fit = Fit(labels=np.zeros(U.shape[0], dtype=np.int64), centroids=C)
    for it in range(1, cfg.max_iters + 1):
        labels = np.argmax(U @ C.T, axis=1)
        labels, C = _fix_empty(labels, C, U, no_pins, cfg.empty_cluster_policy, cost_of)
        fit.objective.append(cohesion(labels, C))
        sums = np.zeros_like(C)
        np.add.at(sums, labels, U)
        new_C = _normalize(sums, C)
        fit.objective.append(cohesion(labels, new_C))
        shift = float((1.0 - (new_C * C).sum(axis=1)).max())
        C = new_C
        fit.labels, fit.centroids, fit.n_iter = labels, C, it
        if shift < cfg.tol:
            fit.converged = True
            break
    _assert_monotone(fit.objective, increasing=True)
    return fit


def spherical_kmeans(data: Dataset, cfg: ClustererConfig, seeds=None) -> Partition:
    """k-means on the unit sphere: rows are normalised, similarity is cosine.

    Optional ``seeds`` initialise the centroids as in :func:`seeded_kmeans`.
    """
    return _partition(spherical_fit(data, cfg, seeds), cfg.k, "spherical", cfg)


@dataclass(frozen=True)
class EnsembleEntry:
    algorithm: str
    config: ClustererConfig
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValidationError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        PartitionWeights(self.alpha, self.beta)


@dataclass(frozen=True)
class EnsembleSpec:
    entries: tuple[EnsembleEntry, ...]
    reference_policy: ReferencePolicy = ReferencePolicy()

    def __post_init__(self):
        entries = tuple(self.entries)
        if not entries:
            raise ValidationError("ensemble spec needs at least one entry")
        object.__setattr__(self, "entries", entries)
        if self.reference_policy.kind == "user" and not 0 <= self.reference_policy.index < len(entries):
            raise ValidationError(
                f"reference index {self.reference_policy.index} outside [0, {len(entries)})")


def run_entry(data: Dataset, entry: EnsembleEntry, supervision: SupervisionBundle) -> Partition:
    cfg = entry.config
    algo = entry.algorithm
    if algo == "kmeans":
        p = lloyd_kmeans(data, cfg)
    elif algo == "seeded":
        p = seeded_kmeans(data, supervision.seeds, cfg)
    elif algo == "constrained":
        p = constrained_kmeans(data, supervision.seeds, cfg)
    elif algo == "cop":
        p = cop_kmeans(data, supervision, cfg)
    else:
        p = spherical_kmeans(data, cfg, supervision.seeds or None)
    return p


def generate_ensemble(data: Dataset, spec: EnsembleSpec,
                      supervision: SupervisionBundle | None = None,
                      workers: int = 1) -> Ensemble:
    """Run every configured clusterer and collect the canonicalised partitions.

    ``workers > 1`` runs entries in threads; results are identical to the
    sequential order because each entry is seeded independently.
    """
    supervision = supervision or SupervisionBundle()
    if not supervision.closed:
        try:
            supervision = validate_supervision(supervision, data)
        except SCEVError as exc:
            raise exc.with_stage("supervision")

    def one(j_entry):
        j, entry = j_entry
        try:
            p = canonicalize(run_entry(data, entry, supervision))
        except SCEVError as exc:
            raise exc.with_stage(f"ensemble[{j}]:{entry.algorithm}")
        logger.debug("entry %d (%s): %d clusters", j, entry.algorithm, p.k)
        return replace(p, provenance=Provenance(entry.algorithm, str(j), entry.config.rng_seed))

    items = list(enumerate(spec.entries))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partitions = list(pool.map(one, items))
    else:
        partitions = [one(it) for it in items]
    weights = tuple(PartitionWeights(e.alpha, e.beta) for e in spec.entries)
    ref = select_reference(len(partitions), spec.reference_policy)
    return Ensemble(tuple(partitions), weights, ref)
