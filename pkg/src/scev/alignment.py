"""Label correspondence between a partition and the reference partition.

The overlap between two partitions is summarised in a contingency table;
the relabeling with maximum overlap is a maximum-weight bipartite matching,
solved here with the Hungarian method in O(k^3).

Ties are common on small examples, so the matching is made deterministic:
among all optimal injective mappings the lexicographically smallest vector
``(mapping[0], mapping[1], ...)`` is returned. The Hungarian duals make this
cheap. Every optimal assignment uses only edges with zero reduced cost, and
every perfect matching on those edges is optimal, so the lexicographic
refinement is a matching problem on the tight subgraph.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from math import inf

import numpy as np

from .core import MISSING, AlignmentMap, Partition
from .errors import LengthMismatch, TooLarge, UnmappedLabel, ValidationError

BRUTE_FORCE_LIMIT = 8


@dataclass(frozen=True, eq=False)
class ContingencyTable:
    """``counts[a, b]`` = objects labeled ``a`` in the source and ``b`` in the target."""

    counts: np.ndarray
    n_effective: float

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.float64)
        if counts.ndim != 2 or min(counts.shape) < 1:
            raise ValidationError(f"contingency table must be a non-empty matrix, got {counts.shape}")
        if not np.isfinite(counts).all() or (counts < 0).any():
            raise ValidationError("contingency counts must be finite and non-negative")
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "n_effective", float(self.n_effective))

    @classmethod
    def from_counts(cls, counts) -> "ContingencyTable":
        counts = np.asarray(counts, dtype=np.float64)
        return cls(counts, counts.sum())

    @property
    def k_src(self) -> int:
        return self.counts.shape[0]

    @property
    def k_tgt(self) -> int:
        return self.counts.shape[1]


def contingency_table(p: Partition, ref: Partition) -> ContingencyTable:
    """Co-occurrence counts of ``p``'s labels (rows) against ``ref``'s (columns).

    Objects MISSING in either partition contribute nothing.
    """
    if p.n != ref.n:
        raise LengthMismatch(f"partitions have {p.n} and {ref.n} objects")
    both = p.known & ref.known
    flat = p.labels[both] * ref.k + ref.labels[both]
    counts = np.bincount(flat, minlength=p.k * ref.k).reshape(p.k, ref.k)
    return ContingencyTable(counts.astype(np.float64), float(both.sum()))


def overlap_score(counts, mapping, k_tgt: int) -> float:
    """Overlap achieved by ``mapping``; fresh targets (>= ``k_tgt``) add nothing."""
    rows = counts.tolist() if isinstance(counts, np.ndarray) else counts
    total = 0.0
    for a, b in enumerate(mapping):
        if b < k_tgt:
            total += rows[a][b]
    return total


def _hungarian_min(cost: list[list[float]]) -> tuple[list[int], list[float], list[float]]:
    """Minimum-cost perfect matching on a square matrix.

    Shortest augmenting path formulation with row/column potentials. Returns
    ``(row_to_col, u, v)`` where ``cost[i][j] - u[i] - v[j] >= 0`` everywhere
    and is zero on the matching.
    """
    n = len(cost)
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    owner = [0] * (n + 1)  # owner[j]: 1-based row matched to column j, 0 = free
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        owner[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = owner[j0]
            row = cost[i0 - 1]
            ui0 = u[i0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = row[j - 1] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[owner[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if owner[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            owner[j0] = owner[j1]
            j0 = j1
    row_to_col = [0] * n
    for j in range(1, n + 1):
        row_to_col[owner[j] - 1] = j - 1
    return row_to_col, u[1:], v[1:]


def _padded_gain(t: ContingencyTable) -> list[list[float]]:
    size = max(t.k_src, t.k_tgt)
    gain = [[0.0] * size for _ in range(size)]
    for a, row in enumerate(t.counts.tolist()):
        gain[a][: len(row)] = row
    return gain


def _tight_graph(gain: list[list[float]]) -> list[list[int]]:
    """Adjacency lists (ascending column) of zero-reduced-cost edges."""
    size = len(gain)
    cost = [[-g for g in row] for row in gain]
    match, u, v = _hungarian_min(cost)
    scale = max(1.0, max((abs(g) for row in gain for g in row), default=0.0))
    eps = 1e-9 * scale * size
    adj = [[j for j in range(size) if cost[i][j] - u[i] - v[j] <= eps] for i in range(size)]
    # the matching itself is tight by construction; guard against rounding
    for i, j in enumerate(match):
        if j not in adj[i]:
            adj[i].append(j)
            adj[i].sort()
    return adj, match


def _lexmin_matching(adj: list[list[int]], match: list[int]) -> list[int]:
    """Lexicographically smallest perfect matching in ``adj`` given any perfect ``match``."""
    size = len(adj)
    match = list(match)
    owner = [0] * size
    for i, j in enumerate(match):
        owner[j] = i
    fixed_col = [False] * size
    for a in range(size):
        for b in adj[a]:
            if fixed_col[b]:
                continue
            if match[a] == b:
                break
            if _reroute(adj, match, owner, fixed_col, a, b):
                break
        fixed_col[match[a]] = True
    return match


def _reroute(adj, match, owner, fixed_col, a: int, b: int) -> bool:
    """Give column ``b`` to row ``a`` if its current owner can be rematched.

    The owner must reach ``a``'s old column along an alternating path that
    avoids fixed columns and column ``b``. Applies the change on success.
    """
    target = match[a]
    start = owner[b]
    prev_col: dict[int, int] = {}  # column -> column we came from (-1 for start row)
    queue = deque()
    for c in adj[start]:
        if c != b and not fixed_col[c] and c not in prev_col:
            prev_col[c] = -1
            queue.append(c)
    found = False
    while queue:
        c = queue.popleft()
        if c == target:
            found = True
            break
        r = owner[c]
        for c2 in adj[r]:
            if c2 != b and not fixed_col[c2] and c2 not in prev_col:
                prev_col[c2] = c
                queue.append(c2)
    if not found:
        return False
    # walk back from target: each column on the path goes to the row that reached it
    c = target
    while True:
        p = prev_col[c]
        r = start if p == -1 else owner[p]
        match[r] = c
        owner[c] = r
        if p == -1:
            break
        c = p
    match[a] = b
    owner[b] = a
    return True


def optimal_alignment(t: ContingencyTable) -> AlignmentMap:
    """Maximum-overlap injective relabeling of the table's rows onto its columns.

    When ``k_src > k_tgt`` the surplus source labels receive fresh labels
    ``k_tgt, k_tgt+1, ...``. Among equally good mappings the lexicographically
    smallest is returned.
    """
    gain = _padded_gain(t)
    adj, match = _tight_graph(gain)
    match = _lexmin_matching(adj, match)
    mapping = tuple(match[: t.k_src])
    return AlignmentMap(mapping, t.k_tgt, overlap_score(t.counts, mapping, t.k_tgt))


def brute_force_alignment(t: ContingencyTable) -> AlignmentMap:
    """Exhaustive search over injective mappings; the test oracle for :func:`optimal_alignment`."""
    size = max(t.k_src, t.k_tgt)
    if size > BRUTE_FORCE_LIMIT:
        raise TooLarge(f"brute force limited to {BRUTE_FORCE_LIMIT} labels, got {size}")
    rows = t.counts.tolist()
    best, best_score = None, -inf
    # permutations() yields tuples in lexicographic order, so the first maximiser wins
    for mapping in itertools.permutations(range(size), t.k_src):
        s = overlap_score(rows, mapping, t.k_tgt)
        if s > best_score:
            best, best_score = mapping, s
    return AlignmentMap(best, t.k_tgt, best_score)


def _has_perfect_matching(allowed: list[list[int]]) -> bool:
    size = len(allowed)
    owner = [-1] * size

    def augment(r: int, seen: list[bool]) -> bool:
        for c in allowed[r]:
            if not seen[c]:
                seen[c] = True
                if owner[c] == -1 or augment(owner[c], seen):
                    owner[c] = r
                    return True
        return False

    return all(augment(r, [False] * size) for r in range(size))


def alignment_is_unique(t: ContingencyTable, m: AlignmentMap | None = None) -> bool:
    """Whether every optimal mapping agrees with ``m`` on each source label.

    Source labels that map to fresh labels count as agreeing with any other
    fresh assignment.
    """
    if m is None:
        m = optimal_alignment(t)
    gain = _padded_gain(t)
    adj, _ = _tight_graph(gain)
    k_tgt = t.k_tgt
    for a in range(t.k_src):
        b = m.mapping[a]
        if b < k_tgt:
            banned = {b}
        else:
            banned = set(range(k_tgt, len(gain)))
        trial = [list(cols) for cols in adj]
        trial[a] = [c for c in adj[a] if c not in banned]
        if _has_perfect_matching(trial):
            return False
    return True


def all_optimal_alignments(t: ContingencyTable, limit: int = 6) -> list[tuple[int, ...]] | None:
    """Every optimal mapping (up to fresh-label order), or None when the table is too big."""
    size = max(t.k_src, t.k_tgt)
    if size > limit:
        return None
    rows = t.counts.tolist()
    best = brute_force_alignment(t).score
    seen, out = set(), []
    for mapping in itertools.permutations(range(size), t.k_src):
        if overlap_score(rows, mapping, t.k_tgt) == best:
            key = tuple(b if b < t.k_tgt else -1 for b in mapping)
            if key not in seen:
                seen.add(key)
                out.append(mapping)
    return out


def apply_alignment(p: Partition, m: AlignmentMap, tokens=None) -> Partition:
    """Relabel ``p`` through ``m``; MISSING stays MISSING.

    ``tokens`` optionally names the target label space.
    """
    if p.k > m.k_src:
        used = np.unique(p.labels[p.known])
        unmapped = used[used >= m.k_src]
        if unmapped.size:
            raise UnmappedLabel(f"labels {unmapped.tolist()} have no entry in the alignment map")
    lut = np.asarray(m.mapping + (0,) * max(0, p.k - m.k_src), dtype=np.int64)
    known = p.known
    out = np.where(known, lut[np.where(known, p.labels, 0)], MISSING)
    k = m.n_targets
    if tokens is not None:
        tokens = tuple(tokens)
        if len(tokens) != k:
            tokens = None
    return Partition(out, k, p.provenance, tokens)
