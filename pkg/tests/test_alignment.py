import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linear_sum_assignment

from scev.alignment import (
    ContingencyTable,
    alignment_is_unique,
    all_optimal_alignments,
    apply_alignment,
    brute_force_alignment,
    contingency_table,
    optimal_alignment,
    overlap_score,
)
from scev.core import MISSING, AlignmentMap, Partition
from scev.errors import LengthMismatch, TooLarge, UnmappedLabel

tables = st.tuples(st.integers(1, 6), st.integers(1, 6)).flatmap(
    lambda shape: st.lists(st.lists(st.integers(0, 20), min_size=shape[1], max_size=shape[1]),
                           min_size=shape[0], max_size=shape[0]))


def tok(p, label):
    return p.tokens[label]


class TestContingency:
    def test_example_c2_vs_c1(self, example):
        c1, c2 = example[0], example[1]
        t = contingency_table(c2, c1)
        assert c2.tokens == ("A", "B", "C") and c1.tokens == ("1", "2", "3")
        assert t.counts.tolist() == [[2, 0, 0], [0, 1, 2], [0, 1, 1]]
        assert t.n_effective == 7

    def test_example_c4_vs_c1(self, example):
        c1, c4 = example[0], example[3]
        t = contingency_table(c4, c1)
        rows = {tok(c4, a): t.counts[a].tolist() for a in range(c4.k)}
        assert rows == {"Z": [1, 1, 1], "Y": [1, 1, 0]}
        assert t.n_effective == 5  # x3, x7 unknown in C4

    def test_self_is_diagonal(self):
        p = Partition.from_labels([0, 0, 1, 2, 2, 2])
        assert contingency_table(p, p).counts.tolist() == [[2, 0, 0], [0, 1, 0], [0, 0, 3]]

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            contingency_table(Partition.from_labels([0, 1]), Partition.from_labels([0, 1, 1]))

    @given(st.lists(st.tuples(st.integers(-1, 3), st.integers(-1, 3)), min_size=1, max_size=40)
           .filter(lambda xs: any(a >= 0 for a, _ in xs) and any(b >= 0 for _, b in xs)))
    def test_sums_to_n_effective(self, pairs):
        p = Partition.from_labels([a for a, _ in pairs], k=4)
        q = Partition.from_labels([b for _, b in pairs], k=4)
        t = contingency_table(p, q)
        assert t.counts.sum() == t.n_effective == sum(a >= 0 and b >= 0 for a, b in pairs)


class TestOptimalAlignment:
    def test_example_c2(self):
        m = optimal_alignment(ContingencyTable.from_counts([[2, 0, 0], [0, 1, 2], [0, 1, 1]]))
        assert m.mapping == (0, 2, 1)  # A->1, B->3, C->2
        assert m.score == 5

    def test_example_c3_lexicographic(self):
        t = ContingencyTable.from_counts([[1, 1, 0], [1, 0, 1], [0, 1, 1]])
        # oracle: all 6 permutations by hand
        scores = {perm: sum(t.counts[a, b] for a, b in enumerate(perm))
                  for perm in itertools.permutations(range(3))}
        best = max(scores.values())
        optima = sorted(p for p, s in scores.items() if s == best)
        assert best == 3 and optima == [(0, 2, 1), (1, 0, 2)]
        m = optimal_alignment(t)
        assert m.mapping == (0, 2, 1) and m.score == 3
        assert not alignment_is_unique(t, m)
        assert all_optimal_alignments(t) == optima

    def test_diagonal(self):
        t = ContingencyTable.from_counts(np.diag([4, 1, 3, 2]))
        m = optimal_alignment(t)
        assert m.mapping == (0, 1, 2, 3) and m.score == 10
        assert alignment_is_unique(t, m)

    def test_more_source_labels_get_fresh_targets(self):
        t = ContingencyTable.from_counts([[0, 0], [3, 0], [0, 2], [1, 1]])
        m = optimal_alignment(t)
        assert m.mapping[1] == 0 and m.mapping[2] == 1
        assert sorted(m.mapping[a] for a in (0, 3)) == [2, 3]
        assert m.n_targets == 4
        assert m.score == 5

    def test_fewer_source_labels(self):
        t = ContingencyTable.from_counts([[0, 0, 5]])
        assert optimal_alignment(t).mapping == (2,)

    @settings(max_examples=300, deadline=None)
    @given(tables)
    def test_matches_brute_force(self, rows):
        t = ContingencyTable.from_counts(rows)
        fast, slow = optimal_alignment(t), brute_force_alignment(t)
        assert fast.mapping == slow.mapping
        assert fast.score == slow.score

    @settings(max_examples=200, deadline=None)
    @given(tables)
    def test_optimum_value_agrees_with_scipy(self, rows):
        counts = np.asarray(rows, dtype=float)
        r, c = linear_sum_assignment(counts, maximize=True)
        assert optimal_alignment(ContingencyTable.from_counts(counts)).score == counts[r, c].sum()

    @settings(max_examples=100, deadline=None)
    @given(tables)
    def test_score_beats_every_injective_mapping(self, rows):
        t = ContingencyTable.from_counts(rows)
        best = optimal_alignment(t).score
        size = max(t.k_src, t.k_tgt)
        for mapping in itertools.permutations(range(size), t.k_src):
            assert overlap_score(t.counts, mapping, t.k_tgt) <= best

    @given(st.lists(st.one_of(st.just(MISSING), st.integers(0, 4)), min_size=1, max_size=40)
           .filter(lambda xs: any(x >= 0 for x in xs)))
    def test_self_alignment_is_identity(self, labels):
        p = Partition.from_labels(labels, k=5)
        m = optimal_alignment(contingency_table(p, p))
        assert m.mapping == tuple(range(5))
        assert m.score == int(p.known.sum())

    @settings(deadline=None)
    @given(st.lists(st.integers(0, 3), min_size=2, max_size=40), st.lists(st.integers(0, 3), min_size=40, max_size=40),
           st.permutations(range(4)))
    def test_score_invariant_under_source_relabeling(self, src, ref, perm):
        ref = ref[: len(src)]
        p = Partition.from_labels(src, k=4)
        q = Partition.from_labels([perm[v] for v in src], k=4)
        r = Partition.from_labels(ref, k=4)
        assert (optimal_alignment(contingency_table(p, r)).score
                == optimal_alignment(contingency_table(q, r)).score)

    def test_recomputed_score(self, rng):
        counts = rng.integers(0, 9, size=(5, 4))
        m = optimal_alignment(ContingencyTable.from_counts(counts))
        assert m.score == sum(counts[a, b] for a, b in enumerate(m.mapping) if b < 4)


class TestBruteForce:
    def test_one_by_one(self):
        m = brute_force_alignment(ContingencyTable.from_counts([[3]]))
        assert m.mapping == (0,) and m.score == 3

    def test_size_bound(self, rng):
        t = ContingencyTable.from_counts(rng.integers(0, 10, size=(8, 8)))
        assert brute_force_alignment(t).mapping == optimal_alignment(t).mapping
        with pytest.raises(TooLarge):
            brute_force_alignment(ContingencyTable.from_counts(np.ones((9, 2))))


class TestApplyAlignment:
    def test_example_c2(self, example):
        c1, c2 = example[0], example[1]
        aligned = apply_alignment(c2, AlignmentMap((0, 2, 1), 3, 5.0), c1.tokens)
        assert aligned.as_tokens() == ["1", "1", "3", "2", "3", "2", "3"]

    def test_example_c4(self, example):
        c1, c4 = example[0], example[3]
        assert c4.tokens == ("Y", "Z")
        aligned = apply_alignment(c4, AlignmentMap((0, 1), 3, 2.0), c1.tokens)  # Y->1, Z->2
        assert aligned.as_tokens() == ["2", "1", "?", "1", "2", "2", "?"]

    def test_identity(self):
        p = Partition.from_labels([1, 0, MISSING, 2])
        assert apply_alignment(p, AlignmentMap((0, 1, 2), 3, 0.0)).labels.tolist() == p.labels.tolist()

    def test_unmapped(self):
        with pytest.raises(UnmappedLabel):
            apply_alignment(Partition.from_labels([0, 1, 2]), AlignmentMap((0, 1), 2, 0.0))

    @given(st.lists(st.one_of(st.just(MISSING), st.integers(0, 4)), min_size=2, max_size=30)
           .filter(lambda xs: any(x >= 0 for x in xs)), st.permutations(range(7)))
    def test_preserves_comembership(self, labels, targets):
        p = Partition.from_labels(labels, k=5)
        a = apply_alignment(p, AlignmentMap(tuple(targets[:5]), 7, 0.0))
        for i, j in itertools.combinations(range(len(labels)), 2):
            if labels[i] >= 0 and labels[j] >= 0:
                assert (labels[i] == labels[j]) == (a.labels[i] == a.labels[j])
        assert ((a.labels == MISSING) == (p.labels == MISSING)).all()
