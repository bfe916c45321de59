import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from scev.core import (
    MISSING,
    Dataset,
    Ensemble,
    Partition,
    PartitionWeights,
    SupervisionBundle,
    canonicalize,
    must_link_closure,
    validate_supervision,
)
from scev.errors import (
    AllZeroWeights,
    ConflictingConstraints,
    IndexOutOfRange,
    LengthMismatch,
    UnknownObject,
    ValidationError,
)


def reachability_groups(pairs, n):
    """Oracle: transitive closure of the adjacency matrix, Warshall style."""
    reach = np.eye(n, dtype=bool)
    for a, b in pairs:
        reach[a, b] = reach[b, a] = True
    for k in range(n):
        reach |= reach[:, [k]] & reach[[k], :]
    groups = {tuple(np.flatnonzero(row)) for row in reach}
    return sorted((list(g) for g in groups), key=lambda g: g[0])


class TestMustLinkClosure:
    def test_empty(self):
        assert must_link_closure(set(), 3) == [[0], [1], [2]]

    def test_chain(self):
        assert must_link_closure({(0, 1), (1, 2)}, 4) == [[0, 1, 2], [3]]

    def test_bridged_pairs(self):
        pairs = {(0, 1), (2, 3), (1, 2)}
        expected = reachability_groups(pairs, 5)
        assert expected == [[0, 1, 2, 3], [4]]
        assert must_link_closure(pairs, 5) == expected

    def test_out_of_range(self):
        with pytest.raises(IndexOutOfRange):
            must_link_closure({(0, 5)}, 3)

    @given(st.integers(1, 12).flatmap(
        lambda n: st.tuples(st.just(n), st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=15))))
    def test_matches_reachability_and_is_idempotent(self, case):
        n, pairs = case
        groups = must_link_closure(pairs, n)
        assert groups == reachability_groups(pairs, n)
        assert sorted(i for g in groups for i in g) == list(range(n))
        closed = [(g[i], g[j]) for g in groups for i in range(len(g)) for j in range(i + 1, len(g))]
        assert must_link_closure(closed, n) == groups


@pytest.fixture
def abc():
    return Dataset.from_array(np.arange(8.0).reshape(4, 2), ["a", "b", "c", "d"])


class TestValidateSupervision:
    def test_valid(self, abc):
        out = validate_supervision(SupervisionBundle(must_link={("a", "b")}), abc)
        assert out.must_link == {("a", "b")}
        assert out.closed

    def test_closure_added(self, abc):
        out = validate_supervision(SupervisionBundle(must_link={("a", "b"), ("b", "c")}), abc)
        assert out.must_link == {("a", "b"), ("b", "c"), ("a", "c")}

    def test_conflict(self, abc):
        bundle = SupervisionBundle(must_link={("a", "b"), ("b", "c")}, cannot_link={("a", "c")})
        with pytest.raises(ConflictingConstraints):
            validate_supervision(bundle, abc)

    def test_self_cannot_link_conflicts(self, abc):
        with pytest.raises(ConflictingConstraints):
            validate_supervision(SupervisionBundle(cannot_link={("a", "a")}), abc)

    def test_unknown_seed(self, abc):
        with pytest.raises(UnknownObject):
            validate_supervision(SupervisionBundle(seeds={"zz": 0}), abc)

    def test_unknown_constraint_member(self, abc):
        with pytest.raises(UnknownObject):
            validate_supervision(SupervisionBundle(cannot_link={("a", "q")}), abc)


class TestCanonicalize:
    def test_first_appearance(self):
        p = canonicalize(Partition.from_labels([2, 2, 0, MISSING]))
        assert p.labels.tolist() == [0, 0, 1, MISSING]
        assert p.k == 2

    def test_identity(self):
        assert canonicalize(Partition.from_labels([0, 1, 2])).labels.tolist() == [0, 1, 2]

    def test_walk(self):
        # hand walk: 5 -> 0, 3 -> 1, 9 -> 2
        assert canonicalize(Partition.from_labels([5, 3, 5, 3, 9])).labels.tolist() == [0, 1, 0, 1, 2]

    def test_tokens_follow_labels(self):
        p = canonicalize(Partition.from_tokens(["b", "a", "b"]))
        assert p.as_tokens() == ["b", "a", "b"]
        assert p.tokens == ("b", "a")

    @given(st.lists(st.one_of(st.just(MISSING), st.integers(0, 6)), min_size=1, max_size=30)
           .filter(lambda xs: any(x != MISSING for x in xs)))
    def test_idempotent_and_preserves_comembership(self, labels):
        p = Partition.from_labels(labels, k=7)
        c = canonicalize(p)
        assert canonicalize(c) == c
        known = [i for i, v in enumerate(labels) if v != MISSING]
        assert (c.labels == MISSING).tolist() == [v == MISSING for v in labels]
        for i, j in itertools.combinations(known, 2):
            assert (labels[i] == labels[j]) == (c.labels[i] == c.labels[j])


class TestTypes:
    def test_dataset_rejects_nan(self):
        with pytest.raises(ValidationError):
            Dataset.from_array([[0.0, np.nan]])

    def test_dataset_rejects_duplicate_ids(self):
        with pytest.raises(ValidationError):
            Dataset.from_array([[0.0], [1.0]], ["a", "a"])

    def test_dataset_is_read_only(self):
        d = Dataset.from_array([[0.0, 1.0]])
        with pytest.raises(ValueError):
            d.features[0, 0] = 3.0

    def test_partition_label_range(self):
        with pytest.raises(ValidationError):
            Partition(np.array([0, 3]), 2)

    def test_partition_needs_a_known_label(self):
        with pytest.raises(ValidationError):
            Partition(np.array([MISSING, MISSING]), 2)

    def test_from_tokens_natural_order(self):
        p = Partition.from_tokens(["10", "2", "?", "2"])
        assert p.tokens == ("2", "10")
        assert p.labels.tolist() == [1, 0, MISSING, 0]

    def test_weights_non_negative(self):
        with pytest.raises(ValidationError):
            PartitionWeights(-1.0, 1.0)

    def test_ensemble_checks(self):
        a = Partition.from_labels([0, 1, 1])
        with pytest.raises(LengthMismatch):
            Ensemble.unweighted([a, Partition.from_labels([0, 1])])
        with pytest.raises(IndexOutOfRange):
            Ensemble.unweighted([a], reference_index=1)
        with pytest.raises(AllZeroWeights):
            Ensemble((a,), (PartitionWeights(0.0, 5.0),))
