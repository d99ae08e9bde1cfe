import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_dataset
from stayforge.data import (
    DataMatrix,
    FeatureKind,
    LabeledDataset,
    inner_merge,
    pivot_events,
    stratified_split,
    three_way_split,
)
from stayforge.errors import (
    DegenerateSplitError,
    EmptyInputError,
    InvalidFractionError,
    InvariantViolation,
    MissingValueError,
    SchemaConflictError,
)


def table(row_ids, n_cols, prefix="c"):
    return DataMatrix(
        [f"{prefix}{j}" for j in range(n_cols)],
        [FeatureKind.CONTINUOUS] * n_cols,
        np.arange(len(row_ids) * n_cols, dtype=float).reshape(len(row_ids), n_cols),
        row_ids,
    )


class TestPivot:
    def test_two_patients(self):
        m = pivot_events([("p1", "J18"), ("p2", "I10"), ("p1", "I10")])
        assert m.column_names == ("I10", "J18")
        assert m.row_ids == ("p1", "p2")
        np.testing.assert_array_equal(m.values, [[1, 1], [1, 0]])
        assert set(m.column_kinds) == {FeatureKind.CATEGORICAL}

    def test_single_event(self):
        m = pivot_events([("p1", "A")])
        assert m.shape == (1, 1) and m.values[0, 0] == 1

    def test_duplicate_event_is_presence(self):
        np.testing.assert_array_equal(pivot_events([("p1", "A"), ("p1", "A")]).values, [[1]])

    def test_empty(self):
        with pytest.raises(EmptyInputError):
            pivot_events([])

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(st.tuples(st.sampled_from("pqrs"), st.sampled_from(["A", "B", "C", "D"])), min_size=1, max_size=20),
        st.randoms(use_true_random=False),
    )
    def test_permutation_invariant(self, events, rnd):
        shuffled = list(events)
        rnd.shuffle(shuffled)
        a, b = pivot_events(events), pivot_events(shuffled)
        assert a.column_names == b.column_names
        # rows follow first appearance, so compare per patient
        for pid in a.row_ids:
            np.testing.assert_array_equal(a.values[a.row_ids.index(pid)], b.values[b.row_ids.index(pid)])


class TestInnerMerge:
    def test_intersection(self):
        m = inner_merge([table(["p1", "p2"], 1, "a"), table(["p2", "p3"], 1, "b")])
        assert m.row_ids == ("p2",)
        np.testing.assert_array_equal(m.values, [[1, 0]])

    def test_single_table_identity(self):
        t = table(["p1", "p2"], 3)
        m = inner_merge([t])
        assert m.row_ids == t.row_ids and m.column_names == t.column_names
        np.testing.assert_array_equal(m.values, t.values)

    def test_three_tables_shape(self):
        ids = [f"p{i}" for i in range(1, 6)]
        m = inner_merge([table(ids, 2), table(ids[::-1], 3), table(ids, 4)], names=["a", "b", "c"])
        assert m.shape == (5, 9)
        assert m.column_names[0] == "a.c0" and m.column_names[-1] == "c.c3"

    def test_rows_aligned_by_id(self):
        a = table(["p1", "p2"], 1, "a")
        b = DataMatrix(["b"], [FeatureKind.CONTINUOUS], [[20.0], [10.0]], ["p2", "p1"])
        m = inner_merge([a, b])
        np.testing.assert_array_equal(m.values, [[0, 10], [1, 20]])

    def test_schema_conflict(self):
        with pytest.raises(SchemaConflictError):
            inner_merge([table(["p1"], 1), table(["p1"], 1)])

    def test_empty_intersection(self):
        m = inner_merge([table(["p1"], 1, "a"), table(["p2"], 2, "b")])
        assert m.shape == (0, 3)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.sets(st.sampled_from(range(8)), min_size=0, max_size=8), min_size=1, max_size=4))
    def test_row_count_bounded(self, id_sets):
        tables = [table([f"p{i}" for i in sorted(s)], 1, f"t{k}_") for k, s in enumerate(id_sets)]
        m = inner_merge(tables)
        assert m.n_rows == len(set.intersection(*id_sets))
        assert m.n_rows <= min(t.n_rows for t in tables)


class TestDataMatrix:
    def test_misaligned(self):
        with pytest.raises(InvariantViolation):
            DataMatrix(["a", "b"], [FeatureKind.CONTINUOUS], [[1.0, 2.0]], ["r"])

    def test_duplicate_row_ids(self):
        with pytest.raises(InvariantViolation):
            DataMatrix(["a"], [FeatureKind.CONTINUOUS], [[1.0], [2.0]], ["r", "r"])

    def test_indicator_values(self):
        with pytest.raises(InvariantViolation):
            DataMatrix(["a"], [FeatureKind.INDICATOR], [[2.0]], ["r"])

    def test_missing_arithmetic_guard(self):
        m = DataMatrix(["a"], [FeatureKind.CONTINUOUS], [[np.nan]], ["r"])
        with pytest.raises(MissingValueError):
            m.dense()

    def test_immutable(self):
        m = table(["p1"], 1)
        with pytest.raises(ValueError):
            m.values[0, 0] = 5

    def test_labels_length(self):
        with pytest.raises(InvariantViolation):
            LabeledDataset(table(["p1", "p2"], 1), [0])


def labeled(n0, n1):
    labels = np.array([0] * n0 + [1] * n1)
    return make_dataset(np.arange(n0 + n1, dtype=float), labels)


class TestStratifiedSplit:
    def test_per_class_counts(self):
        rem, hold = stratified_split(labeled(80, 20), 0.2, seed=3)
        assert len(hold) == 20 and hold.class_counts() == (16, 4)
        assert rem.class_counts() == (64, 16)

    def test_round_half_up(self):
        # 5 * 0.1 = 0.5 rounds up to 1 per class
        _, hold = stratified_split(labeled(5, 15), 0.1, seed=0)
        assert hold.class_counts() == (1, 2)

    def test_determinism(self):
        ds = labeled(50, 13)
        a = stratified_split(ds, 0.3, seed=99)
        b = stratified_split(ds, 0.3, seed=99)
        assert a[0].row_ids == b[0].row_ids and a[1].row_ids == b[1].row_ids

    def test_order_preserved(self):
        rem, hold = stratified_split(labeled(30, 10), 0.25, seed=1)
        for part in (rem, hold):
            idx = [int(r[1:]) for r in part.row_ids]
            assert idx == sorted(idx)

    @pytest.mark.parametrize("fraction", [0.0, 1.0, -0.1, 1.5])
    def test_invalid_fraction(self, fraction):
        with pytest.raises(InvalidFractionError):
            stratified_split(labeled(10, 10), fraction, seed=0)

    def test_degenerate(self):
        with pytest.raises(DegenerateSplitError):
            stratified_split(labeled(10, 1), 0.5, seed=0)
        with pytest.raises(DegenerateSplitError):
            stratified_split(labeled(10, 0), 0.2, seed=0)

    @pytest.mark.parametrize("n0,n1", [(9362, 1873), (8988, 2247)])
    def test_eleven_thousand_rows_training_size(self, n0, n1):
        # 11,235 rows through test then validation 0.2 splits -> 7190 training rows
        bundle = three_way_split(labeled(n0, n1), 0.2, 0.2, seed=5)
        assert abs(len(bundle.train) - 7190) <= 2
        ids = [set(p.row_ids) for p in (bundle.train, bundle.validation, bundle.test)]
        assert set.union(*ids) == {f"r{i}" for i in range(n0 + n1)}
        assert sum(map(len, ids)) == n0 + n1

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 60), st.integers(1, 60), st.floats(0.05, 0.6), st.integers(0, 2**32))
    def test_stratification_property(self, n0, n1, fraction, seed):
        ds = labeled(n0, n1)
        try:
            rem, hold = stratified_split(ds, fraction, seed)
        except DegenerateSplitError:
            return
        assert set(rem.row_ids).isdisjoint(hold.row_ids)
        assert sorted(rem.row_ids + hold.row_ids) == sorted(ds.row_ids)
        if len(hold):
            for cls in (0, 1):
                overall = np.mean(ds.labels == cls)
                assert abs(np.mean(hold.labels == cls) - overall) <= 1 / len(hold) + 1e-12
