"""Dataset layer: schema validation, CSV round trips, scaling, splits."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from icsadv import dataset as ds
from icsadv.errors import (
    EmptyInputError,
    LabelError,
    ParameterError,
    ParseError,
    SchemaMismatchError,
)


def small_schema(n=3):
    feats = tuple(
        ds.Feature("LIT%d01" % (i + 1), ds.SENSOR) for i in range(n)
    )
    return ds.Schema(feats)


def small_dataset(n_rows=6, n_features=3, seed=0):
    rng = np.random.default_rng(seed)
    schema = small_schema(n_features)
    X = rng.normal(50, 10, (n_rows, n_features))
    y = rng.integers(0, 2, n_rows)
    return ds.Dataset(schema, X, y)


class TestSchema:
    def test_json_round_trip(self):
        schema = ds.Schema(
            (ds.Feature("LIT101", "sensor"), ds.Feature("P101", "actuator")),
            label_column="Normal/Attack",
        )
        again = ds.Schema.from_json(schema.to_json())
        assert again == schema
        assert again.kind_of("P101") == "actuator"
        assert again.index_of("LIT101") == 0

    def test_duplicate_names_rejected(self):
        with pytest.raises(ParameterError, match="duplicate"):
            ds.Schema((ds.Feature("A", "sensor"), ds.Feature("A", "sensor")))

    def test_unknown_kind_rejected(self):
        with pytest.raises(ParameterError, match="kind"):
            ds.Schema((ds.Feature("A", "pump"),))

    def test_label_collision_rejected(self):
        with pytest.raises(ParameterError, match="collides"):
            ds.Schema((ds.Feature("A", "sensor"),), label_column="A")

    def test_empty_schema_rejected(self):
        with pytest.raises(ParameterError):
            ds.Schema(())


class TestLabels:
    @pytest.mark.parametrize(
        "token,value",
        [("Normal", 0), ("normal", 0), (" NORMAL ", 0), ("Attack", 1), ("aTTack", 1)],
    )
    def test_encode_tolerates_case_and_space(self, token, value):
        assert ds.label_encode(token) == value

    def test_unknown_token_rejected(self):
        with pytest.raises(LabelError, match="anomaly"):
            ds.label_encode("anomaly")

    def test_decode(self):
        assert ds.label_decode(0) == "Normal"
        assert ds.label_decode(1) == "Attack"
        with pytest.raises(LabelError):
            ds.label_decode(2)

    @given(st.sampled_from(["normal", "attack"]), st.data())
    def test_encode_decode_round_trip_any_casing(self, word, data):
        mask = data.draw(st.lists(st.booleans(), min_size=len(word), max_size=len(word)))
        token = "".join(c.upper() if up else c for c, up in zip(word, mask))
        assert ds.label_decode(ds.label_encode(token)).lower() == word


class TestDatasetObject:
    def test_basic_shape_checks(self):
        schema = small_schema(2)
        with pytest.raises(ParameterError, match="2-D"):
            ds.Dataset(schema, np.zeros(4), np.zeros(4, dtype=int))
        with pytest.raises(ParameterError, match="row count"):
            ds.Dataset(schema, np.zeros((3, 2)), np.zeros(4, dtype=int))
        with pytest.raises(SchemaMismatchError):
            ds.Dataset(schema, np.zeros((3, 5)), np.zeros(3, dtype=int))

    def test_non_finite_named_by_position(self):
        schema = small_schema(2)
        X = np.zeros((3, 2))
        X[2, 1] = np.nan
        with pytest.raises(ParameterError, match=r"row 2.*LIT201"):
            ds.Dataset(schema, X, np.zeros(3, dtype=int))

    def test_bad_labels_rejected(self):
        schema = small_schema(1)
        with pytest.raises(LabelError):
            ds.Dataset(schema, np.zeros((2, 1)), np.array([0, 5]))


class TestCsv:
    def test_save_load_round_trip_is_lossless(self, tmp_path):
        data = small_dataset(seed=5)
        p = tmp_path / "a.csv"
        ds.save_csv(data, p)
        again = ds.load_csv(p, data.schema)
        assert np.array_equal(again.X, data.X)  # repr floats: bit-exact
        assert np.array_equal(again.y, data.y)

    def test_save_twice_is_byte_identical(self, tmp_path):
        data = small_dataset(seed=5)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        ds.save_csv(data, p1)
        ds.save_csv(data, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_header_mismatch(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("X,Y,Normal/Attack\n1,2,Normal\n")
        with pytest.raises(SchemaMismatchError, match="header"):
            ds.load_csv(p, small_schema(2))

    def test_empty_file(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("")
        with pytest.raises(ParseError, match="empty"):
            ds.load_csv(p, small_schema(1))

    def test_bad_cell_names_line_and_column(self, tmp_path):
        schema = small_schema(2)
        p = tmp_path / "a.csv"
        p.write_text(
            "LIT101,LIT201,Normal/Attack\n1.0,2.0,Normal\n1.0,oops,Attack\n"
        )
        with pytest.raises(ParseError, match=r"line 3.*LIT201.*oops"):
            ds.load_csv(p, schema)

    def test_bad_label_names_line(self, tmp_path):
        schema = small_schema(1)
        p = tmp_path / "a.csv"
        p.write_text("LIT101,Normal/Attack\n1.0,Normal\n2.0,Anomaly\n")
        with pytest.raises(LabelError, match="line 3"):
            ds.load_csv(p, schema)

    def test_ragged_row_rejected(self, tmp_path):
        schema = small_schema(2)
        p = tmp_path / "a.csv"
        p.write_text("LIT101,LIT201,Normal/Attack\n1.0,Normal\n")
        with pytest.raises(ParseError, match="line 2.*fields"):
            ds.load_csv(p, schema)

    def test_large_file_counts(self, tmp_path):
        # composition of a full-scale plant log: 449,919 rows of which
        # 53,900 carry the attack label
        n_attack, n_normal = 53_900, 396_019
        p = tmp_path / "big.csv"
        with open(p, "w") as fh:
            fh.write("LIT101,Normal/Attack\n")
            fh.writelines("0.5,Normal\n" for _ in range(n_normal))
            fh.writelines("0.7,Attack\n" for _ in range(n_attack))
        data = ds.load_csv(p, small_schema(1))
        assert data.n_rows == 449_919
        assert int(data.y.sum()) == n_attack
        assert int((data.y == 0).sum()) == n_normal


class TestMinmax:
    def test_known_values(self):
        schema = small_schema(2)
        data = ds.Dataset(
            schema, np.array([[0.0, 10.0], [5.0, 30.0], [10.0, 20.0]]), np.zeros(3)
        )
        params = ds.fit_minmax(data)
        out = ds.apply_minmax(data, params)
        assert np.allclose(out.X[:, 0], [0.0, 0.5, 1.0])
        assert np.allclose(out.X[:, 1], [0.0, 1.0, 0.5])

    def test_constant_feature_maps_to_zero(self):
        schema = small_schema(1)
        data = ds.Dataset(schema, np.full((4, 1), 7.0), np.zeros(4))
        out = ds.apply_minmax(data, ds.fit_minmax(data))
        assert (out.X == 0.0).all()

    def test_out_of_range_values_clamped(self):
        schema = small_schema(1)
        ref = ds.Dataset(schema, np.array([[0.0], [10.0]]), np.zeros(2))
        params = ds.fit_minmax(ref)
        other = ds.Dataset(schema, np.array([[-5.0], [15.0]]), np.zeros(2))
        out = ds.apply_minmax(other, params)
        assert out.X[:, 0].tolist() == [0.0, 1.0]

    def test_feature_name_mismatch(self):
        a = small_dataset(n_features=2)
        b = ds.Dataset(
            ds.Schema((ds.Feature("Q1", "sensor"), ds.Feature("Q2", "sensor"))),
            a.X.copy(),
            a.y.copy(),
        )
        with pytest.raises(SchemaMismatchError):
            ds.apply_minmax(b, ds.fit_minmax(a))

    def test_empty_fit_rejected(self):
        schema = small_schema(1)
        empty = ds.Dataset(schema, np.empty((0, 1)), np.empty(0, dtype=int))
        with pytest.raises(EmptyInputError):
            ds.fit_minmax(empty)

    def test_params_json_round_trip(self):
        params = ds.fit_minmax(small_dataset(seed=3))
        again = ds.NormalizationParams.from_json(params.to_json())
        assert again.feature_names == params.feature_names
        assert np.array_equal(again.mins, params.mins)
        assert np.array_equal(again.maxs, params.maxs)

    @settings(max_examples=50)
    @given(
        st.lists(
            st.lists(
                st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False),
                min_size=2,
                max_size=2,
            ),
            min_size=1,
            max_size=20,
        )
    )
    def test_output_always_in_unit_box(self, rows):
        schema = small_schema(2)
        data = ds.Dataset(schema, np.array(rows), np.zeros(len(rows)))
        out = ds.apply_minmax(data, ds.fit_minmax(data))
        assert out.X.min() >= 0.0
        assert out.X.max() <= 1.0


class TestMergeAndSplit:
    def test_merge_counts(self):
        # stacking the two capture periods: 410,400 + 112,480 rows
        schema = small_schema(1)
        a = ds.Dataset(schema, np.zeros((410_400, 1)), np.zeros(410_400))
        b = ds.Dataset(schema, np.ones((112_480, 1)), np.ones(112_480))
        merged = ds.merge(a, b)
        assert merged.n_rows == 522_880
        assert int(merged.y.sum()) == 112_480

    def test_merge_schema_mismatch(self):
        a = small_dataset(n_features=2)
        b = ds.Dataset(
            ds.Schema((ds.Feature("other", "sensor"), ds.Feature("x", "sensor"))),
            np.zeros((2, 2)),
            np.zeros(2),
        )
        with pytest.raises(SchemaMismatchError):
            ds.merge(a, b)

    def test_split_sizes_and_partition(self):
        data = small_dataset(n_rows=10, seed=1)
        train, test = ds.split(data, 0.8, seed=42)
        assert train.n_rows == 8 and test.n_rows == 2
        whole = np.sort(
            np.concatenate([train.X, test.X]).view("f8,f8,f8"), order=["f0", "f1", "f2"], axis=0
        )
        orig = np.sort(data.X.view("f8,f8,f8"), order=["f0", "f1", "f2"], axis=0)
        assert np.array_equal(whole, orig)

    def test_split_floor_rule(self):
        data = small_dataset(n_rows=7)
        train, test = ds.split(data, 0.5, seed=0)
        assert train.n_rows == 3  # floor(3.5)
        assert test.n_rows == 4

    def test_split_deterministic(self):
        data = small_dataset(n_rows=30, seed=2)
        a1, _ = ds.split(data, 0.8, seed=9)
        a2, _ = ds.split(data, 0.8, seed=9)
        b1, _ = ds.split(data, 0.8, seed=10)
        assert np.array_equal(a1.X, a2.X)
        assert not np.array_equal(a1.X, b1.X)

    def test_split_bad_fraction(self):
        data = small_dataset()
        for frac in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(ParameterError):
                ds.split(data, frac, seed=0)
