import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crossaug.data import (AlignmentError, EncodingError, IdxFormatError, ImageMaskSpec, ImageSet,
                           MaskSpecError, ParseError, PartitionError, ab_halves, compose_augmented_image,
                           decode, drop_missing, fit_union_schema, flatten_columns, holdout, kfold,
                           load_idx_images, load_tabular, make_synthetic_pair, mask_images, read_idx,
                           save_idx_images, undersample, unflatten_columns, write_idx, write_tabular)
from crossaug.data.cache import CacheFormatError, load_encoded, save_encoded
from crossaug.data.partition import kfold_indices
from crossaug.data.synthetic import COMMON_CATEGORIES, common_feature_names, render_digits, common_categories
from crossaug.data.tabular import CATEGORICAL, NUMERICAL, Dataset
from crossaug.tensor import Rng


def _csv(tmp_path, text, name="t.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_tabular_kinds_missing_and_labels(tmp_path):
    p = _csv(tmp_path, "age,site,label\n50,upper,yes\n,lower,no\n61.5,upper,yes\n")
    ds = load_tabular(p, "label")
    assert ds.kinds == {"age": NUMERICAL, "site": CATEGORICAL}
    assert np.isnan(ds.columns["age"][1])
    np.testing.assert_array_equal(ds.labels, [1, 0, 1])
    assert len(drop_missing(ds)) == 2


def test_survival_months_label(tmp_path):
    p = _csv(tmp_path, "x,survival_months\n1,23\n2,24\n3,60\n")
    np.testing.assert_array_equal(load_tabular(p, "survival_months").labels, [0, 1, 1])


def test_parse_errors_carry_line_numbers(tmp_path):
    with pytest.raises(ParseError, match="line 3"):
        load_tabular(_csv(tmp_path, "a,label\n1,0\n2\n"), "label")
    with pytest.raises(ParseError, match="line 1"):
        load_tabular(_csv(tmp_path, "a,b\n1,0\n"), "label")


def _pair(**kw):
    a, b = make_synthetic_pair(rows_a=120, rows_b=200, seed=3, **kw)
    common = common_feature_names()
    return fit_union_schema(a, b, common, common_categories())


def test_common_block_is_27_columns():
    sa, sb, pair = _pair()
    assert len(pair.common) == 7
    assert len(pair.common_in_a) == 27 == len(pair.common_in_b)
    for name, cats in COMMON_CATEGORIES.items():
        assert sa[name].categories == tuple(cats)
    assert sa.width == 68 and sb.width == 78


def test_encoding_contract():
    sa, sb, pair = _pair()
    for ds in (pair.a, pair.b):
        m = ds.encoded
        assert m.min() >= 0.0 and m.max() <= 1.0
        for feat, sl in zip(ds.schema.features, ds.schema.slices().values()):
            if feat.kind == CATEGORICAL:
                np.testing.assert_array_equal(m[:, sl].sum(axis=1), 1.0)
        back = decode(ds.schema, m)
        for name, kind in ds.kinds.items():
            if kind == NUMERICAL:
                np.testing.assert_allclose(back[name], ds.columns[name], rtol=0, atol=1e-9)
            else:
                assert list(back[name]) == list(ds.columns[name])


def test_common_features_encode_identically():
    _, _, pair = _pair()
    # the union schema is shared, so the range covers both sides
    assert pair.a.schema["age_at_diagnosis"] == pair.b.schema["age_at_diagnosis"]


def test_alignment_errors():
    a = Dataset("a", {"x": np.array([1.0, 2.0])}, {"x": NUMERICAL}, np.array([0, 1]))
    b = Dataset("b", {"x": np.array(["p", "q"], dtype=object)}, {"x": CATEGORICAL}, np.array([0, 1]))
    with pytest.raises(AlignmentError, match="'x'"):
        fit_union_schema(a, b, ["x"])
    with pytest.raises(AlignmentError, match="missing"):
        fit_union_schema(a, a, ["y"])


def test_unseen_category_is_an_encoding_error():
    from crossaug.data.tabular import encode

    sa, _, pair = _pair()
    ds = pair.a.take([0])
    ds.columns["sex"] = np.array(["Other"], dtype=object)
    with pytest.raises(EncodingError, match="sex"):
        encode(ds, sa)


def test_numeric_clamp_outside_fit_range():
    from crossaug.data.tabular import Feature, FeatureSchema, encode

    schema = FeatureSchema((Feature("x", NUMERICAL, 0.0, 10.0),))
    ds = Dataset("d", {"x": np.array([-5.0, 5.0, 20.0])}, {"x": NUMERICAL}, np.zeros(3, dtype=int))
    np.testing.assert_array_equal(encode(ds, schema).encoded[:, 0], [0.0, 0.5, 1.0])


def test_write_and_reload_tabular(tmp_path):
    a, _ = make_synthetic_pair(rows_a=20, rows_b=20, seed=1)
    write_tabular(tmp_path / "a.csv", a)
    back = load_tabular(tmp_path / "a.csv", "label")
    np.testing.assert_array_equal(back.labels, a.labels)
    np.testing.assert_array_equal(back.columns["age_at_diagnosis"], a.columns["age_at_diagnosis"])


def test_synthetic_pair_shape_and_rate():
    a, b = make_synthetic_pair(rows_a=522, rows_b=5000, seed=0)
    assert len(a) == 522 and len(b) == 5000
    assert abs(b.labels.mean() - 0.72) < 0.03


@settings(max_examples=25, deadline=None)
@given(st.integers(4, 300), st.floats(0.05, 0.95), st.integers(0, 1000))
def test_holdout_disjoint_and_complete(n, fraction, seed):
    ds = Dataset("d", {"x": np.arange(n, dtype=float)}, {"x": NUMERICAL}, np.zeros(n, dtype=int))
    if round(n * fraction) in (0, n):
        with pytest.raises(PartitionError):
            holdout(ds, fraction, seed)
        return
    train, test = holdout(ds, fraction, seed)
    assert len(test) == round(n * fraction)
    assert set(train.ids) | set(test.ids) == set(range(n))
    assert not set(train.ids) & set(test.ids)


def test_kfold_covers_each_row_once():
    folds = kfold_indices(23, 5, seed=2)
    np.testing.assert_array_equal(np.sort(np.concatenate(folds)), np.arange(23))
    ds = Dataset("d", {"x": np.arange(23.0)}, {"x": NUMERICAL}, np.zeros(23, dtype=int))
    train, test = kfold(ds, 5, 1, 2)
    np.testing.assert_array_equal(test.ids, folds[1])
    assert len(train) + len(test) == 23


def test_ab_halves_and_undersample():
    ds = Dataset("d", {"x": np.arange(7.0)}, {"x": NUMERICAL}, np.zeros(7, dtype=int))
    a, b = ab_halves(ds)
    np.testing.assert_array_equal(a.ids, [0, 1, 2, 3])
    np.testing.assert_array_equal(b.ids, [4, 5, 6])
    sub = undersample(ds, 3, seed=1)
    assert len(sub) == 3 and np.all(np.diff(sub.ids) > 0)
    np.testing.assert_array_equal(sub.ids, undersample(ds, 3, seed=1).ids)
    with pytest.raises(PartitionError):
        undersample(ds, 8)


def test_idx_round_trip_and_errors(tmp_path):
    imgs = ImageSet("x", Rng(0).integers(0, 256, (5, 4, 6, 1)) / 255.0, np.arange(5))
    save_idx_images(tmp_path / "i.idx", tmp_path / "l.idx", imgs)
    back = load_idx_images(tmp_path / "i.idx", tmp_path / "l.idx")
    np.testing.assert_allclose(back.images, imgs.images, atol=1e-12)
    raw = (tmp_path / "i.idx").read_bytes()
    assert raw[:4] == b"\x00\x00\x08\x03"
    (tmp_path / "bad.idx").write_bytes(raw[:-3])
    with pytest.raises(IdxFormatError, match="offset"):
        read_idx(tmp_path / "bad.idx")
    (tmp_path / "magic.idx").write_bytes(b"\x01\x00\x08\x01" + raw[4:])
    with pytest.raises(IdxFormatError, match="magic"):
        read_idx(tmp_path / "magic.idx")


def test_idx_three_plane_colour(tmp_path):
    planes = Rng(0).integers(0, 256, (3, 2, 4, 4)).astype(np.uint8)
    paths = []
    for i, plane in enumerate(planes):
        paths.append(tmp_path / f"c{i}.idx")
        write_idx(paths[-1], plane)
    write_idx(tmp_path / "l.idx", np.array([1, 2], dtype=np.uint8))
    imgs = load_idx_images(paths, tmp_path / "l.idx")
    assert imgs.shape == (4, 4, 3)
    np.testing.assert_allclose(imgs.images[..., 2] * 255, planes[2])


@pytest.mark.parametrize("n", range(2, 27, 2))
def test_mask_geometry_exact(n):
    images = Rng(n).uniform((3, 28, 28, 1))
    for side in "AB":
        spec = ImageMaskSpec(28, 28, 1, n, side)
        assert len(spec.common) == n and spec.common[0] == 14 - n // 2
        assert set(spec.common) <= set(spec.kept)
        assert len(spec.kept) == 14 + n // 2
        assert set(spec.kept) | set(spec.zeroed) == set(range(28))
        assert not set(spec.kept) & set(spec.zeroed)
        other = spec.opposite()
        assert set(spec.kept) & set(other.kept) == set(spec.common)
        masked, common = mask_images(images, spec)
        assert np.array_equal(masked[:, :, spec.kept], images[:, :, spec.kept])
        assert not masked[:, :, spec.zeroed].any()
        assert np.array_equal(common, flatten_columns(images, spec.common))
        # composing with the true donor band recovers the source exactly
        donor_band = flatten_columns(images, other.kept)
        assert np.array_equal(compose_augmented_image(masked, donor_band, spec), images)


def test_mask_spec_validation():
    for bad in [(27, 28, 1, 8), (28, 28, 1, 7), (28, 28, 1, 0), (28, 28, 1, 28)]:
        with pytest.raises(MaskSpecError):
            ImageMaskSpec(*bad)


def test_flatten_order_is_column_major():
    img = np.arange(2 * 3 * 2, dtype=float).reshape(1, 2, 3, 2)  # H=2, W=3, C=2
    flat = flatten_columns(img, [1, 2])
    # column 1: (row0 c0, row0 c1, row1 c0, row1 c1), then column 2
    np.testing.assert_array_equal(flat[0], [2, 3, 8, 9, 4, 5, 10, 11])
    np.testing.assert_array_equal(unflatten_columns(flat, 2, 2), img[:, :, 1:])


def test_render_digits():
    imgs = render_digits(20, seed=1)
    assert imgs.images.shape == (20, 28, 28, 1)
    assert imgs.images.min() >= 0 and imgs.images.max() <= 1
    assert imgs.images.reshape(20, -1).max(axis=1).min() > 0.5
    np.testing.assert_array_equal(render_digits(20, seed=1).images, imgs.images)
    assert render_digits(3, seed=1, channels=3).shape == (28, 28, 3)


def test_encoded_cache_round_trip(tmp_path):
    m = Rng(0).uniform((4, 3))
    save_encoded(tmp_path / "c.bin", m, np.array([0, 1, 1, 0]), column_names=["a", "b", "c"], name="n")
    doc = load_encoded(tmp_path / "c.bin")
    np.testing.assert_array_equal(doc["matrix"], m)
    (tmp_path / "bad.bin").write_bytes(b"nope")
    with pytest.raises(CacheFormatError):
        load_encoded(tmp_path / "bad.bin")
