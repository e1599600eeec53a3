import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellcontext import CellLayout, FormatError, ValidationError, load_layout, normalize_to_unit, save_layout
from cellcontext.layout import BandwidthSet, RadiusGrid, UnitTransform, iter_class_partition


def test_csv_two_rows(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("x,y,class\n10,20,tumor\n30,40,stromal\n")
    lay = load_layout(p, domain=(0, 0, 100, 100))
    assert len(lay) == 2
    assert lay.class_names == ("tumor", "stromal")
    assert lay.labels.tolist() == [0, 1]
    assert lay.domain == (0.0, 0.0, 100.0, 100.0)


def test_csv_domain_metadata(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("# domain: 0,0,100,100\nx,y,class\n10,20,tumor\n")
    assert load_layout(p).domain == (0.0, 0.0, 100.0, 100.0)


def test_empty_csv_with_domain(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("x,y,class\n")
    lay = load_layout(p, domain=(0, 0, 100, 100))
    assert len(lay) == 0
    assert lay.xy.shape == (0, 2)


def test_empty_csv_without_domain_fails(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("x,y,class\n")
    with pytest.raises(ValidationError):
        load_layout(p)


def test_missing_class_is_format_error_at_record_1(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("x=10,y=20\n")
    with pytest.raises(FormatError) as e:
        load_layout(p, domain=(0, 0, 100, 100))
    assert e.value.record == 1
    assert "record 1" in str(e.value)


def test_non_numeric_coordinate(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("x,y,class\n1,2,a\nfoo,3,a\n")
    with pytest.raises(FormatError) as e:
        load_layout(p, domain=(0, 0, 100, 100))
    assert e.value.record == 2


def test_point_outside_domain_rejected(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("x,y,class\n150,20,a\n")
    with pytest.raises(ValidationError):
        load_layout(p, domain=(0, 0, 100, 100))


def test_bbox_domain_padding(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("x,y,class\n0,0,a\n30,40,a\n")
    lay = load_layout(p)
    # diagonal 50, pad 2% = 1
    assert lay.domain == pytest.approx((-1.0, -1.0, 31.0, 41.0))


def test_json_load_names_and_ids(tmp_path):
    p = tmp_path / "a.json"
    p.write_text('{"domain":[0,0,10,10],"classes":["a","b"],"points":[[1,2,1],[3,4,0]]}')
    lay = load_layout(p)
    assert lay.labels.tolist() == [1, 0]
    assert lay.class_names == ("a", "b")


def test_class_map_orders_classes(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("x,y,class\n1,1,b\n2,2,a\n")
    lay = load_layout(p, domain=(0, 0, 10, 10), class_map=["a", "b"])
    assert lay.labels.tolist() == [1, 0]
    with pytest.raises(ValidationError):
        load_layout(p, domain=(0, 0, 10, 10), class_map=["a"])


@pytest.mark.parametrize("ext", ["csv", "json"])
def test_round_trip_three_points(tmp_path, ext):
    lay = CellLayout([[0.1, 0.2], [1 / 3, 2 / 3], [9.5, 0.0]], [0, 1, 1], (0, 0, 10, 10), ["a", "b"])
    p = tmp_path / f"l.{ext}"
    save_layout(lay, p)
    back = load_layout(p)
    assert np.array_equal(back.xy, lay.xy)
    assert np.array_equal(back.labels, lay.labels)
    assert back == lay


def test_save_empty_layout_has_header_only(tmp_path):
    lay = CellLayout(np.zeros((0, 2)), [], (0, 0, 1, 1), ["a"])
    p = tmp_path / "e.csv"
    save_layout(lay, p)
    data_lines = [ln for ln in p.read_text().splitlines() if not ln.startswith("#")]
    assert data_lines == ["x,y,class"]
    assert len(load_layout(p)) == 0


@pytest.mark.skipif(hasattr(os, "geteuid") and os.geteuid() == 0, reason="root ignores permissions")
def test_save_read_only_dir(tmp_path):
    d = tmp_path / "ro"
    d.mkdir()
    d.chmod(0o500)
    lay = CellLayout([[0.5, 0.5]], [0], (0, 0, 1, 1), ["a"])
    with pytest.raises(OSError):
        save_layout(lay, d / "x.csv")


def test_save_into_missing_directory_is_os_error(tmp_path):
    lay = CellLayout([[0.5, 0.5]], [0], (0, 0, 1, 1), ["a"])
    with pytest.raises(OSError):
        save_layout(lay, tmp_path / "nope" / "x.csv")


def test_unit_transform_examples():
    t = UnitTransform((0, 0, 100, 100))
    assert t.forward([[50, 50]]).tolist() == [[0.0, 0.0]]
    assert t.forward([[0, 0]]).tolist() == [[-1.0, -1.0]]


def test_degenerate_domain():
    with pytest.raises(ValidationError):
        CellLayout(np.zeros((0, 2)), [], (0, 0, 0, 100), ["a"])
    with pytest.raises(ValidationError):
        normalize_to_unit(CellLayout(np.zeros((0, 2)), [], (0, 0, 0, 100), ["a"]))


def test_layout_arrays_read_only():
    lay = CellLayout([[0.5, 0.5]], [0], (0, 0, 1, 1), ["a"])
    with pytest.raises(ValueError):
        lay.xy[0, 0] = 1.0


def test_label_out_of_range():
    with pytest.raises(ValidationError):
        CellLayout([[0.5, 0.5]], [2], (0, 0, 1, 1), ["a", "b"])


def test_duplicate_class_names():
    with pytest.raises(ValidationError):
        CellLayout([[0.5, 0.5]], [0], (0, 0, 1, 1), ["a", "a"])


def test_radius_grid_validation():
    with pytest.raises(ValidationError):
        RadiusGrid([1.0, 1.0])
    with pytest.raises(ValidationError):
        RadiusGrid([0.0, 1.0])
    with pytest.raises(ValidationError):
        BandwidthSet([])


# ---------------------------------------------------------------------------
# properties

coord = st.floats(0, 100, allow_nan=False, allow_infinity=False)


@st.composite
def layouts(draw, max_points=30):
    n = draw(st.integers(0, max_points))
    k = draw(st.integers(1, 4))
    xy = draw(st.lists(st.tuples(coord, coord), min_size=n, max_size=n))
    labels = draw(st.lists(st.integers(0, k - 1), min_size=n, max_size=n))
    names = [f"class{i}" for i in range(k)]
    return CellLayout(np.array(xy, dtype=float).reshape(-1, 2), labels, (0, 0, 100, 100), names)


@settings(max_examples=60, deadline=None)
@given(layouts(), st.sampled_from(["csv", "json"]))
def test_save_load_save_byte_identical(tmp_path_factory, lay, ext):
    d = tmp_path_factory.mktemp("rt")
    a, b = d / f"a.{ext}", d / f"b.{ext}"
    save_layout(lay, a)
    save_layout(load_layout(a), b)
    assert a.read_bytes() == b.read_bytes()


@settings(max_examples=100, deadline=None)
@given(
    layouts(),
    st.tuples(st.floats(-1e4, 1e4), st.floats(-1e4, 1e4), st.floats(0.1, 1e4), st.floats(0.1, 1e4)),
)
def test_normalize_inverse_round_trip(lay, box):
    x0, y0, w, h = box
    dom = (x0, y0, x0 + w, y0 + h)
    xy = np.c_[x0 + lay.xy[:, 0] / 100 * w, y0 + lay.xy[:, 1] / 100 * h] if len(lay) else lay.xy
    xy = np.clip(xy, [dom[0], dom[1]], [dom[2], dom[3]])
    lay = lay.replace(xy=xy, domain=dom)
    unit, tf = normalize_to_unit(lay)
    assert np.all(np.abs(unit.xy) <= 1.0)
    back = tf.from_unit(unit)
    assert np.allclose(back.xy, lay.xy, rtol=0, atol=1e-9 * max(1.0, abs(x0), abs(y0), w, h))


@settings(max_examples=100, deadline=None)
@given(layouts())
def test_class_partition(lay):
    parts = list(iter_class_partition(lay))
    assert sum(len(p) for _, p in parts) == len(lay)
    rows = sorted(map(tuple, np.concatenate([p for _, p in parts]).tolist())) if len(lay) else []
    assert rows == sorted(map(tuple, lay.xy.tolist()))
    for c, p in parts:
        assert np.array_equal(p, lay.xy[lay.labels == c])
