import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rtsfnet.data import datasets as ds
from rtsfnet.data.store import SegmentStore, load_split, read_store, store_path, write_split_manifest, write_store
from rtsfnet.data.streams import (
    NULL_LABEL,
    LabeledStream,
    Segments,
    SplitSpec,
    interpolate_nan,
    segment,
    segment_count,
    split_streams,
)
from rtsfnet.errors import ConfigError, InputError, UsageError

RATE = 50.0


def pipeline_streams():
    """Two trials at 50 Hz with NULL runs, a label change and NaN gaps of 3 and 20 samples.

    Channel 0 is the sample index and channel 1 the trial code, so any segment
    can be traced back to its source samples. Returns the streams and, per
    trial, the clean runs (start, end, label) known from the construction.
    """
    a_n, b_n = 400, 300
    a = np.zeros((a_n, 4))
    a[:, 0] = np.arange(a_n)
    a[:, 1] = 0
    a[:, 2] = np.sin(np.arange(a_n) / 7.0)
    a[:, 3] = 1.0
    a_lab = np.full(a_n, 1)
    a_lab[:150] = 0
    a_lab[150:170] = NULL_LABEL
    a[50:53, 2] = np.nan  # 3-sample gap: filled
    a[250:270, 3] = np.nan  # 20-sample gap: excluded
    b = np.zeros((b_n, 4))
    b[:, 0] = np.arange(b_n)
    b[:, 1] = 1
    b[:, 2] = np.cos(np.arange(b_n) / 5.0)
    b[:, 3] = -1.0
    b_lab = np.full(b_n, 2)
    b_lab[180:] = 0
    b[:5, 2] = np.nan  # leading run: no left anchor, stays NaN
    streams = [LabeledStream(a, a_lab, "A", 1, RATE), LabeledStream(b, b_lab, "B", 2, RATE)]
    runs = {"A": [(0, 150, 0), (170, 250, 1), (270, 400, 1)], "B": [(5, 180, 2), (180, 300, 0)]}
    return streams, runs


def check_pipeline(window: int, stride: int) -> dict[str, int]:
    """Segments the streams and checks every rule; returns the expected and observed counts."""
    streams, runs = pipeline_streams()
    spec = SplitSpec("trial", frozenset(), frozenset({"B"}))
    out = split_streams(streams, spec, window, stride)
    expected = {"train": sum(segment_count(e - s, window, stride) for s, e, _ in runs["A"]),
                "test": sum(segment_count(e - s, window, stride) for s, e, _ in runs["B"])}
    observed = {k: len(out[k]) for k in ("train", "test")}
    assert observed == expected and len(out["validation"]) == 0
    for split, trial in (("train", "A"), ("test", "B")):
        seg = out[split]
        for vals, lab in zip(seg.values, seg.labels):
            assert not np.isnan(vals).any()
            idx = vals[:, 0].astype(int)
            assert np.all(np.diff(idx) == 1)
            assert np.all(vals[:, 1] == vals[0, 1])
            inside = [r for r in runs[trial] if r[0] <= idx[0] and idx[-1] < r[1]]
            assert len(inside) == 1 and inside[0][2] == lab
    return observed


def test_pipeline_properties():
    check_pipeline(64, 32)
    check_pipeline(50, 25)
    check_pipeline(100, 50)


def test_gap_rules():
    streams, _ = pipeline_streams()
    filled = interpolate_nan(streams[0]).values
    np.testing.assert_allclose(filled[50:53, 2], np.interp([50, 51, 52], [49, 53], filled[[49, 53], 2]))
    assert np.isnan(filled[250:270, 3]).all()
    assert np.isnan(interpolate_nan(streams[1]).values[:5, 2]).all()
    seg = split_streams(streams, SplitSpec("trial", frozenset(), frozenset()), 64, 32)["train"]
    covered = {int(i) for v in seg.values if v[0, 1] == 0 for i in v[:, 0]}
    assert {50, 51, 52} <= covered
    assert not covered & set(range(250, 270))


def test_interpolation_example():
    v = np.array([[1.0], [np.nan], [np.nan], [np.nan], [5.0]])
    out = interpolate_nan(LabeledStream(v, np.zeros(5), "t", 1, RATE)).values[:, 0]
    np.testing.assert_array_equal(out, [1.0, 2.0, 3.0, 4.0, 5.0])
    long_gap = np.concatenate([[1.0], np.full(20, np.nan), [5.0]])[:, None]
    out = interpolate_nan(LabeledStream(long_gap, np.zeros(22), "t", 1, RATE)).values[:, 0]
    assert np.isnan(out[1:21]).all()
    lead = np.array([[np.nan], [np.nan], [2.0]])
    assert np.isnan(interpolate_nan(LabeledStream(lead, np.zeros(3), "t", 1, RATE)).values[:2]).all()


def test_segment_count_examples():
    assert segment_count(128, 64, 32) == 3
    assert segment_count(63, 64, 32) == 0
    s = LabeledStream(np.zeros((128, 2)), np.zeros(128), "t", 1, RATE)
    assert len(segment(s, 64, 32)) == 3
    with pytest.raises(ConfigError):
        segment(s, 0, 32)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 120), st.integers(-1, 2)), min_size=1, max_size=8),
       st.integers(4, 40), st.integers(1, 40))
def test_segment_count_formula_per_run(pieces, window, stride):
    labels = np.concatenate([np.full(n, lab) for n, lab in pieces])
    values = np.arange(len(labels), dtype=float)[:, None]
    seg = segment(LabeledStream(values, labels, "t", 1, RATE), window, stride)
    # maximal runs of one non-NULL label, merged across equal neighbours
    expected, i = 0, 0
    while i < len(labels):
        j = i
        while j < len(labels) and labels[j] == labels[i]:
            j += 1
        if labels[i] != NULL_LABEL:
            expected += segment_count(j - i, window, stride)
        i = j
    assert len(seg) == expected
    for v, lab in zip(seg.values, seg.labels):
        assert np.all(labels[v[:, 0].astype(int)] == lab)


def test_split_spec_rules():
    with pytest.raises(ConfigError):
        SplitSpec("random", frozenset(), frozenset())
    with pytest.raises(ConfigError):
        SplitSpec("subject", frozenset({1, 2}), frozenset({2}))


def test_published_splits():
    assert ds.UCI_SPLIT.test == {2, 4, 9, 10, 12, 13, 18, 20, 24}
    assert ds.UCI_SPLIT.validation == {7, 22}
    assert ds.PAMAP2_SPLIT.validation == {5} and ds.PAMAP2_SPLIT.test == {6}
    assert ds.DAPHNET_SPLIT.test == {"S02R01", "S04R01", "S05R02"}
    assert (ds.DATASETS["opportunity"].window, ds.DATASETS["opportunity"].stride) == (32, 16)
    assert (ds.DATASETS["pamap2"].window, ds.DATASETS["daphnet"].window) == (256, 192)
    assert len(ds.UCI_CLASSES) == 6 and len(ds.PAMAP2_CLASSES) == 11 and len(ds.OPP_CLASSES) == 17
    assert len(ds.DAPHNET_CLASSES) == 2
    assert len(ds.PAMAP2_LAYOUT) == 27 and len(ds.DAPHNET_LAYOUT) == 9 and len(ds.OPP_LAYOUT) == 57


# --- raw readers on fabricated files ----------------------------------------


def write_rows(path, rows):
    path.write_text("\n".join(" ".join(repr(float(v)) if v == v else "NaN" for v in r) for r in rows) + "\n")


def fake_ucihar(root, rng):
    subjects = {"train": [1, 3, 7, 22, 5], "test": [2, 4, 9]}
    for part, subs in subjects.items():
        base = root / part
        (base / "Inertial Signals").mkdir(parents=True)
        n = 2 * len(subs)
        for s in ds.UCI_SIGNALS:
            write_rows(base / "Inertial Signals" / f"{s}_{part}.txt", rng.standard_normal((n, 128)))
        write_rows(base / f"y_{part}.txt", [[1 + i % 6] for i in range(n)])
        write_rows(base / f"subject_{part}.txt", [[s] for s in subs for _ in range(2)])


def test_load_ucihar(tmp_path):
    fake_ucihar(tmp_path, np.random.default_rng(0))
    out = ds.load_ucihar(tmp_path)
    assert {k: len(v) for k, v in out.items()} == {"train": 6, "validation": 4, "test": 6}
    assert set(out["validation"].subjects) == {7, 22}
    assert out["train"].values.shape[1:] == (128, 6)
    (tmp_path / "test" / "y_test.txt").unlink()
    with pytest.raises(InputError, match="y_test"):
        ds.load_ucihar(tmp_path)


def test_read_pamap2(tmp_path):
    rng = np.random.default_rng(1)
    rows = rng.standard_normal((30, ds.PAMAP2_WIDTH))
    rows[:, 1] = [0] * 10 + [4] * 10 + [17] * 10
    rows[3, 5] = np.nan
    write_rows(tmp_path / "subject105.dat", rows)
    s = ds.read_pamap2(tmp_path / "subject105.dat")
    assert s.subject == 5 and s.sample_rate_hz == 100.0 and s.values.shape == (30, 27)
    assert list(s.labels[[0, 10, 20]]) == [NULL_LABEL, 3, 10]
    np.testing.assert_array_equal(s.values[:, 0], rows[:, 4])  # hand acc x
    np.testing.assert_array_equal(s.values[:, 9], rows[:, 21])  # chest acc x


def test_read_daphnet_and_bad_rows(tmp_path):
    rows = np.zeros((6, 11))
    rows[:, 10] = [0, 1, 1, 2, 2, 1]
    rows[:, 1:10] = np.arange(54).reshape(6, 9)
    write_rows(tmp_path / "S02R01.txt", rows)
    s = ds.read_daphnet(tmp_path / "S02R01.txt")
    assert s.trial == "S02R01" and list(s.labels) == [NULL_LABEL, 0, 0, 1, 1, 0]
    with open(tmp_path / "S03R01.txt", "w") as fh:
        fh.write("1 " * 11 + "\n" + "1 2 3\n")
    with pytest.raises(InputError, match=":2:"):
        ds.read_daphnet(tmp_path / "S03R01.txt")
    with open(tmp_path / "S03R02.txt", "w") as fh:
        fh.write("1 " * 11 + "\n" + "1 " * 10 + "x\n")
    with pytest.raises(InputError, match=":2:"):
        ds.read_daphnet(tmp_path / "S03R02.txt")


def test_read_opportunity(tmp_path):
    rows = np.ones((5, ds.OPP_WIDTH))
    rows[:, ds.OPP_LABEL_COLUMN] = [0, 406516, 406516, 405506, 0]
    write_rows(tmp_path / "S2-ADL2.dat", rows)
    s = ds.read_opportunity(tmp_path / "S2-ADL2.dat")
    assert s.values.shape == (5, 57) and s.sample_rate_hz == 30.0
    assert list(s.labels) == [NULL_LABEL, 0, 0, 16, NULL_LABEL]
    assert ds.OPP_SPLIT.assign(s) == "test"


def test_ingest_unknown_kind():
    with pytest.raises(ConfigError):
        ds.ingest_raw("wisdm", [])
    with pytest.raises(ConfigError):
        ds.dataset_info("bogus")


# --- store ---------------------------------------------------------------------


def make_store(split="train") -> SegmentStore:
    streams, _ = pipeline_streams()
    seg = split_streams(streams, SplitSpec("trial", frozenset(), frozenset()), 64, 32)["train"]
    layout = ds.ChannelLayout.from_dicts([{"name": f"c{i}", "sensor_type": "other"} for i in range(4)])
    return SegmentStore("toy", split, 64, 32, layout, ("a", "b", "c"), seg)


def test_store_round_trip_and_determinism(tmp_path):
    store = make_store()
    write_store(tmp_path / "one.seg", store)
    write_store(tmp_path / "two.seg", make_store())
    assert (tmp_path / "one.seg").read_bytes() == (tmp_path / "two.seg").read_bytes()
    back = read_store(tmp_path / "one.seg")
    np.testing.assert_array_equal(back.segments.values, store.segments.values)
    np.testing.assert_array_equal(back.segments.labels, store.segments.labels)
    np.testing.assert_array_equal(back.segments.subjects, store.segments.subjects)
    assert back.layout == store.layout and back.class_names == store.class_names
    raw = (tmp_path / "one.seg").read_bytes()
    (tmp_path / "cut.seg").write_bytes(raw[:-3])
    with pytest.raises(InputError):
        read_store(tmp_path / "cut.seg")


def test_split_manifest(tmp_path):
    stores = {k: make_store(k) for k in ("train", "validation", "test")}
    for k, s in stores.items():
        write_store(store_path(tmp_path, k), s)
    path = write_split_manifest(tmp_path, "toy", SplitSpec("subject", frozenset({2}), frozenset({3})), stores)
    assert path.is_file() and len(load_split(tmp_path, "test")) == len(stores["test"])
    with pytest.raises(UsageError):
        load_split(tmp_path, "holdout")


def test_segments_concat_empty():
    e = Segments.concat([], 8, 3)
    assert e.values.shape == (0, 8, 3) and len(e) == 0
