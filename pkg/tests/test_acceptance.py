"""Acceptance criteria, one test each, at the stated tolerances and time budgets."""

import os
import time
from pathlib import Path

import pytest
from test_data import check_pipeline
from test_features import oracle_failures, run_oracle_suite
from test_metrics import DAPHNET_CM, UCIHAR_CM
from test_rotation import rotation_suite
from test_train import flat_validation_stop, no_stop_before_bootstrap, plateau_trace

from rtsfnet.data.metrics import compute_metrics
from rtsfnet.gradcheck import run_tiny_check


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


def test_feature_oracle_suite():
    worst, secs = timed(run_oracle_suite, 1000, seed=7)
    assert oracle_failures(worst) == {}, worst
    assert secs < 60


def test_rotation_suite():
    r, secs = timed(rotation_suite, 10_000, seed=0)
    assert r["orthogonality"] < 1e-6 and r["determinant"] < 1e-6
    assert r["norm"] < 1e-9
    assert r["identity"] == 0.0
    assert secs < 10


def test_gradient_check():
    res, secs = timed(run_tiny_check, 42)
    assert res.max_error < 1e-3, res
    assert secs < 120


def test_metric_reproduction():
    t0 = time.perf_counter()
    u = compute_metrics(UCIHAR_CM)
    d = compute_metrics(DAPHNET_CM)
    assert abs(u.accuracy - 97.76) <= 0.005
    assert abs(u.mf1 - 0.9779) <= 0.0005 and abs(u.wf1 - 0.9776) <= 0.0005
    assert abs(d.accuracy - 95.65) <= 0.005 and abs(d.mf1 - 0.7051) <= 0.0005
    assert time.perf_counter() - t0 < 1


def test_pipeline_properties():
    _, secs = timed(check_pipeline, 64, 32)
    assert secs < 10


def test_schedule_properties():
    t0 = time.perf_counter()
    d = plateau_trace()
    assert not any(x.reduced for x in d[:10]) and d[10].reduced and d[10].lr == 0.001 * 0.8
    assert no_stop_before_bootstrap() > 150
    assert flat_validation_stop() == 200
    assert time.perf_counter() - t0 < 10


@pytest.mark.slow
def test_end_to_end_synthetic():
    from rtsfnet.synthetic import run_synthetic

    t0 = time.perf_counter()
    seeds = (42, 43, 44)
    full = [run_synthetic(True, seed=s) for s in seeds]
    ablated = [run_synthetic(False, seed=s) for s in seeds]
    print(f"rotation {full}  identity {ablated}")
    assert all(a >= 90.0 for a in full), full
    assert all(a < f for a, f in zip(ablated, full)) and sum(ablated) < sum(full)
    assert time.perf_counter() - t0 < 30 * 60


@pytest.mark.slow
@pytest.mark.skipif(not os.environ.get("RTSFNET_DATA_ROOT"), reason="needs the UCI HAR files")
def test_ucihar_full_training(tmp_path):
    from rtsfnet.config import load_config
    from rtsfnet.data.datasets import dataset_info, load_ucihar
    from rtsfnet.model import RTsfNet
    from rtsfnet.train import evaluate, select_final_model, train

    root = Path(os.environ["RTSFNET_DATA_ROOT"]) / "UCI HAR Dataset"
    parts = load_ucihar(root)
    info = dataset_info("ucihar")
    cfg = load_config("ucihar").with_data(info.layout, info.window, len(info.class_names), info.class_names)
    model = RTsfNet(cfg)
    res = train(model, parts["train"], parts["validation"], out_dir=tmp_path)
    select_final_model(model, res.best_state, res.final_state, parts["validation"])
    assert evaluate(model, parts["test"]).accuracy >= 95.0
