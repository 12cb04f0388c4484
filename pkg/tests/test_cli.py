import numpy as np
import pytest
from importlib import resources

from rtsfnet.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_unknown_dataset(tmp_path, capsys):
    code, _, err = run(capsys, "prepare", "--dataset", "bogus", "--out", str(tmp_path / "o"))
    assert code == 3 and err.startswith("E_CONFIG")


def test_missing_root(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("RTSFNET_DATA_ROOT", raising=False)
    code, _, err = run(capsys, "prepare", "--dataset", "pamap2", "--out", str(tmp_path / "o"))
    assert code == 2 and "--root" in err


def test_bad_arguments(capsys):
    assert run(capsys, "train")[0] == 2
    assert run(capsys, "gradcheck", "--workers", "0")[0] == 2


def test_invalid_config_exits_before_data(tmp_path, capsys):
    text = resources.files("rtsfnet.configs").joinpath("synthetic.yaml").read_text()
    cfg = tmp_path / "bad.yaml"
    cfg.write_text(text.replace("n_h: 4", "n_h: 0"))
    code, _, err = run(capsys, "train", "--config", str(cfg), "--data", str(tmp_path / "nowhere"),
                       "--out", str(tmp_path / "run"))
    assert code == 3 and "n_h" in err


def test_features_unknown_id(tmp_path, capsys):
    seg = tmp_path / "seg.txt"
    np.savetxt(seg, np.zeros((16, 3)))
    code, _, err = run(capsys, "features", "--data", str(seg), "--blockspec", "8", "--features", "99",
                       "--out", str(tmp_path / "f"))
    assert code == 3 and "99" in err


def test_features_constant_segment(tmp_path, capsys):
    seg = tmp_path / "seg.txt"
    np.savetxt(seg, np.full((16, 2), 3.5))
    code, out, _ = run(capsys, "features", "--data", str(seg), "--blockspec", "8", "--features", "1,5,6,7,8",
                       "--out", str(tmp_path / "f"))
    assert code == 0 and "2 blocks" in out
    rows = np.genfromtxt(tmp_path / "f" / "features.csv", delimiter=",", names=True, dtype=None, encoding=None)
    assert len(rows) == 4
    names = rows.dtype.names
    mean_cols = [n for n in names if n.startswith("f1")]
    zero_cols = [n for n in names if n.split("_")[0] in ("f5", "f6", "f7", "f8")]
    assert mean_cols and zero_cols
    for r in rows:
        assert all(r[n] == 3.5 for n in mean_cols)
        assert all(r[n] == 0.0 for n in zero_cols)


def test_synthetic_round_trip(tmp_path, capsys):
    data, run_dir = tmp_path / "data", tmp_path / "run"
    code, out, _ = run(capsys, "prepare", "--dataset", "synthetic", "--out", str(data))
    assert code == 0 and "train,600" in out
    code, out, _ = run(capsys, "train", "--config", "synthetic", "--data", str(data), "--out", str(run_dir),
                       "--epochs", "2", "--quiet")
    assert code == 0 and out.startswith("epochs=2")
    assert "config_sha256:" in (run_dir / "manifest.txt").read_text()
    code, out, _ = run(capsys, "eval", "--checkpoint", str(run_dir), "--data", str(data),
                       "--out", str(tmp_path / "ev"))
    assert code == 0 and out.startswith("split=test acc=")
    assert (tmp_path / "ev" / "confusion.csv").read_text().startswith("actual\\predicted")
    code, out, _ = run(capsys, "report", "--run", str(run_dir), "--data", str(data))
    assert code == 0
    for name in ("confusion.png", "history.png", "per_class.csv", "report.txt"):
        assert (run_dir / name).stat().st_size > 0
    assert (run_dir / "confusion.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    code, _, err = run(capsys, "eval", "--checkpoint", str(tmp_path / "none.bin"), "--data", str(data),
                       "--out", str(tmp_path / "ev"))
    assert code == 2


@pytest.mark.slow
def test_gradcheck_passes(capsys):
    code, out, _ = run(capsys, "gradcheck")
    assert code == 0 and "PASS" in out
