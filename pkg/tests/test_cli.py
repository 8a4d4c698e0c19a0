import json
import subprocess
import sys
import time

import numpy as np
import pytest

from aidcov import cli
from aidcov.config import Config, ConfigError, apply_overrides, default_config
from aidcov.evaluation import load_dataset
from aidcov.features import traditional_set_covd
from aidcov.pipeline import image_covds

SMOKE = [
    "synthetic.classes=2",
    "synthetic.sets_per_class=4",
    "synthetic.images_per_set=5",
    "synthetic.image_size=16",
    "protocol.trials=3",
    "nystrom.D=8",
    "nystrom.M=12",
]


def run(argv, capsys=None):
    code = cli.main(argv)
    out = capsys.readouterr() if capsys else None
    return code, out


def with_sets(cmd, sets, *extra):
    argv = [cmd]
    for s in sets:
        argv += ["--set", s]
    return argv + list(extra)


@pytest.fixture(autouse=True)
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def test_init_writes_defaults(workdir, capsys):
    code, _ = run(["init"], capsys)
    assert code == 0
    doc = json.loads((workdir / "aidcov.json").read_text())
    assert doc == default_config()
    code, out = run(["init"], capsys)
    assert code == 2 and "--force" in out.err
    assert run(["init", "--force"])[0] == 0


def test_config_file_and_overrides(workdir):
    (workdir / "c.json").write_text(json.dumps({"nystrom": {"D": 10}}))
    args = cli.build_parser().parse_args(["eval", "-c", "c.json", "--set", "nystrom.M=30", "--trials", "2"])
    cfg = cli._build_config(args)
    assert cfg.settings.D == 10 and cfg.settings.M == 30 and cfg.protocol.trials == 2


def test_config_validation():
    for bad in ({"eps": -1}, {"nystrom": {"D": 70, "M": 60}}, {"bogus": 1}, {"resize": [0, 20]},
                {"feature": {"kind": "SIFT"}}, {"protocol": {"methods": ["NN-X"]}}, {"jobs": 0}):
        with pytest.raises(ConfigError):
            Config.from_dict(bad)
    with pytest.raises(ConfigError):
        apply_overrides({}, ["no-equals-sign"])


def test_hash_ignores_paths_and_jobs():
    a = Config.from_dict({})
    b = Config.from_dict({"jobs": 3, "paths": {"output": "elsewhere"}})
    c = Config.from_dict({"eps": 1e-2})
    assert a.hash() == b.hash() != c.hash()


def test_jobs_default_is_hardware_parallelism():
    import os

    assert Config.from_dict({}).settings.jobs == (os.cpu_count() or 1)


def test_synth_writes_dataset(workdir, capsys):
    code, _ = run(with_sets("synth", SMOKE, "--out", "data"), capsys)
    assert code == 0
    sets = load_dataset(workdir / "data")
    assert len(sets) == 8 and all(len(s) == 5 for s in sets)


def test_extract_cache_hit_and_matches_library(workdir, capsys):
    argv = with_sets("extract", SMOKE)
    assert run(argv, capsys)[0] == 0
    assert run(argv, capsys)[1].out.strip().endswith("cache hits 16, computed 0")
    cfg = cli._build_config(cli.build_parser().parse_args(argv))
    data, covds, trads, _ = cli.extract(cfg, echo=lambda *_: None)
    direct = image_covds(data[2], cfg.feature, cfg.settings.eps)
    np.testing.assert_array_equal(np.stack(covds[2]), np.stack(direct))
    np.testing.assert_array_equal(trads[1], traditional_set_covd(data[1], (20, 20), cfg.settings.eps))
    sidecars = list((workdir / "aidcov-cache").rglob("*.json"))
    assert len(sidecars) == 16
    assert json.loads(sidecars[0].read_text())["dataset"] == "synthetic"


def test_extract_corrupt_image(workdir, capsys):
    run(with_sets("synth", SMOKE, "--out", "data"))
    (workdir / "data" / "class01" / "set02" / "0003.pgm").write_bytes(b"P5\n16 16\n255\n\x00")
    code, out = run(["extract", "--dataset", "data"], capsys)
    assert code == 2
    assert "0003.pgm" in out.err


def test_missing_dataset_is_config_error(capsys):
    code, out = run(["eval", "--dataset", "nowhere"], capsys)
    assert code == 2 and "nowhere" in out.err


def test_eval_smoke(workdir, capsys):
    t0 = time.perf_counter()
    code, out = run(with_sets("eval", SMOKE, "--quiet"), capsys)
    assert code == 0
    assert time.perf_counter() - t0 < 60
    doc = json.loads((workdir / "aidcov-out" / "report.json").read_text())
    assert list(doc["methods"]) == list(cli.METHODS)
    assert all(len(m["accuracies"]) == 3 for m in doc["methods"].values())
    assert (workdir / "aidcov-out" / "report.txt").read_text().count("±") == 8
    assert (workdir / "aidcov-out" / "report.csv").exists()


def test_eval_single_method(workdir, capsys):
    code, out = run(with_sets("eval", SMOKE, "--methods", "NN-LogED", "-q"), capsys)
    assert code == 0
    rows = (workdir / "aidcov-out" / "report.txt").read_text().strip().splitlines()
    assert len(rows) == 2 and rows[1].startswith("NN-LogED ")
    # no per-image CovDs are needed for a traditional-only run
    assert not (workdir / "aidcov-cache" / "synthetic" / "image_covds").exists()


def test_eval_on_disk_dataset_matches_synthetic_shape(workdir, capsys):
    run(with_sets("synth", SMOKE, "--out", "data"))
    code, _ = run(with_sets("eval", SMOKE, "--dataset", "data", "--methods", "CDL,CDL_pro", "-q"), capsys)
    assert code == 0
    doc = json.loads((workdir / "aidcov-out" / "report.json").read_text())
    assert doc["dataset"] == "data" and set(doc["methods"]) == {"CDL", "CDL_pro"}


def test_eval_failure_exits_nonzero(monkeypatch, capsys):
    import aidcov.evaluation as ev

    def boom(*a, **k):
        raise FloatingPointError("injected")

    monkeypatch.setattr(ev, "_classify", boom)
    code, out = run(with_sets("eval", SMOKE, "--methods", "NN-AIRM", "-q"), capsys)
    assert code == 1
    assert "NN-AIRM" in out.err and "trial 0" in out.err


def test_selftest(capsys):
    code, out = run(["selftest"], capsys)
    assert code == 0
    lines = out.out.strip().splitlines()
    assert lines and all(l.startswith("PASS") for l in lines)
    again = run(["selftest"], capsys)[1].out
    assert again == out.out


def test_selftest_rejects_negative_eps(capsys):
    code, out = run(["selftest", "--set", "eps=-1"], capsys)
    assert code == 2 and "eps" in out.err


def test_module_entry_point(workdir):
    proc = subprocess.run([sys.executable, "-m", "aidcov", "selftest"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "FAIL" not in proc.stdout
