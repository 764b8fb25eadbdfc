import json

import numpy as np
import pytest

from localhardy import harness as H
from localhardy.cli import main
from localhardy.mmspace import read_space


def write_config(path, **kw):
    doc = {"seed": 1, "family": "cycle", "sizes": [6], "trials": 10, "checks": ["sandwich"]}
    doc.update(kw)
    path.write_text(json.dumps(doc))
    return str(path)


def test_gen_space_is_deterministic(tmp_path):
    for fam in ("cycle", "path", "random-geometric", "grid"):
        a, b = tmp_path / f"{fam}a.json", tmp_path / f"{fam}b.json"
        assert main(["gen-space", "--family", fam, "--n", "9", "--seed", "3", "--out", str(a)]) == 0
        assert main(["gen-space", "--family", fam, "--n", "9", "--seed", "3", "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        sp = read_space(a)
        assert sp.n == 9 and np.allclose(sp.dist, sp.dist.T)


def test_sandwich_config_gives_sixty_passing_rows(tmp_path):
    out = tmp_path / "r.csv"
    assert main(["run", "--config", write_config(tmp_path / "c.json"), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(H.COLUMNS)
    assert len(lines) == 61
    assert all(line.split(",")[7] == "true" for line in lines[1:])
    side = json.loads((tmp_path / "r.csv.json").read_text())
    assert side["summary"]["sandwich"] == {"rows": 60, "violations": 0, "recorded_constant": None}


def test_reports_are_byte_identical(tmp_path):
    cfg = write_config(tmp_path / "c.json", checks=list(H.CHECK_NAMES), trials=2,
                       family="random-geometric", sizes=[8])
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["run", "--config", cfg, "--out", str(a)]) == 0
    assert main(["run", "--config", cfg, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_run_on_space_file(tmp_path, capsys):
    sp = tmp_path / "s.json"
    main(["gen-space", "--family", "path", "--n", "7", "--out", str(sp)])
    capsys.readouterr()
    code = main(["run", "--check", "duality", "--check", "abs-bmo", "--space", str(sp),
                 "--trials", "2", "--seed", "4"])
    assert code == 0
    text = capsys.readouterr().out
    assert text.startswith("check,instance") and "file:s.json" in text


def test_timing_column_is_opt_in(tmp_path, capsys):
    sp = tmp_path / "s.json"
    main(["gen-space", "--family", "cycle", "--n", "5", "--out", str(sp)])
    capsys.readouterr()
    main(["run", "--check", "sandwich", "--space", str(sp)])
    assert "runtime_ms" not in capsys.readouterr().out
    main(["run", "--check", "sandwich", "--space", str(sp), "--timing"])
    assert capsys.readouterr().out.splitlines()[0].endswith("runtime_ms")


@pytest.mark.parametrize("argv", [
    [],
    ["run"],
    ["run", "--check", "nope", "--space", "x"],
    ["gen-space", "--family", "torus", "--n", "4", "--out", "x"],
    ["gen-space", "--family", "cycle", "--n", "0", "--out", "x"],
])
def test_usage_errors_exit_two(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    try:
        code = main(argv)
    except SystemExit as e:
        code = e.code
    assert code == 2


def test_bad_config_and_missing_space(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"seed": 1, "colour": "red"}')
    assert main(["run", "--config", str(bad)]) == 2
    bad.write_text("{not json")
    assert main(["run", "--config", str(bad)]) == 2
    assert main(["run", "--check", "sandwich", "--space", str(tmp_path / "none.json")]) == 2


def test_violation_exits_one(tmp_path, monkeypatch):
    def broken(inst, rng, params):
        return [("always", 1.0, 0.0, 1.0, True)]
    monkeypatch.setitem(H.CHECKS, "sandwich", broken)
    cfg = write_config(tmp_path / "c.json", trials=1)
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "r.csv")]) == 1


def test_every_check_is_reachable_and_produces_rows():
    for fam in ("cycle", "random-geometric"):
        cfg = H.ExperimentConfig(seed=2, family=fam, sizes=[9], trials=3,
                                 checks=list(H.CHECK_NAMES))
        rows = H.run_check(cfg)
        assert {r.check for r in rows} == set(H.CHECK_NAMES)
        assert H.violations(rows) == []
        rec = [r for r in rows if not r.exact]
        assert all(np.isfinite(r.constant) for r in rec)


def test_workers_do_not_change_the_report():
    kw = dict(seed=5, family="path", sizes=[6, 8], trials=2, checks=["covering", "duality", "n-theorem"])
    one = H.rows_to_csv(H.run_check(H.ExperimentConfig(**kw)))
    two = H.rows_to_csv(H.run_check(H.ExperimentConfig(workers=2, **kw)))
    assert one == two
