from __future__ import annotations

import csv
import json

import pytest

from conftest import DATA
from hhcrsp.cli import main, seed_range
from hhcrsp.config import SolverConfig, apply_overrides, load_config
from hhcrsp.decoder import SIMPLE
from hhcrsp.instance import read_instance

FAST = ["--set", "population_size=30", "--set", "immigrants=3", "--set", "max_generations=4"]


def test_seed_range():
    assert seed_range("1..3") == [1, 2, 3]
    assert seed_range("4,7") == [4, 7]
    assert seed_range("5") == [5]


def test_overrides():
    cfg = apply_overrides(SolverConfig(), {"population_size": "50", "decoder": "sd", "ipr_pairs": "3", "lambda1": "1", "max_seconds": "none", "immigrants": "5"})
    assert cfg.brkga.population_size == 50 and cfg.decoder.mode == SIMPLE and cfg.ipr.pairs == 3
    assert cfg.decoder.weights[0] == 1.0 and cfg.brkga.max_seconds is None
    with pytest.raises(ValueError, match="unknown"):
        apply_overrides(SolverConfig(), {"colour": "red"})
    with pytest.raises(ValueError, match="bad value"):
        apply_overrides(SolverConfig(), {"population_size": "many"})


def test_variants():
    cfg = SolverConfig()
    b, i = cfg.for_variant("BRKGA-MP")
    assert b.num_islands == 1 and i is None
    b, i = cfg.for_variant("BRKGA-MP-MI-IPR")
    assert b.num_islands == 2 and i is not None
    with pytest.raises(ValueError):
        cfg.for_variant("BRKGA")


def test_load_config(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# tuned\npopulation_size = 200\nbias=linear\n")
    cfg = load_config(path)
    assert (cfg.brkga.population_size, cfg.brkga.bias) == (200, "linear")


def test_generate(tmp_path, capsys):
    assert main(["generate", "A", "--seed-range", "1..2", "--out", str(tmp_path)]) == 0
    files = sorted(p.name for p in tmp_path.iterdir())
    assert files == ["A-gen-s1.hhcrsp", "A-gen-s2.hhcrsp"]
    assert read_instance(tmp_path / files[0]).num_patients == 10
    assert main(["generate", "custom", "3", "--patients", "5", "--caregivers", "2", "--out", str(tmp_path)]) == 0
    assert read_instance(tmp_path / "custom-gen-s3.hhcrsp").num_patients == 5


def test_solve_and_report(tmp_path):
    assert main(["generate", "A", "1", "--out", str(tmp_path)]) == 0
    inst = tmp_path / "A-gen-s1.hhcrsp"
    out = tmp_path / "res"
    rc = main(["solve", str(inst), "--variant", "all", "--decoder", "both", "--seed-range", "1..2", "--out", str(out), "--quiet", *FAST])
    assert rc == 0
    assert len(list((out / "reports").glob("*.json"))) == 16
    with open(out / "aggregate.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 8 and all(r["runs"] == "2" for r in rows)
    assert main(["report", str(out)]) == 0

    # tampered aggregate -> invariant failure
    text = (out / "aggregate.csv").read_text().splitlines()
    first = text[1].split(",")
    first[4] = repr(float(first[4]) - 1.0)
    text[1] = ",".join(first)
    (out / "aggregate.csv").write_text("\n".join(text) + "\n")
    assert main(["report", str(out)]) == 3

    # tampered solution cost -> invariant failure
    report = sorted((out / "reports").glob("*.json"))[0]
    data = json.loads(report.read_text())
    data["best_fitness"] -= 1.0
    report.write_text(json.dumps(data))
    (out / "aggregate.csv").unlink()
    assert main(["report", str(out)]) == 3


def test_mp_variant_has_no_events(tmp_path):
    out = tmp_path / "res"
    assert main(["solve", str(DATA / "tiny.hhcrsp"), "--variant", "BRKGA-MP", "--seed-range", "1", "--out", str(out), "--quiet", *FAST]) == 0
    data = json.loads(next((out / "reports").glob("*.json")).read_text())
    assert data["immigrations"] == [] and data["ipr_events"] == []


def test_exit_codes(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["solve"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["solve", "x", "--decoder", "medium"])
    assert exc.value.code == 1
    bad = tmp_path / "bad.hhcrsp"
    bad.write_text("HHCRSP bad\nSIZES 1 1 1 10\n")
    assert main(["solve", str(bad), "--out", str(tmp_path)]) == 2
    assert main(["solve", str(tmp_path / "missing.hhcrsp")]) == 2
    assert main(["solve", str(DATA / "tiny.hhcrsp"), "--set", "nope=1"]) == 2
    assert main(["report", str(tmp_path / "empty")]) == 2


def test_oracle_and_export(tmp_path, capsys):
    assert main(["oracle", str(DATA / "greedy_gap.hhcrsp"), "--kind", "routing"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("ROUTE") and "SPACE" in out and "77.27764495136795" in out
    assert main(["oracle", str(DATA / "tiny.hhcrsp")]) == 0
    lp = tmp_path / "tiny.lp"
    assert main(["export-mip", str(DATA / "tiny.hhcrsp"), "-o", str(lp)]) == 0
    assert lp.read_text() == (DATA / "tiny.lp").read_text()
    assert main(["oracle", str(DATA / "mip_check.hhcrsp"), "--kind", "routing", "--decoder", "sd"]) == 0


def test_rerun_gives_identical_aggregate(tmp_path):
    args = ["solve", str(DATA / "mip_check.hhcrsp"), "--variant", "BRKGA-MP-MI-IPR", "--decoder", "both", "--seed-range", "1..3", "--quiet", *FAST]
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    assert main([*args, "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "aggregate.csv").read_bytes() == (tmp_path / "b" / "aggregate.csv").read_bytes()
