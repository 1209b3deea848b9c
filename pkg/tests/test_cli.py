import csv
import subprocess
import sys

import pytest
import yaml

from surveybench.cli import EXIT_COMPUTE, EXIT_CONFIG, EXIT_INGEST, EXIT_OK, main

SIZES = {"prob_panel": {"CA": 200, "FL": 200, "WI": 150, "other": 900},
         "rdd": 150,
         "nonprob_panel_1": {"CA": 200, "FL": 200, "WI": 150, "other": 1000},
         "nonprob_panel_2": {"WI": 3, "other": 300},
         "rv_sms": 200}


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    (d / "synth.yaml").write_text(yaml.safe_dump({
        "seed": 7, "output_dir": "data",
        "synth": {"population": {"population_size": 30_000}, "sizes": SIZES},
    }))
    assert main(["synth", "--config", str(d / "synth.yaml")]) == EXIT_OK
    data = d / "data"
    cfg = yaml.safe_load((data / "config.yaml").read_text())
    cfg["sweep"] = {"benchmark": "house_vote_2022", "draw_size": 300, "replicates": 2,
                    "increments": [0.0, 0.5, 1.0]}
    (data / "config.yaml").write_text(yaml.safe_dump(cfg))
    return data


def read_table(path):
    lines = path.read_text().splitlines()
    meta = dict(line[2:].split(": ", 1) for line in lines if line.startswith("# "))
    rows = list(csv.DictReader(line for line in lines if not line.startswith("# ")))
    return meta, rows


def test_synth_outputs(synth_dir):
    for name in ("survey.csv", "population.csv", "truths.json", "schema.yaml",
                 "targets.yaml", "benchmarks.yaml", "config.yaml", "synth_meta.json"):
        assert (synth_dir / name).exists(), name


def test_validate_ok(synth_dir, capsys):
    assert main(["validate", "--config", str(synth_dir / "config.yaml")]) == EXIT_OK
    n = sum(SIZES["prob_panel"].values()) + 150 + sum(SIZES["nonprob_panel_1"].values()) \
        + 303 + 200
    assert capsys.readouterr().out.strip() == f"OK, {n} rows"


def test_validate_bad_code(synth_dir, tmp_path, capsys):
    lines = (synth_dir / "survey.csv").read_text().splitlines()
    header = lines[0].split(",")
    row = lines[4].split(",")
    row[header.index("race_eth")] = "zzz"
    lines[4] = ",".join(row)
    (tmp_path / "bad.csv").write_text("\n".join(lines) + "\n")
    (tmp_path / "c.yaml").write_text(yaml.safe_dump({"dataset": "bad.csv"}))
    assert main(["validate", "--config", str(tmp_path / "c.yaml")]) == EXIT_INGEST
    out = capsys.readouterr().out
    assert "row 3" in out and "zzz" in out


def test_missing_targets_is_config_error(synth_dir, tmp_path, capsys):
    (tmp_path / "c.yaml").write_text(yaml.safe_dump({
        "dataset": str(synth_dir / "survey.csv"), "targets": "nope.yaml"}))
    assert main(["validate", "--config", str(tmp_path / "c.yaml")]) == EXIT_CONFIG
    assert "targets" in capsys.readouterr().err
    (tmp_path / "d.yaml").write_text(yaml.safe_dump({"dataset": str(synth_dir / "survey.csv")}))
    assert main(["scoreboard", "--config", str(tmp_path / "d.yaml")]) == EXIT_CONFIG


def test_unknown_benchmark_is_config_error(synth_dir, tmp_path):
    cfg = yaml.safe_load((synth_dir / "config.yaml").read_text())
    cfg = {k: str(synth_dir / v) if k in ("dataset", "schema", "targets", "benchmarks") else v
           for k, v in cfg.items()}
    cfg["scoreboard"] = {"benchmarks": ["no_such_benchmark"]}
    (tmp_path / "c.yaml").write_text(yaml.safe_dump(cfg))
    assert main(["scoreboard", "--config", str(tmp_path / "c.yaml")]) == EXIT_CONFIG


def test_computation_error_exit(synth_dir, tmp_path):
    cfg = yaml.safe_load((synth_dir / "config.yaml").read_text())
    cfg = {k: str(synth_dir / v) if k in ("dataset", "schema", "targets", "benchmarks") else v
           for k, v in cfg.items()}
    cfg["base_filter"] = {"category": "probability", "national_pool": True}
    (tmp_path / "c.yaml").write_text(yaml.safe_dump(cfg))
    assert main(["sweep", "--config", str(tmp_path / "c.yaml"),
                 "--out", str(tmp_path / "o")]) == EXIT_COMPUTE


def test_scoreboard_files(synth_dir, tmp_path):
    out = tmp_path / "sb"
    assert main(["scoreboard", "--config", str(synth_dir / "config.yaml"),
                 "--out", str(out)]) == EXIT_OK
    meta, rows = read_table(out / "scoreboard_house_vote_2022.csv")
    assert len(rows) == 24
    assert meta["seed"] == "7" and meta["tool"].startswith("surveybench ")
    assert "config_digest" in meta
    truths = yaml.safe_load((synth_dir / "benchmarks.yaml").read_text())
    for r in rows:
        if r["status"] == "ok":
            covered = float(r["ci_low"]) <= truths["house_vote_2022"]["truth"] \
                <= float(r["ci_high"])
            assert r["covered"] == str(covered)
    _, wi = read_table(out / "scoreboard_births_WI.csv")
    assert len(wi) == 18
    p2 = {(r["approach"], r["weighted"]): r["status"] for r in wi}
    assert p2[("Nonprobability panel 2", "True")] == "InsufficientCells"
    assert p2[("Nonprobability panel 2", "False")] == "ok"
    _, plot = read_table(out / "plot_house_vote_2022.csv")
    assert len(plot) == 24 and set(plot[0]) >= {"approach", "weighted", "point"}


def test_sweep_smoke_min_max(synth_dir, tmp_path, capsys):
    out = tmp_path / "sw"
    assert main(["sweep", "--config", str(synth_dir / "config.yaml"),
                 "--out", str(out)]) == EXIT_OK
    meta, rows = read_table(out / "sweep_house_vote_2022.csv")
    _, reps = read_table(out / "sweep_house_vote_2022_replicates.csv")
    assert len(rows) == 3 and len(reps) == 6
    for r in rows:
        vals = [float(x["estimate"]) for x in reps if x["fraction"] == r["fraction"]]
        assert float(r["p2.5"]) == min(vals) and float(r["p97.5"]) == max(vals)
    assert '"rerake_per_draw": true' in meta["sweep"]
    assert "closest to truth" in capsys.readouterr().out


def test_repeated_seed_byte_identical(synth_dir, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    cfg = str(synth_dir / "config.yaml")
    assert main(["sweep", "--config", cfg, "--out", str(a)]) == EXIT_OK
    assert main(["sweep", "--config", cfg, "--out", str(b), "--jobs", "2"]) == EXIT_OK
    for f in a.iterdir():
        assert f.read_bytes() == (b / f.name).read_bytes()
    c = tmp_path / "c"
    assert main(["sweep", "--config", cfg, "--out", str(c), "--seed", "8"]) == EXIT_OK
    assert (c / "sweep_house_vote_2022.csv").read_bytes() != \
        (a / "sweep_house_vote_2022.csv").read_bytes()


def test_metadata_tracks_assumptions(synth_dir, tmp_path):
    cfg = yaml.safe_load((synth_dir / "config.yaml").read_text())
    cfg = {k: str(synth_dir / v) if k in ("dataset", "schema", "targets", "benchmarks") else v
           for k, v in cfg.items()}
    cfg["rake"] = {"min_cell_count": 3}
    (tmp_path / "c.yaml").write_text(yaml.safe_dump(cfg))
    assert main(["sweep", "--config", str(tmp_path / "c.yaml"), "--out",
                 str(tmp_path / "x")]) == EXIT_OK
    assert main(["sweep", "--config", str(synth_dir / "config.yaml"), "--out",
                 str(tmp_path / "y")]) == EXIT_OK
    mx, _ = read_table(tmp_path / "x" / "sweep_house_vote_2022.csv")
    my, _ = read_table(tmp_path / "y" / "sweep_house_vote_2022.csv")
    assert mx["config_digest"] != my["config_digest"]
    assert mx["sweep"] != my["sweep"]


def test_module_entry_point(synth_dir):
    res = subprocess.run([sys.executable, "-m", "surveybench", "validate", "--config",
                          str(synth_dir / "config.yaml")], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("OK, ")
