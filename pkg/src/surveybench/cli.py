"""Command-line entry point: ``surveybench {validate,scoreboard,sweep,synth}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from . import __version__
from .benchmarks import (
    Approach,
    BenchmarkRegistry,
    ScoreboardRow,
    default_grouping,
    scoreboard,
    state_grouping,
)
from .config import digest, read_tree, write_tree
from .dataset import (
    OVERSAMPLE_STATES,
    FilterSpec,
    SchemaConfig,
    SurveyDataset,
    canonical_schema,
    validate_survey,
    write_survey,
)
from .errors import ConfigError, IngestionError, SurveyBenchError, UnknownBenchmark
from .raking import MarginTargets, RakeConfig, national_spec, state_spec
from .sweep import SweepConfig, run_sweep
from .synthetic import (
    CMS_FRAME_SIZES,
    FrameBiasConfig,
    SyntheticPopulationConfig,
    generate_population,
    sample_frames,
    write_population,
    write_truths,
)

log = logging.getLogger("surveybench")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INGEST = 3
EXIT_COMPUTE = 4


@dataclass
class RunConfig:
    raw: dict[str, Any]
    base_dir: Path
    seed: int
    output_dir: Path
    dataset: Path | None = None
    schema: Path | None = None
    targets: Path | None = None
    benchmarks: Path | None = None
    sections: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def load(cls, path, seed: int | None = None, out: str | None = None,
             need: tuple[str, ...] = ()) -> "RunConfig":
        path = Path(path)
        raw = read_tree(path)
        base = path.parent
        if seed is not None:
            raw["seed"] = seed
        if out is not None:
            raw["output_dir"] = out
        try:
            run_seed = int(raw.get("seed", 0))
        except (TypeError, ValueError):
            raise ConfigError("seed must be an integer") from None
        paths = {}
        for key in ("dataset", "schema", "targets", "benchmarks"):
            if raw.get(key):
                p = Path(raw[key])
                paths[key] = p if p.is_absolute() else base / p
        for key in need:
            if key not in paths:
                raise ConfigError(f"config is missing required entry {key!r}")
        for key, p in paths.items():
            if not p.exists():
                raise ConfigError(f"{key} file not found: {p}")
        out_dir = Path(raw.get("output_dir", "out"))
        if not out_dir.is_absolute():
            out_dir = base / out_dir
        return cls(raw, base, run_seed, out_dir, sections=raw, **paths)

    @property
    def digest(self) -> str:
        return digest({k: v for k, v in self.raw.items() if k != "output_dir"})

    def schema_config(self) -> SchemaConfig:
        if self.schema is None:
            return canonical_schema()
        return SchemaConfig.from_mapping(read_tree(self.schema))

    def registry(self) -> BenchmarkRegistry:
        reg = BenchmarkRegistry()
        if self.benchmarks is not None:
            reg = reg.overlay(read_tree(self.benchmarks))
        if self.raw.get("benchmark_overlay"):
            reg = reg.overlay(self.raw["benchmark_overlay"])
        return reg

    def rake_config(self) -> RakeConfig:
        return RakeConfig.from_mapping(self.raw.get("rake"))

    def load_targets(self) -> tuple[MarginTargets, dict[str, MarginTargets]]:
        tree = read_tree(self.targets)
        national = tree.get("national", {k: v for k, v in tree.items() if k != "states"})
        nat = MarginTargets.from_mapping(national)
        nat.validate(national_spec())
        states = {}
        for st, t in (tree.get("states") or {}).items():
            states[st] = MarginTargets.from_mapping(t)
            states[st].validate(state_spec())
        return nat, states


def _metadata(run: RunConfig, command: str, extra: dict[str, Any] | None = None):
    meta = {
        "tool": f"surveybench {__version__}",
        "command": command,
        "config_digest": run.digest,
        "seed": run.seed,
    }
    meta.update(extra or {})
    return meta


def write_table(path: Path, rows: list[dict[str, Any]], columns, meta: dict[str, Any]):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for key, value in meta.items():
            text = json.dumps(value, sort_keys=True) if not isinstance(value, str) else value
            fh.write(f"# {key}: {text}\n")
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n",
                           extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(row.get(k)) for k in columns})


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def _load_dataset(run: RunConfig) -> SurveyDataset:
    report = validate_survey(run.dataset, run.schema_config())
    if report.errors:
        err = report.errors[0]
        raise err
    ds = report.dataset
    if run.raw.get("base_filter"):
        ds = ds.filter(FilterSpec.from_mapping(run.raw["base_filter"]))
    return ds


# -- commands -----------------------------------------------------------------


def cmd_validate(run: RunConfig, args) -> int:
    if run.targets is not None:
        run.load_targets()
    try:
        report = validate_survey(run.dataset, run.schema_config())
    except IngestionError as exc:
        print(f"ERROR: {exc}")
        return EXIT_INGEST
    if report.errors:
        for err in report.errors[:50]:
            print(f"ERROR: {err}")
        if len(report.errors) > 50:
            print(f"... {len(report.errors) - 50} more")
        print(f"FAILED, {len(report.errors)} problem(s) in {report.n_rows} rows")
        return EXIT_INGEST
    print(f"OK, {report.n_rows} rows")
    return EXIT_OK


def _selected_benchmarks(run: RunConfig, reg: BenchmarkRegistry):
    chosen = (run.raw.get("scoreboard") or {}).get("benchmarks")
    if chosen:
        return [reg.lookup(name) for name in chosen]
    out = []
    for b in reg:
        if b.estimator == "births_total" and not b.params.get("eligible_population_count"):
            log.info("skipping %s: no eligible_population_count", b.name)
            continue
        out.append(b)
    return out


def _grouping(section, key, default):
    cfg = section.get(key)
    if not cfg:
        return default
    return [Approach.from_mapping(a) for a in cfg]


def cmd_scoreboard(run: RunConfig, args) -> int:
    reg = run.registry()
    benchmarks = _selected_benchmarks(run, reg)
    national_targets, state_targets = run.load_targets()
    section = run.raw.get("scoreboard") or {}
    states = section.get("states", list(OVERSAMPLE_STATES))
    ds = _load_dataset(run)
    rake_cfg = run.rake_config()
    out = run.output_dir
    for bench in benchmarks:
        if bench.scope == "national":
            spec, targets, grouping = national_spec(), national_targets, _grouping(
                section, "grouping", default_grouping())
        else:
            if bench.scope not in states:
                continue
            if bench.scope not in state_targets:
                raise ConfigError(f"no state targets for {bench.scope} ({bench.name})")
            spec, targets, grouping = state_spec(), state_targets[bench.scope], _grouping(
                section, "state_grouping", state_grouping())
        rows = scoreboard(ds, spec, targets, [bench], grouping, rake_cfg)
        meta = _metadata(run, "scoreboard", {
            "benchmark": bench.name, "scope": bench.scope, "truth": bench.truth,
            "margin_level": spec.level, "ci_method": "normal approximation, Kish effective n",
            "assumptions": {"top_coded_births_as_6": True, "per_approach_raking": True},
        })
        dicts = [r.as_dict() for r in rows]
        write_table(out / f"scoreboard_{bench.name}.csv", dicts, ScoreboardRow.COLUMNS, meta)
        write_table(out / f"plot_{bench.name}.csv", dicts,
                    ("approach", "weighted", "point", "ci_low", "ci_high", "truth", "status"),
                    meta)
        n_fail = sum(1 for r in rows if r.status not in ("ok",))
        print(f"{bench.name}: {len(rows)} rows ({n_fail} not ok) -> "
              f"{out / f'scoreboard_{bench.name}.csv'}")
    return EXIT_OK


SWEEP_COLUMNS = ("fraction", "k_prob", "mean", "median", "p2.5", "p97.5", "n_ok",
                 "failures", "unreliable", "abs_error")


def cmd_sweep(run: RunConfig, args) -> int:
    section = dict(run.raw.get("sweep") or {})
    reg = run.registry()
    bench = reg.lookup(section["benchmark"]) if section.get("benchmark") else None
    national_targets, state_targets = run.load_targets()
    config = SweepConfig.from_mapping(section, seed=run.seed, benchmark=bench,
                                      rake=run.rake_config())
    ds = _load_dataset(run)
    if bench is not None and bench.scope != "national":
        raise ConfigError("blend sweeps run on national pools only")
    result = run_sweep(ds, national_spec(), national_targets, config, jobs=args.jobs)
    name = bench.name if bench else config.estimator
    meta = _metadata(run, "sweep", {"sweep": result.metadata})
    rows = []
    for s in result.increments:
        rows.append({"fraction": s.fraction, "k_prob": s.k_prob, "mean": s.mean,
                     "median": s.median, "p2.5": s.p_low, "p97.5": s.p_high,
                     "n_ok": s.n_ok, "failures": s.failures, "unreliable": s.unreliable,
                     "abs_error": s.abs_error})
    out = run.output_dir
    write_table(out / f"sweep_{name}.csv", rows, SWEEP_COLUMNS, meta)
    reps = [
        {"fraction": frac, "replicate": r, "estimate": float(v) if v == v else None}
        for frac, row in zip(config.increments, result.estimates)
        for r, v in enumerate(row)
    ]
    write_table(out / f"sweep_{name}_replicates.csv", reps,
                ("fraction", "replicate", "estimate"), meta)
    print(f"sweep {name}: {result.n_draws} draws over {len(rows)} increments -> "
          f"{out / f'sweep_{name}.csv'}")
    if bench is not None:
        best = result.best_increment()
        print(f"closest to truth {bench.truth:g}: fraction {best.fraction:g}, "
              f"mean {best.mean:.6g}")
    return EXIT_OK


def cmd_synth(run: RunConfig, args) -> int:
    section = dict(run.raw.get("synth") or {})
    pop_cfg = dict(section.get("population") or {})
    pop_cfg.setdefault("seed", run.seed)
    population = generate_population(SyntheticPopulationConfig.from_mapping(pop_cfg))
    sizes = section.get("sizes") or CMS_FRAME_SIZES
    bias = FrameBiasConfig.from_mapping(section.get("bias"))
    ds = sample_frames(population, bias, sizes, run.seed + 1)
    out = run.output_dir
    out.mkdir(parents=True, exist_ok=True)
    write_survey(ds, out / "survey.csv")
    if section.get("write_population", True):
        write_population(population, out / "population.csv")
    write_truths(population.truths, out / "truths.json")
    write_tree({"columns": dict(canonical_schema().columns)}, out / "schema.yaml")
    targets = {"national": population.margins().to_mapping(),
               "states": {st: population.state_margins(st).to_mapping()
                          for st in OVERSAMPLE_STATES}}
    write_tree(targets, out / "targets.yaml")
    write_tree(population.truths.benchmark_overlay(), out / "benchmarks.yaml")
    write_tree({
        "dataset": "survey.csv", "schema": "schema.yaml", "targets": "targets.yaml",
        "benchmarks": "benchmarks.yaml", "seed": run.seed, "output_dir": "results",
        "sweep": {"benchmark": "house_vote_2022", "draw_size": 1000, "replicates": 500},
    }, out / "config.yaml")
    meta = _metadata(run, "synth")
    (out / "synth_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"synthetic population of {len(population)}; {len(ds)} respondents -> {out}")
    return EXIT_OK


COMMANDS = {
    "validate": (cmd_validate, ("dataset",)),
    "scoreboard": (cmd_scoreboard, ("dataset", "targets")),
    "sweep": (cmd_sweep, ("dataset", "targets")),
    "synth": (cmd_synth, ()),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="run config file (YAML)")
    common.add_argument("--seed", type=int, default=None, help="override config seed")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="surveybench", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="check a survey file against its schema")
    sub.add_parser("scoreboard", parents=[common], help="score approaches against benchmarks")
    sub.add_parser("sweep", parents=[common], help="run the probability/nonprobability blend sweep")
    sub.add_parser("synth", parents=[common], help="generate a synthetic population and frames")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    fn, need = COMMANDS[args.command]
    try:
        run = RunConfig.load(args.config, seed=args.seed, out=args.out, need=need)
        return fn(run, args)
    except (ConfigError, UnknownBenchmark) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IngestionError as exc:
        print(f"ingestion error: {exc}", file=sys.stderr)
        return EXIT_INGEST
    except SurveyBenchError as exc:
        print(f"computation error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
