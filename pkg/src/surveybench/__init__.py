"""Survey benchmarking: raking, benchmark estimators, scoreboards and blend sweeps."""

__version__ = "0.1.0"

from .benchmarks import (
    BenchmarkRegistry,
    BenchmarkScore,
    BenchmarkSpec,
    builtin_benchmarks,
    cdc_2022_adjustment,
    scoreboard,
    score,
)
from .dataset import (
    FilterSpec,
    FrameKind,
    RespondentRecord,
    SurveyDataset,
    composition_summary,
    filter_records,
    load_survey,
    write_survey,
)
from .estimators import (
    EstimateWithCI,
    LikelyVoterRule,
    births_total,
    internet_shares,
    likely_voters,
    two_party_share,
    weighted_proportion,
)
from .raking import (
    MarginSpec,
    MarginTargets,
    RakeConfig,
    Raker,
    WeightVector,
    assign_cells,
    diagnose,
    national_spec,
    rake,
    state_spec,
)
from .sweep import BlendSweep, SweepConfig, SweepResult, draw_composite, partition_pools, run_sweep

__all__ = [
    "__version__",
    "BenchmarkRegistry",
    "BenchmarkScore",
    "BenchmarkSpec",
    "builtin_benchmarks",
    "cdc_2022_adjustment",
    "scoreboard",
    "score",
    "FilterSpec",
    "FrameKind",
    "RespondentRecord",
    "SurveyDataset",
    "composition_summary",
    "filter_records",
    "load_survey",
    "write_survey",
    "EstimateWithCI",
    "LikelyVoterRule",
    "births_total",
    "internet_shares",
    "likely_voters",
    "two_party_share",
    "weighted_proportion",
    "MarginSpec",
    "MarginTargets",
    "RakeConfig",
    "Raker",
    "WeightVector",
    "assign_cells",
    "diagnose",
    "national_spec",
    "rake",
    "state_spec",
    "BlendSweep",
    "SweepConfig",
    "SweepResult",
    "draw_composite",
    "partition_pools",
    "run_sweep",
]
