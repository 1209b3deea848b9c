"""Monte Carlo blend sweep over probability / nonprobability sample mixes.

For each probability fraction on the grid, ``replicates`` composite samples
of ``draw_size`` respondents are drawn (without replacement inside a draw,
independently across draws), each draw is raked from scratch, and the
benchmark estimator is applied with the draw's own weights.  Replicate
``(i, r)`` uses its own random stream derived from the root seed and the
key ``(i, r)``, so results do not depend on how work is split across
processes.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Mapping

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_fraction_grid
from .benchmarks import BenchmarkSpec
from .dataset import FilterSpec, SurveyDataset
from .errors import (
    ConfigError,
    EmptyPool,
    EstimationError,
    NoConvergenceWarning,
    PoolTooSmall,
    RakingError,
)
from .estimators import estimate
from .raking import (
    CellAssignment,
    MarginSpec,
    MarginTargets,
    RakeConfig,
    assign_cells,
    get_spec,
    rake,
)

DEFAULT_INCREMENTS = tuple(round(0.1 * i, 1) for i in range(11))
ASSUMPTIONS = {
    "rerake_per_draw": True,
    "within_draw_replacement": False,
    "across_draw_replacement": True,
    "interval": "order statistics (2.5th lower, 97.5th higher), no interpolation",
    "pools": "general adult population frames only; registered-voter frames excluded",
}


@dataclass(frozen=True)
class SweepConfig:
    draw_size: int = 1000
    increments: tuple[float, ...] = DEFAULT_INCREMENTS
    replicates: int = 500
    seed: int = 0
    estimator: str = "two_party_share"
    params: Mapping[str, Any] = field(default_factory=dict)
    benchmark: BenchmarkSpec | None = None
    rake: RakeConfig = field(default_factory=RakeConfig)
    unreliable_failure_rate: float = 0.10
    record_draws: bool = False

    def __post_init__(self):
        if self.replicates < 2:
            raise ValueError("replicates must be at least 2")
        if self.draw_size < 1:
            raise ValueError("draw_size must be positive")
        object.__setattr__(self, "increments", tuple(float(f) for f in self.increments))
        check_fraction_grid(self.increments, self.draw_size)
        if self.benchmark is not None:
            object.__setattr__(self, "estimator", self.benchmark.estimator)
            merged = dict(self.benchmark.params)
            merged.update(self.params)
            object.__setattr__(self, "params", merged)

    @property
    def k_prob(self) -> list[int]:
        return check_fraction_grid(self.increments, self.draw_size)

    @property
    def n_draws(self) -> int:
        return len(self.increments) * self.replicates

    def echo(self) -> dict[str, Any]:
        out = {
            "draw_size": self.draw_size,
            "increments": list(self.increments),
            "replicates": self.replicates,
            "seed": self.seed,
            "estimator": self.estimator,
            "params": dict(self.params),
            "benchmark": self.benchmark.name if self.benchmark else None,
            "rake": asdict(self.rake),
            "unreliable_failure_rate": self.unreliable_failure_rate,
        }
        return out

    @classmethod
    def from_mapping(cls, cfg: Mapping[str, Any], *, seed: int | None = None,
                     benchmark: BenchmarkSpec | None = None,
                     rake: RakeConfig | None = None) -> "SweepConfig":
        cfg = dict(cfg or {})
        inc = cfg.pop("increments", None)
        if isinstance(inc, Mapping):
            start, stop, step = (float(inc.get(k, d)) for k, d in
                                 (("start", 0.0), ("stop", 1.0), ("step", 0.1)))
            n = int(round((stop - start) / step))
            inc = tuple(round(start + i * step, 10) for i in range(n + 1))
        cfg.pop("benchmark", None)
        kwargs = {k: cfg.pop(k) for k in ("draw_size", "replicates", "estimator", "params",
                                          "unreliable_failure_rate") if k in cfg}
        cfg.pop("seed", None)
        if cfg:
            raise ConfigError(f"unknown sweep option(s): {sorted(cfg)}")
        try:
            return cls(increments=tuple(inc) if inc is not None else DEFAULT_INCREMENTS,
                       seed=int(seed or 0), benchmark=benchmark,
                       rake=rake or RakeConfig(), **kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad sweep config: {exc}") from exc


@dataclass(frozen=True)
class IncrementSummary:
    fraction: float
    k_prob: int
    n_ok: int
    failures: int
    mean: float
    median: float
    p_low: float
    p_high: float
    unreliable: bool
    abs_error: float | None = None


@dataclass
class SweepResult:
    increments: list[IncrementSummary]
    estimates: np.ndarray  # (n_increments, replicates); NaN marks a failed replicate
    metadata: dict[str, Any]
    draw_log: list[tuple[int, int, int, int]] | None = None

    @property
    def n_draws(self) -> int:
        return int(self.estimates.size)

    def best_increment(self) -> IncrementSummary:
        scored = [s for s in self.increments if s.abs_error is not None
                  and np.isfinite(s.abs_error)]
        if not scored:
            raise ValueError("sweep ran without a benchmark; nothing to minimize")
        return min(scored, key=lambda s: s.abs_error)

    def table(self) -> list[dict[str, Any]]:
        return [asdict(s) for s in self.increments]


def partition_pools(dataset: SurveyDataset) -> tuple[SurveyDataset, SurveyDataset]:
    """Probability and nonprobability general-population pools."""
    prob = dataset.filter(FilterSpec.where(category="probability", national_pool=True))
    nonprob = dataset.filter(FilterSpec.where(category="nonprobability", national_pool=True))
    if len(prob) == 0:
        raise EmptyPool("no general-population probability records")
    if len(nonprob) == 0:
        raise EmptyPool("no general-population nonprobability records")
    return prob, nonprob


def _draw_positions(n_prob, n_nonprob, k_prob, draw_size, rng):
    if not 0 <= k_prob <= draw_size:
        raise ValueError("k_prob must lie in [0, draw_size]")
    if k_prob > n_prob:
        raise PoolTooSmall(f"need {k_prob} probability records, pool has {n_prob}")
    if draw_size - k_prob > n_nonprob:
        raise PoolTooSmall(
            f"need {draw_size - k_prob} nonprobability records, pool has {n_nonprob}"
        )
    p = rng.choice(n_prob, size=k_prob, replace=False)
    q = rng.choice(n_nonprob, size=draw_size - k_prob, replace=False)
    return p, q


def draw_composite(prob_pool: SurveyDataset, nonprob_pool: SurveyDataset, k_prob: int,
                   draw_size: int, rng: np.random.Generator) -> np.ndarray:
    """Storage rows of one composite draw: ``k_prob`` probability rows first.

    Both pools must be views of the same dataset; pass the result to
    ``dataset.view`` to get the composite sample.
    """
    if not prob_pool.shares_storage_with(nonprob_pool):
        raise ValueError("pools must be views of the same dataset")
    p, q = _draw_positions(len(prob_pool), len(nonprob_pool), k_prob, draw_size, rng)
    return np.concatenate([prob_pool.rows[p], nonprob_pool.rows[q]])


def replicate_rng(seed: int, increment: int, replicate: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(increment, replicate)))


# Per-process state for workers; set by _init_worker or directly in-process.
_STATE: dict[str, Any] = {}


def _init_worker(state):
    _STATE.clear()
    _STATE.update(state)


def _run_increment(i: int) -> tuple[int, np.ndarray, list]:
    st = _STATE
    cfg: SweepConfig = st["config"]
    k = cfg.k_prob[i]
    prob, nonprob = st["prob"], st["nonprob"]
    pa, na = st["prob_cells"], st["nonprob_cells"]
    base = prob
    out = np.full(cfg.replicates, np.nan)
    log = []
    for r in range(cfg.replicates):
        rng = replicate_rng(cfg.seed, i, r)
        p, q = _draw_positions(len(prob), len(nonprob), k, cfg.draw_size, rng)
        rows = np.concatenate([prob.rows[p], nonprob.rows[q]])
        cells = CellAssignment(np.concatenate([pa.codes[p], na.codes[q]]),
                               pa.dimensions, pa.categories,
                               np.concatenate([pa.respondent_ids[p], na.respondent_ids[q]]))
        if cfg.record_draws:
            n_prob = int(np.isin(rows, prob.rows).sum())
            log.append((i, r, n_prob, len(rows) - n_prob))
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", NoConvergenceWarning)
                wv = rake(cells, st["target_arrays"], cfg.rake)
            est = estimate(cfg.estimator, base.view(rows), wv, **cfg.params)
        except (RakingError, EstimationError):
            continue
        out[r] = est.point
    return i, out, log


def run_sweep(dataset: SurveyDataset, margin_spec: MarginSpec | str,
              targets: MarginTargets, config: SweepConfig, jobs: int = 1) -> SweepResult:
    """Run the blend sweep; output is identical for a given seed and any ``jobs``."""
    spec = get_spec(margin_spec)
    prob, nonprob = partition_pools(dataset)
    for k in config.k_prob:
        if k > len(prob) or config.draw_size - k > len(nonprob):
            raise PoolTooSmall(
                f"increment with {k} probability records needs pools of "
                f"{k}/{config.draw_size - k}; have {len(prob)}/{len(nonprob)}"
            )
    if config.estimator == "births_total" and not config.params.get("eligible_population_count"):
        raise ConfigError("births sweep needs params.eligible_population_count")
    state = {
        "config": config,
        "prob": prob,
        "nonprob": nonprob,
        "prob_cells": assign_cells(prob, spec),
        "nonprob_cells": assign_cells(nonprob, spec),
        "target_arrays": targets.arrays(spec),
    }
    n_inc = len(config.increments)
    estimates = np.full((n_inc, config.replicates), np.nan)
    logs: dict[int, list] = {}
    if jobs > 1 and n_inc > 1:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker,
                                 initargs=(state,)) as pool:
            for i, row, log in pool.map(_run_increment, range(n_inc)):
                estimates[i] = row
                logs[i] = log
    else:
        _init_worker(state)
        try:
            for i in range(n_inc):
                _, estimates[i], logs[i] = _run_increment(i)
        finally:
            _STATE.clear()

    summaries = [
        _summarize(frac, k, estimates[i], config)
        for i, (frac, k) in enumerate(zip(config.increments, config.k_prob))
    ]
    metadata = {
        "config": config.echo(),
        "pool_sizes": {"probability": len(prob), "nonprobability": len(nonprob)},
        "assumptions": dict(ASSUMPTIONS),
        "margin_level": spec.level,
        "n_draws": int(estimates.size),
    }
    draw_log = [e for i in range(n_inc) for e in logs[i]] if config.record_draws else None
    return SweepResult(summaries, estimates, metadata, draw_log)


def _summarize(frac, k, values, config) -> IncrementSummary:
    ok = values[np.isfinite(values)]
    failures = len(values) - len(ok)
    unreliable = failures > config.unreliable_failure_rate * config.replicates
    if len(ok) == 0:
        nan = float("nan")
        return IncrementSummary(frac, k, 0, failures, nan, nan, nan, nan, True,
                                None if config.benchmark is None else nan)
    mean = float(ok.mean())
    err = None if config.benchmark is None else abs(mean - config.benchmark.truth)
    return IncrementSummary(
        frac, k, len(ok), failures, mean, float(np.median(ok)),
        float(np.percentile(ok, 2.5, method="lower")),
        float(np.percentile(ok, 97.5, method="higher")),
        bool(unreliable), err,
    )


class BlendSweep(BaseEstimator):
    """Estimator-style wrapper around :func:`run_sweep`.

    ``fit(dataset)`` runs the sweep and stores the :class:`SweepResult` as
    ``result_`` and per-increment means as ``means_``.
    """

    def __init__(self, targets=None, margin_spec="national", draw_size=1000,
                 increments=DEFAULT_INCREMENTS, replicates=500, seed=0,
                 estimator="two_party_share", params=None, benchmark=None,
                 tolerance=1e-6, max_iterations=100, min_cell_count=5, n_jobs=1):
        self.targets = targets
        self.margin_spec = margin_spec
        self.draw_size = draw_size
        self.increments = increments
        self.replicates = replicates
        self.seed = seed
        self.estimator = estimator
        self.params = params
        self.benchmark = benchmark
        self.tolerance = tolerance
        self.max_iterations = max_iterations
        self.min_cell_count = min_cell_count
        self.n_jobs = n_jobs

    def fit(self, X: SurveyDataset, y=None):
        if not isinstance(X, SurveyDataset):
            raise TypeError("BlendSweep.fit expects a SurveyDataset")
        if self.targets is None:
            raise ValueError("BlendSweep needs margin targets")
        targets = self.targets
        if not isinstance(targets, MarginTargets):
            targets = MarginTargets.from_mapping(targets)
        cfg = SweepConfig(
            draw_size=self.draw_size, increments=tuple(self.increments),
            replicates=self.replicates, seed=self.seed, estimator=self.estimator,
            params=dict(self.params or {}), benchmark=self.benchmark,
            rake=RakeConfig(self.tolerance, self.max_iterations, self.min_cell_count),
        )
        self.result_ = run_sweep(X, self.margin_spec, targets, cfg, jobs=self.n_jobs)
        self.means_ = np.array([s.mean for s in self.result_.increments])
        return self
