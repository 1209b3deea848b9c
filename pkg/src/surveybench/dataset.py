"""Respondent-level survey microdata: records, frames, ingestion and views.

A :class:`SurveyDataset` is a columnar, read-only table.  Categorical fields
are stored as small integer codes into the category tuples in
:data:`CATEGORIES`; every categorical field carries an explicit ``"missing"``
category instead of a sentinel value.  Filtering produces views that share
the underlying column storage.
"""

from __future__ import annotations

import csv
import hashlib
import io
import os
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    BadCategoryCode,
    ConfigError,
    DuplicateRespondent,
    EmptyDataset,
    InvariantViolation,
    MissingColumn,
    RowError,
)

MISSING = "missing"
BIRTHS_TOP_CODE = 6
BIRTHS_MAX_AGE = 65
MIN_AGE = 18

CATEGORIES: dict[str, tuple[str, ...]] = {
    "mode": ("web", "phone"),
    "gender": ("man", "woman", "other", MISSING),
    "race_eth": ("white_nh", "black_nh", "hispanic", "other_nh", MISSING),
    "education": ("lt_hs", "hs", "some_college", "ba", "post_ba", MISSING),
    "region": ("northeast", "south", "midwest", "west", MISSING),
    "vote_house": ("dem", "rep", "other", "none", MISSING),
    "turnout_intent": (
        "will_not_vote",
        "less_than_even",
        "even",
        "probably",
        "certain",
        "already_voted",
        MISSING,
    ),
    "interest": ("extremely", "very", "somewhat", "a_little", "not_at_all", MISSING),
    "internet": ("paid", "unpaid", "none", MISSING),
}

# Census regions; DC counted with the South.
_REGION_STATES = {
    "northeast": "CT ME MA NH RI VT NJ NY PA",
    "midwest": "IL IN MI OH WI IA KS MN MO NE ND SD",
    "south": "DE DC FL GA MD NC SC VA WV AL KY MS TN AR LA OK TX",
    "west": "AZ CO ID MT NV NM UT WY AK CA HI OR WA",
}
STATE_REGION: dict[str, str] = {
    st: region for region, states in _REGION_STATES.items() for st in states.split()
}
STATES: tuple[str, ...] = tuple(sorted(STATE_REGION))
OVERSAMPLE_STATES = ("CA", "FL", "WI")

FIELDS = (
    "respondent_id",
    "frame",
    "mode",
    "state",
    "age_years",
    "gender",
    "race_eth",
    "education",
    "region",
    "vote_house",
    "turnout_intent",
    "interest",
    "births_10yr",
    "internet",
)
REQUIRED_FIELDS = ("respondent_id", "frame", "age_years", "gender")

FRAME_CATEGORIES = ("probability", "nonprobability", "registered_voter")


@dataclass(frozen=True)
class FrameKind:
    """A sampling frame.

    ``national_pool`` marks frames that belong to the general adult
    population pools used by blend sweeps; state-only oversample frames set
    it to False.
    """

    source_label: str
    category: str
    default_mode: str = "web"
    national_pool: bool = True

    def __post_init__(self):
        if self.category not in FRAME_CATEGORIES:
            raise ValueError(f"unknown frame category {self.category!r}")
        if self.default_mode not in CATEGORIES["mode"]:
            raise ValueError(f"unknown mode {self.default_mode!r}")
        if self.category == "registered_voter" and self.national_pool:
            object.__setattr__(self, "national_pool", False)


DEFAULT_FRAMES: dict[str, FrameKind] = {
    f.source_label: f
    for f in (
        FrameKind("prob_panel", "probability"),
        FrameKind("random_abs", "probability"),
        FrameKind("random_abs_wi", "probability", national_pool=False),
        FrameKind("rdd", "probability", default_mode="phone"),
        FrameKind("nonprob_panel_1", "nonprobability"),
        FrameKind("nonprob_panel_2", "nonprobability"),
        FrameKind("nonprob_marketplace_1", "nonprobability"),
        FrameKind("nonprob_marketplace_2", "nonprobability"),
        FrameKind("rv_abs", "registered_voter"),
        FrameKind("rv_sms", "registered_voter"),
    )
}


@dataclass(frozen=True)
class RespondentRecord:
    respondent_id: str
    frame: FrameKind
    mode: str
    state: str | None
    age_years: int
    gender: str
    race_eth: str = MISSING
    education: str = MISSING
    region: str = MISSING
    vote_house: str = MISSING
    turnout_intent: str = MISSING
    interest: str = MISSING
    births_10yr: int | None = None
    internet: str = MISSING

    @property
    def birth_eligible(self) -> bool:
        return self.gender == "woman" and self.age_years <= BIRTHS_MAX_AGE


def check_record(rec: RespondentRecord) -> None:
    """Raise ``ValueError`` if ``rec`` breaks a record invariant."""
    problem = _record_problem(
        rec.age_years, rec.gender, rec.births_10yr, rec.state
    )
    if problem:
        raise ValueError(f"{rec.respondent_id}: {problem[1]}")
    for name, cats in CATEGORIES.items():
        if getattr(rec, name) not in cats:
            raise ValueError(f"{rec.respondent_id}: bad {name} {getattr(rec, name)!r}")


def _record_problem(age, gender, births, state):
    if age < MIN_AGE:
        return "age_years", f"age {age} below {MIN_AGE}"
    if births is not None:
        if births < 0 or births > BIRTHS_TOP_CODE:
            return "births_10yr", f"births must lie in 0..{BIRTHS_TOP_CODE}"
        if not (gender == "woman" and age <= BIRTHS_MAX_AGE):
            return "births_10yr", "births reported for an ineligible respondent"
    if state is not None and state not in STATE_REGION:
        return "state", f"unknown state {state!r}"
    return None


@dataclass(frozen=True)
class Provenance:
    source: str
    sha256: str
    row_count: int


class _Store:
    """Column storage shared by a dataset and all of its views."""

    def __init__(self, columns: dict[str, np.ndarray], frames: tuple[FrameKind, ...]):
        for arr in columns.values():
            arr.setflags(write=False)
        self.columns = columns
        self.frames = frames
        self.frame_category = np.array(
            [FRAME_CATEGORIES.index(f.category) for f in frames], dtype=np.int8
        )
        self.frame_national = np.array([f.national_pool for f in frames], dtype=bool)
        self.n = len(columns["respondent_id"])


class SurveyDataset:
    """Immutable, ordered collection of respondent records.

    Views created by :meth:`filter` or :meth:`view` hold an index array into
    the parent's column storage; no column data is copied.
    """

    def __init__(self, store: _Store, rows: np.ndarray | None = None,
                 provenance: Provenance | None = None):
        self._store = store
        if rows is None:
            rows = np.arange(store.n, dtype=np.intp)
        rows = np.asarray(rows, dtype=np.intp)
        rows.setflags(write=False)
        self._rows = rows
        self.provenance = provenance

    # construction -------------------------------------------------------

    @classmethod
    def from_records(cls, records: Iterable[RespondentRecord],
                     provenance: Provenance | None = None) -> "SurveyDataset":
        records = list(records)
        frames: dict[str, FrameKind] = {}
        seen = set()
        for i, r in enumerate(records):
            check_record(r)
            if r.respondent_id in seen:
                raise DuplicateRespondent(i, "respondent_id", r.respondent_id,
                                          "duplicate respondent_id")
            seen.add(r.respondent_id)
            known = frames.setdefault(r.frame.source_label, r.frame)
            if known != r.frame:
                raise ValueError(
                    f"source_label {r.frame.source_label!r} used with two frame kinds"
                )
        frame_tuple = tuple(frames.values())
        frame_index = {f.source_label: i for i, f in enumerate(frame_tuple)}
        cols: dict[str, np.ndarray] = {
            "respondent_id": np.array([r.respondent_id for r in records], dtype=object),
            "frame": np.array([frame_index[r.frame.source_label] for r in records],
                              dtype=np.int16),
            "age_years": np.array([r.age_years for r in records], dtype=np.int16),
            "state": np.array(
                [STATES.index(r.state) if r.state else -1 for r in records], dtype=np.int8
            ),
            "births_10yr": np.array(
                [r.births_10yr if r.births_10yr is not None else 0 for r in records],
                dtype=np.int8,
            ),
            "births_observed": np.array(
                [r.births_10yr is not None for r in records], dtype=bool
            ),
        }
        for name, cats in CATEGORIES.items():
            lookup = {c: i for i, c in enumerate(cats)}
            cols[name] = np.array([lookup[getattr(r, name)] for r in records],
                                  dtype=np.int8)
        return cls(_Store(cols, frame_tuple), provenance=provenance)

    @classmethod
    def from_columns(cls, columns: Mapping[str, np.ndarray], frames: Sequence[FrameKind],
                     provenance: Provenance | None = None) -> "SurveyDataset":
        """Build from already-encoded columns (codes as in :meth:`codes`).

        Required keys: ``respondent_id``, ``frame`` (index into ``frames``),
        ``age_years``, ``state`` (index into STATES or -1), ``births_10yr``,
        ``births_observed`` and one code array per CATEGORIES field.
        """
        dtypes = {"respondent_id": object, "frame": np.int16, "age_years": np.int16,
                  "state": np.int8, "births_10yr": np.int8, "births_observed": bool}
        dtypes.update({name: np.int8 for name in CATEGORIES})
        cols = {k: np.array(columns[k], dtype=dt) for k, dt in dtypes.items()}
        if len(set(cols["respondent_id"])) != len(cols["respondent_id"]):
            raise ValueError("respondent_id values must be unique")
        ages = cols["age_years"]
        if ages.size and ages.min() < MIN_AGE:
            raise ValueError(f"ages below {MIN_AGE} present")
        woman = CATEGORIES["gender"].index("woman")
        elig = (cols["gender"] == woman) & (ages <= BIRTHS_MAX_AGE)
        if np.any(cols["births_observed"] & ~elig):
            raise ValueError("births observed for ineligible respondents")
        b = cols["births_10yr"][cols["births_observed"]]
        if b.size and (b.min() < 0 or b.max() > BIRTHS_TOP_CODE):
            raise ValueError(f"births outside 0..{BIRTHS_TOP_CODE}")
        return cls(_Store(cols, tuple(frames)), provenance=provenance)

    # basic protocol -----------------------------------------------------

    def __len__(self) -> int:
        return len(self._rows)

    def __iter__(self) -> Iterator[RespondentRecord]:
        for pos in range(len(self)):
            yield self.record(pos)

    def __repr__(self) -> str:
        return f"SurveyDataset(n={len(self)})"

    @property
    def rows(self) -> np.ndarray:
        """Positions of this view's records in the shared column storage."""
        return self._rows

    @property
    def frames(self) -> tuple[FrameKind, ...]:
        return self._store.frames

    def shares_storage_with(self, other: "SurveyDataset") -> bool:
        return self._store is other._store

    def record(self, pos: int) -> RespondentRecord:
        r = self._rows[pos]
        c = self._store.columns
        state = int(c["state"][r])
        values = {name: cats[c[name][r]] for name, cats in CATEGORIES.items()}
        return RespondentRecord(
            respondent_id=c["respondent_id"][r],
            frame=self._store.frames[c["frame"][r]],
            state=STATES[state] if state >= 0 else None,
            age_years=int(c["age_years"][r]),
            births_10yr=int(c["births_10yr"][r]) if c["births_observed"][r] else None,
            **values,
        )

    # column access ------------------------------------------------------

    def codes(self, name: str) -> np.ndarray:
        """Integer category codes of a categorical field (index into CATEGORIES)."""
        if name not in CATEGORIES:
            raise KeyError(f"{name!r} is not a categorical field")
        return self._store.columns[name][self._rows]

    def column(self, name: str) -> np.ndarray:
        """Values of ``name`` for this view as a new array.

        Categorical fields come back as label strings (object dtype);
        ``births_10yr`` uses ``None`` where unobserved.
        """
        c = self._store.columns
        if name in CATEGORIES:
            cats = np.array(CATEGORIES[name], dtype=object)
            return cats[c[name][self._rows]]
        if name == "respondent_id":
            return c["respondent_id"][self._rows]
        if name == "age_years":
            return c["age_years"][self._rows].astype(int)
        if name == "state":
            lab = np.array(STATES + (None,), dtype=object)
            return lab[c["state"][self._rows]]
        if name == "births_10yr":
            out = c["births_10yr"][self._rows].astype(object)
            out[~c["births_observed"][self._rows]] = None
            return out
        if name == "frame" or name == "source_label":
            lab = np.array([f.source_label for f in self._store.frames], dtype=object)
            return lab[c["frame"][self._rows]]
        if name == "category":
            lab = np.array([f.category for f in self._store.frames], dtype=object)
            return lab[c["frame"][self._rows]]
        raise KeyError(name)

    @property
    def respondent_ids(self) -> np.ndarray:
        return self.column("respondent_id")

    def age(self) -> np.ndarray:
        return self._store.columns["age_years"][self._rows]

    def state_codes(self) -> np.ndarray:
        """State index into :data:`STATES`, -1 where unknown."""
        return self._store.columns["state"][self._rows]

    def births(self) -> tuple[np.ndarray, np.ndarray]:
        """(births counts, observed mask)."""
        c = self._store.columns
        return c["births_10yr"][self._rows], c["births_observed"][self._rows]

    def frame_codes(self) -> np.ndarray:
        return self._store.columns["frame"][self._rows]

    def frame_category_codes(self) -> np.ndarray:
        return self._store.frame_category[self.frame_codes()]

    def national_pool_mask(self) -> np.ndarray:
        return self._store.frame_national[self.frame_codes()]

    # views --------------------------------------------------------------

    def view(self, rows: np.ndarray) -> "SurveyDataset":
        """A view over storage rows ``rows`` (as returned by :attr:`rows`)."""
        return SurveyDataset(self._store, rows, self.provenance)

    def take(self, positions: np.ndarray) -> "SurveyDataset":
        """A view over this dataset's records at ``positions``."""
        return self.view(self._rows[np.asarray(positions, dtype=np.intp)])

    def mask(self, keep: np.ndarray) -> "SurveyDataset":
        keep = np.asarray(keep, dtype=bool)
        if keep.shape != self._rows.shape:
            raise ValueError("mask length does not match dataset")
        return self.view(self._rows[keep])

    def filter(self, spec: "FilterSpec") -> "SurveyDataset":
        return self.mask(spec.mask(self))


def filter_records(dataset: SurveyDataset, spec: "FilterSpec") -> SurveyDataset:
    """Records of ``dataset`` matching ``spec``, in original order."""
    return dataset.filter(spec)


# -- filtering ---------------------------------------------------------------

_FILTERABLE = set(CATEGORIES) | {"state", "category", "source_label"}


@dataclass(frozen=True)
class FilterSpec:
    """Conjunction of field/value tests.

    ``values`` pairs a field name with the set of accepted values; the
    pseudo-fields ``category`` and ``source_label`` test the record's frame.
    ``predicates`` are extra callables mapping a dataset to a boolean mask
    (the likely-voter screen is one).
    """

    values: tuple[tuple[str, frozenset], ...] = ()
    national_pool: bool | None = None
    birth_eligible: bool | None = None
    predicates: tuple[Callable[[SurveyDataset], np.ndarray], ...] = ()

    @classmethod
    def where(cls, *, national_pool=None, birth_eligible=None, predicates=(),
              **tests) -> "FilterSpec":
        vals = []
        for name, accepted in sorted(tests.items()):
            if name not in _FILTERABLE:
                raise ValueError(f"cannot filter on {name!r}")
            if isinstance(accepted, (str, type(None))):
                accepted = [accepted]
            vals.append((name, frozenset(accepted)))
        return cls(tuple(vals), national_pool, birth_eligible, tuple(predicates))

    @classmethod
    def from_mapping(cls, spec: Mapping[str, Any] | None) -> "FilterSpec":
        """Build from a config mapping; ``likely_voter: true`` adds the screen."""
        spec = dict(spec or {})
        preds = []
        if spec.pop("likely_voter", False):
            from .estimators import LikelyVoterRule

            preds.append(LikelyVoterRule())
        return cls.where(
            national_pool=spec.pop("national_pool", None),
            birth_eligible=spec.pop("birth_eligible", None),
            predicates=preds,
            **spec,
        )

    def __and__(self, other: "FilterSpec") -> "FilterSpec":
        merged = dict(self.values)
        for name, accepted in other.values:
            merged[name] = merged[name] & accepted if name in merged else accepted

        def pick(a, b, what):
            if a is not None and b is not None and a != b:
                return "conflict"
            return a if a is not None else b

        nat = pick(self.national_pool, other.national_pool, "national_pool")
        elig = pick(self.birth_eligible, other.birth_eligible, "birth_eligible")
        preds = self.predicates + other.predicates
        if nat == "conflict" or elig == "conflict":
            preds = preds + (_nothing,)
            nat = None if nat == "conflict" else nat
            elig = None if elig == "conflict" else elig
        return FilterSpec(tuple(sorted(merged.items())), nat, elig, preds)

    def mask(self, ds: SurveyDataset) -> np.ndarray:
        keep = np.ones(len(ds), dtype=bool)
        for name, accepted in self.values:
            if name in CATEGORIES:
                cats = CATEGORIES[name]
                bad = accepted - set(cats)
                if bad:
                    raise ValueError(f"unknown {name} value(s) {sorted(bad)}")
                keep &= np.isin(ds.codes(name), [cats.index(a) for a in accepted])
            elif name == "state":
                codes = [STATES.index(s) if s is not None else -1 for s in accepted]
                keep &= np.isin(ds.state_codes(), codes)
            elif name == "category":
                keep &= np.isin(ds.frame_category_codes(),
                                [FRAME_CATEGORIES.index(a) for a in accepted])
            elif name == "source_label":
                labels = [i for i, f in enumerate(ds.frames) if f.source_label in accepted]
                keep &= np.isin(ds.frame_codes(), labels)
        if self.national_pool is not None:
            keep &= ds.national_pool_mask() == self.national_pool
        if self.birth_eligible is not None:
            keep &= birth_eligible_mask(ds) == self.birth_eligible
        for pred in self.predicates:
            keep &= np.asarray(pred(ds), dtype=bool)
        return keep


def _nothing(ds):
    return np.zeros(len(ds), dtype=bool)


def birth_eligible_mask(ds: SurveyDataset) -> np.ndarray:
    woman = CATEGORIES["gender"].index("woman")
    return (ds.codes("gender") == woman) & (ds.age() <= BIRTHS_MAX_AGE)


def composition_summary(dataset: SurveyDataset,
                        states: Sequence[str] = OVERSAMPLE_STATES) -> list[tuple[str, str, int]]:
    """Counts by (source_label, state group).

    Records outside ``states`` (or with unknown state) fall in the ``"other"``
    group, so counts partition the dataset.
    """
    labels = dataset.column("source_label")
    st = dataset.column("state")
    groups = [s if s in states else "other" for s in st]
    counts = Counter(zip(labels, groups))
    order = {s: i for i, s in enumerate(list(states) + ["other"])}
    frame_order = {f.source_label: i for i, f in enumerate(dataset.frames)}
    return [
        (lab, grp, n)
        for (lab, grp), n in sorted(counts.items(),
                                    key=lambda kv: (frame_order[kv[0][0]], order[kv[0][1]]))
    ]


def source_totals(summary: Iterable[tuple[str, str, int]]) -> dict[str, int]:
    out: dict[str, int] = {}
    for lab, _, n in summary:
        out[lab] = out.get(lab, 0) + n
    return out


# -- ingestion ---------------------------------------------------------------


@dataclass
class SchemaConfig:
    """Column mapping and category codes for one delimited file layout.

    ``columns`` maps record field -> file column.  ``codes`` maps record
    field -> {raw code: canonical value}; fields without a code map must
    already contain canonical values.  Raw values in ``missing_codes`` map to
    the field's missing state.
    """

    columns: dict[str, str]
    codes: dict[str, dict[str, Any]] = field(default_factory=dict)
    missing_codes: tuple[str, ...] = ("", "NA", MISSING)
    delimiter: str | None = None
    frames: dict[str, FrameKind] = field(default_factory=lambda: dict(DEFAULT_FRAMES))

    @classmethod
    def from_mapping(cls, cfg: Mapping[str, Any]) -> "SchemaConfig":
        if "columns" not in cfg or not isinstance(cfg["columns"], Mapping):
            raise ConfigError("schema config needs a 'columns' mapping")
        columns = {str(k): str(v) for k, v in cfg["columns"].items()}
        unknown = set(columns) - set(FIELDS)
        if unknown:
            raise ConfigError(f"schema maps unknown field(s): {sorted(unknown)}")
        missing_req = [f for f in REQUIRED_FIELDS if f not in columns]
        if missing_req:
            raise ConfigError(f"schema must map required field(s): {missing_req}")
        codes = {}
        for fld, table in (cfg.get("codes") or {}).items():
            if fld not in FIELDS:
                raise ConfigError(f"codes given for unknown field {fld!r}")
            codes[fld] = {str(k): v for k, v in table.items()}
            if fld in CATEGORIES:
                bad = {v for v in codes[fld].values() if v not in CATEGORIES[fld]}
                if bad:
                    raise ConfigError(f"codes for {fld!r} map to unknown values {sorted(bad)}")
        frames = dict(DEFAULT_FRAMES)
        for label, fk in (cfg.get("frames") or {}).items():
            if isinstance(fk, str):
                fk = {"category": fk}
            try:
                frames[label] = FrameKind(label, **fk)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad frame definition for {label!r}: {exc}") from exc
        if "frame" in codes:
            bad = {v for v in codes["frame"].values() if v not in frames}
            if bad:
                raise ConfigError(f"frame codes map to undeclared frames {sorted(bad)}")
        missing = cfg.get("missing_codes", cls.missing_codes)
        return cls(columns, codes, tuple(str(m) for m in missing),
                   cfg.get("delimiter"), frames)


def canonical_schema(frames: Iterable[FrameKind] = ()) -> SchemaConfig:
    """Schema for files written by :func:`write_survey`."""
    schema = SchemaConfig(columns={f: f for f in FIELDS})
    schema.frames.update({f.source_label: f for f in frames})
    return schema


def _as_schema(schema) -> SchemaConfig:
    if isinstance(schema, SchemaConfig):
        return schema
    if schema is None:
        return canonical_schema()
    if isinstance(schema, (str, os.PathLike)):
        from .config import read_tree

        return SchemaConfig.from_mapping(read_tree(schema))
    return SchemaConfig.from_mapping(schema)


@dataclass
class IngestReport:
    path: str
    n_rows: int
    errors: list[RowError]
    dataset: SurveyDataset | None

    @property
    def ok(self) -> bool:
        return not self.errors


def _sniff_delimiter(path: Path, header: str, declared: str | None) -> str:
    if declared:
        return "\t" if declared in ("tab", "\\t") else declared
    if path.suffix.lower() in (".tsv", ".tab"):
        return "\t"
    return "\t" if header.count("\t") > header.count(",") else ","


def validate_survey(path, schema_config=None) -> IngestReport:
    """Parse ``path`` collecting every row-level problem instead of stopping."""
    schema = _as_schema(schema_config)
    path = Path(path)
    raw = path.read_bytes()
    digest = hashlib.sha256(raw).hexdigest()
    text = raw.decode("utf-8-sig")
    first = text.split("\n", 1)[0]
    reader = csv.reader(io.StringIO(text, newline=""),
                        delimiter=_sniff_delimiter(path, first, schema.delimiter))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise EmptyDataset("file is empty (no header row)") from None
    col_idx = {}
    for fld, col in schema.columns.items():
        if col not in header:
            raise MissingColumn(col, fld)
        col_idx[fld] = header.index(col)

    rows = [r for r in reader if any(cell.strip() for cell in r)]
    if not rows:
        raise EmptyDataset()

    records: list[RespondentRecord] = []
    errors: list[RowError] = []
    seen: set[str] = set()
    for i, row in enumerate(rows):
        try:
            rec = _parse_row(i, row, col_idx, schema)
        except RowError as exc:
            errors.append(exc)
            continue
        if rec.respondent_id in seen:
            errors.append(DuplicateRespondent(i, "respondent_id", rec.respondent_id,
                                              "duplicate respondent_id"))
            continue
        seen.add(rec.respondent_id)
        records.append(rec)
    prov = Provenance(str(path), digest, len(rows))
    ds = None if errors else SurveyDataset.from_records(records, provenance=prov)
    return IngestReport(str(path), len(rows), errors, ds)


def load_survey(path, schema_config=None) -> SurveyDataset:
    """Load a delimited survey file.

    Raises the first row-level error found (``MissingColumn``,
    ``BadCategoryCode``, ``InvariantViolation``...) and ``EmptyDataset`` for a
    header-only file.  Use :func:`validate_survey` to collect all problems.
    """
    report = validate_survey(path, schema_config)
    if report.errors:
        err = report.errors[0]
        err.all_errors = report.errors
        raise err
    return report.dataset


def _parse_row(i: int, row: list[str], col_idx: dict[str, int],
               schema: SchemaConfig) -> RespondentRecord:
    def raw(fld):
        if fld not in col_idx:
            return None
        j = col_idx[fld]
        return row[j].strip() if j < len(row) else ""

    def mapped(fld, value):
        table = schema.codes.get(fld)
        if table is not None and value in table:
            return table[value]
        return value

    def categorical(fld):
        value = raw(fld)
        if value is None or value in schema.missing_codes:
            return MISSING
        out = mapped(fld, value)
        if out not in CATEGORIES[fld]:
            allowed = schema.codes.get(fld) or CATEGORIES[fld]
            raise BadCategoryCode(i, fld, value, allowed)
        return out

    rid = raw("respondent_id")
    if not rid:
        raise InvariantViolation(i, "respondent_id", rid, "empty respondent_id")

    frame_raw = raw("frame")
    label = mapped("frame", frame_raw)
    if label not in schema.frames:
        raise BadCategoryCode(i, "frame", frame_raw, schema.codes.get("frame") or schema.frames)
    frame = schema.frames[label]

    age_raw = mapped("age_years", raw("age_years"))
    try:
        age = int(str(age_raw))
    except ValueError:
        raise InvariantViolation(i, "age_years", age_raw, "not an integer") from None

    state = None
    state_raw = raw("state")
    if state_raw is not None and state_raw not in schema.missing_codes:
        state = str(mapped("state", state_raw)).upper()
        if state not in STATE_REGION:
            raise BadCategoryCode(i, "state", state_raw, STATES)

    births = None
    births_raw = raw("births_10yr")
    if births_raw is not None and births_raw not in schema.missing_codes:
        b = mapped("births_10yr", births_raw)
        if b is not None and str(b) not in schema.missing_codes:
            try:
                births = int(str(b))
            except ValueError:
                raise BadCategoryCode(i, "births_10yr", births_raw) from None
            if births < 0:
                raise InvariantViolation(i, "births_10yr", births_raw, "negative count")
            births = min(births, BIRTHS_TOP_CODE)

    values = {fld: categorical(fld) for fld in CATEGORIES if fld != "mode"}
    mode = categorical("mode") if "mode" in col_idx else frame.default_mode
    if mode == MISSING:
        mode = frame.default_mode
    if values["region"] == MISSING and state is not None:
        values["region"] = STATE_REGION[state]

    problem = _record_problem(age, values["gender"], births, state)
    if problem:
        fld, msg = problem
        bad = {"age_years": age, "births_10yr": births, "state": state}[fld]
        raise InvariantViolation(i, fld, bad, msg)
    return RespondentRecord(respondent_id=rid, frame=frame, mode=mode, state=state,
                            age_years=age, births_10yr=births, **values)


def write_survey(dataset: SurveyDataset, path, delimiter: str = ",") -> None:
    """Write ``dataset`` in the canonical layout read by :func:`canonical_schema`."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(FIELDS)
        for rec in dataset:
            w.writerow([_serialize(rec, f) for f in FIELDS])


def _serialize(rec: RespondentRecord, fld: str) -> str:
    if fld == "frame":
        return rec.frame.source_label
    value = getattr(rec, fld)
    return "" if value is None else str(value)
