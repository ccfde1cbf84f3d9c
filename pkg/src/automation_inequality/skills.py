"""Weighted two-skill correlations from worker-level survey records."""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import LoadError, ParameterError, UndefinedCorrelationError

MISSING_TOKENS = frozenset({"", "na", "n/a", "nan", "."})
DEFAULT_MIN_SIZE = 10
QUANTILES = (0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0)
GROUP_CSV_COLUMNS = ("group", "n", "n_eff", "corr", "flag")
KEY_SEPARATOR = "|"


@dataclass(frozen=True)
class SkillRecord:
    id: str
    skill_a: float
    skill_b: float
    groups: dict = field(default_factory=dict, hash=False)
    weight: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.skill_a) and math.isfinite(self.skill_b)):
            raise ParameterError(f"record {self.id}: skills must be finite")
        if not (self.weight > 0 and math.isfinite(self.weight)):
            raise ParameterError(f"record {self.id}: weight must be positive, got {self.weight}")


@dataclass(frozen=True)
class Schema:
    """Column names in the input file. ``weight`` is optional in the file."""

    id: str = "id"
    skill_a: str = "skill_a"
    skill_b: str = "skill_b"
    weight: str | None = "weight"
    groups: tuple[str, ...] = ()


@dataclass
class LoadResult:
    records: list[SkillRecord]
    dropped: dict[str, int]
    weighted: bool  # False when the file has no weight column

    def __len__(self) -> int:
        return len(self.records)


def _is_missing(cell: str | None) -> bool:
    return cell is None or cell.strip().lower() in MISSING_TOKENS


def _number(cell: str, column: str, line: int) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise LoadError(f"line {line}: column {column!r} is not numeric: {cell!r}") from None
    if not math.isfinite(value):
        raise LoadError(f"line {line}: column {column!r} is not finite: {cell!r}")
    return value


def read_records(handle, schema: Schema = Schema(), delimiter: str = ",") -> LoadResult:
    """Parse records from an open text stream; see :func:`load_records`."""
    reader = csv.DictReader(handle, delimiter=delimiter)
    header = reader.fieldnames or []
    required = [schema.skill_a, schema.skill_b, *schema.groups]
    missing_cols = [c for c in required if c not in header]
    if missing_cols:
        raise LoadError(f"missing column(s) {missing_cols}; file has {header}")
    has_id = schema.id in header
    weighted = schema.weight is not None and schema.weight in header
    # reasons are tallied against the first missing field in this order
    checks = [("missing skill_a", schema.skill_a), ("missing skill_b", schema.skill_b)]
    checks += [(f"missing group {g}", g) for g in schema.groups]
    if weighted:
        checks.append(("missing weight", schema.weight))

    records, dropped = [], Counter()
    for row in reader:
        line = reader.line_num
        reason = next((r for r, col in checks if _is_missing(row.get(col))), None)
        if reason:
            dropped[reason] += 1
            continue
        a = _number(row[schema.skill_a], schema.skill_a, line)
        b = _number(row[schema.skill_b], schema.skill_b, line)
        w = _number(row[schema.weight], schema.weight, line) if weighted else 1.0
        if not w > 0:
            raise LoadError(f"line {line}: weight must be positive, got {w}")
        rid = row[schema.id] if has_id else str(line)
        records.append(SkillRecord(rid, a, b, {g: row[g].strip() for g in schema.groups}, w))
    return LoadResult(records, dict(sorted(dropped.items())), weighted)


def load_records(path, schema: Schema = Schema(), delimiter: str = ",") -> LoadResult:
    """Read a delimited file into records.

    Rows with a missing skill, group or weight cell (empty, ``NA``, ``N/A``,
    ``NaN`` or ``.``) are dropped and counted per reason. A non-numeric or
    non-positive-weight cell is an error naming the file line. If the file has
    no weight column every weight is 1.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return read_records(fh, schema, delimiter)
    except OSError as exc:
        raise LoadError(f"cannot read {path}: {exc}") from exc


def weighted_corr(x, y, w=None) -> float:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    w = np.ones_like(x) if w is None else np.asarray(w, dtype=float)
    if len(x) < 2:
        raise UndefinedCorrelationError(f"need at least 2 records, got {len(x)}")
    total = w.sum()
    dx = x - (w @ x) / total
    dy = y - (w @ y) / total
    vx, vy = w @ (dx * dx), w @ (dy * dy)
    if vx <= 0 or vy <= 0:
        raise UndefinedCorrelationError("zero weighted variance in a skill")
    r = float((w @ (dx * dy)) / math.sqrt(vx * vy))
    return min(1.0, max(-1.0, r))


def weighted_pearson(records: Sequence[SkillRecord], use_weights: bool = True) -> float:
    """Weighted Pearson correlation of ``skill_a`` and ``skill_b``.

    Means, variances and covariance are all normalized by the total weight,
    so the normalization cancels and only relative weights matter.
    """
    x = [r.skill_a for r in records]
    y = [r.skill_b for r in records]
    w = [r.weight for r in records] if use_weights else None
    return weighted_corr(x, y, w)


def effective_size(weights) -> float:
    """Kish effective sample size ``(sum w)**2 / sum w**2``."""
    w = np.asarray(weights, dtype=float)
    return float(w.sum() ** 2 / (w @ w))


@dataclass(frozen=True)
class GroupCorrelation:
    key: str
    n: int
    n_eff: float
    corr: float | None
    flag: str  # "ok", "insufficient" (n < min_size) or "undefined" (zero variance)

    @property
    def insufficient(self) -> bool:
        return self.flag == "insufficient"


@dataclass
class GroupedResult:
    labels: tuple[str, ...]
    min_size: int
    use_weights: bool
    groups: list[GroupCorrelation]
    overall: float | None
    summary: dict

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(GROUP_CSV_COLUMNS)
        for g in self.groups:
            corr = "" if g.corr is None else repr(g.corr)
            writer.writerow([g.key, g.n, repr(g.n_eff), corr, g.flag])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "labels": list(self.labels),
            "min_size": self.min_size,
            "use_weights": self.use_weights,
            "overall_corr": self.overall,
            "summary": self.summary,
            "groups": [
                {"group": g.key, "n": g.n, "n_eff": g.n_eff, "corr": g.corr, "flag": g.flag}
                for g in self.groups
            ],
        }
        return json.dumps(doc, indent=1, allow_nan=False)


def _summary(values: list[float]) -> dict:
    if not values:
        return {"count": 0, "mean": None, "quantiles": {}}
    arr = np.asarray(values)
    qs = np.quantile(arr, QUANTILES)
    return {
        "count": len(values),
        "mean": float(arr.mean()),
        "quantiles": {f"{q:g}": float(v) for q, v in zip(QUANTILES, qs)},
    }


def grouped_correlations(
    records: Sequence[SkillRecord],
    labels: Sequence[str],
    min_size: int = DEFAULT_MIN_SIZE,
    use_weights: bool = True,
) -> GroupedResult:
    """Per-group weighted correlations, keyed by the values of ``labels``.

    Groups are sorted by key. A group with fewer than ``min_size`` records is
    flagged and gets no correlation. The summary holds quantiles of the
    defined group correlations.
    """
    if int(min_size) != min_size or min_size < 2:
        raise ParameterError(f"min_size must be an integer >= 2, got {min_size}")
    labels = tuple(labels)
    if not labels:
        raise ParameterError("at least one group label is required")
    buckets: dict[tuple, list[SkillRecord]] = {}
    for r in records:
        try:
            key = tuple(r.groups[lab] for lab in labels)
        except KeyError as exc:
            raise ParameterError(f"record {r.id} has no group label {exc.args[0]!r}") from None
        buckets.setdefault(key, []).append(r)

    out = []
    for key in sorted(buckets):
        members = buckets[key]
        weights = [m.weight for m in members] if use_weights else [1.0] * len(members)
        corr, flag = None, "ok"
        if len(members) < min_size:
            flag = "insufficient"
        else:
            try:
                corr = weighted_pearson(members, use_weights)
            except UndefinedCorrelationError:
                flag = "undefined"
        out.append(GroupCorrelation(KEY_SEPARATOR.join(key), len(members), effective_size(weights), corr, flag))

    try:
        overall = weighted_pearson(records, use_weights)
    except UndefinedCorrelationError:
        overall = None
    defined = [g.corr for g in out if g.corr is not None]
    return GroupedResult(labels, int(min_size), use_weights, out, overall, _summary(defined))


def parse_group_csv(text: str) -> list[dict]:
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        rows.append(
            {
                "group": rec["group"],
                "n": int(rec["n"]),
                "n_eff": float(rec["n_eff"]),
                "corr": None if rec["corr"] == "" else float(rec["corr"]),
                "flag": rec["flag"],
            }
        )
    return rows
