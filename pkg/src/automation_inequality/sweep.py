"""Inequality along one capability axis, or over a grid of both capabilities."""

from __future__ import annotations

import bisect
import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    ProductionSpec,
    ScenarioParams,
    adoption,
    effective_inputs,
    output,
    scenario_workers,
)
from .errors import ParameterError

CSV_COLUMNS = (
    "a1", "a2", "y_h", "y_l", "delta", "abs_delta", "ratio",
    "adopt_h1", "adopt_h2", "adopt_l1", "adopt_l2",
)

BOTH = "both"


@dataclass(frozen=True)
class SweepConfig:
    """Sweep settings; ``a_max`` defaults to ``2 * B * C`` so every breakpoint is covered."""

    params: ScenarioParams
    rho: float = 0.0
    task: int | str = 1
    a_min: float = 0.0
    a_max: float | None = None
    points: int = 201
    spacing: str = "linear"

    def __post_init__(self):
        if self.a_max is None:
            object.__setattr__(self, "a_max", 2.0 * self.params.b * self.params.c)
        if self.task not in (1, 2, BOTH):
            raise ParameterError(f"task must be 1, 2 or '{BOTH}', got {self.task!r}")
        if not (0.0 <= self.a_min < self.a_max) or not math.isfinite(self.a_max):
            raise ParameterError(f"need 0 <= a_min < a_max, got {self.a_min}, {self.a_max}")
        if int(self.points) != self.points or self.points < 2:
            raise ParameterError(f"points must be an integer >= 2, got {self.points}")
        if self.spacing not in ("linear", "log"):
            raise ParameterError(f"spacing must be 'linear' or 'log', got {self.spacing!r}")
        if self.spacing == "log" and self.a_min <= 0:
            raise ParameterError("log spacing needs a_min > 0")
        ProductionSpec(self.rho)

    def axis(self) -> list[float]:
        if self.spacing == "log":
            values = np.geomspace(self.a_min, self.a_max, int(self.points))
        else:
            values = np.linspace(self.a_min, self.a_max, int(self.points))
        return [float(v) for v in values]

    def to_dict(self) -> dict:
        return {
            "b": self.params.b,
            "c": self.params.c,
            "correlation": self.params.correlation.value,
            "rho": self.rho,
            "task": self.task,
            "a_min": self.a_min,
            "a_max": self.a_max,
            "points": int(self.points),
            "spacing": self.spacing,
        }


@dataclass(frozen=True)
class SweepRow:
    a1: float | None
    a2: float | None
    y_h: float
    y_l: float
    delta: float
    abs_delta: float
    ratio: float
    adopt_h1: bool
    adopt_h2: bool
    adopt_l1: bool
    adopt_l2: bool

    @property
    def adopted(self) -> bool:
        return self.adopt_h1 or self.adopt_h2 or self.adopt_l1 or self.adopt_l2


@dataclass
class SweepSeries:
    config: SweepConfig
    delta0: float
    rows: list[SweepRow] = field(default_factory=list)

    @property
    def abs_delta0(self) -> float:
        return abs(self.delta0)

    @property
    def is_grid(self) -> bool:
        return self.config.task == BOTH

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.rows:
            writer.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
        return buf.getvalue()

    def to_json(self) -> str:
        rows = []
        for r in self.rows:
            d = {c: getattr(r, c) for c in CSV_COLUMNS}
            d["abs_delta_change"] = r.abs_delta - self.abs_delta0
            rows.append(d)
        doc = {
            "config": self.config.to_dict(),
            "baseline": {"delta0": self.delta0, "abs_delta0": self.abs_delta0},
            "columns": list(CSV_COLUMNS),
            "rows": rows,
        }
        return json.dumps(doc, indent=1, allow_nan=False)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    return repr(float(value))


def parse_csv(text: str) -> list[dict]:
    """Parse sweep CSV back into typed dicts (empty ``a2`` becomes ``None``)."""
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        row = {}
        for c in CSV_COLUMNS:
            v = rec[c]
            if c.startswith("adopt_"):
                row[c] = v == "1"
            else:
                row[c] = None if v == "" else float(v)
        out.append(row)
    return out


def evaluate(spec: ProductionSpec, params: ScenarioParams, a1: float, a2: float, abs_delta0: float) -> tuple:
    """Outputs, gap, ratio and adoption flags at capabilities ``(a1, a2)``."""
    high, low = scenario_workers(params)
    cap = (a1, a2)
    y_h = output(spec, effective_inputs(high, cap))
    y_l = output(spec, effective_inputs(low, cap))
    delta = y_h - y_l
    return (y_h, y_l, delta, abs(delta), abs(delta) / abs_delta0, *adoption(high, cap), *adoption(low, cap))


def _baseline(spec: ProductionSpec, params: ScenarioParams) -> float:
    high, low = scenario_workers(params)
    return output(spec, high) - output(spec, low)


def sweep_single(config: SweepConfig) -> SweepSeries:
    if config.task == BOTH:
        raise ParameterError("sweep_single needs task 1 or 2; use sweep_multi for both")
    spec = ProductionSpec(config.rho)
    delta0 = _baseline(spec, config.params)
    series = SweepSeries(config, delta0)
    for a in config.axis():
        cap = (a, 0.0) if config.task == 1 else (0.0, a)
        values = evaluate(spec, config.params, *cap, abs(delta0))
        series.rows.append(SweepRow(a, None, *values))
    return series


def sweep_multi(config: SweepConfig) -> SweepSeries:
    """Row-major grid: ``a1`` is the slow axis, ``a2`` the fast one."""
    if config.task != BOTH:
        raise ParameterError(f"sweep_multi needs task='{BOTH}'")
    spec = ProductionSpec(config.rho)
    delta0 = _baseline(spec, config.params)
    series = SweepSeries(config, delta0)
    axis = config.axis()
    for a1 in axis:
        for a2 in axis:
            series.rows.append(SweepRow(a1, a2, *evaluate(spec, config.params, a1, a2, abs(delta0))))
    return series


@dataclass(frozen=True)
class Feature:
    """A detected extremum or zero crossing.

    ``[lo, hi]`` is the grid interval holding it and ``at`` the location
    refined on the model itself (``None`` for plateaus).
    """

    kind: str  # "min", "max" or "zero-crossing"
    lo: float
    hi: float
    at: float | None = None


def _sign_changes(values: list[float]) -> list[tuple[int, int, int, int]]:
    """``(j, i, s_before, s_after)`` for consecutive nonzero entries with opposite signs."""
    out = []
    last = None
    for i, v in enumerate(values):
        if v == 0:
            continue
        s = 1 if v > 0 else -1
        if last is not None and s != last[1]:
            out.append((last[0], i, last[1], s))
        last = (i, s)
    return out


_GOLDEN = (math.sqrt(5) - 1) / 2


def _golden_section(f, lo: float, hi: float, maximize: bool, iters: int = 200) -> float:
    sign = -1.0 if maximize else 1.0
    a, b = lo, hi
    c, d = b - _GOLDEN * (b - a), a + _GOLDEN * (b - a)
    fc, fd = sign * f(c), sign * f(d)
    for _ in range(iters):
        if b - a <= 4 * math.ulp(max(abs(a), abs(b))):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = sign * f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = sign * f(d)
    return 0.5 * (a + b)


def _bisect_root(f, lo: float, hi: float, iters: int = 200) -> float:
    f_lo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        f_mid = f(mid)
        if f_mid == 0:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _delta_fn(config: SweepConfig):
    spec = ProductionSpec(config.rho)
    high, low = scenario_workers(config.params)

    def delta(a: float) -> float:
        cap = (a, 0.0) if config.task == 1 else (0.0, a)
        return output(spec, effective_inputs(high, cap)) - output(spec, effective_inputs(low, cap))

    return delta


def _interval(xs: list[float], x: float) -> tuple[float, float]:
    j = min(max(bisect.bisect_right(xs, x) - 1, 0), len(xs) - 2)
    return xs[j], xs[j + 1]


def detect_extrema(series: SweepSeries) -> list[Feature]:
    """Interior minima/maxima of |Delta| and zero crossings of Delta.

    Candidates come from sign changes of first differences on the grid. A
    single extreme grid point ``k`` brackets the true extremum in
    ``[x[k-1], x[k+1]]``; the model is then searched inside that bracket
    (golden section, or bisection for crossings) and the feature is reported
    as the grid interval containing the refined location. Plateaus are
    reported whole.
    """
    if series.is_grid:
        raise ParameterError("extremum detection needs a 1-D sweep")
    if len(series.rows) < 3:
        raise ParameterError("extremum detection needs at least 3 points")
    xs = series.column("a1")
    ys = series.column("abs_delta")
    delta = _delta_fn(series.config)
    features = []
    diffs = [b - a for a, b in zip(ys[:-1], ys[1:])]
    for j, i, before, _ in _sign_changes(diffs):
        kind = "min" if before < 0 else "max"
        first, last = j + 1, i  # grid points holding the extreme value
        if first == last:
            at = _golden_section(lambda a: abs(delta(a)), xs[first - 1], xs[first + 1], kind == "max")
            features.append(Feature(kind, *_interval(xs, at), at))
        else:
            features.append(Feature(kind, xs[first], xs[last]))
    deltas = series.column("delta")
    for j, i, _, _ in _sign_changes(deltas):
        if i == j + 1:
            at = _bisect_root(delta, xs[j], xs[i])
            features.append(Feature("zero-crossing", *_interval(xs, at), at))
        else:  # exact zeros on the grid between the sign change
            features.append(Feature("zero-crossing", xs[j + 1], xs[i - 1]))
    return sorted(features, key=lambda f: (f.lo, f.kind))
