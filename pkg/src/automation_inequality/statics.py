"""Comparative statics of absolute inequality |Delta| via central differences.

|Delta| is piecewise smooth in the capability A: it has kinks wherever one of
the two worker types starts adopting (A equal to that worker's own skill on
the automated task) and, in the negative-correlation scenario with task 1
automated, where Delta itself crosses zero at ``a_star``. Every estimate here
refuses a stencil that straddles one of those points.

Signs are reported as ``"+"``, ``"-"``, ``"0"`` or ``"?"`` (non-finite
estimate). An estimate counts as zero when its normalized magnitude is at
most ``zero_tol`` or when it is below the rounding floor of the stencil.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import (
    COBB_DOUGLAS_EPS,
    Correlation,
    ProductionSpec,
    ScenarioParams,
    scenario_workers,
    worker_outputs,
)
from .errors import DomainError, ParameterError, StencilError

POS, NEG, ZERO, INDETERMINATE = "+", "-", "0", "?"

#: Table columns: dA, dA^2, dA d(B/C), dA d(rho).
COLUMNS = ("d_a", "d_aa", "d_a_bc", "d_a_rho")

_EPS = np.finfo(float).eps
# multiple of eps * |values| * sum|weights| treated as pure rounding
_ROUNDING_FACTOR = 4.0


@dataclass(frozen=True)
class Conditional:
    """Sign that depends on A: ``below`` for A < split, ``above`` otherwise."""

    split: str
    below: str
    above: str


@dataclass(frozen=True)
class TableRow:
    correlation: Correlation
    task: int
    lower: str
    upper: str | None  # None: unbounded
    signs: tuple  # one entry per COLUMNS, str or Conditional


# Absolute-inequality sign table for general CES production.
SIGN_TABLE: tuple[TableRow, ...] = (
    TableRow(Correlation.NEGATIVE, 1, "1", "A*", (NEG, POS, ZERO, POS)),
    TableRow(Correlation.NEGATIVE, 1, "A*", None, (POS, NEG, ZERO, NEG)),
    TableRow(Correlation.NEGATIVE, 2, "1", None, (POS, NEG, ZERO, NEG)),
    TableRow(Correlation.POSITIVE, 1, "1", "B", (NEG, POS, ZERO, Conditional("C", POS, NEG))),
    TableRow(Correlation.POSITIVE, 1, "B", None, (POS, NEG, POS, NEG)),
    TableRow(Correlation.POSITIVE, 2, "C", "BC", (NEG, POS, ZERO, NEG)),
    TableRow(Correlation.POSITIVE, 2, "BC", None, (POS, NEG, POS, NEG)),
)


def table_to_json(table: Sequence[TableRow]) -> list[dict]:
    rows = []
    for row in table:
        signs = [asdict(s) if isinstance(s, Conditional) else s for s in row.signs]
        rows.append(
            {
                "correlation": row.correlation.value,
                "task": row.task,
                "lower": row.lower,
                "upper": row.upper,
                "signs": signs,
            }
        )
    return rows


def table_from_json(rows: Iterable[dict]) -> tuple[TableRow, ...]:
    valid = {POS, NEG, ZERO}
    out = []
    for row in rows:
        signs = []
        for s in row["signs"]:
            if isinstance(s, dict):
                s = Conditional(s["split"], s["below"], s["above"])
                bad = {s.below, s.above} - valid
            else:
                bad = {s} - valid
            if bad:
                raise ParameterError(f"invalid sign entry {bad} in table row {row}")
            signs.append(s)
        if len(signs) != len(COLUMNS):
            raise ParameterError(f"table row needs {len(COLUMNS)} signs: {row}")
        out.append(TableRow(Correlation(row["correlation"]), int(row["task"]), row["lower"], row.get("upper"), tuple(signs)))
    return tuple(out)


def a_star(params: ScenarioParams, rho: float) -> float:
    """Task-1 capability at which Delta crosses zero when skills are negatively correlated.

    ``(B**rho + 1 - C**rho) ** (1/rho)``, with limit ``B/C`` as rho -> 0.
    """
    ProductionSpec(rho)  # range check
    b, c = params.b, params.c
    if abs(rho) < COBB_DOUGLAS_EPS:
        return b / c
    # base - 1 = B**rho - C**rho, kept exact near rho = 0
    s = math.expm1(rho * math.log(b)) - math.expm1(rho * math.log(c))
    if not s > -1:
        raise DomainError(f"B**rho + 1 - C**rho <= 0 for B={b}, C={c}, rho={rho}")
    return math.exp(math.log1p(s) / rho)


def breakpoints(params: ScenarioParams, rho: float) -> dict[str, float]:
    b, c = params.b, params.c
    return {"1": 1.0, "C": c, "B": b, "BC": b * c, "A*": a_star(params, rho)}


def kinks(params: ScenarioParams, task: int, rho: float) -> list[float]:
    """Capabilities at which |Delta| is not differentiable in A_task."""
    if task not in (1, 2):
        raise ParameterError(f"task must be 1 or 2, got {task}")
    high, low = scenario_workers(params)
    pts = {high[task - 1], low[task - 1]}
    if params.correlation is Correlation.NEGATIVE and task == 1:
        pts.add(a_star(params, rho))
    return sorted(pts)


@dataclass(frozen=True)
class Regime:
    correlation: Correlation
    task: int
    lower_symbol: str
    upper_symbol: str | None
    lower: float
    upper: float
    expected_signs: tuple
    splits: tuple[float, ...] = ()  # A values where a Conditional entry changes

    def expected(self, column: str, a: float, points: dict[str, float]) -> str:
        s = self.expected_signs[COLUMNS.index(column)]
        if isinstance(s, Conditional):
            return s.below if a < points[s.split] else s.above
        return s

    @property
    def label(self) -> str:
        upper = self.upper_symbol or "inf"
        return f"{self.correlation.value}/A{self.task}/({self.lower_symbol},{upper})"


def regimes(
    params: ScenarioParams, task: int, rho: float, table: Sequence[TableRow] = SIGN_TABLE
) -> list[Regime]:
    points = breakpoints(params, rho)
    out = []
    for row in table:
        if row.correlation is not params.correlation or row.task != task:
            continue
        lower = points[row.lower]
        upper = math.inf if row.upper is None else points[row.upper]
        if not lower < upper:
            raise ParameterError(f"regime endpoints out of order: {row.lower}={lower}, {row.upper}={upper}")
        splits = tuple(
            sorted(points[s.split] for s in row.signs if isinstance(s, Conditional) and lower < points[s.split] < upper)
        )
        out.append(Regime(params.correlation, task, row.lower, row.upper, lower, upper, row.signs, splits))
    return out


# -- finite differences --------------------------------------------------------


def _classify(raw: float, normalized: float, rounding: float, zero_tol: float) -> str:
    if not math.isfinite(raw):
        return INDETERMINATE
    if abs(normalized) <= zero_tol or abs(raw) <= rounding:
        return ZERO
    return POS if raw > 0 else NEG


def _check_stencil(x: float, half_width: float, blocked: Iterable[float]) -> None:
    for k in blocked:
        if x - half_width <= k <= x + half_width:
            raise StencilError(f"stencil [{x - half_width}, {x + half_width}] contains breakpoint {k}; shrink the step")


def fd_estimate(f: Callable[[float], float], x: float, order: int, step: float) -> tuple[float, float]:
    """Central difference of the given order; returns ``(estimate, rounding floor)``.

    The rounding floor uses the magnitude of the sampled values; callers that
    difference a difference of larger quantities should supply their own.
    """
    if order == 1:
        vals = (f(x - step), f(x + step))
        raw = (vals[1] - vals[0]) / (2 * step)
        weight = 1.0 / step
    elif order == 2:
        vals = (f(x - step), f(x), f(x + step))
        raw = (vals[0] - 2 * vals[1] + vals[2]) / step**2
        weight = 4.0 / step**2
    else:
        raise ParameterError(f"order must be 1 or 2, got {order}")
    return raw, _ROUNDING_FACTOR * _EPS * max(abs(v) for v in vals) * weight


def fd_sign(
    f: Callable[[float], float],
    x: float,
    order: int,
    step: float,
    zero_tol: float = 1e-7,
    breakpoints: Iterable[float] = (),
    scale: float | None = None,
) -> str:
    """Sign of the first or second derivative of ``f`` at ``x``.

    ``breakpoints`` are points where ``f`` is not smooth; a stencil that
    contains one raises :class:`StencilError`. The estimate is normalized to
    ``estimate * |x|**order / scale`` (``scale`` defaults to ``|f(x)|``)
    before comparison with ``zero_tol``.
    """
    if not step > 0:
        raise ParameterError(f"step must be positive, got {step}")
    _check_stencil(x, order * step, breakpoints)
    raw, rounding = fd_estimate(f, x, order, step)
    if scale is None:
        scale = abs(f(x)) or 1.0
    normalized = raw * abs(x) ** order / scale if math.isfinite(raw) else raw
    return _classify(raw, normalized, rounding, zero_tol)


def mixed_estimate(g: Callable[[float, float], float], x: float, y: float, hx: float, hy: float) -> tuple[float, float]:
    vals = (g(x + hx, y + hy), g(x + hx, y - hy), g(x - hx, y + hy), g(x - hx, y - hy))
    raw = (vals[0] - vals[1] - vals[2] + vals[3]) / (4 * hx * hy)
    return raw, _ROUNDING_FACTOR * _EPS * max(abs(v) for v in vals) / (hx * hy)


def _abs_delta_fn(params: ScenarioParams, task: int, rho: float):
    spec = ProductionSpec(rho)

    def fn(a: float) -> float:
        cap = (a, 0.0) if task == 1 else (0.0, a)
        y_h, y_l = worker_outputs(spec, params, cap)
        return abs(y_h - y_l)

    return fn


def _output_scale(params: ScenarioParams, task: int, rho: float, a: float) -> float:
    cap = (a, 0.0) if task == 1 else (0.0, a)
    return sum(worker_outputs(ProductionSpec(rho), params, cap))


def _blocked_over(params_list: Sequence[ScenarioParams], task: int, rhos: Sequence[float], extra=()) -> list[tuple[float, float]]:
    """Ranges swept by each kink as the non-A parameters move across a stencil."""
    per_point = [kinks(p, task, r) + list(extra) for p in params_list for r in rhos]
    return [(min(col), max(col)) for col in zip(*per_point)]


def _check_ranges(a: float, ha: float, ranges: Iterable[tuple[float, float]]) -> None:
    for lo, hi in ranges:
        if not (a + ha < lo or a - ha > hi):
            raise StencilError(f"A-stencil [{a - ha}, {a + ha}] meets breakpoint range [{lo}, {hi}]")


def _with_b(params: ScenarioParams, b: float) -> ScenarioParams:
    if not b > params.c:
        raise StencilError(f"B-stencil reaches B={b} <= C={params.c}; shrink step_b")
    return ScenarioParams(b, params.c, params.correlation)


def derivative_a(params: ScenarioParams, task: int, rho: float, a: float, order: int, step_a: float) -> tuple[float, float, float]:
    """``(raw, normalized, rounding)`` for d^order |Delta| / dA^order."""
    _check_stencil(a, order * step_a, kinks(params, task, rho))
    f = _abs_delta_fn(params, task, rho)
    raw, _ = fd_estimate(f, a, order, step_a)
    scale = _output_scale(params, task, rho, a)
    rounding = _ROUNDING_FACTOR * _EPS * scale * (1.0 / step_a if order == 1 else 4.0 / step_a**2)
    return raw, raw * a**order / scale, rounding


def cross_bc(params: ScenarioParams, task: int, rho: float, a: float, step_a: float, step_b: float) -> tuple[float, float, float]:
    """Mixed difference of |Delta| in (A, B) with C held fixed."""
    b = params.b
    stencil = [_with_b(params, b - step_b), params, _with_b(params, b + step_b)]
    _check_ranges(a, step_a, _blocked_over(stencil, task, [rho]))

    def g(x: float, bb: float) -> float:
        return _abs_delta_fn(_with_b(params, bb), task, rho)(x)

    raw, _ = mixed_estimate(g, a, b, step_a, step_b)
    scale = max(_output_scale(p, task, rho, a) for p in stencil)
    rounding = _ROUNDING_FACTOR * _EPS * scale / (step_a * step_b)
    return raw, raw * a * b / scale, rounding


def cross_rho(params: ScenarioParams, task: int, rho: float, a: float, step_a: float, step_rho: float) -> tuple[float, float, float]:
    """Mixed difference of |Delta| in (A, rho).

    Both rho offsets are evaluated on the CES formula, so at rho = 0 the
    stencil never mixes in the Cobb-Douglas branch.
    """
    lo, hi = rho - step_rho, rho + step_rho
    if hi > 1:
        raise StencilError(f"rho-stencil reaches {hi} > 1")
    if min(abs(lo), abs(hi)) < COBB_DOUGLAS_EPS:
        raise StencilError("rho-stencil endpoint falls on the Cobb-Douglas switch")
    _check_ranges(a, step_a, _blocked_over([params], task, [lo, rho, hi]))

    def g(x: float, r: float) -> float:
        return _abs_delta_fn(params, task, r)(x)

    raw, _ = mixed_estimate(g, a, rho, step_a, step_rho)
    scale = max(_output_scale(params, task, r, a) for r in (lo, hi))
    rounding = _ROUNDING_FACTOR * _EPS * scale / (step_a * step_rho)
    return raw, raw * a / scale, rounding


def cross_sign_bc(
    params: ScenarioParams,
    task: int,
    rho: float,
    a: float,
    step_a: float | None = None,
    step_b: float | None = None,
    zero_tol: float = 1e-7,
) -> str:
    step_a = 1e-4 * a if step_a is None else step_a
    step_b = 1e-4 * params.b if step_b is None else step_b
    return _classify(*(cross_bc(params, task, rho, a, step_a, step_b)), zero_tol)


def cross_sign_rho(
    params: ScenarioParams,
    task: int,
    rho: float,
    a: float,
    step_a: float | None = None,
    step_rho: float = 1e-4,
    zero_tol: float = 1e-7,
) -> str:
    step_a = 1e-4 * a if step_a is None else step_a
    return _classify(*(cross_rho(params, task, rho, a, step_a, step_rho)), zero_tol)


# -- table verification -------------------------------------------------------


@dataclass(frozen=True)
class Tolerances:
    zero_tol: float = 1e-7
    rel_step_a: float = 1e-4
    rel_step_b: float = 1e-4
    step_rho: float = 1e-4
    guard: float = 10.0  # sample points keep guard * step away from breakpoints
    max_shrink: int = 6


@dataclass
class SamplePoint:
    draw: int
    b: float
    c: float
    rho: float
    regime: str
    lower: float
    upper: float | None  # None: unbounded
    a: float
    steps: dict
    estimates: dict
    signs: dict
    expected: dict
    match: dict

    @property
    def ok(self) -> bool:
        return all(self.match.values())


@dataclass
class SignReport:
    seed: int | None
    draws: int
    rhos: list
    columns: list
    tolerances: dict
    points: list = field(default_factory=list)
    skipped: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(p.ok for p in self.points)

    def mismatches(self) -> list[SamplePoint]:
        return [p for p in self.points if not p.ok]

    def summary(self) -> dict[str, dict[str, int]]:
        """Checks and mismatches per ``regime/column``."""
        out: dict[str, dict[str, int]] = {}
        for p in self.points:
            for col, ok in p.match.items():
                entry = out.setdefault(f"{p.regime}/{col}", {"checked": 0, "mismatched": 0})
                entry["checked"] += 1
                entry["mismatched"] += not ok
        return dict(sorted(out.items()))

    def to_dict(self, points: str = "all") -> dict:
        """``points`` selects which sample points are listed: ``all``, ``mismatches`` or ``none``."""
        if points not in ("all", "mismatches", "none"):
            raise ParameterError(f"points must be 'all', 'mismatches' or 'none', got {points!r}")
        listed = {"all": self.points, "mismatches": self.mismatches(), "none": []}[points]
        checks = sum(len(p.match) for p in self.points)
        bad = sum(not ok for p in self.points for ok in p.match.values())
        return {
            "passed": self.passed,
            "seed": self.seed,
            "draws": self.draws,
            "rhos": self.rhos,
            "columns": self.columns,
            "tolerances": self.tolerances,
            "n_points": len(self.points),
            "n_checks": checks,
            "n_mismatches": bad,
            "summary": self.summary(),
            "skipped": self.skipped,
            "points_listed": points,
            "points": [asdict(p) for p in listed],
        }

    def to_json(self, points: str = "all") -> str:
        return json.dumps(self.to_dict(points), indent=1, allow_nan=False)


def sample_points(regime: Regime, smooth_breaks: Sequence[float]) -> list[tuple[float, float]]:
    """``(a, piece_width)`` sample locations inside a regime.

    The regime is cut at every kink and conditional split inside it; bounded
    pieces are sampled at their midpoint, the unbounded piece at 1.5, 3 and
    10 times its lower end.
    """
    inner = sorted({k for k in list(smooth_breaks) + list(regime.splits) if regime.lower < k < regime.upper})
    edges = [regime.lower, *inner, regime.upper]
    pts = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if math.isinf(hi):
            pts.extend((lo * m, math.inf) for m in (1.5, 3.0, 10.0))
        else:
            pts.append((0.5 * (lo + hi), hi - lo))
    return pts


def _column_estimate(col, params, task, rho, a, ha, hb, hr):
    if col == "d_a":
        return derivative_a(params, task, rho, a, 1, ha)
    if col == "d_aa":
        return derivative_a(params, task, rho, a, 2, ha)
    if col == "d_a_bc":
        return cross_bc(params, task, rho, a, ha, hb)
    return cross_rho(params, task, rho, a, ha, hr)


def _evaluate_point(params, task, rho, regime, a, width, points, tol: Tolerances, columns, draw):
    # curvature scale is A, not the piece width; the cap keeps the guard band inside the piece
    ha = min(tol.rel_step_a * a, width / (4 * tol.guard))
    hb = tol.rel_step_b * params.b
    hr = tol.step_rho
    # sample-point guard band: every breakpoint and split at least guard * step away
    guarded = kinks(params, task, rho) + list(regime.splits)
    for _ in range(tol.max_shrink + 1):
        near = min(abs(a - k) for k in guarded)
        if near >= tol.guard * ha:
            try:
                results = {col: _column_estimate(col, params, task, rho, a, ha, hb, hr) for col in columns}
                break
            except StencilError:
                pass
        ha, hb, hr = ha / 10, hb / 10, hr / 10
    else:
        return None
    estimates, signs, expected, match = {}, {}, {}, {}
    for col, (raw, normalized, rounding) in results.items():
        estimates[col] = normalized
        signs[col] = _classify(raw, normalized, rounding, tol.zero_tol)
        expected[col] = regime.expected(col, a, points)
        match[col] = signs[col] == expected[col]
    return SamplePoint(
        draw, params.b, params.c, rho, regime.label, regime.lower,
        None if math.isinf(regime.upper) else regime.upper, a,
        {"a": ha, "b": hb, "rho": hr}, estimates, signs, expected, match,
    )


def _draw_params(seed_seq: np.random.SeedSequence, b_max: float) -> tuple[float, float]:
    rng = np.random.default_rng(seed_seq)
    u_b, u_c = rng.random(2)
    b = 1.0 + (b_max - 1.0) * (1.0 - u_b)  # in (1, b_max]
    c = 1.0 + (b - 1.0) * u_c
    if not 1.0 < c < b:  # measure-zero edge of the uniform draw
        c = 0.5 * (1.0 + b)
    return b, c


def check_point_set(
    b: float,
    c: float,
    rho: float,
    draw: int = 0,
    tolerances: Tolerances = Tolerances(),
    table: Sequence[TableRow] = SIGN_TABLE,
    columns: Sequence[str] = COLUMNS,
) -> tuple[list[SamplePoint], list[dict]]:
    """Evaluate every regime sample point of both scenarios at one ``(B, C, rho)``."""
    points_out, skipped = [], []
    for corr in Correlation:
        params = ScenarioParams(b, c, corr)
        points = breakpoints(params, rho)
        for task in (1, 2):
            ks = kinks(params, task, rho)
            for regime in regimes(params, task, rho, table):
                for a, width in sample_points(regime, ks):
                    sp = _evaluate_point(params, task, rho, regime, a, width, points, tolerances, columns, draw)
                    if sp is None:
                        skipped.append({"draw": draw, "b": b, "c": c, "rho": rho, "regime": regime.label, "a": a})
                    else:
                        points_out.append(sp)
    return points_out, skipped


def verify_sign_table(
    draws: int,
    rho_set: Sequence[float],
    seed: int,
    tolerances: Tolerances = Tolerances(),
    table: Sequence[TableRow] = SIGN_TABLE,
    columns: Sequence[str] = COLUMNS,
    threads: int = 1,
    b_max: float = 10.0,
) -> SignReport:
    """Check the encoded sign table at random ``1 < C < B <= b_max``.

    Draw ``i`` uses the ``i``-th child of ``SeedSequence(seed)``, so the report
    does not depend on ``threads``.
    """
    if draws < 0:
        raise ParameterError(f"draws must be >= 0, got {draws}")
    for rho in rho_set:
        ProductionSpec(rho)
    unknown = set(columns) - set(COLUMNS)
    if unknown:
        raise ParameterError(f"unknown columns {sorted(unknown)}")
    report = SignReport(seed, draws, [float(r) for r in rho_set], list(columns), asdict(tolerances))
    children = np.random.SeedSequence(seed).spawn(draws)

    def run(i: int):
        b, c = _draw_params(children[i], b_max)
        pts, skipped = [], []
        for rho in rho_set:
            p, s = check_point_set(b, c, float(rho), i, tolerances, table, columns)
            pts.extend(p)
            skipped.extend(s)
        return pts, skipped

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        for pts, skipped in pool.map(run, range(draws)):
            report.points.extend(pts)
            report.skipped.extend(skipped)
    return report
