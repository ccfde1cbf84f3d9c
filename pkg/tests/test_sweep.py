import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from automation_inequality.core import Correlation, ProductionSpec, ScenarioParams, inequality
from automation_inequality.errors import ParameterError
from automation_inequality.sweep import (
    BOTH,
    CSV_COLUMNS,
    Feature,
    SweepConfig,
    evaluate,
    detect_extrema,
    parse_csv,
    sweep_multi,
    sweep_single,
)

NEG42 = ScenarioParams(4, 2, Correlation.NEGATIVE)
POS42 = ScenarioParams(4, 2, Correlation.POSITIVE)


def test_config_defaults_and_validation():
    cfg = SweepConfig(POS42)
    assert cfg.a_max == 16.0 and cfg.points == 201
    axis = cfg.axis()
    assert axis[0] == 0.0 and axis[-1] == 16.0 and len(axis) == 201
    for bad in (
        dict(task=3),
        dict(points=1),
        dict(points=2.5),
        dict(a_min=5.0, a_max=4.0),
        dict(spacing="cubic"),
        dict(spacing="log"),
        dict(rho=2.0),
    ):
        with pytest.raises(ParameterError):
            SweepConfig(POS42, **bad)
    log_axis = SweepConfig(POS42, a_min=0.5, a_max=8.0, points=5, spacing="log").axis()
    assert log_axis == pytest.approx([0.5, 1.0, 2.0, 4.0, 8.0], rel=1e-14)


def test_sweep_rows_match_core():
    s = sweep_single(SweepConfig(NEG42, rho=0.5, task=1, points=33))
    spec = ProductionSpec(0.5)
    d0 = inequality(spec, NEG42, (0, 0)).delta
    assert s.delta0 == d0
    for r in s.rows:
        ref = inequality(spec, NEG42, (r.a1, 0))
        assert (r.y_h, r.y_l, r.delta) == (ref.y_high, ref.y_low, ref.delta)
        assert r.ratio == abs(ref.delta) / abs(d0)
        assert r.a2 is None


def test_task2_sweep_stores_capability_in_a1():
    s = sweep_single(SweepConfig(POS42, task=2, points=5))
    assert [r.a1 for r in s.rows] == [0.0, 4.0, 8.0, 12.0, 16.0]
    assert s.rows[2].adopt_l2 and not s.rows[2].adopt_h2


def test_no_adoption_rows_have_unit_ratio():
    s = sweep_single(SweepConfig(NEG42, task=1, a_max=0.5, points=11))
    assert all(r.ratio == 1.0 and not r.adopted for r in s.rows)
    assert detect_extrema(s) == []


def test_positive_cobb_douglas_single_minimum_at_b():
    s = sweep_single(SweepConfig(POS42, task=1))
    feats = detect_extrema(s)
    assert [f.kind for f in feats] == ["min"]
    assert feats[0].lo <= 4.0 <= feats[0].hi


@settings(max_examples=60, deadline=None)
@given(b=st.floats(1.05, 10), frac=st.floats(0.02, 0.98), points=st.integers(20, 400))
def test_minimum_interval_contains_b_at_any_resolution(b, frac, points):
    params = ScenarioParams(b, 1 + frac * (b - 1), Correlation.POSITIVE)
    feats = detect_extrema(sweep_single(SweepConfig(params, task=1, points=points)))
    assert len(feats) == 1 and feats[0].kind == "min"
    assert feats[0].lo <= b <= feats[0].hi
    assert feats[0].at == pytest.approx(b, rel=1e-9)


def test_negative_crossing_near_b_over_c():
    s = sweep_single(SweepConfig(NEG42, task=1, a_max=8.0))
    crossings = [f for f in detect_extrema(s) if f.kind == "zero-crossing"]
    assert len(crossings) == 1
    assert crossings[0].lo <= 2.0 <= crossings[0].hi
    assert crossings[0].at == pytest.approx(2.0, rel=1e-12)


def test_negative_task2_monotone():
    s = sweep_single(SweepConfig(NEG42, task=2))
    ys = s.column("abs_delta")
    assert all(b >= a for a, b in zip(ys, ys[1:]))
    assert detect_extrema(s) == []


def test_detect_extrema_synthetic_plateau():
    # |Delta| that dips, stays flat, and rises: the minimum spans the plateau
    from automation_inequality.sweep import SweepRow, SweepSeries

    vals = [3.0, 2.0, 1.0, 1.0, 1.0, 2.0]
    rows = [SweepRow(float(i), None, 1, 1, v, v, v, False, False, False, False) for i, v in enumerate(vals)]
    s = SweepSeries(SweepConfig(POS42, points=6), 3.0, rows)
    assert detect_extrema(s) == [Feature("min", 2.0, 4.0)]


def test_extrema_needs_1d():
    g = sweep_multi(SweepConfig(POS42, task=BOTH, points=3))
    with pytest.raises(ParameterError):
        detect_extrema(g)
    with pytest.raises(ParameterError):
        sweep_single(SweepConfig(POS42, task=BOTH))
    with pytest.raises(ParameterError):
        sweep_multi(SweepConfig(POS42, task=1))


def test_grid_layout_and_corner():
    g = sweep_multi(SweepConfig(POS42, task=BOTH, points=9))
    assert len(g.rows) == 81
    assert [r.a2 for r in g.rows[:9]] == g.config.axis()
    assert all(r.a1 == 0.0 for r in g.rows[:9])
    for r in g.rows:
        if r.a1 >= 4 and r.a2 >= 8:
            assert r.abs_delta == 0.0
        if r.a1 <= 1 and r.a2 <= 2:
            assert r.ratio == 1.0 and not r.adopted


def test_negative_grid_can_raise_inequality():
    g = sweep_multi(SweepConfig(NEG42, task=BOTH, points=41))
    assert max(r.ratio for r in g.rows) > 1


def test_csv_format_and_round_trip():
    s = sweep_single(SweepConfig(NEG42, rho=-0.5, task=1, points=17))
    text = s.to_csv()
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    rows = parse_csv(text)
    spec = ProductionSpec(-0.5)
    for row in rows:
        assert row["a2"] is None
        values = evaluate(spec, NEG42, row["a1"], 0.0, s.abs_delta0)
        assert tuple(row[c] for c in CSV_COLUMNS[2:]) == values


def test_grid_csv_round_trip_exact():
    g = sweep_multi(SweepConfig(POS42, rho=0.3, task=BOTH, points=7))
    spec = ProductionSpec(0.3)
    for row in parse_csv(g.to_csv()):
        values = evaluate(spec, POS42, row["a1"], row["a2"], g.abs_delta0)
        assert tuple(row[c] for c in CSV_COLUMNS[2:]) == values


def test_json_output():
    s = sweep_single(SweepConfig(NEG42, task=1, points=5))
    doc = json.loads(s.to_json())
    assert doc["columns"] == list(CSV_COLUMNS)
    assert doc["config"]["correlation"] == "negative"
    assert len(doc["rows"]) == 5
    first = doc["rows"][0]
    assert first["abs_delta_change"] == 0.0 and first["a2"] is None


@settings(max_examples=40, deadline=None)
@given(
    b=st.floats(1.2, 10),
    frac=st.floats(0.05, 0.95),
    rho=st.floats(-2, 1),
    corr=st.sampled_from(list(Correlation)),
)
def test_ratio_is_one_without_adoption(b, frac, rho, corr):
    params = ScenarioParams(b, 1 + frac * (b - 1), corr)
    s = sweep_single(SweepConfig(params, rho=rho, task=1, a_max=1.0, points=5))
    assert all(r.ratio == 1.0 for r in s.rows)
    assert not math.isnan(s.delta0)
