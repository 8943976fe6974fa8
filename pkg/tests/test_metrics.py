import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from voxinspect.metrics import (
    COLUMNS,
    RunReport,
    Sample,
    parse_table_csv,
    percent_at,
    percent_inspected,
    render_table,
)


def report(inspected, inspectable, object_voxels=None, **kw):
    return RunReport("s", object_voxels or inspectable, inspectable, inspected, 0.0, 0.0, **kw)


class TestPercentInspected:
    def test_partial(self):
        assert percent_inspected(report(266, 610)) == 43.61

    def test_complete(self):
        assert percent_inspected(report(610, 610)) == 100.00
        assert f"{percent_inspected(report(610, 610)):.2f}" == "100.00"

    def test_zero(self):
        assert percent_inspected(report(0, 610)) == 0.0

    def test_object_denominator(self):
        assert percent_inspected(report(50, 80, object_voxels=100), of="object") == 50.0

    def test_zero_denominator(self):
        with pytest.raises(ValueError):
            percent_inspected(report(0, 0))

    def test_unknown_denominator(self):
        with pytest.raises(ValueError):
            percent_inspected(report(1, 2), of="nope")


class TestPercentAt:
    def setup_method(self):
        self.r = report(5, 5, samples=[Sample(0.0, 0.0, 0.0, 0), Sample(10.0, 1.0, 11.0, 2), Sample(20.0, 2.0, 22.0, 5)])

    def test_step_rule(self):
        assert percent_at(self.r, distance=15) == 40.00

    def test_zero_cutoff(self):
        assert percent_at(self.r, distance=0) == 0.0

    def test_beyond_end(self):
        assert percent_at(self.r, distance=1e6) == 100.0

    def test_time_cutoff_uses_total_time(self):
        assert percent_at(self.r, time=10.5) == 0.0
        assert percent_at(self.r, time=11.0) == 40.0

    def test_needs_exactly_one_cutoff(self):
        with pytest.raises(ValueError):
            percent_at(self.r)
        with pytest.raises(ValueError):
            percent_at(self.r, distance=1, time=1)

    def test_negative_cutoff(self):
        with pytest.raises(ValueError):
            percent_at(self.r, distance=-1)


class TestTable:
    def test_arch_row(self):
        r = RunReport("Arch", 610, 610, 610, 295.88, 0.0, time_s=91.32 * 60)
        text = render_table([r])
        assert text.splitlines()[2].split("|")[1:-1] == [" Arch  ", " 610          ", " 610       ", " 91.32     ", " 295.88      "]
        assert [c.strip() for c in text.splitlines()[0].split("|")[1:-1]] == list(COLUMNS)

    def test_one_row_per_report(self):
        assert len(render_table([report(1, 2)]).splitlines()) == 3

    def test_sorted_by_scene(self):
        a = RunReport("b_scene", 1, 1, 1, 1.0, 1.0)
        b = RunReport("a_scene", 1, 1, 1, 1.0, 1.0)
        rows = render_table([a, b], fmt="csv").splitlines()[1:]
        assert [r.split(",")[0] for r in rows] == ["a_scene", "b_scene"]

    def test_empty(self):
        with pytest.raises(ValueError):
            render_table([])

    def test_bad_format(self):
        with pytest.raises(ValueError):
            render_table([report(1, 1)], fmt="html")


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.text("abcdef", min_size=1, max_size=6), st.integers(0, 5000),
                          st.floats(0, 1e5), st.floats(0, 1e4)), min_size=1, max_size=6))
def test_csv_round_trip(rows):
    reports = [RunReport(name, n, n, n // 2, dist, t, time_s=t) for name, n, dist, t in rows]
    parsed = parse_table_csv(render_table(reports, fmt="csv"))
    by_name = sorted(reports, key=lambda r: r.scene)
    for r, row in zip(by_name, parsed):
        assert row["Scene"] == r.scene
        assert int(row["ObjectVoxels"]) == r.object_voxels
        assert int(row["Inspected"]) == r.inspected
        assert float(row["Time(min)"]) == pytest.approx(round(r.time_s / 60, 2), abs=1e-9)
        assert float(row["Distance(m)"]) == pytest.approx(round(r.distance_m, 2), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(steps=st.lists(st.tuples(st.floats(0, 50), st.integers(0, 3)), max_size=12),
       cuts=st.lists(st.floats(0, 600), min_size=2, max_size=6))
def test_percent_at_nondecreasing(steps, cuts):
    d = t = 0.0
    n = 0
    samples = [Sample(0.0, 0.0, 0.0, 0)]
    for dd, dn in steps:
        d += dd
        t += dd * 1.5
        n += dn
        samples.append(Sample(d, t, t, n))
    r = report(n, max(n, 1), samples=samples)
    cuts = sorted(cuts)
    for key in ("distance", "time"):
        vals = [percent_at(r, **{key: c}) for c in cuts]
        assert vals == sorted(vals)


def test_json_round_trip():
    r = RunReport("x", 3, 2, 2, 1.5, 0.25, samples=[Sample(0.0, 0.0, 0.0, 0)], uninspectable=["1_2_3"], status="stuck")
    back = RunReport.from_dict(json.loads(r.to_json()))
    assert back == r
    assert r.time_s == 0.25
