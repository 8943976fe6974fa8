"""Coverage accounting: inspected percentages, equal-budget comparisons, tables."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field


@dataclass(frozen=True)
class Sample:
    distance_m: float
    planning_s: float
    time_s: float  # planning plus simulated flight time
    inspected: int


@dataclass
class RunReport:
    scene: str
    object_voxels: int
    inspectable_voxels: int
    inspected: int
    distance_m: float
    planning_s: float
    time_s: float = None
    samples: list = field(default_factory=list)
    uninspectable: list = field(default_factory=list)
    status: str = "finished"
    iterations: int = 0

    def __post_init__(self):
        if self.time_s is None:
            self.time_s = self.planning_s

    def percent_inspected(self, of="inspectable"):
        return percent_inspected(self, of)

    def to_dict(self):
        d = asdict(self)
        d["samples"] = [asdict(s) if not isinstance(s, dict) else s for s in self.samples]
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["samples"] = [Sample(**s) for s in d.get("samples", [])]
        return cls(**d)


def _pct(num, den):
    if den <= 0:
        raise ValueError("percentage denominator must be positive")
    return round(100.0 * num / den, 2)


def percent_inspected(report, of="inspectable"):
    """Inspected voxels as a percentage of object or inspectable voxels (2 dp)."""
    if of == "object":
        return _pct(report.inspected, report.object_voxels)
    if of == "inspectable":
        return _pct(report.inspected, report.inspectable_voxels)
    raise ValueError(f"unknown denominator {of!r}")


def percent_at(report, distance=None, time=None):
    """Percentage of inspectable voxels inspected by a distance or time cutoff.

    Uses the last checkpoint at or before the cutoff (step interpolation).
    """
    if (distance is None) == (time is None):
        raise ValueError("give exactly one of distance= or time=")
    cutoff = distance if distance is not None else time
    if cutoff < 0:
        raise ValueError("cutoff must be >= 0")
    attr = "distance_m" if distance is not None else "time_s"
    inspected = 0
    for s in report.samples:
        if getattr(s, attr) <= cutoff + 1e-12:
            inspected = s.inspected
        else:
            break
    return _pct(inspected, report.inspectable_voxels)


COLUMNS = ("Scene", "ObjectVoxels", "Inspected", "Time(min)", "Distance(m)")


def _rows(reports):
    if not reports:
        raise ValueError("no reports to render")
    for r in sorted(reports, key=lambda r: r.scene):
        yield (r.scene, str(r.object_voxels), str(r.inspected), f"{r.time_s / 60.0:.2f}", f"{r.distance_m:.2f}")


def render_table(reports, fmt="markdown"):
    rows = list(_rows(reports))
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        w.writerows(rows)
        return buf.getvalue()
    if fmt != "markdown":
        raise ValueError(f"unknown table format {fmt!r}")
    widths = [max(len(c), *(len(r[i]) for r in rows)) for i, c in enumerate(COLUMNS)]
    line = lambda cells: "| " + " | ".join(c.ljust(w) for c, w in zip(cells, widths)) + " |"
    out = [line(COLUMNS), "|" + "|".join("-" * (w + 2) for w in widths) + "|"]
    out.extend(line(r) for r in rows)
    return "\n".join(out) + "\n"


def parse_table_csv(text):
    """Read a table written by ``render_table(fmt='csv')`` back into dicts."""
    return list(csv.DictReader(io.StringIO(text)))
