"""Profile CSV and report JSON persistence."""

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .errors import ProfileFormatError
from .profile import RadialGrid, RadialProfile

HEADER = "r,u,ur,w,urr,urrr"
COLUMNS = ("r", "u", "u_r", "w", "u_rr", "u_rrr")
SCHEMA_VERSION = 1
PLUMBING = "plumbing"


def atomic_write(path, text):
    """Write text to path through a temporary file in the same directory."""
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _cell(x):
    return "%.17g" % x


def profile_csv(profile):
    cols = [profile.r, profile.u, profile.u_r, profile.w, profile.u_rr, profile.u_rrr]
    lines = [HEADER]
    for i in range(profile.grid.count):
        lines.append(",".join("" if c is None else _cell(c[i]) for c in cols))
    return "\n".join(lines) + "\n"


def save_profile(path, profile):
    atomic_write(path, profile_csv(profile))


def parse_profile(text, N, p, meta=None):
    """Parse CSV text in the profile format; errors carry 1-based line numbers."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != HEADER:
        raise ProfileFormatError(f"header must be exactly '{HEADER}'", 1)
    rows = []
    present = None
    for k, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != len(COLUMNS):
            raise ProfileFormatError(f"expected {len(COLUMNS)} cells, got {len(cells)}", k)
        have = tuple(c.strip() != "" for c in cells)
        if not all(have[:4]):
            raise ProfileFormatError("r, u, ur and w are required on every row", k)
        if present is None:
            present = have
        elif have != present:
            raise ProfileFormatError("derivative columns must be filled on all rows or none", k)
        try:
            values = [float(c) if h else math.nan for c, h in zip(cells, have)]
        except ValueError as exc:
            raise ProfileFormatError(f"not a number: {exc}", k) from None
        if not all(math.isfinite(v) for v, h in zip(values, have) if h):
            raise ProfileFormatError("non-finite value", k)
        if rows and not values[0] > rows[-1][0]:
            raise ProfileFormatError("r column must be strictly increasing", k)
        rows.append(values)
    if len(rows) < 2:
        raise ProfileFormatError("profile needs at least two rows", len(lines))
    data = np.array(rows)
    if data[0, 0] <= 0.0:
        raise ProfileFormatError("r must be positive", 2)
    try:
        grid = RadialGrid(data[:, 0].copy())
    except ValueError as exc:
        raise ProfileFormatError(str(exc), 2) from None
    extra = {name: data[:, j].copy() if present[j] else None for j, name in enumerate(COLUMNS) if j >= 4}
    return RadialProfile(grid=grid, u=data[:, 1].copy(), u_r=data[:, 2].copy(), w=data[:, 3].copy(),
                         N=N, p=p, meta=dict(meta or {}), **extra)


def load_profile(path, N, p, meta=None):
    with open(path, newline="") as fh:
        return parse_profile(fh.read(), N, p, meta=meta)


# --- reports ------------------------------------------------------------------


def jsonable(x):
    """Plain JSON value: numpy scalars unwrapped, NaN as null, infinities as strings."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [jsonable(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if hasattr(x, "value") and hasattr(x, "name"):
        return x.value
    if x is None or isinstance(x, str):
        return x
    return str(x)


@dataclass
class ReportDocument:
    command: str
    config: dict
    version: str
    records: list = field(default_factory=list)
    profiles: list = field(default_factory=list)
    timestamp: str = None

    def add(self, statement_id, value, verdict, tolerance, max_ratio_location=None, **details):
        self.records.append({"statement_id": statement_id, "fitted_constant": value, "verdict": verdict,
                             "tolerance": tolerance, "max_ratio_location": max_ratio_location,
                             "details": details})

    def add_estimate(self, report):
        if report.skipped:
            verdict = "skipped"
        else:
            verdict = "pass" if report.holds else "fail"
        self.add(report.statement_id, report.fitted_constant, verdict, report.tolerance,
                 report.max_ratio_location, hard=report.hard, sharp=report.sharp,
                 regime=report.regime.value, skipped_reason=report.skipped_reason)

    @property
    def failures(self):
        return [r["statement_id"] for r in self.records if r["verdict"] == "fail"]

    def to_dict(self):
        return jsonable({
            "schema_version": SCHEMA_VERSION,
            "metadata": {"artifact_version": self.version, "command": self.command, "config": self.config,
                         "timestamp": self.timestamp or datetime.now(timezone.utc).isoformat()},
            "records": self.records,
            "profiles": self.profiles,
        })


def report_json(document):
    return json.dumps(document.to_dict(), indent=2, sort_keys=True) + "\n"


def write_report(path, document):
    atomic_write(path, report_json(document))


def read_report(path):
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ProfileFormatError(f"unsupported report schema {doc.get('schema_version')!r}", 1)
    return doc
