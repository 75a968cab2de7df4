"""CSV/JSON emission for sweep reports.

Floats are written with 17 significant digits in both formats so values
survive a round trip exactly.  Absent quantities are empty CSV fields and
JSON nulls.  Nothing time-dependent is written, which keeps outputs
byte-identical across reruns.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from pathlib import Path

COLUMNS = ("axis_name", "axis_value", "n_trials", "n_valid", "p_dec", "stderr", "p_fa", "lb_thm1",
           "ub_cor1", "lb_thm3", "lb_thm4", "lq_cost_mean", "config_hash")
LONG_COLUMNS = ("axis_name", "axis_value", "series", "value")
SERIES = ("p_dec", "stderr", "p_fa", "lb_thm1", "ub_cor1", "lb_thm3", "lb_thm4", "lq_cost_mean")


def _present(v) -> bool:
    return v is not None and not (isinstance(v, float) and not math.isfinite(v))


def csv_field(v) -> str:
    if not _present(v):
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def json_value(v) -> str:
    if not _present(v):
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        s = format(v, ".17g")
        # keep floats recognisable as floats
        return s if any(c in s for c in ".en") else s + ".0"
    if isinstance(v, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {json_value(x)}" for k, x in v.items()) + "}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(json_value(x) for x in v) + "]"
    return json.dumps(str(v))


def rows_of(report) -> list[dict]:
    return [p.row() for p in report.points]


def csv_text(rows: list[dict], columns=COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([csv_field(r.get(c)) for c in columns])
    return buf.getvalue()


def json_text(rows: list[dict], metadata: dict | None = None) -> str:
    lines = ["{", f'  "metadata": {json_value(metadata or {})},', '  "points": [']
    body = []
    for r in rows:
        body.append("    {" + ", ".join(f"{json.dumps(c)}: {json_value(r.get(c))}" for c in COLUMNS) + "}")
    lines.append(",\n".join(body))
    lines += ["  ]", "}"]
    return "\n".join(lines) + "\n"


def report_text(report, fmt: str = "csv") -> str:
    rows = rows_of(report)
    if fmt == "csv":
        return csv_text(rows)
    if fmt == "json":
        return json_text(rows, report.metadata)
    raise ValueError(f"unknown format {fmt!r}")


def long_rows(rows: list[dict]) -> list[dict]:
    """Plot-ready long format: one row per (grid point, series)."""
    out = []
    for r in rows:
        for s in SERIES:
            if _present(r.get(s)):
                out.append({"axis_name": r["axis_name"], "axis_value": r["axis_value"], "series": s,
                            "value": r[s]})
    return out


def write_text(text: str, path: str | Path | None) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def emit_report(report, fmt: str, path) -> None:
    write_text(report_text(report, fmt), path)


def parse_csv(text: str) -> list[dict]:
    """Inverse of :func:`csv_text` for the numeric report columns."""
    rows = []
    for r in csv.DictReader(io.StringIO(text)):
        row = {}
        for c in COLUMNS:
            v = r[c]
            if v == "":
                row[c] = None
            elif c in ("n_trials", "n_valid"):
                row[c] = int(v)
            elif c in ("axis_name", "axis_value", "config_hash"):
                row[c] = v
            else:
                row[c] = float(v)
        rows.append(row)
    return rows


def parse_json(text: str) -> tuple[dict, list[dict]]:
    data = json.loads(text)
    return data["metadata"], data["points"]
