"""Result tables and their on-disk forms: CSV, a JSON sidecar, and SVG charts."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Any, Sequence

from .errors import MissingColumn, TooFewRows

SWEEP_COLUMNS = ("n", "lambda_mag", "lambda_nonmag", "gap", "residual_mag", "residual_nonmag", "h", "converged")
FLUX_COLUMNS = ("t", "flux", "lambda_mag", "residual", "converged")
PCHECK_COLUMNS = ("j", "r_j", "h_j", "lambda", "poincare_bound")
KATO_COLUMNS = ("n", "lambda_mag", "lambda_nonmag", "gap", "residual_mag", "residual_nonmag", "h")
EIG_COLUMNS = ("operator", "n", "lambda", "residual", "iters", "converged", "h", "N")


@dataclass
class ResultTable:
    """Rows of named columns plus a free-form metadata block."""

    columns: tuple[str, ...]
    rows: list[tuple]
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.columns = tuple(self.columns)
        for r in self.rows:
            if len(r) != len(self.columns):
                raise ValueError(f"row {r!r} does not match columns {self.columns}")

    def column(self, name: str) -> list:
        if name not in self.columns:
            raise MissingColumn(name)
        k = self.columns.index(name)
        return [r[k] for r in self.rows]

    def sorted_by(self, key: str) -> "ResultTable":
        k = self.columns.index(key)
        return ResultTable(self.columns, sorted(self.rows, key=lambda r: r[k]), self.metadata)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(self.columns)
        for r in self.rows:
            wr.writerow([format_cell(v) for v in r])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(self.metadata, indent=2, sort_keys=True, default=_json_default) + "\n"


def format_cell(v) -> str:
    """Shortest round-trip text for a cell."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float) or hasattr(v, "__float__"):
        return repr(float(v))
    return str(v)


def _json_default(o):
    if hasattr(o, "tolist"):
        return o.tolist()
    if hasattr(o, "__float__"):
        return float(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def write_atomic(path: str, text: str) -> None:
    """Write ``text`` to a temporary file next to ``path`` and rename it into place."""
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- SVG ------------------------------------------------------------------

WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=70, right=160, top=20, bottom=50)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def is_geometric(xs: Sequence[float], rtol: float = 1e-9) -> bool:
    """True for at least three positive values with a constant ratio other than one."""
    if len(xs) < 3 or any(not (x > 0) for x in xs):
        return False
    ratios = [b / a for a, b in zip(xs, xs[1:])]
    q = ratios[0]
    return abs(q - 1) > rtol and all(abs(r - q) <= rtol * abs(q) for r in ratios)


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick(v: float) -> str:
    return f"{v:.4g}"


def emit_svg(table: ResultTable, x_col: str, y_cols: Sequence[str], title: str = "") -> str:
    """Line chart of ``y_cols`` against ``x_col`` as a standalone SVG string."""
    for c in (x_col, *y_cols):
        if c not in table.columns:
            raise MissingColumn(c)
    if len(table.rows) < 2:
        raise TooFewRows(f"need at least 2 rows, got {len(table.rows)}")
    xs = [float(x) for x in table.column(x_col)]
    logx = is_geometric(xs)
    tx = [math.log10(x) for x in xs] if logx else xs
    series = [[float(y) for y in table.column(c)] for c in y_cols]
    finite = [y for s in series for y in s if math.isfinite(y)]
    x0, x1 = min(tx), max(tx)
    y0, y1 = (min(finite), max(finite)) if finite else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(v):
        return MARGIN["left"] + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return MARGIN["top"] + (y1 - v) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.2f}" y="14" text-anchor="middle">{_escape(title)}</text>')
    left, bottom = MARGIN["left"], MARGIN["top"] + ph
    out.append(f'<line x1="{left}" y1="{bottom}" x2="{left + pw}" y2="{bottom}" stroke="black"/>')
    out.append(f'<line x1="{left}" y1="{MARGIN["top"]}" x2="{left}" y2="{bottom}" stroke="black"/>')

    xticks = xs if logx else [x0 + k * (x1 - x0) / 4 for k in range(5)]
    for xv in xticks:
        px = sx(math.log10(xv) if logx else xv)
        out.append(f'<line x1="{_fmt(px)}" y1="{bottom}" x2="{_fmt(px)}" y2="{bottom + 4}" stroke="black"/>')
        out.append(f'<text x="{_fmt(px)}" y="{bottom + 16}" text-anchor="middle">{_tick(xv)}</text>')
    for k in range(5):
        yv = y0 + k * (y1 - y0) / 4
        py = sy(yv)
        out.append(f'<line x1="{left - 4}" y1="{_fmt(py)}" x2="{left}" y2="{_fmt(py)}" stroke="black"/>')
        out.append(f'<text x="{left - 6}" y="{_fmt(py + 4)}" text-anchor="end">{_tick(yv)}</text>')
    xlabel = f"{x_col} (log scale)" if logx else x_col
    out.append(f'<text x="{_fmt(left + pw / 2)}" y="{HEIGHT - 10}" text-anchor="middle">{_escape(xlabel)}</text>')

    for k, (name, ys) in enumerate(zip(y_cols, series)):
        color = COLORS[k % len(COLORS)]
        pts = " ".join(f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in zip(tx, ys) if math.isfinite(b))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = MARGIN["top"] + 12 + 16 * k
        lx = left + pw + 12
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 18}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 24}" y="{ly}">{_escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
