"""Deterministic CSV/JSON writers, minimal SVG plots and the run manifest."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path

import numpy as np


def fmt(v) -> str:
    """Fixed text form of one CSV cell: floats at 17 significant digits."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def csv_text(rows: list[dict], columns=None) -> str:
    columns = list(columns) if columns is not None else (list(rows[0]) if rows else [])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    return v


def json_text(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def verify_manifest(out_dir) -> list[str]:
    """Files whose current hash differs from the manifest (empty list = verified)."""
    out_dir = Path(out_dir)
    manifest = json.loads((out_dir / "manifest.json").read_text())
    bad = []
    for entry in manifest["files"]:
        p = out_dir / entry["path"]
        if not p.exists() or sha256_file(p) != entry["sha256"]:
            bad.append(entry["path"])
    return bad


# -- minimal SVG -------------------------------------------------------------------

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def svg_plot(series, title: str = "", xlabel: str = "", ylabel: str = "", logx: bool = False,
             logy: bool = False, width: int = 480, height: int = 320) -> str:
    """Line/point plot. ``series`` items are (label, xs, ys, style) with style
    'line', 'points' or 'bars'."""
    pts = []
    for label, xs, ys, style in series:
        xs = np.log10(np.asarray(xs, float)) if logx else np.asarray(xs, float)
        ys = np.log10(np.abs(np.asarray(ys, float))) if logy else np.asarray(ys, float)
        ok = np.isfinite(xs) & np.isfinite(ys)
        pts.append((label, xs[ok], ys[ok], style))
    allx = np.concatenate([p[1] for p in pts] + [np.empty(0)])
    ally = np.concatenate([p[2] for p in pts] + [np.zeros(1) if any(p[3] == "bars" for p in pts) else np.empty(0)])
    if allx.size == 0:
        allx = ally = np.zeros(1)
    x0, x1 = float(allx.min()), float(allx.max())
    y0, y1 = float(ally.min()), float(ally.max())
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    ml, mr, mt, mb = 60, 20, 30, 45

    def X(v):
        return ml + (v - x0) / (x1 - x0) * (width - ml - mr)

    def Y(v):
        return height - mb - (v - y0) / (y1 - y0) * (height - mt - mb)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="11">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<line x1="{ml}" y1="{height - mb}" x2="{width - mr}" y2="{height - mb}" stroke="black"/>',
           f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{height - mb}" stroke="black"/>',
           f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{_esc(title)}</text>',
           f'<text x="{width / 2:.1f}" y="{height - 8}" text-anchor="middle">{_esc(xlabel)}'
           f'{" (log10)" if logx else ""}</text>',
           f'<text x="14" y="{height / 2:.1f}" text-anchor="middle" transform="rotate(-90 14 '
           f'{height / 2:.1f})">{_esc(ylabel)}{" (log10 |.|)" if logy else ""}</text>']
    for v, anchor in ((x0, "start"), (x1, "end")):
        out.append(f'<text x="{X(v):.1f}" y="{height - mb + 14}" text-anchor="{anchor}">{v:.3g}</text>')
    for v in (y0, y1):
        out.append(f'<text x="{ml - 4}" y="{Y(v) + 4:.1f}" text-anchor="end">{v:.3g}</text>')
    for i, (label, xs, ys, style) in enumerate(pts):
        c = _COLORS[i % len(_COLORS)]
        if style == "line" and xs.size:
            path = " ".join(f"{X(a):.2f},{Y(b):.2f}" for a, b in zip(xs, ys))
            out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{path}"/>')
        elif style == "bars":
            for a, b in zip(xs, ys):
                out.append(f'<line x1="{X(a):.2f}" y1="{Y(0.0):.2f}" x2="{X(a):.2f}" y2="{Y(b):.2f}" '
                           f'stroke="{c}" stroke-width="4"/>')
        else:
            out += [f'<circle cx="{X(a):.2f}" cy="{Y(b):.2f}" r="2.5" fill="{c}"/>' for a, b in zip(xs, ys)]
        out.append(f'<text x="{width - mr - 4}" y="{mt + 14 * (i + 1)}" text-anchor="end" fill="{c}">'
                   f'{_esc(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
