"""Delimited outputs: labelled matrices, SVG heatmaps and 2-D projections."""

from __future__ import annotations

import csv
import hashlib
import io
from pathlib import Path
from typing import Iterable, Sequence
from xml.sax.saxutils import escape

import numpy as np


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def sha256_array(a: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(a, dtype="<f8").tobytes()).hexdigest()


def footer_line(**meta) -> str:
    return ",".join(f"{k}={v}" for k, v in meta.items())


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], footer: str | None = None) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    if footer:
        buf.write(f"# {footer}\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def matrix_rows(L: np.ndarray, row_names: Sequence[str]):
    for name, row in zip(row_names, L):
        yield [name] + [repr(float(x)) for x in row]


def write_matrix_csv(path, L: np.ndarray, row_names, col_names, footer: str | None = None) -> None:
    write_csv(path, [""] + list(col_names), matrix_rows(L, row_names), footer)


def svg_heatmap(L: np.ndarray, row_names, col_names, cell: int = 56) -> str:
    """Heatmap with a white-to-blue linear ramp and the value printed in each cell."""
    L = np.asarray(L, dtype=float)
    lo, hi = float(L.min()), float(L.max())
    span = hi - lo if hi > lo else 1.0
    left = 12 + 7 * max(len(n) for n in row_names)
    top = 12 + 7 * max(len(n) for n in col_names)
    width = left + cell * L.shape[1] + 10
    height = top + cell * L.shape[0] + 10
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'font-family="sans-serif" font-size="11">']
    for j, name in enumerate(col_names):
        x = left + cell * j + cell // 2
        parts.append(f'<text x="{x}" y="{top - 6}" transform="rotate(-60 {x} {top - 6})">{escape(name)}</text>')
    for i, name in enumerate(row_names):
        y = top + cell * i + cell // 2 + 4
        parts.append(f'<text x="{left - 6}" y="{y}" text-anchor="end">{escape(name)}</text>')
        for j in range(L.shape[1]):
            t = (L[i, j] - lo) / span
            r, g, b = (int(round(255 - t * (255 - c))) for c in (33, 102, 172))
            x, yy = left + cell * j, top + cell * i
            ink = "#ffffff" if t > 0.6 else "#000000"
            parts.append(f'<g class="cell"><rect x="{x}" y="{yy}" width="{cell}" height="{cell}" '
                         f'fill="rgb({r},{g},{b})" stroke="#ffffff"/>'
                         f'<text x="{x + cell // 2}" y="{yy + cell // 2 + 4}" text-anchor="middle" '
                         f'fill="{ink}">{L[i, j]:.2f}</text></g>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def pca_2d(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project rows of X onto the top two principal directions.

    Each component's sign is fixed so that its largest-magnitude coordinate is
    positive. Returns (coordinates (n, 2), components (2, d)).
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    centred = X - X.mean(axis=0)
    _, _, vt = np.linalg.svd(centred, full_matrices=False)
    comps = np.zeros((2, d))
    m = min(2, vt.shape[0])
    comps[:m] = vt[:m]
    for c in comps:
        pivot = int(np.argmax(np.abs(c)))
        if c[pivot] < 0:
            c *= -1
    return centred @ comps.T, comps
