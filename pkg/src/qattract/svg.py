"""Deterministic SVG overlays: regions, trajectories, basin rasters.

Fixed conventions: the union of all world bounding boxes, padded by 5%,
maps onto a 840x600 viewBox with the y axis pointing up; the legend sits
in the top-left corner.  No timestamps, no randomness: identical inputs
give identical bytes.
"""

from __future__ import annotations

import numpy as np

__all__ = ["SvgOverlay"]

_REGION_COLORS = ["#1f77b4", "#9467bd", "#2ca02c", "#e377c2", "#17becf", "#bcbd22"]
_CURVE_COLORS = ["#d62728", "#ff7f0e", "#8c564b", "#7f7f7f", "#e6b800", "#000000"]
_BASIN_FILL = {"attracted": "#9ed9a0", "blown_up": "#f2a0a5", "undecided": "#d9d9d9"}

_W, _H = 840.0, 600.0
_PAD = 0.05


def _fmt(v: float) -> str:
    return f"{v:.3f}".rstrip("0").rstrip(".")


class SvgOverlay:
    def __init__(self):
        self._regions = []
        self._curves = []
        self._basin = None
        self._bbox = None

    def _grow_bbox(self, xs, ys):
        x0, x1 = float(np.min(xs)), float(np.max(xs))
        y0, y1 = float(np.min(ys)), float(np.max(ys))
        if self._bbox is None:
            self._bbox = [x0, x1, y0, y1]
        else:
            b = self._bbox
            b[0], b[1] = min(b[0], x0), max(b[1], x1)
            b[2], b[3] = min(b[2], y0), max(b[3], y1)

    def add_region(self, polyline: np.ndarray, label: str):
        pts = np.asarray(polyline, dtype=np.float64)
        self._regions.append((label, pts))
        self._grow_bbox(pts[:, 0], pts[:, 1])

    def add_curve(self, xs, ys, label: str):
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        self._curves.append((label, xs, ys))
        self._grow_bbox(xs, ys)

    def add_basin(self, xs, ys, labels):
        """Point cloud with label names; rendered as cell rectangles."""
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        self._basin = (xs, ys, list(labels))
        self._grow_bbox(xs, ys)

    def _transform(self):
        x0, x1, y0, y1 = self._bbox
        dx = (x1 - x0) or 1.0
        dy = (y1 - y0) or 1.0
        x0 -= _PAD * dx
        x1 += _PAD * dx
        y0 -= _PAD * dy
        y1 += _PAD * dy
        sx = _W / (x1 - x0)
        sy = _H / (y1 - y0)

        def to_screen(x, y):
            return (x - x0) * sx, _H - (y - y0) * sy

        return to_screen

    def write(self, path):
        if self._bbox is None:
            raise ValueError("nothing to draw")
        to_screen = self._transform()
        parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {_fmt(_W)} {_fmt(_H)}">',
            f'<rect x="0" y="0" width="{_fmt(_W)}" height="{_fmt(_H)}" fill="#ffffff"/>',
        ]
        legend = []

        if self._basin is not None:
            xs, ys, labels = self._basin
            ux, uy = np.unique(xs), np.unique(ys)
            wx = (ux[1] - ux[0]) if len(ux) > 1 else 1.0
            wy = (uy[1] - uy[0]) if len(uy) > 1 else 1.0
            parts.append('<g shape-rendering="crispEdges">')
            for x, y, lab in zip(xs, ys, labels):
                px, py = to_screen(x - 0.5 * wx, y + 0.5 * wy)
                px2, py2 = to_screen(x + 0.5 * wx, y - 0.5 * wy)
                fill = _BASIN_FILL.get(lab, "#ffffff")
                parts.append(
                    f'<rect x="{_fmt(px)}" y="{_fmt(py)}" width="{_fmt(px2 - px)}" '
                    f'height="{_fmt(py2 - py)}" fill="{fill}"/>'
                )
            parts.append("</g>")
            for lab in ("attracted", "blown_up", "undecided"):
                if lab in labels:
                    legend.append((lab, _BASIN_FILL[lab], "rect"))

        for i, (label, pts) in enumerate(self._regions):
            color = _REGION_COLORS[i % len(_REGION_COLORS)]
            coords = " ".join(f"{_fmt(px)},{_fmt(py)}" for px, py in (to_screen(x, y) for x, y in pts))
            parts.append(
                f'<polygon points="{coords}" fill="{color}" fill-opacity="0.12" '
                f'stroke="{color}" stroke-width="1.5"/>'
            )
            legend.append((label, color, "line"))

        for i, (label, xs, ys) in enumerate(self._curves):
            color = _CURVE_COLORS[i % len(_CURVE_COLORS)]
            coords = " ".join(f"{_fmt(px)},{_fmt(py)}" for px, py in (to_screen(x, y) for x, y in zip(xs, ys)))
            parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.2"/>')
            legend.append((label, color, "line"))

        if legend:
            parts.append(f'<rect x="8" y="8" width="210" height="{_fmt(16 * len(legend) + 10)}" '
                         'fill="#ffffff" fill-opacity="0.85" stroke="#888888" stroke-width="0.5"/>')
            for i, (label, color, shape) in enumerate(legend):
                cy = 18 + 16 * i
                if shape == "rect":
                    parts.append(f'<rect x="14" y="{_fmt(cy - 7)}" width="14" height="10" fill="{color}"/>')
                else:
                    parts.append(
                        f'<line x1="14" y1="{_fmt(cy - 2)}" x2="28" y2="{_fmt(cy - 2)}" '
                        f'stroke="{color}" stroke-width="2"/>'
                    )
                parts.append(f'<text x="34" y="{_fmt(cy + 2)}" font-size="11" font-family="monospace">{label}</text>')

        parts.append("</svg>")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(parts) + "\n")
