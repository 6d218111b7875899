"""Shared closed-region representation: parameterized boundary arcs with
inward normals, plus the sampled inward-flux verifier used to certify
trapping regions.

Membership of every concrete region is decided by its defining
inequalities (the ``contains`` callable), never by point-in-polygon tests
on the rendered boundary; polylines exist for export and plotting only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .model import ForcingBounds, SystemConfig, forcing_eval

__all__ = ["Arc", "RegionSpec", "verify_inward_flux", "write_region_json", "write_region_polylines"]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Arc:
    """One boundary piece: a map from [0, 1] to the plane with an inward
    normal, the field that governs its flux check ('low', 'high', 'both',
    or 'none' for artificial cuts like render-window edges), and export
    metadata."""

    formula_id: str
    point: Callable[[float], tuple[float, float]]
    inward_normal: Callable[[float], tuple[float, float]]
    governing: str
    domain: tuple[float, float] = (0.0, 1.0)
    coeffs: dict = field(default_factory=dict)

    def sample(self, n: int) -> np.ndarray:
        ss = np.linspace(0.0, 1.0, n)
        return np.array([self.point(float(s)) for s in ss])


@dataclass(frozen=True)
class RegionSpec:
    """Closed planar region given by arcs and an analytic membership
    predicate."""

    kind: str
    params: dict
    arcs: tuple
    contains_fn: Callable[[float, float], bool]

    def contains(self, x: float, y: float) -> bool:
        return bool(self.contains_fn(float(x), float(y)))

    def closure_gap(self) -> float:
        """Largest endpoint mismatch between consecutive arcs."""
        worst = 0.0
        n = len(self.arcs)
        for i in range(n):
            x1, y1 = self.arcs[i].point(1.0)
            x0, y0 = self.arcs[(i + 1) % n].point(0.0)
            worst = max(worst, math.hypot(x1 - x0, y1 - y0))
        return worst

    def polyline(self, per_arc: int = 256) -> np.ndarray:
        pieces = [arc.sample(per_arc) for arc in self.arcs]
        return np.vstack(pieces)

    def bounding_box(self, per_arc: int = 256):
        pts = self.polyline(per_arc)
        return float(pts[:, 0].min()), float(pts[:, 0].max()), float(pts[:, 1].min()), float(pts[:, 1].max())


def _phase_sample(cfg: SystemConfig, n_times: int) -> np.ndarray:
    mus = [abs(cfg.freq.dot(nu)) for nu, _ in cfg.forcing.modes() if any(nu)]
    span = 2.0 * math.pi / min(mus) if mus else 1.0
    if cfg.freq.dim > 1:
        span *= 30.0
    j = np.arange(n_times, dtype=np.float64)
    return span * ((j + 0.5) * _GOLDEN % 1.0)


def verify_inward_flux(
    region: RegionSpec,
    cfg: SystemConfig,
    bounds: ForcingBounds,
    n_boundary: int = 1000,
    n_times: int = 100,
    tol: float = 1e-9,
) -> dict:
    """Sampled inward flux of the governing fields through each arc.

    Curved arcs are checked against their designated frozen-forcing
    extreme (the worst case for them); straight edges against both
    extremes and the true field over forcing phases.  Pass iff the minimum
    unit-normal flux stays above -tol.  Arcs with governing 'none' are
    excluded from the verdict but reported.
    """
    gamma = cfg.gamma
    ts = _phase_sample(cfg, n_times)
    f_vals = np.array([forcing_eval(cfg.forcing, cfg.freq, float(t)) for t in ts])

    worst = math.inf
    per_arc = []
    total = 0
    for arc in region.arcs:
        ss = np.linspace(0.0, 1.0, n_boundary)
        pts = np.array([arc.point(float(s)) for s in ss])
        nrm = np.array([arc.inward_normal(float(s)) for s in ss])
        nrm = nrm / np.maximum(np.hypot(nrm[:, 0], nrm[:, 1]), 1e-300)[:, None]
        x, y = pts[:, 0], pts[:, 1]
        gx = np.array([cfg.g.value(float(v)) for v in x])

        def flux(force):
            return nrm[:, 0] * y + nrm[:, 1] * (force - gamma * y - gx)

        candidates = []
        n_arc = 0
        if arc.governing in ("low", "both"):
            candidates.append(float(flux(bounds.f_low).min()))
            n_arc += n_boundary
        if arc.governing in ("high", "both"):
            candidates.append(float(flux(bounds.f_up).min()))
            n_arc += n_boundary
        if arc.governing == "both":
            fl = nrm[:, 0][:, None] * y[:, None] + nrm[:, 1][:, None] * (
                f_vals[None, :] - gamma * y[:, None] - gx[:, None]
            )
            candidates.append(float(fl.min()))
            n_arc += n_boundary * n_times
        arc_min = min(candidates) if candidates else math.nan
        total += n_arc
        per_arc.append({"formula_id": arc.formula_id, "governing": arc.governing, "min_flux": arc_min})
        if arc.governing != "none":
            worst = min(worst, arc_min)

    return {
        "check": f"inward_flux:{region.kind}",
        "pass": bool(worst >= -tol),
        "worst_margin": worst,
        "samples": total,
        "arcs": per_arc,
        "params": dict(region.params),
    }


def write_region_json(region: RegionSpec, path) -> None:
    doc = {
        "kind": region.kind,
        "params": region.params,
        "arcs": [
            {"formula_id": a.formula_id, "domain": list(a.domain), "coeffs": a.coeffs} for a in region.arcs
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


def write_region_polylines(region: RegionSpec, directory, per_arc: int = 256) -> list:
    """One CSV polyline per arc; returns the written paths."""
    import os

    paths = []
    for i, arc in enumerate(region.arcs):
        path = os.path.join(str(directory), f"{region.kind}_arc{i}_{arc.formula_id}.csv")
        pts = arc.sample(per_arc)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("x,y\n")
            for row in pts:
                fh.write(f"{row[0]:.17g},{row[1]:.17g}\n")
        paths.append(path)
    return paths
