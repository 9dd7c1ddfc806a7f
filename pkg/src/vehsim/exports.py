"""Post-processing exports: space-time tables and SVG map rendering.

Both exporters work from plain data (trace samples, a parsed road graph) and
know nothing about the simulation loop, so they can be applied to stored
trace files long after a run.
"""

from __future__ import annotations

import math
from typing import Iterable, Protocol

from .osm import RoadGraph

DEFAULT_MAX_RESIDUAL_M = 15.0
_POINT_EPS = 1e-6


class ExportError(Exception):
    """The requested export is not applicable to the given data."""


class _PositionedSample(Protocol):
    t: float
    vehicle_id: int
    x: float
    y: float


def _polyline_of(points: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Drop consecutive duplicates so segments all have positive length."""
    out: list[tuple[float, float]] = []
    for p in points:
        if not out or math.hypot(p[0] - out[-1][0], p[1] - out[-1][1]) > _POINT_EPS:
            out.append(p)
    return out


def _project_to_polyline(
    poly: list[tuple[float, float]], x: float, y: float
) -> tuple[float, float]:
    """(arc length, perpendicular residual) of the closest point on ``poly``.

    The first and last segments extend tangentially beyond their endpoints,
    so points slightly before the start (negative arc) or past the end still
    project with a purely perpendicular residual instead of an inflated
    endpoint distance.
    """
    best_res = math.inf
    best_arc = 0.0
    cum = 0.0
    last = len(poly) - 2
    for i in range(len(poly) - 1):
        (px, py), (qx, qy) = poly[i], poly[i + 1]
        dx, dy = qx - px, qy - py
        length = math.hypot(dx, dy)
        u = ((x - px) * dx + (y - py) * dy) / (length * length)
        if i > 0 and u < 0.0:
            u = 0.0
        if i < last and u > 1.0:
            u = 1.0
        cx, cy = px + u * dx, py + u * dy
        res = math.hypot(x - cx, y - cy)
        if res < best_res - 1e-12:
            best_res = res
            best_arc = cum + u * length
        cum += length
    return best_arc, best_res


def export_spacetime(
    samples: Iterable[_PositionedSample],
    *,
    max_residual_m: float = DEFAULT_MAX_RESIDUAL_M,
) -> list[tuple[float, int, float]]:
    """Collapse a single-corridor trace to (t, vehicle_id, arc length) rows.

    The corridor axis is taken from the sampled path of the vehicle that
    covered the most ground; every sample of every vehicle is then projected
    onto that axis.  A sample farther than ``max_residual_m`` from the axis
    means the vehicles did not share one corridor and the export refuses
    rather than emit misleading positions.  Arc length per vehicle is made
    monotone (projection jitter near the axis ends cannot move a vehicle
    backwards).  Rows come out sorted by (t, vehicle_id).
    """
    by_vehicle: dict[int, list[_PositionedSample]] = {}
    for s in samples:
        by_vehicle.setdefault(s.vehicle_id, []).append(s)
    if not by_vehicle:
        raise ExportError("no trace samples to export")
    for rows in by_vehicle.values():
        rows.sort(key=lambda s: s.t)

    def path_length(rows: list[_PositionedSample]) -> float:
        return sum(
            math.hypot(b.x - a.x, b.y - a.y) for a, b in zip(rows, rows[1:])
        )

    ref_id = max(by_vehicle, key=lambda vid: (path_length(by_vehicle[vid]), -vid))
    poly = _polyline_of([(s.x, s.y) for s in by_vehicle[ref_id]])

    out: list[tuple[float, int, float]] = []
    for vid in sorted(by_vehicle):
        arc_prev = -math.inf
        for s in by_vehicle[vid]:
            if len(poly) < 2:
                arc = math.hypot(s.x - poly[0][0], s.y - poly[0][1])
            else:
                arc, residual = _project_to_polyline(poly, s.x, s.y)
                if residual > max_residual_m:
                    raise ExportError(
                        f"vehicle {vid} at t={s.t:g} lies {residual:.1f} m off the "
                        "corridor axis; space-time export only supports "
                        "single-corridor scenarios"
                    )
            arc = max(arc, arc_prev)
            arc_prev = arc
            out.append((s.t, vid, arc))
    out.sort(key=lambda row: (row[0], row[1]))
    return out


def write_spacetime_csv(rows: list[tuple[float, int, float]], path: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("t,vehicle_id,s\n")
        for t, vid, arc in rows:
            fh.write(f"{t:g},{vid},{arc:.3f}\n")


def export_svg(
    graph: RoadGraph,
    trace: Iterable[_PositionedSample] | None = None,
    *,
    size: float = 1000.0,
    margin: float = 20.0,
) -> str:
    """Render the road network as an SVG document, optionally with vehicle paths.

    One polyline per way, drawn through all its node refs in map coordinates
    (y axis flipped to screen orientation); the longer map extent is scaled to
    ``size`` pixels.  Trace samples, when given, appear as one colored
    polyline per vehicle.
    """
    if not graph.ways:
        raise ExportError("graph has no ways to draw")
    min_x, min_y, max_x, max_y = graph.bounds()
    scale = size / max(max_x - min_x, max_y - min_y, 1e-9)

    def to_svg(x: float, y: float) -> tuple[float, float]:
        return margin + (x - min_x) * scale, margin + (max_y - y) * scale

    width = (max_x - min_x) * scale + 2 * margin
    height = (max_y - min_y) * scale + 2 * margin

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width:.1f}" height="{height:.1f}" '
        f'viewBox="0 0 {width:.1f} {height:.1f}">',
        f'<rect width="{width:.1f}" height="{height:.1f}" fill="white"/>',
    ]
    for way_id in sorted(graph.ways):
        way = graph.ways[way_id]
        pts = " ".join(
            "{:.2f},{:.2f}".format(*to_svg(graph.node(ref).x, graph.node(ref).y))
            for ref in way.node_refs
        )
        parts.append(
            f'<polyline fill="none" stroke="#555555" stroke-width="2" points="{pts}"/>'
        )
    if trace is not None:
        by_vehicle: dict[int, list[_PositionedSample]] = {}
        for s in trace:
            by_vehicle.setdefault(s.vehicle_id, []).append(s)
        for vid in sorted(by_vehicle):
            rows = sorted(by_vehicle[vid], key=lambda s: s.t)
            pts = " ".join(
                "{:.2f},{:.2f}".format(*to_svg(s.x, s.y)) for s in rows
            )
            parts.append(
                f'<polyline fill="none" stroke="#cc2222" stroke-width="1" points="{pts}"/>'
            )
    parts.append("</svg>")
    return "\n".join(parts)
