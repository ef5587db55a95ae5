"""Optimal grid routing over cost maps and per-class cost attribution.

Edges connect 8-neighbors; an edge s -> s' costs

    len(s, s') * [ blend * (cost(s) + cost(s')) / 2 + (1 - blend) * 1 ]

with len 1 for straight and sqrt(2) for diagonal moves. blend = 0 is pure
shortest-distance routing, blend = 1 pure learned cost. Each edge's cost
splits into two half-edges attributed to its endpoint cells, which makes the
per-class decomposition of a route's total cost exact.

Tie-breaking is deterministic: minimal (total cost, total distance), then
the lexicographically smallest cell sequence.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, NoRouteError
from .irl import CostMap
from .rasters import LabelPalette, SemanticRaster

SQRT2 = math.sqrt(2.0)

_NEIGHBORS = (
    (-1, -1, SQRT2),
    (-1, 0, 1.0),
    (-1, 1, SQRT2),
    (0, -1, 1.0),
    (0, 1, 1.0),
    (1, -1, SQRT2),
    (1, 0, 1.0),
    (1, 1, SQRT2),
)


@dataclass(frozen=True)
class RouteQuery:
    start: tuple[int, int]
    goal: tuple[int, int]
    profile: str = "safe"
    blend: float = 1.0

    def __post_init__(self):
        if tuple(self.start) == tuple(self.goal):
            raise ValueError("start and goal must differ")
        if not 0.0 <= self.blend <= 1.0:
            raise ValueError("blend must lie in [0, 1]")


@dataclass(frozen=True)
class RoutePlan:
    path: tuple[tuple[int, int], ...]
    total_cost: float
    total_distance: float
    cell_costs: tuple[float, ...]  # half-edge attribution per path cell

    def to_dict(self) -> dict:
        return {
            "path": [list(cell) for cell in self.path],
            "total_cost": self.total_cost,
            "total_distance": self.total_distance,
        }


@dataclass(frozen=True)
class ClassShare:
    cells_on_alternative: int
    cost_share_alternative: float
    cells_on_chosen: int
    cost_share_chosen: float


@dataclass(frozen=True)
class Explanation:
    chosen: RoutePlan
    alternative: RoutePlan
    per_class_attribution: dict[str, ClassShare]
    top_class: str | None
    summary: str

    def to_dict(self) -> dict:
        return {
            "alternative": self.alternative.to_dict(),
            "per_class_attribution": {
                name: {
                    "cells_on_alternative": share.cells_on_alternative,
                    "cost_share_alternative": share.cost_share_alternative,
                    "cells_on_chosen": share.cells_on_chosen,
                    "cost_share_chosen": share.cost_share_chosen,
                }
                for name, share in self.per_class_attribution.items()
            },
            "top_class": self.top_class,
            "summary": self.summary,
        }


def _check_bounds(costmap: CostMap, cell: tuple[int, int], what: str) -> None:
    r, c = cell
    if not (0 <= r < costmap.height and 0 <= c < costmap.width):
        raise ValueError(f"{what} {cell} outside {costmap.width}x{costmap.height} grid")


def _half_edge(cost: float, blend: float, length: float) -> float:
    return length / 2.0 * (blend * cost + (1.0 - blend))


def _edge_weight(ca: float, cb: float, blend: float, length: float) -> float:
    return _half_edge(ca, blend, length) + _half_edge(cb, blend, length)


def plan(costmap: CostMap, query: RouteQuery) -> RoutePlan:
    """Dijkstra with deterministic tie-breaking; minimal blended cost."""
    _check_bounds(costmap, query.start, "start")
    _check_bounds(costmap, query.goal, "goal")
    height, width = costmap.height, costmap.width
    cost = costmap.cost
    blend = query.blend

    # Labels grow from the goal so the path reconstruction can walk forward
    # from the start picking the lexicographically smallest optimal step.
    best_cost = np.full((height, width), np.inf)
    best_dist = np.full((height, width), np.inf)
    gr, gc = query.goal
    best_cost[gr, gc] = 0.0
    best_dist[gr, gc] = 0.0
    heap = [(0.0, 0.0, gr, gc)]
    while heap:
        d_cost, d_dist, r, c = heapq.heappop(heap)
        if (d_cost, d_dist) > (best_cost[r, c], best_dist[r, c]):
            continue
        here = cost[r, c]
        if not math.isfinite(here):
            continue
        for dr, dc, length in _NEIGHBORS:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < height and 0 <= nc < width):
                continue
            weight = _edge_weight(cost[nr, nc], here, blend, length)
            if not math.isfinite(weight):
                continue
            cand = (weight + d_cost, length + d_dist)
            if cand < (best_cost[nr, nc], best_dist[nr, nc]):
                best_cost[nr, nc], best_dist[nr, nc] = cand
                heapq.heappush(heap, (cand[0], cand[1], nr, nc))

    sr, sc = query.start
    if not math.isfinite(best_cost[sr, sc]):
        raise NoRouteError(f"goal {query.goal} unreachable from start {query.start}")

    path = [(sr, sc)]
    r, c = sr, sc
    while (r, c) != (gr, gc):
        step = None
        for nr, nc in sorted(
            (r + dr, c + dc) for dr, dc, _ in _NEIGHBORS
        ):
            if not (0 <= nr < height and 0 <= nc < width):
                continue
            length = 1.0 if (nr == r or nc == c) else SQRT2
            weight = _edge_weight(cost[nr, nc], cost[r, c], blend, length)
            if (
                weight + best_cost[nr, nc] == best_cost[r, c]
                and length + best_dist[nr, nc] == best_dist[r, c]
            ):
                step = (nr, nc)
                break
        if step is None:  # pragma: no cover - contradiction with Dijkstra labels
            raise NoRouteError(f"reconstruction stalled at {(r, c)}")
        path.append(step)
        r, c = step

    # Totals come from the Dijkstra labels (right-nested sums from the goal);
    # _assemble_plan only contributes the per-cell attribution.
    assembled = _assemble_plan(costmap, tuple(path), blend)
    return RoutePlan(
        path=assembled.path,
        total_cost=float(best_cost[sr, sc]),
        total_distance=float(best_dist[sr, sc]),
        cell_costs=assembled.cell_costs,
    )


def _assemble_plan(
    costmap: CostMap, path: tuple[tuple[int, int], ...], blend: float
) -> RoutePlan:
    cost = costmap.cost
    attribution = [0.0] * len(path)
    total_cost = 0.0
    total_dist = 0.0
    for i in range(len(path) - 1):
        (r0, c0), (r1, c1) = path[i], path[i + 1]
        length = 1.0 if (r0 == r1 or c0 == c1) else SQRT2
        half_a = _half_edge(cost[r0, c0], blend, length)
        half_b = _half_edge(cost[r1, c1], blend, length)
        attribution[i] += half_a
        attribution[i + 1] += half_b
        total_cost += half_a + half_b
        total_dist += length
    return RoutePlan(
        path=path,
        total_cost=total_cost,
        total_distance=total_dist,
        cell_costs=tuple(attribution),
    )


def evaluate_path(
    costmap: CostMap, path: tuple[tuple[int, int], ...], blend: float
) -> RoutePlan:
    """Recost an existing route geometry under a (possibly different) blend."""
    for i in range(len(path) - 1):
        dr = path[i + 1][0] - path[i][0]
        dc = path[i + 1][1] - path[i][1]
        if (dr, dc) == (0, 0) or abs(dr) > 1 or abs(dc) > 1:
            raise ValueError(f"path step {i} is not 8-adjacent")
    for cell in path:
        _check_bounds(costmap, cell, "path cell")
    return _assemble_plan(costmap, tuple(tuple(c) for c in path), blend)


def shortest_distance_path(
    width: int, height: int, query: RouteQuery
) -> RoutePlan:
    """Pure distance planning (blend 0) with the same tie-breaking."""
    uniform = CostMap(width=width, height=height, cost=np.ones((height, width)))
    zero_blend = RouteQuery(
        start=query.start, goal=query.goal, profile=query.profile, blend=0.0
    )
    return plan(uniform, zero_blend)


def explain(
    chosen: RoutePlan,
    alternative: RoutePlan,
    semantic: SemanticRaster,
    palette: LabelPalette,
) -> Explanation:
    """Attribute both routes' costs to semantic classes and render a summary."""
    if chosen.path[0] != alternative.path[0] or chosen.path[-1] != alternative.path[-1]:
        raise ValueError("chosen and alternative plans must share endpoints")
    for cell in chosen.path + alternative.path:
        r, c = cell
        if not (0 <= r < semantic.height and 0 <= c < semantic.width):
            raise DimensionMismatchError(f"path cell {cell} outside the semantic raster")

    def shares_of(route: RoutePlan) -> tuple[dict[int, float], dict[int, int]]:
        shares: dict[int, float] = {}
        counts: dict[int, int] = {}
        for cell, cell_cost in zip(route.path, route.cell_costs):
            class_id = int(semantic.data[cell[0], cell[1]])
            shares[class_id] = shares.get(class_id, 0.0) + cell_cost
            counts[class_id] = counts.get(class_id, 0) + 1
        return shares, counts

    chosen_shares, chosen_counts = shares_of(chosen)
    alt_shares, alt_counts = shares_of(alternative)
    class_ids = sorted(set(chosen_shares) | set(alt_shares))
    attribution = {
        palette.name_of(cid): ClassShare(
            cells_on_alternative=alt_counts.get(cid, 0),
            cost_share_alternative=alt_shares.get(cid, 0.0),
            cells_on_chosen=chosen_counts.get(cid, 0),
            cost_share_chosen=chosen_shares.get(cid, 0.0),
        )
        for cid in class_ids
    }

    if chosen.path == alternative.path:
        return Explanation(
            chosen=chosen,
            alternative=alternative,
            per_class_attribution=attribution,
            top_class=None,
            summary="The shortest route is also the lowest-cost route.",
        )

    top_id = max(
        class_ids,
        key=lambda cid: (
            alt_shares.get(cid, 0.0) - chosen_shares.get(cid, 0.0),
            -cid,
        ),
    )
    top_name = palette.name_of(top_id)
    avoided = alt_counts.get(top_id, 0) - chosen_counts.get(top_id, 0)
    percent = 100.0 * alt_shares.get(top_id, 0.0) / alternative.total_cost
    longer = chosen.total_distance - alternative.total_distance
    cheaper = alternative.total_cost - chosen.total_cost
    summary = (
        f"Route avoids {avoided} cells of '{top_name}', which contribute "
        f"{percent:.1f}% of the alternative's cost; chosen route is "
        f"{longer:.2f} steps longer and {cheaper:.4g} cheaper."
    )
    return Explanation(
        chosen=chosen,
        alternative=alternative,
        per_class_attribution=attribution,
        top_class=top_name,
        summary=summary,
    )


def plan_to_json(plan_result: RoutePlan, explanation: Explanation | None = None) -> str:
    doc = plan_result.to_dict()
    doc["explanation"] = explanation.to_dict() if explanation is not None else None
    return json.dumps(doc)
