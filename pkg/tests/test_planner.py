import math

import numpy as np
import pytest

from semnav.errors import NoRouteError
from semnav.irl import CostMap
from semnav.planner import (
    SQRT2,
    RouteQuery,
    evaluate_path,
    explain,
    plan,
    shortest_distance_path,
)
from semnav.rasters import LabelPalette, PaletteClass, SemanticRaster


def uniform_map(width, height, value=1.0):
    return CostMap(width=width, height=height, cost=np.full((height, width), value))


def cost_map_from(array):
    arr = np.asarray(array, dtype=np.float64)
    return CostMap(width=arr.shape[1], height=arr.shape[0], cost=arr)


def brute_force_optimum(costmap, query):
    """Min blended cost over all simple paths, enumerated with branch & bound.

    Costs accumulate goal-backwards (weight + suffix) so the optimal value is
    built with the same floating-point additions as the planner's labels.
    """
    height, width = costmap.height, costmap.width
    cost = costmap.cost
    blend = query.blend
    goal = tuple(query.goal)
    best = [math.inf]

    def edge(a, b):
        # Same floating-point expression as the planner's two half-edges.
        length = 1.0 if (a[0] == b[0] or a[1] == b[1]) else SQRT2
        return length / 2.0 * (blend * cost[a] + (1.0 - blend)) + length / 2.0 * (
            blend * cost[b] + (1.0 - blend)
        )

    def recurse(cell, visited, partial):
        if partial > best[0] + 1e-9:
            return math.inf
        if cell == goal:
            best[0] = min(best[0], partial)
            return 0.0
        suffix = math.inf
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                if dr == dc == 0:
                    continue
                nxt = (cell[0] + dr, cell[1] + dc)
                if not (0 <= nxt[0] < height and 0 <= nxt[1] < width):
                    continue
                if nxt in visited:
                    continue
                w = edge(cell, nxt)
                sub = recurse(nxt, visited | {nxt}, partial + w)
                if w + sub < suffix:
                    suffix = w + sub
        return suffix

    start = tuple(query.start)
    return recurse(start, {start}, 0.0)


# ---------------------------------------------------------------------------
# plan
# ---------------------------------------------------------------------------


def test_straight_row_uniform_cost():
    cm = uniform_map(5, 3, value=2.0)
    result = plan(cm, RouteQuery(start=(1, 0), goal=(1, 4), blend=1.0))
    assert result.path == ((1, 0), (1, 1), (1, 2), (1, 3), (1, 4))
    assert result.total_distance == pytest.approx(4.0)
    assert result.total_cost == pytest.approx(8.0)


def test_blend_zero_ignores_costs():
    rng = np.random.default_rng(0)
    cm = cost_map_from(rng.uniform(0.5, 5.0, size=(4, 6)))
    a = plan(cm, RouteQuery(start=(0, 0), goal=(3, 5), blend=0.0))
    b = shortest_distance_path(6, 4, RouteQuery(start=(0, 0), goal=(3, 5)))
    assert a.path == b.path
    assert a.total_cost == pytest.approx(a.total_distance)


def test_diagonal_distance():
    result = shortest_distance_path(4, 4, RouteQuery(start=(0, 0), goal=(3, 3)))
    assert result.total_distance == pytest.approx(3 * SQRT2)
    assert len(result.path) == 4


def test_adjacent_cells():
    result = shortest_distance_path(3, 3, RouteQuery(start=(1, 1), goal=(1, 2)))
    assert result.path == ((1, 1), (1, 2))
    assert result.total_distance == pytest.approx(1.0)


def test_detour_around_expensive_band():
    grid = np.ones((5, 5))
    grid[:, 2] = 50.0  # expensive wall, no gap: detour is impossible, so the
    # planner must cross it; with a gap it must use the gap.
    grid[4, 2] = 1.0
    cm = cost_map_from(grid)
    result = plan(cm, RouteQuery(start=(0, 0), goal=(0, 4), blend=1.0))
    assert (4, 2) in result.path
    assert all(cell == (4, 2) or cell[1] != 2 for cell in result.path)


def test_infinite_cells_block():
    grid = np.ones((3, 3))
    grid[:, 1] = np.inf
    cm = cost_map_from(grid)
    with pytest.raises(NoRouteError):
        plan(cm, RouteQuery(start=(0, 0), goal=(0, 2), blend=1.0))


def test_plan_deterministic():
    rng = np.random.default_rng(5)
    cm = cost_map_from(rng.uniform(0.2, 3.0, size=(6, 6)))
    q = RouteQuery(start=(5, 0), goal=(0, 5), blend=0.7)
    assert plan(cm, q) == plan(cm, q)


def test_exhaustive_oracle_small_grids():
    rng = np.random.default_rng(17)
    for trial in range(40):
        width = int(rng.integers(2, 6))
        height = int(rng.integers(2, 6))
        cm = cost_map_from(rng.uniform(0.3, 4.0, size=(height, width)))
        cells = [(r, c) for r in range(height) for c in range(width)]
        start, goal = cells[0], cells[-1]
        if trial % 3 == 0:
            start = tuple(int(v) for v in (rng.integers(height), rng.integers(width)))
            goal = tuple(int(v) for v in (rng.integers(height), rng.integers(width)))
            if start == goal:
                continue
        blend = float(rng.choice([0.0, 0.5, 1.0]))
        query = RouteQuery(start=start, goal=goal, blend=blend)
        result = plan(cm, query)
        assert result.total_cost == brute_force_optimum(cm, query)


def test_metric_consistency():
    rng = np.random.default_rng(23)
    cm = cost_map_from(rng.uniform(0.5, 2.0, size=(7, 7)))
    result = plan(cm, RouteQuery(start=(6, 0), goal=(0, 6), blend=0.8))
    total = 0.0
    for i in range(len(result.path) - 1):
        a, b = result.path[i], result.path[i + 1]
        length = 1.0 if (a[0] == b[0] or a[1] == b[1]) else SQRT2
        total += length * (0.8 * (cm.cost[a] + cm.cost[b]) / 2.0 + 0.2)
    assert result.total_cost == pytest.approx(total, abs=1e-9)
    assert sum(result.cell_costs) == pytest.approx(result.total_cost, abs=1e-9)


def test_class_cost_monotonicity():
    rng = np.random.default_rng(31)
    semantic = SemanticRaster(6, 6, rng.integers(0, 3, size=(6, 6)).astype(np.uint8))
    base = rng.uniform(0.5, 2.0, size=(6, 6))
    query = RouteQuery(start=(5, 0), goal=(0, 5), blend=1.0)
    previous = plan(cost_map_from(base), query).total_cost
    for bump in (0.5, 1.5, 4.0):
        raised = base + np.where(semantic.data == 1, bump, 0.0)
        current = plan(cost_map_from(raised), query).total_cost
        assert current >= previous - 1e-12
        previous = current


# ---------------------------------------------------------------------------
# explain
# ---------------------------------------------------------------------------


def small_palette():
    return LabelPalette(
        (
            PaletteClass(0, "grass", (0, 200, 0)),
            PaletteClass(1, "flooded", (0, 0, 255)),
        )
    )


def test_explain_identity():
    cm = uniform_map(4, 4)
    query = RouteQuery(start=(0, 0), goal=(0, 3), blend=1.0)
    chosen = plan(cm, query)
    alternative = evaluate_path(cm, shortest_distance_path(4, 4, query).path, 1.0)
    result = explain(
        chosen,
        alternative,
        SemanticRaster(4, 4, np.zeros((4, 4), dtype=np.uint8)),
        small_palette(),
    )
    assert result.top_class is None
    assert result.summary == "The shortest route is also the lowest-cost route."
    assert result.per_class_attribution["grass"].cost_share_chosen == pytest.approx(
        result.per_class_attribution["grass"].cost_share_alternative
    )


def test_explain_flooded_band():
    # 5x5 map, straight row 2 crossed by a 3-cell flooded band of cost 10.
    semantic_grid = np.zeros((5, 5), dtype=np.uint8)
    semantic_grid[1:4, 2] = 1  # flooded column segment
    cost_grid = np.ones((5, 5))
    cost_grid[1:4, 2] = 10.0
    cm = cost_map_from(cost_grid)
    query = RouteQuery(start=(2, 0), goal=(2, 4), blend=1.0)

    chosen = plan(cm, query)
    alt_geometry = shortest_distance_path(5, 5, query)
    alternative = evaluate_path(cm, alt_geometry.path, query.blend)
    result = explain(
        chosen, alternative, SemanticRaster(5, 5, semantic_grid), small_palette()
    )

    assert result.top_class == "flooded"
    flooded = result.per_class_attribution["flooded"]
    # The straight path spends one unit-length edge entering and one leaving
    # the flooded cell (2,2): its half-edge share is 10/2 + 10/2 = 10.
    assert flooded.cells_on_alternative == 1
    assert flooded.cost_share_alternative == pytest.approx(10.0)
    assert flooded.cells_on_chosen == 0
    # Partition exactness for both routes.
    for route, key in ((chosen, "cost_share_chosen"), (alternative, "cost_share_alternative")):
        total = sum(
            getattr(share, key) for share in result.per_class_attribution.values()
        )
        assert total == pytest.approx(route.total_cost, abs=1e-9)
    assert "flooded" in result.summary


def test_explain_endpoint_mismatch():
    cm = uniform_map(4, 4)
    a = plan(cm, RouteQuery(start=(0, 0), goal=(3, 3), blend=1.0))
    b = plan(cm, RouteQuery(start=(0, 1), goal=(3, 3), blend=1.0))
    with pytest.raises(ValueError):
        explain(a, b, SemanticRaster(4, 4, np.zeros((4, 4), dtype=np.uint8)), small_palette())


def test_shortest_distance_equals_plan_lambda_zero():
    rng = np.random.default_rng(41)
    for _ in range(10):
        cm = cost_map_from(rng.uniform(0.1, 9.0, size=(5, 7)))
        query = RouteQuery(start=(4, 0), goal=(0, 6), blend=0.0)
        assert plan(cm, query).path == shortest_distance_path(7, 5, query).path


def test_query_validation():
    with pytest.raises(ValueError):
        RouteQuery(start=(1, 1), goal=(1, 1))
    with pytest.raises(ValueError):
        RouteQuery(start=(0, 0), goal=(1, 1), blend=1.5)
    with pytest.raises(ValueError):
        plan(uniform_map(3, 3), RouteQuery(start=(0, 0), goal=(5, 5)))
