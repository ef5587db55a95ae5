"""Seeded synthetic benchmarks: textured shape rasters and a flood scenario.

Everything is generated from the package SplitMix64 stream, so a seed fully
determines every output byte. Classes are distinguishable by base color and
texture but carry per-image appearance jitter plus pixel noise, which keeps
the classification tasks non-trivial and gives the few-shot cosine weighting
a real signal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .irl import CostMap, Demonstration, demos_to_json
from .planner import RouteQuery, plan
from .rasters import (
    UNLABELED,
    BinaryMask,
    ImageRaster,
    LabelPalette,
    PaletteClass,
    SemanticRaster,
    SparseLabelRaster,
    save_image,
    save_mask,
    save_sparse_labels,
)
from .rng import SplitMix64

SHAPES_SIZE = 128
SHAPES_COUNT = 20

# name, display color, base RGB, noise amplitude, texture kind
_CLASS_STYLES = (
    ("field", (60, 140, 50), (0.24, 0.50, 0.20), 0.050, "plain"),
    ("road", (120, 120, 125), (0.45, 0.45, 0.47), 0.020, "plain"),
    ("water", (30, 80, 180), (0.10, 0.30, 0.62), 0.030, "ripple"),
    ("building", (150, 75, 45), (0.58, 0.28, 0.18), 0.030, "checker"),
    ("sand", (210, 180, 110), (0.80, 0.68, 0.42), 0.070, "plain"),
)


def shapes_palette(n_classes: int = 5) -> LabelPalette:
    return LabelPalette(
        tuple(
            PaletteClass(i, _CLASS_STYLES[i][0], _CLASS_STYLES[i][1])
            for i in range(n_classes)
        )
    )


def _noise_grid(rng: SplitMix64, height: int, width: int) -> np.ndarray:
    return np.array(
        [rng.next_float() for _ in range(height * width)], dtype=np.float64
    ).reshape(height, width) - 0.5


def _texture(kind: str, height: int, width: int, phase: float) -> np.ndarray:
    rows = np.arange(height, dtype=np.float64)[:, None]
    cols = np.arange(width, dtype=np.float64)[None, :]
    if kind == "ripple":
        return 0.05 * np.sin(2.0 * math.pi * (rows / 6.0 + phase)) * np.ones((1, width))
    if kind == "checker":
        return 0.06 * (((rows // 4 + cols // 4) % 2) * 2.0 - 1.0)
    return np.zeros((height, width))


def render_class_map(
    class_map: np.ndarray, rng: SplitMix64, n_classes: int | None = None
) -> ImageRaster:
    """Textured RGB rendering of a class-id grid (jitter + noise from rng)."""
    height, width = class_map.shape
    if n_classes is None:
        n_classes = int(class_map.max()) + 1
    image = np.zeros((height, width, 3))
    jitters = [
        np.array([rng.uniform(-0.05, 0.05) for _ in range(3)]) for _ in range(n_classes)
    ]
    phases = [rng.next_float() for _ in range(n_classes)]
    noise = _noise_grid(rng, height, width)
    for class_id in range(n_classes):
        mask = class_map == class_id
        if not mask.any():
            continue
        _, _, base, amplitude, kind = _CLASS_STYLES[class_id % len(_CLASS_STYLES)]
        texture = _texture(kind, height, width, phases[class_id])
        plane = texture + 2.0 * amplitude * noise
        color = np.clip(np.array(base) + jitters[class_id], 0.05, 0.95)
        for channel in range(3):
            image[:, :, channel][mask] = (color[channel] + plane)[mask]
    return ImageRaster(width, height, 3, np.clip(image, 0.0, 1.0))


def _paint_shape(class_map: np.ndarray, rng: SplitMix64, class_id: int) -> None:
    height, width = class_map.shape
    rows = np.arange(height)[:, None]
    cols = np.arange(width)[None, :]
    kind = rng.randint(2)
    margin_r = min(8, height // 3)
    margin_c = min(8, width // 3)
    cr = margin_r + rng.randint(max(1, height - 2 * margin_r))
    cc = margin_c + rng.randint(max(1, width - 2 * margin_c))
    hr = max(3, height // 16) + rng.randint(max(1, height // 8 + 1))
    hc = max(3, width // 16) + rng.randint(max(1, width // 8 + 1))
    if kind == 0:  # rectangle
        region = (np.abs(rows - cr) <= hr) & (np.abs(cols - cc) <= hc)
    else:  # ellipse
        region = ((rows - cr) / hr) ** 2 + ((cols - cc) / hc) ** 2 <= 1.0
    class_map[region] = class_id


def gen_shapes_dataset(
    seed: int,
    count: int = SHAPES_COUNT,
    size: int = SHAPES_SIZE,
    n_classes: int = 5,
) -> tuple[list[tuple[ImageRaster, SparseLabelRaster]], LabelPalette]:
    """Fully labeled textured benchmark: `count` rasters of `size`^2 pixels."""
    rng = SplitMix64(seed)
    palette = shapes_palette(n_classes)
    items = []
    for _ in range(count):
        class_map = np.zeros((size, size), dtype=np.uint8)
        for _ in range(6 + rng.randint(4)):
            _paint_shape(class_map, rng, 1 + rng.randint(n_classes - 1))
        image = render_class_map(class_map, rng, n_classes)
        items.append((image, SparseLabelRaster(size, size, class_map.copy())))
    return items, palette


def _distinct_colors(rng: SplitMix64, count: int, min_dist: float = 0.28) -> list[np.ndarray]:
    """Random RGB bases with a minimum pairwise distance (rejection sampled)."""
    colors: list[np.ndarray] = []
    while len(colors) < count:
        candidate = np.array([rng.uniform(0.10, 0.90) for _ in range(3)])
        if all(np.linalg.norm(candidate - c) >= min_dist for c in colors):
            colors.append(candidate)
    return colors


def _render_styled(
    class_map: np.ndarray,
    styles: list[tuple[np.ndarray, float, str, float]],
    rng: SplitMix64,
) -> ImageRaster:
    """Like render_class_map but with explicit per-class styles
    (base color, noise amplitude, texture kind, per-image color jitter)."""
    height, width = class_map.shape
    image = np.zeros((height, width, 3))
    noise = _noise_grid(rng, height, width)
    for class_id, (base, amplitude, kind, jitter_amp) in enumerate(styles):
        mask = class_map == class_id
        if not mask.any():
            continue
        jitter = np.array([rng.uniform(-jitter_amp, jitter_amp) for _ in range(3)])
        phase = rng.next_float()
        plane = _texture(kind, height, width, phase) + 2.0 * amplitude * noise
        color = np.clip(base + jitter, 0.05, 0.95)
        for channel in range(3):
            image[:, :, channel][mask] = (color[channel] + plane)[mask]
    return ImageRaster(width, height, 3, np.clip(image, 0.0, 1.0))


def _paint_big_shape(class_map: np.ndarray, rng: SplitMix64, class_id: int) -> None:
    """Large fully-in-bounds shape: area dominates the blurred boundary."""
    height, width = class_map.shape
    rows = np.arange(height)[:, None]
    cols = np.arange(width)[None, :]
    kind = rng.randint(2)
    hr = height // 5 + rng.randint(max(1, height // 8))
    hc = width // 5 + rng.randint(max(1, width // 8))
    cr = hr + 2 + rng.randint(max(1, height - 2 * (hr + 2)))
    cc = hc + 2 + rng.randint(max(1, width - 2 * (hc + 2)))
    if kind == 0:
        region = (np.abs(rows - cr) <= hr) & (np.abs(cols - cc) <= hc)
    else:
        region = ((rows - cr) / hr) ** 2 + ((cols - cc) / hc) ** 2 <= 1.0
    class_map[region] = class_id


def gen_fewshot_dataset(
    seed: int, size: int = 64
) -> tuple[list[tuple[ImageRaster, SemanticRaster]], set[int], set[int]]:
    """Episode pool over many randomly colored classes.

    20 train classes (each in exactly 7 images, two classes per image) force
    the head to compare pixels against the conditioning prototype instead of
    memorizing class appearance; 2 held-out test classes appear in 8 images
    each with large shapes. Class colors are well separated; appearance
    jitters per image, so cosine weighting has signal.
    """
    rng = SplitMix64(seed)
    n_test = 2
    # Train-class colors tile the RGB cube (jittered 3x3x3 lattice) so any
    # held-out color has trained neighbors: no blind spots for the matcher.
    lattice = [0.20, 0.50, 0.80]
    train_colors = []
    for red in lattice:
        for green in lattice:
            for blue in lattice:
                jitter = np.array([rng.uniform(-0.04, 0.04) for _ in range(3)])
                train_colors.append(np.clip(np.array([red, green, blue]) + jitter, 0.08, 0.92))
    n_train = len(train_colors)  # 27
    background = np.array([0.22, 0.45, 0.20])
    test_colors = []
    while len(test_colors) < n_test:
        candidate = np.array([rng.uniform(0.12, 0.88) for _ in range(3)])
        if np.linalg.norm(candidate - background) >= 0.25 and all(
            np.linalg.norm(candidate - c) >= 0.2 for c in test_colors
        ):
            test_colors.append(candidate)

    kinds = ("plain", "ripple", "checker")
    styles = [(background, 0.04, "plain", 0.05)]
    styles += [
        (color, 0.03 + 0.02 * rng.next_float(), kinds[rng.randint(3)], 0.05)
        for color in train_colors
    ]
    # Test classes drift more between images: a lone random support can
    # mismatch the query, which is what the cosine-weighted fusion fixes.
    styles += [(color, 0.035, "plain", 0.12) for color in test_colors]

    slots = [1 + i % n_train for i in range(6 * n_train)]
    rng.shuffle(slots)
    dataset = []
    for i in range(0, len(slots), 2):
        class_map = np.zeros((size, size), dtype=np.uint8)
        _paint_shape(class_map, rng, slots[i])
        if slots[i + 1] != slots[i]:
            _paint_shape(class_map, rng, slots[i + 1])
        image = _render_styled(class_map, styles, rng)
        dataset.append((image, SemanticRaster(size, size, class_map.copy())))
    for i in range(8 * n_test):
        test_id = 1 + n_train + i % n_test
        class_map = np.zeros((size, size), dtype=np.uint8)
        if rng.randint(2):
            # company shape from a train class that is not color-adjacent
            choices = [
                c
                for c in range(1, 1 + n_train)
                if np.linalg.norm(styles[c][0] - styles[test_id][0]) >= 0.35
            ]
            _paint_shape(class_map, rng, choices[rng.randint(len(choices))])
        _paint_big_shape(class_map, rng, test_id)
        image = _render_styled(class_map, styles, rng)
        dataset.append((image, SemanticRaster(size, size, class_map.copy())))
    train_classes = set(range(1, 1 + n_train))
    test_classes = set(range(1 + n_train, 1 + n_train + n_test))
    return dataset, train_classes, test_classes


def write_shapes_dir(out: Path, seed: int) -> None:
    out = Path(out)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "labels").mkdir(parents=True, exist_ok=True)
    items, palette = gen_shapes_dataset(seed)
    (out / "palette.json").write_text(palette.to_json())
    for i, (image, labels) in enumerate(items):
        (out / "images" / f"shape_{i:03d}.ppm").write_bytes(save_image(image))
        (out / "labels" / f"shape_{i:03d}.pgm").write_bytes(save_sparse_labels(labels))


# ---------------------------------------------------------------------------
# flood scenario
# ---------------------------------------------------------------------------

FLOOD_SIZE = 64
# Ground-truth traversal costs used only to synthesize the demonstrations.
_TRUE_COSTS = {"road": 0.5, "grass": 2.0, "building": 8.0, "flooded": 60.0}


@dataclass
class FloodScene:
    image: ImageRaster
    palette: LabelPalette  # road/grass/building; "flooded" is learned later
    labels: SparseLabelRaster  # sparse, flood region left unlabeled
    truth: SemanticRaster  # 4-class ground truth (diagnostics)
    support: tuple[ImageRaster, BinaryMask]
    goal: tuple[int, int]
    demos: list[Demonstration]
    query: RouteQuery


def _flood_class_map(size: int) -> np.ndarray:
    # 0 road, 1 grass, 2 building, 3 flooded
    grid = np.ones((size, size), dtype=np.uint8)
    grid[30:33, :] = 0  # west-east road
    for r0, c0, h, w in ((6, 8, 8, 10), (8, 44, 9, 11), (48, 10, 9, 9), (50, 42, 8, 12)):
        grid[r0 : r0 + h, c0 : c0 + w] = 2
    grid[0:48, 26:34] = 3  # flood band cuts the road; gap in the south
    return grid


def gen_flood_scene(seed: int, size: int = FLOOD_SIZE) -> FloodScene:
    rng = SplitMix64(seed)
    truth_map = _flood_class_map(size)
    # Rendering styles are indexed road/grass/building/flooded.
    style_of = {0: 1, 1: 0, 2: 3, 3: 2}  # map scene classes onto _CLASS_STYLES rows
    render_ids = np.vectorize(style_of.get)(truth_map).astype(np.uint8)
    image = render_class_map(render_ids, rng, 5)

    palette = LabelPalette(
        (
            PaletteClass(0, "road", (120, 120, 125)),
            PaletteClass(1, "grass", (60, 140, 50)),
            PaletteClass(2, "building", (150, 75, 45)),
        )
    )

    labels = np.full((size, size), UNLABELED, dtype=np.uint8)
    for r in range(size):
        for c in range(size):
            if truth_map[r, c] != 3 and rng.next_float() < 0.10:
                labels[r, c] = truth_map[r, c]

    # Support patch: grass background with a water blob, same texture family.
    patch_map = np.zeros((48, 48), dtype=np.uint8)
    rows = np.arange(48)[:, None]
    cols = np.arange(48)[None, :]
    blob = ((rows - 24) / 13.0) ** 2 + ((cols - 22) / 16.0) ** 2 <= 1.0
    patch_map[blob] = 2  # rendered with the water style below
    support_image = render_class_map(patch_map, rng, 3)
    support_mask = BinaryMask(48, 48, blob)

    goal = (31, 58)
    true_cost = np.empty((size, size))
    for class_id, name in enumerate(("road", "grass", "building", "flooded")):
        true_cost[truth_map == class_id] = _TRUE_COSTS[name]
    costmap = CostMap(width=size, height=size, cost=true_cost)
    starts = [(31, 3), (18, 5), (44, 4), (10, 9), (52, 7), (26, 2), (38, 6), (31, 12)]
    demos = [
        Demonstration(path=plan(costmap, RouteQuery(start=s, goal=goal, blend=1.0)).path)
        for s in starts
    ]
    query = RouteQuery(start=(31, 2), goal=(31, 60), profile="safe", blend=1.0)

    return FloodScene(
        image=image,
        palette=palette,
        labels=SparseLabelRaster(size, size, labels),
        truth=SemanticRaster(size, size, truth_map),
        support=(support_image, support_mask),
        goal=goal,
        demos=demos,
        query=query,
    )


def write_flood_dir(out: Path, seed: int) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    scene = gen_flood_scene(seed)
    (out / "image.ppm").write_bytes(save_image(scene.image))
    (out / "palette.json").write_text(scene.palette.to_json())
    (out / "labels.pgm").write_bytes(save_sparse_labels(scene.labels))
    (out / "truth.pgm").write_bytes(
        save_sparse_labels(
            SparseLabelRaster(scene.truth.width, scene.truth.height, scene.truth.data)
        )
    )
    (out / "support_image.ppm").write_bytes(save_image(scene.support[0]))
    (out / "support_mask.pgm").write_bytes(save_mask(scene.support[1]))
    (out / "demos.json").write_text(demos_to_json(scene.goal, scene.demos))
    (out / "query.json").write_text(
        '{"start": [%d, %d], "goal": [%d, %d], "profile": "safe", "blend": 1.0}'
        % (*scene.query.start, *scene.query.goal)
    )


def gen_semantic_grid(seed: int, width: int, height: int, n_classes: int) -> SemanticRaster:
    """Blobby random semantic grid for planted-weight experiments."""
    rng = SplitMix64(seed)
    grid = np.zeros((height, width), dtype=np.uint8)
    for _ in range(3 * n_classes):
        class_id = rng.randint(n_classes)
        cr, cc = rng.randint(height), rng.randint(width)
        hr, hc = 1 + rng.randint(max(2, height // 3)), 1 + rng.randint(max(2, width // 3))
        rows = np.arange(height)[:, None]
        cols = np.arange(width)[None, :]
        region = (np.abs(rows - cr) <= hr) & (np.abs(cols - cc) <= hc)
        grid[region] = class_id
    return SemanticRaster(width, height, grid)
