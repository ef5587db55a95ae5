#!/usr/bin/env python3
"""End-to-end responder scenario, in process.

Generate the flood benchmark, train segmentation from sparse labels, learn
the "flooded" class from one support pair, learn a safe-profile cost map
from demonstrations, and answer the safe-route query with its explanation.
"""

import argparse

import numpy as np

from semnav.fewshot import (
    SupportExample,
    SupportSet,
    segment_query,
    train_head_from_supports,
)
from semnav.frugal import FrugalConfig, FrugalDataset, predict, train
from semnav.irl import IrlConfig, cost_map, irl_train, mdp_from_semantic
from semnav.mlp import SgdConfig
from semnav.planner import evaluate_path, explain, plan, shortest_distance_path
from semnav.rasters import SemanticRaster
from semnav.synthetic import gen_flood_scene


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    scene = gen_flood_scene(seed=args.seed)
    print(f"flood scene {scene.image.width}x{scene.image.height}, "
          f"{len(scene.demos)} demonstrations, goal {scene.goal}")

    dataset = FrugalDataset(items=[(scene.image, scene.labels)], palette=scene.palette)
    seg_model, _ = train(
        dataset,
        FrugalConfig(
            pixel_fraction=0.25,
            sgd=SgdConfig(learning_rate=0.5, epochs=60, seed=1, l2=1e-4),
        ),
    )
    semantic = predict(seg_model, scene.image)
    print("segmentation trained from sparse labels "
          f"(labeled fraction {scene.labels.labeled_fraction:.1%})")

    supports = SupportSet((SupportExample(*scene.support),))
    head, _ = train_head_from_supports(
        supports,
        SgdConfig(learning_rate=0.5, epochs=150, batch_pixels=256, seed=2, l2=1e-5),
    )
    flood_mask, _ = segment_query(head, supports, scene.image)
    print(f"'flooded' learned from 1 support: {flood_mask.foreground_count} "
          f"pixels detected on the map")

    palette = scene.palette.with_class("flooded", (0, 0, 255))
    merged = SemanticRaster(
        semantic.width,
        semantic.height,
        np.where(flood_mask.data, 3, semantic.data).astype(np.uint8),
    )

    mdp = mdp_from_semantic(merged, len(palette), goal=scene.goal, horizon=120)
    weights, _ = irl_train(
        mdp, scene.demos, IrlConfig(learning_rate=0.02, iterations=50, l2=0.001)
    )
    names = [cls.name for cls in palette.classes]
    print("learned reward weights:",
          {name: round(float(w), 2) for name, w in zip(names, weights.w)})

    costmap = cost_map(mdp, weights)
    chosen = plan(costmap, scene.query)
    alt = shortest_distance_path(merged.width, merged.height, scene.query)
    alternative = evaluate_path(costmap, alt.path, scene.query.blend)
    result = explain(chosen, alternative, merged, palette)
    print(f"safe route: {len(chosen.path)} cells, cost {chosen.total_cost:.2f}, "
          f"distance {chosen.total_distance:.2f}")
    print("explanation:", result.summary)


if __name__ == "__main__":
    main()
