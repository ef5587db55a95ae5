"""Command-line interface.

Subcommands: train-seg, fewshot-train, fewshot-predict, train-irl, plan,
explain, serve, gen-synthetic. Every subcommand exits 0 on success and
prints a one-line ``error: ...`` to stderr with exit code 1 on failure;
usage errors exit 2 (argparse).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import SemnavError
from .fewshot import FewshotHead, SupportExample, SupportSet, episodic_train, segment_query
from .frugal import (
    FrugalConfig,
    FrugalDataset,
    SegModel,
    evaluate,
    load_dataset_dir,
    predict,
    train,
)
from .irl import (
    IrlConfig,
    RewardWeights,
    cost_map,
    demos_from_json,
    irl_train,
    mdp_from_semantic,
)
from .mlp import SgdConfig
from .planner import (
    RouteQuery,
    evaluate_path,
    explain,
    plan,
    plan_to_json,
    shortest_distance_path,
)
from .rasters import (
    LabelPalette,
    load_image,
    load_mask,
    load_semantic,
    save_mask,
)
from .synthetic import write_flood_dir, write_shapes_dir


def _cell(text: str) -> tuple[int, int]:
    row, col = text.split(",")
    return int(row), int(col)


def _load_palette(path: str) -> LabelPalette:
    return LabelPalette.from_json(Path(path).read_text())


def _cmd_train_seg(args) -> int:
    palette = _load_palette(args.palette)
    dataset = load_dataset_dir(Path(args.data), palette)
    config = FrugalConfig(
        pixel_fraction=args.pixel_fraction,
        sgd=SgdConfig(
            learning_rate=args.lr, epochs=args.epochs, seed=args.seed, l2=args.l2
        ),
    )
    model, trace = train(dataset, config)
    Path(args.out).write_text(model.to_json())
    print(f"trained on {len(dataset.items)} rasters, final epoch loss {trace[-1]:.4f}")
    if args.eval_data:
        metrics = evaluate(model, load_dataset_dir(Path(args.eval_data), palette))
        print(
            f"eval overall_accuracy={metrics.overall_accuracy:.4f} "
            f"mean_iou={metrics.mean_iou:.4f}"
        )
    return 0


def _cmd_fewshot_train(args) -> int:
    palette = _load_palette(args.palette)
    sparse = load_dataset_dir(Path(args.data), palette)
    dataset = []
    for image, labels in sparse.items:
        if labels.labeled_fraction != 1.0:
            raise SemnavError("fewshot-train needs fully labeled semantic rasters")
        from .rasters import SemanticRaster

        dataset.append(
            (image, SemanticRaster(labels.width, labels.height, labels.data))
        )
    train_classes = {int(v) for v in args.train_classes.split(",")}
    test_classes = (
        {int(v) for v in args.test_classes.split(",")} if args.test_classes else set()
    )
    config = SgdConfig(
        learning_rate=args.lr,
        epochs=args.episodes,
        batch_pixels=args.batch_pixels,
        seed=args.seed,
        l2=args.l2,
    )
    head, trace = episodic_train(dataset, train_classes, test_classes, config, k=args.k)
    Path(args.out).write_text(head.to_json())
    print(f"trained head over {args.episodes} episodes, final loss {trace[-1]:.4f}")
    return 0


def _cmd_fewshot_predict(args) -> int:
    head = FewshotHead.from_json(Path(args.head).read_text())
    pairs = []
    for pair_text in args.support.split(","):
        image_path, mask_path = pair_text.split(":")
        pairs.append(
            SupportExample(
                load_image(Path(image_path).read_bytes()),
                load_mask(Path(mask_path).read_bytes()),
            )
        )
    query = load_image(Path(args.query).read_bytes())
    mask, weights = segment_query(head, SupportSet(tuple(pairs)), query)
    Path(args.out).write_bytes(save_mask(mask))
    print(
        f"foreground pixels: {mask.foreground_count}, "
        f"support weights: {[round(float(w), 4) for w in weights]}"
    )
    return 0


def _cmd_train_irl(args) -> int:
    palette = _load_palette(args.palette)
    semantic = load_semantic(Path(args.semantic).read_bytes(), palette)
    goal, demos = demos_from_json(Path(args.demos).read_text())
    config = IrlConfig(
        learning_rate=args.lr,
        iterations=args.iters,
        l2=args.l2,
        seed=args.seed,
        horizon=args.horizon,
    )
    mdp = mdp_from_semantic(semantic, len(palette), goal=goal, horizon=args.horizon)
    weights, trace = irl_train(mdp, demos, config)
    weights.feature_names = [cls.name for cls in palette.classes]
    Path(args.out).write_text(weights.to_json())
    print(
        f"trained weights over {args.iters} iterations, "
        f"final gradient norm {trace[-1] if trace else 0.0:.6f}"
    )
    return 0


def _build_costmap(args, palette):
    semantic = load_semantic(Path(args.semantic).read_bytes(), palette)
    weights = RewardWeights.from_json(Path(args.weights).read_text())
    mdp = mdp_from_semantic(semantic, len(palette), goal=(0, 0), horizon=1)
    return semantic, cost_map(mdp, weights)


def _cmd_plan(args) -> int:
    palette = _load_palette(args.palette)
    semantic, costmap = _build_costmap(args, palette)
    query = RouteQuery(start=_cell(args.start), goal=_cell(args.goal), blend=args.blend)
    chosen = plan(costmap, query)
    alternative_geometry = shortest_distance_path(semantic.width, semantic.height, query)
    alternative = evaluate_path(costmap, alternative_geometry.path, args.blend)
    explanation = explain(chosen, alternative, semantic, palette)
    Path(args.out).write_text(plan_to_json(chosen, explanation))
    print(explanation.summary)
    return 0


def _cmd_explain(args) -> int:
    palette = _load_palette(args.palette)
    semantic, costmap = _build_costmap(args, palette)
    doc = json.loads(Path(args.plan).read_text())
    path = tuple((int(r), int(c)) for r, c in doc["path"])
    chosen = evaluate_path(costmap, path, args.blend)
    query = RouteQuery(start=path[0], goal=path[-1], blend=args.blend)
    alternative_geometry = shortest_distance_path(semantic.width, semantic.height, query)
    alternative = evaluate_path(costmap, alternative_geometry.path, args.blend)
    explanation = explain(chosen, alternative, semantic, palette)
    Path(args.out).write_text(json.dumps(explanation.to_dict()))
    print(explanation.summary)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(Path(args.root))
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _cmd_gen_synthetic(args) -> int:
    out = Path(args.out)
    if args.kind == "shapes":
        write_shapes_dir(out, args.seed)
    else:
        write_flood_dir(out, args.seed)
    print(f"wrote {args.kind} benchmark (seed {args.seed}) to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semnav")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-seg", help="train the sparse-label pixel classifier")
    p.add_argument("--data", required=True, help="dataset dir: images/ + labels/")
    p.add_argument("--palette", required=True)
    p.add_argument("--pixel-fraction", type=float, default=0.04, dest="pixel_fraction")
    p.add_argument("--epochs", type=int, default=8)
    p.add_argument("--lr", type=float, default=0.3)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eval-data", default=None, dest="eval_data")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train_seg)

    p = sub.add_parser("fewshot-train", help="episodic training of the few-shot head")
    p.add_argument("--data", required=True, help="dataset dir with full labels")
    p.add_argument("--palette", required=True)
    p.add_argument("--train-classes", required=True, dest="train_classes")
    p.add_argument("--test-classes", default="", dest="test_classes")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--episodes", type=int, default=1000)
    p.add_argument("--batch-pixels", type=int, default=512, dest="batch_pixels")
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--l2", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fewshot_train)

    p = sub.add_parser("fewshot-predict", help="segment a query with support pairs")
    p.add_argument("--head", required=True)
    p.add_argument("--support", required=True, help="img:mask[,img:mask...]")
    p.add_argument("--query", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fewshot_predict)

    p = sub.add_parser("train-irl", help="learn reward weights from demonstrations")
    p.add_argument("--semantic", required=True)
    p.add_argument("--palette", required=True)
    p.add_argument("--demos", required=True)
    p.add_argument("--iters", type=int, default=50)
    p.add_argument("--lr", type=float, default=0.02)
    p.add_argument("--l2", type=float, default=0.001)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train_irl)

    p = sub.add_parser("plan", help="plan a route and explain it")
    p.add_argument("--weights", required=True)
    p.add_argument("--semantic", required=True)
    p.add_argument("--palette", required=True)
    p.add_argument("--start", required=True, help="row,col")
    p.add_argument("--goal", required=True, help="row,col")
    p.add_argument("--blend", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("explain", help="re-attribute an existing plan JSON")
    p.add_argument("--plan", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--semantic", required=True)
    p.add_argument("--palette", required=True)
    p.add_argument("--blend", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_explain)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--root", default=None, help="registry root (or SEMNAV_ROOT)")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("gen-synthetic", help="generate a seeded benchmark")
    p.add_argument("--kind", choices=("flood", "shapes"), required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_synthetic)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "serve" and args.root is None:
        import os

        args.root = os.environ.get("SEMNAV_ROOT", "./semnav-root")
    try:
        return args.func(args)
    except (SemnavError, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
