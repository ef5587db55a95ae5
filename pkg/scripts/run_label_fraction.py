#!/usr/bin/env python3
"""Label-fraction experiment: retrain at decreasing label coverage and
report held-out accuracy, reproducing the sparse-supervision claim at desk
scale."""

import argparse

from semnav.frugal import FrugalConfig, FrugalDataset, label_fraction_curve
from semnav.mlp import SgdConfig
from semnav.synthetic import gen_shapes_dataset


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--epochs", type=int, default=8)
    parser.add_argument(
        "--fractions",
        default="0.05,0.1,0.2,0.35,0.6,1.0",
        help="comma-separated label fractions, ascending",
    )
    args = parser.parse_args()

    items, palette = gen_shapes_dataset(seed=args.seed)
    train_ds = FrugalDataset(items=items[:15], palette=palette)
    eval_ds = FrugalDataset(items=items[15:], palette=palette)
    fractions = [float(f) for f in args.fractions.split(",")]
    config = FrugalConfig(
        pixel_fraction=0.04,
        sgd=SgdConfig(learning_rate=0.3, epochs=args.epochs, seed=1, l2=1e-4),
    )

    print(f"{'labels':>8} {'accuracy':>9} {'mean IoU':>9}")
    curve = label_fraction_curve(train_ds, eval_ds, fractions, config)
    for fraction, metrics in curve:
        print(
            f"{fraction:8.2%} {metrics.overall_accuracy:9.4f} {metrics.mean_iou:9.4f}"
        )
    full = curve[-1][1].overall_accuracy
    for fraction, metrics in curve:
        drop = 100 * (full - metrics.overall_accuracy)
        print(f"drop at {fraction:.0%} labels vs full: {drop:+.2f} points")


if __name__ == "__main__":
    main()
