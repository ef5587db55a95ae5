"""Per-pixel classifier trained from sparsely labeled rasters.

Unlabeled pixels never enter the loss: every optimization step samples its
pixel batch from the labeled set only, with a fresh draw per image per
epoch. Feature volumes are extracted once per image and cached across
epochs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError, DivergenceError, EmptyLabelsError
from .features import extract_volume, feature_dim
from .mlp import (
    MlpModel,
    SgdConfig,
    forward_cached,
    init_mlp,
    mlp_backward,
    sgd_step,
    softmax_cross_entropy_batch,
)
from .rasters import (
    UNLABELED,
    ImageRaster,
    LabelPalette,
    SemanticRaster,
    SparseLabelRaster,
    Metrics,
    compute_metrics,
    load_image,
    load_sparse_labels,
)
from .rng import SplitMix64

DEFAULT_HIDDEN = (64, 64)


@dataclass
class FrugalDataset:
    items: list[tuple[ImageRaster, SparseLabelRaster]]
    palette: LabelPalette

    def __post_init__(self):
        for i, (image, labels) in enumerate(self.items):
            if (image.width, image.height) != (labels.width, labels.height):
                raise DimensionMismatchError(
                    f"item {i}: image {image.width}x{image.height} vs "
                    f"labels {labels.width}x{labels.height}"
                )
        if not any(lab.labeled_count for _, lab in self.items):
            raise EmptyLabelsError("dataset has no labeled pixels")


@dataclass
class FrugalConfig:
    pixel_fraction: float = 0.04
    sgd: SgdConfig = field(default_factory=SgdConfig)
    hidden: tuple[int, ...] = DEFAULT_HIDDEN

    def __post_init__(self):
        if not 0.0 < self.pixel_fraction <= 1.0:
            raise ValueError("pixel_fraction must lie in (0, 1]")


@dataclass
class SegModel:
    channels: int
    palette: LabelPalette
    head: MlpModel

    def __post_init__(self):
        if self.head.out_dim != len(self.palette):
            raise ValueError("head output dimension must equal palette class count")

    def to_json(self) -> str:
        return json.dumps(
            {
                "kind": "seg-model",
                "channels": self.channels,
                "palette": json.loads(self.palette.to_json()),
                "head": json.loads(self.head.to_json()),
            }
        )

    @staticmethod
    def from_json(text: str) -> "SegModel":
        doc = json.loads(text)
        return SegModel(
            channels=int(doc["channels"]),
            palette=LabelPalette.from_json(json.dumps(doc["palette"])),
            head=MlpModel.from_json(json.dumps(doc["head"])),
        )


def sample_labeled_pixels(
    labels: SparseLabelRaster, n: int, rng: SplitMix64
) -> np.ndarray:
    """min(n, labeled_count) distinct flat indices of labeled pixels.

    Uniform without replacement (partial Fisher-Yates over the labeled set),
    deterministic given the generator state.
    """
    labeled = np.flatnonzero(labels.data.ravel() != UNLABELED)
    if labeled.size == 0:
        raise EmptyLabelsError("raster has no labeled pixels to sample")
    k = min(n, labeled.size)
    return labeled[rng.sample_indices(labeled.size, k)]


def train(
    dataset: FrugalDataset, config: FrugalConfig
) -> tuple[SegModel, list[float]]:
    """Returns the trained model and the per-epoch mean sampled-pixel loss."""
    channels = dataset.items[0][0].channels
    dim = feature_dim(channels)
    n_classes = len(dataset.palette)

    rng = SplitMix64(config.sgd.seed)
    head = init_mlp([dim, *config.hidden, n_classes], seed=rng.next_u64())

    cached_feats = [extract_volume(image).flat() for image, _ in dataset.items]
    cached_labels = [labels.data.ravel() for _, labels in dataset.items]

    trace: list[float] = []
    for epoch in range(config.sgd.epochs):
        order = list(range(len(dataset.items)))
        rng.shuffle(order)
        loss_sum = 0.0
        pixel_count = 0
        for index in order:
            labels = dataset.items[index][1]
            if labels.labeled_count == 0:
                continue
            want = math.ceil(config.pixel_fraction * labels.width * labels.height)
            picked = sample_labeled_pixels(labels, want, rng)
            batch = cached_feats[index][picked]
            targets = cached_labels[index][picked].astype(np.int64)

            logits, activations = forward_cached(head, batch)
            losses, logit_grads = softmax_cross_entropy_batch(logits, targets)
            mean_loss = float(losses.mean())
            if not math.isfinite(mean_loss):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch} "
                    f"(learning_rate={config.sgd.learning_rate})"
                )
            weight_grads, bias_grads, _ = mlp_backward(
                head, batch, logit_grads / len(picked), activations
            )
            sgd_step(
                head, weight_grads, bias_grads, config.sgd.learning_rate, config.sgd.l2
            )
            loss_sum += float(losses.sum())
            pixel_count += len(picked)
        trace.append(loss_sum / pixel_count)
    return SegModel(channels=channels, palette=dataset.palette, head=head), trace


def predict(model: SegModel, image: ImageRaster) -> SemanticRaster:
    """Per-pixel argmax of head logits; ties go to the smallest class id."""
    if image.channels != model.channels:
        raise DimensionMismatchError(
            f"model expects {model.channels} channels, image has {image.channels}"
        )
    volume = extract_volume(image)
    logits, _ = forward_cached(model.head, volume.flat())
    ids = logits.argmax(axis=1).astype(np.uint8).reshape(image.height, image.width)
    return SemanticRaster(width=image.width, height=image.height, data=ids)


def evaluate(model: SegModel, dataset: FrugalDataset) -> Metrics:
    """Metrics pooled over every labeled pixel of the dataset."""
    preds, truths = [], []
    for image, labels in dataset.items:
        preds.append(predict(model, image).data.ravel())
        truths.append(labels.data.ravel())
    pred_row = np.concatenate(preds)[None, :]
    truth_row = np.concatenate(truths)[None, :]
    return compute_metrics(
        SemanticRaster(pred_row.shape[1], 1, pred_row),
        SparseLabelRaster(truth_row.shape[1], 1, truth_row),
    )


def truncate_labels(
    dataset: FrugalDataset, fraction: float, seed: int
) -> FrugalDataset:
    """Keep a seeded uniform subset of labels: per raster, round(fraction * W * H)
    labeled pixels (capped by what is available)."""
    rng = SplitMix64(seed)
    items = []
    for image, labels in dataset.items:
        target = int(round(fraction * labels.width * labels.height))
        labeled = np.flatnonzero(labels.data.ravel() != UNLABELED)
        keep = min(labeled.size, target)
        grid = np.full(labels.data.size, UNLABELED, dtype=np.uint8)
        if keep:
            kept = labeled[rng.sample_indices(labeled.size, keep)]
            grid[kept] = labels.data.ravel()[kept]
        items.append(
            (
                image,
                SparseLabelRaster(
                    labels.width, labels.height, grid.reshape(labels.data.shape)
                ),
            )
        )
    if not any(lab.labeled_count for _, lab in items):
        raise EmptyLabelsError(f"fraction {fraction} leaves zero labeled pixels")
    return FrugalDataset(items=items, palette=dataset.palette)


def label_fraction_curve(
    dataset: FrugalDataset,
    eval_dataset: FrugalDataset,
    fractions: list[float],
    config: FrugalConfig,
) -> list[tuple[float, Metrics]]:
    """Retrain at each label fraction and score on the held-out split."""
    if sorted(fractions) != list(fractions):
        raise ValueError("fractions must be sorted ascending")
    if any(not 0.0 < f <= 1.0 for f in fractions):
        raise ValueError("fractions must lie in (0, 1]")
    seed_stream = SplitMix64(config.sgd.seed)
    curve = []
    for fraction in fractions:
        truncated = truncate_labels(dataset, fraction, seed=seed_stream.next_u64())
        model, _ = train(truncated, config)
        curve.append((fraction, evaluate(model, eval_dataset)))
    return curve


def load_dataset_dir(root: Path, palette: LabelPalette) -> FrugalDataset:
    """Directory layout: images/*.pgm|ppm and labels/*.pgm paired by stem."""
    root = Path(root)
    images_dir, labels_dir = root / "images", root / "labels"
    items = []
    for image_path in sorted(images_dir.iterdir()):
        if image_path.suffix not in (".pgm", ".ppm"):
            continue
        label_path = labels_dir / (image_path.stem + ".pgm")
        if not label_path.exists():
            raise FileNotFoundError(f"no labels for {image_path.name}: {label_path}")
        items.append(
            (
                load_image(image_path.read_bytes()),
                load_sparse_labels(label_path.read_bytes(), palette),
            )
        )
    if not items:
        raise FileNotFoundError(f"no images found under {images_dir}")
    return FrugalDataset(items=items, palette=palette)
