"""Few-shot new-class segmentation with cosine-weighted support fusion.

Both branches (query and support) run through the shared extractor. Each
support's conditioning map is its feature volume with the binary ground
truth multiplied into the intermediate features (never into the input
pixels). The K conditioning maps are fused by a softmax over cosine
similarities between each support's masked global feature and the query's
global feature (temperature 0.1: a convex combination that strongly favors
the most query-like support). The head classifies each query pixel from its
own features concatenated with the fused conditioning prototype.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatchError,
    DivergenceError,
    EpisodeConstructionError,
    UntrainedHeadError,
)
from .features import FeatureVolume, extract_volume, feature_dim, global_pool
from .mlp import (
    MlpModel,
    SgdConfig,
    forward_cached,
    init_mlp,
    mlp_backward,
    sgd_step,
    softmax_cross_entropy_batch,
)
from .rasters import BinaryMask, ImageRaster, SemanticRaster
from .rng import SplitMix64

FUSION_TEMPERATURE = 0.1

# A conditioning map is a feature volume whose background columns are zero.
ConditioningMap = FeatureVolume


@dataclass(frozen=True)
class SupportExample:
    image: ImageRaster
    mask: BinaryMask

    def __post_init__(self):
        if (self.image.width, self.image.height) != (self.mask.width, self.mask.height):
            raise DimensionMismatchError("support image and mask dimensions differ")
        if self.mask.foreground_count == 0:
            raise ValueError("support mask needs at least one foreground pixel")


@dataclass(frozen=True)
class SupportSet:
    examples: tuple[SupportExample, ...]

    def __post_init__(self):
        if len(self.examples) < 1:
            raise ValueError("support set needs K >= 1 examples")
        channels = {ex.image.channels for ex in self.examples}
        if len(channels) != 1:
            raise ValueError("support examples must share channel count")

    @property
    def k(self) -> int:
        return len(self.examples)

    @property
    def channels(self) -> int:
        return self.examples[0].image.channels


@dataclass
class FewshotHead:
    channels: int
    head: MlpModel

    def __post_init__(self):
        if self.head.in_dim != 2 * feature_dim(self.channels):
            raise ValueError("head input dimension must be 2 * feature dim")
        if self.head.out_dim != 2:
            raise ValueError("head must emit background/foreground logits")

    def to_json(self) -> str:
        return json.dumps(
            {
                "kind": "fewshot-head",
                "channels": self.channels,
                "head": json.loads(self.head.to_json()),
            }
        )

    @staticmethod
    def from_json(text: str) -> "FewshotHead":
        doc = json.loads(text)
        head = FewshotHead(
            channels=int(doc["channels"]),
            head=MlpModel.from_json(json.dumps(doc["head"])),
        )
        if head.head.is_all_zero():
            raise UntrainedHeadError("loaded few-shot head has all-zero parameters")
        return head


def fusion_module(support_features: FeatureVolume, mask: BinaryMask) -> ConditioningMap:
    """Mask intermediate features: background columns become exactly zero."""
    if (mask.width, mask.height) != (support_features.width, support_features.height):
        raise DimensionMismatchError("mask and feature volume dimensions differ")
    data = support_features.data * mask.data[:, :, None]
    return FeatureVolume(
        width=support_features.width,
        height=support_features.height,
        dim=support_features.dim,
        data=data,
    )


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"vector shapes {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < 1e-12 or nb < 1e-12:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def fuse_supports(
    maps: list[ConditioningMap],
    support_globals: list[np.ndarray],
    query_global: np.ndarray,
    temperature: float = FUSION_TEMPERATURE,
) -> tuple[ConditioningMap, np.ndarray]:
    """Softmax(cos/temperature)-weighted sum of the conditioning maps."""
    if not maps:
        raise ValueError("need at least one conditioning map")
    shape = maps[0].data.shape
    if any(m.data.shape != shape for m in maps):
        raise DimensionMismatchError("conditioning maps must share dimensions")
    sims = np.array(
        [cosine_similarity(g, query_global) for g in support_globals], dtype=np.float64
    )
    scaled = sims / temperature
    scaled -= scaled.max()
    weights = np.exp(scaled)
    weights /= weights.sum()
    fused = np.zeros(shape)
    for weight, cmap in zip(weights, maps):
        fused += weight * cmap.data
    return (
        FeatureVolume(width=maps[0].width, height=maps[0].height, dim=maps[0].dim, data=fused),
        weights,
    )


def _conditioning_prototype(
    support_volumes: list[FeatureVolume],
    masks: list[BinaryMask],
    query_global: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Fused conditioning feature for the head.

    Each support's conditioning map is pooled over its own foreground (its
    nonzero support) and the pooled vectors combine with the fusion weights.
    Pooling before fusing keeps the prototype's scale independent of K and
    of mask placement; for K = 1 it is exactly the masked global mean.
    """
    maps = [fusion_module(vol, mask) for vol, mask in zip(support_volumes, masks)]
    support_globals = [global_pool(vol, mask) for vol, mask in zip(support_volumes, masks)]
    _, weights = fuse_supports(maps, support_globals, query_global)
    pooled = [
        cmap.data.reshape(-1, cmap.dim).sum(axis=0) / mask.foreground_count
        for cmap, mask in zip(maps, masks)
    ]
    prototype = np.zeros_like(pooled[0])
    for weight, vector in zip(weights, pooled):
        prototype += weight * vector
    return prototype, weights


def segment_query(
    head: FewshotHead, support: SupportSet, query: ImageRaster
) -> tuple[BinaryMask, np.ndarray]:
    """Foreground mask for the query plus the support fusion weights."""
    if query.channels != head.channels or support.channels != head.channels:
        raise DimensionMismatchError("channel count differs from the trained head")
    query_volume = extract_volume(query)
    query_global = global_pool(query_volume)
    support_volumes = [extract_volume(ex.image) for ex in support.examples]
    masks = [ex.mask for ex in support.examples]
    prototype, weights = _conditioning_prototype(support_volumes, masks, query_global)

    pixels = query_volume.flat()
    inputs = np.concatenate(
        [pixels, np.broadcast_to(prototype, pixels.shape)], axis=1
    )
    logits, _ = forward_cached(head.head, inputs)
    foreground = (logits.argmax(axis=1) == 1).reshape(query.height, query.width)
    return BinaryMask(width=query.width, height=query.height, data=foreground), weights


@dataclass(frozen=True)
class Episode:
    support: SupportSet
    query: ImageRaster
    query_truth: BinaryMask
    class_name: str = ""


def _balanced_pixel_batch(
    truth: np.ndarray, batch_pixels: int, rng: SplitMix64
) -> np.ndarray:
    """Sample up to batch_pixels indices, half foreground half background
    where available (topping up from the other side)."""
    fg = np.flatnonzero(truth)
    bg = np.flatnonzero(~truth)
    half = batch_pixels // 2
    n_fg = min(len(fg), max(half, batch_pixels - len(bg)))
    n_bg = min(len(bg), batch_pixels - n_fg)
    picked = []
    if n_fg:
        picked.append(fg[rng.sample_indices(len(fg), n_fg)])
    if n_bg:
        picked.append(bg[rng.sample_indices(len(bg), n_bg)])
    return np.concatenate(picked)


def _head_step(
    head: MlpModel,
    query_volume: FeatureVolume,
    prototype: np.ndarray,
    truth: np.ndarray,
    config: SgdConfig,
    rng: SplitMix64,
) -> float:
    picked = _balanced_pixel_batch(truth.ravel(), config.batch_pixels, rng)
    pixels = query_volume.flat()[picked]
    inputs = np.concatenate(
        [pixels, np.broadcast_to(prototype, pixels.shape)], axis=1
    )
    targets = truth.ravel()[picked].astype(np.int64)
    logits, activations = forward_cached(head, inputs)
    losses, logit_grads = softmax_cross_entropy_batch(logits, targets)
    loss = float(losses.mean())
    if not math.isfinite(loss):
        raise DivergenceError(
            f"non-finite few-shot loss (learning_rate={config.learning_rate})"
        )
    weight_grads, bias_grads, _ = mlp_backward(
        head, inputs, logit_grads / len(picked), activations
    )
    sgd_step(head, weight_grads, bias_grads, config.learning_rate, config.l2)
    return loss


def episodic_train(
    dataset: list[tuple[ImageRaster, SemanticRaster]],
    train_classes: set[int],
    test_classes: set[int],
    config: SgdConfig,
    k: int,
    hidden: tuple[int, ...] = (64, 64),
    on_episode=None,
) -> tuple[FewshotHead, list[float]]:
    """Train the head on episodes built from train classes only.

    Every image containing any test class is excluded from episode
    construction, and the exclusion is re-checked per episode. config.epochs
    counts episodes; each episode takes one SGD step on a balanced pixel
    batch of the query.
    """
    train_classes, test_classes = set(train_classes), set(test_classes)
    if train_classes & test_classes:
        raise ValueError(
            f"train and test classes must be disjoint, both contain "
            f"{sorted(train_classes & test_classes)}"
        )
    test_ids = np.array(sorted(test_classes), dtype=np.uint8)
    eligible = [
        i
        for i, (_, semantic) in enumerate(dataset)
        if not np.isin(semantic.data, test_ids).any()
    ]
    # An episode participant must carry a workable region of the class:
    # near-empty masks (shapes almost fully overpainted) produce outlier
    # prototypes and destabilize the head.
    min_area = 16
    by_class = {
        c: [i for i in eligible if (dataset[i][1].data == c).sum() >= min_area]
        for c in sorted(train_classes)
    }
    usable = [c for c in sorted(train_classes) if len(by_class[c]) >= k + 1]
    if not usable:
        raise EpisodeConstructionError(
            f"no train class has {k + 1} eligible images (counts: "
            f"{ {c: len(v) for c, v in by_class.items()} })"
        )

    channels = dataset[0][0].channels
    dim = feature_dim(channels)
    rng = SplitMix64(config.seed)
    head = init_mlp([2 * dim, *hidden, 2], seed=rng.next_u64())
    volume_cache: dict[int, FeatureVolume] = {}

    def volume_of(index: int) -> FeatureVolume:
        if index not in volume_cache:
            volume_cache[index] = extract_volume(dataset[index][0])
        return volume_cache[index]

    trace: list[float] = []
    for _ in range(config.epochs):
        class_id = usable[rng.randint(len(usable))]
        pool = by_class[class_id]
        picked = [pool[j] for j in rng.sample_indices(len(pool), k + 1)]
        for index in picked:  # per-episode exclusion audit
            if np.isin(dataset[index][1].data, test_ids).any():
                raise EpisodeConstructionError(
                    f"exclusion audit failed: image {index} contains a test class"
                )
        if on_episode is not None:
            on_episode(class_id, picked)
        support_idx, query_idx = picked[:k], picked[k]

        support_volumes = [volume_of(i) for i in support_idx]
        masks = [
            BinaryMask(
                dataset[i][1].width,
                dataset[i][1].height,
                dataset[i][1].data == class_id,
            )
            for i in support_idx
        ]
        query_volume = volume_of(query_idx)
        query_truth = dataset[query_idx][1].data == class_id
        query_global = global_pool(query_volume)
        prototype, _ = _conditioning_prototype(support_volumes, masks, query_global)
        trace.append(
            _head_step(head, query_volume, prototype, query_truth, config, rng)
        )
    return FewshotHead(channels=channels, head=head), trace


def train_head_from_supports(
    supports: SupportSet,
    config: SgdConfig,
    hidden: tuple[int, ...] = (64, 64),
) -> tuple[FewshotHead, list[float]]:
    """Train a class-specific head from the support pairs alone.

    Episodes cycle the supports as queries (support-as-query for K = 1),
    conditioning on the remaining examples where there are several.
    """
    channels = supports.channels
    dim = feature_dim(channels)
    rng = SplitMix64(config.seed)
    head = init_mlp([2 * dim, *hidden, 2], seed=rng.next_u64())
    volumes = [extract_volume(ex.image) for ex in supports.examples]

    trace: list[float] = []
    for episode in range(config.epochs):
        query_pos = episode % supports.k
        if supports.k == 1:
            support_pos = [0]
        else:
            support_pos = [i for i in range(supports.k) if i != query_pos]
        support_volumes = [volumes[i] for i in support_pos]
        masks = [supports.examples[i].mask for i in support_pos]
        query_volume = volumes[query_pos]
        query_truth = supports.examples[query_pos].mask.data
        query_global = global_pool(query_volume)
        prototype, _ = _conditioning_prototype(support_volumes, masks, query_global)
        trace.append(
            _head_step(head, query_volume, prototype, query_truth, config, rng)
        )
    return FewshotHead(channels=channels, head=head), trace


def mask_iou(a: BinaryMask, b: BinaryMask) -> float:
    union = np.logical_or(a.data, b.data).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(a.data, b.data).sum() / union)
