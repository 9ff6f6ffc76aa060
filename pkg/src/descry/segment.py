"""Top-down segmentation: label the pyramid top, then descend and refine.

The coarsest level is partitioned by seeded region growing. Descending one
level at a time, the label map and the per-region means are expanded 2x and
pixels that deviate too far from their inherited region mean are either moved
to a better-fitting neighbor region or collected into newly seeded regions.

Every stage is deterministic: raster-scan seeding, a fixed neighbor visiting
order (up, left, right, down), smaller-label tie-breaks, and fresh labels
allocated by the smallest row-major pixel index of each new component.
"""

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from skimage import measure

from .density import DEFAULT_DROP_RATIO, density_curve, select_working_scale
from .pyramid import DEFAULT_STOP_THRESHOLD, Pyramid, build_pyramid, validate_image
from .registry import ObjectRegistry, register_level, spatial_relations

__all__ = [
    "RegionStats",
    "SegmentationConfig",
    "SegmentationResult",
    "segment_top",
    "expand_maps",
    "refine_level",
    "run_pipeline",
]

_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)

SCALE_SELECTION_MODES = ("fixed", "density")


@dataclass
class RegionStats:
    """Mean intensity and pixel count per label of one label map."""

    means: dict[int, float] = field(default_factory=dict)
    counts: dict[int, int] = field(default_factory=dict)


@dataclass(frozen=True)
class SegmentationConfig:
    delta: float = 15.0
    tau: float = 25.0
    max_refine_iters: int = 10
    stop_threshold: int = DEFAULT_STOP_THRESHOLD
    drop_ratio: float = DEFAULT_DROP_RATIO
    scale_selection: str = "fixed"

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.max_refine_iters < 1:
            raise ValueError(f"max_refine_iters must be >= 1, got {self.max_refine_iters}")
        if self.stop_threshold < 1:
            raise ValueError(f"stop_threshold must be positive, got {self.stop_threshold}")
        if not 0.0 < self.drop_ratio < 1.0:
            raise ValueError(f"drop_ratio must lie in (0, 1), got {self.drop_ratio}")
        if self.scale_selection not in SCALE_SELECTION_MODES:
            raise ValueError(
                f"scale_selection must be one of {SCALE_SELECTION_MODES}, "
                f"got {self.scale_selection!r}"
            )


@dataclass(eq=False)
class SegmentationResult:
    """Per-level label maps, region stats, new-seed labels, and the registry."""

    pyramid: Pyramid
    top_level: int
    label_maps: dict[int, np.ndarray]
    stats: dict[int, RegionStats]
    new_seeds: dict[int, list[int]]
    registry: ObjectRegistry


def _stats_of(flat_labels: np.ndarray, flat_values: np.ndarray) -> RegionStats:
    counts_all = np.bincount(flat_labels)
    sums = np.bincount(flat_labels, weights=flat_values)
    means: dict[int, float] = {}
    counts: dict[int, int] = {}
    for lbl in np.flatnonzero(counts_all).tolist():
        count = int(counts_all[lbl])
        means[lbl] = float(sums[lbl]) / count
        counts[lbl] = count
    return RegionStats(means=means, counts=counts)


def segment_top(image, delta: float) -> tuple[np.ndarray, RegionStats]:
    """Seeded region growing over the whole image.

    The raster scan opens a region at each yet-unlabeled pixel and grows it
    breadth-first over 4-neighbors, admitting a pixel when its intensity is
    within delta of the region's running mean (updated on every admission).
    Labels are assigned 1, 2, 3, ... in creation order.
    """
    img = validate_image(image)
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    h, w = img.shape
    n = h * w
    values = img.ravel().tolist()
    labels = [0] * n
    means: dict[int, float] = {}
    counts: dict[int, int] = {}
    next_label = 1
    for start in range(n):
        if labels[start]:
            continue
        label = next_label
        next_label += 1
        labels[start] = label
        total = values[start]
        count = 1
        queue = deque([start])
        while queue:
            p = queue.popleft()
            r, c = divmod(p, w)
            for q in (
                p - w if r > 0 else -1,
                p - 1 if c > 0 else -1,
                p + 1 if c + 1 < w else -1,
                p + w if r + 1 < h else -1,
            ):
                if q < 0 or labels[q]:
                    continue
                if abs(values[q] - total / count) <= delta:
                    labels[q] = label
                    total += values[q]
                    count += 1
                    queue.append(q)
        means[label] = total / count
        counts[label] = count
    label_map = np.array(labels, dtype=np.int64).reshape(h, w)
    return label_map, RegionStats(means=means, counts=counts)


def expand_maps(label_map, stats: RegionStats, target_h: int, target_w: int):
    """Replicate each parent pixel's label and mean onto its 2x2 children.

    Returns the expanded label map and the per-pixel mean image. The target
    shape must be a valid next-finer level of the given map.
    """
    lm = np.asarray(label_map, dtype=np.int64)
    ph, pw = lm.shape
    if ((target_h + 1) // 2, (target_w + 1) // 2) != (ph, pw):
        raise ValueError(
            f"target shape ({target_h}, {target_w}) is not the next finer level "
            f"of a {lm.shape} map"
        )
    rows = np.arange(target_h) // 2
    cols = np.arange(target_w) // 2
    expanded = lm[np.ix_(rows, cols)]
    mean_lookup = np.zeros(int(lm.max()) + 1, dtype=np.float64)
    for label, mean in stats.means.items():
        mean_lookup[label] = mean
    return expanded, mean_lookup[expanded]


def _relabel_seed_components(lm_flat, seed_pixels, shape, next_label):
    """Turn 4-connected components of seed pixels into fresh regions."""
    h, w = shape
    mask = np.zeros(h * w, dtype=bool)
    mask[seed_pixels] = True
    components, _ = ndimage.label(mask.reshape(h, w), structure=_CROSS)
    comp_flat = components.ravel()
    ids, first_index = np.unique(comp_flat, return_index=True)
    keep = ids > 0
    ids = ids[keep]
    first_index = first_index[keep]
    order = np.argsort(first_index, kind="stable")
    label_for = np.zeros(int(ids.max()) + 1, dtype=np.int64)
    fresh = []
    for offset, comp_id in enumerate(ids[order].tolist()):
        label_for[comp_id] = next_label + offset
        fresh.append(next_label + offset)
    on = comp_flat > 0
    lm_flat[on] = label_for[comp_flat[on]]
    return fresh, next_label + len(fresh)


def _split_disconnected(lm: np.ndarray, next_label: int, seed_origin: set):
    """Give every 4-connected fragment of a label its own label.

    The fragment holding the region's smallest row-major pixel keeps the
    original label; the others get fresh labels in order of their smallest
    pixel index. Fragments of seed-born regions stay seed-born.
    """
    components = measure.label(lm, connectivity=1)
    comp_flat = components.ravel()
    lm_flat = lm.ravel()
    ids, first_index = np.unique(comp_flat, return_index=True)
    original = lm_flat[first_index]

    fragments: dict[int, list[tuple[int, int]]] = {}
    for comp_id, first, orig in zip(ids.tolist(), first_index.tolist(), original.tolist()):
        fragments.setdefault(orig, []).append((first, comp_id))

    final_label = np.zeros(int(ids.max()) + 1, dtype=np.int64)
    final_label[ids] = original
    pending = []
    for orig, parts in fragments.items():
        if len(parts) > 1:
            parts.sort()
            for first, comp_id in parts[1:]:
                pending.append((first, comp_id, orig))
    if pending:
        pending.sort()
        for _, comp_id, orig in pending:
            final_label[comp_id] = next_label
            if orig in seed_origin:
                seed_origin.add(next_label)
            next_label += 1
        lm_flat[:] = final_label[comp_flat]
    return next_label


def refine_level(reference, label_map, stats: RegionStats, cfg: SegmentationConfig):
    """Correct an expanded label map against the level's reference image.

    Each pass runs in raster order over pixels deviating from their region
    mean by more than tau: such a pixel moves to the 4-neighbor label with the
    smallest deviation when that deviation fits within tau, otherwise it is
    held back as a seed candidate. Components of seed candidates become fresh
    regions, then all means are recomputed. Passes repeat (up to the
    configured cap) until one leaves labels and means unchanged. Finally any
    label left disconnected is split into one label per component.

    Returns (label map, stats, labels of the regions seeded at this level).
    """
    ref = validate_image(reference)
    lm = np.asarray(label_map, dtype=np.int64).copy()
    if lm.shape != ref.shape:
        raise ValueError(f"label map shape {lm.shape} does not match image {ref.shape}")
    h, w = ref.shape
    lm_flat = lm.ravel()
    ref_flat = ref.ravel()
    ref_list = ref_flat.tolist()
    means = dict(stats.means)
    next_label = int(lm_flat.max()) + 1
    seed_origin: set[int] = set()
    tau = cfg.tau

    for _ in range(cfg.max_refine_iters):
        mean_arr = np.zeros(next_label, dtype=np.float64)
        mean_arr[list(means.keys())] = list(means.values())
        mean_list = mean_arr.tolist()
        deviating = np.flatnonzero(np.abs(ref_flat - mean_arr[lm_flat]) > tau)

        moved = False
        seed_pixels = []
        for p in deviating.tolist():
            value = ref_list[p]
            r, c = divmod(p, w)
            best_dev = None
            best_label = 0
            for q in (
                p - w if r > 0 else -1,
                p - 1 if c > 0 else -1,
                p + 1 if c + 1 < w else -1,
                p + w if r + 1 < h else -1,
            ):
                if q < 0:
                    continue
                candidate = int(lm_flat[q])
                dev = abs(value - mean_list[candidate])
                if dev <= tau and (
                    best_dev is None
                    or dev < best_dev
                    or (dev == best_dev and candidate < best_label)
                ):
                    best_dev = dev
                    best_label = candidate
            if best_dev is None:
                seed_pixels.append(p)
            else:
                lm_flat[p] = best_label
                moved = True

        made_seeds = False
        if seed_pixels:
            fresh, next_label = _relabel_seed_components(lm_flat, seed_pixels, (h, w), next_label)
            seed_origin.update(fresh)
            made_seeds = True

        new_stats = _stats_of(lm_flat, ref_flat)
        settled = not moved and not made_seeds and new_stats.means == means
        means = new_stats.means
        if settled:
            break

    next_label = _split_disconnected(lm, next_label, seed_origin)
    final = _stats_of(lm_flat, ref_flat)
    new_seed_labels = sorted(lbl for lbl in seed_origin if lbl in final.counts)
    return lm, final, new_seed_labels


def run_pipeline(image, cfg: SegmentationConfig | None = None) -> SegmentationResult:
    """Run the whole stack: pyramid, top segmentation, descent, registration."""
    if cfg is None:
        cfg = SegmentationConfig()
    img = validate_image(image)
    pyramid = build_pyramid(img, cfg.stop_threshold)
    if cfg.scale_selection == "density":
        top = select_working_scale(density_curve(pyramid), cfg.drop_ratio)
    else:
        top = len(pyramid.levels) - 1

    registry = ObjectRegistry()
    label_map, stats = segment_top(pyramid.levels[top], cfg.delta)
    records = register_level(label_map, pyramid.levels[top], None, [], level=top)
    spatial_relations(records, label_map)
    registry.add(records)

    label_maps = {top: label_map}
    stats_by_level = {top: stats}
    new_seeds: dict[int, list[int]] = {top: []}

    for level in range(top - 1, -1, -1):
        reference = pyramid.levels[level]
        th, tw = reference.shape
        expanded, _ = expand_maps(label_map, stats, th, tw)
        parent_map = label_map
        label_map, stats, seeds = refine_level(reference, expanded, stats, cfg)
        records = register_level(label_map, reference, parent_map, seeds, level=level)
        spatial_relations(records, label_map)
        registry.add(records)
        label_maps[level] = label_map
        stats_by_level[level] = stats
        new_seeds[level] = seeds

    return SegmentationResult(
        pyramid=pyramid,
        top_level=top,
        label_maps=label_maps,
        stats=stats_by_level,
        new_seeds=new_seeds,
        registry=registry,
    )
