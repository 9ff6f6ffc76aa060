"""Region records per level: size, centroid, intensity, hierarchy, topology.

Parent links point one level up the pyramid and are decided by majority vote
over each pixel's 2x2 parent cell (ties go to the smaller label). Regions born
during refinement carry NEW instead of a parent; top-level regions carry None.

Directional relations use a half-pixel margin on centroids and are recorded
between touching regions; containment is strict bounding-box nesting and is
recorded for every nested pair.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "NEW",
    "RegionRecord",
    "ObjectRegistry",
    "register_level",
    "spatial_relations",
    "registry_to_document",
]

NEW = "new"

_CENTROID_MARGIN = 0.5


@dataclass
class RegionRecord:
    """Attributes of one labeled region at one pyramid level."""

    level: int
    label: int
    size: int
    centroid: tuple[float, float]
    mean_intensity: float
    bbox: tuple[int, int, int, int]
    parent: int | str | None
    adjacent: set[int] = field(default_factory=set)
    relations: set[tuple[str, int]] = field(default_factory=set)


@dataclass
class ObjectRegistry:
    """All region records of a run, keyed by (level, label)."""

    records: dict[tuple[int, int], RegionRecord] = field(default_factory=dict)

    def add(self, records) -> None:
        for rec in records:
            key = (rec.level, rec.label)
            if key in self.records:
                raise ValueError(f"duplicate registry key {key}")
            self.records[key] = rec

    def get(self, level: int, label: int) -> RegionRecord | None:
        return self.records.get((level, label))

    def levels(self) -> list[int]:
        """Registered levels, coarsest first."""
        return sorted({level for level, _ in self.records}, reverse=True)

    def at_level(self, level: int) -> list[RegionRecord]:
        recs = [rec for (lvl, _), rec in self.records.items() if lvl == level]
        recs.sort(key=lambda rec: rec.label)
        return recs

    def level_pixel_count(self, level: int) -> int:
        return sum(rec.size for rec in self.at_level(level))


def register_level(label_map, image, parent_label_map, new_seed_labels, level: int):
    """Build one RegionRecord per label present in the map.

    parent_label_map is the map one level up (None at the top level); labels
    listed in new_seed_labels are flagged NEW instead of voting for a parent.
    """
    lm = np.asarray(label_map, dtype=np.int64)
    img = np.asarray(image, dtype=np.float64)
    if lm.shape != img.shape:
        raise ValueError(f"label map shape {lm.shape} does not match image {img.shape}")
    h, w = lm.shape
    flat = lm.ravel()
    rows = np.repeat(np.arange(h, dtype=np.int64), w)
    cols = np.tile(np.arange(w, dtype=np.int64), h)

    counts = np.bincount(flat)
    labels = np.flatnonzero(counts)
    sums = np.bincount(flat, weights=img.ravel())
    sum_r = np.bincount(flat, weights=rows)
    sum_c = np.bincount(flat, weights=cols)

    order = np.argsort(flat, kind="stable")
    sorted_flat = flat[order]
    starts = np.flatnonzero(np.r_[True, sorted_flat[1:] != sorted_flat[:-1]])
    rows_sorted = rows[order]
    cols_sorted = cols[order]
    min_r = np.minimum.reduceat(rows_sorted, starts)
    max_r = np.maximum.reduceat(rows_sorted, starts)
    min_c = np.minimum.reduceat(cols_sorted, starts)
    max_c = np.maximum.reduceat(cols_sorted, starts)

    parent_of: dict[int, int] = {}
    if parent_label_map is not None:
        parent_lm = np.asarray(parent_label_map, dtype=np.int64)
        expect = ((h + 1) // 2, (w + 1) // 2)
        if parent_lm.shape != expect:
            raise ValueError(
                f"parent map shape {parent_lm.shape} does not match expected {expect}"
            )
        votes = parent_lm[rows // 2, cols // 2]
        modulus = int(parent_lm.max()) + 1
        keys, tallies = np.unique(flat * modulus + votes, return_counts=True)
        vote_labels = (keys // modulus).tolist()
        vote_parents = (keys % modulus).tolist()
        best_count: dict[int, int] = {}
        for lbl, parent, tally in zip(vote_labels, vote_parents, tallies.tolist()):
            if tally > best_count.get(lbl, -1):
                best_count[lbl] = tally
                parent_of[lbl] = parent

    seeds = set(new_seed_labels)
    records = []
    for idx, lbl in enumerate(labels.tolist()):
        size = int(counts[lbl])
        if lbl in seeds:
            parent: int | str | None = NEW
        elif parent_label_map is None:
            parent = None
        else:
            parent = parent_of[lbl]
        records.append(
            RegionRecord(
                level=level,
                label=lbl,
                size=size,
                centroid=(float(sum_r[lbl]) / size, float(sum_c[lbl]) / size),
                mean_intensity=float(sums[lbl]) / size,
                bbox=(int(min_r[idx]), int(min_c[idx]), int(max_r[idx]), int(max_c[idx])),
                parent=parent,
            )
        )
    return records


def spatial_relations(records, label_map):
    """Fill in adjacency and the left-of / above / contains relations.

    left-of and above hold between touching regions whose centroids differ by
    more than half a pixel along the respective axis; contains holds whenever
    one bounding box strictly nests inside another.
    """
    lm = np.asarray(label_map, dtype=np.int64)
    by_label = {rec.label: rec for rec in records}

    pair_keys = []
    modulus = int(lm.max()) + 1
    for a, b in (
        (lm[:, :-1].ravel(), lm[:, 1:].ravel()),
        (lm[:-1, :].ravel(), lm[1:, :].ravel()),
    ):
        mask = a != b
        if mask.any():
            lo = np.minimum(a[mask], b[mask])
            hi = np.maximum(a[mask], b[mask])
            pair_keys.append(lo * modulus + hi)
    if pair_keys:
        for key in np.unique(np.concatenate(pair_keys)).tolist():
            x, y = by_label[key // modulus], by_label[key % modulus]
            x.adjacent.add(y.label)
            y.adjacent.add(x.label)
            if x.centroid[1] < y.centroid[1] - _CENTROID_MARGIN:
                x.relations.add(("left-of", y.label))
            elif y.centroid[1] < x.centroid[1] - _CENTROID_MARGIN:
                y.relations.add(("left-of", x.label))
            if x.centroid[0] < y.centroid[0] - _CENTROID_MARGIN:
                x.relations.add(("above", y.label))
            elif y.centroid[0] < x.centroid[0] - _CENTROID_MARGIN:
                y.relations.add(("above", x.label))

    ordered = sorted(records, key=lambda rec: rec.label)
    boxes = np.array([rec.bbox for rec in ordered], dtype=np.int64)
    # Strict nesting needs at least a 3x3 outer box.
    holders = np.flatnonzero(
        (boxes[:, 2] - boxes[:, 0] >= 2) & (boxes[:, 3] - boxes[:, 1] >= 2)
    )
    for i in holders.tolist():
        outer = boxes[i]
        inside = (
            (boxes[:, 0] > outer[0])
            & (boxes[:, 1] > outer[1])
            & (boxes[:, 2] < outer[2])
            & (boxes[:, 3] < outer[3])
        )
        for j in np.flatnonzero(inside).tolist():
            ordered[i].relations.add(("contains", ordered[j].label))
    return records


def registry_to_document(registry: ObjectRegistry) -> dict:
    """JSON-ready document: levels from the pyramid top down to level 0."""
    levels = []
    for level in registry.levels():
        records = []
        for rec in registry.at_level(level):
            records.append(
                {
                    "level": rec.level,
                    "label": rec.label,
                    "size": rec.size,
                    "centroid": [rec.centroid[0], rec.centroid[1]],
                    "mean_intensity": rec.mean_intensity,
                    "bbox": list(rec.bbox),
                    "parent": rec.parent,
                    "adjacent": sorted(rec.adjacent),
                    "relations": [list(rel) for rel in sorted(rec.relations)],
                }
            )
        levels.append({"level": level, "records": records})
    return {"levels": levels}
