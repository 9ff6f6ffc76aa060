"""Coarse-to-fine image structure extraction with a taught annotation layer.

The pipeline shrinks a grayscale image into an averaging pyramid, segments
the small top level, refines the labeling while descending back to full
resolution, registers every region's attributes and relations per level, and
can annotate the full-resolution objects against an externally supplied
knowledge base.
"""

from .density import density_curve, information_density, select_working_scale
from .knowledge import (
    Annotation,
    KnowledgeBase,
    KnowledgeBaseError,
    ObjectTemplate,
    Story,
    annotate,
    annotation_to_document,
    knowledge_base_to_document,
    load_knowledge_base,
    match_object,
    read_knowledge_base,
    verify_context,
)
from .pgm import PgmError, read_pgm, write_pgm
from .pyramid import Pyramid, build_pyramid, downsample_once, validate_image
from .registry import (
    NEW,
    ObjectRegistry,
    RegionRecord,
    register_level,
    registry_to_document,
    spatial_relations,
)
from .segment import (
    RegionStats,
    SegmentationConfig,
    SegmentationResult,
    expand_maps,
    refine_level,
    run_pipeline,
    segment_top,
)

__version__ = "0.1.0"

__all__ = [
    "Annotation",
    "KnowledgeBase",
    "KnowledgeBaseError",
    "NEW",
    "ObjectRegistry",
    "ObjectTemplate",
    "PgmError",
    "Pyramid",
    "RegionRecord",
    "RegionStats",
    "SegmentationConfig",
    "SegmentationResult",
    "Story",
    "annotate",
    "annotation_to_document",
    "build_pyramid",
    "density_curve",
    "downsample_once",
    "expand_maps",
    "information_density",
    "knowledge_base_to_document",
    "load_knowledge_base",
    "match_object",
    "read_knowledge_base",
    "read_pgm",
    "refine_level",
    "register_level",
    "registry_to_document",
    "run_pipeline",
    "segment_top",
    "select_working_scale",
    "spatial_relations",
    "validate_image",
    "verify_context",
    "write_pgm",
]
