"""Externally authored knowledge base and the annotator that applies it.

A knowledge base is a pool of stories; each story lists word templates with
intensity and size-fraction ranges plus relations the object is expected to
stand in. The base is loaded as a whole and is never updated from image data:
annotation only reads it.
"""

import json
from dataclasses import dataclass, field

from .registry import ObjectRegistry, RegionRecord

__all__ = [
    "PREDICATES",
    "UNKNOWN",
    "KnowledgeBaseError",
    "ObjectTemplate",
    "Story",
    "KnowledgeBase",
    "Annotation",
    "load_knowledge_base",
    "read_knowledge_base",
    "knowledge_base_to_document",
    "match_object",
    "verify_context",
    "annotate",
    "annotation_to_document",
]

PREDICATES = ("left-of", "above", "contains", "sub-part-of")

UNKNOWN = "unknown"

DEFAULT_THETA = 0.5


class KnowledgeBaseError(Exception):
    """Raised when a knowledge-base document fails validation."""


@dataclass(frozen=True)
class ObjectTemplate:
    word: str
    intensity_range: tuple[float, float]
    size_fraction_range: tuple[float, float]
    required_relations: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class Story:
    id: str
    templates: tuple[ObjectTemplate, ...]

    def template_for(self, word: str) -> ObjectTemplate | None:
        for template in self.templates:
            if template.word == word:
                return template
        return None


@dataclass(frozen=True)
class KnowledgeBase:
    stories: tuple[Story, ...]


@dataclass
class Annotation:
    """Words and context scores for every level-0 object, plus the story used."""

    story_id: str | None
    words: dict[int, str] = field(default_factory=dict)
    context_scores: dict[int, float] = field(default_factory=dict)
    level: int = 0


def _fail(location: str, message: str):
    raise KnowledgeBaseError(f"{location}: {message}")


def _check_range(value, location: str) -> tuple[float, float]:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
    ):
        _fail(location, f"expected a [lo, hi] pair of numbers, got {value!r}")
    lo, hi = float(value[0]), float(value[1])
    if lo > hi:
        _fail(location, f"inverted range: lo {lo} exceeds hi {hi}")
    if lo < 0.0 or hi > 1.0:
        _fail(location, f"range [{lo}, {hi}] must lie within [0, 1]")
    return lo, hi


def _parse_template(spec, location: str) -> ObjectTemplate:
    if not isinstance(spec, dict):
        _fail(location, f"expected an object, got {type(spec).__name__}")
    word = spec.get("word")
    if not isinstance(word, str) or not word:
        _fail(location, f"missing or empty 'word' (got {word!r})")
    intensity = _check_range(spec.get("intensity_range"), f"{location}.intensity_range")
    size = _check_range(spec.get("size_fraction_range"), f"{location}.size_fraction_range")
    relations = []
    raw = spec.get("required_relations", [])
    if not isinstance(raw, list):
        _fail(f"{location}.required_relations", "expected a list of [predicate, word] pairs")
    for k, item in enumerate(raw):
        where = f"{location}.required_relations[{k}]"
        if not isinstance(item, (list, tuple)) or len(item) != 2:
            _fail(where, f"expected a [predicate, word] pair, got {item!r}")
        predicate, target = item
        if predicate not in PREDICATES:
            _fail(where, f"unknown predicate {predicate!r} (allowed: {', '.join(PREDICATES)})")
        if not isinstance(target, str) or not target:
            _fail(where, f"missing or empty target word (got {target!r})")
        relations.append((predicate, target))
    return ObjectTemplate(
        word=word,
        intensity_range=intensity,
        size_fraction_range=size,
        required_relations=tuple(relations),
    )


def load_knowledge_base(document) -> KnowledgeBase:
    """Validate a parsed JSON document and build the knowledge base."""
    if not isinstance(document, dict):
        _fail("document", f"expected a JSON object, got {type(document).__name__}")
    raw_stories = document.get("stories")
    if not isinstance(raw_stories, list):
        _fail("document", "missing 'stories' list")
    stories = []
    seen_ids = set()
    for i, raw in enumerate(raw_stories):
        location = f"stories[{i}]"
        if not isinstance(raw, dict):
            _fail(location, f"expected an object, got {type(raw).__name__}")
        story_id = raw.get("id")
        if not isinstance(story_id, str) or not story_id:
            _fail(location, f"missing or empty 'id' (got {story_id!r})")
        if story_id in seen_ids:
            _fail(location, f"duplicate story id {story_id!r}")
        seen_ids.add(story_id)
        raw_templates = raw.get("templates")
        if not isinstance(raw_templates, list):
            _fail(location, "missing 'templates' list")
        templates = []
        words = set()
        for j, spec in enumerate(raw_templates):
            template = _parse_template(spec, f"{location}.templates[{j}]")
            if template.word in words:
                _fail(f"{location}.templates[{j}]", f"duplicate word {template.word!r}")
            words.add(template.word)
            templates.append(template)
        for j, template in enumerate(templates):
            for k, (_, target) in enumerate(template.required_relations):
                if target not in words:
                    _fail(
                        f"{location}.templates[{j}].required_relations[{k}]",
                        f"relation targets {target!r}, which names no word in this story",
                    )
        stories.append(Story(id=story_id, templates=tuple(templates)))
    return KnowledgeBase(stories=tuple(stories))


def read_knowledge_base(path) -> KnowledgeBase:
    """Load a knowledge base from a JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise KnowledgeBaseError(
            f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from None
    return load_knowledge_base(document)


def knowledge_base_to_document(kb: KnowledgeBase) -> dict:
    return {
        "stories": [
            {
                "id": story.id,
                "templates": [
                    {
                        "word": t.word,
                        "intensity_range": list(t.intensity_range),
                        "size_fraction_range": list(t.size_fraction_range),
                        "required_relations": [list(rel) for rel in t.required_relations],
                    }
                    for t in story.templates
                ],
            }
            for story in kb.stories
        ]
    }


def match_object(record: RegionRecord, template: ObjectTemplate, level_pixel_count: int) -> bool:
    """Inclusive range test on normalized intensity and size fraction."""
    intensity = record.mean_intensity / 255.0
    fraction = record.size / level_pixel_count
    lo, hi = template.intensity_range
    if not lo <= intensity <= hi:
        return False
    lo, hi = template.size_fraction_range
    return lo <= fraction <= hi


def _ancestor_chain(registry: ObjectRegistry, level: int, label: int) -> dict[int, RegionRecord]:
    """Records reachable from (level, label) by walking parent links upward."""
    chain: dict[int, RegionRecord] = {}
    current = registry.get(level, label)
    while current is not None:
        chain[current.level] = current
        if not isinstance(current.parent, int):
            break
        current = registry.get(current.level + 1, current.parent)
    return chain


def _is_subpart(registry: ObjectRegistry, level: int, label: int, other: int) -> bool:
    """True when, at some shared level of the two parent chains, the other
    object's ancestor bounding box strictly contains this object's ancestor."""
    inner_chain = _ancestor_chain(registry, level, label)
    outer_chain = _ancestor_chain(registry, level, other)
    for shared in inner_chain.keys() & outer_chain.keys():
        inner = inner_chain[shared]
        outer = outer_chain[shared]
        if inner.label == outer.label:
            continue
        if (
            outer.bbox[0] < inner.bbox[0]
            and outer.bbox[1] < inner.bbox[1]
            and outer.bbox[2] > inner.bbox[2]
            and outer.bbox[3] > inner.bbox[3]
        ):
            return True
    return False


def verify_context(
    assignment: dict[int, str],
    story: Story,
    registry: ObjectRegistry,
    level: int = 0,
) -> dict[int, float]:
    """Score each assigned object by the fraction of its required relations
    that some suitably assigned object satisfies. No relations scores 1.0."""
    by_word: dict[int, str] = dict(assignment)
    holders: dict[str, list[int]] = {}
    for label, word in by_word.items():
        holders.setdefault(word, []).append(label)

    scores: dict[int, float] = {}
    for label, word in by_word.items():
        template = story.template_for(word)
        if template is None or not template.required_relations:
            scores[label] = 1.0
            continue
        satisfied = 0
        record = registry.get(level, label)
        for predicate, target_word in template.required_relations:
            ok = False
            for other in holders.get(target_word, []):
                if other == label:
                    continue
                if predicate == "sub-part-of":
                    ok = _is_subpart(registry, level, label, other)
                else:
                    ok = (predicate, other) in record.relations
                if ok:
                    break
            satisfied += ok
        scores[label] = satisfied / len(template.required_relations)
    return scores


def annotate(registry: ObjectRegistry, kb: KnowledgeBase, theta: float = DEFAULT_THETA) -> Annotation:
    """Label the level-0 objects against the best-supported story.

    Per story, objects (in label order) greedily claim the first template they
    match; the story whose assignment puts the most objects at or above theta
    wins (ties go to the earlier story). Objects that match nothing or fall
    below theta come out as "unknown".
    """
    objects = registry.at_level(0)
    pixel_count = sum(rec.size for rec in objects)

    best_assignment: dict[int, str] = {}
    best_scores: dict[int, float] = {}
    best_story: str | None = None
    best_value = -1
    for story in kb.stories:
        assignment: dict[int, str] = {}
        claimed: set[str] = set()
        for rec in objects:
            for template in story.templates:
                if template.word in claimed:
                    continue
                if match_object(rec, template, pixel_count):
                    assignment[rec.label] = template.word
                    claimed.add(template.word)
                    break
        scores = verify_context(assignment, story, registry)
        value = sum(1 for label in assignment if scores[label] >= theta)
        if value > best_value:
            best_value = value
            best_assignment = assignment
            best_scores = scores
            best_story = story.id

    words: dict[int, str] = {}
    context_scores: dict[int, float] = {}
    for rec in objects:
        score = best_scores.get(rec.label, 0.0)
        word = best_assignment.get(rec.label)
        words[rec.label] = word if word is not None and score >= theta else UNKNOWN
        context_scores[rec.label] = score
    return Annotation(story_id=best_story, words=words, context_scores=context_scores)


def annotation_to_document(annotation: Annotation) -> dict:
    return {
        "story": annotation.story_id,
        "objects": [
            {
                "level": annotation.level,
                "label": label,
                "word": annotation.words[label],
                "context_score": annotation.context_scores[label],
            }
            for label in sorted(annotation.words)
        ],
    }
