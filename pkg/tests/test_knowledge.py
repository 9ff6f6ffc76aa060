import copy

import numpy as np
import pytest

from descry import (
    KnowledgeBaseError,
    annotate,
    knowledge_base_to_document,
    load_knowledge_base,
    match_object,
    run_pipeline,
    verify_context,
)
from descry.registry import RegionRecord


def square_on_background():
    img = np.full((64, 64), 30.0)
    img[24:40, 24:40] = 200.0
    return img


def scene_document():
    return {
        "stories": [
            {
                "id": "scene",
                "templates": [
                    {
                        "word": "background",
                        "intensity_range": [0.0, 0.4],
                        "size_fraction_range": [0.5, 1.0],
                        "required_relations": [],
                    },
                    {
                        "word": "bright-object",
                        "intensity_range": [0.6, 0.9],
                        "size_fraction_range": [0.01, 0.2],
                        "required_relations": [["sub-part-of", "background"]],
                    },
                ],
            }
        ]
    }


# --- loading and validation ---


def test_empty_story_list_is_valid():
    kb = load_knowledge_base({"stories": []})
    assert kb.stories == ()


def test_round_trip():
    doc = scene_document()
    kb = load_knowledge_base(doc)
    assert knowledge_base_to_document(kb) == doc
    assert load_knowledge_base(knowledge_base_to_document(kb)) == kb


def test_dangling_relation_target_rejected_with_location():
    doc = scene_document()
    doc["stories"][0]["templates"][1]["required_relations"] = [["sub-part-of", "ghost"]]
    with pytest.raises(KnowledgeBaseError, match=r"stories\[0\].templates\[1\].required_relations\[0\]"):
        load_knowledge_base(doc)


def test_duplicate_story_ids_rejected():
    doc = scene_document()
    doc["stories"].append(copy.deepcopy(doc["stories"][0]))
    with pytest.raises(KnowledgeBaseError, match=r"duplicate story id"):
        load_knowledge_base(doc)


def test_duplicate_words_rejected():
    doc = scene_document()
    doc["stories"][0]["templates"][1]["word"] = "background"
    with pytest.raises(KnowledgeBaseError, match=r"duplicate word"):
        load_knowledge_base(doc)


def test_inverted_range_rejected():
    doc = scene_document()
    doc["stories"][0]["templates"][0]["intensity_range"] = [0.9, 0.1]
    with pytest.raises(KnowledgeBaseError, match=r"inverted range"):
        load_knowledge_base(doc)


def test_range_outside_unit_interval_rejected():
    doc = scene_document()
    doc["stories"][0]["templates"][0]["size_fraction_range"] = [0.0, 1.5]
    with pytest.raises(KnowledgeBaseError, match=r"\[0, 1\]"):
        load_knowledge_base(doc)


def test_unknown_predicate_rejected():
    doc = scene_document()
    doc["stories"][0]["templates"][1]["required_relations"] = [["touches", "background"]]
    with pytest.raises(KnowledgeBaseError, match=r"unknown predicate"):
        load_knowledge_base(doc)


def test_malformed_documents_rejected():
    with pytest.raises(KnowledgeBaseError):
        load_knowledge_base([])
    with pytest.raises(KnowledgeBaseError):
        load_knowledge_base({})
    with pytest.raises(KnowledgeBaseError):
        load_knowledge_base({"stories": [{"id": "x"}]})
    with pytest.raises(KnowledgeBaseError):
        load_knowledge_base({"stories": [{"id": "", "templates": []}]})


# --- matching ---


def _record(mean, size):
    return RegionRecord(
        level=0,
        label=1,
        size=size,
        centroid=(0.0, 0.0),
        mean_intensity=mean,
        bbox=(0, 0, 1, 1),
        parent=None,
    )


def _template(intensity, size, word="thing"):
    kb = load_knowledge_base(
        {
            "stories": [
                {
                    "id": "s",
                    "templates": [
                        {
                            "word": word,
                            "intensity_range": list(intensity),
                            "size_fraction_range": list(size),
                            "required_relations": [],
                        }
                    ],
                }
            ]
        }
    )
    return kb.stories[0].templates[0]


def test_match_inside_ranges():
    template = _template((0.6, 0.9), (0.01, 0.2))
    assert match_object(_record(200.0, 256), template, 4096)


def test_match_fails_outside_intensity():
    template = _template((0.0, 0.5), (0.01, 0.2))
    assert not match_object(_record(200.0, 256), template, 4096)


def test_match_boundaries_are_inclusive():
    template = _template((0.5, 0.9), (0.0, 1.0))
    assert match_object(_record(127.5, 1), template, 4096)


# --- context verification and annotation ---


def test_zero_relation_template_scores_one():
    result = run_pipeline(square_on_background())
    kb = load_knowledge_base(scene_document())
    scores = verify_context({1: "background"}, kb.stories[0], result.registry)
    assert scores == {1: 1.0}


def test_subpart_relation_verified_through_hierarchy():
    result = run_pipeline(square_on_background())
    kb = load_knowledge_base(scene_document())
    scores = verify_context(
        {1: "background", 2: "bright-object"}, kb.stories[0], result.registry
    )
    assert scores == {1: 1.0, 2: 1.0}


def test_unassigned_target_leaves_relation_unsatisfied():
    result = run_pipeline(square_on_background())
    kb = load_knowledge_base(scene_document())
    scores = verify_context({2: "bright-object"}, kb.stories[0], result.registry)
    assert scores == {2: 0.0}


def test_annotate_square_fixture():
    result = run_pipeline(square_on_background())
    kb = load_knowledge_base(scene_document())
    annotation = annotate(result.registry, kb)
    assert annotation.story_id == "scene"
    assert annotation.words == {1: "background", 2: "bright-object"}
    assert annotation.context_scores == {1: 1.0, 2: 1.0}


def test_annotate_with_empty_kb_is_all_unknown():
    result = run_pipeline(square_on_background())
    kb = load_knowledge_base({"stories": []})
    annotation = annotate(result.registry, kb)
    assert annotation.story_id is None
    assert annotation.words == {1: "unknown", 2: "unknown"}
    assert annotation.context_scores == {1: 0.0, 2: 0.0}


def test_annotate_picks_the_matching_story():
    doc = scene_document()
    doc["stories"].insert(
        0,
        {
            "id": "nothing-fits",
            "templates": [
                {
                    "word": "void",
                    "intensity_range": [0.99, 1.0],
                    "size_fraction_range": [0.99, 1.0],
                    "required_relations": [],
                }
            ],
        },
    )
    result = run_pipeline(square_on_background())
    annotation = annotate(result.registry, load_knowledge_base(doc))
    assert annotation.story_id == "scene"


def test_removing_unselected_story_changes_nothing():
    doc = scene_document()
    doc["stories"].append(
        {
            "id": "spare",
            "templates": [
                {
                    "word": "noise",
                    "intensity_range": [0.95, 1.0],
                    "size_fraction_range": [0.0, 0.001],
                    "required_relations": [],
                }
            ],
        }
    )
    result = run_pipeline(square_on_background())
    with_spare = annotate(result.registry, load_knowledge_base(doc))
    doc["stories"].pop()
    without = annotate(result.registry, load_knowledge_base(doc))
    assert with_spare.story_id == without.story_id
    assert with_spare.words == without.words
    assert with_spare.context_scores == without.context_scores


def test_theta_gates_low_context_objects():
    doc = scene_document()
    # the bright object now requires an impossible relation
    doc["stories"][0]["templates"][1]["required_relations"] = [["left-of", "background"]]
    result = run_pipeline(square_on_background())
    annotation = annotate(result.registry, load_knowledge_base(doc), theta=0.5)
    assert annotation.words[1] == "background"
    assert annotation.words[2] == "unknown"
    assert annotation.context_scores[2] == 0.0


def test_annotation_covers_every_level0_object_once():
    rng = np.random.default_rng(79)
    img = rng.integers(0, 256, size=(24, 24)).astype(np.float64)
    result = run_pipeline(img)
    kb = load_knowledge_base(scene_document())
    annotation = annotate(result.registry, kb)
    labels = {rec.label for rec in result.registry.at_level(0)}
    assert set(annotation.words) == labels
    assert set(annotation.context_scores) == labels


def test_annotate_does_not_mutate_inputs():
    result = run_pipeline(square_on_background())
    kb = load_knowledge_base(scene_document())
    registry_before = copy.deepcopy(result.registry)
    annotate(result.registry, kb)
    assert result.registry.records == registry_before.records
    assert knowledge_base_to_document(kb) == scene_document()


def test_annotate_is_deterministic():
    result = run_pipeline(square_on_background())
    kb = load_knowledge_base(scene_document())
    first = annotate(result.registry, kb)
    second = annotate(result.registry, kb)
    assert first.story_id == second.story_id
    assert first.words == second.words
    assert first.context_scores == second.context_scores
