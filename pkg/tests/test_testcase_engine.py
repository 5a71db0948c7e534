"""Key-section selection, case generation, coverage scoring and refinement."""

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from src.errors import PreconditionViolation, UnknownClassification
from src.models.analysis import Classification, SectionSummary
from src.models.protocol_models import Origin, TestingPoint
from src.models.settings import CoverageConfig
from src.models.testcase import CaseKind, KeySection, TestCase
from src.services.testcase_engine import (
    NO_COVERAGE,
    REFERENCE_DRIFT,
    CaseContext,
    compute_breadth,
    compute_score,
    generate_case,
    generate_cases,
    judge_all,
    judge_depth,
    load_reference_cases,
    refine,
    regenerate_case,
    score_suite,
    select_key_sections,
)

CLASSES = [c.value for c in Classification]


def make_case(case_id, refs, title="basic", steps=("Send a Request message.",), expected=("Reply.",)):
    return TestCase(case_id, title, "objective", list(steps), list(expected), list(refs))


def case_answer(refs, title="t"):
    return json.dumps(
        {"title": title, "steps": ["s"], "expected_results": ["e"], "reference_sections": refs}
    )


@pytest.fixture
def context(mini_tree):
    return CaseContext(mini_tree, summaries={}, protocol_summary="RIX-Lite")


def header_point():
    return TestingPoint(
        title="Field Command validation",
        objective="Verify that the DUT enforces the Command field (bits 0..7).",
        reference_sections=["3.1"],
        origin=Origin.FIELD,
        parameters={"field": "Command", "constraints": ["A router MUST silently discard ..."]},
        module_name="Header",
        point_id="P-0001",
    )


def test_score_is_importance_times_weight():
    config = CoverageConfig()
    assert compute_score(SectionSummary("1", test_importance=80, classification=Classification.FUNCTIONAL), config) == 80
    assert compute_score(SectionSummary("1", test_importance=80, classification=Classification.DESCRIPTIVE), config) == 32
    with pytest.raises(UnknownClassification):
        compute_score(
            SectionSummary("1", test_importance=80, classification=Classification.APPENDIX),
            CoverageConfig(weight_map={"functional": 1.0}),
        )


summary_lists = st.lists(
    st.tuples(st.integers(0, 100), st.sampled_from(CLASSES)), min_size=0, max_size=20
)


def summaries_from(pairs):
    return {
        str(i): SectionSummary(str(i), test_importance=imp, classification=Classification(cls))
        for i, (imp, cls) in enumerate(pairs, 1)
    }


@given(pairs=summary_lists, threshold=st.floats(0, 100))
def test_key_sections_match_the_score_rule(pairs, threshold):
    config = CoverageConfig(threshold=threshold)
    selected = select_key_sections(summaries_from(pairs), config)
    expected = [
        str(i) for i, (imp, cls) in enumerate(pairs, 1) if imp * config.weight_map[cls] >= threshold
    ]
    assert [k.section_number for k in selected] == expected


@given(pairs=summary_lists, low=st.floats(0, 100), high=st.floats(0, 100))
def test_raising_the_threshold_never_adds_sections(pairs, low, high):
    low, high = min(low, high), max(low, high)
    summaries = summaries_from(pairs)
    loose = {k.section_number for k in select_key_sections(summaries, CoverageConfig(threshold=low))}
    strict = {k.section_number for k in select_key_sections(summaries, CoverageConfig(threshold=high))}
    assert strict <= loose


@given(pairs=summary_lists, cls=st.sampled_from(CLASSES), bump=st.floats(0, 1))
def test_raising_a_weight_never_removes_sections(pairs, cls, bump):
    summaries = summaries_from(pairs)
    base = CoverageConfig()
    weights = dict(base.weight_map)
    weights[cls] = max(weights[cls], bump)
    before = {k.section_number for k in select_key_sections(summaries, base)}
    after = {k.section_number for k in select_key_sections(summaries, CoverageConfig(weight_map=weights))}
    assert before <= after


def test_offline_case_for_a_field_point(context, offline_gateway):
    case = generate_case(header_point(), context, load_reference_cases(), offline_gateway, "TC-0001")
    assert case.case_id == "TC-0001"
    assert case.title == "Invalid Command field is discarded"
    assert case.reference_sections == ["3.1"]
    assert case.origin == "field"
    assert case.point_id == "P-0001"
    assert case.kind == CaseKind.INITIAL
    assert any("invalid Command field" in s for s in case.steps)


def test_point_preconditions(context, offline_gateway):
    point = header_point()
    point.objective = "  "
    with pytest.raises(PreconditionViolation):
        generate_case(point, context, [], offline_gateway)
    point = header_point()
    point.reference_sections = []
    with pytest.raises(PreconditionViolation):
        generate_case(point, context, [], offline_gateway)


def test_dropped_reference_is_restored(context, scripted_gateway):
    gateway = scripted_gateway([case_answer(["4.1", "99"])])
    case = generate_case(header_point(), context, [], gateway, "TC-0001")
    assert case.reference_sections == ["3.1", "4.1"]
    assert case.flags == [REFERENCE_DRIFT]


def test_case_ids_follow_point_order(context, offline_gateway):
    points = [header_point() for _ in range(5)]
    cases = generate_cases(points, context, [], offline_gateway, workers=3)
    assert [c.case_id for c in cases] == [f"TC-{i:04d}" for i in range(1, 6)]


def test_breadth_coverage():
    keys = [KeySection("3.1", 70.0), KeySection("4.1", 65.0)]
    report = compute_breadth([make_case("TC-0001", ["3.1", "7"])], keys)
    assert report.covered == ["3.1"]
    assert report.uncovered == ["4.1"]
    assert report.coverage_rate == 0.5

    empty = compute_breadth([make_case("TC-0001", ["3.1"])], [])
    assert empty.coverage_rate == 0.0
    assert empty.flags == ["empty_key_set"]


def test_section_without_cases_scores_zero(context, offline_gateway):
    entry = judge_depth("4.1", context, [], offline_gateway)
    assert (entry.basic_function_score, entry.boundary_case_score) == (0, 0)
    assert entry.suggestions == [NO_COVERAGE]
    assert offline_gateway.call_count == 0


def test_refinement_fills_breadth_then_depth(context, offline_gateway):
    keys = [KeySection("3.1", 70.0), KeySection("4.1", 65.0)]
    malformed = make_case(
        "TC-0001", ["3.1"], title="Invalid Command field is discarded",
        steps=["Send a Request message with an invalid Command field."],
    )
    breadth = compute_breadth([malformed], keys)
    depth = judge_all(keys, [malformed], context, offline_gateway)
    assert depth.entry("3.1").basic_function_score == 75
    assert depth.entry("3.1").boundary_case_score == 80

    outcome = refine(breadth, depth, offline_gateway, context, [malformed], CoverageConfig())
    assert outcome.rounds == 1
    kinds = [(c.case_id, c.kind, c.reference_sections) for c in outcome.new_cases]
    assert kinds == [
        ("TC-0002", CaseKind.BREADTH_SUPPLEMENT, ["4.1"]),
        ("TC-0003", CaseKind.BREADTH_SUPPLEMENT, ["4.1"]),
        ("TC-0004", CaseKind.DEPTH_SUPPLEMENT, ["3.1"]),
    ]
    assert all(c.refinement_round == 1 for c in outcome.new_cases)
    assert outcome.breadth.coverage_rate == 1.0
    assert outcome.depth.entry("3.1").basic_function_score == 90


def test_zero_refinement_rounds(context, offline_gateway):
    keys = [KeySection("4.1", 65.0)]
    breadth = compute_breadth([], keys)
    depth = judge_all(keys, [], context, offline_gateway)
    outcome = refine(breadth, depth, offline_gateway, context, [], CoverageConfig(max_refinement_rounds=0))
    assert outcome.rounds == 0
    assert outcome.new_cases == []


def test_regenerated_case_keeps_its_lineage(mini_tree, scripted_gateway):
    original = make_case("TC-0001", ["3.1"])
    original.origin, original.point_id = "field", "P-0001"
    regenerated = regenerate_case(
        original, "test_case", "evidence", scripted_gateway([case_answer(["3.1"], title="v2")]), mini_tree, "TC-0009"
    )
    assert regenerated.case_id == "TC-0009"
    assert regenerated.kind == CaseKind.REGENERATED
    assert (regenerated.origin, regenerated.point_id) == ("field", "P-0001")
    assert regenerated.title == "v2"


def test_external_suite_ignores_unknown_sections(context, offline_gateway):
    keys = [KeySection("3.1", 70.0), KeySection("4.1", 65.0)]
    suite = [make_case("EXT-1", ["4.1"]), make_case("EXT-2", ["12.4"])]
    breadth, depth = score_suite(suite, keys, context, offline_gateway)
    assert breadth.covered == ["4.1"]
    assert depth.entry("3.1").suggestions == [NO_COVERAGE]
    assert depth.entry("4.1").case_count == 1
