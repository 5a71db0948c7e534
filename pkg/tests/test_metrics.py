"""Recall, similarity, validation rate and the fix-time estimate."""

from functools import lru_cache

import pytest
from hypothesis import given, strategies as st

from src.errors import DivisionByZero, EmptyAnswer, PreconditionViolation
from src.models.metrics import LineSequence
from src.services.metrics import (
    CONFIG,
    SCRIPT,
    compare,
    compare_files,
    edit_distance,
    estimate_fix_time,
    fix_time_table,
    line_recall,
    score_answers_dir,
    similarity,
    speedup,
    to_sequence,
    validation_rate,
)

lines = st.lists(st.sampled_from(["a", "b", "c", "d"]), max_size=8)


def brute_force_distance(a, b):
    @lru_cache(maxsize=None)
    def d(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))

    return d(len(a), len(b))


def test_fix_time_and_speedup():
    fix = estimate_fix_time(9.10, 0.897, 0.724, 104.4)
    assert fix == pytest.approx(12.07, abs=0.05)
    assert speedup(104.4, fix) == pytest.approx(8.65, abs=0.02)
    assert fix_time_table(9.10, 0.897, 0.724, 104.4) == (fix, speedup(104.4, fix))


def test_fix_time_rejects_bad_inputs():
    with pytest.raises(PreconditionViolation):
        estimate_fix_time(1.0, 1.5, 0.5, 10.0)
    with pytest.raises(DivisionByZero):
        speedup(10.0, 0.0)


def test_validation_rate_matches_counts():
    assert validation_rate([True] * 26 + [False] * 3) == pytest.approx(0.897, abs=0.001)
    assert validation_rate([True] * 27 + [False] * 2) == pytest.approx(0.931, abs=0.001)
    with pytest.raises(PreconditionViolation):
        validation_rate([])


@given(lines, lines)
def test_edit_distance_matches_dp_oracle(a, b):
    assert edit_distance(a, b) == brute_force_distance(tuple(a), tuple(b))


@given(lines, lines)
def test_similarity_bounds(a, b):
    value = similarity(LineSequence(a), LineSequence(b))
    assert 0.0 <= value <= 1.0
    assert (value == 1.0) == (a == b)


@given(lines, lines, st.sampled_from(["a", "b", "e"]))
def test_recall_grows_with_output(answer, output, extra):
    if not answer:
        return
    before = line_recall(LineSequence(answer), LineSequence(output))
    after = line_recall(LineSequence(answer), LineSequence(output + [extra]))
    assert after >= before


def test_recall_counts_duplicates_as_multiset():
    answer = LineSequence(["a", "a", "b"])
    assert line_recall(answer, LineSequence(["a", "b"])) == pytest.approx(2 / 3)


def test_empty_answer():
    assert line_recall(LineSequence(), LineSequence()) == 1.0
    assert line_recall(LineSequence(), LineSequence(["x"])) == 0.0
    with pytest.raises(EmptyAnswer):
        line_recall(LineSequence(), LineSequence(["x"]), strict=True)
    assert "empty_answer" in compare(LineSequence(), LineSequence(["x"])).flags


def test_netmask_and_cidr_are_the_same_unit():
    a = to_sequence(["ip address 10.0.0.1 255.255.255.0"], CONFIG)
    b = to_sequence(["ip address 10.0.0.1/24"], CONFIG)
    assert a.lines == b.lines == ["ip address 10.0.0.1/24"]


def test_default_route_mask_is_prefix_zero():
    mask_form = to_sequence(["ip route 0.0.0.0 0.0.0.0 10.0.0.1"], CONFIG)
    cidr_form = to_sequence(["ip route 0.0.0.0/0 10.0.0.1"], CONFIG)
    assert mask_form.lines == cidr_form.lines == ["ip route 0.0.0.0/0 10.0.0.1"]
    assert similarity(mask_form, cidr_form) == 1.0


def test_non_contiguous_mask_is_left_alone():
    assert to_sequence(["ip address 10.0.0.1 255.0.255.0"], CONFIG).lines == ["ip address 10.0.0.1 255.0.255.0"]


def test_config_and_equivalent_rewrite_score_one():
    original = ["interface GigabitEthernet0/0", " ip address 10.0.0.1 255.255.255.0", " no shutdown"]
    rewritten = ["! same thing, short forms", "int gi0/0", " ip address 10.0.0.1/24", " no shut"]
    report = compare(to_sequence(original, CONFIG), to_sequence(rewritten, CONFIG))
    assert report.similarity == 1.0
    assert report.recall == 1.0


def test_script_call_forms_are_equivalent():
    plain = to_sequence(["send_message 1 Request"], SCRIPT)
    called = to_sequence(["tester.send_message(1, 'Request')", "import tester"], SCRIPT)
    assert plain.lines == called.lines == ["send_message 1 Request"]


def test_compare_files_and_answers_dir(tmp_path):
    answers = tmp_path / "answers"
    outputs = tmp_path / "outputs"
    answers.mkdir()
    outputs.mkdir()
    (answers / "config.TC-0001").write_text("hostname DUT\ninterface GigabitEthernet0/0\n no shutdown\n")
    (outputs / "config.TC-0001").write_text("hostname DUT\ninterface GigabitEthernet0/0\n")
    (answers / "script.TC-0001").write_text("assert_alive\n")
    (outputs / "script.TC-0001").write_text("assert_alive\n")
    (answers / "config.TC-0002").write_text("hostname DUT\n")

    single = compare_files(str(answers / "config.TC-0001"), str(outputs / "config.TC-0001"), CONFIG)
    assert single.recall == pytest.approx(2 / 3)
    assert single.similarity == pytest.approx(2 / 3)

    scored = score_answers_dir(
        str(answers), str(outputs), {"TC-0001": {"script": True, "config": True}}
    )
    assert scored[SCRIPT].recall == 1.0
    assert scored[SCRIPT].validation_rate == 1.0
    # TC-0002 has no generated config: scored as empty and not validated
    assert scored[CONFIG].n_total == 2
    assert scored[CONFIG].validation_rate == 0.5
    assert scored[CONFIG].recall == pytest.approx((2 / 3 + 0.0) / 2)
