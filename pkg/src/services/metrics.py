"""Accuracy and efficiency metrics for generated artifacts.

Scripts are compared call by call, configs command by command, both after
normalization so equivalent spellings count as the same line.
"""

import os
from collections import Counter
from typing import Dict, List, Optional, Sequence, Tuple

from ..errors import DivisionByZero, EmptyAnswer, PreconditionViolation
from ..logging_config import get_logger
from ..models.metrics import LineSequence, MetricReport
from .line_normalizer import CONFIG, SCRIPT, EquivalenceRules, normalize_line, normalize_lines

logger = get_logger("metrics")

__all__ = [
    "CONFIG",
    "SCRIPT",
    "normalize_line",
    "to_sequence",
    "read_sequence",
    "line_recall",
    "edit_distance",
    "similarity",
    "validation_rate",
    "estimate_fix_time",
    "speedup",
    "compare",
    "compare_files",
    "aggregate",
    "score_answers_dir",
    "fix_time_table",
]


def to_sequence(raw_lines: Sequence[str], kind: str, rules: Optional[EquivalenceRules] = None) -> LineSequence:
    return LineSequence(normalize_lines(list(raw_lines), kind, rules))


def read_sequence(path: str, kind: str, rules: Optional[EquivalenceRules] = None) -> LineSequence:
    with open(path, "r", encoding="utf-8") as f:
        return to_sequence(f.read().splitlines(), kind, rules)


def _matched(answer: LineSequence, output: LineSequence) -> int:
    return sum((Counter(answer.lines) & Counter(output.lines)).values())


def line_recall(answer: LineSequence, output: LineSequence, strict: bool = False) -> float:
    """Share of answer lines present in the output, counted as multisets.

    An empty answer leaves recall undefined: 1.0 when the output is empty too,
    0.0 otherwise, with a warning. ``strict`` raises EmptyAnswer instead.
    """
    if not answer.lines:
        if strict:
            raise EmptyAnswer()
        value = 1.0 if not output.lines else 0.0
        logger.warning(f"Empty reference answer; recall reported as {value}")
        return value
    return _matched(answer, output) / len(answer)


def edit_distance(a: Sequence[str], b: Sequence[str]) -> int:
    """Levenshtein distance over whole lines, unit costs."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, unit_a in enumerate(a, 1):
        current = [i]
        for j, unit_b in enumerate(b, 1):
            current.append(min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (unit_a != unit_b),
            ))
        previous = current
    return previous[-1]


def similarity(answer: LineSequence, output: LineSequence) -> float:
    longest = max(len(answer), len(output))
    if longest == 0:
        return 1.0
    return 1.0 - edit_distance(answer.lines, output.lines) / longest


def validation_rate(verdicts: Sequence[bool]) -> float:
    if not verdicts:
        raise PreconditionViolation("validation rate needs at least one verdict")
    return sum(1 for v in verdicts if v) / len(verdicts)


def estimate_fix_time(gen_time_min: float, vr: float, sim: float, manual_time_min: float) -> float:
    """Expected minutes to get a validated artifact: generation plus the manual share of fixing."""
    if gen_time_min < 0 or manual_time_min < 0:
        raise PreconditionViolation("times must be >= 0")
    if not (0.0 <= vr <= 1.0 and 0.0 <= sim <= 1.0):
        raise PreconditionViolation("VR and SIM must be in [0, 1]")
    return gen_time_min + (1.0 - vr) * (1.0 - sim) * manual_time_min


def speedup(manual_time_min: float, fix_time_min: float) -> float:
    if fix_time_min == 0:
        raise DivisionByZero("speedup")
    return manual_time_min / fix_time_min


def compare(answer: LineSequence, output: LineSequence, label: str = "") -> MetricReport:
    report = MetricReport(label=label)
    report.matched_lines = _matched(answer, output)
    report.answer_lines = len(answer)
    report.edit_distance = edit_distance(answer.lines, output.lines)
    report.len_ans = len(answer)
    report.len_out = len(output)
    report.recall = line_recall(answer, output)
    report.similarity = similarity(answer, output)
    if not answer.lines:
        report.flags.append("empty_answer")
    return report


def compare_files(
    answer_path: str, output_path: str, kind: str, rules: Optional[EquivalenceRules] = None
) -> MetricReport:
    answer = read_sequence(answer_path, kind, rules)
    output = read_sequence(output_path, kind, rules)
    return compare(answer, output, label=os.path.basename(output_path))


def aggregate(reports: List[MetricReport], verdicts: Sequence[bool], label: str) -> MetricReport:
    """Mean recall and similarity over per-case reports, plus VR over the verdicts."""
    total = MetricReport(label=label)
    if reports:
        total.recall = sum(r.recall or 0.0 for r in reports) / len(reports)
        total.similarity = sum(r.similarity or 0.0 for r in reports) / len(reports)
        for r in reports:
            total.matched_lines += r.matched_lines
            total.answer_lines += r.answer_lines
            total.edit_distance += r.edit_distance
            total.len_ans += r.len_ans
            total.len_out += r.len_out
            total.flags.extend(f"{r.label}:{flag}" for flag in r.flags)
    if verdicts:
        total.validation_rate = validation_rate(verdicts)
        total.n_validated = sum(1 for v in verdicts if v)
        total.n_total = len(verdicts)
    return total


def score_answers_dir(
    answers_dir: str,
    outputs_dir: str,
    verdicts: Dict[str, Dict[str, bool]],
    rules: Optional[EquivalenceRules] = None,
) -> Dict[str, MetricReport]:
    """Compare every ``script.<id>`` / ``config.<id>`` answer with the generated file of the same name.

    ``verdicts`` maps case id to {"script": bool, "config": bool}; cases
    without a generated file count as failed and score against an empty output.
    """
    results: Dict[str, MetricReport] = {}
    for kind in (SCRIPT, CONFIG):
        per_case: List[MetricReport] = []
        kind_verdicts: List[bool] = []
        for name in sorted(os.listdir(answers_dir)):
            if not name.startswith(kind + "."):
                continue
            case_id = name[len(kind) + 1:]
            answer = read_sequence(os.path.join(answers_dir, name), kind, rules)
            output_path = os.path.join(outputs_dir, name)
            if os.path.isfile(output_path):
                output = read_sequence(output_path, kind, rules)
            else:
                logger.warning(f"No generated {kind} for {case_id}; scored as empty")
                output = LineSequence()
            per_case.append(compare(answer, output, label=case_id))
            kind_verdicts.append(verdicts.get(case_id, {}).get(kind, False))
        results[kind] = aggregate(per_case, kind_verdicts, label=kind)
        logger.info(f"Scored {len(per_case)} {kind} answer(s)")
    return results


def fix_time_table(
    gen_time_min: float, vr: float, sim: float, manual_time_min: float
) -> Tuple[float, float]:
    fix = estimate_fix_time(gen_time_min, vr, sim, manual_time_min)
    return fix, speedup(manual_time_min, fix)
