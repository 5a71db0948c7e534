"""Stage orchestration: runs the selected stages into a run directory and keeps the manifest.

Each stage reads its predecessors' files under ``<run_dir>/<stage>/`` and writes
its own. A stage whose inputs (config slice plus predecessor checksums) are
unchanged and whose outputs still match the manifest is skipped, so a run can
be resumed from any stage.
"""

import hashlib
import json
import os
import shutil
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional

from ..errors import ForgeError, MissingPredecessorArtifact, StageFailed
from ..logging_config import get_logger
from ..models.analysis import ModuleSet, SectionSummary
from ..models.jsonio import file_sha256, read_json, read_jsonl, write_json, write_jsonl, write_text
from ..models.loop import EscalationTicket, LoopPass, Resolved
from ..models.manifest import RunManifest, StageStatus
from ..models.protocol_models import TestingPoint
from ..models.settings import STAGES, BackendDescriptor, RunConfig
from ..models.spec_tree import SpecTree
from ..models.testcase import TestCase
from .artifact_forge import ForgeContext
from .feedback_loops import CaseOutcome, escalate, run_small_loop
from .high_level_analysis import complete_modules, form_modules, summarize_protocol, summarize_sections
from .knowledge_base import TEMPLATE_DIR, KnowledgeBase
from .llm_gateway import CompletionGateway
from .low_level_modeling import enumerate_points, model_all
from .metrics import score_answers_dir, validation_rate
from .spec_ingest import ingest_file
from .testbed_sim import load_fault_profile, testbed_devices
from .testcase_engine import (
    CaseContext,
    compute_breadth,
    generate_cases,
    judge_all,
    load_reference_cases,
    refine,
    regenerate_case,
    score_suite,
    select_key_sections,
)
from .toolkit import Toolkit

logger = get_logger("pipeline")

DEFAULT_RUN_ID = "default"


@dataclass
class StageContext:
    """What a stage function gets: the config, where to write, and shared gateways."""

    config: RunConfig
    run_dir: str
    run_id: str
    _gateways: Dict[str, CompletionGateway] = field(default_factory=dict)
    _fresh_transcripts: List[str] = field(default_factory=list)

    def stage_dir(self, stage: str) -> str:
        return os.path.join(self.run_dir, stage)

    def path(self, stage: str, *parts: str) -> str:
        return os.path.join(self.run_dir, stage, *parts)

    def gateway(self, stage: str) -> CompletionGateway:
        """One gateway per backend descriptor, shared by every stage using it.

        A recording transcript starts over when a run records from analysis
        onward; a resumed run appends to it.
        """
        descriptor = self.config.backend_for(stage).with_env()
        if descriptor.transcript_path:
            resolved = self.config.resolve(descriptor.transcript_path)
            descriptor = BackendDescriptor(**{**asdict(descriptor), "transcript_path": resolved})
        key = json.dumps(asdict(descriptor), sort_keys=True)
        if key not in self._gateways:
            append = True
            if descriptor.mode == "record" and stage == "analyze" and descriptor.transcript_path not in self._fresh_transcripts:
                append = False
                self._fresh_transcripts.append(descriptor.transcript_path)
            self._gateways[key] = CompletionGateway.from_descriptor(
                descriptor, max_repairs=self.config.analysis.max_repairs, append=append
            )
        return self._gateways[key]

    def require(self, stage: str, predecessor: str, *parts: str) -> str:
        path = self.path(predecessor, *parts)
        if not os.path.exists(path):
            raise MissingPredecessorArtifact(stage, predecessor, path)
        return path


# ---------------------------------------------------------------------------
# Loading earlier stage outputs
# ---------------------------------------------------------------------------


def _load_tree(ctx: StageContext, stage: str) -> SpecTree:
    return SpecTree.load(ctx.require(stage, "ingest", "tree.json"))


def _load_summaries(ctx: StageContext, stage: str) -> Dict[str, SectionSummary]:
    data = read_json(ctx.require(stage, "analyze", "summaries.json"))
    return {number: SectionSummary.from_dict(s) for number, s in data.items()}


def _load_case_context(ctx: StageContext, stage: str) -> CaseContext:
    modules = ModuleSet.from_dict(read_json(ctx.require(stage, "analyze", "modules.json")))
    return CaseContext(
        tree=_load_tree(ctx, stage),
        summaries=_load_summaries(ctx, stage),
        protocol_summary=read_json(ctx.require(stage, "analyze", "protocol_summary.json"))["summary"],
        modules={m.module_name: m for m in modules.modules},
    )


def _load_cases(path: str) -> List[TestCase]:
    return [TestCase.from_dict(c) for c in read_jsonl(path)]


def load_external_suite(path: str) -> List[TestCase]:
    """Read a suite given as JSON lines, a JSON list, or ``{"test_cases": [...]}``."""
    if path.endswith(".jsonl"):
        return _load_cases(path)
    data = read_json(path)
    if isinstance(data, dict):
        data = data.get("test_cases", [])
    return [TestCase.from_dict(c) for c in data]


def _forge_context(ctx: StageContext, stage: str, kb_dir: str) -> ForgeContext:
    config = ctx.config
    return ForgeContext(
        kb=KnowledgeBase.load(kb_dir, devices=testbed_devices()),
        gateway=ctx.gateway(stage),
        options=config.forge,
        loop=config.loop,
        profile=load_fault_profile(config.resolve(config.testbed_profile)),
        run_id=ctx.run_id,
    )


def _write_artifact(directory: str, case_id: str, result: LoopPass) -> None:
    write_text(os.path.join(directory, f"script.{case_id}"), result.artifact.script_text)
    write_text(os.path.join(directory, f"config.{case_id}"), result.artifact.config_text)


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


def stage_ingest(ctx: StageContext) -> None:
    tree = ingest_file(ctx.config.resolve(ctx.config.spec_path))
    tree.save(ctx.path("ingest", "tree.json"))


def stage_analyze(ctx: StageContext) -> None:
    tree = _load_tree(ctx, "analyze")
    gateway = ctx.gateway("analyze")
    options = ctx.config.analysis

    summaries = summarize_sections(tree, gateway)
    protocol_summary = summarize_protocol(tree, summaries, gateway)
    module_set = form_modules(tree, summaries, gateway)
    module_set = complete_modules(
        tree,
        summaries,
        module_set,
        gateway,
        max_iterations=options.max_module_iterations,
        exempt_zero_importance_appendix=options.exempt_zero_importance_appendix,
    )

    write_json(ctx.path("analyze", "summaries.json"), {n: s.to_dict() for n, s in summaries.items()})
    write_json(ctx.path("analyze", "protocol_summary.json"), {"summary": protocol_summary})
    write_json(ctx.path("analyze", "modules.json"), module_set.to_dict())


def stage_model(ctx: StageContext) -> None:
    case_context = _load_case_context(ctx, "model")
    options = ctx.config.analysis
    models = model_all(
        list(case_context.modules.values()),
        case_context.tree,
        ctx.gateway("model"),
        Toolkit.load(),
        summaries=case_context.summaries,
        protocol_summary=case_context.protocol_summary,
        strict_fsm=options.strict_fsm,
        workers=options.workers,
    )
    points = enumerate_points(models)
    write_json(ctx.path("model", "models.json"), [m.to_dict() for m in models])
    write_json(ctx.path("model", "testing_points.json"), [p.to_dict() for p in points])


def stage_generate(ctx: StageContext) -> None:
    case_context = _load_case_context(ctx, "generate")
    points = [TestingPoint.from_dict(p) for p in read_json(ctx.require("generate", "model", "testing_points.json"))]
    cases = generate_cases(
        points, case_context, load_reference_cases(), ctx.gateway("generate"), workers=ctx.config.analysis.workers
    )
    write_jsonl(ctx.path("generate", "testcases.jsonl"), [c.to_dict() for c in cases])


def stage_verify(ctx: StageContext) -> None:
    case_context = _load_case_context(ctx, "verify")
    cases = _load_cases(ctx.require("verify", "generate", "testcases.jsonl"))
    gateway = ctx.gateway("verify")
    coverage = ctx.config.coverage

    key = select_key_sections(case_context.summaries, coverage)
    breadth = compute_breadth(cases, key)
    depth = judge_all(key, cases, case_context, gateway)
    write_json(ctx.path("verify", "key_sections.json"), [k.to_dict() for k in key])
    write_json(ctx.path("verify", "breadth_initial.json"), breadth.to_dict())
    write_json(ctx.path("verify", "depth_initial.json"), depth.to_dict())

    outcome = refine(breadth, depth, gateway, case_context, cases, coverage, load_reference_cases())
    suite = cases + outcome.new_cases
    write_json(ctx.path("verify", "breadth.json"), outcome.breadth.to_dict())
    write_json(ctx.path("verify", "depth.json"), outcome.depth.to_dict())
    write_json(
        ctx.path("verify", "refinement.json"),
        {"rounds": outcome.rounds, "new_cases": [c.case_id for c in outcome.new_cases]},
    )
    write_jsonl(ctx.path("verify", "suite.jsonl"), [c.to_dict() for c in suite])

    if ctx.config.external_suite:
        external = load_external_suite(ctx.config.resolve(ctx.config.external_suite))
        ext_breadth, ext_depth = score_suite(external, key, case_context, gateway)
        write_json(ctx.path("verify", "external_breadth.json"), ext_breadth.to_dict())
        write_json(ctx.path("verify", "external_depth.json"), ext_depth.to_dict())


def stage_forge(ctx: StageContext) -> None:
    cases = _load_cases(ctx.require("forge", "verify", "suite.jsonl"))
    kb_dir = ctx.path("forge", "kb")
    shutil.copytree(ctx.config.resolve(ctx.config.kb_path) or TEMPLATE_DIR, kb_dir)
    forge = _forge_context(ctx, "forge", kb_dir)

    tickets = []
    results = []
    # Sequential: the knowledge base learns from every case before the next one
    for case in cases:
        outcome = run_small_loop(case, forge)
        if isinstance(outcome, LoopPass):
            _write_artifact(ctx.path("forge", "artifacts"), case.case_id, outcome)
            trace = {"status": "pass", "rounds": outcome.rounds, "attempt": outcome.attempt}
            trace["trace"] = [r.to_dict() for r in outcome.trace]
            results.append(
                {"case_id": case.case_id, "status": "pass", "rounds": outcome.rounds,
                 "attempt": outcome.attempt, "executions": outcome.total_executions}
            )
        else:
            tickets.append(outcome.to_dict())
            trace = {"status": "escalated", "trace": [r.to_dict() for r in outcome.trace]}
            results.append(
                {"case_id": case.case_id, "status": "escalated", "rounds": outcome.total_rounds,
                 "executions": len(outcome.trace)}
            )
        write_json(ctx.path("forge", "traces", f"{case.case_id}.json"), trace)

    forge.kb.save()
    write_json(ctx.path("forge", "tickets.json"), tickets)
    write_json(
        ctx.path("forge", "summary.json"),
        {"cases": results, "passed": len(cases) - len(tickets), "escalated": len(tickets)},
    )
    logger.info(f"Forged {len(cases)} case(s): {len(cases) - len(tickets)} passed, {len(tickets)} escalated")


def stage_loop(ctx: StageContext) -> None:
    summary = read_json(ctx.require("loop", "forge", "summary.json"))
    tickets = [EscalationTicket.from_dict(t) for t in read_json(ctx.require("loop", "forge", "tickets.json"))]
    cases = {c.case_id: c for c in _load_cases(ctx.require("loop", "verify", "suite.jsonl"))}
    tree = _load_tree(ctx, "loop")

    kb_dir = ctx.path("loop", "kb")
    shutil.copytree(ctx.require("loop", "forge", "kb"), kb_dir)
    forge = _forge_context(ctx, "loop", kb_dir)
    gateway = ctx.gateway("loop")
    outputs = ctx.path("loop", "outputs")
    os.makedirs(outputs, exist_ok=True)

    def regenerate(case, origin, evidence, new_id):
        return regenerate_case(case, origin.value, evidence, gateway, tree, new_id)

    outcomes = []
    for entry in summary["cases"]:
        if entry["status"] == "pass":
            for kind in ("script", "config"):
                name = f"{kind}.{entry['case_id']}"
                shutil.copyfile(ctx.require("loop", "forge", "artifacts", name), os.path.join(outputs, name))
            outcomes.append({k: entry[k] for k in ("case_id", "status", "rounds", "attempt", "executions")})

    escalations = []
    regenerated = []
    for ticket in tickets:
        case = cases[ticket.case_id]
        large = escalate(
            ticket, case, regenerate, lambda c: run_small_loop(c, forge), ctx.config.loop.regeneration_passes
        )
        outcome = CaseOutcome(case, ticket, large)
        if isinstance(large, Resolved):
            _write_artifact(outputs, case.case_id, large.passes[0])
            regenerated.extend(large.new_cases)
        else:
            regenerated.extend(large.attempted_cases)
        escalations.append(outcome.summary())
        outcomes.append({"case_id": case.case_id, "status": outcome.status})

    forge.kb.save()
    outcomes.sort(key=lambda o: o["case_id"])
    write_json(ctx.path("loop", "escalations.json"), escalations)
    write_jsonl(ctx.path("loop", "regenerated_cases.jsonl"), [c.to_dict() for c in regenerated])
    write_json(ctx.path("loop", "outcomes.json"), outcomes)


def stage_metrics(ctx: StageContext) -> None:
    outcomes = read_json(ctx.require("metrics", "loop", "outcomes.json"))
    counts: Dict[str, int] = {}
    for outcome in outcomes:
        counts[outcome["status"]] = counts.get(outcome["status"], 0) + 1
    verdicts = {o["case_id"]: o["status"] in ("pass", "resolved") for o in outcomes}

    report = {
        "cases": len(outcomes),
        "status_counts": dict(sorted(counts.items())),
        "simulated_validation_rate": validation_rate(list(verdicts.values())) if verdicts else None,
    }
    if ctx.config.answers_dir:
        scored = score_answers_dir(
            ctx.config.resolve(ctx.config.answers_dir),
            ctx.require("metrics", "loop", "outputs"),
            {case_id: {"script": ok, "config": ok} for case_id, ok in verdicts.items()},
        )
        report["answers"] = {kind: r.to_dict() for kind, r in scored.items()}
    write_json(ctx.path("metrics", "metric_report.json"), report)


STAGE_FUNCTIONS: Dict[str, Callable[[StageContext], None]] = {
    "ingest": stage_ingest,
    "analyze": stage_analyze,
    "model": stage_model,
    "generate": stage_generate,
    "verify": stage_verify,
    "forge": stage_forge,
    "loop": stage_loop,
    "metrics": stage_metrics,
}


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------


def _file_digest(path: str) -> str:
    if not path or not os.path.exists(path):
        return ""
    if os.path.isfile(path):
        return file_sha256(path)
    digest = hashlib.sha256()
    for rel in _tree_files(path):
        digest.update(rel.encode("utf-8"))
        digest.update(file_sha256(os.path.join(path, rel)).encode("ascii"))
    return digest.hexdigest()


def _tree_files(root: str) -> List[str]:
    files = []
    for dirpath, _, filenames in os.walk(root):
        for name in filenames:
            files.append(os.path.relpath(os.path.join(dirpath, name), root).replace(os.sep, "/"))
    return sorted(files)


def config_slice(config: RunConfig, stage: str) -> Dict[str, object]:
    """The part of the configuration a stage's output depends on."""
    backend = asdict(config.backend_for(stage))
    backend.pop("api_key", None)
    if stage == "ingest":
        return {"spec": _file_digest(config.resolve(config.spec_path))}
    if stage in ("analyze", "model", "generate"):
        return {"backend": backend, "analysis": asdict(config.analysis)}
    if stage == "verify":
        return {
            "backend": backend,
            "coverage": asdict(config.coverage),
            "external_suite": _file_digest(config.resolve(config.external_suite)),
        }
    if stage in ("forge", "loop"):
        return {
            "backend": backend,
            "forge": asdict(config.forge),
            "loop": asdict(config.loop),
            "kb": _file_digest(config.resolve(config.kb_path)),
            "testbed_profile": _file_digest(config.resolve(config.testbed_profile)),
        }
    return {"answers": _file_digest(config.resolve(config.answers_dir))}


def _input_digest(config: RunConfig, stage: str, manifest: RunManifest) -> str:
    index = STAGES.index(stage)
    predecessors = {}
    for earlier in STAGES[:index]:
        record = manifest.get(earlier)
        if record is not None:
            predecessors[earlier] = record.artifacts
    payload = json.dumps({"config": config_slice(config, stage), "inputs": predecessors}, sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _check_predecessor(stage: str, manifest: RunManifest, run_dir: str) -> None:
    index = STAGES.index(stage)
    if index == 0:
        return
    predecessor = STAGES[index - 1]
    record = manifest.get(predecessor)
    if record is None or record.status != StageStatus.DONE:
        raise MissingPredecessorArtifact(stage, predecessor, os.path.join(run_dir, predecessor))
    if not record.checksums_match(run_dir):
        raise MissingPredecessorArtifact(stage, predecessor, os.path.join(run_dir, predecessor))


def run(config: RunConfig, run_dir: Optional[str] = None) -> RunManifest:
    """Run the selected stages; returns the updated manifest.

    Raises:
        ConfigError: the configuration is invalid
        MissingPredecessorArtifact: the first selected stage has nothing to read
        StageFailed: a stage raised; the manifest records the failure
    """
    config.validate()
    run_dir = run_dir or config.resolve(config.output_dir)
    os.makedirs(run_dir, exist_ok=True)
    run_id = config.run_id or DEFAULT_RUN_ID
    manifest = RunManifest.load(run_dir) or RunManifest(run_id)
    manifest.run_id = run_id
    ctx = StageContext(config, run_dir, run_id)

    stages = config.selected_stages()
    logger.info(f"Run {run_id} in {run_dir}: stages {', '.join(stages)}")
    for stage in stages:
        _check_predecessor(stage, manifest, run_dir)
        digest = _input_digest(config, stage, manifest)
        record = manifest.record(stage)
        if record.status == StageStatus.DONE and record.input_digest == digest and record.checksums_match(run_dir):
            logger.info(f"Stage {stage}: inputs unchanged, skipped")
            continue

        stage_dir = ctx.stage_dir(stage)
        if os.path.exists(stage_dir):
            shutil.rmtree(stage_dir)
        os.makedirs(stage_dir)
        # Later stages read this one; a rerun invalidates them
        for later in STAGES[STAGES.index(stage) + 1:]:
            later_record = manifest.get(later)
            if later_record is not None:
                later_record.status = StageStatus.PENDING

        logger.info(f"Stage {stage}: running")
        started = time.perf_counter()
        try:
            STAGE_FUNCTIONS[stage](ctx)
        except (ForgeError, OSError, ValueError, KeyError) as e:
            record.status = StageStatus.FAILED
            record.seconds = time.perf_counter() - started
            record.error = str(e)
            record.artifacts = {}
            manifest.save(run_dir)
            if isinstance(e, MissingPredecessorArtifact):
                logger.error(str(e))
                raise
            logger.error(f"Stage {stage} failed: {e}", exc_info=True)
            raise StageFailed(stage, e) from e

        record.seconds = time.perf_counter() - started
        record.status = StageStatus.DONE
        record.error = ""
        record.input_digest = digest
        record.artifacts = {
            f"{stage}/{rel}": file_sha256(os.path.join(stage_dir, rel)) for rel in _tree_files(stage_dir)
        }
        manifest.save(run_dir)
        logger.info(f"Stage {stage}: done in {record.seconds:.2f}s ({len(record.artifacts)} file(s))")
    return manifest
