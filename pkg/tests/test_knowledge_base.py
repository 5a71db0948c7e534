"""Knowledge base loading, summary-index retrieval, experience pool and few-shot store."""

import os

import pytest

from src.errors import EmptyIndex, ForgeKnowledgeError
from src.models.artifact import ExperienceEntry, FewShotExample, FineGrainedIntent, SummaryIndexNode
from src.models.testbed import FaultCategory
from src.services.knowledge_base import (
    ExperiencePool,
    FewShotStore,
    KnowledgeBase,
    error_signature,
    retrieve,
)
from src.services.testbed_sim import testbed_devices

SEED = "[config_reject] line 2: ip addres 10.9.9.9/24 - unknown command"


@pytest.fixture
def kb(tmp_path):
    return KnowledgeBase.load(KnowledgeBase.init_default(str(tmp_path / "kb")), devices=testbed_devices())


def intents():
    return FineGrainedIntent(script_intents=["Send a Request message"])


def test_error_signature_ignores_lines_numbers_and_addresses():
    assert error_signature("line 3: IP addres 10.0.0.1/24  timeout 30") == "ip addres <addr> timeout <n>"


def test_seed_entry_matches_the_same_mistake(kb):
    entry = kb.pool.lookup(SEED, cutoff=0.8)
    assert entry is not None
    assert entry.resolution == "replace 'ip addres' with 'ip address'"
    assert entry.hit_count == 1


def test_near_miss_depends_on_the_cutoff(kb):
    near = "[config_reject] ip adress 10.0.0.1/24 - unknown command"
    assert kb.pool.lookup(near, cutoff=0.9) is None
    assert kb.pool.lookup(near, cutoff=0.8) is not None


def test_record_keeps_one_entry_per_signature():
    pool = ExperiencePool()
    assert pool.record("line 1: no such call foo", FaultCategory.SYNTAX_ERROR, "use bar")
    assert not pool.record("line 9: no such call foo", FaultCategory.SYNTAX_ERROR, "use baz")
    assert len(pool) == 1
    assert pool.entries[0].hit_count == 1
    assert pool.entries[0].resolution == "use bar"


def test_duplicate_signatures_are_rejected():
    entry = ExperienceEntry("x <n>", FaultCategory.SYNTAX_ERROR, "fix")
    with pytest.raises(ForgeKnowledgeError):
        ExperiencePool([entry, ExperienceEntry("x <n>", FaultCategory.ENVIRONMENT, "other")])


def test_retrieval_finds_the_traffic_leaf(kb):
    hits = kb.retrieve("send_malformed", k=2)
    assert hits[0].entry_id == "tester-api.traffic"
    assert hits[0].path == ["tester-api", "tester-api.traffic"]
    assert "send_malformed" in hits[0].payload
    assert not hits[0].low_confidence


def test_retrieval_falls_back_to_top_level_branches(kb):
    hits = kb.retrieve("zzzz qqqq", k=5)
    assert [h.entry_id for h in hits] == ["tester-api.ports", "dut-cli.interfaces", "dut-behaviour"]
    assert all(h.low_confidence and h.score == 0.0 for h in hits)
    assert len(kb.retrieve("zzzz qqqq", k=2)) == 2
    assert kb.retrieve("send_malformed", k=0) == []


def test_empty_index():
    with pytest.raises(EmptyIndex):
        retrieve(SummaryIndexNode("root", "nothing"), "query", 3)


def test_init_refuses_existing_target(tmp_path):
    with pytest.raises(ForgeKnowledgeError):
        KnowledgeBase.init_default(str(tmp_path))


def test_inventory_must_name_testbed_devices(tmp_path):
    root = KnowledgeBase.init_default(str(tmp_path / "kb"))
    with pytest.raises(ForgeKnowledgeError):
        KnowledgeBase.load(root, devices=["DUT"])
    with pytest.raises(ForgeKnowledgeError):
        KnowledgeBase.load(str(tmp_path / "missing"))


def test_refreshed_summary_and_pool_survive_save(kb, tmp_path):
    assert kb.refresh_summary("tester-api.traffic", ["poison"])
    assert not kb.refresh_summary("tester-api.traffic", ["poison"])
    kb.pool.record("line 4: boom 7", FaultCategory.ENVIRONMENT, "retry")

    target = kb.save(str(tmp_path / "copy"))
    reloaded = KnowledgeBase.load(target)
    assert len(reloaded.pool) == 2
    assert reloaded.retrieve("poison", k=1)[0].entry_id == "tester-api.traffic"
    assert os.path.isfile(os.path.join(target, "payloads", "tester_traffic.md"))


def test_few_shot_store_evicts_the_weakest():
    weak = FewShotExample("A", "case a", intents(), passes=0, uses=2)
    strong = FewShotExample("B", "case b", intents(), passes=2, uses=2)
    store = FewShotStore([weak, strong], capacity=2)

    assert store.offer("C", "case c", intents())
    assert [e.case_id for e in store.examples] == ["C", "B"]
    assert not store.offer("C", "case c", intents())

    store.note_use(["B"], passed=False)
    assert store.examples[1].pass_rate == pytest.approx(2 / 3)
    assert [e.case_id for e in store.select("case b", 1)] == ["C"]
