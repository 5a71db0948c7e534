"""Cleaning, metadata and section-tree construction."""

import os
import time

import pytest

from src.errors import EmptyDocument, MalformedTocEntry, MissingToc, SectionBodyNotFound
from src.models.spec_tree import RawSpecDocument, SpecTree
from src.services.spec_ingest import build_section_tree, clean_document, extract_metadata, ingest_file

TINY = """Request for Comments: 1234                                  Example

              Tiny Protocol

Abstract

   A tiny protocol used by the ingest tests.

Table of Contents

   1. Overview ................................................... 1
   2. Details .................................................... 1
      2.1. Sub Detail ............................................ 2

1.  Overview

   Overview body.

2.  Details

   Details body.

2.1.  Sub Detail

   Sub body.
"""


def parse(text):
    cleaned = clean_document(RawSpecDocument("tiny.txt", text))
    return build_section_tree(extract_metadata(cleaned), cleaned)


def test_mini_rfc_tree(mini_tree):
    assert mini_tree.size == 14
    assert mini_tree.metadata.spec_number == "9999"
    assert mini_tree.metadata.title == "Route Information Exchange Lite (RIX-Lite)"
    assert [r.number for r in mini_tree.roots] == ["1", "2", "3", "4", "5", "6", "7", "A"]
    assert [c.number for c in mini_tree.node("4").children] == ["4.1", "4.2", "4.3", "4.4"]
    assert mini_tree.node("3.1").depth == 2
    assert "Author's Address" in mini_tree.unnumbered


def test_page_furniture_is_removed(mini_tree):
    for node in mini_tree.preorder():
        assert "[Page" not in node.content
        assert "RFC 9999" not in node.content
    # 4.2 spans a page break and stays one body
    assert mini_tree.node("4.2").content.endswith("whose source is not on a directly connected network.")


def test_every_toc_entry_resolves(mini_tree):
    for entry in mini_tree.metadata.toc_entries:
        assert mini_tree.resolves(entry.number)


def test_tiny_document():
    tree = parse(TINY)
    assert tree.size == 3
    assert tree.metadata.spec_number == "1234"
    assert tree.metadata.title == "Tiny Protocol"
    assert tree.metadata.abstract == "A tiny protocol used by the ingest tests."
    assert tree.node("2.1").content == "Sub body."
    assert tree.node("2.1").parent is tree.node("2")


def test_body_only_heading_is_kept():
    text = TINY + "\n2.2.  Extra\n\n   Not in the table of contents.\n"
    tree = parse(text)
    assert tree.size == 4
    assert tree.body_only_numbers == ["2.2"]
    assert tree.node("2.2").parent is tree.node("2")


def test_missing_body_raises():
    text = TINY.replace("2.1.  Sub Detail\n\n   Sub body.\n", "")
    with pytest.raises(SectionBodyNotFound) as info:
        parse(text)
    assert info.value.section_number == "2.1"


def test_missing_toc_raises():
    text = TINY.replace("Table of Contents", "Overview of Parts")
    with pytest.raises(MissingToc):
        parse(text)


def test_malformed_toc_entry_raises():
    text = TINY.replace("   2. Details ....", "   2x. Details ...")
    with pytest.raises(MalformedTocEntry):
        parse(text)


def test_empty_document_raises():
    with pytest.raises(EmptyDocument):
        clean_document(RawSpecDocument("blank.txt", "  \n\f\n  "))


def test_saved_tree_loads_back(tmp_path, mini_rfc_path):
    tree = ingest_file(mini_rfc_path)
    path = str(tmp_path / "tree.json")
    tree.save(path)
    loaded = SpecTree.load(path)
    assert loaded.to_dict() == tree.to_dict()
    assert loaded.node("3.2").parent.number == "3"


RFC_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data", "rfc")


@pytest.mark.parametrize("name, sections", [("rfc2453.txt", 36), ("rfc2328.txt", 154), ("rfc4271.txt", 81)])
def test_full_rfc_section_counts(name, sections):
    path = os.path.join(RFC_DIR, name)
    if not os.path.isfile(path):
        pytest.skip(f"{name} not present under tests/data/rfc")
    started = time.perf_counter()
    tree = ingest_file(path)
    assert time.perf_counter() - started < 1.0
    assert abs(tree.size - sections) <= 3
