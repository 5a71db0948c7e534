"""Specification document and section tree models."""

import os
import re
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Tuple

from ..logging_config import get_logger
from .jsonio import read_json, write_json

logger = get_logger("spec_tree")

# Dotted-decimal ("3.1.2") or appendix-letter ("A", "A.1") section numbers
SECTION_NUMBER_RE = re.compile(r"^(?:\d+|[A-Z])(?:\.\d+)*$")


def section_sort_key(number: str) -> Tuple[Tuple[int, Any], ...]:
    """Sort key ordering numeric components numerically and appendices last."""
    key = []
    for part in number.split("."):
        if part.isdigit():
            key.append((0, int(part)))
        else:
            key.append((1, part))
    return tuple(key)


def parent_number(number: str) -> Optional[str]:
    """Return the number of the enclosing section, or None for a top-level one."""
    if "." not in number:
        return None
    return number.rsplit(".", 1)[0]


@dataclass
class RawSpecDocument:
    """A specification document as read from disk."""

    source_id: str
    text: str

    def __post_init__(self):
        # Normalize line endings before anything else looks at the text
        self.text = self.text.replace("\r\n", "\n").replace("\r", "\n")

    @classmethod
    def from_file(cls, path: str) -> "RawSpecDocument":
        with open(path, "r", encoding="utf-8", errors="replace") as f:
            text = f.read()
        return cls(source_id=os.path.basename(path), text=text)


@dataclass
class TocEntry:
    """One line of the table of contents."""

    number: str
    title: str

    def to_dict(self) -> Dict[str, str]:
        return {"number": self.number, "title": self.title}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TocEntry":
        return cls(number=data["number"], title=data.get("title", ""))


@dataclass
class SpecMetadata:
    """Front-matter facts extracted from the document."""

    spec_number: str
    title: str
    abstract: str
    toc_entries: List[TocEntry] = field(default_factory=list)
    # Unnumbered TOC lines (Abstract, References, Authors' Addresses ...)
    unnumbered_entries: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "spec_number": self.spec_number,
            "title": self.title,
            "abstract": self.abstract,
            "toc_entries": [e.to_dict() for e in self.toc_entries],
            "unnumbered_entries": list(self.unnumbered_entries),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SpecMetadata":
        return cls(
            spec_number=data.get("spec_number", ""),
            title=data.get("title", ""),
            abstract=data.get("abstract", ""),
            toc_entries=[TocEntry.from_dict(e) for e in data.get("toc_entries", [])],
            unnumbered_entries=data.get("unnumbered_entries", []),
        )

    def toc_text(self) -> str:
        """Render the table of contents as indented text for prompts."""
        lines = []
        for entry in self.toc_entries:
            indent = "  " * entry.number.count(".")
            lines.append(f"{indent}{entry.number} {entry.title}")
        return "\n".join(lines)


@dataclass
class SectionNode:
    """A numbered section of the specification."""

    number: str
    title: str
    content: str = ""
    children: List["SectionNode"] = field(default_factory=list)
    parent: Optional["SectionNode"] = field(default=None, repr=False, compare=False)
    depth: int = 1
    body_only: bool = False

    @property
    def is_content_bearing(self) -> bool:
        return bool(self.content.strip())

    @property
    def heading(self) -> str:
        return f"{self.number} {self.title}"

    def add_child(self, child: "SectionNode") -> None:
        """Attach a child keeping children ordered by their numeric components."""
        child.parent = self
        child.depth = self.depth + 1
        self.children.append(child)
        self.children.sort(key=lambda n: section_sort_key(n.number))

    def iter_preorder(self) -> Iterator["SectionNode"]:
        yield self
        for child in self.children:
            yield from child.iter_preorder()

    def to_dict(self) -> Dict[str, Any]:
        d = {
            "number": self.number,
            "title": self.title,
            "depth": self.depth,
            "content": self.content,
            "children": [c.to_dict() for c in self.children],
        }
        if self.body_only:
            d["body_only"] = True
        return d

    @classmethod
    def from_dict(cls, data: Dict[str, Any], parent: Optional["SectionNode"] = None) -> "SectionNode":
        node = cls(
            number=data["number"],
            title=data.get("title", ""),
            content=data.get("content", ""),
            parent=parent,
            depth=data.get("depth", 1 if parent is None else parent.depth + 1),
            body_only=data.get("body_only", False),
        )
        node.children = [cls.from_dict(c, node) for c in data.get("children", [])]
        return node


@dataclass
class SpecTree:
    """Hierarchical representation of a specification document."""

    metadata: SpecMetadata
    roots: List[SectionNode] = field(default_factory=list)
    index: Dict[str, SectionNode] = field(default_factory=dict)
    # Unnumbered matter keyed by heading (front matter before section 1, back matter after the last section)
    unnumbered: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.roots and not self.index:
            self.reindex()

    def reindex(self) -> None:
        """Rebuild the number → node index from the roots."""
        self.index = {}
        for node in self.preorder():
            if node.number in self.index:
                raise ValueError(f"Duplicate section number in tree: {node.number}")
            self.index[node.number] = node

    def preorder(self) -> Iterator[SectionNode]:
        for root in self.roots:
            yield from root.iter_preorder()

    def node(self, number: str) -> SectionNode:
        return self.index[number]

    def resolves(self, number: str) -> bool:
        return number in self.index

    def content_bearing_numbers(self) -> List[str]:
        """Numbers of all sections with a non-empty body, in document order."""
        return [n.number for n in self.preorder() if n.is_content_bearing]

    @property
    def size(self) -> int:
        return len(self.index)

    @property
    def body_only_numbers(self) -> List[str]:
        return [n.number for n in self.preorder() if n.body_only]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "metadata": self.metadata.to_dict(),
            "section_count": self.size,
            "roots": [r.to_dict() for r in self.roots],
            "unnumbered": dict(self.unnumbered),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SpecTree":
        tree = cls(
            metadata=SpecMetadata.from_dict(data.get("metadata", {})),
            roots=[SectionNode.from_dict(r) for r in data.get("roots", [])],
            unnumbered=data.get("unnumbered", {}),
        )
        tree.reindex()
        return tree

    def save(self, path: str) -> None:
        write_json(path, self.to_dict())
        logger.debug(f"Section tree ({self.size} nodes) saved to: {path}")

    @classmethod
    def load(cls, path: str) -> "SpecTree":
        return cls.from_dict(read_json(path))
