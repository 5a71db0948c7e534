"""Turn a raw RFC-style text document into a section tree.

Three steps, each a pure function:

* ``clean_document`` drops page headers, footers and form feeds.
* ``extract_metadata`` reads the spec number, title, abstract and table of contents.
* ``build_section_tree`` locates every TOC heading in the body and fills the nodes.

The line heuristics live in ``src/data/ingest_rules.json`` so another document style
only needs another rules file.
"""

import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from ..data import data_path
from ..errors import EmptyDocument, MalformedTocEntry, MissingToc, SectionBodyNotFound
from ..logging_config import get_logger
from ..models.jsonio import read_json
from ..models.spec_tree import (
    SECTION_NUMBER_RE,
    RawSpecDocument,
    SectionNode,
    SpecMetadata,
    SpecTree,
    TocEntry,
    parent_number,
)
from .text_matching import heading_match_score, normalize_for_search

logger = get_logger("spec_ingest")

# "3.1.2 Title", "3. Title", "Appendix A. Title", "A.1 Title", "Appendix B"
_NUMBERED_RE = re.compile(
    r"^(?P<appendix>Appendix\s+)?(?P<num>\d+(?:\.\d+)*|[A-Z](?:\.\d+)*)(?P<dot>\.)?"
    r"(?:\s*[-:]\s*|\s+|$)(?P<title>.*?)\s*$"
)
# Dot leaders ". . . ." or "......" followed by a page number
_LEADER_PAGE_RE = re.compile(r"\s*(?:\.\s*){2,}\s*(\d+)\s*$")
# Title followed by two or more spaces and a page number
_SPACED_PAGE_RE = re.compile(r"\s{2,}(\d+)\s*$")
_TRAILING_LEADER_RE = re.compile(r"\s*(?:\.\s*){2,}$")
_LOOKS_NUMBERED_RE = re.compile(r"^\s*\d")


@dataclass
class IngestRules:
    """Line heuristics for one document style."""

    style: str = "rfc"
    drop_line_patterns: List[re.Pattern] = field(default_factory=list)
    toc_heading_patterns: List[re.Pattern] = field(default_factory=list)
    abstract_heading_patterns: List[re.Pattern] = field(default_factory=list)
    spec_number_patterns: List[re.Pattern] = field(default_factory=list)
    unnumbered_headings: List[str] = field(default_factory=list)
    title_match_cutoff: float = 0.6

    @classmethod
    def load(cls, path: Optional[str] = None) -> "IngestRules":
        path = path or data_path("ingest_rules.json")
        data = read_json(path)
        logger.debug(f"Loaded ingest rules '{data.get('style', '?')}' from {path}")
        return cls(
            style=data.get("style", "rfc"),
            drop_line_patterns=[re.compile(p) for p in data.get("drop_line_patterns", [])],
            toc_heading_patterns=[re.compile(p, re.IGNORECASE) for p in data.get("toc_heading_patterns", [])],
            abstract_heading_patterns=[re.compile(p) for p in data.get("abstract_heading_patterns", [])],
            spec_number_patterns=[re.compile(p, re.MULTILINE) for p in data.get("spec_number_patterns", [])],
            unnumbered_headings=data.get("unnumbered_headings", []),
            title_match_cutoff=data.get("title_match_cutoff", 0.6),
        )

    def is_unnumbered_heading(self, line: str, extra: List[str]) -> bool:
        if not line or line[0].isspace():
            return False
        norm = normalize_for_search(line)
        return any(norm == normalize_for_search(h) for h in list(self.unnumbered_headings) + extra)


_default_rules: Optional[IngestRules] = None


def default_rules() -> IngestRules:
    global _default_rules
    if _default_rules is None:
        _default_rules = IngestRules.load()
    return _default_rules


# ---------------------------------------------------------------------------
# Cleaning
# ---------------------------------------------------------------------------


def clean_document(raw: RawSpecDocument, rules: Optional[IngestRules] = None) -> str:
    """Remove page headers, footers and form-feed page breaks.

    Every other line is kept in order. Raises EmptyDocument when nothing but
    whitespace is left.
    """
    rules = rules or default_rules()
    if not raw.text.strip():
        raise EmptyDocument(raw.source_id)

    kept = []
    dropped = 0
    for line in raw.text.split("\n"):
        if "\f" in line:
            line = line.replace("\f", "")
            if not line.strip():
                dropped += 1
                continue
        if any(p.search(line) for p in rules.drop_line_patterns):
            dropped += 1
            continue
        kept.append(line)

    cleaned = "\n".join(kept)
    if not cleaned.strip():
        raise EmptyDocument(raw.source_id)
    logger.debug(f"Cleaned {raw.source_id}: dropped {dropped} header/footer/page-break lines")
    return cleaned


# ---------------------------------------------------------------------------
# Metadata and table of contents
# ---------------------------------------------------------------------------


def _parse_numbered(text: str) -> Optional[Tuple[str, str]]:
    """Split "3.1 Title" / "Appendix A. Title" into (number, title), or None."""
    match = _NUMBERED_RE.match(text)
    if not match:
        return None
    number = match.group("num")
    title = match.group("title")
    is_letter = number[0].isalpha()
    if is_letter and not (match.group("appendix") or match.group("dot") or "." in number):
        # A bare capital letter followed by text is ordinary prose ("A Note on ...")
        return None
    if not is_letter and not (match.group("dot") or "." in number or title):
        return None
    if is_letter and not title:
        title = f"Appendix {number}"
    return number, title


def _strip_page(text: str) -> Tuple[str, bool]:
    """Remove a trailing page number (with or without dot leaders)."""
    for pattern in (_LEADER_PAGE_RE, _SPACED_PAGE_RE):
        match = pattern.search(text)
        if match:
            return text[: match.start()].rstrip(), True
    stripped = _TRAILING_LEADER_RE.sub("", text).rstrip()
    return stripped, False


def _locate_toc(lines: List[str], rules: IngestRules) -> Optional[int]:
    for i, line in enumerate(lines):
        if any(p.match(line) for p in rules.toc_heading_patterns):
            return i
    return None


def _indent(line: str) -> int:
    return len(line) - len(line.lstrip())


def _scan_toc(lines: List[str], start: int) -> Tuple[List[TocEntry], List[str], int]:
    """Parse TOC lines after the heading at ``start``.

    Returns (numbered entries, unnumbered titles, index of the first body line).
    The TOC ends at the first non-blank column-0 line once indented entries were
    seen. A title without a page number continues on deeper-indented lines.
    """
    entries: List[TocEntry] = []
    unnumbered: List[str] = []
    seen_numbers = set()
    toc_indented = True
    # (kind, index, indent) of an entry whose title may continue on the next line
    open_entry: Optional[Tuple[str, int, int]] = None

    i = start + 1
    while i < len(lines):
        line = lines[i]
        stripped = line.strip()
        if not stripped:
            i += 1
            continue
        at_column_zero = not line[0].isspace()
        if not entries and not unnumbered:
            toc_indented = not at_column_zero
        elif at_column_zero and toc_indented:
            break

        text, has_page = _strip_page(stripped)
        parsed = _parse_numbered(text)
        if parsed:
            number, title = parsed
            if number in seen_numbers and not toc_indented:
                # Unindented TOC: the body starts where the first heading repeats
                break
            if not SECTION_NUMBER_RE.match(number) or number in seen_numbers:
                raise MalformedTocEntry(line, i + 1)
            seen_numbers.add(number)
            entries.append(TocEntry(number=number, title=title))
            open_entry = None if has_page else ("numbered", len(entries) - 1, _indent(line))
        elif open_entry is not None and _indent(line) > open_entry[2]:
            kind, index, indent = open_entry
            if kind == "numbered":
                entries[index].title = f"{entries[index].title} {text}".strip()
            else:
                unnumbered[index] = f"{unnumbered[index]} {text}".strip()
            if has_page:
                open_entry = None
        elif _LOOKS_NUMBERED_RE.match(stripped) and not stripped.isdigit():
            raise MalformedTocEntry(line, i + 1)
        elif text:
            unnumbered.append(text)
            open_entry = None if has_page else ("unnumbered", len(unnumbered) - 1, _indent(line))
        i += 1

    return entries, unnumbered, i


def _first_paragraph_after(lines: List[str], index: int) -> str:
    paragraph: List[str] = []
    for line in lines[index + 1:]:
        if not line.strip():
            if paragraph:
                break
            continue
        if not line[0].isspace():
            break
        paragraph.append(line.strip())
    return " ".join(paragraph)


def extract_metadata(cleaned: str, rules: Optional[IngestRules] = None) -> SpecMetadata:
    """Read spec number, title, abstract and TOC entries from cleaned text."""
    rules = rules or default_rules()
    lines = cleaned.split("\n")

    toc_start = _locate_toc(lines, rules)
    if toc_start is None:
        raise MissingToc()
    entries, unnumbered, _ = _scan_toc(lines, toc_start)
    if not entries:
        raise MissingToc()

    spec_number = ""
    for pattern in rules.spec_number_patterns:
        match = pattern.search(cleaned)
        if match:
            spec_number = match.group(1)
            break

    # Title: the first block of lines after the leading header block
    title = ""
    i = 0
    while i < len(lines) and not lines[i].strip():
        i += 1
    while i < len(lines) and lines[i].strip():
        i += 1
    while i < toc_start:
        if lines[i].strip():
            block = []
            while i < toc_start and lines[i].strip():
                block.append(lines[i].strip())
                i += 1
            candidate = " ".join(block)
            if not any(normalize_for_search(candidate) == normalize_for_search(h) for h in rules.unnumbered_headings):
                title = candidate
                break
        i += 1

    abstract = ""
    for index, line in enumerate(lines):
        if any(p.match(line) for p in rules.abstract_heading_patterns):
            abstract = _first_paragraph_after(lines, index)
            break

    if not title:
        title = f"RFC {spec_number}" if spec_number else entries[0].title
        logger.debug(f"No title block found, using '{title}'")
    if not abstract:
        abstract = title
        logger.debug("No abstract found, using the title")

    logger.info(
        f"Metadata: spec {spec_number or '?'} '{title}', {len(entries)} numbered TOC entries, "
        f"{len(unnumbered)} unnumbered"
    )
    return SpecMetadata(
        spec_number=spec_number,
        title=title,
        abstract=abstract,
        toc_entries=entries,
        unnumbered_entries=unnumbered,
    )


# ---------------------------------------------------------------------------
# Section tree
# ---------------------------------------------------------------------------


def _titles_agree(heading_title: str, toc_title: str, cutoff: float) -> bool:
    if not heading_title or not toc_title:
        return True
    a, b = normalize_for_search(heading_title), normalize_for_search(toc_title)
    if a.startswith(b) or b.startswith(a):
        return True
    return heading_match_score(toc_title, heading_title) >= cutoff


def _tidy(lines: List[str]) -> str:
    """Strip surrounding blank lines and collapse blank runs to one."""
    out: List[str] = []
    for line in lines:
        line = line.rstrip()
        if not line and (not out or not out[-1]):
            continue
        out.append(line)
    while out and not out[-1]:
        out.pop()
    return "\n".join(out)


def build_section_tree(
    metadata: SpecMetadata, cleaned: str, rules: Optional[IngestRules] = None
) -> SpecTree:
    """Locate every TOC heading in the body and build the populated tree.

    Column-0 numbered headings absent from the TOC are kept as ``body_only``
    nodes when their parent section exists.
    """
    rules = rules or default_rules()
    lines = cleaned.split("\n")
    toc_start = _locate_toc(lines, rules)
    body_start = _scan_toc(lines, toc_start)[2] if toc_start is not None else 0

    toc_numbers = {e.number for e in metadata.toc_entries}
    # (line index, number or None, heading text, end of heading lines, body_only)
    headings: List[Tuple[int, Optional[str], str, int, bool]] = []
    known = set()
    cursor = 0
    toc = metadata.toc_entries

    i = body_start
    while i < len(lines):
        line = lines[i]
        if not line.strip() or line[0].isspace():
            i += 1
            continue
        parsed = _parse_numbered(line.strip())
        if parsed:
            number, title = parsed
            if cursor < len(toc) and number == toc[cursor].number and _titles_agree(
                title, toc[cursor].title, rules.title_match_cutoff
            ):
                end = i + 1
                full = normalize_for_search(title)
                target = normalize_for_search(toc[cursor].title)
                # Wrapped heading: consume continuation lines of the title
                while (
                    full != target
                    and target.startswith(full)
                    and end < len(lines)
                    and lines[end].strip()
                    and target.startswith(full + normalize_for_search(lines[end]))
                ):
                    full += normalize_for_search(lines[end])
                    end += 1
                headings.append((i, number, toc[cursor].title, end, False))
                known.add(number)
                cursor += 1
                i = end
                continue
            if number not in toc_numbers and parent_number(number) in known:
                headings.append((i, number, title, i + 1, True))
                known.add(number)
                logger.warning(f"Section {number} '{title}' found in body but not in TOC; kept as body-only")
                i += 1
                continue
        if rules.is_unnumbered_heading(line.strip(), metadata.unnumbered_entries):
            headings.append((i, None, line.strip(), i + 1, False))
        i += 1

    if cursor < len(toc):
        missing = toc[cursor]
        raise SectionBodyNotFound(missing.number, missing.title)

    nodes: Dict[str, SectionNode] = {}
    order: List[SectionNode] = []
    unnumbered: Dict[str, str] = {}
    for position, (start, number, title, end, body_only) in enumerate(headings):
        stop = headings[position + 1][0] if position + 1 < len(headings) else len(lines)
        content = _tidy(lines[end:stop])
        if number is None:
            unnumbered[title] = content
            continue
        node = SectionNode(number=number, title=title, content=content, body_only=body_only)
        nodes[number] = node
        order.append(node)

    front = _tidy(lines[body_start: headings[0][0]]) if headings else ""
    if front:
        unnumbered.setdefault("(front matter)", front)

    roots: List[SectionNode] = []
    for node in order:
        parent = nodes.get(parent_number(node.number) or "")
        if parent is not None:
            parent.add_child(node)
        else:
            if parent_number(node.number):
                logger.warning(f"Section {node.number} has no parent section; attached at top level")
            roots.append(node)

    tree = SpecTree(metadata=metadata, roots=roots, unnumbered=unnumbered)
    tree.reindex()
    logger.info(
        f"Built section tree: {tree.size} nodes ({len(tree.body_only_numbers)} body-only), "
        f"{len(unnumbered)} unnumbered blocks"
    )
    return tree


def ingest_file(path: str, rules: Optional[IngestRules] = None) -> SpecTree:
    """Read, clean and parse a specification file."""
    raw = RawSpecDocument.from_file(path)
    cleaned = clean_document(raw, rules)
    metadata = extract_metadata(cleaned, rules)
    return build_section_tree(metadata, cleaned, rules)
