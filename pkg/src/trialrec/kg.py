"""Typed clinical-trial knowledge graph: node/relation vocabulary, deterministic
node identifiers, triple store, and the on-disk graph format.

The graph is built once by a single writer (see :mod:`trialrec.ingest`) and is
an immutable snapshot afterwards; nothing here mutates a graph post-build
except :meth:`KnowledgeGraph.add_node` / :meth:`KnowledgeGraph.upsert_triple`.
"""

from __future__ import annotations

import hashlib
import re
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path


class GraphError(Exception):
    """Base class for graph construction and lookup failures."""


class InvalidValueError(GraphError):
    """Rejected input: empty or malformed raw value for a node id."""


class UnknownNodeError(GraphError):
    """A triple endpoint references a node id not present in the graph."""


class SchemaViolationError(GraphError):
    """A triple's endpoint types do not match its relation signature."""


class NodeType(Enum):
    """The 15 node types of the trial graph schema."""

    AGE = "AGE"  # age group (categorical)
    CNT = "CNT"  # country (categorical)
    ECR = "ECR"  # exclusion criterion (textual)
    GEN = "GEN"  # gender (categorical)
    ICR = "ICR"  # inclusion criterion (textual)
    IND = "IND"  # indication / condition (concept)
    INT = "INT"  # intervention (concept)
    MOA = "MOA"  # mechanism of action (concept)
    NCT = "NCT"  # clinical trial (registry)
    PH = "PH"    # phase (categorical)
    STA = "STA"  # overall status (categorical)
    TGT = "TGT"  # drug target (concept)
    OEP = "oep"  # other endpoint (textual)
    PEP = "pep"  # primary endpoint (textual)
    SEP = "sep"  # secondary endpoint (textual)

    @property
    def tag(self) -> str:
        return self.value

    @classmethod
    def from_tag(cls, tag: str) -> "NodeType":
        try:
            return _NODE_TAGS[tag]
        except KeyError:
            raise InvalidValueError(f"unknown node type tag: {tag!r}") from None


_NODE_TAGS = {t.value: t for t in NodeType}

# Partition of the node types by how their ids are assigned.
CATEGORICAL_TYPES = frozenset({NodeType.AGE, NodeType.GEN, NodeType.PH, NodeType.STA, NodeType.CNT})
REGISTRY_TYPES = frozenset({NodeType.NCT})
CONCEPT_TYPES = frozenset({NodeType.IND, NodeType.INT, NodeType.MOA, NodeType.TGT})
TEXTUAL_TYPES = frozenset({NodeType.ECR, NodeType.ICR, NodeType.OEP, NodeType.PEP, NodeType.SEP})


class RelationType(Enum):
    """The 15 edge types; each tag encodes its (head, tail) type signature."""

    INT_MOA = "INT:MOA"
    INT_TGT = "INT:TGT"
    MOA_TGT = "MOA:TGT"
    NCT_AGE = "NCT:AGE"
    NCT_CNT = "NCT:CNT"
    NCT_ECR = "NCT:ECR"
    NCT_GEN = "NCT:GEN"
    NCT_ICR = "NCT:ICR"
    NCT_IND = "NCT:IND"
    NCT_INT = "NCT:INT"
    NCT_PH = "NCT:PH"
    NCT_ST = "NCT:ST"     # connects NCT to STA nodes
    NCT_OEP = "NCT:oep"
    NCT_PEP = "NCT:pep"
    NCT_SEP = "NCT:sep"

    @property
    def tag(self) -> str:
        return self.value

    @property
    def signature(self) -> tuple[NodeType, NodeType]:
        return _SIGNATURES[self]

    @classmethod
    def from_tag(cls, tag: str) -> "RelationType":
        try:
            return _RELATION_TAGS[tag]
        except KeyError:
            raise InvalidValueError(f"unknown relation type tag: {tag!r}") from None


_RELATION_TAGS = {r.value: r for r in RelationType}

# "ST" is the historical tail tag for status edges; every other tail tag
# matches a NodeType tag directly.
_TAIL_ALIASES = {"ST": NodeType.STA}


def _signature_from_tag(tag: str) -> tuple[NodeType, NodeType]:
    head_tag, tail_tag = tag.split(":")
    tail = _TAIL_ALIASES.get(tail_tag) or NodeType.from_tag(tail_tag)
    return NodeType.from_tag(head_tag), tail


_SIGNATURES = {r: _signature_from_tag(r.value) for r in RelationType}

_NCT_ID_RE = re.compile(r"^NCT\d{8}$")
_NON_ALNUM_RE = re.compile(r"[^0-9a-z]+")
_WS_RE = re.compile(r"\s+")


def normalize_text(text: str) -> str:
    """Canonicalize free text: Unicode NFC, lowercase, collapse whitespace, trim."""
    text = unicodedata.normalize("NFC", text).lower()
    return _WS_RE.sub(" ", text).strip()


def content_hash(text: str) -> str:
    """Deterministic 32-hex content key of normalized text (UTF-8, no newline)."""
    return hashlib.md5(normalize_text(text).encode("utf-8")).hexdigest()


def categorical_token(node_type: NodeType, raw_value: str) -> str:
    """Canonical id for a categorical value, e.g. ``ph:phase_2``."""
    slug = _NON_ALNUM_RE.sub("_", raw_value.lower()).strip("_")
    return f"{node_type.tag.lower()}:{slug}"


def assign_node_id(node_type: NodeType, raw_value: str, concept_id: str | None = None) -> str:
    """Derive the deterministic node id for a raw entity value.

    Textual types hash their normalized text; concept types pass through a
    supplied concept identifier and fall back to the content hash; categorical
    types use a canonical token; trial ids are taken verbatim after validation.
    """
    if node_type in CATEGORICAL_TYPES:
        if not raw_value.strip():
            raise InvalidValueError(f"empty categorical value for {node_type.tag}")
        return categorical_token(node_type, raw_value)
    if not raw_value or not normalize_text(raw_value):
        raise InvalidValueError(f"empty value for node type {node_type.tag}")
    if node_type in REGISTRY_TYPES:
        rid = raw_value.strip()
        if not _NCT_ID_RE.match(rid):
            raise InvalidValueError(f"malformed registry id: {raw_value!r}")
        return rid
    if node_type in CONCEPT_TYPES and concept_id:
        return concept_id.strip()
    return content_hash(raw_value)


@dataclass(frozen=True)
class Node:
    """A typed graph node. Textual and trial nodes carry their text as the
    single attribute; categorical and concept nodes have none."""

    id: str
    node_type: NodeType
    attribute_text: str | None = None


@dataclass(frozen=True)
class Triple:
    head: str
    relation: RelationType
    tail: str


@dataclass
class GraphStats:
    node_count_by_type: dict[str, int]
    edge_count_by_type: dict[str, int]
    total_nodes: int
    total_edges: int


class KnowledgeGraph:
    """Node and triple store with schema checking on insert.

    Construction is single-writer; once a build finishes the instance is
    treated as an immutable snapshot and is safe for concurrent readers.
    """

    def __init__(self) -> None:
        self.nodes: dict[str, Node] = {}
        self.triples: set[Triple] = set()
        self._by_type: dict[NodeType, list[str]] = {t: [] for t in NodeType}

    def __contains__(self, node_id: str) -> bool:
        return node_id in self.nodes

    def add_node(self, node: Node) -> Node:
        """Insert a node; re-inserting the same id is a no-op. A type clash on
        an existing id is a schema violation."""
        existing = self.nodes.get(node.id)
        if existing is not None:
            if existing.node_type is not node.node_type:
                raise SchemaViolationError(
                    f"node {node.id} already exists with type {existing.node_type.tag}, "
                    f"got {node.node_type.tag}"
                )
            return existing
        self.nodes[node.id] = node
        self._by_type[node.node_type].append(node.id)
        return node

    def upsert_triple(self, triple: Triple) -> None:
        """Insert a triple; idempotent. Both endpoints must already exist with
        types matching the relation signature."""
        head = self.nodes.get(triple.head)
        tail = self.nodes.get(triple.tail)
        if head is None:
            raise UnknownNodeError(f"unknown head node: {triple.head}")
        if tail is None:
            raise UnknownNodeError(f"unknown tail node: {triple.tail}")
        want_head, want_tail = triple.relation.signature
        if head.node_type is not want_head or tail.node_type is not want_tail:
            raise SchemaViolationError(
                f"{triple.relation.tag} expects ({want_head.tag}, {want_tail.tag}), "
                f"got ({head.node_type.tag}, {tail.node_type.tag})"
            )
        self.triples.add(triple)

    def node_ids_of_type(self, node_type: NodeType) -> list[str]:
        return list(self._by_type[node_type])

    def stats(self) -> GraphStats:
        node_counts = {t.tag: len(ids) for t, ids in self._by_type.items()}
        edge_counts = {r.tag: 0 for r in RelationType}
        for t in self.triples:
            edge_counts[t.relation.tag] += 1
        return GraphStats(
            node_count_by_type=node_counts,
            edge_count_by_type=edge_counts,
            total_nodes=len(self.nodes),
            total_edges=len(self.triples),
        )

    def check_schema(self) -> list[str]:
        """Full-scan consistency check; returns human-readable violations."""
        problems = []
        for t in self.triples:
            want_head, want_tail = t.relation.signature
            head, tail = self.nodes.get(t.head), self.nodes.get(t.tail)
            if head is None or tail is None:
                problems.append(f"dangling endpoint in {t}")
            elif head.node_type is not want_head or tail.node_type is not want_tail:
                problems.append(f"signature mismatch in {t}")
        return problems

    # On-disk format: a node manifest and a triple list, both UTF-8 with LF
    # line endings. Attribute text is whitespace-normalized so it never
    # contains tabs or newlines.

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        with open(directory / "nodes.tsv", "w", encoding="utf-8", newline="\n") as fh:
            for node_id in sorted(self.nodes):
                node = self.nodes[node_id]
                text = node.attribute_text or ""
                fh.write(f"{node.id}\t{node.node_type.tag}\t{text}\n")
        with open(directory / "triples.tsv", "w", encoding="utf-8", newline="\n") as fh:
            for t in sorted(self.triples, key=lambda t: (t.relation.tag, t.head, t.tail)):
                fh.write(f"{t.head}\t{t.relation.tag}\t{t.tail}\n")

    @classmethod
    def load(cls, directory: str | Path) -> "KnowledgeGraph":
        directory = Path(directory)
        graph = cls()
        with open(directory / "nodes.tsv", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 3:
                    raise InvalidValueError(f"nodes.tsv:{lineno}: expected 3 fields")
                node_id, tag, text = parts
                graph.add_node(Node(node_id, NodeType.from_tag(tag), text or None))
        with open(directory / "triples.tsv", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 3:
                    raise InvalidValueError(f"triples.tsv:{lineno}: expected 3 fields")
                head, tag, tail = parts
                graph.upsert_triple(Triple(head, RelationType.from_tag(tag), tail))
        return graph


def load_node_manifest(path: str | Path) -> dict[str, Node]:
    """Read a node manifest file on its own (used by the serving layer)."""
    nodes: dict[str, Node] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise InvalidValueError(f"{path}:{lineno}: expected 3 fields")
            node_id, tag, text = parts
            nodes[node_id] = Node(node_id, NodeType.from_tag(tag), text or None)
    return nodes
