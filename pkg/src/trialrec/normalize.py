"""Similarity-based normalization of entity texts.

Raw texts are clustered per entity type by single-link over text-space cosine
similarity (connected components of the >= tau graph); each cluster's medoid
member becomes the normalized value for every member.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kg import NodeType, normalize_text


@dataclass
class TableEntry:
    cluster_id: str
    normalized_text: str


class _UnionFind:
    def __init__(self, n: int) -> None:
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


class NormalizationTable:
    """Per-type map raw text -> (cluster id, normalized text). Lookups of
    unknown texts pass through unchanged, so normalize is always total and
    idempotent (cluster medoids map to themselves)."""

    def __init__(self, threshold: float) -> None:
        self.threshold = threshold
        self.entries: dict[NodeType, dict[str, TableEntry]] = {}

    def normalize(self, node_type: NodeType, raw_text: str) -> str:
        key = normalize_text(raw_text)
        entry = self.entries.get(node_type, {}).get(key)
        return entry.normalized_text if entry else key

    def cluster_of(self, node_type: NodeType, raw_text: str) -> str | None:
        entry = self.entries.get(node_type, {}).get(normalize_text(raw_text))
        return entry.cluster_id if entry else None

    @staticmethod
    def identity(threshold: float = 1.0) -> "NormalizationTable":
        """Exact-match-only table: every distinct normalized text is its own
        cluster (used when no text space is available)."""
        return NormalizationTable(threshold)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for node_type in sorted(self.entries, key=lambda t: t.tag):
                for raw in sorted(self.entries[node_type]):
                    e = self.entries[node_type][raw]
                    fh.write(f"{node_type.tag}\t{raw}\t{e.cluster_id}\t{e.normalized_text}\n")

    @classmethod
    def load(cls, path: str | Path, threshold: float = 0.0) -> "NormalizationTable":
        table = cls(threshold)
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                tag, raw, cluster_id, normalized = line.split("\t")
                table.entries.setdefault(NodeType.from_tag(tag), {})[raw] = TableEntry(
                    cluster_id, normalized
                )
        return table


def _single_link_components(matrix: np.ndarray, tau: float, chunk: int = 1024) -> list[list[int]]:
    n = matrix.shape[0]
    uf = _UnionFind(n)
    for start in range(0, n, chunk):
        block = matrix[start : start + chunk] @ matrix.T  # rows are unit or zero
        for local_i in range(block.shape[0]):
            i = start + local_i
            hits = np.nonzero(block[local_i, i + 1 :] >= tau - 1e-12)[0]
            for off in hits:
                uf.union(i, i + 1 + int(off))
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(uf.find(i), []).append(i)
    return [groups[root] for root in sorted(groups)]


def _medoid(members: list[int], texts: list[str], matrix: np.ndarray) -> int:
    """Member with the highest total similarity to the cluster; bytewise-
    smallest text breaks ties."""
    sub = matrix[members]
    totals = sub @ sub.sum(axis=0)
    best = min(range(len(members)), key=lambda k: (-totals[k], texts[members[k]]))
    return members[best]


def normalize_entity_texts(
    texts_by_type: dict[NodeType, list[str]],
    text_space,
    tau: float,
) -> NormalizationTable:
    """Cluster raw texts per entity type and pick each cluster's medoid as the
    normalized value. ``text_space`` needs only an ``embed(text) -> vector``
    method."""
    if not (0.0 < tau <= 1.0):
        raise ValueError("threshold must be in (0, 1]")
    table = NormalizationTable(tau)
    for node_type in sorted(texts_by_type, key=lambda t: t.tag):
        texts = sorted({normalize_text(t) for t in texts_by_type[node_type] if normalize_text(t)})
        if not texts:
            continue
        matrix = np.zeros((len(texts), text_space.dim), dtype=np.float64)
        for i, text in enumerate(texts):
            matrix[i] = text_space.embed(text)  # already unit or zero
        clusters = _single_link_components(matrix, tau)
        # order clusters by their bytewise-smallest member for stable ids
        clusters.sort(key=lambda members: texts[min(members, key=lambda i: texts[i])])
        width = max(4, len(str(len(clusters))))
        type_entries: dict[str, TableEntry] = {}
        for ci, members in enumerate(clusters):
            cluster_id = f"{node_type.tag.lower()}:{ci:0{width}d}"
            medoid_text = texts[_medoid(members, texts, matrix)]
            for i in members:
                type_entries[texts[i]] = TableEntry(cluster_id, medoid_text)
        table.entries[node_type] = type_entries
    return table
