"""Assemble the knowledge graph from filtered trial records, sharing nodes by
deterministic id equality so trials connect through common design elements."""

from __future__ import annotations

from .kg import (
    TEXTUAL_TYPES,
    KnowledgeGraph,
    Node,
    NodeType,
    RelationType,
    Triple,
    assign_node_id,
    normalize_text,
)
from .normalize import NormalizationTable
from .records import TrialRecord, passes_filters


class RejectedRecordError(Exception):
    """A record that fails the inclusion filters reached graph assembly."""


_TEXTUAL_FIELDS = (
    ("inclusion_criteria", NodeType.ICR, RelationType.NCT_ICR),
    ("exclusion_criteria", NodeType.ECR, RelationType.NCT_ECR),
    ("primary_endpoints", NodeType.PEP, RelationType.NCT_PEP),
    ("secondary_endpoints", NodeType.SEP, RelationType.NCT_SEP),
    ("other_endpoints", NodeType.OEP, RelationType.NCT_OEP),
)


def build_graph(records: list[TrialRecord], table: NormalizationTable) -> KnowledgeGraph:
    """One trial node per record; design-element nodes are deduplicated by id
    so textually identical (post-normalization) elements are shared."""
    rejected = [r.nct_id for r in records if not passes_filters(r)]
    if rejected:
        raise RejectedRecordError(
            f"records failing inclusion filters: {', '.join(sorted(rejected))}"
        )
    graph = KnowledgeGraph()
    for record in records:
        trial_id = assign_node_id(NodeType.NCT, record.nct_id)
        graph.add_node(Node(trial_id, NodeType.NCT, normalize_text(record.brief_title)))

        def attach(node_type: NodeType, relation: RelationType, raw: str,
                   concept_id: str | None = None, head: str = trial_id) -> str:
            node_id = assign_node_id(node_type, raw, concept_id)
            text = None
            if node_type in TEXTUAL_TYPES:
                text = normalize_text(raw)
            graph.add_node(Node(node_id, node_type, text))
            graph.upsert_triple(Triple(head, relation, node_id))
            return node_id

        for age in record.age_groups:
            attach(NodeType.AGE, RelationType.NCT_AGE, age)
        if record.gender.strip():
            attach(NodeType.GEN, RelationType.NCT_GEN, record.gender)
        if record.phase.strip():
            attach(NodeType.PH, RelationType.NCT_PH, record.phase)
        if record.overall_status.strip():
            attach(NodeType.STA, RelationType.NCT_ST, record.overall_status)
        for country in record.countries:
            attach(NodeType.CNT, RelationType.NCT_CNT, country)
        for condition in record.conditions:
            attach(NodeType.IND, RelationType.NCT_IND, condition.name, condition.concept_id)

        for iv in record.interventions:
            int_id = attach(NodeType.INT, RelationType.NCT_INT, iv.name, iv.concept_id)
            moa_ids = []
            for moa in iv.moas:
                moa_ids.append(
                    attach(NodeType.MOA, RelationType.INT_MOA, moa, head=int_id)
                )
            tgt_ids = []
            for tgt in iv.targets:
                tgt_ids.append(
                    attach(NodeType.TGT, RelationType.INT_TGT, tgt, head=int_id)
                )
            for moa_id in moa_ids:
                for tgt_id in tgt_ids:
                    graph.upsert_triple(Triple(moa_id, RelationType.MOA_TGT, tgt_id))

        for field_name, node_type, relation in _TEXTUAL_FIELDS:
            for raw in getattr(record, field_name):
                normalized = table.normalize(node_type, raw)
                if not normalized:
                    continue
                attach(node_type, relation, normalized)
    return graph


def collect_entity_texts(records: list[TrialRecord]) -> dict[NodeType, list[str]]:
    """Raw textual values per type, as input to normalization and to text-
    space training (titles included under NCT)."""
    out: dict[NodeType, list[str]] = {node_type: [] for _, node_type, _ in _TEXTUAL_FIELDS}
    out[NodeType.NCT] = []
    for record in records:
        out[NodeType.NCT].append(record.brief_title)
        for field_name, node_type, _relation in _TEXTUAL_FIELDS:
            out[node_type].extend(getattr(record, field_name))
    return out


def text_training_corpus(records: list[TrialRecord]) -> list[str]:
    """All textual entity strings plus trial titles, one string per entry."""
    corpus: list[str] = []
    for texts in collect_entity_texts(records).values():
        corpus.extend(texts)
    return corpus


def trial_strata(records: list[TrialRecord]) -> dict[str, str]:
    """Trial id -> disease-area label, for stratified splitting."""
    return {r.nct_id: r.disease_area for r in records}
