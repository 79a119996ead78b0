"""Text-anchored inductive inference and recommendation generation.

A node unseen in embedding training gets an estimated graph-space vector: its
attribute text is embedded in the textual space, the k nearest indexed nodes
by text cosine are found, and their graph embeddings are averaged with the
text similarities as weights. Recommendations for a draft trial title are the
estimated vector's nearest graph-space neighbors of the requested element
type, in similarity order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kg import TEXTUAL_TYPES, NodeType
from .kge import KgeModel
from .records import TrialRecord
from .textspace import TextSpace, cosine_similarity
from .vindex import VectorIndex, knn


class InductiveError(Exception):
    pass


class BlindSetError(InductiveError):
    """A supposedly blind trial contributed to embedding training."""


RECOMMENDABLE_TYPES = frozenset(
    {
        NodeType.ICR, NodeType.ECR, NodeType.PEP, NodeType.SEP, NodeType.OEP,
        NodeType.NCT, NodeType.INT, NodeType.TGT, NodeType.MOA, NodeType.IND,
    }
)

WEIGHT_MODES = ("similarity", "distance", "normalized_similarity")


@dataclass
class NewEntity:
    node_type: NodeType
    attribute_text: str

    def __post_init__(self) -> None:
        if not self.attribute_text.strip():
            raise InductiveError("new entity needs nonempty attribute text")
        allowed = TEXTUAL_TYPES | {NodeType.NCT}
        if self.node_type not in allowed:
            raise InductiveError(
                f"{self.node_type.tag} nodes carry no text to anchor estimation"
            )


@dataclass
class EstimationTrace:
    neighbors: list[tuple[str, float]]  # (node id, text similarity), desc
    k: int
    weight_mode: str
    estimated_vector: np.ndarray


@dataclass
class RecommendationQuery:
    query_text: str
    element_type: NodeType
    top_n: int
    knn_k: int = 10
    weight_mode: str = "similarity"
    model_id: str = ""

    def __post_init__(self) -> None:
        if self.top_n < 1 or self.knn_k < 1:
            raise InductiveError("counts must be >= 1")
        if self.element_type not in RECOMMENDABLE_TYPES:
            raise InductiveError(f"{self.element_type.tag} is not a recommendable type")
        if self.weight_mode not in WEIGHT_MODES:
            raise InductiveError(f"unknown weight mode: {self.weight_mode}")


@dataclass
class Recommendation:
    node_id: str
    attribute_text: str
    kg_similarity: float
    position: int


@dataclass
class GroundTruthRecord:
    nct_id: str
    element_type: str
    best_position: int
    best_similarity: float


@dataclass
class RecEvalReport:
    element_type: str
    top_n: int
    n_queries: int
    mean_rank: float
    mrr: float
    avg_best_similarity: float
    records: list[GroundTruthRecord] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "element_type": self.element_type,
            "top_n": self.top_n,
            "n_queries": self.n_queries,
            "mean_rank": self.mean_rank,
            "mrr": self.mrr,
            "avg_best_similarity": self.avg_best_similarity,
        }


@dataclass
class RecommenderStores:
    """Immutable snapshot of everything recommendation needs."""

    text_space: TextSpace
    text_index: VectorIndex            # E_Txt over attribute texts (titles by default)
    kge_model: KgeModel
    kg_index: VectorIndex              # E_KG over trained entity vectors
    node_texts: dict[str, str]


def estimate_embedding(
    entity: NewEntity,
    text_space: TextSpace,
    text_index: VectorIndex,
    kge_model: KgeModel,
    k: int = 10,
    weight_mode: str = "similarity",
    search_types: list[NodeType] | None = None,
) -> EstimationTrace:
    """Weighted average of the graph embeddings of the k text-space nearest
    neighbors; weights come from the text cosine per ``weight_mode``."""
    if k < 1:
        raise InductiveError("k must be >= 1")
    if weight_mode not in WEIGHT_MODES:
        raise InductiveError(f"unknown weight mode: {weight_mode}")
    if all(text_index.size(t) == 0 for t in text_index.types()):
        raise InductiveError("empty text index")
    query = text_space.embed(entity.attribute_text)
    if not query.any():
        raise InductiveError(f"untokenizable text: {entity.attribute_text!r}")

    types = search_types if search_types is not None else [entity.node_type]
    merged: list[tuple[str, float]] = []
    for node_type in types:
        merged.extend(knn(text_index, query, k, node_type))
    merged.sort(key=lambda pair: (-pair[1], pair[0]))
    neighbors = merged[:k]
    if not neighbors:
        raise InductiveError("text index holds no matchable vectors")

    sims = np.array([s for _, s in neighbors], dtype=np.float64)
    if weight_mode == "similarity":
        weights = np.maximum(sims, 0.0)
        scale = 1.0 / k
    elif weight_mode == "distance":
        weights = np.clip(1.0 - sims, 0.0, 1.0)
        scale = 1.0 / k
    else:
        positive = np.maximum(sims, 0.0)
        total = positive.sum()
        weights = positive / total if total > 0 else positive
        scale = 1.0
    vectors = np.stack([kge_model.entity_vector(node_id) for node_id, _ in neighbors])
    estimated = scale * (weights[:, None] * vectors).sum(axis=0)
    return EstimationTrace(
        neighbors=neighbors, k=k, weight_mode=weight_mode, estimated_vector=estimated
    )


def recommend(query: RecommendationQuery, stores: RecommenderStores) -> tuple[list[Recommendation], EstimationTrace]:
    """Draft-title pipeline: estimate a graph vector for the title, then rank
    stored nodes of the requested type by graph-space cosine."""
    entity = NewEntity(NodeType.NCT, query.query_text)
    trace = estimate_embedding(
        entity,
        stores.text_space,
        stores.text_index,
        stores.kge_model,
        k=query.knn_k,
        weight_mode=query.weight_mode,
    )
    hits = knn(stores.kg_index, trace.estimated_vector, query.top_n, query.element_type)
    recommendations = [
        Recommendation(
            node_id=node_id,
            attribute_text=stores.node_texts.get(node_id, ""),
            kg_similarity=sim,
            position=i + 1,
        )
        for i, (node_id, sim) in enumerate(hits)
    ]
    return recommendations, trace


def recommender_metrics(
    best_positions: list[int], best_similarities: list[float]
) -> tuple[float, float, float]:
    """(mean rank, MRR, mean best similarity) over per-element bests."""
    if not best_positions or len(best_positions) != len(best_similarities):
        raise InductiveError("positions and similarities must be nonempty and aligned")
    positions = np.asarray(best_positions, dtype=np.float64)
    sims = np.asarray(best_similarities, dtype=np.float64)
    return (
        float(positions.mean()),
        float(np.mean(1.0 / positions)),
        float(sims.mean()),
    )


_ELEMENT_FIELDS = {
    NodeType.ICR: "inclusion_criteria",
    NodeType.ECR: "exclusion_criteria",
    NodeType.PEP: "primary_endpoints",
    NodeType.SEP: "secondary_endpoints",
    NodeType.OEP: "other_endpoints",
}


def evaluate_blind_set(
    blind_trials: list[TrialRecord],
    stores: RecommenderStores,
    configs: list[tuple[NodeType, int]],
    knn_k: int = 10,
    weight_mode: str = "similarity",
) -> list[RecEvalReport]:
    """For each blind trial and (element type, top_n) config: recommend from
    the title, then record, per actual element, the best text similarity over
    the recommendation list and its 1-based position (ties go to the smaller
    position)."""
    trained_trials = set(stores.text_index.ids_of_type(NodeType.NCT))
    for record in blind_trials:
        if record.nct_id in trained_trials or stores.kge_model.has_entity(record.nct_id):
            raise BlindSetError(f"blind trial {record.nct_id} was part of training")

    embed_cache: dict[str, np.ndarray] = {}

    def embed(text: str) -> np.ndarray:
        if text not in embed_cache:
            embed_cache[text] = stores.text_space.embed(text)
        return embed_cache[text]

    reports = []
    for element_type, top_n in configs:
        if element_type not in _ELEMENT_FIELDS:
            raise InductiveError(
                f"blind evaluation needs a textual element type, got {element_type.tag}"
            )
        field_name = _ELEMENT_FIELDS[element_type]
        positions: list[int] = []
        sims: list[float] = []
        records: list[GroundTruthRecord] = []
        for record in blind_trials:
            elements = [e for e in getattr(record, field_name) if e.strip()]
            if not elements:
                continue
            query = RecommendationQuery(
                query_text=record.brief_title,
                element_type=element_type,
                top_n=top_n,
                knn_k=knn_k,
                weight_mode=weight_mode,
            )
            recommendations, _trace = recommend(query, stores)
            if not recommendations:
                continue
            rec_vectors = [embed(rec.attribute_text) for rec in recommendations]
            for element in elements:
                element_vec = embed(element)
                pair_sims = np.array(
                    [cosine_similarity(element_vec, rv) for rv in rec_vectors]
                )
                best_pos = int(np.argmax(pair_sims)) + 1  # first max wins ties
                positions.append(best_pos)
                sims.append(float(pair_sims[best_pos - 1]))
                records.append(
                    GroundTruthRecord(
                        nct_id=record.nct_id,
                        element_type=element_type.tag,
                        best_position=best_pos,
                        best_similarity=float(pair_sims[best_pos - 1]),
                    )
                )
        if positions:
            mean_rank, mrr, avg_sim = recommender_metrics(positions, sims)
            reports.append(
                RecEvalReport(
                    element_type=element_type.tag,
                    top_n=top_n,
                    n_queries=len(positions),
                    mean_rank=mean_rank,
                    mrr=mrr,
                    avg_best_similarity=avg_sim,
                    records=records,
                )
            )
        else:
            reports.append(
                RecEvalReport(
                    element_type=element_type.tag,
                    top_n=top_n,
                    n_queries=0,
                    mean_rank=float("nan"),
                    mrr=float("nan"),
                    avg_best_similarity=float("nan"),
                    records=[],
                )
            )
    return reports


def build_stores(
    text_space: TextSpace,
    kge_model: KgeModel,
    node_types: dict[str, NodeType],
    node_texts: dict[str, str],
    title_types: tuple[NodeType, ...] = (NodeType.NCT,),
) -> RecommenderStores:
    """Assemble the text index (over attribute texts of ``title_types`` nodes
    present in the model) and the graph index (over all model entities)."""
    from .vindex import build_index

    text_vectors = {}
    text_types = {}
    for node_id, node_type in node_types.items():
        if node_type not in title_types or not kge_model.has_entity(node_id):
            continue
        text = node_texts.get(node_id, "")
        if not text:
            continue
        text_vectors[node_id] = text_space.embed(text)
        text_types[node_id] = node_type
    kg_vectors = {}
    kg_types = {}
    for node_id in kge_model.entity_ids:
        node_type = node_types.get(node_id)
        if node_type is None:
            continue
        kg_vectors[node_id] = kge_model.entity_vector(node_id)
        kg_types[node_id] = node_type
    return RecommenderStores(
        text_space=text_space,
        text_index=build_index(text_vectors, text_types),
        kge_model=kge_model,
        kg_index=build_index(kg_vectors, kg_types),
        node_texts=dict(node_texts),
    )
