"""Filtered-ranking link-prediction evaluation: per-triple head/tail ranks,
mean reciprocal rank, and Hits@k.

Protocol: the candidate pool for a tail rank is every node of the relation's
tail type, minus tails that form known triples with the same (head, relation)
anywhere in the split, except the evaluated tail itself, which always stays.
Ties count against the true entity (pessimistic rule) so constant scorers
cannot look good. Head and tail ranks are pooled into one list before
aggregation. Both choices are recorded in the report.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kg import KnowledgeGraph, RelationType, Triple
from .kge import KgeModel, TripleSplit, score_pool

TIE_RULE = "pessimistic"
RANK_POOLING = "head+tail pooled"


class EvalError(Exception):
    pass


@dataclass
class RankRecord:
    triple: Triple
    tail_rank: int
    head_rank: int


@dataclass
class MetricsReport:
    mrr: float
    hits: dict[int, float]
    n_ranks: int
    mode: str = "set_aside"
    per_relation_pool_sizes: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "mrr": self.mrr,
            "hits": {str(k): v for k, v in sorted(self.hits.items())},
            "n_ranks": self.n_ranks,
            "per_relation_pool_sizes": dict(sorted(self.per_relation_pool_sizes.items())),
            "tie_rule": TIE_RULE,
            "rank_pooling": RANK_POOLING,
        }


def rank_against(true_score: float, other_scores: np.ndarray) -> int:
    """Pessimistic rank of the true score among competitors (self excluded)."""
    return int(1 + (other_scores > true_score).sum() + (other_scores == true_score).sum())


def compute_metrics(ranks: list[int], ks: tuple[int, ...] = (1, 3, 10),
                    mode: str = "set_aside") -> MetricsReport:
    if not ranks:
        raise EvalError("no ranks to aggregate")
    arr = np.asarray(ranks, dtype=np.float64)
    return MetricsReport(
        mrr=float(np.mean(1.0 / arr)),
        hits={k: float(np.mean(arr <= k)) for k in ks},
        n_ranks=len(ranks),
        mode=mode,
    )


class _Known:
    """Known-positive lookup over train + valid + test."""

    def __init__(self, split: TripleSplit) -> None:
        self.by_head: dict[tuple[str, str], set[str]] = {}
        self.by_tail: dict[tuple[str, str], set[str]] = {}
        for t in split.all_triples:
            self.by_head.setdefault((t.head, t.relation.tag), set()).add(t.tail)
            self.by_tail.setdefault((t.tail, t.relation.tag), set()).add(t.head)


def _pool_rows(graph: KnowledgeGraph, model: KgeModel) -> dict[str, tuple]:
    pools = {}
    for node_type in {nt for r in RelationType for nt in r.signature}:
        ids = sorted(graph.node_ids_of_type(node_type))
        rows = np.array([model.entity_row(e) for e in ids], dtype=np.int64)
        pos = {node_id: i for i, node_id in enumerate(ids)}
        pools[node_type.tag] = (rows, ids, pos)
    return pools


def _rank_one(
    model: KgeModel,
    graph: KnowledgeGraph,
    known: _Known,
    pools,
    triple: Triple,
    corrupt: str,
) -> tuple[int, int]:
    """(rank, pool size) for one direction of one triple."""
    head_type, tail_type = triple.relation.signature
    if corrupt == "tail":
        fixed, true_id = triple.head, triple.tail
        type_tag = tail_type.tag
        exclude = known.by_head.get((triple.head, triple.relation.tag), set())
    else:
        fixed, true_id = triple.tail, triple.head
        type_tag = head_type.tag
        exclude = known.by_tail.get((triple.tail, triple.relation.tag), set())
    rows, _ids, pos = pools[type_tag]
    scores = score_pool(model, fixed, triple.relation, rows, corrupt)
    drop = [pos[e] for e in exclude if e != true_id and e in pos]
    true_pos = pos[true_id]
    true_score = scores[true_pos]
    mask = np.ones(len(rows), dtype=bool)
    mask[drop] = False
    mask[true_pos] = False
    others = scores[mask]
    return rank_against(true_score, others), int(mask.sum()) + 1


def rank_tail(model: KgeModel, h: str, r: RelationType, true_t: str,
              graph: KnowledgeGraph, split: TripleSplit) -> int:
    known = _Known(split)
    pools = _pool_rows(graph, model)
    rank, _ = _rank_one(model, graph, known, pools, Triple(h, r, true_t), "tail")
    return rank


def rank_head(model: KgeModel, true_h: str, r: RelationType, t: str,
              graph: KnowledgeGraph, split: TripleSplit) -> int:
    known = _Known(split)
    pools = _pool_rows(graph, model)
    rank, _ = _rank_one(model, graph, known, pools, Triple(true_h, r, t), "head")
    return rank


def evaluate_split(
    model: KgeModel,
    graph: KnowledgeGraph,
    split: TripleSplit,
    mode: str = "set_aside",
    ks: tuple[int, ...] = (1, 3, 10),
) -> tuple[MetricsReport, list[RankRecord]]:
    """Rank both directions of every test triple and aggregate the pooled
    rank list into MRR and Hits@k."""
    if mode not in ("set_aside", "test_on_train"):
        raise EvalError(f"unknown mode: {mode}")
    if not split.test:
        raise EvalError("empty test set")
    if mode == "test_on_train":
        trained_on = model.config.get("trained_on")
        if trained_on not in (None, "all"):
            raise EvalError(
                "test_on_train requires a model trained on all triples "
                f"(bundle was trained on {trained_on!r})"
            )
    known = _Known(split)
    pools = _pool_rows(graph, model)
    records = []
    pool_totals: dict[str, list[int]] = {}
    for triple in sorted(split.test, key=lambda t: (t.relation.tag, t.head, t.tail)):
        tail_rank, tail_pool = _rank_one(model, graph, known, pools, triple, "tail")
        head_rank, head_pool = _rank_one(model, graph, known, pools, triple, "head")
        records.append(RankRecord(triple, tail_rank=tail_rank, head_rank=head_rank))
        pool_totals.setdefault(triple.relation.tag, []).extend((tail_pool, head_pool))
    ranks = [r.tail_rank for r in records] + [r.head_rank for r in records]
    report = compute_metrics(ranks, ks=ks, mode=mode)
    report.per_relation_pool_sizes = {
        tag: float(np.mean(sizes)) for tag, sizes in pool_totals.items()
    }
    return report, records
