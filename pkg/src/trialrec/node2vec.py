"""Second-order biased random walks over the graph (edges treated as
undirected) and skip-gram training of node embeddings from the walks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _sgns
from .kg import KnowledgeGraph
from .kge import KgeModel, TrainingError


@dataclass
class Node2VecParams:
    dim: int = 100
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    lr: float = 0.025
    seed: int = 0
    subsample: float = 1e-3
    batch_pairs: int = 4096


@dataclass
class WalkCorpus:
    node_ids: list[str]
    walks: list[np.ndarray] = field(repr=False)  # index sequences into node_ids
    walks_per_node: int = 50
    walk_length: int = 80
    p: float = 1.0
    q: float = 1.0

    def iter_id_walks(self):
        for walk in self.walks:
            yield [self.node_ids[i] for i in walk]


def generate_walks(
    graph: KnowledgeGraph,
    walks_per_node: int = 50,
    walk_length: int = 80,
    p: float = 1.0,
    q: float = 1.0,
    seed: int = 0,
) -> WalkCorpus:
    """``walks_per_node`` walks from every node. The next step is biased by
    the return parameter p (revisit the previous node) and in-out parameter q
    (move away from it); p = q = 1 is an unbiased walk."""
    if not graph.nodes:
        raise TrainingError("cannot walk an empty graph")
    node_ids = sorted(graph.nodes)
    index = {n: i for i, n in enumerate(node_ids)}
    neighbors: list[list[int]] = [[] for _ in node_ids]
    for t in graph.triples:
        h, tl = index[t.head], index[t.tail]
        neighbors[h].append(tl)
        neighbors[tl].append(h)
    nbr_arrays = [np.array(sorted(set(ns)), dtype=np.int64) for ns in neighbors]
    nbr_sets = [set(a.tolist()) for a in nbr_arrays]

    rng = np.random.default_rng(seed)
    unbiased = p == 1.0 and q == 1.0
    walks = []
    for start in range(len(node_ids)):
        for _ in range(walks_per_node):
            walk = [start]
            while len(walk) < walk_length:
                cur = walk[-1]
                nbrs = nbr_arrays[cur]
                if len(nbrs) == 0:
                    break
                if unbiased or len(walk) == 1:
                    nxt = int(nbrs[rng.integers(0, len(nbrs))])
                else:
                    prev = walk[-2]
                    weights = np.where(
                        nbrs == prev,
                        1.0 / p,
                        np.where([n in nbr_sets[prev] for n in nbrs.tolist()], 1.0, 1.0 / q),
                    )
                    cum = np.cumsum(weights)
                    nxt = int(nbrs[np.searchsorted(cum, rng.random() * cum[-1], side="right")])
                walk.append(nxt)
            walks.append(np.array(walk, dtype=np.int64))
    return WalkCorpus(node_ids, walks, walks_per_node, walk_length, p, q)


def train_node2vec(corpus: WalkCorpus, params: Node2VecParams | None = None) -> KgeModel:
    """Skip-gram with negative sampling over the walk sequences. The result
    covers every walked node and carries no relation parameters."""
    params = params or Node2VecParams()
    if not corpus.walks:
        raise TrainingError("empty walk corpus")
    counts = np.zeros(len(corpus.node_ids), dtype=np.float64)
    for walk in corpus.walks:
        np.add.at(counts, walk, 1.0)
    counts[counts == 0] = 1.0  # isolated nodes keep their random vectors
    try:
        w_in, _w_out, losses = _sgns.train_sgns(
            corpus.walks,
            n_tokens=len(corpus.node_ids),
            counts=counts,
            dim=params.dim,
            window=params.window,
            negatives=params.negatives,
            epochs=params.epochs,
            lr=params.lr,
            seed=params.seed,
            subsample=params.subsample,
            batch_pairs=params.batch_pairs,
        )
    except _sgns.SgnsError as exc:
        raise TrainingError(str(exc)) from exc
    return KgeModel(
        kind="node2vec",
        dim=params.dim,
        entity_ids=list(corpus.node_ids),
        entity_vectors=w_in.astype(np.float64),
        relation_ids=None,
        relation_vectors=None,
        relation_projections=None,
        seed=params.seed,
        config={
            "kind": "node2vec",
            "dim": params.dim,
            "window": params.window,
            "negatives": params.negatives,
            "epochs": params.epochs,
            "lr": params.lr,
            "seed": params.seed,
            "walks_per_node": corpus.walks_per_node,
            "walk_length": corpus.walk_length,
            "p": corpus.p,
            "q": corpus.q,
        },
        loss_trace=losses,
    )
