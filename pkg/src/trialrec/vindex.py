"""Type-filtered exact k-nearest-neighbor search by cosine similarity.

Vectors are L2-normalized at build time; zero vectors are kept but flagged
and never returned as matches. Results order by (similarity desc, id asc),
a total order, so repeated queries are byte-identical. Indexes are immutable
after build and safe for concurrent readers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kg import NodeType


class IndexError_(Exception):
    pass


@dataclass
class _Bucket:
    ids: list[str]
    matrix: np.ndarray      # (n, dim) unit rows; zero rows stay zero
    nonzero: np.ndarray     # bool mask of rows that can match


class VectorIndex:
    def __init__(self, dim: int, buckets: dict[NodeType, _Bucket]) -> None:
        self.dim = dim
        self.buckets = buckets

    def types(self) -> list[NodeType]:
        return sorted(self.buckets, key=lambda t: t.tag)

    def size(self, node_type: NodeType) -> int:
        bucket = self.buckets.get(node_type)
        return len(bucket.ids) if bucket else 0

    def ids_of_type(self, node_type: NodeType) -> list[str]:
        bucket = self.buckets.get(node_type)
        return list(bucket.ids) if bucket else []


def build_index(
    vectors: dict[str, np.ndarray],
    types: dict[str, NodeType],
) -> VectorIndex:
    """Bucket vectors by node type, ids sorted bytewise within each bucket."""
    dims = {np.asarray(v).shape[0] for v in vectors.values()}
    if len(dims) > 1:
        raise IndexError_(f"mixed vector dimensions: {sorted(dims)}")
    dim = dims.pop() if dims else 0
    grouped: dict[NodeType, list[str]] = {}
    for node_id in vectors:
        try:
            node_type = types[node_id]
        except KeyError:
            raise IndexError_(f"no node type for id {node_id}") from None
        grouped.setdefault(node_type, []).append(node_id)
    buckets = {}
    for node_type, ids in grouped.items():
        ids.sort()
        matrix = np.stack([np.asarray(vectors[i], dtype=np.float64) for i in ids])
        norms = np.linalg.norm(matrix, axis=1)
        nonzero = norms > 0
        matrix[nonzero] /= norms[nonzero, None]
        buckets[node_type] = _Bucket(ids=ids, matrix=matrix, nonzero=nonzero)
    return VectorIndex(dim=dim, buckets=buckets)


def knn(
    index: VectorIndex,
    query: np.ndarray,
    k: int,
    type_filter: NodeType,
) -> list[tuple[str, float]]:
    """Top-k ids of one type by cosine to the query; exact, no approximation.
    A zero query matches nothing."""
    if k < 1:
        raise IndexError_("k must be >= 1")
    if not isinstance(type_filter, NodeType):
        raise IndexError_(f"unknown type filter: {type_filter!r}")
    bucket = index.buckets.get(type_filter)
    if bucket is None or not bucket.ids:
        return []
    query = np.asarray(query, dtype=np.float64)
    if query.shape[0] != index.dim:
        raise IndexError_(f"query dim {query.shape[0]} != index dim {index.dim}")
    qnorm = np.linalg.norm(query)
    if qnorm == 0:
        return []
    sims = np.clip(bucket.matrix @ (query / qnorm), -1.0, 1.0)
    candidates = np.nonzero(bucket.nonzero)[0]
    if len(candidates) == 0:
        return []
    order = sorted(candidates.tolist(), key=lambda i: (-sims[i], bucket.ids[i]))
    return [(bucket.ids[i], float(sims[i])) for i in order[:k]]
