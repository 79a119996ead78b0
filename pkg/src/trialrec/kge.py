"""Knowledge-graph embeddings: stratified triple splits, type-aware filtered
negative sampling, scoring functions (translation in one or per-relation
latent spaces, complex bilinear), analytic gradients, and minibatch SGD.

Parameters are float64 in memory; bundles on disk are float32 (see
:mod:`trialrec.model_io`). Training is single-threaded and deterministic for
a fixed seed; trained models are immutable snapshots.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np

from .kg import KnowledgeGraph, NodeType, RelationType, Triple


class KgeError(Exception):
    pass


class KgeLookupError(KgeError):
    """Unknown entity or relation."""


class TrainingError(KgeError):
    pass


MODEL_KINDS = ("node2vec", "transe", "transr", "complex")
TRANSLATIONAL_KINDS = ("transe", "transr")


@dataclass
class TrainConfig:
    kind: str = "transe"
    epochs: int = 1000
    dim: int = 100
    lr: float = 0.01
    margin: float = 1.0
    negatives: int = 8
    batch_size: int = 128
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise KgeError("epochs must be >= 1")
        if self.dim < 2:
            raise KgeError("dim must be >= 2")
        if self.kind not in MODEL_KINDS:
            raise KgeError(f"unknown model kind: {self.kind}")

    def to_dict(self) -> dict:
        return asdict(self)


class KgeModel:
    """Entity (and, except for the walk-based kind, relation) embedding
    tables plus the scoring-function kind.

    The complex kind stores interleaved (real, imaginary) pairs, so rows are
    ``2 * dim`` wide while ``dim`` counts complex coordinates.
    """

    def __init__(
        self,
        kind: str,
        dim: int,
        entity_ids: list[str],
        entity_vectors: np.ndarray,
        relation_ids: list[str] | None = None,
        relation_vectors: np.ndarray | None = None,
        relation_projections: np.ndarray | None = None,
        seed: int = 0,
        config: dict | None = None,
        loss_trace: list[float] | None = None,
    ) -> None:
        if kind not in MODEL_KINDS:
            raise KgeError(f"unknown model kind: {kind}")
        self.kind = kind
        self.dim = dim
        self.entity_ids = entity_ids
        self.entity_index = {e: i for i, e in enumerate(entity_ids)}
        self.entity_vectors = entity_vectors
        self.relation_ids = relation_ids
        self.relation_index = {r: i for i, r in enumerate(relation_ids)} if relation_ids else {}
        self.relation_vectors = relation_vectors
        self.relation_projections = relation_projections
        self.seed = seed
        self.config = config or {}
        self.loss_trace = loss_trace or []

    def entity_row(self, node_id: str) -> int:
        try:
            return self.entity_index[node_id]
        except KeyError:
            raise KgeLookupError(f"unknown entity: {node_id}") from None

    def relation_row(self, relation: RelationType | str) -> int:
        tag = relation.tag if isinstance(relation, RelationType) else relation
        try:
            return self.relation_index[tag]
        except KeyError:
            raise KgeLookupError(f"unknown relation: {tag}") from None

    def entity_vector(self, node_id: str) -> np.ndarray:
        return self.entity_vectors[self.entity_row(node_id)]

    def has_entity(self, node_id: str) -> bool:
        return node_id in self.entity_index


def _as_complex(rows: np.ndarray) -> np.ndarray:
    return rows[..., 0::2] + 1j * rows[..., 1::2]


def _interleave(rows: np.ndarray) -> np.ndarray:
    out = np.empty(rows.shape[:-1] + (rows.shape[-1] * 2,), dtype=np.float64)
    out[..., 0::2] = rows.real
    out[..., 1::2] = rows.imag
    return out


def score_triple(model: KgeModel, h: str, r: RelationType | str, t: str) -> float:
    """Plausibility score, higher is better. The walk-based kind ignores the
    relation and scores by entity cosine."""
    eh = model.entity_vectors[model.entity_row(h)]
    et = model.entity_vectors[model.entity_row(t)]
    if model.kind == "node2vec":
        nh, nt = np.linalg.norm(eh), np.linalg.norm(et)
        if nh == 0 or nt == 0:
            return 0.0
        return float(np.clip(np.dot(eh, et) / (nh * nt), -1.0, 1.0))
    ri = model.relation_row(r)
    er = model.relation_vectors[ri]
    if model.kind == "transe":
        return float(-np.linalg.norm(eh + er - et))
    if model.kind == "transr":
        m = model.relation_projections[ri]
        return float(-np.linalg.norm(m @ eh + er - (m @ et)))
    # complex bilinear form: Re(sum h * r * conj(t))
    hc, rc, tc = _as_complex(eh), _as_complex(er), _as_complex(et)
    return float(np.real(np.sum(hc * rc * np.conj(tc))))


def score_pool(
    model: KgeModel,
    fixed_id: str,
    r: RelationType | str,
    pool_rows: np.ndarray,
    corrupt: str,
) -> np.ndarray:
    """Scores of every candidate row against a fixed endpoint; ``corrupt``
    names the side the pool replaces ("head" or "tail")."""
    e_fixed = model.entity_vectors[model.entity_row(fixed_id)]
    pool = model.entity_vectors[pool_rows]
    if model.kind == "node2vec":
        norms = np.linalg.norm(pool, axis=1) * np.linalg.norm(e_fixed)
        out = np.zeros(len(pool_rows))
        ok = norms > 0
        out[ok] = np.clip((pool[ok] @ e_fixed) / norms[ok], -1.0, 1.0)
        return out
    ri = model.relation_row(r)
    er = model.relation_vectors[ri]
    if model.kind == "transe":
        diff = (e_fixed + er - pool) if corrupt == "tail" else (pool + er - e_fixed)
        return -np.linalg.norm(diff, axis=1)
    if model.kind == "transr":
        m = model.relation_projections[ri]
        proj_fixed = m @ e_fixed
        proj_pool = pool @ m.T
        diff = (proj_fixed + er - proj_pool) if corrupt == "tail" else (proj_pool + er - proj_fixed)
        return -np.linalg.norm(diff, axis=1)
    fc, rc, pc = _as_complex(e_fixed), _as_complex(er), _as_complex(pool)
    if corrupt == "tail":
        return np.real(pc.conj() @ (fc * rc))
    return np.real(pc @ (rc * np.conj(fc)))


# ---------------------------------------------------------------------------
# splits


@dataclass
class TripleSplit:
    train: list[Triple]
    valid: list[Triple]
    test: list[Triple]
    strata: dict[str, str] = field(default_factory=dict)
    seed: int = 0

    @property
    def all_triples(self) -> list[Triple]:
        return self.train + self.valid + self.test


def _largest_remainder(weights: list[float], total: int) -> list[int]:
    floors = [int(w) for w in weights]
    remainder = total - sum(floors)
    order = sorted(range(len(weights)), key=lambda i: (-(weights[i] - floors[i]), i))
    for i in order[:remainder]:
        floors[i] += 1
    return floors


def _triple_key(t: Triple) -> tuple[str, str, str]:
    return (t.relation.tag, t.head, t.tail)


def _allocate(group_sizes: dict[str, int], ratios: Sequence[float],
              global_targets: list[int]) -> dict[str, list[int]]:
    """Per-stratum bucket counts: proportional within each stratum, rounded so
    bucket totals hit the global targets exactly."""
    labels = sorted(group_sizes)
    alloc = {}
    fracs = []
    for label in labels:
        m = group_sizes[label]
        ideal = [m * r for r in ratios]
        floors = [int(x) for x in ideal]
        alloc[label] = floors
        fracs.append([x - f for x, f in zip(ideal, floors)])
    bucket_need = [global_targets[b] - sum(alloc[l][b] for l in labels) for b in range(len(ratios))]
    stratum_need = {l: group_sizes[l] - sum(alloc[l]) for l in labels}
    candidates = sorted(
        ((fracs[i][b], label, b) for i, label in enumerate(labels) for b in range(len(ratios))),
        key=lambda c: (-c[0], c[1], c[2]),
    )
    for _frac, label, b in candidates:
        if stratum_need[label] > 0 and bucket_need[b] > 0:
            alloc[label][b] += 1
            stratum_need[label] -= 1
            bucket_need[b] -= 1
    # any remainder (possible when fractional preferences all point at filled
    # buckets) goes wherever capacity is left
    for label in labels:
        while stratum_need[label] > 0:
            for b in range(len(ratios)):
                if bucket_need[b] > 0:
                    alloc[label][b] += 1
                    stratum_need[label] -= 1
                    bucket_need[b] -= 1
                    break
    return alloc


def split_triples(
    graph: KnowledgeGraph,
    ratios: tuple[float, float, float] = (0.80, 0.05, 0.15),
    strata: dict[str, str] | None = None,
    seed: int = 0,
    max_attempts: int = 50,
) -> TripleSplit:
    """Stratified random split. Retries with derived seeds to minimize
    valid/test entities that never appear in a train triple; remaining unseen
    entities are kept and simply rank poorly downstream."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise KgeError("split ratios must sum to 1.0")
    triples = sorted(graph.triples, key=_triple_key)
    n = len(triples)
    if n < 20:
        raise KgeError(f"graph has only {n} triples; ratios are unrealizable")
    strata = strata or {}

    def stratum_of(t: Triple) -> str:
        return strata.get(t.head) or strata.get(t.tail) or ""

    groups: dict[str, list[Triple]] = {}
    for t in triples:
        groups.setdefault(stratum_of(t), []).append(t)
    global_targets = _largest_remainder([n * r for r in ratios], n)
    alloc = _allocate({k: len(v) for k, v in groups.items()}, ratios, global_targets)

    best: TripleSplit | None = None
    best_unseen = None
    for attempt in range(max_attempts):
        rng = np.random.default_rng((seed, attempt))
        buckets: tuple[list[Triple], list[Triple], list[Triple]] = ([], [], [])
        for label in sorted(groups):
            members = list(groups[label])
            order = rng.permutation(len(members))
            n_train, n_valid, _ = alloc[label]
            for pos, idx in enumerate(order):
                bucket = 0 if pos < n_train else (1 if pos < n_train + n_valid else 2)
                buckets[bucket].append(members[idx])
        train_entities = {e for t in buckets[0] for e in (t.head, t.tail)}
        unseen = sum(
            1
            for t in buckets[1] + buckets[2]
            for e in (t.head, t.tail)
            if e not in train_entities
        )
        if best_unseen is None or unseen < best_unseen:
            best_unseen = unseen
            best = TripleSplit(
                train=sorted(buckets[0], key=_triple_key),
                valid=sorted(buckets[1], key=_triple_key),
                test=sorted(buckets[2], key=_triple_key),
                strata=dict(strata),
                seed=seed,
            )
        if best_unseen == 0:
            break
    return best


def save_split(split: TripleSplit, directory) -> None:
    import json
    from pathlib import Path

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, triples in (("train", split.train), ("valid", split.valid), ("test", split.test)):
        with open(directory / f"{name}.tsv", "w", encoding="utf-8", newline="\n") as fh:
            for t in sorted(triples, key=_triple_key):
                fh.write(f"{t.head}\t{t.relation.tag}\t{t.tail}\n")
    meta = {
        "seed": split.seed,
        "counts": {"train": len(split.train), "valid": len(split.valid), "test": len(split.test)},
    }
    with open(directory / "split.json", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(meta, sort_keys=True) + "\n")


def load_split(directory) -> TripleSplit:
    import json
    from pathlib import Path

    directory = Path(directory)

    def read(name: str) -> list[Triple]:
        out = []
        with open(directory / f"{name}.tsv", encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if line:
                    head, tag, tail = line.split("\t")
                    out.append(Triple(head, RelationType.from_tag(tag), tail))
        return out

    with open(directory / "split.json", encoding="utf-8") as fh:
        meta = json.load(fh)
    return TripleSplit(
        train=read("train"), valid=read("valid"), test=read("test"),
        seed=int(meta.get("seed", 0)),
    )


# ---------------------------------------------------------------------------
# negative sampling


@dataclass
class NegativeSample:
    negatives: list[Triple]
    pool_exhausted: bool = False


def sample_negatives(
    triple: Triple,
    graph: KnowledgeGraph,
    n: int,
    rng: np.random.Generator,
) -> NegativeSample:
    """Corrupt head or tail (one side per negative) with a uniformly drawn
    node of the required type, rejecting known positives. Returns fewer than
    ``n`` and sets the flag when the candidate pool is exhausted."""
    if n < 1:
        raise KgeError("n must be >= 1")
    head_type, tail_type = triple.relation.signature
    pools = {
        "head": graph.node_ids_of_type(head_type),
        "tail": graph.node_ids_of_type(tail_type),
    }
    out: list[Triple] = []
    exhausted = False
    for _ in range(n):
        side = "head" if rng.integers(0, 2) == 0 else "tail"
        pool = pools[side]
        candidate = None
        for _try in range(50):
            pick = pool[int(rng.integers(0, len(pool)))]
            corrupted = (
                Triple(pick, triple.relation, triple.tail)
                if side == "head"
                else Triple(triple.head, triple.relation, pick)
            )
            if corrupted not in graph.triples:
                candidate = corrupted
                break
        if candidate is None:
            # deterministic sweep before declaring the pool exhausted
            for pick in pool:
                corrupted = (
                    Triple(pick, triple.relation, triple.tail)
                    if side == "head"
                    else Triple(triple.head, triple.relation, pick)
                )
                if corrupted not in graph.triples:
                    candidate = corrupted
                    break
        if candidate is None:
            exhausted = True
            continue
        out.append(candidate)
    return NegativeSample(out, pool_exhausted=exhausted or len(out) < n)


# ---------------------------------------------------------------------------
# loss and gradients

_ENT, _REL, _PROJ = "entity", "relation", "projection"


def _margin_pair_grads(
    kind: str,
    entities: np.ndarray,
    relations: np.ndarray,
    projections: np.ndarray | None,
    pos: tuple[np.ndarray, np.ndarray, np.ndarray],
    neg: tuple[np.ndarray, np.ndarray, np.ndarray],
    margin: float,
    weights: np.ndarray | None = None,
):
    """Hinge loss over (positive, negative) pairs and its sparse gradients.

    Returns (loss_sum, contributions) where contributions is a list of
    (table, index_array, grad_array) entries; indices may repeat.
    """
    ph, pr, pt = pos
    nh, nr, nt = neg

    def distances(h_idx, r_idx, t_idx):
        if kind == "transe":
            u = entities[h_idx] + relations[r_idx] - entities[t_idx]
        else:
            m = projections[r_idx]
            u = (
                np.einsum("bij,bj->bi", m, entities[h_idx])
                + relations[r_idx]
                - np.einsum("bij,bj->bi", m, entities[t_idx])
            )
        d = np.linalg.norm(u, axis=1)
        return u, d

    u_pos, d_pos = distances(ph, pr, pt)
    u_neg, d_neg = distances(nh, nr, nt)
    slack = margin + d_pos - d_neg
    active = slack > 0
    w = active.astype(np.float64)
    if weights is not None:
        w = w * weights
    loss = float((slack * w).sum())

    def unit(u, d):
        safe = np.where(d > 0, d, 1.0)
        return (u / safe[:, None]) * w[:, None]

    g_pos = unit(u_pos, d_pos)
    g_neg = unit(u_neg, d_neg)
    contribs = []
    if kind == "transe":
        contribs += [
            (_ENT, ph, g_pos), (_ENT, pt, -g_pos), (_REL, pr, g_pos),
            (_ENT, nh, -g_neg), (_ENT, nt, g_neg), (_REL, nr, -g_neg),
        ]
    else:
        m_pos = projections[pr]
        m_neg = projections[nr]
        back_pos = np.einsum("bji,bj->bi", m_pos, g_pos)
        back_neg = np.einsum("bji,bj->bi", m_neg, g_neg)
        contribs += [
            (_ENT, ph, back_pos), (_ENT, pt, -back_pos), (_REL, pr, g_pos),
            (_ENT, nh, -back_neg), (_ENT, nt, back_neg), (_REL, nr, -g_neg),
        ]
        dm_pos = np.einsum("bi,bj->bij", g_pos, entities[ph] - entities[pt])
        dm_neg = np.einsum("bi,bj->bij", g_neg, entities[nh] - entities[nt])
        contribs += [(_PROJ, pr, dm_pos), (_PROJ, nr, -dm_neg)]
    return loss, contribs


def _softplus_grads(
    entities: np.ndarray,
    relations: np.ndarray,
    idx: tuple[np.ndarray, np.ndarray, np.ndarray],
    labels: np.ndarray,
    weights: np.ndarray | None = None,
):
    """Logistic loss over +/- labeled triples for the complex kind."""
    h_idx, r_idx, t_idx = idx
    hc = _as_complex(entities[h_idx])
    rc = _as_complex(relations[r_idx])
    tc = _as_complex(entities[t_idx])
    phi = np.real(np.sum(hc * rc * np.conj(tc), axis=1))
    w = np.ones_like(phi) if weights is None else weights
    # softplus(-y*phi), stable on both tails
    loss = float((np.logaddexp(0.0, -labels * phi) * w).sum())
    coeff = (-labels / (1.0 + np.exp(labels * phi))) * w
    g_h = _interleave(coeff[:, None] * np.conj(rc) * tc)
    g_r = _interleave(coeff[:, None] * np.conj(hc) * tc)
    g_t = _interleave(coeff[:, None] * hc * rc)
    return loss, [(_ENT, h_idx, g_h), (_REL, r_idx, g_r), (_ENT, t_idx, g_t)]


def loss_and_gradients(
    model: KgeModel,
    positives: list[Triple],
    negatives: list[list[Triple]],
):
    """Batch loss and per-parameter gradients, keyed by ("entity", node_id),
    ("relation", tag), or ("projection", tag)."""
    if not positives or len(positives) != len(negatives):
        raise KgeError("positives and negatives must be nonempty and aligned")
    if any(len(group) == 0 for group in negatives):
        raise KgeError("every positive needs at least one negative")
    if model.kind == "node2vec":
        raise KgeError("the walk-based kind has no triple loss")

    def rows(triples: list[Triple]):
        h = np.array([model.entity_row(t.head) for t in triples])
        r = np.array([model.relation_row(t.relation) for t in triples])
        t_ = np.array([model.entity_row(t.tail) for t in triples])
        return h, r, t_

    if model.kind in TRANSLATIONAL_KINDS:
        pos_rep, neg_flat = [], []
        for p, group in zip(positives, negatives):
            pos_rep.extend([p] * len(group))
            neg_flat.extend(group)
        loss, contribs = _margin_pair_grads(
            model.kind,
            model.entity_vectors,
            model.relation_vectors,
            model.relation_projections,
            rows(pos_rep),
            rows(neg_flat),
            margin=float(model.config.get("margin", 1.0)),
        )
    else:
        flat = list(positives) + [n for group in negatives for n in group]
        labels = np.array([1.0] * len(positives) + [-1.0] * (len(flat) - len(positives)))
        loss, contribs = _softplus_grads(
            model.entity_vectors, model.relation_vectors, rows(flat), labels
        )

    grads: dict[tuple[str, str], np.ndarray] = {}
    for table, idx, grad in contribs:
        for row, g in zip(idx, grad):
            key_id = model.entity_ids[row] if table == _ENT else model.relation_ids[row]
            key = (table, key_id)
            if key in grads:
                grads[key] = grads[key] + g
            else:
                grads[key] = np.array(g, dtype=np.float64)
    return loss, grads


# ---------------------------------------------------------------------------
# training


def _init_model(graph: KnowledgeGraph, config: TrainConfig) -> KgeModel:
    entity_ids = sorted(graph.nodes)
    relation_ids = [r.tag for r in sorted(RelationType, key=lambda r: r.tag)]
    rng = np.random.default_rng(config.seed)
    width = config.dim * 2 if config.kind == "complex" else config.dim
    bound = 6.0 / np.sqrt(config.dim)
    entities = rng.uniform(-bound, bound, (len(entity_ids), width))
    relations = rng.uniform(-bound, bound, (len(relation_ids), width))
    projections = None
    if config.kind == "transr":
        projections = np.tile(np.eye(config.dim), (len(relation_ids), 1, 1))
    if config.kind in TRANSLATIONAL_KINDS:
        entities /= np.linalg.norm(entities, axis=1, keepdims=True)
    return KgeModel(
        kind=config.kind,
        dim=config.dim,
        entity_ids=entity_ids,
        entity_vectors=entities,
        relation_ids=relation_ids,
        relation_vectors=relations,
        relation_projections=projections,
        seed=config.seed,
        config=config.to_dict(),
    )


class _NegativeSampler:
    """Vectorized filtered corruption against the full graph's positives."""

    def __init__(self, graph: KnowledgeGraph, model: KgeModel) -> None:
        self.n_entities = len(model.entity_ids)
        self.rel_rows = {}
        self.head_pools = {}
        self.tail_pools = {}
        for rel in RelationType:
            ri = model.relation_row(rel.tag)
            head_type, tail_type = rel.signature
            self.rel_rows[rel.tag] = ri
            self.head_pools[ri] = np.array(
                [model.entity_row(e) for e in sorted(graph.node_ids_of_type(head_type))],
                dtype=np.int64,
            )
            self.tail_pools[ri] = np.array(
                [model.entity_row(e) for e in sorted(graph.node_ids_of_type(tail_type))],
                dtype=np.int64,
            )
        n_rel = len(model.relation_ids)
        keys = [
            (model.entity_row(t.head) * n_rel + self.rel_rows[t.relation.tag]) * self.n_entities
            + model.entity_row(t.tail)
            for t in graph.triples
        ]
        self.known = np.sort(np.array(keys, dtype=np.int64))
        self.n_rel = n_rel

    def _is_known(self, h, r, t) -> np.ndarray:
        key = (h * self.n_rel + r) * self.n_entities + t
        pos = np.searchsorted(self.known, key)
        pos = np.clip(pos, 0, len(self.known) - 1)
        return self.known[pos] == key

    def draw(self, h, r, t, k: int, rng: np.random.Generator):
        """(neg_h, neg_t, weight) arrays of shape (len(h)*k,); weight 0 marks
        slots where no valid corruption was found."""
        b = len(h)
        hh = np.repeat(h, k)
        rr = np.repeat(r, k)
        tt = np.repeat(t, k)
        sides = rng.integers(0, 2, b * k)  # 0 = head, 1 = tail
        cand = np.empty(b * k, dtype=np.int64)
        for ri in np.unique(rr):
            for side, pools in ((0, self.head_pools), (1, self.tail_pools)):
                mask = (rr == ri) & (sides == side)
                cnt = int(mask.sum())
                if cnt:
                    pool = pools[int(ri)]
                    cand[mask] = pool[rng.integers(0, len(pool), cnt)]
        neg_h = np.where(sides == 0, cand, hh)
        neg_t = np.where(sides == 1, cand, tt)
        bad = self._is_known(neg_h, rr, neg_t)
        for _ in range(4):
            if not bad.any():
                break
            idx = np.nonzero(bad)[0]
            for ri in np.unique(rr[idx]):
                for side, pools in ((0, self.head_pools), (1, self.tail_pools)):
                    mask_local = (rr[idx] == ri) & (sides[idx] == side)
                    cnt = int(mask_local.sum())
                    if cnt:
                        pool = pools[int(ri)]
                        cand[idx[mask_local]] = pool[rng.integers(0, len(pool), cnt)]
            neg_h = np.where(sides == 0, cand, hh)
            neg_t = np.where(sides == 1, cand, tt)
            bad = self._is_known(neg_h, rr, neg_t)
        weight = (~bad).astype(np.float64)
        return neg_h, neg_t, weight


def train_kge(graph: KnowledgeGraph, split: TripleSplit, config: TrainConfig) -> KgeModel:
    """Minibatch SGD on the split's training triples. Entity vectors of the
    translational kinds are re-projected to the unit sphere after every
    update step."""
    if config.kind == "node2vec":
        raise KgeError("the walk-based kind trains from walks, not triples")
    if not split.train:
        raise TrainingError("empty training split")
    model = _init_model(graph, config)
    model.config["trained_on"] = "all" if len(split.train) == len(graph.triples) else "train-split"
    sampler = _NegativeSampler(graph, model)

    h_all = np.array([model.entity_row(t.head) for t in split.train], dtype=np.int64)
    r_all = np.array([model.relation_row(t.relation) for t in split.train], dtype=np.int64)
    t_all = np.array([model.entity_row(t.tail) for t in split.train], dtype=np.int64)
    n_train = len(split.train)
    rng = np.random.default_rng((config.seed, 1))
    translational = config.kind in TRANSLATIONAL_KINDS

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n_train)
        epoch_loss = 0.0
        epoch_pairs = 0
        for start in range(0, n_train, config.batch_size):
            batch = order[start : start + config.batch_size]
            h, r, t = h_all[batch], r_all[batch], t_all[batch]
            neg_h, neg_t, weight = sampler.draw(h, r, t, config.negatives, rng)
            k = config.negatives
            hh, rr, tt = np.repeat(h, k), np.repeat(r, k), np.repeat(t, k)

            if translational:
                loss, contribs = _margin_pair_grads(
                    config.kind,
                    model.entity_vectors,
                    model.relation_vectors,
                    model.relation_projections,
                    (hh, rr, tt),
                    (neg_h, rr, neg_t),
                    margin=config.margin,
                    weights=weight,
                )
                epoch_pairs += len(hh)
            else:
                idx_h = np.concatenate([h, neg_h])
                idx_r = np.concatenate([r, rr])
                idx_t = np.concatenate([t, neg_t])
                labels = np.concatenate([np.ones(len(h)), -np.ones(len(neg_h))])
                w = np.concatenate([np.ones(len(h)), weight])
                loss, contribs = _softplus_grads(
                    model.entity_vectors, model.relation_vectors,
                    (idx_h, idx_r, idx_t), labels, weights=w,
                )
                epoch_pairs += len(idx_h)
            epoch_loss += loss

            touched = []
            for table, idx, grad in contribs:
                if table == _ENT:
                    np.add.at(model.entity_vectors, idx, -config.lr * grad)
                    touched.append(idx)
                elif table == _REL:
                    np.add.at(model.relation_vectors, idx, -config.lr * grad)
                else:
                    np.add.at(model.relation_projections, idx, -config.lr * grad)
            if translational and touched:
                rows = np.unique(np.concatenate(touched))
                norms = np.linalg.norm(model.entity_vectors[rows], axis=1, keepdims=True)
                norms[norms == 0] = 1.0
                model.entity_vectors[rows] /= norms

        mean_loss = epoch_loss / max(epoch_pairs, 1)
        if not np.isfinite(mean_loss):
            raise TrainingError(f"loss diverged at epoch {epoch}")
        model.loss_trace.append(mean_loss)
    return model
