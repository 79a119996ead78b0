import numpy as np
import pytest

from trialrec.inductive import (
    BlindSetError,
    EstimationTrace,
    InductiveError,
    NewEntity,
    RecommendationQuery,
    RecommenderStores,
    build_stores,
    estimate_embedding,
    evaluate_blind_set,
    recommend,
    recommender_metrics,
)
from trialrec.kg import NodeType
from trialrec.kge import KgeModel
from trialrec.records import TrialRecord
from trialrec.vindex import build_index


class FakeTextSpace:
    """Embedding stub keyed by exact text."""

    def __init__(self, table: dict[str, np.ndarray]):
        self.table = {k: np.asarray(v, dtype=np.float64) for k, v in table.items()}
        self.dim = len(next(iter(self.table.values())))

    def embed(self, text: str) -> np.ndarray:
        vec = self.table.get(text)
        if vec is None:
            return np.zeros(self.dim)
        norm = np.linalg.norm(vec)
        return vec / norm if norm > 0 else vec


def kge_of(vectors: dict[str, np.ndarray], kind: str = "node2vec") -> KgeModel:
    ids = sorted(vectors)
    return KgeModel(
        kind=kind,
        dim=len(next(iter(vectors.values()))),
        entity_ids=ids,
        entity_vectors=np.stack([np.asarray(vectors[i], dtype=np.float64) for i in ids]),
    )


def simple_setup():
    """Three trained trials with controlled title similarities to the query."""
    texts = {
        "title zero": np.array([1.0, 0.0]),
        "title one": np.array([0.8, 0.6]),     # cos to query = 0.8
        "title two": np.array([0.4, np.sqrt(1 - 0.16)]),  # cos = 0.4
        "query title": np.array([1.0, 0.0]),
    }
    space = FakeTextSpace(texts)
    titles = {"NCT00000000": "title zero", "NCT00000001": "title one", "NCT00000002": "title two"}
    text_index = build_index(
        {nct: space.embed(title) for nct, title in titles.items()},
        {nct: NodeType.NCT for nct in titles},
    )
    kge = kge_of({
        "NCT00000000": np.array([5.0, 0.0, 0.0]),
        "NCT00000001": np.array([1.0, 0.0, 0.0]),
        "NCT00000002": np.array([0.0, 1.0, 0.0]),
    })
    return space, text_index, kge


def test_copy_property_k1_duplicate_text():
    space, text_index, kge = simple_setup()
    trace = estimate_embedding(
        NewEntity(NodeType.NCT, "title zero"), space, text_index, kge, k=1,
        weight_mode="similarity",
    )
    assert trace.neighbors[0][0] == "NCT00000000"
    np.testing.assert_allclose(
        trace.estimated_vector, kge.entity_vector("NCT00000000"), atol=1e-12
    )


def test_weighted_average_arithmetic():
    space, text_index, kge = simple_setup()
    trace = estimate_embedding(
        NewEntity(NodeType.NCT, "query title"), space, text_index, kge, k=2,
        weight_mode="similarity",
    )
    # neighbors: title zero (cos 1.0) then title one (cos 0.8)
    assert [n for n, _ in trace.neighbors] == ["NCT00000000", "NCT00000001"]
    expected = 0.5 * (1.0 * np.array([5.0, 0.0, 0.0]) + 0.8 * np.array([1.0, 0.0, 0.0]))
    np.testing.assert_allclose(trace.estimated_vector, expected, atol=1e-9)


def test_direct_example_weights():
    # two neighbors with hand-set weights 0.8 / 0.4 and orthogonal embeddings
    space = FakeTextSpace({
        "n one": np.array([0.8, 0.6]),
        "n two": np.array([0.4, np.sqrt(1 - 0.16)]),
        "q": np.array([1.0, 0.0]),
    })
    text_index = build_index(
        {"A": space.embed("n one"), "B": space.embed("n two")},
        {"A": NodeType.NCT, "B": NodeType.NCT},
    )
    kge = kge_of({"A": np.array([1.0, 0.0]), "B": np.array([0.0, 1.0])})
    trace = estimate_embedding(NewEntity(NodeType.NCT, "q"), space, text_index, kge, k=2)
    np.testing.assert_allclose(trace.estimated_vector, [0.4, 0.2], atol=1e-9)


def test_weight_modes():
    space, text_index, kge = simple_setup()
    entity = NewEntity(NodeType.NCT, "query title")
    sim = estimate_embedding(entity, space, text_index, kge, k=2, weight_mode="similarity")
    dist = estimate_embedding(entity, space, text_index, kge, k=2, weight_mode="distance")
    normed = estimate_embedding(entity, space, text_index, kge, k=2,
                                weight_mode="normalized_similarity")
    e0 = kge.entity_vector("NCT00000000")
    e1 = kge.entity_vector("NCT00000001")
    np.testing.assert_allclose(sim.estimated_vector, 0.5 * (1.0 * e0 + 0.8 * e1), atol=1e-9)
    np.testing.assert_allclose(dist.estimated_vector, 0.5 * (0.0 * e0 + 0.2 * e1), atol=1e-9)
    np.testing.assert_allclose(
        normed.estimated_vector, (1.0 * e0 + 0.8 * e1) / 1.8, atol=1e-9
    )


def test_neighbor_order_invariance():
    # permuting index insertion order leaves the estimate unchanged
    space, _, kge = simple_setup()
    titles = {"NCT00000000": "title zero", "NCT00000001": "title one", "NCT00000002": "title two"}
    orders = [list(titles), list(reversed(list(titles)))]
    results = []
    for order in orders:
        index = build_index(
            {n: space.embed(titles[n]) for n in order},
            {n: NodeType.NCT for n in order},
        )
        trace = estimate_embedding(NewEntity(NodeType.NCT, "query title"), space, index, kge, k=3)
        results.append(trace.estimated_vector)
    np.testing.assert_array_equal(results[0], results[1])


def test_estimate_oracle_on_random_fixtures():
    rng = np.random.default_rng(123)
    for _ in range(50):
        n = int(rng.integers(5, 50))
        dim_txt, dim_kg = int(rng.integers(2, 6)), int(rng.integers(2, 8))
        texts = {f"text {i}": rng.normal(size=dim_txt) for i in range(n)}
        texts["the query"] = rng.normal(size=dim_txt)
        space = FakeTextSpace(texts)
        ids = [f"NCT{i:08d}" for i in range(n)]
        vectors = {node: space.embed(f"text {i}") for i, node in enumerate(ids)}
        index = build_index(vectors, {node: NodeType.NCT for node in ids})
        kge = kge_of({node: rng.normal(size=dim_kg) for node in ids})
        k = int(rng.integers(1, 12))
        trace = estimate_embedding(NewEntity(NodeType.NCT, "the query"), space, index, kge, k=k)

        # oracle: brute-force text-space kNN + independently recomputed mean
        q = space.embed("the query")
        sims = []
        for i, node in enumerate(ids):
            v = space.embed(f"text {i}")
            sims.append((node, float(np.clip(np.dot(q, v), -1, 1))))
        sims.sort(key=lambda pair: (-pair[1], pair[0]))
        expected_neighbors = sims[:k]
        assert [n for n, _ in trace.neighbors] == [n for n, _ in expected_neighbors]
        expected = sum(
            max(0.0, w) * kge.entity_vector(node) for node, w in expected_neighbors
        ) / k
        np.testing.assert_allclose(trace.estimated_vector, expected, atol=1e-9)


def test_untokenizable_text_errors():
    space, text_index, kge = simple_setup()
    with pytest.raises(InductiveError, match="untokenizable"):
        estimate_embedding(NewEntity(NodeType.NCT, "unknown words"), space, text_index, kge, k=1)


def test_empty_index_errors():
    space, _, kge = simple_setup()
    empty = build_index({}, {})
    with pytest.raises(InductiveError):
        estimate_embedding(NewEntity(NodeType.NCT, "title zero"), space, empty, kge, k=1)


def test_new_entity_validation():
    with pytest.raises(InductiveError):
        NewEntity(NodeType.NCT, "   ")
    with pytest.raises(InductiveError):
        NewEntity(NodeType.PH, "phase 2")
    NewEntity(NodeType.ICR, "some criterion")  # textual types allowed


# --- recommendation -----------------------------------------------------------------


def rec_setup():
    space = FakeTextSpace({
        "trial about measure alpha": np.array([1.0, 0.0, 0.0]),
        "trial about measure beta": np.array([0.0, 1.0, 0.0]),
        "new trial on measure alpha": np.array([0.95, 0.05, 0.0]),
        "endpoint alpha change": np.array([0.9, 0.1, 0.0]),
        "endpoint beta change": np.array([0.1, 0.9, 0.0]),
    })
    kge_vectors = {
        "NCT00000000": np.array([1.0, 0.0]),
        "NCT00000001": np.array([0.0, 1.0]),
        "pepalpha".ljust(32, "0"): np.array([0.9, 0.1]),
        "pepbeta".ljust(32, "0"): np.array([0.1, 0.9]),
    }
    node_types = {
        "NCT00000000": NodeType.NCT, "NCT00000001": NodeType.NCT,
        "pepalpha".ljust(32, "0"): NodeType.PEP, "pepbeta".ljust(32, "0"): NodeType.PEP,
    }
    node_texts = {
        "NCT00000000": "trial about measure alpha",
        "NCT00000001": "trial about measure beta",
        "pepalpha".ljust(32, "0"): "endpoint alpha change",
        "pepbeta".ljust(32, "0"): "endpoint beta change",
    }
    stores = build_stores(space, kge_of(kge_vectors), node_types, node_texts)
    return stores


def test_recommend_orders_by_kg_similarity():
    stores = rec_setup()
    query = RecommendationQuery(
        query_text="new trial on measure alpha", element_type=NodeType.PEP, top_n=2, knn_k=2
    )
    recs, trace = recommend(query, stores)
    assert [r.node_id for r in recs] == ["pepalpha".ljust(32, "0"), "pepbeta".ljust(32, "0")]
    assert [r.position for r in recs] == [1, 2]
    assert recs[0].kg_similarity >= recs[1].kg_similarity
    assert recs[0].attribute_text == "endpoint alpha change"
    assert trace.neighbors[0][0] == "NCT00000000"


def test_recommend_k1():
    stores = rec_setup()
    query = RecommendationQuery(
        query_text="new trial on measure alpha", element_type=NodeType.PEP, top_n=1
    )
    recs, _ = recommend(query, stores)
    assert len(recs) == 1 and recs[0].position == 1


def test_recommend_rejects_non_recommendable_type():
    with pytest.raises(InductiveError):
        RecommendationQuery(query_text="t", element_type=NodeType.PH, top_n=3)


def test_recommend_empty_element_bucket():
    stores = rec_setup()
    query = RecommendationQuery(
        query_text="new trial on measure alpha", element_type=NodeType.ICR, top_n=3
    )
    recs, _ = recommend(query, stores)
    assert recs == []


def test_recommend_scale_invariant_ranking():
    stores = rec_setup()
    query = RecommendationQuery(
        query_text="new trial on measure alpha", element_type=NodeType.PEP, top_n=2
    )
    base, _ = recommend(query, stores)
    scaled_model = kge_of({
        node: 3.0 * stores.kge_model.entity_vector(node)
        for node in stores.kge_model.entity_ids
    })
    scaled_stores = RecommenderStores(
        text_space=stores.text_space,
        text_index=stores.text_index,
        kge_model=scaled_model,
        kg_index=build_index(
            {n: scaled_model.entity_vector(n) for n in scaled_model.entity_ids},
            {n: (NodeType.NCT if n.startswith("NCT") else NodeType.PEP)
             for n in scaled_model.entity_ids},
        ),
        node_texts=stores.node_texts,
    )
    scaled, _ = recommend(query, scaled_stores)
    assert [r.node_id for r in base] == [r.node_id for r in scaled]


# --- recommender metrics ---------------------------------------------------------------


def test_recommender_metrics_trivials():
    mean_rank, mrr, avg_sim = recommender_metrics([1, 3, 2], [0.9, 0.8, 0.7])
    assert mean_rank == pytest.approx(2.0)
    assert mrr == pytest.approx((1 + 1 / 3 + 1 / 2) / 3, abs=1e-9)
    assert avg_sim == pytest.approx(0.8)
    assert recommender_metrics([1, 1], [1.0, 1.0])[:2] == (1.0, 1.0)


def test_recommender_metrics_oracle():
    rng = np.random.default_rng(9)
    positions = [int(p) for p in rng.integers(1, 50, size=500)]
    sims = [float(s) for s in rng.uniform(-1, 1, size=500)]
    mean_rank, mrr, avg_sim = recommender_metrics(positions, sims)
    assert mean_rank == pytest.approx(sum(positions) / 500, abs=1e-12)
    assert mrr == pytest.approx(sum(1 / p for p in positions) / 500, abs=1e-12)
    assert avg_sim == pytest.approx(sum(sims) / 500, abs=1e-12)
    assert 1 <= mean_rank <= 50 and 0 < mrr <= 1


def test_recommender_metrics_validation():
    with pytest.raises(InductiveError):
        recommender_metrics([], [])
    with pytest.raises(InductiveError):
        recommender_metrics([1], [0.5, 0.6])


# --- blind-set evaluation -----------------------------------------------------------


def blind_record(nct_id="NCT00009999", title="new trial on measure alpha",
                 peps=("endpoint alpha change",)) -> TrialRecord:
    return TrialRecord(
        nct_id=nct_id,
        brief_title=title,
        study_type="interventional",
        intervention_types={"Drug"},
        primary_endpoints=list(peps),
    )


def test_blind_trial_in_training_set_is_rejected():
    stores = rec_setup()
    with pytest.raises(BlindSetError, match="NCT00000000"):
        evaluate_blind_set([blind_record(nct_id="NCT00000000")], stores, [(NodeType.PEP, 2)])


def test_blind_eval_basic_report():
    stores = rec_setup()
    reports = evaluate_blind_set([blind_record()], stores, [(NodeType.PEP, 2)])
    assert len(reports) == 1
    report = reports[0]
    assert report.element_type == "pep" and report.top_n == 2
    assert report.n_queries == 1
    assert report.mean_rank == 1.0 and report.mrr == 1.0
    assert report.records[0].best_position == 1
    assert 0 <= report.records[0].best_similarity <= 1


def test_blind_eval_no_elements_contributes_nothing():
    stores = rec_setup()
    empty = blind_record(peps=())
    reports = evaluate_blind_set([empty], stores, [(NodeType.PEP, 2)])
    assert reports[0].n_queries == 0


def test_blind_eval_tie_takes_smaller_position():
    # two recommendations with identical text: identical similarities
    space = FakeTextSpace({
        "trial title q": np.array([1.0, 0.0]),
        "trial title a": np.array([1.0, 0.0]),
        "same endpoint": np.array([0.5, 0.5]),
    })
    node_types = {
        "NCT00000000": NodeType.NCT,
        "pepone".ljust(32, "0"): NodeType.PEP,
        "peptwo".ljust(32, "0"): NodeType.PEP,
    }
    node_texts = {
        "NCT00000000": "trial title a",
        "pepone".ljust(32, "0"): "same endpoint",
        "peptwo".ljust(32, "0"): "same endpoint",
    }
    kge = kge_of({
        "NCT00000000": np.array([1.0, 0.0]),
        "pepone".ljust(32, "0"): np.array([0.9, 0.1]),
        "peptwo".ljust(32, "0"): np.array([0.9, 0.1]),
    })
    stores = build_stores(space, kge, node_types, node_texts)
    record = blind_record(title="trial title q", peps=("same endpoint",))
    reports = evaluate_blind_set([record], stores, [(NodeType.PEP, 2)])
    assert reports[0].records[0].best_position == 1


def test_blind_eval_rejects_non_textual_type():
    stores = rec_setup()
    with pytest.raises(InductiveError):
        evaluate_blind_set([blind_record()], stores, [(NodeType.INT, 3)])


def test_report_bounds_invariant():
    stores = rec_setup()
    records = [
        blind_record(nct_id=f"NCT0000{i:04d}", peps=("endpoint alpha change", "endpoint beta change"))
        for i in range(5, 9)
    ]
    reports = evaluate_blind_set(records, stores, [(NodeType.PEP, 2)])
    report = reports[0]
    assert 1 <= report.mean_rank <= report.top_n
    assert 0 < report.mrr <= 1
    assert -1 <= report.avg_best_similarity <= 1
