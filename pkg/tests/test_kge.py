import numpy as np
import pytest

from trialrec.ingest import build_graph, trial_strata
from trialrec.kg import KnowledgeGraph, Node, NodeType, RelationType, Triple
from trialrec.kge import (
    KgeError,
    KgeLookupError,
    KgeModel,
    TrainConfig,
    TrainingError,
    TripleSplit,
    load_split,
    loss_and_gradients,
    sample_negatives,
    save_split,
    score_triple,
    split_triples,
    train_kge,
)
from trialrec.model_io import PROJECTIONS_MAGIC, load_bundle, save_bundle
from trialrec.node2vec import Node2VecParams, WalkCorpus, generate_walks, train_node2vec
from trialrec.normalize import NormalizationTable
from trialrec.synth import generate_synthetic_corpus


def star_graph(n_trials: int = 10, n_icr_per_trial: int = 10) -> KnowledgeGraph:
    """NCT:ICR only; every (trial, criterion) pair is a distinct triple."""
    g = KnowledgeGraph()
    for i in range(n_trials):
        g.add_node(Node(f"NCT{i:08d}", NodeType.NCT, f"trial {i}"))
        for j in range(n_icr_per_trial):
            node_id = f"{i:02d}{j:02d}".ljust(32, "0")
            g.add_node(Node(node_id, NodeType.ICR, f"criterion {i} {j}"))
            g.upsert_triple(Triple(f"NCT{i:08d}", RelationType.NCT_ICR, node_id))
    return g


def two_strata_graph(per_stratum: int = 50):
    g = KnowledgeGraph()
    strata = {}
    for s, label in enumerate(("area_a", "area_b")):
        for i in range(per_stratum // 5):
            trial = f"NCT{s}{i:07d}"
            g.add_node(Node(trial, NodeType.NCT, "t"))
            strata[trial] = label
            for j in range(5):
                node_id = f"{s}{i:02d}{j}".ljust(32, "0")
                g.add_node(Node(node_id, NodeType.ICR, "c"))
                g.upsert_triple(Triple(trial, RelationType.NCT_ICR, node_id))
    return g, strata


def hand_model(kind: str, entities: dict[str, np.ndarray], relations: dict[str, np.ndarray] | None,
               projections: dict[str, np.ndarray] | None = None, dim: int | None = None,
               margin: float = 1.0) -> KgeModel:
    entity_ids = sorted(entities)
    rel_ids = sorted(relations) if relations is not None else None
    width = len(next(iter(entities.values())))
    dim = dim or (width // 2 if kind == "complex" else width)
    proj = None
    if projections is not None:
        proj = np.stack([projections[r] for r in rel_ids])
    return KgeModel(
        kind=kind,
        dim=dim,
        entity_ids=entity_ids,
        entity_vectors=np.stack([np.asarray(entities[e], dtype=np.float64) for e in entity_ids]),
        relation_ids=rel_ids,
        relation_vectors=(
            np.stack([np.asarray(relations[r], dtype=np.float64) for r in rel_ids])
            if relations is not None else None
        ),
        relation_projections=proj,
        config={"margin": margin},
    )


# --- splits --------------------------------------------------------------------


def test_split_100_triples_single_stratum():
    g = star_graph(10, 10)
    split = split_triples(g, seed=1)
    assert (len(split.train), len(split.valid), len(split.test)) == (80, 5, 15)


def test_split_deterministic():
    g = star_graph(10, 10)
    a = split_triples(g, seed=9)
    b = split_triples(g, seed=9)
    assert a.train == b.train and a.valid == b.valid and a.test == b.test


def test_split_two_strata_rounding():
    g, strata = two_strata_graph(50)
    split = split_triples(g, strata=strata, seed=4)
    assert (len(split.train), len(split.valid), len(split.test)) == (80, 5, 15)

    def stratum_counts(label):
        keep = lambda ts: sum(1 for t in ts if strata[t.head] == label)
        return keep(split.train), keep(split.valid), keep(split.test)

    for label in ("area_a", "area_b"):
        tr, va, te = stratum_counts(label)
        assert tr == 40 and va in (2, 3) and te in (7, 8)
        assert tr + va + te == 50


def test_split_refuses_tiny_graph():
    g = star_graph(2, 2)  # 4 triples
    with pytest.raises(KgeError):
        split_triples(g)


def test_split_ratios_must_sum_to_one():
    g = star_graph(10, 10)
    with pytest.raises(KgeError):
        split_triples(g, ratios=(0.5, 0.2, 0.2))


def test_split_invariants_over_seeds():
    g, strata = two_strata_graph(100)
    all_triples = set(g.triples)
    n = len(all_triples)
    for seed in range(20):
        split = split_triples(g, strata=strata, seed=seed)
        train, valid, test = set(split.train), set(split.valid), set(split.test)
        assert train | valid | test == all_triples
        assert not (train & valid) and not (train & test) and not (valid & test)
        for label in ("area_a", "area_b"):
            members = [t for t in all_triples if strata[t.head] == label]
            m = len(members)
            for bucket, ratio in ((train, 0.80), (valid, 0.05), (test, 0.15)):
                frac = sum(1 for t in members if t in bucket) / m
                assert abs(frac - ratio) <= 0.02 + 1e-9


def test_split_persistence_roundtrip(tmp_path):
    g = star_graph(10, 10)
    split = split_triples(g, seed=2)
    save_split(split, tmp_path / "s")
    loaded = load_split(tmp_path / "s")
    assert loaded.train == split.train
    assert loaded.valid == split.valid
    assert loaded.test == split.test


# --- negative sampling -----------------------------------------------------------


def graph_with_phases():
    g = KnowledgeGraph()
    for i in range(3):
        g.add_node(Node(f"NCT0000000{i}", NodeType.NCT, "t"))
    for p in range(10):
        g.add_node(Node(f"ph:phase_{p}", NodeType.PH))
    g.upsert_triple(Triple("NCT00000000", RelationType.NCT_PH, "ph:phase_0"))
    return g


def test_negatives_type_consistent():
    g = graph_with_phases()
    triple = next(iter(g.triples))
    rng = np.random.default_rng(0)
    result = sample_negatives(triple, g, 20, rng)
    assert len(result.negatives) == 20
    for neg in result.negatives:
        assert neg != triple
        assert (neg.head != triple.head) != (neg.tail != triple.tail)  # exactly one side
        head, tail = neg.relation.signature
        assert g.nodes[neg.head].node_type is head
        assert g.nodes[neg.tail].node_type is tail
        assert neg not in g.triples


def test_negatives_exhausted_pool_flagged():
    g = KnowledgeGraph()
    g.add_node(Node("NCT00000000", NodeType.NCT, "t"))
    g.add_node(Node("ph:phase_1", NodeType.PH))
    g.upsert_triple(Triple("NCT00000000", RelationType.NCT_PH, "ph:phase_1"))
    triple = next(iter(g.triples))
    result = sample_negatives(triple, g, 4, np.random.default_rng(1))
    # single trial and single phase: no corruption of either side can avoid
    # the known positive
    assert result.negatives == []
    assert result.pool_exhausted


def test_negatives_only_two_tails():
    g = KnowledgeGraph()
    g.add_node(Node("NCT00000000", NodeType.NCT, "t"))
    g.add_node(Node("ph:phase_1", NodeType.PH))
    g.add_node(Node("ph:phase_2", NodeType.PH))
    g.upsert_triple(Triple("NCT00000000", RelationType.NCT_PH, "ph:phase_1"))
    triple = next(iter(g.triples))
    result = sample_negatives(triple, g, 50, np.random.default_rng(2))
    distinct_tails = {n.tail for n in result.negatives if n.head == triple.head}
    assert distinct_tails <= {"ph:phase_2"}


def test_negatives_uniform_frequency():
    # tail corruption over 10 phases: 3-sigma binomial band around uniform
    g = graph_with_phases()
    triple = next(iter(g.triples))
    rng = np.random.default_rng(7)
    counts = {}
    n_draws = 0
    while n_draws < 10000:
        for neg in sample_negatives(triple, g, 10, rng).negatives:
            if neg.tail != triple.tail:  # tail-side corruption
                counts[neg.tail] = counts.get(neg.tail, 0) + 1
                n_draws += 1
    p = 1.0 / 9  # phase_0 is filtered out, 9 candidates remain
    sigma = np.sqrt(n_draws * p * (1 - p))
    for tail, count in counts.items():
        assert abs(count - n_draws * p) <= 3.5 * sigma, (tail, count)


# --- scoring ---------------------------------------------------------------------


def test_transe_perfect_translation_scores_zero():
    model = hand_model(
        "transe",
        {"h": np.array([1.0, 0.0]), "t": np.array([1.0, 1.0])},
        {"NCT:ICR": np.array([0.0, 1.0])},
    )
    assert score_triple(model, "h", "NCT:ICR", "t") == 0.0


def test_complex_dim1_all_ones():
    model = hand_model(
        "complex",
        {"h": np.array([1.0, 0.0]), "t": np.array([1.0, 0.0])},
        {"NCT:ICR": np.array([1.0, 0.0])},
    )
    assert score_triple(model, "h", "NCT:ICR", "t") == pytest.approx(1.0)


def test_transr_identity_projection_equals_transe():
    rng = np.random.default_rng(3)
    entities = {f"e{i}": rng.normal(size=4) for i in range(4)}
    relations = {"NCT:ICR": rng.normal(size=4)}
    transe = hand_model("transe", entities, relations)
    transr = hand_model(
        "transr", entities, relations, projections={"NCT:ICR": np.eye(4)}
    )
    for h in ("e0", "e1"):
        for t in ("e2", "e3"):
            a = score_triple(transe, h, "NCT:ICR", t)
            b = score_triple(transr, h, "NCT:ICR", t)
            assert abs(a - b) <= 1e-9


def test_node2vec_scores_cosine_ignoring_relation():
    model = hand_model("node2vec", {"a": np.array([1.0, 0.0]), "b": np.array([1.0, 1.0])}, None)
    expected = 1.0 / np.sqrt(2.0)
    assert score_triple(model, "a", "NCT:ICR", "b") == pytest.approx(expected, abs=1e-12)


def test_complex_symmetry_with_real_relation():
    rng = np.random.default_rng(5)
    entities = {f"e{i}": rng.normal(size=8) for i in range(3)}
    rel = rng.normal(size=8)
    rel[1::2] = 0.0  # purely real coordinates
    model = hand_model("complex", entities, {"NCT:ICR": rel})
    for h in entities:
        for t in entities:
            a = score_triple(model, h, "NCT:ICR", t)
            b = score_triple(model, t, "NCT:ICR", h)
            assert abs(a - b) <= 1e-9


def test_score_unknown_entity_or_relation():
    model = hand_model("transe", {"a": np.ones(2), "b": np.ones(2)}, {"NCT:ICR": np.ones(2)})
    with pytest.raises(KgeLookupError):
        score_triple(model, "zz", "NCT:ICR", "b")
    with pytest.raises(KgeLookupError):
        model.relation_row("NOPE")


# --- loss and gradients ------------------------------------------------------------


def fd_check(model: KgeModel, positives, negatives, rel_tol=1e-4, step=1e-5):
    """Central finite differences over every touched parameter."""
    loss, grads = loss_and_gradients(model, positives, negatives)

    def loss_at():
        return loss_and_gradients(model, positives, negatives)[0]

    for (table, key), grad in grads.items():
        if table == "entity":
            arr = model.entity_vectors[model.entity_row(key)]
        elif table == "relation":
            arr = model.relation_vectors[model.relation_row(key)]
        else:
            arr = model.relation_projections[model.relation_row(key)]
        flat_grad = np.asarray(grad).ravel()
        flat = arr.ravel()
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + step
            up = loss_at()
            flat[idx] = orig - step
            down = loss_at()
            flat[idx] = orig
            numeric = (up - down) / (2 * step)
            denom = max(abs(numeric), abs(flat_grad[idx]), 1.0)
            assert abs(numeric - flat_grad[idx]) / denom <= rel_tol, (table, key, idx)


def pair_fixture(kind: str, seed: int, dim: int = 3):
    rng = np.random.default_rng(seed)
    width = dim * 2 if kind == "complex" else dim
    entities = {f"e{i}": rng.normal(size=width) for i in range(4)}
    relations = {"NCT:ICR": rng.normal(size=width)}
    projections = {"NCT:ICR": rng.normal(size=(dim, dim))} if kind == "transr" else None
    model = hand_model(kind, entities, relations, projections, dim=dim)
    pos = Triple("e0", RelationType.NCT_ICR, "e1")
    negs = [Triple("e2", RelationType.NCT_ICR, "e1"), Triple("e0", RelationType.NCT_ICR, "e3")]
    return model, [pos], [negs]


def test_hinge_inactive_zero_loss_zero_gradient():
    model = hand_model(
        "transe",
        {"h": np.array([0.0, 0.0]), "t": np.array([0.0, 0.0]), "far": np.array([10.0, 0.0])},
        {"NCT:ICR": np.array([0.0, 0.0])},
        margin=1.0,
    )
    pos = Triple("h", RelationType.NCT_ICR, "t")          # d = 0
    neg = Triple("h", RelationType.NCT_ICR, "far")        # d = 10  >= margin
    loss, grads = loss_and_gradients(model, [pos], [[neg]])
    assert loss == 0.0
    for grad in grads.values():
        assert np.allclose(grad, 0.0)


@pytest.mark.parametrize("kind", ["transe", "transr", "complex"])
def test_gradients_match_finite_differences(kind):
    for seed in range(3):
        model, pos, negs = pair_fixture(kind, seed)
        fd_check(model, pos, negs)


def test_loss_and_gradients_validates_inputs():
    model, pos, negs = pair_fixture("transe", 0)
    with pytest.raises(KgeError):
        loss_and_gradients(model, [], [])
    with pytest.raises(KgeError):
        loss_and_gradients(model, pos, [[]])


# --- training ---------------------------------------------------------------------


def small_graph_split(n=40, seed=1):
    records = generate_synthetic_corpus(seed, n)
    graph = build_graph(records, NormalizationTable.identity())
    split = split_triples(graph, strata=trial_strata(records), seed=seed)
    return graph, split


def test_train_loss_decreases():
    graph, split = small_graph_split()
    config = TrainConfig(kind="transe", epochs=25, dim=16, seed=2)
    model = train_kge(graph, split, config)
    assert model.loss_trace[-1] < model.loss_trace[0]
    assert len(model.loss_trace) == 25


def test_train_same_seed_identical():
    graph, split = small_graph_split()
    config = TrainConfig(kind="transe", epochs=5, dim=8, seed=3)
    a = train_kge(graph, split, config)
    b = train_kge(graph, split, config)
    assert np.array_equal(a.entity_vectors, b.entity_vectors)
    assert np.array_equal(a.relation_vectors, b.relation_vectors)


def test_train_covers_every_graph_node():
    graph, split = small_graph_split()
    model = train_kge(graph, split, TrainConfig(kind="transe", epochs=2, dim=8, seed=0))
    assert set(model.entity_ids) == set(graph.nodes)


def test_translational_entity_norms_unit():
    graph, split = small_graph_split()
    for kind in ("transe", "transr"):
        model = train_kge(graph, split, TrainConfig(kind=kind, epochs=3, dim=8, seed=0))
        norms = np.linalg.norm(model.entity_vectors, axis=1)
        assert np.all(np.abs(norms - 1.0) <= 1e-6), kind


def test_train_star_graph_ranks_true_triples():
    # forced structure: criterion hubs, each shared by a cluster of trials
    g = KnowledgeGraph()
    for h in range(4):
        hub = f"hub{h}".ljust(32, "0")
        g.add_node(Node(hub, NodeType.ICR, "c"))
        for i in range(3):
            trial = f"NCT{h}{i:07d}"
            g.add_node(Node(trial, NodeType.NCT, "t"))
            g.upsert_triple(Triple(trial, RelationType.NCT_ICR, hub))
    split = TripleSplit(train=sorted(g.triples, key=lambda t: (t.head, t.tail)), valid=[], test=[])
    model = train_kge(g, split, TrainConfig(kind="transe", epochs=200, dim=16, seed=1, lr=0.02))
    wins = total = 0
    icr_ids = g.node_ids_of_type(NodeType.ICR)
    for triple in split.train:
        true_score = score_triple(model, triple.head, triple.relation, triple.tail)
        for other in icr_ids:
            if Triple(triple.head, triple.relation, other) in g.triples:
                continue
            total += 1
            if true_score > score_triple(model, triple.head, triple.relation, other):
                wins += 1
    assert wins / total >= 0.95


def test_train_complex_runs_and_decreases():
    graph, split = small_graph_split(30)
    model = train_kge(graph, split, TrainConfig(kind="complex", epochs=20, dim=8, seed=4, lr=0.05))
    assert model.loss_trace[-1] < model.loss_trace[0]
    assert model.entity_vectors.shape[1] == 16  # interleaved re/im pairs


def test_train_divergence_reports_epoch():
    # the logistic kind has no norm projection, so a huge step size blows up
    graph, split = small_graph_split(30)
    with pytest.raises(TrainingError, match="epoch"):
        train_kge(graph, split, TrainConfig(kind="complex", epochs=30, dim=8, seed=0, lr=10.0))


def test_train_rejects_empty_split():
    graph, _ = small_graph_split(30)
    empty = TripleSplit(train=[], valid=[], test=[])
    with pytest.raises(TrainingError):
        train_kge(graph, empty, TrainConfig(kind="transe", epochs=1, dim=4))


def test_train_config_validation():
    with pytest.raises(KgeError):
        TrainConfig(kind="transe", epochs=0)
    with pytest.raises(KgeError):
        TrainConfig(kind="transe", dim=1)
    with pytest.raises(KgeError):
        TrainConfig(kind="hrgat")


# --- walks and node2vec --------------------------------------------------------------


def path_graph():
    g = KnowledgeGraph()
    g.add_node(Node("NCT00000001", NodeType.NCT, "a"))
    g.add_node(Node("i1".ljust(32, "0"), NodeType.ICR, "c1"))
    g.add_node(Node("i2".ljust(32, "0"), NodeType.ICR, "c2"))
    g.upsert_triple(Triple("NCT00000001", RelationType.NCT_ICR, "i1".ljust(32, "0")))
    g.upsert_triple(Triple("NCT00000001", RelationType.NCT_ICR, "i2".ljust(32, "0")))
    return g


def test_walks_isolated_node_length_one():
    g = path_graph()
    g.add_node(Node("ph:phase_1", NodeType.PH))  # no edges
    corpus = generate_walks(g, walks_per_node=3, walk_length=10, seed=0)
    isolated = [w for w in corpus.iter_id_walks() if w[0] == "ph:phase_1"]
    assert len(isolated) == 3
    assert all(w == ["ph:phase_1"] for w in isolated)


def test_walks_follow_edges():
    g = path_graph()
    corpus = generate_walks(g, walks_per_node=5, walk_length=8, seed=1)
    adjacency = {}
    for t in g.triples:
        adjacency.setdefault(t.head, set()).add(t.tail)
        adjacency.setdefault(t.tail, set()).add(t.head)
    count_per_node = {}
    for walk in corpus.iter_id_walks():
        count_per_node[walk[0]] = count_per_node.get(walk[0], 0) + 1
        for a, b in zip(walk, walk[1:]):
            assert b in adjacency[a]
        assert len(walk) <= 8
    assert all(count_per_node[n] == 5 for n in g.nodes)


def test_walks_deterministic():
    g = path_graph()
    a = generate_walks(g, walks_per_node=4, walk_length=6, seed=3)
    b = generate_walks(g, walks_per_node=4, walk_length=6, seed=3)
    assert [w.tolist() for w in a.walks] == [w.tolist() for w in b.walks]


def barbell_graph():
    """Two 4-cliques of criteria joined through one bridging trial."""
    g = KnowledgeGraph()
    bridge = "NCT00000001"
    g.add_node(Node(bridge, NodeType.NCT, "bridge"))
    sides = []
    for side in range(2):
        trials = []
        for i in range(3):
            t = f"NCT0000{side}1{i:02d}"
            g.add_node(Node(t, NodeType.NCT, "t"))
            trials.append(t)
        for j in range(4):
            node_id = f"s{side}c{j}".ljust(32, "0")
            g.add_node(Node(node_id, NodeType.ICR, "c"))
            for t in trials:
                g.upsert_triple(Triple(t, RelationType.NCT_ICR, node_id))
            if j == 0:
                g.upsert_triple(Triple(bridge, RelationType.NCT_ICR, node_id))
        sides.append({f"s{side}c{j}".ljust(32, "0") for j in range(4)} | set(trials))
    return g, bridge, sides


def side_of(node, sides):
    return 0 if node in sides[0] else 1


def bridge_cross_rate(corpus, bridge, sides):
    """Of all (x, bridge, y) transits, the fraction that switch sides.

    At the bridge node the walk chooses between returning (weight 1/p) and
    crossing (weight 1/q, since the two bridge criteria share no edge), so
    the expected rate is (1/q) / (1/p + 1/q)."""
    cross = same = 0
    for walk in corpus.iter_id_walks():
        for x, mid, y in zip(walk, walk[1:], walk[2:]):
            if mid == bridge:
                if side_of(x, sides) == side_of(y, sides):
                    same += 1
                else:
                    cross += 1
    return cross, same


def test_biased_walks_in_out_parameter():
    # q >> 1 discourages moving outward: cross-bridge transitions get rarer
    g, bridge, sides = barbell_graph()
    neutral = generate_walks(g, walks_per_node=60, walk_length=12, p=1.0, q=1.0, seed=5)
    inward = generate_walks(g, walks_per_node=60, walk_length=12, p=1.0, q=8.0, seed=5)
    n_cross, n_same = bridge_cross_rate(neutral, bridge, sides)
    i_cross, i_same = bridge_cross_rate(inward, bridge, sides)
    assert n_cross + n_same > 50 and i_cross + i_same > 50
    neutral_rate = n_cross / (n_cross + n_same)
    inward_rate = i_cross / (i_cross + i_same)
    assert inward_rate < neutral_rate
    # expected rates: 1/2 at q=1, 1/9 at q=8
    assert abs(neutral_rate - 0.5) < 0.15
    assert abs(inward_rate - 1.0 / 9.0) < 0.1


def test_biased_walk_transition_probability():
    # second step return probability vs the exact bias formula
    g, bridge, sides = barbell_graph()
    p_param = q_param = 4.0
    corpus = generate_walks(g, walks_per_node=400, walk_length=3, p=p_param, q=q_param, seed=8)
    returns = onward = 0
    for walk in corpus.iter_id_walks():
        if len(walk) == 3 and walk[0].startswith("s0c"):
            if walk[2] == walk[0]:
                returns += 1
            else:
                onward += 1
    total = returns + onward
    # criteria connect only through trials, so every non-return neighbor sits
    # at distance 2 from the previous node: weights are 1/p vs (deg-1)/q.
    # s0c0 reaches the bridge trial (degree 2) in 1/4 of its walks; the other
    # criteria see only degree-4 trials.
    p_ret_regular = (1 / p_param) / (1 / p_param + 3 / q_param)
    p_ret_bridge = (1 / p_param) / (1 / p_param + 1 / q_param)
    # s0c0 (a quarter of these walks) borders the degree-2 bridge trial
    expected = (1 / 4) * ((3 / 4) * p_ret_regular + (1 / 4) * p_ret_bridge) \
        + (3 / 4) * p_ret_regular
    sigma = np.sqrt(expected * (1 - expected) / total)
    assert total > 1000
    assert abs(returns / total - expected) <= 4 * sigma


def test_node2vec_trains_and_has_no_relations():
    g, _, _ = barbell_graph()
    corpus = generate_walks(g, walks_per_node=10, walk_length=10, seed=2)
    model = train_node2vec(corpus, Node2VecParams(dim=16, epochs=3, seed=2, subsample=0.0))
    assert model.kind == "node2vec"
    assert model.relation_vectors is None and model.relation_ids is None
    assert set(model.entity_ids) == set(g.nodes)


def test_node2vec_cooccurrence_beats_stranger():
    g = KnowledgeGraph()
    for name in ("NCT00000001", "NCT00000002"):
        g.add_node(Node(name, NodeType.NCT, "t"))
    g.add_node(Node("c1".ljust(32, "0"), NodeType.ICR, "c"))
    g.add_node(Node("c2".ljust(32, "0"), NodeType.ICR, "c"))
    g.upsert_triple(Triple("NCT00000001", RelationType.NCT_ICR, "c1".ljust(32, "0")))
    g.upsert_triple(Triple("NCT00000002", RelationType.NCT_ICR, "c2".ljust(32, "0")))
    corpus = generate_walks(g, walks_per_node=40, walk_length=6, seed=1)
    model = train_node2vec(corpus, Node2VecParams(dim=12, epochs=10, seed=1, subsample=0.0))
    paired = score_triple(model, "NCT00000001", "NCT:ICR", "c1".ljust(32, "0"))
    stranger = score_triple(model, "NCT00000001", "NCT:ICR", "c2".ljust(32, "0"))
    assert paired > stranger


def test_node2vec_deterministic():
    g, _, _ = barbell_graph()
    corpus = generate_walks(g, walks_per_node=5, walk_length=8, seed=0)
    a = train_node2vec(corpus, Node2VecParams(dim=8, epochs=2, seed=5))
    b = train_node2vec(corpus, Node2VecParams(dim=8, epochs=2, seed=5))
    assert np.array_equal(a.entity_vectors, b.entity_vectors)


def test_node2vec_empty_corpus_errors():
    with pytest.raises(TrainingError):
        train_node2vec(WalkCorpus(node_ids=[], walks=[]), Node2VecParams(dim=8))


def test_walks_empty_graph_errors():
    with pytest.raises(TrainingError):
        generate_walks(KnowledgeGraph())


# --- bundles -----------------------------------------------------------------------


@pytest.mark.parametrize("kind", ["transe", "transr", "complex"])
def test_bundle_roundtrip(tmp_path, kind):
    graph, split = small_graph_split(25)
    model = train_kge(graph, split, TrainConfig(kind=kind, epochs=2, dim=6, seed=1))
    save_bundle(model, tmp_path / "m")
    loaded = load_bundle(tmp_path / "m")
    assert loaded.kind == kind and loaded.dim == 6
    assert loaded.entity_ids == model.entity_ids
    assert loaded.relation_ids == model.relation_ids
    triple = split.test[0]
    a = score_triple(model, triple.head, triple.relation, triple.tail)
    b = score_triple(loaded, triple.head, triple.relation, triple.tail)
    assert abs(a - b) < 1e-4  # float32 storage
    if kind == "transr":
        raw = (tmp_path / "m" / "projections.bin").read_bytes()
        assert raw[:8] == PROJECTIONS_MAGIC
        assert len(raw) == 8 + len(model.relation_ids) * 6 * 6 * 4


def test_bundle_node2vec_has_no_relations_file(tmp_path):
    g, _, _ = barbell_graph()
    corpus = generate_walks(g, walks_per_node=3, walk_length=5, seed=0)
    model = train_node2vec(corpus, Node2VecParams(dim=8, epochs=1, seed=0))
    save_bundle(model, tmp_path / "m")
    assert not (tmp_path / "m" / "relations.vec").exists()
    loaded = load_bundle(tmp_path / "m")
    assert loaded.relation_vectors is None


def test_bundle_rewrite_is_byte_identical(tmp_path):
    graph, split = small_graph_split(25)
    model = train_kge(graph, split, TrainConfig(kind="transe", epochs=2, dim=6, seed=1))
    save_bundle(model, tmp_path / "m1")
    loaded = load_bundle(tmp_path / "m1")
    save_bundle(loaded, tmp_path / "m2")
    for name in ("header.json", "entities.vec", "relations.vec"):
        assert (tmp_path / "m1" / name).read_bytes() == (tmp_path / "m2" / name).read_bytes()
