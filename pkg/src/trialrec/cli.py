"""Command-line pipeline: synth/ingest -> train-text -> normalize ->
build-graph -> split -> train-kge -> eval / eval-rec / recommend / serve.

Stages communicate only through documented file formats. Every run writes a
machine-readable effective-config JSON next to its output artifact, and no
artifact embeds timestamps, so a rerun with the same seeds is byte-identical.
Outputs are never overwritten without --force.

Exit codes: 0 success, 1 validation error, 2 data error.
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click

from . import __version__
from .ingest import RejectedRecordError, build_graph, text_training_corpus, trial_strata
from .inductive import (
    BlindSetError,
    InductiveError,
    RecommendationQuery,
    evaluate_blind_set,
)
from .kg import InvalidValueError, KnowledgeGraph, NodeType
from .kge import (
    KgeError,
    TrainConfig,
    TrainingError,
    TripleSplit,
    load_split,
    save_split,
    split_triples,
    train_kge,
)
from .model_io import BundleError, load_bundle, save_bundle
from .node2vec import Node2VecParams, generate_walks, train_node2vec
from .normalize import NormalizationTable, normalize_entity_texts
from .ranking import EvalError, evaluate_split
from .records import ParseError, read_jsonl, write_jsonl
from .service import ServiceError, load_snapshot, recommend_payload
from .synth import generate_synthetic_corpus
from .textspace import TextSpace, TextSpaceError, TextSpaceParams, train_text_space
from .vecio import VectorFileError


class DataError(Exception):
    """Input data problems: exit code 2."""


class ValidationError(Exception):
    """Bad invocation or refusing to act: exit code 1."""


def _fail_validation(message: str) -> None:
    raise ValidationError(message)


def _check_out(path: Path, force: bool) -> None:
    exists = path.exists() and (path.is_file() or any(path.iterdir()) if path.is_dir() else path.exists())
    if exists and not force:
        _fail_validation(f"refusing to overwrite existing output {path} (use --force)")


def _write_effective_config(out: Path, subcommand: str, params: dict) -> None:
    payload = {
        "subcommand": subcommand,
        "params": params,
        "version": __version__,
    }
    target = out / "effective-config.json" if out.is_dir() else out.with_name(out.name + ".config.json")
    with open(target, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(payload, sort_keys=True) + "\n")


def _load_config_defaults(ctx: click.Context, config_path: str | None) -> None:
    """Fill parameters from a JSON config file unless set on the command line."""
    if not config_path:
        return
    try:
        with open(config_path, encoding="utf-8") as fh:
            overrides = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read config {config_path}: {exc}") from exc
    if not isinstance(overrides, dict):
        raise DataError(f"config {config_path} must be a JSON object")
    aliases = {}
    for param in ctx.command.params:
        for opt in getattr(param, "opts", []):
            aliases[opt.lstrip("-").replace("-", "_")] = param.name
    for key, value in overrides.items():
        name = aliases.get(key.replace("-", "_"), key.replace("-", "_"))
        if name not in ctx.params:
            raise ValidationError(f"config {config_path}: unknown parameter {key!r}")
        source = ctx.get_parameter_source(name)
        if source is not None and source.name != "COMMANDLINE":
            ctx.params[name] = value


def _load_records(path: str):
    try:
        return list(read_jsonl(path))
    except (OSError, ParseError) as exc:
        raise DataError(str(exc)) from exc


def _load_graph(graph_dir: str) -> KnowledgeGraph:
    try:
        return KnowledgeGraph.load(graph_dir)
    except (OSError, InvalidValueError) as exc:
        raise DataError(f"cannot load graph from {graph_dir}: {exc}") from exc


def _load_strata(graph_dir: str) -> dict[str, str]:
    path = Path(graph_dir) / "strata.tsv"
    if not path.exists():
        return {}
    strata = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line:
                nct_id, _, label = line.partition("\t")
                strata[nct_id] = label
    return strata


def _resolve_type(tag: str) -> NodeType:
    for candidate in (tag, tag.upper(), tag.lower()):
        try:
            return NodeType.from_tag(candidate)
        except InvalidValueError:
            continue
    raise ValidationError(f"unknown element type: {tag!r}")


@click.group()
def cli() -> None:
    """Clinical-trial design recommendation pipeline."""


_common = [
    click.option("--force", is_flag=True, help="Overwrite existing outputs."),
    click.option("--deterministic", is_flag=True,
                 help="Force single-worker execution (all stages already run single-worker)."),
    click.option("--config", "config_path", type=click.Path(), default=None,
                 help="JSON file with parameter defaults; command-line flags win."),
]


def common_options(fn):
    for option in reversed(_common):
        fn = option(fn)
    return fn


@cli.command()
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--n", "n_trials", type=int, default=None,
              help="Number of trials (required here or in --config).")
@click.option("--start-index", type=int, default=0, show_default=True,
              help="Registry-id offset, so separate corpora stay disjoint.")
@click.option("--out", type=click.Path(), required=True)
@common_options
@click.pass_context
def synth(ctx, seed, n_trials, start_index, out, force, deterministic, config_path):
    """Generate a deterministic synthetic trial corpus (JSONL)."""
    _load_config_defaults(ctx, config_path)
    p = ctx.params
    out_path = Path(p["out"])
    _check_out(out_path, p["force"])
    if p["n_trials"] is None or p["n_trials"] < 1:
        _fail_validation("--n must be a positive trial count")
    records = generate_synthetic_corpus(p["seed"], p["n_trials"], p["start_index"])
    write_jsonl(records, out_path)
    _write_effective_config(out_path, "synth", {
        "seed": p["seed"], "n": p["n_trials"], "start_index": p["start_index"],
        "out": str(out_path), "deterministic": p["deterministic"],
    })
    click.echo(f"wrote {len(records)} records to {out_path}")


@cli.command()
@click.option("--input", "input_path", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True)
@common_options
@click.pass_context
def ingest(ctx, input_path, out, force, deterministic, config_path):
    """Parse raw trial records and keep interventional drug trials."""
    _load_config_defaults(ctx, config_path)
    p = ctx.params
    out_path = Path(p["out"])
    _check_out(out_path, p["force"])
    from .records import passes_filters

    records = _load_records(p["input_path"])
    kept = [r for r in records if passes_filters(r)]
    write_jsonl(kept, out_path)
    _write_effective_config(out_path, "ingest", {
        "input": str(p["input_path"]), "out": str(out_path),
        "kept": len(kept), "rejected": len(records) - len(kept),
    })
    click.echo(f"kept {len(kept)} of {len(records)} records")


@cli.command("train-text")
@click.option("--corpus", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--dim", type=int, default=100, show_default=True)
@click.option("--epochs", type=int, default=12, show_default=True)
@click.option("--window", type=int, default=5, show_default=True)
@click.option("--negatives", type=int, default=5, show_default=True)
@click.option("--lr", type=float, default=0.025, show_default=True)
@click.option("--min-count", type=int, default=1, show_default=True)
@click.option("--subsample", type=float, default=1e-3, show_default=True)
@click.option("--ngram-min", type=int, default=3, show_default=True)
@click.option("--ngram-max", type=int, default=6, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@common_options
@click.pass_context
def train_text(ctx, corpus, out, dim, epochs, window, negatives, lr, min_count,
               subsample, ngram_min, ngram_max, seed, force, deterministic, config_path):
    """Train the textual latent space on all entity texts and trial titles."""
    _load_config_defaults(ctx, config_path)
    p = ctx.params
    out_path = Path(p["out"])
    _check_out(out_path, p["force"])
    records = _load_records(p["corpus"])
    params = TextSpaceParams(
        dim=p["dim"], ngram_min=p["ngram_min"], ngram_max=p["ngram_max"],
        window=p["window"], negatives=p["negatives"], epochs=p["epochs"],
        lr=p["lr"], min_count=p["min_count"], seed=p["seed"],
        subsample=p["subsample"],
    )
    try:
        space = train_text_space(text_training_corpus(records), params)
    except TextSpaceError as exc:
        raise DataError(str(exc)) from exc
    space.save(out_path)
    _write_effective_config(out_path, "train-text", {
        "corpus": str(p["corpus"]), "out": str(out_path), **params.to_dict(),
    })
    click.echo(f"trained text space: vocab {len(space.vocab)}, dim {space.dim}")


@cli.command()
@click.option("--corpus", type=click.Path(exists=True), required=True)
@click.option("--text-space", "space_path", type=click.Path(exists=True), required=True)
@click.option("--tau", type=float, default=0.90, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@common_options
@click.pass_context
def normalize(ctx, corpus, space_path, tau, out, force, deterministic, config_path):
    """Cluster entity texts per type and emit the normalization table (TSV)."""
    _load_config_defaults(ctx, config_path)
    p = ctx.params
    out_path = Path(p["out"])
    _check_out(out_path, p["force"])
    if not (0 < p["tau"] <= 1.0):
        _fail_validation("--tau must be in (0, 1]")
    records = _load_records(p["corpus"])
    try:
        space = TextSpace.load(p["space_path"])
    except (VectorFileError, TextSpaceError) as exc:
        raise DataError(str(exc)) from exc
    from .ingest import collect_entity_texts
    from .kg import TEXTUAL_TYPES

    texts_by_type = {
        t: texts for t, texts in collect_entity_texts(records).items() if t in TEXTUAL_TYPES
    }
    table = normalize_entity_texts(texts_by_type, space, p["tau"])
    table.save(out_path)
    n_entries = sum(len(v) for v in table.entries.values())
    _write_effective_config(out_path, "normalize", {
        "corpus": str(p["corpus"]), "text_space": str(p["space_path"]),
        "tau": p["tau"], "out": str(out_path),
    })
    click.echo(f"normalization table: {n_entries} entries")


@cli.command("build-graph")
@click.option("--corpus", type=click.Path(exists=True), required=True)
@click.option("--table", "table_path", type=click.Path(exists=True), default=None,
              help="Normalization table TSV; exact-match normalization when omitted.")
@click.option("--out", type=click.Path(), required=True)
@common_options
@click.pass_context
def build_graph_cmd(ctx, corpus, table_path, out, force, deterministic, config_path):
    """Assemble the knowledge graph from filtered records."""
    _load_config_defaults(ctx, config_path)
    p = ctx.params
    out_dir = Path(p["out"])
    if out_dir.exists():
        _check_out(out_dir, p["force"])
    records = _load_records(p["corpus"])
    table = (
        NormalizationTable.load(p["table_path"])
        if p["table_path"]
        else NormalizationTable.identity()
    )
    try:
        graph = build_graph(records, table)
    except RejectedRecordError as exc:
        raise DataError(str(exc)) from exc
    graph.save(out_dir)
    strata = trial_strata(records)
    with open(out_dir / "strata.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for nct_id in sorted(strata):
            fh.write(f"{nct_id}\t{strata[nct_id]}\n")
    _write_effective_config(out_dir, "build-graph", {
        "corpus": str(p["corpus"]), "table": p["table_path"] and str(p["table_path"]),
        "out": str(out_dir),
    })
    stats = graph.stats()
    click.echo(f"graph: {stats.total_nodes} nodes, {stats.total_edges} edges")


@cli.command()
@click.option("--graph", "graph_dir", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), default=None)
@common_options
@click.pass_context
def stats(ctx, graph_dir, out, force, deterministic, config_path):
    """Print (or write) node/edge counts per type."""
    _load_config_defaults(ctx, config_path)
    p = ctx.params
    graph = _load_graph(p["graph_dir"])
    s = graph.stats()
    payload = {
        "node_count_by_type": dict(sorted(s.node_count_by_type.items())),
        "edge_count_by_type": dict(sorted(s.edge_count_by_type.items())),
        "total_nodes": s.total_nodes,
        "total_edges": s.total_edges,
    }
    text = json.dumps(payload, sort_keys=True, indent=2)
    if p["out"]:
        out_path = Path(p["out"])
        _check_out(out_path, p["force"])
        out_path.write_text(text + "\n", encoding="utf-8")
        _write_effective_config(out_path, "stats", {"graph": str(p["graph_dir"])})
    else:
        click.echo(text)


@cli.command()
@click.option("--graph", "graph_dir", type=click.Path(exists=True), required=True)
@click.option("--ratios", default="0.80,0.05,0.15", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@common_options
@click.pass_context
def split(ctx, graph_dir, ratios, seed, out, force, deterministic, config_path):
    """Stratified train/valid/test split of the graph's triples."""
    _load_config_defaults(ctx, config_path)
    p = ctx.params
    out_dir = Path(p["out"])
    if out_dir.exists():
        _check_out(out_dir, p["force"])
    try:
        parts = tuple(float(x) for x in p["ratios"].split(","))
    except ValueError:
        raise ValidationError(f"bad --ratios: {p['ratios']!r}") from None
    if len(parts) != 3:
        _fail_validation("--ratios needs three comma-separated numbers")
    graph = _load_graph(p["graph_dir"])
    try:
        result = split_triples(graph, ratios=parts, strata=_load_strata(p["graph_dir"]),
                               seed=p["seed"])
    except KgeError as exc:
        raise DataError(str(exc)) from exc
    save_split(result, out_dir)
    _write_effective_config(out_dir, "split", {
        "graph": str(p["graph_dir"]), "ratios": list(parts), "seed": p["seed"],
    })
    click.echo(
        f"split: {len(result.train)} train / {len(result.valid)} valid / {len(result.test)} test"
    )


@cli.command("train-kge")
@click.option("--graph", "graph_dir", type=click.Path(exists=True), required=True)
@click.option("--split", "split_dir", type=click.Path(exists=True), required=True)
@click.option("--model", "kind", type=click.Choice(["transe", "transr", "complex", "node2vec"]),
              default="transe", show_default=True)
@click.option("--train-on", type=click.Choice(["split", "all"]), default="split",
              show_default=True, help="'all' merges train+valid+test (test-on-train protocol).")
@click.option("--epochs", type=int, default=1000, show_default=True)
@click.option("--dim", type=int, default=100, show_default=True)
@click.option("--lr", type=float, default=None, help="Default 0.01 (triple SGD) / 0.025 (walks).")
@click.option("--margin", type=float, default=1.0, show_default=True)
@click.option("--negatives", type=int, default=8, show_default=True)
@click.option("--batch-size", type=int, default=128, show_default=True)
@click.option("--walks-per-node", type=int, default=50, show_default=True)
@click.option("--walk-length", type=int, default=80, show_default=True)
@click.option("--p", "p_param", type=float, default=1.0, show_default=True)
@click.option("--q", "q_param", type=float, default=1.0, show_default=True)
@click.option("--window", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@common_options
@click.pass_context
def train_kge_cmd(ctx, graph_dir, split_dir, kind, train_on, epochs, dim, lr, margin,
                  negatives, batch_size, walks_per_node, walk_length, p_param, q_param,
                  window, seed, out, force, deterministic, config_path):
    """Train graph embeddings and write a model bundle."""
    _load_config_defaults(ctx, config_path)
    p = ctx.params
    out_dir = Path(p["out"])
    if out_dir.exists():
        _check_out(out_dir, p["force"])
    graph = _load_graph(p["graph_dir"])
    base_split = load_split(p["split_dir"])
    training_split = base_split
    if p["train_on"] == "all" :
        training_split = TripleSplit(
            train=base_split.all_triples, valid=[], test=base_split.test,
            strata=base_split.strata, seed=base_split.seed,
        )
    elif p["kind"] == "node2vec":
        # the walk trainer has no use for a held-out valid set; fold it in
        training_split = TripleSplit(
            train=base_split.train + base_split.valid, valid=[], test=base_split.test,
            strata=base_split.strata, seed=base_split.seed,
        )
    try:
        if p["kind"] == "node2vec":
            walk_graph = KnowledgeGraph()
            for node in graph.nodes.values():
                walk_graph.add_node(node)
            for triple in training_split.train:
                walk_graph.upsert_triple(triple)
            corpus = generate_walks(
                walk_graph, walks_per_node=p["walks_per_node"],
                walk_length=p["walk_length"], p=p["p_param"], q=p["q_param"],
                seed=p["seed"],
            )
            params = Node2VecParams(
                dim=p["dim"], window=p["window"], negatives=p["negatives"],
                epochs=p["epochs"], lr=p["lr"] if p["lr"] is not None else 0.025,
                seed=p["seed"],
            )
            model = train_node2vec(corpus, params)
            model.config["trained_on"] = "all" if p["train_on"] == "all" else "train-split"
        else:
            config = TrainConfig(
                kind=p["kind"], epochs=p["epochs"], dim=p["dim"],
                lr=p["lr"] if p["lr"] is not None else 0.01, margin=p["margin"],
                negatives=p["negatives"], batch_size=p["batch_size"], seed=p["seed"],
            )
            model = train_kge(graph, training_split, config)
    except (KgeError, TrainingError) as exc:
        raise DataError(str(exc)) from exc
    save_bundle(model, out_dir)
    _write_effective_config(out_dir, "train-kge", {
        "graph": str(p["graph_dir"]), "split": str(p["split_dir"]),
        "model": p["kind"], "train_on": p["train_on"], "out": str(out_dir),
        "epochs": p["epochs"], "dim": p["dim"], "lr": p["lr"], "margin": p["margin"],
        "negatives": p["negatives"], "batch_size": p["batch_size"],
        "walks_per_node": p["walks_per_node"], "walk_length": p["walk_length"],
        "p": p["p_param"], "q": p["q_param"], "window": p["window"], "seed": p["seed"],
    })
    click.echo(f"trained {p['kind']}: final loss {model.loss_trace[-1]:.6f}")


@cli.command("eval")
@click.option("--bundle", type=click.Path(exists=True), required=True)
@click.option("--graph", "graph_dir", type=click.Path(exists=True), required=True)
@click.option("--split", "split_dir", type=click.Path(exists=True), required=True)
@click.option("--mode", type=click.Choice(["set-aside", "test-on-train"]),
              default="set-aside", show_default=True)
@click.option("--ranks-csv", type=click.Path(), default=None,
              help="Optional per-triple rank CSV.")
@click.option("--out", type=click.Path(), required=True)
@common_options
@click.pass_context
def eval_cmd(ctx, bundle, graph_dir, split_dir, mode, ranks_csv, out, force,
             deterministic, config_path):
    """Filtered-ranking link prediction metrics on the test split."""
    _load_config_defaults(ctx, config_path)
    p = ctx.params
    out_path = Path(p["out"])
    _check_out(out_path, p["force"])
    try:
        model = load_bundle(p["bundle"])
    except (BundleError, VectorFileError) as exc:
        raise DataError(str(exc)) from exc
    graph = _load_graph(p["graph_dir"])
    eval_split = load_split(p["split_dir"])
    mode_key = p["mode"].replace("-", "_")
    try:
        report, records = evaluate_split(model, graph, eval_split, mode=mode_key)
    except (EvalError, KgeError) as exc:
        raise DataError(str(exc)) from exc
    payload = report.to_dict()
    payload["model"] = model.kind
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(payload, sort_keys=True) + "\n")
    if p["ranks_csv"]:
        with open(p["ranks_csv"], "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["head", "relation", "tail", "tail_rank", "head_rank"])
            for r in records:
                writer.writerow([r.triple.head, r.triple.relation.tag, r.triple.tail,
                                 r.tail_rank, r.head_rank])
    _write_effective_config(out_path, "eval", {
        "bundle": str(p["bundle"]), "graph": str(p["graph_dir"]),
        "split": str(p["split_dir"]), "mode": mode_key, "out": str(out_path),
    })
    click.echo(f"{mode_key} mrr={report.mrr:.4f} hits@10={report.hits[10]:.4f}")


def _load_stores(bundle: str, graph_dir: str, space_path: str):
    try:
        snapshot = load_snapshot(
            bundle, Path(graph_dir) / "nodes.tsv", space_path
        )
    except ServiceError as exc:
        raise DataError(exc.message) from exc
    return snapshot


@cli.command()
@click.option("--bundle", type=click.Path(exists=True), required=True)
@click.option("--graph", "graph_dir", type=click.Path(exists=True), required=True)
@click.option("--text-space", "space_path", type=click.Path(exists=True), required=True)
@click.option("--title", required=True)
@click.option("--type", "element_tag", default="pep", show_default=True)
@click.option("--k", type=int, default=5, show_default=True)
@click.option("--knn-k", type=int, default=10, show_default=True)
@click.option("--weight-mode", type=click.Choice(["similarity", "distance", "normalized_similarity"]),
              default="similarity", show_default=True)
@common_options
@click.pass_context
def recommend(ctx, bundle, graph_dir, space_path, title, element_tag, k, knn_k,
              weight_mode, force, deterministic, config_path):
    """Recommend design elements for a draft trial title (prints JSON)."""
    _load_config_defaults(ctx, config_path)
    p = ctx.params
    if not p["title"].strip():
        _fail_validation("--title must be nonempty")
    snapshot = _load_stores(p["bundle"], p["graph_dir"], p["space_path"])
    element_type = _resolve_type(p["element_tag"])
    try:
        query = RecommendationQuery(
            query_text=p["title"], element_type=element_type, top_n=p["k"],
            knn_k=p["knn_k"], weight_mode=p["weight_mode"],
        )
        payload = recommend_payload(snapshot, query)
    except (InductiveError, ServiceError) as exc:
        message = exc.message if isinstance(exc, ServiceError) else str(exc)
        raise DataError(message) from exc
    click.echo(json.dumps(payload, sort_keys=True, indent=2))


@cli.command("eval-rec")
@click.option("--bundle", type=click.Path(exists=True), required=True)
@click.option("--graph", "graph_dir", type=click.Path(exists=True), required=True)
@click.option("--text-space", "space_path", type=click.Path(exists=True), required=True)
@click.option("--blind", type=click.Path(exists=True), required=True,
              help="JSONL of held-out trials, disjoint from training.")
@click.option("--configs", default="pep:3", show_default=True,
              help="Comma-separated <type>:<top_n> pairs, e.g. pep:3,ICR:10.")
@click.option("--knn-k", type=int, default=10, show_default=True)
@click.option("--weight-mode", type=click.Choice(["similarity", "distance", "normalized_similarity"]),
              default="similarity", show_default=True)
@click.option("--records-csv", type=click.Path(), default=None,
              help="Optional per-element CSV of best position/similarity.")
@click.option("--out", type=click.Path(), required=True)
@common_options
@click.pass_context
def eval_rec(ctx, bundle, graph_dir, space_path, blind, configs, knn_k, weight_mode,
             records_csv, out, force, deterministic, config_path):
    """Blind-set recommendation evaluation (mean rank / MRR / avg similarity)."""
    _load_config_defaults(ctx, config_path)
    p = ctx.params
    out_path = Path(p["out"])
    _check_out(out_path, p["force"])
    parsed_configs = []
    for chunk in p["configs"].split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        tag, _, top_n = chunk.partition(":")
        if not top_n.isdigit() or int(top_n) < 1:
            raise ValidationError(f"bad --configs entry: {chunk!r}")
        parsed_configs.append((_resolve_type(tag), int(top_n)))
    if not parsed_configs:
        _fail_validation("--configs must name at least one <type>:<top_n> pair")
    snapshot = _load_stores(p["bundle"], p["graph_dir"], p["space_path"])
    blind_trials = _load_records(p["blind"])
    try:
        reports = evaluate_blind_set(
            blind_trials, snapshot.stores, parsed_configs,
            knn_k=p["knn_k"], weight_mode=p["weight_mode"],
        )
    except (BlindSetError, InductiveError) as exc:
        raise DataError(str(exc)) from exc
    payload = [r.to_dict() for r in reports]
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(payload, sort_keys=True) + "\n")
    if p["records_csv"]:
        with open(p["records_csv"], "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["nct_id", "element_type", "best_position", "best_similarity"])
            for report in reports:
                for rec in report.records:
                    writer.writerow([rec.nct_id, rec.element_type,
                                     rec.best_position, rec.best_similarity])
    _write_effective_config(out_path, "eval-rec", {
        "bundle": str(p["bundle"]), "graph": str(p["graph_dir"]),
        "text_space": str(p["space_path"]), "blind": str(p["blind"]),
        "configs": p["configs"], "knn_k": p["knn_k"], "weight_mode": p["weight_mode"],
    })
    for report in reports:
        click.echo(
            f"{report.element_type} top{report.top_n}: mean_rank={report.mean_rank:.3f} "
            f"mrr={report.mrr:.3f} avg_sim={report.avg_best_similarity:.3f} "
            f"(n={report.n_queries})"
        )


@cli.command()
@click.option("--bundle", type=click.Path(exists=True), required=True, envvar="TRIALREC_BUNDLE")
@click.option("--graph", "graph_dir", type=click.Path(exists=True), required=True,
              envvar="TRIALREC_GRAPH")
@click.option("--text-space", "space_path", type=click.Path(exists=True), required=True,
              envvar="TRIALREC_TEXT_SPACE")
@click.option("--host", default="127.0.0.1", show_default=True, envvar="TRIALREC_HOST")
@click.option("--port", type=int, default=8230, show_default=True, envvar="TRIALREC_PORT")
@click.option("--static", "static_dir", type=click.Path(), default=None,
              envvar="TRIALREC_STATIC", help="Directory of UI assets to serve at /.")
@common_options
@click.pass_context
def serve(ctx, bundle, graph_dir, space_path, host, port, static_dir, force,
          deterministic, config_path):
    """Serve /recommend, /embed, /neighbors over a loaded snapshot."""
    _load_config_defaults(ctx, config_path)
    p = ctx.params
    from .service import serve as run_service

    try:
        run_service(
            p["bundle"], Path(p["graph_dir"]) / "nodes.tsv", p["space_path"],
            host=p["host"], port=p["port"], static_dir=p["static_dir"],
        )
    except ServiceError as exc:
        raise DataError(exc.message) from exc


def run(argv: list[str] | None = None) -> int:
    """Entry point with the documented exit-code contract."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.NoArgsIsHelpError as exc:
        click.echo(exc.format_message(), err=True)
        return 1
    except click.UsageError as exc:
        if exc.ctx is not None:
            click.echo(exc.ctx.get_usage(), err=True)
        click.echo(f"error: {exc.format_message()}", err=True)
        return 1
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except ValidationError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
