"""Read-only HTTP service over a loaded model snapshot.

A snapshot bundles the text space, the graph-embedding model, and the search
indexes; it is swapped atomically so every response is served from exactly one
snapshot, identified in the body by its content-derived id. There are no
training or mutation endpoints.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .inductive import (
    InductiveError,
    RECOMMENDABLE_TYPES,
    RecommendationQuery,
    RecommenderStores,
    build_stores,
    estimate_embedding,
    NewEntity,
    recommend,
)
from .kg import InvalidValueError, NodeType, load_node_manifest
from .kge import KgeLookupError
from .model_io import BundleError, load_bundle
from .textspace import TextSpace, TextSpaceError
from .vecio import VectorFileError
from .vindex import knn


class ServiceError(Exception):
    def __init__(self, code: str, message: str, status: int = 400) -> None:
        super().__init__(message)
        self.code = code
        self.message = message
        self.status = status


@dataclass
class ModelSnapshot:
    snapshot_id: str
    kind: str
    stores: RecommenderStores
    node_types: dict[str, NodeType]
    loaded_at: float
    paths: dict[str, str]

    @property
    def text_space(self) -> TextSpace:
        return self.stores.text_space


def _content_id(paths: list[Path]) -> str:
    digest = hashlib.sha256()
    for path in paths:
        digest.update(path.read_bytes())
    return digest.hexdigest()[:16]


def load_snapshot(
    model_bundle_path: str | Path,
    graph_manifest_path: str | Path,
    text_space_path: str | Path,
) -> ModelSnapshot:
    """Load and cross-validate the three artifacts; raises ServiceError with
    file context on any mismatch."""
    bundle_dir = Path(model_bundle_path)
    manifest_path = Path(graph_manifest_path)
    space_path = Path(text_space_path)
    try:
        model = load_bundle(bundle_dir)
        nodes = load_node_manifest(manifest_path)
        space = TextSpace.load(space_path)
    except (OSError, InvalidValueError, VectorFileError, BundleError, TextSpaceError) as exc:
        raise ServiceError("load_error", f"failed to load snapshot inputs: {exc}", 500) from exc

    missing = [e for e in model.entity_ids if e not in nodes]
    if missing:
        raise ServiceError(
            "load_error",
            f"{bundle_dir / 'entities.vec'}: entity ids absent from node manifest "
            f"{manifest_path}: {', '.join(sorted(missing)[:5])}",
            500,
        )
    node_types = {node_id: node.node_type for node_id, node in nodes.items()}
    node_texts = {
        node_id: node.attribute_text or "" for node_id, node in nodes.items()
    }
    stores = build_stores(space, model, node_types, node_texts)

    hash_inputs = [bundle_dir / "header.json", bundle_dir / "entities.vec"]
    for extra in ("relations.vec", "projections.bin"):
        if (bundle_dir / extra).exists():
            hash_inputs.append(bundle_dir / extra)
    hash_inputs += [manifest_path, space_path]
    return ModelSnapshot(
        snapshot_id=_content_id(hash_inputs),
        kind=model.kind,
        stores=stores,
        node_types=node_types,
        loaded_at=time.time(),
        paths={
            "model_bundle": str(bundle_dir),
            "graph_manifest": str(manifest_path),
            "text_space": str(space_path),
        },
    )


class SnapshotHolder:
    """Atomic reference to the current snapshot; reload is the only writer."""

    def __init__(self, snapshot: ModelSnapshot | None = None) -> None:
        self._snapshot = snapshot

    def get(self) -> ModelSnapshot:
        snapshot = self._snapshot
        if snapshot is None:
            raise ServiceError("no_snapshot", "no model snapshot is loaded", 503)
        return snapshot

    def swap(self, snapshot: ModelSnapshot) -> None:
        self._snapshot = snapshot


def _json(payload: dict, status: int = 200) -> JSONResponse:
    return JSONResponse(content=payload, status_code=status)


def _error(exc: ServiceError) -> JSONResponse:
    return _json({"error": {"code": exc.code, "message": exc.message}}, exc.status)


def _parse_recommend_body(body: dict) -> RecommendationQuery:
    title = body.get("title")
    if not isinstance(title, str) or not title.strip():
        raise ServiceError("empty_query", "title must be a nonempty string")
    tag = body.get("element_type")
    if not isinstance(tag, str):
        raise ServiceError("bad_element_type", "element_type must be a node type tag")
    try:
        element_type = NodeType.from_tag(tag)
    except InvalidValueError:
        raise ServiceError("bad_element_type", f"unknown element type: {tag!r}") from None
    if element_type not in RECOMMENDABLE_TYPES:
        raise ServiceError("bad_element_type", f"{tag} is not a recommendable type")
    k = body.get("k", 10)
    knn_k = body.get("knn_k", 10)
    weight_mode = body.get("weight_mode", "similarity")
    if not isinstance(k, int) or not isinstance(knn_k, int) or k < 1 or knn_k < 1:
        raise ServiceError("bad_count", "k and knn_k must be positive integers")
    try:
        return RecommendationQuery(
            query_text=title.strip(),
            element_type=element_type,
            top_n=k,
            knn_k=knn_k,
            weight_mode=weight_mode,
        )
    except InductiveError as exc:
        raise ServiceError("bad_request", str(exc)) from exc


def recommend_payload(snapshot: ModelSnapshot, query: RecommendationQuery) -> dict:
    """The /recommend response body; also used to check service/library parity."""
    try:
        recommendations, trace = recommend(query, snapshot.stores)
    except InductiveError as exc:
        raise ServiceError("bad_query", str(exc)) from exc
    return {
        "snapshot_id": snapshot.snapshot_id,
        "model_kind": snapshot.kind,
        "recommendations": [
            {
                "node_id": rec.node_id,
                "text": rec.attribute_text,
                "kg_similarity": rec.kg_similarity,
                "position": rec.position,
            }
            for rec in recommendations
        ],
        "trace": {
            "weight_mode": trace.weight_mode,
            "neighbors": [
                {
                    "node_id": node_id,
                    "title": snapshot.stores.node_texts.get(node_id, ""),
                    "weight": weight,
                }
                for node_id, weight in trace.neighbors
            ],
        },
    }


def create_app(holder: SnapshotHolder, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="trialrec", docs_url=None, redoc_url=None)

    @app.exception_handler(ServiceError)
    async def _handle(request: Request, exc: ServiceError):  # noqa: ARG001
        return _error(exc)

    @app.get("/health")
    async def health():
        try:
            snapshot = holder.get()
            return _json({"status": "ok", "snapshot_id": snapshot.snapshot_id})
        except ServiceError:
            return _json({"status": "no_snapshot", "snapshot_id": None}, 503)

    @app.get("/models")
    async def models():
        snapshot = holder.get()
        return _json(
            {
                "snapshot_id": snapshot.snapshot_id,
                "model_kind": snapshot.kind,
                "loaded_at": snapshot.loaded_at,
                "paths": snapshot.paths,
                "entities": len(snapshot.stores.kge_model.entity_ids),
                "recommendable_types": sorted(
                    t.tag for t in snapshot.stores.kg_index.types()
                    if t in RECOMMENDABLE_TYPES
                ),
            }
        )

    @app.post("/recommend")
    async def post_recommend(request: Request):
        snapshot = holder.get()
        try:
            body = await request.json()
        except Exception:
            raise ServiceError("bad_json", "request body must be a JSON object") from None
        if not isinstance(body, dict):
            raise ServiceError("bad_json", "request body must be a JSON object")
        query = _parse_recommend_body(body)
        return _json(recommend_payload(snapshot, query))

    @app.post("/embed")
    async def post_embed(request: Request):
        snapshot = holder.get()
        try:
            body = await request.json()
        except Exception:
            raise ServiceError("bad_json", "request body must be a JSON object") from None
        text = body.get("text") if isinstance(body, dict) else None
        if not isinstance(text, str) or not text.strip():
            raise ServiceError("empty_query", "text must be a nonempty string")
        knn_k = body.get("knn_k", 10)
        if not isinstance(knn_k, int) or knn_k < 1:
            raise ServiceError("bad_count", "knn_k must be a positive integer")
        try:
            trace = estimate_embedding(
                NewEntity(NodeType.NCT, text.strip()),
                snapshot.stores.text_space,
                snapshot.stores.text_index,
                snapshot.stores.kge_model,
                k=knn_k,
            )
        except InductiveError as exc:
            raise ServiceError("bad_query", str(exc)) from exc
        return _json(
            {
                "snapshot_id": snapshot.snapshot_id,
                "model_kind": snapshot.kind,
                "vector": [float(x) for x in trace.estimated_vector],
                "neighbors": [
                    {"node_id": n, "weight": w} for n, w in trace.neighbors
                ],
            }
        )

    @app.get("/neighbors")
    async def neighbors(node_id: str = "", k: int = 10, element_type: str = ""):
        snapshot = holder.get()
        if not node_id:
            raise ServiceError("missing_node_id", "node_id query parameter is required")
        if k < 1:
            raise ServiceError("bad_count", "k must be a positive integer")
        stores = snapshot.stores
        if not stores.kge_model.has_entity(node_id):
            raise ServiceError("unknown_node", f"unknown node id: {node_id}", 404)
        if element_type:
            try:
                target_type = NodeType.from_tag(element_type)
            except InvalidValueError:
                raise ServiceError(
                    "bad_element_type", f"unknown element type: {element_type!r}"
                ) from None
        else:
            target_type = snapshot.node_types[node_id]
        try:
            vector = stores.kge_model.entity_vector(node_id)
        except KgeLookupError as exc:
            raise ServiceError("unknown_node", str(exc), 404) from exc
        hits = knn(stores.kg_index, vector, k + 1, target_type)
        results = [
            {
                "node_id": hit_id,
                "text": stores.node_texts.get(hit_id, ""),
                "kg_similarity": sim,
            }
            for hit_id, sim in hits
            if hit_id != node_id
        ][:k]
        return _json(
            {
                "snapshot_id": snapshot.snapshot_id,
                "model_kind": snapshot.kind,
                "node_id": node_id,
                "neighbors": results,
            }
        )

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")
    return app


def serve(
    model_bundle_path: str | Path,
    graph_manifest_path: str | Path,
    text_space_path: str | Path,
    host: str = "127.0.0.1",
    port: int = 8230,
    static_dir: str | Path | None = None,
) -> None:
    import uvicorn

    holder = SnapshotHolder(
        load_snapshot(model_bundle_path, graph_manifest_path, text_space_path)
    )
    app = create_app(holder, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
