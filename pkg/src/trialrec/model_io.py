"""Model bundle directories: header.json, entities.vec, relations.vec, and
(for the per-relation projection kind) projections.bin.

projections.bin layout: 8-byte magic ``TRPROJ01``, then float32 little-endian
row-major matrices, one dim x dim block per relation in relations.vec order.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import vecio
from .kge import KgeModel, KgeError

PROJECTIONS_MAGIC = b"TRPROJ01"


class BundleError(KgeError):
    pass


def save_bundle(model: KgeModel, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    header = {
        "kind": model.kind,
        "dim": model.dim,
        "count_entities": len(model.entity_ids),
        "count_relations": len(model.relation_ids or []),
        "seed": model.seed,
        "config": model.config,
    }
    with open(directory / "header.json", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
    vecio.write_vectors(
        directory / "entities.vec",
        "entities",
        model.entity_ids,
        model.entity_vectors.astype(np.float32),
    )
    if model.relation_vectors is not None:
        vecio.write_vectors(
            directory / "relations.vec",
            "relations",
            model.relation_ids,
            model.relation_vectors.astype(np.float32),
        )
    if model.relation_projections is not None:
        with open(directory / "projections.bin", "wb") as fh:
            fh.write(PROJECTIONS_MAGIC)
            fh.write(
                np.ascontiguousarray(model.relation_projections, dtype="<f4").tobytes()
            )


def load_bundle(directory: str | Path) -> KgeModel:
    directory = Path(directory)
    header_path = directory / "header.json"
    try:
        with open(header_path, encoding="utf-8") as fh:
            header = json.load(fh)
        kind = header["kind"]
        dim = int(header["dim"])
    except FileNotFoundError:
        raise BundleError(f"{header_path}: missing bundle header") from None
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise BundleError(f"{header_path}: malformed bundle header") from exc

    ent_header, entity_ids, entity_matrix = vecio.read_vectors(directory / "entities.vec")
    width = dim * 2 if kind == "complex" else dim
    if ent_header["dim"] != width:
        raise BundleError(
            f"{directory / 'entities.vec'}: dim {ent_header['dim']} does not match "
            f"header dim {dim} for kind {kind}"
        )
    relation_ids = None
    relation_vectors = None
    if (directory / "relations.vec").exists():
        _, relation_ids, rel_matrix = vecio.read_vectors(directory / "relations.vec")
        relation_vectors = rel_matrix.astype(np.float64)
    elif header.get("count_relations"):
        raise BundleError(f"{directory}: header promises relations but relations.vec is missing")

    projections = None
    proj_path = directory / "projections.bin"
    if proj_path.exists():
        raw = proj_path.read_bytes()
        if raw[: len(PROJECTIONS_MAGIC)] != PROJECTIONS_MAGIC:
            raise BundleError(f"{proj_path}: bad magic")
        body = np.frombuffer(raw[len(PROJECTIONS_MAGIC):], dtype="<f4")
        n_rel = len(relation_ids or [])
        if body.size != n_rel * dim * dim:
            raise BundleError(
                f"{proj_path}: expected {n_rel}x{dim}x{dim} floats, got {body.size}"
            )
        projections = body.reshape(n_rel, dim, dim).astype(np.float64)
    elif kind == "transr":
        raise BundleError(f"{directory}: projection kind requires projections.bin")

    return KgeModel(
        kind=kind,
        dim=dim,
        entity_ids=entity_ids,
        entity_vectors=entity_matrix.astype(np.float64),
        relation_ids=relation_ids,
        relation_vectors=relation_vectors,
        relation_projections=projections,
        seed=int(header.get("seed", 0)),
        config=header.get("config", {}),
    )
