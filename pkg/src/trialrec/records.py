"""Trial record model, JSON/JSONL parsing, and the inclusion filters applied
before a record may enter the knowledge graph."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Iterable, Iterator

from .kg import _NCT_ID_RE


class ParseError(Exception):
    """Malformed payload or a missing required field."""


STUDY_TYPES = ("interventional", "observational", "other")

# Eligibility text often arrives as one block; split it into one criterion
# per bullet/line so each becomes its own graph node.
_BULLET_CHARS = "-*•‣◦⁃∙"


def split_criteria_block(block: str) -> list[str]:
    out = []
    for line in block.splitlines():
        line = line.strip().lstrip(_BULLET_CHARS).strip()
        if line:
            out.append(line)
    return out


def _criteria_list(value) -> list[str]:
    if value is None:
        return []
    if isinstance(value, str):
        return split_criteria_block(value)
    return [str(v).strip() for v in value if str(v).strip()]


@dataclass
class Intervention:
    name: str
    concept_id: str | None = None
    targets: list[str] = field(default_factory=list)
    moas: list[str] = field(default_factory=list)


@dataclass
class Condition:
    name: str
    concept_id: str | None = None


@dataclass
class TrialRecord:
    nct_id: str
    brief_title: str
    study_type: str = "other"
    intervention_types: set[str] = field(default_factory=set)
    phase: str = ""
    overall_status: str = ""
    gender: str = ""
    age_groups: list[str] = field(default_factory=list)
    countries: list[str] = field(default_factory=list)
    conditions: list[Condition] = field(default_factory=list)
    interventions: list[Intervention] = field(default_factory=list)
    inclusion_criteria: list[str] = field(default_factory=list)
    exclusion_criteria: list[str] = field(default_factory=list)
    primary_endpoints: list[str] = field(default_factory=list)
    secondary_endpoints: list[str] = field(default_factory=list)
    other_endpoints: list[str] = field(default_factory=list)
    disease_area: str = ""

    def to_json(self) -> str:
        payload = asdict(self)
        payload["intervention_types"] = sorted(self.intervention_types)
        return json.dumps(payload, sort_keys=True, ensure_ascii=False)


def record_from_dict(data: dict) -> TrialRecord:
    for required in ("nct_id", "brief_title"):
        value = data.get(required)
        if not isinstance(value, str) or not value.strip():
            raise ParseError(f"missing or empty required field: {required}")
    nct_id = data["nct_id"].strip()
    if not _NCT_ID_RE.match(nct_id):
        raise ParseError(f"malformed nct_id: {nct_id!r}")
    study_type = str(data.get("study_type", "other")).strip().lower()
    if study_type not in STUDY_TYPES:
        study_type = "other"
    conditions = [
        Condition(name=str(c.get("name", "")), concept_id=c.get("concept_id") or None)
        for c in data.get("conditions", [])
        if str(c.get("name", "")).strip()
    ]
    interventions = [
        Intervention(
            name=str(i.get("name", "")),
            concept_id=i.get("concept_id") or None,
            targets=[str(t) for t in i.get("targets", []) if str(t).strip()],
            moas=[str(m) for m in i.get("moas", []) if str(m).strip()],
        )
        for i in data.get("interventions", [])
        if str(i.get("name", "")).strip()
    ]
    return TrialRecord(
        nct_id=nct_id,
        brief_title=data["brief_title"].strip(),
        study_type=study_type,
        intervention_types={str(t) for t in data.get("intervention_types", [])},
        phase=str(data.get("phase", "") or ""),
        overall_status=str(data.get("overall_status", "") or ""),
        gender=str(data.get("gender", "") or ""),
        age_groups=[str(a) for a in data.get("age_groups", []) if str(a).strip()],
        countries=[str(c) for c in data.get("countries", []) if str(c).strip()],
        conditions=conditions,
        interventions=interventions,
        inclusion_criteria=_criteria_list(data.get("inclusion_criteria")),
        exclusion_criteria=_criteria_list(data.get("exclusion_criteria")),
        primary_endpoints=_criteria_list(data.get("primary_endpoints")),
        secondary_endpoints=_criteria_list(data.get("secondary_endpoints")),
        other_endpoints=_criteria_list(data.get("other_endpoints")),
        disease_area=str(data.get("disease_area", "") or ""),
    )


def parse_trial_record(payload: bytes | str) -> TrialRecord:
    """Parse one JSON trial record. Unknown fields are ignored; all list
    fields default to empty."""
    if isinstance(payload, bytes):
        payload = payload.decode("utf-8")
    try:
        data = json.loads(payload)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON at byte offset {exc.pos}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ParseError("record payload must be a JSON object")
    return record_from_dict(data)


def passes_filters(record: TrialRecord) -> bool:
    """True iff the record is an interventional drug trial."""
    if record.study_type != "interventional":
        return False
    return any(t.lower() == "drug" for t in record.intervention_types)


def read_jsonl(path: str | Path) -> Iterator[TrialRecord]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield parse_trial_record(line)
            except ParseError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc


def write_jsonl(records: Iterable[TrialRecord], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(record.to_json() + "\n")
            n += 1
    return n
