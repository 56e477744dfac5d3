import json
import os
from dataclasses import dataclass
from typing import Optional

from .errors import DataError, ValidationError
from .geo import GeoCoordinate
from ..dataset.records import Candidate, RoutingRecord

SCHEMA_NAME = "georouting"
SCHEMA_VERSION = 1

KNOWN_FIELDS = ("id", "gt", "pred_ret", "pred_gen", "candidates", "embedding")


@dataclass
class RawEntry:
    """One line of an input file: the decoded object, or why it could not be decoded."""

    line: int
    data: Optional[dict] = None
    error: Optional[str] = None


def candidate_from_wire(value, index):
    """Candidates are stored as ``{"gps": [lat, lon], "similarity": s}`` or a bare pair."""
    field = f"candidates[{index}]"
    if isinstance(value, dict):
        if "gps" not in value:
            raise ValidationError(field, "missing 'gps'")
        coordinate = GeoCoordinate.from_pair(value["gps"], f"{field}.gps")
        return Candidate(coordinate, value.get("similarity"))
    return Candidate(GeoCoordinate.from_pair(value, field))


def candidate_to_wire(candidate):
    wire = {"gps": candidate.coordinate.to_pair()}
    if candidate.similarity is not None:
        wire["similarity"] = candidate.similarity
    return wire


def record_from_dict(data):
    """Parse a wire dictionary into a RoutingRecord, raising ValidationError on bad fields."""
    if not isinstance(data, dict):
        raise ValidationError("record", "expected a JSON object")
    if "id" not in data:
        raise ValidationError("id", "missing")
    record_id = data["id"]
    if isinstance(record_id, int) and not isinstance(record_id, bool):
        record_id = str(record_id)

    raw_candidates = data.get("candidates") or []
    if not isinstance(raw_candidates, list):
        raise ValidationError("candidates", "expected a list")
    candidates = tuple(candidate_from_wire(c, i) for i, c in enumerate(raw_candidates))

    # The top-1 candidate is the retrieval prediction when none is given
    if data.get("pred_ret") is None:
        if not candidates:
            raise ValidationError("pred_ret", "missing")
        pred_ret = candidates[0].coordinate
    else:
        pred_ret = GeoCoordinate.from_pair(data["pred_ret"], "pred_ret")

    if data.get("pred_gen") is None:
        raise ValidationError("pred_gen", "missing")
    pred_gen = GeoCoordinate.from_pair(data["pred_gen"], "pred_gen")

    gt = None
    if data.get("gt") is not None:
        gt = GeoCoordinate.from_pair(data["gt"], "gt")

    embedding = data.get("embedding")
    if embedding is not None:
        if not isinstance(embedding, list) or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in embedding
        ):
            raise ValidationError("embedding", "expected a list of numbers")

    extras = {k: v for k, v in data.items() if k not in KNOWN_FIELDS}
    return RoutingRecord(
        id=record_id,
        pred_retrieval=pred_ret,
        pred_generation=pred_gen,
        ground_truth=gt,
        candidates=candidates,
        embedding=embedding,
        extras=extras,
    )


def record_to_dict(record, target=None):
    """Wire form of a record; the derived target fields are appended when given."""
    data = {"id": record.id}
    if record.ground_truth is not None:
        data["gt"] = record.ground_truth.to_pair()
    data["pred_ret"] = record.pred_retrieval.to_pair()
    data["pred_gen"] = record.pred_generation.to_pair()
    data["candidates"] = [candidate_to_wire(c) for c in record.candidates]
    if record.embedding is not None:
        data["embedding"] = list(record.embedding)
    data.update(record.extras)
    if target is not None:
        data.update(target.to_dict())
    return data


def make_header(records):
    return {
        "schema": SCHEMA_NAME,
        "version": SCHEMA_VERSION,
        "embedding_dim": _embedding_dim(records),
        "count": len(records),
    }


def _embedding_dim(records, path=None):
    """Common embedding length of the records, None when no record carries one."""
    dim = None
    for i, record in enumerate(records):
        if record.embedding is None:
            continue
        if dim is None:
            dim = len(record.embedding)
        elif len(record.embedding) != dim:
            raise DataError(
                f"embedding dimension mismatch: record {record.id!r} has "
                f"{len(record.embedding)}, expected {dim}",
                path=path,
            )
    return dim


def check_header(header, path=None, line=1):
    """Validate a dataset header line."""
    if header.get("schema") != SCHEMA_NAME:
        raise DataError(f"unknown schema {header.get('schema')!r}", path=path, line=line)
    if header.get("version") != SCHEMA_VERSION:
        raise DataError(
            f"unsupported schema version {header.get('version')!r} "
            f"(expected {SCHEMA_VERSION})",
            path=path,
            line=line,
        )
    return header


def _decode_line(raw):
    """Decode one UTF-8 JSON line, returning ``(data, error)``."""
    try:
        return json.loads(raw.decode("utf-8")), None
    except UnicodeDecodeError as e:
        return None, f"invalid UTF-8 at byte {e.start}"
    except json.JSONDecodeError as e:
        return None, f"malformed JSON: {e.msg}"


def _decoded_lines(file_path):
    """Yield ``(line_no, data, error, is_first)`` for every non-blank line."""
    if not os.path.exists(file_path):
        raise DataError("file not found", path=file_path)
    is_first = True
    with open(file_path, "rb") as f:
        for line_no, raw in enumerate(f, 1):
            if not raw.strip():
                continue
            data, error = _decode_line(raw)
            yield line_no, data, error, is_first
            is_first = False


def _is_header(data, is_first):
    # Only the first non-blank line can be a header; later "schema" keys are record fields
    return is_first and isinstance(data, dict) and "schema" in data


def iter_raw_entries(file_path, strict=True):
    """
    Yield the decoded lines of a JSONL file.

    Blank lines and the dataset header are skipped. With ``strict`` an
    undecodable line raises DataError citing its line number; otherwise it is
    yielded as a RawEntry carrying the error so callers can count and report it.
    """
    for line_no, data, error, is_first in _decoded_lines(file_path):
        if error is not None:
            if strict:
                raise DataError(error, path=file_path, line=line_no)
            yield RawEntry(line_no, error=error)
        elif _is_header(data, is_first):
            check_header(data, file_path, line_no)
        else:
            yield RawEntry(line_no, data=data)


def read_header(file_path):
    """The validated header of a dataset file, or None when it has none."""
    for line_no, data, error, is_first in _decoded_lines(file_path):
        if error is None and _is_header(data, is_first):
            return check_header(data, file_path, line_no)
        return None
    return None


def read_jsonl(file_path):
    """Read a dataset file into a list of RoutingRecord objects."""
    header = read_header(file_path)
    declared_dim = header.get("embedding_dim") if header else None

    records = []
    for entry in iter_raw_entries(file_path, strict=True):
        try:
            records.append(record_from_dict(entry.data))
        except ValidationError as e:
            raise DataError(f"invalid record: {e}", path=file_path, line=entry.line)

    dim = _embedding_dim(records, file_path)
    if declared_dim is not None and dim is not None and dim != declared_dim:
        raise DataError(
            f"embedding dimension mismatch: header declares {declared_dim}, records have {dim}",
            path=file_path,
        )
    return records


def write_jsonl(file_path, records, targets=None):
    """Write a header line then one record per line."""
    records = list(records)
    if targets is not None and len(targets) != len(records):
        raise ValidationError("targets", "must match the number of records")
    header = make_header(records)

    # Ensure the directory exists
    os.makedirs(os.path.dirname(file_path) or ".", exist_ok=True)

    with open(file_path, "w", encoding="utf-8") as f:
        f.write(json.dumps(header) + "\n")
        for i, record in enumerate(records):
            target = targets[i] if targets is not None else None
            f.write(json.dumps(record_to_dict(record, target)) + "\n")


def write_lines(file_path, rows):
    """Write plain JSON objects one per line, without a dataset header."""
    os.makedirs(os.path.dirname(file_path) or ".", exist_ok=True)
    with open(file_path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row) + "\n")
