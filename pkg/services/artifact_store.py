"""Run outputs: BOF1 field files, metric streams and the run manifest."""
import csv
import hashlib
import os
import tempfile
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
import orjson
from pydantic import BaseModel, Field as PydanticField

from config.settings import ERRORS, VERSION
from core.spectral_ops import Field, Grid
from utils.logger import get_logger

HEADER_SIZE = 32
MAGIC = "BOF1"
FIELD_DTYPE = np.dtype("<f8")
JSON_OPTIONS = orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_NON_STR_KEYS


def serialize_field(field: Field) -> bytes:
    """32-byte ASCII header 'BOF1 <n> <L>' padded with spaces, then n little-endian doubles"""
    header = f"{MAGIC} {field.grid.n} {field.grid.length!r}".encode("ascii")
    if len(header) > HEADER_SIZE:
        raise ValueError(ERRORS["bad_header"].format(header))
    return header.ljust(HEADER_SIZE, b" ") + field.values.astype(FIELD_DTYPE).tobytes()


def deserialize_field(payload: bytes) -> Field:
    header = payload[:HEADER_SIZE]
    try:
        magic, n, length = header.decode("ascii").split()
        n, length = int(n), float(length)
    except (UnicodeDecodeError, ValueError):
        raise ValueError(ERRORS["bad_header"].format(header))
    if magic != MAGIC:
        raise ValueError(ERRORS["bad_header"].format(header))
    body = payload[HEADER_SIZE:]
    if len(body) != n * FIELD_DTYPE.itemsize:
        raise ValueError(f"Field body holds {len(body)} bytes, expected {n * FIELD_DTYPE.itemsize}")
    return Field(Grid(n, length), np.frombuffer(body, dtype=FIELD_DTYPE))


def _json_default(value: Any):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Cannot serialize {type(value).__name__}")


def dumps(value: Any, indent: bool = False) -> bytes:
    options = JSON_OPTIONS | (orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS if indent else 0)
    return orjson.dumps(value, option=options, default=_json_default)


class RunManifest(BaseModel):
    """Written once, atomically, when a run ends"""

    experiment: str
    config: Dict[str, Any]
    version: str = VERSION
    started: str
    finished: Optional[str] = None
    outcome: str = "running"
    error: Optional[str] = None
    files: Dict[str, str] = PydanticField(default_factory=dict)
    summary: Dict[str, Any] = PydanticField(default_factory=dict)


class ArtifactStore:
    """Owns one run directory; nothing outside out_dir is touched."""

    METRICS_JSONL = "metrics.jsonl"
    METRICS_CSV = "metrics.csv"
    MANIFEST = "manifest.json"

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.fields_dir = self.out_dir / "fields"
        self.fields_dir.mkdir(parents=True, exist_ok=True)
        self.logger = get_logger(__name__)

    def _atomic_write(self, path: Path, payload: bytes):
        handle, temp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
        try:
            with os.fdopen(handle, "wb") as stream:
                stream.write(payload)
            os.replace(temp_name, path)
        except Exception as e:
            self.logger.error(f"Failed writing {path}: {str(e)}")
            if os.path.exists(temp_name):
                os.remove(temp_name)
            raise

    def store_field(self, name: str, field: Field) -> Path:
        path = self.fields_dir / f"{name}.bof"
        self._atomic_write(path, serialize_field(field))
        return path

    def load_field(self, name: str) -> Field:
        return deserialize_field((self.fields_dir / f"{name}.bof").read_bytes())

    def emit_metrics(self, series: Iterable[Any]) -> int:
        """Append every sample as {"t", "label", "value"} to metrics.jsonl and metrics.csv"""
        records: List[Dict[str, Any]] = []
        labels = set()
        for entry in series:
            if entry.label in labels:
                raise ValueError(f"Duplicate monitor label in one emit: {entry.label}")
            labels.add(entry.label)
            records.extend(entry.records())

        jsonl_path = self.out_dir / self.METRICS_JSONL
        csv_path = self.out_dir / self.METRICS_CSV
        write_header = not csv_path.exists()
        with open(jsonl_path, "ab") as stream:
            for record in records:
                stream.write(dumps(record) + b"\n")
        with open(csv_path, "a", newline="") as stream:
            writer = csv.writer(stream)
            if write_header:
                writer.writerow(["t", "label", "value"])
            for record in records:
                writer.writerow([repr(record["t"]), record["label"], repr(record["value"])])
        self.logger.debug(f"Emitted {len(records)} metric records to {jsonl_path}")
        return len(records)

    def emit_records(self, name: str, records: Sequence[Dict[str, Any]]) -> Path:
        """Monitor reports as JSON lines {t or (t1, t2), lhs, rhs, margin, params}"""
        path = self.out_dir / f"{name}.jsonl"
        payload = b"".join(dumps(record) + b"\n" for record in records)
        self._atomic_write(path, payload)
        return path

    def write_text(self, name: str, text: str) -> Path:
        path = self.out_dir / name
        self._atomic_write(path, text.encode("utf-8"))
        return path

    def inventory(self) -> Dict[str, str]:
        """relative path -> sha256 for every file except the manifest"""
        files = {}
        for path in sorted(self.out_dir.rglob("*")):
            if not path.is_file() or path.name == self.MANIFEST or path.name.startswith("."):
                continue
            digest = hashlib.sha256(path.read_bytes()).hexdigest()
            files[path.relative_to(self.out_dir).as_posix()] = digest
        return files

    def write_manifest(self, manifest: RunManifest) -> Path:
        path = self.out_dir / self.MANIFEST
        self._atomic_write(path, dumps(manifest.model_dump(mode="json"), indent=True))
        self.logger.info(f"Manifest written to {path} (outcome={manifest.outcome})")
        return path

    def read_manifest(self) -> RunManifest:
        return RunManifest.model_validate(orjson.loads((self.out_dir / self.MANIFEST).read_bytes()))


def now_iso() -> str:
    return datetime.now().isoformat()
