"""Content-addressed filesystem persistence for runs, artifacts and reports.

Layout under the store root:

    runs/<run_id>/manifest.json    canonical run manifest
    artifacts/<sha256-hex>         raw blob, file name is the content hash
    reports/<run_id>/<metric>.json evaluation reports (+ optional .csv)

Manifest writes are atomic (temp file + rename); blob writes are idempotent,
so concurrent writers of the same content are safe.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .errors import CorruptManifest, IntegrityError, NotFound, StoreError
from .runs import ChainRun
from .scene import ImageArtifact, canonical_json_bytes, content_hash

_HASH_RE = re.compile(r"^[0-9a-f]{64}$")


@dataclass(frozen=True)
class RunSummary:
    run_id: str
    status: str
    created_at: str
    original_prompt: str
    step_count: int

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "status": self.status,
            "created_at": self.created_at,
            "original_prompt": self.original_prompt,
            "step_count": self.step_count,
        }


class RunStore:
    def __init__(self, root: os.PathLike | str):
        self.root = Path(root)
        for sub in ("runs", "artifacts", "reports"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)

    # --- blobs ---

    def _blob_path(self, blob_id: str) -> Path:
        if not _HASH_RE.match(blob_id):
            raise NotFound(f"malformed blob id {blob_id!r}")
        return self.root / "artifacts" / blob_id

    def put_blob(self, data: bytes) -> str:
        blob_id = content_hash(data)
        path = self._blob_path(blob_id)
        if path.exists():
            return blob_id
        self._atomic_write(path, data)
        return blob_id

    def has_blob(self, blob_id: str) -> bool:
        return self._blob_path(blob_id).exists()

    def get_blob(self, blob_id: str) -> bytes:
        path = self._blob_path(blob_id)
        if not path.exists():
            raise NotFound(f"no blob {blob_id}")
        data = path.read_bytes()
        if content_hash(data) != blob_id:
            raise CorruptManifest(f"blob {blob_id} does not hash to its id")
        return data

    def put_artifact(self, artifact: ImageArtifact) -> str:
        return self.put_blob(artifact.data)

    def get_artifact(self, run: ChainRun, artifact_id: str) -> ImageArtifact:
        meta = run.artifacts.get(artifact_id)
        if meta is None:
            raise NotFound(f"run {run.run_id} does not reference artifact {artifact_id}")
        data = self.get_blob(artifact_id)
        return ImageArtifact(
            id=artifact_id, media_kind=meta.media_kind, data=data,
            width=meta.width, height=meta.height,
        )

    # --- runs ---

    def _manifest_path(self, run_id: str) -> Path:
        return self.root / "runs" / run_id / "manifest.json"

    def save_run(self, run: ChainRun) -> str:
        for rec in run.steps:
            if rec.artifact_id and not self.has_blob(rec.artifact_id):
                raise IntegrityError(
                    f"manifest references missing blob {rec.artifact_id} (step {rec.index})"
                )
        manifest = canonical_json_bytes(run.to_dict())
        path = self._manifest_path(run.run_id)
        path.parent.mkdir(parents=True, exist_ok=True)
        self._atomic_write(path, manifest)
        return run.run_id

    def load_run(self, run_id: str) -> ChainRun:
        path = self._manifest_path(run_id)
        if not path.exists():
            raise NotFound(f"no run {run_id}")
        try:
            run = ChainRun.from_dict(json.loads(path.read_bytes()))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise CorruptManifest(f"manifest for {run_id} unreadable: {exc}") from exc
        for rec in run.steps:
            if rec.artifact_id:
                self.get_blob(rec.artifact_id)  # verifies hash, raises on tamper
        return run

    def list_runs(self, status: Optional[str] = None) -> list[RunSummary]:
        summaries = []
        for entry in (self.root / "runs").iterdir():
            if not (entry / "manifest.json").exists():
                continue
            try:
                d = json.loads((entry / "manifest.json").read_bytes())
            except (OSError, json.JSONDecodeError) as exc:
                raise StoreError(f"unreadable manifest in {entry}: {exc}") from exc
            if status is not None and d.get("status") != status:
                continue
            summaries.append(
                RunSummary(
                    run_id=d["run_id"],
                    status=d["status"],
                    created_at=d.get("created_at", ""),
                    original_prompt=d["plan"]["original_prompt"],
                    step_count=len(d["plan"]["steps"]),
                )
            )
        summaries.sort(key=lambda s: (s.created_at, s.run_id), reverse=True)
        return summaries

    # --- reports ---

    def save_report(self, run_id: str, metric: str, doc: dict, csv_text: Optional[str] = None) -> None:
        base = self.root / "reports" / run_id
        base.mkdir(parents=True, exist_ok=True)
        self._atomic_write(base / f"{metric}.json", canonical_json_bytes(doc))
        if csv_text is not None:
            self._atomic_write(base / f"{metric}.csv", csv_text.encode("utf-8"))

    def load_report(self, run_id: str, metric: str) -> dict:
        path = self.root / "reports" / run_id / f"{metric}.json"
        if not path.exists():
            raise NotFound(f"no {metric} report for run {run_id}")
        return json.loads(path.read_bytes())

    # --- internals ---

    @staticmethod
    def _atomic_write(path: Path, data: bytes) -> None:
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
        except OSError as exc:
            try:
                os.unlink(tmp)
            except OSError:
                pass
            raise StoreError(f"write to {path} failed: {exc}") from exc
