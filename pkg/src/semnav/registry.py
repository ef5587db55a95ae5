"""On-disk workspace registry.

Layout per workspace: ``root/{id}/image.ppm, palette.json, labels.pgm,
semantic.pgm, models/*.json, jobs.log``. All writes are atomic
(temp file + rename) and every byte is a deterministic function of the
request history and seeds: job records carry no timestamps, so replaying a
request log onto a fresh root reproduces the registry byte for byte.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import WorkspaceError
from .fewshot import FewshotHead
from .frugal import SegModel
from .irl import RewardWeights
from .rasters import (
    ImageRaster,
    LabelPalette,
    SemanticRaster,
    SparseLabelRaster,
    load_image,
    load_semantic,
    load_sparse_labels,
    save_image,
    save_semantic,
    save_sparse_labels,
)


@dataclass
class JobRecord:
    id: str
    kind: str  # train-seg | fewshot | train-irl
    status: str = "queued"  # queued | running | done | failed
    progress: float = 0.0
    result: str | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "status": self.status,
            "progress": self.progress,
            "result": self.result,
            "error": self.error,
        }


@dataclass
class Workspace:
    id: str
    image: ImageRaster
    palette: LabelPalette
    labels: SparseLabelRaster | None = None
    semantic: SemanticRaster | None = None
    seg_model: SegModel | None = None
    heads: dict[str, FewshotHead] = field(default_factory=dict)
    profiles: dict[str, RewardWeights] = field(default_factory=dict)
    jobs: list[JobRecord] = field(default_factory=list)
    model_version: int = 0
    load_errors: list[str] = field(default_factory=list)


def _write_atomic(path: Path, data: bytes) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


class Registry:
    """Workspace store rooted at a directory."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.workspaces: dict[str, Workspace] = {}
        for entry in sorted(self.root.iterdir()):
            if entry.is_dir() and (entry / "image.ppm").exists():
                self.workspaces[entry.name] = self._load(entry)

    def new_workspace_id(self) -> str:
        index = 1
        while f"ws-{index:04d}" in self.workspaces:
            index += 1
        return f"ws-{index:04d}"

    def get(self, workspace_id: str) -> Workspace:
        try:
            return self.workspaces[workspace_id]
        except KeyError:
            raise WorkspaceError(f"unknown workspace {workspace_id!r}") from None

    def create(self, image: ImageRaster, palette: LabelPalette) -> Workspace:
        workspace = Workspace(id=self.new_workspace_id(), image=image, palette=palette)
        self.workspaces[workspace.id] = workspace
        directory = self.root / workspace.id
        (directory / "models").mkdir(parents=True, exist_ok=True)
        _write_atomic(directory / "image.ppm", save_image(image))
        _write_atomic(directory / "palette.json", palette.to_json().encode())
        _write_atomic(directory / "jobs.log", b"")
        return workspace

    # ------------------------------------------------------------------
    # persistence of individual pieces
    # ------------------------------------------------------------------

    def dir_of(self, workspace: Workspace) -> Path:
        return self.root / workspace.id

    def save_labels(self, workspace: Workspace) -> None:
        _write_atomic(
            self.dir_of(workspace) / "labels.pgm", save_sparse_labels(workspace.labels)
        )

    def save_semantic(self, workspace: Workspace) -> None:
        _write_atomic(
            self.dir_of(workspace) / "semantic.pgm", save_semantic(workspace.semantic)
        )

    def save_palette(self, workspace: Workspace) -> None:
        _write_atomic(
            self.dir_of(workspace) / "palette.json", workspace.palette.to_json().encode()
        )

    def save_model(self, workspace: Workspace, name: str, payload: str) -> None:
        _write_atomic(
            self.dir_of(workspace) / "models" / f"{name}.json", payload.encode()
        )

    def append_job(self, workspace: Workspace, record: JobRecord) -> None:
        workspace.jobs.append(record)
        self.flush_jobs(workspace)

    def flush_jobs(self, workspace: Workspace) -> None:
        lines = "".join(
            json.dumps(job.to_dict(), sort_keys=True) + "\n" for job in workspace.jobs
        )
        _write_atomic(self.dir_of(workspace) / "jobs.log", lines.encode())

    # ------------------------------------------------------------------
    # loading
    # ------------------------------------------------------------------

    def _load(self, directory: Path) -> Workspace:
        palette = LabelPalette.from_json((directory / "palette.json").read_text())
        workspace = Workspace(
            id=directory.name,
            image=load_image((directory / "image.ppm").read_bytes()),
            palette=palette,
        )
        labels_path = directory / "labels.pgm"
        if labels_path.exists():
            workspace.labels = load_sparse_labels(labels_path.read_bytes(), palette)
        semantic_path = directory / "semantic.pgm"
        if semantic_path.exists():
            workspace.semantic = load_semantic(semantic_path.read_bytes(), palette)
        models_dir = directory / "models"
        if models_dir.exists():
            for model_path in sorted(models_dir.glob("*.json")):
                self._load_model(workspace, model_path)
        jobs_path = directory / "jobs.log"
        if jobs_path.exists():
            for line in jobs_path.read_text().splitlines():
                if line.strip():
                    doc = json.loads(line)
                    workspace.jobs.append(JobRecord(**doc))
        workspace.model_version = (
            int(workspace.seg_model is not None)
            + len(workspace.heads)
            + len(workspace.profiles)
        )
        return workspace

    def _load_model(self, workspace: Workspace, path: Path) -> None:
        # A corrupted model must not take the workspace down: record the
        # failure (naming the file) and keep the rest usable.
        try:
            text = path.read_text()
            name = path.stem
            if name == "seg":
                workspace.seg_model = SegModel.from_json(text)
            elif name.startswith("fewshot_"):
                workspace.heads[name[len("fewshot_") :]] = FewshotHead.from_json(text)
            elif name.startswith("irl_"):
                workspace.profiles[name[len("irl_") :]] = RewardWeights.from_json(text)
            else:
                workspace.load_errors.append(f"unrecognized model file name {path.name!r}")
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            workspace.load_errors.append(f"corrupted model file {path.name}: {exc}")
