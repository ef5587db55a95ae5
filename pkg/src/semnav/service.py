"""HTTP service tying the pipeline together for the responder scenario.

Endpoints (JSON bodies except raster payloads, which are raw PGM/PPM):

    POST /workspaces                      multipart: image file + palette JSON
    POST /workspaces/{id}/labels          octet-stream sparse-label PGM
    POST /workspaces/{id}/jobs/train-seg  frugal config JSON -> job id
    POST /workspaces/{id}/classes         multipart: class name + K support pairs
    POST /workspaces/{id}/jobs/train-irl  demos + profile JSON -> job id
    POST /workspaces/{id}/routes          route query JSON -> plan + explanation
    GET  /workspaces/{id}/overlay?layer=semantic|cost:{profile}|route:{routeId}
    GET  /jobs/{id}                       job record JSON

Training jobs run one at a time per workspace (409 on overlap); completed
models install by atomic reference swap and bump the workspace model
version, which tags every route response.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .errors import SemnavError
from .fewshot import (
    SupportExample,
    SupportSet,
    segment_query,
    train_head_from_supports,
)
from .frugal import FrugalConfig, FrugalDataset, predict, train
from .irl import (
    IrlConfig,
    RewardWeights,
    cost_map,
    demos_from_json,
    irl_train,
    mdp_from_semantic,
)
from .mlp import SgdConfig
from .planner import RouteQuery, evaluate_path, explain, plan, shortest_distance_path
from .rasters import (
    BinaryMask,
    LabelPalette,
    SemanticRaster,
    load_image,
    load_mask,
    load_sparse_labels,
)
from .registry import JobRecord, Registry, Workspace

PROFILE_BLENDS = {"safe": 1.0, "fast": 0.25}
ROUTE_HIGHLIGHT = (255, 0, 255)
_NEW_CLASS_COLORS = ((0, 0, 255), (255, 0, 255), (255, 128, 0), (0, 255, 255))


def _sgd_config(doc: dict, defaults: SgdConfig | None = None) -> SgdConfig:
    base = defaults or SgdConfig()
    return SgdConfig(
        learning_rate=float(doc.get("learning_rate", base.learning_rate)),
        epochs=int(doc.get("epochs", base.epochs)),
        batch_pixels=int(doc.get("batch_pixels", base.batch_pixels)),
        seed=int(doc.get("seed", base.seed)),
        l2=float(doc.get("l2", base.l2)),
    )


class ServiceState:
    def __init__(self, root: Path):
        self.registry = Registry(root)
        self.lock = threading.Lock()
        self.busy: set[str] = set()  # workspace ids with a running training job
        self.jobs: dict[str, tuple[str, JobRecord]] = {}
        self.routes: dict[str, dict] = {}
        self._job_counter = 0
        self._route_counter = 0
        for workspace in self.registry.workspaces.values():
            for record in workspace.jobs:
                self.jobs[record.id] = (workspace.id, record)
                self._job_counter = max(
                    self._job_counter, int(record.id.split("-")[1])
                )

    def next_job_id(self) -> str:
        self._job_counter += 1
        return f"job-{self._job_counter:04d}"

    def next_route_id(self) -> str:
        self._route_counter += 1
        return f"route-{self._route_counter:04d}"


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"detail": message})


def create_app(root: Path) -> FastAPI:
    app = FastAPI(title="semnav", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    state = ServiceState(Path(root))
    app.state.semnav = state

    @app.exception_handler(SemnavError)
    async def semnav_error_handler(_request, exc: SemnavError):
        return _error(422, str(exc))

    @app.exception_handler(ValueError)
    async def value_error_handler(_request, exc: ValueError):
        return _error(422, str(exc))

    def workspace_or_none(workspace_id: str) -> Workspace | None:
        return state.registry.workspaces.get(workspace_id)

    def submit_job(workspace: Workspace, kind: str, runner) -> JSONResponse:
        with state.lock:
            if workspace.id in state.busy:
                return _error(
                    409, f"a training job is already running for {workspace.id}"
                )
            state.busy.add(workspace.id)
            record = JobRecord(id=state.next_job_id(), kind=kind)
            state.jobs[record.id] = (workspace.id, record)
            state.registry.append_job(workspace, record)

        def run():
            record.status = "running"
            try:
                runner(record)
                record.progress = 1.0
                record.status = "done"
            except Exception as exc:  # surfaced via the job record
                record.error = str(exc)
                record.status = "failed"
            finally:
                state.registry.flush_jobs(workspace)
                with state.lock:
                    state.busy.discard(workspace.id)

        threading.Thread(target=run, daemon=True).start()
        return JSONResponse(status_code=202, content={"job_id": record.id})

    # ------------------------------------------------------------------
    # workspaces
    # ------------------------------------------------------------------

    @app.post("/workspaces")
    async def create_workspace(request: Request):
        form = await request.form()
        if "image" not in form or "palette" not in form:
            return _error(422, "multipart form needs 'image' file and 'palette' JSON")
        image_part = form["image"]
        image_bytes = (
            await image_part.read() if hasattr(image_part, "read") else image_part.encode()
        )
        palette_part = form["palette"]
        palette_text = (
            (await palette_part.read()).decode()
            if hasattr(palette_part, "read")
            else palette_part
        )
        image = load_image(image_bytes)
        palette = LabelPalette.from_json(palette_text)
        workspace = state.registry.create(image, palette)
        return {"id": workspace.id}

    @app.post("/workspaces/{workspace_id}/labels")
    async def upload_labels(workspace_id: str, request: Request):
        workspace = workspace_or_none(workspace_id)
        if workspace is None:
            return _error(404, f"unknown workspace {workspace_id!r}")
        body = await request.body()
        labels = load_sparse_labels(body, workspace.palette)
        if (labels.width, labels.height) != (workspace.image.width, workspace.image.height):
            return _error(422, "label raster dimensions do not match the image")
        workspace.labels = labels
        state.registry.save_labels(workspace)
        return {"stored": True, "labeled_fraction": labels.labeled_fraction}

    # ------------------------------------------------------------------
    # training jobs
    # ------------------------------------------------------------------

    @app.post("/workspaces/{workspace_id}/jobs/train-seg")
    async def train_seg_job(workspace_id: str, request: Request):
        workspace = workspace_or_none(workspace_id)
        if workspace is None:
            return _error(404, f"unknown workspace {workspace_id!r}")
        if workspace.labels is None:
            return _error(422, "upload sparse labels before training segmentation")
        doc = json.loads((await request.body()) or b"{}")
        config = FrugalConfig(
            pixel_fraction=float(doc.get("pixel_fraction", 0.04)),
            sgd=_sgd_config(doc),
            hidden=tuple(doc.get("hidden", (64, 64))),
        )

        def runner(record: JobRecord):
            dataset = FrugalDataset(
                items=[(workspace.image, workspace.labels)], palette=workspace.palette
            )
            record.progress = 0.1
            model, _trace = train(dataset, config)
            record.progress = 0.8
            semantic = predict(model, workspace.image)
            with state.lock:  # atomic install: readers see old or new, never a mix
                workspace.seg_model = model
                workspace.semantic = semantic
                workspace.model_version += 1
            state.registry.save_model(workspace, "seg", model.to_json())
            state.registry.save_semantic(workspace)
            record.result = "seg"

        return submit_job(workspace, "train-seg", runner)

    @app.post("/workspaces/{workspace_id}/classes")
    async def add_class(workspace_id: str, request: Request):
        workspace = workspace_or_none(workspace_id)
        if workspace is None:
            return _error(404, f"unknown workspace {workspace_id!r}")
        if workspace.semantic is None:
            return _error(422, "train segmentation before adding few-shot classes")
        form = await request.form()
        name = form.get("name")
        if not name:
            return _error(422, "multipart form needs a 'name' field")
        if any(cls.name == name for cls in workspace.palette.classes):
            return _error(422, f"class {name!r} already exists in the palette")
        pairs = []
        index = 0
        while f"support_image_{index}" in form:
            mask_key = f"support_mask_{index}"
            if mask_key not in form:
                return _error(422, f"support image {index} has no mask part")
            image_bytes = await form[f"support_image_{index}"].read()
            mask_bytes = await form[mask_key].read()
            pairs.append(
                SupportExample(load_image(image_bytes), load_mask(mask_bytes))
            )
            index += 1
        if not pairs:
            return _error(422, "need at least one support_image_0/support_mask_0 pair")
        color = tuple(json.loads(form["color"])) if "color" in form else (
            _NEW_CLASS_COLORS[(len(workspace.palette) - 1) % len(_NEW_CLASS_COLORS)]
        )
        config = _sgd_config(
            json.loads(form.get("config", "{}")),
            SgdConfig(learning_rate=0.5, epochs=150, batch_pixels=256, seed=2, l2=1e-5),
        )
        supports = SupportSet(tuple(pairs))

        def runner(record: JobRecord):
            head, _trace = train_head_from_supports(supports, config)
            record.progress = 0.7
            mask, _weights = segment_query(head, supports, workspace.image)
            with state.lock:
                new_id = len(workspace.palette)
                workspace.palette = workspace.palette.with_class(name, color)
                merged = np.where(mask.data, new_id, workspace.semantic.data).astype(
                    np.uint8
                )
                workspace.semantic = SemanticRaster(
                    workspace.semantic.width, workspace.semantic.height, merged
                )
                workspace.heads[name] = head
                workspace.model_version += 1
            state.registry.save_model(workspace, f"fewshot_{name}", head.to_json())
            state.registry.save_palette(workspace)
            state.registry.save_semantic(workspace)
            record.result = f"class:{name}"

        return submit_job(workspace, "fewshot", runner)

    @app.post("/workspaces/{workspace_id}/jobs/train-irl")
    async def train_irl_job(workspace_id: str, request: Request):
        workspace = workspace_or_none(workspace_id)
        if workspace is None:
            return _error(404, f"unknown workspace {workspace_id!r}")
        if workspace.semantic is None:
            return _error(422, "train segmentation before learning cost maps")
        doc = json.loads(await request.body())
        profile = doc.get("profile")
        if not profile:
            return _error(422, "body needs a 'profile' name")
        if "demos" not in doc:
            return _error(422, "body needs 'demos' with goal and paths")
        goal, demos = demos_from_json(json.dumps(doc["demos"]))
        config_doc = doc.get("config", {})
        config = IrlConfig(
            learning_rate=float(config_doc.get("learning_rate", 0.02)),
            iterations=int(config_doc.get("iterations", 50)),
            l2=float(config_doc.get("l2", 0.001)),
            seed=int(config_doc.get("seed", 0)),
            horizon=config_doc.get("horizon"),
        )

        def runner(record: JobRecord):
            mdp = mdp_from_semantic(
                workspace.semantic,
                len(workspace.palette),
                goal=goal,
                horizon=config.horizon,
            )
            record.progress = 0.1
            weights, _trace = irl_train(mdp, demos, config)
            weights.feature_names = [cls.name for cls in workspace.palette.classes]
            with state.lock:
                workspace.profiles[profile] = weights
                workspace.model_version += 1
            state.registry.save_model(workspace, f"irl_{profile}", weights.to_json())
            record.result = f"profile:{profile}"

        return submit_job(workspace, "train-irl", runner)

    # ------------------------------------------------------------------
    # routes
    # ------------------------------------------------------------------

    @app.post("/workspaces/{workspace_id}/routes")
    async def query_route(workspace_id: str, request: Request):
        workspace = workspace_or_none(workspace_id)
        if workspace is None:
            return _error(404, f"unknown workspace {workspace_id!r}")
        if workspace.semantic is None:
            return _error(422, "no semantic raster: train segmentation first")
        doc = json.loads(await request.body())
        profile = doc.get("profile", "safe")
        with state.lock:  # consistent snapshot against concurrent installs
            weights = workspace.profiles.get(profile)
            snapshot_semantic = workspace.semantic
            snapshot_palette = workspace.palette
            model_version = workspace.model_version
        if weights is None:
            return _error(
                422,
                f"no trained weights for profile {profile!r}: run train-irl first",
            )
        blend = float(doc.get("blend", PROFILE_BLENDS.get(profile, 1.0)))
        start = tuple(int(v) for v in doc["start"])
        goals = doc.get("goals")
        if goals is None:
            goals = [doc["goal"]]
        goals = [tuple(int(v) for v in goal) for goal in goals]

        semantic = snapshot_semantic
        mdp = mdp_from_semantic(semantic, len(snapshot_palette), goal=goals[0], horizon=1)
        costmap = cost_map(mdp, weights)

        best = None
        for goal in goals:
            if goal == start:
                continue
            candidate = plan(costmap, RouteQuery(start=start, goal=goal, profile=profile, blend=blend))
            if best is None or candidate.total_cost < best.total_cost:
                best = candidate
        if best is None:
            return _error(422, "no valid goal differs from the start cell")

        query = RouteQuery(start=start, goal=best.path[-1], profile=profile, blend=blend)
        alternative_geometry = shortest_distance_path(
            semantic.width, semantic.height, query
        )
        alternative = evaluate_path(costmap, alternative_geometry.path, blend)
        explanation = explain(best, alternative, semantic, snapshot_palette)

        route_id = state.next_route_id()
        payload = best.to_dict()
        payload["explanation"] = explanation.to_dict()
        payload["route_id"] = route_id
        payload["profile"] = profile
        payload["blend"] = blend
        payload["model_version"] = model_version
        state.routes[route_id] = {"workspace": workspace.id, "plan": best, "payload": payload}
        return payload

    # ------------------------------------------------------------------
    # overlays and jobs
    # ------------------------------------------------------------------

    def _ppm(rgb: np.ndarray) -> Response:
        header = b"P6\n%d %d\n255\n" % (rgb.shape[1], rgb.shape[0])
        return Response(
            content=header + rgb.astype(np.uint8).tobytes(),
            media_type="application/octet-stream",
        )

    def _base_render(workspace: Workspace) -> np.ndarray:
        if workspace.semantic is not None:
            colors = np.array(
                [cls.color for cls in workspace.palette.classes], dtype=np.uint8
            )
            return colors[workspace.semantic.data].copy()
        gray = np.floor(workspace.image.data.mean(axis=2) * 255.0 + 0.5)
        return np.repeat(gray[:, :, None], 3, axis=2).astype(np.uint8)

    @app.get("/workspaces/{workspace_id}/overlay")
    async def overlay(workspace_id: str, layer: str = "semantic"):
        workspace = workspace_or_none(workspace_id)
        if workspace is None:
            return _error(404, f"unknown workspace {workspace_id!r}")
        if layer == "semantic":
            if workspace.semantic is None:
                return _error(422, "no semantic raster yet")
            return _ppm(_base_render(workspace))
        if layer.startswith("cost:"):
            profile = layer.split(":", 1)[1]
            weights = workspace.profiles.get(profile)
            if weights is None:
                return _error(404, f"no trained profile {profile!r}")
            if workspace.semantic is None:
                return _error(422, "no semantic raster yet")
            mdp = mdp_from_semantic(
                workspace.semantic, len(workspace.palette), goal=(0, 0), horizon=1
            )
            cost = cost_map(mdp, weights).cost
            finite = np.isfinite(cost)
            low, high = cost[finite].min(), cost[finite].max()
            span = (high - low) if high > low else 1.0
            gray = np.floor(255.0 * (cost - low) / span + 0.5)
            gray[~finite] = 255.0
            rgb = np.repeat(gray[:, :, None], 3, axis=2)
            return _ppm(rgb)
        if layer.startswith("route:"):
            route_id = layer.split(":", 1)[1]
            entry = state.routes.get(route_id)
            if entry is None or entry["workspace"] != workspace.id:
                return _error(404, f"unknown route {route_id!r}")
            rgb = _base_render(workspace)
            for r, c in entry["plan"].path:
                rgb[r, c] = ROUTE_HIGHLIGHT
            return _ppm(rgb)
        return _error(422, f"unknown overlay layer {layer!r}")

    @app.get("/jobs/{job_id}")
    async def job_status(job_id: str):
        entry = state.jobs.get(job_id)
        if entry is None:
            return _error(404, f"unknown job {job_id!r}")
        workspace_id, record = entry
        doc = record.to_dict()
        doc["workspace"] = workspace_id
        return doc

    @app.get("/workspaces/{workspace_id}")
    async def workspace_info(workspace_id: str):
        workspace = workspace_or_none(workspace_id)
        if workspace is None:
            return _error(404, f"unknown workspace {workspace_id!r}")
        return {
            "id": workspace.id,
            "width": workspace.image.width,
            "height": workspace.image.height,
            "palette": json.loads(workspace.palette.to_json()),
            "has_labels": workspace.labels is not None,
            "has_semantic": workspace.semantic is not None,
            "profiles": sorted(workspace.profiles),
            "classes_learned": sorted(workspace.heads),
            "model_version": workspace.model_version,
            "load_errors": workspace.load_errors,
        }

    return app
