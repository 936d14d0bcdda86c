"""HTTP API for the annotation UI: scene artifacts out, ground truth in.

Read endpoints serve the pipeline's on-disk artifacts; the single write
endpoint (PUT annotation) validates against the ground-truth schema and
writes atomically, so a rejected annotation never clobbers a good one.
"""
from __future__ import annotations

import logging
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse, Response

from .config import PipelineConfig
from .errors import SchemaViolation
from .evaluation import gt_from_dict, gt_to_dict
from .jsonutil import read_json, write_json

logger = logging.getLogger(__name__)


def make_app(cfg: PipelineConfig, gt_dir: Path | None = None,
             cors_origins: tuple[str, ...] = ("*",)) -> FastAPI:
    app = FastAPI(title="fsgraph annotation API")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(cors_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )
    output_dir = cfg.output_dir
    annotations_dir = gt_dir or (output_dir / "gt")

    def scene_out(scene_id: str) -> Path:
        if scene_id not in cfg.scene_ids:
            raise HTTPException(status_code=404, detail=f"unknown scene {scene_id!r}")
        return output_dir / scene_id

    @app.get("/scenes")
    def list_scenes():
        return cfg.scene_ids

    @app.get("/scenes/{scene_id}/candidates")
    def get_candidates(scene_id: str):
        path = scene_out(scene_id) / "candidates.json"
        if not path.is_file():
            raise HTTPException(status_code=404, detail="candidates not computed yet")
        return JSONResponse(read_json(path))

    @app.get("/scenes/{scene_id}/prediction")
    def get_prediction(scene_id: str):
        path = scene_out(scene_id) / "graph.json"
        if not path.is_file():
            raise HTTPException(status_code=404, detail="prediction not computed yet")
        return JSONResponse(read_json(path))

    @app.get("/scenes/{scene_id}/pointcloud")
    def get_pointcloud(scene_id: str, candidate: str):
        path = scene_out(scene_id) / "candidates" / f"{candidate}.ply"
        if not path.is_file():
            raise HTTPException(status_code=404, detail=f"no point cloud for {candidate!r}")
        return Response(content=path.read_bytes(), media_type="application/octet-stream")

    @app.get("/scenes/{scene_id}/frames/{frame_index}/color")
    def get_frame_color(scene_id: str, frame_index: int):
        scene_out(scene_id)
        color_dir = cfg.scene_dir(scene_id) / "color"
        for suffix in (".png", ".jpg", ".jpeg"):
            path = color_dir / f"{frame_index}{suffix}"
            if path.is_file():
                media = "image/png" if suffix == ".png" else "image/jpeg"
                return FileResponse(path, media_type=media)
        raise HTTPException(status_code=404, detail=f"no color image for frame {frame_index}")

    @app.get("/scenes/{scene_id}/annotation")
    def get_annotation(scene_id: str):
        scene_out(scene_id)
        path = annotations_dir / f"{scene_id}.json"
        if not path.is_file():
            return JSONResponse({"nodes": [], "triplets": []})
        return JSONResponse(read_json(path))

    @app.put("/scenes/{scene_id}/annotation")
    async def put_annotation(scene_id: str, request: Request):
        scene_out(scene_id)
        try:
            doc = await request.json()
        except Exception as exc:
            raise HTTPException(status_code=422, detail=f"not valid JSON: {exc}")
        try:
            gt = gt_from_dict(doc)
        except SchemaViolation as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        write_json(annotations_dir / f"{scene_id}.json", gt_to_dict(gt))
        logger.info("annotation saved for %s (%d nodes, %d triplets)",
                    scene_id, len(gt.nodes), len(gt.triplets))
        return JSONResponse(gt_to_dict(gt))

    return app


def serve(cfg: PipelineConfig, host: str = "127.0.0.1", port: int = 8008,
          gt_dir: Path | None = None) -> None:
    import uvicorn

    uvicorn.run(make_app(cfg, gt_dir=gt_dir), host=host, port=port, log_level="info")
