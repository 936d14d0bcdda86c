"""Stage-based pipeline driver with content-digest checkpointing.

Stages run in the fixed order detect -> fuse -> describe -> reason ->
graph. Each stage reads the previous stage's artifacts from disk (never
in-memory state), so a single stage can always be rerun in isolation and
two runs from identical inputs produce identical artifact trees.
A stage whose checkpoint digest matches and whose artifacts all exist is
a no-op.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from . import description as description_mod
from . import detection as detection_mod
from . import evaluation as evaluation_mod
from . import graph as graph_mod
from . import reasoning as reasoning_mod
from .backend import HttpBackend, ModelClient, ReplayBackend
from .config import PipelineConfig
from .embeddings import make_embedding_backend
from .errors import ConfigError, FsgraphError, MissingCheckpoint
from .fusion import fuse_scene
from .jsonutil import atomic_write_text, digest_of, read_json, write_json
from .ply import read_ply, write_ply
from .scene import SceneSequence, load_scene
from .serializers import (
    candidate_from_dict,
    candidate_to_dict,
    description_from_dict,
    description_to_dict,
    detection_from_dict,
    detection_to_dict,
    edge_from_dict,
    edge_to_dict,
    proposal_to_dict,
    tagset_to_dict,
)

logger = logging.getLogger(__name__)

STAGES = ("detect", "fuse", "describe", "reason", "graph")

STAGE_ARTIFACTS = {
    "detect": ("detections.json",),
    "fuse": ("candidates.json",),
    "describe": ("descriptions.json",),
    "reason": ("edges_local.json", "proposals_remote.json", "edges.json"),
    "graph": ("graph.json",),
}


def make_model_client(cfg: PipelineConfig, role: str) -> ModelClient:
    block = cfg.backends.get(role)
    if block is None:
        raise ConfigError(f"no backend configured for role {role!r}")
    kind = block.get("kind")
    if kind == "replay":
        backend = ReplayBackend(block["root"])
    elif kind == "http":
        api_key_env = block.get("api_key_env")
        api_key = os.environ.get(api_key_env) if api_key_env else None
        backend = HttpBackend(
            base_url=block["base_url"],
            model_names={role: block.get("model", role)},
            api_key=api_key,
            timeout=float(block.get("timeout", 60.0)),
        )
    else:
        raise ConfigError(f"unknown backend kind {kind!r} for role {role!r}")
    return ModelClient(backend, cache_dir=cfg.cache_dir, max_in_flight=cfg.concurrency)


def make_detector(cfg: PipelineConfig, scene_id: str):
    block = cfg.backends["detector"]
    kind = block.get("kind")
    if kind == "fixture":
        return detection_mod.FixtureDetector(Path(block["root"]) / scene_id)
    if kind == "http":
        return detection_mod.HttpDetector(block["base_url"], scene_id=scene_id,
                                          timeout=float(block.get("timeout", 60.0)))
    raise ConfigError(f"unknown detector kind {kind!r}")


def scene_content_digest(scene_dir: Path) -> str:
    """Digest over every file in the scene directory (path + bytes)."""
    import hashlib
    h = hashlib.sha256()
    for path in sorted(scene_dir.rglob("*")):
        if path.is_file():
            h.update(str(path.relative_to(scene_dir)).encode())
            h.update(path.read_bytes())
    return h.hexdigest()


class _Lock:
    """Exclusive ownership of a scene output directory."""

    def __init__(self, directory: Path):
        self.path = directory / ".lock"

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise FsgraphError(
                f"output directory {self.path.parent} is locked by another run "
                f"(remove {self.path} if that run is dead)")
        with os.fdopen(fd, "w") as f:
            f.write(str(os.getpid()))
        return self

    def __exit__(self, *exc):
        try:
            self.path.unlink()
        except FileNotFoundError:
            pass
        return False


class ScenePipeline:
    """All stages for one scene."""

    def __init__(self, cfg: PipelineConfig, scene_id: str):
        self.cfg = cfg
        self.scene_id = scene_id
        self.scene_dir = cfg.scene_dir(scene_id)
        self.out = cfg.output_dir / scene_id
        self._scene: SceneSequence | None = None
        self._scene_digest: str | None = None

    # --- paths ---

    def artifact(self, name: str) -> Path:
        return self.out / name

    def checkpoint_path(self, stage: str) -> Path:
        return self.out / "checkpoints" / f"{stage}.json"

    # --- inputs ---

    @property
    def scene(self) -> SceneSequence:
        if self._scene is None:
            self._scene = load_scene(self.scene_dir)
        return self._scene

    def scene_digest(self) -> str:
        if self._scene_digest is None:
            self._scene_digest = scene_content_digest(self.scene_dir)
        return self._scene_digest

    # --- checkpointing ---

    def stage_digest(self, stage: str) -> str:
        upstream = None
        idx = STAGES.index(stage)
        if idx > 0:
            prev = STAGES[idx - 1]
            ckpt = self.checkpoint_path(prev)
            if not ckpt.is_file():
                raise MissingCheckpoint(prev)
            upstream = read_json(ckpt)["digest"]
        payload = {
            "stage": stage,
            "config": self.cfg.stage_view(stage),
            "upstream": upstream,
        }
        if stage == "detect":
            payload["scene"] = self.scene_digest()
        return digest_of(payload)

    def _artifacts_present(self, stage: str) -> bool:
        return all(self.artifact(name).is_file() for name in STAGE_ARTIFACTS[stage])

    def needs_run(self, stage: str) -> bool:
        ckpt = self.checkpoint_path(stage)
        if not ckpt.is_file():
            return True
        if read_json(ckpt)["digest"] != self.stage_digest(stage):
            return True
        return not self._artifacts_present(stage)

    def _write_checkpoint(self, stage: str) -> None:
        write_json(self.checkpoint_path(stage), {
            "stage": stage,
            "digest": self.stage_digest(stage),
            "completed_at": datetime.now(timezone.utc).isoformat(),
        })

    # --- stages ---

    def run_stage(self, stage: str) -> bool:
        """Run one stage if needed; returns True when work was done.
        Caller must hold the output-directory lock."""
        if stage not in STAGES:
            raise ConfigError(f"unknown stage {stage!r}")
        idx = STAGES.index(stage)
        for prev in STAGES[:idx]:
            if not self.checkpoint_path(prev).is_file():
                raise MissingCheckpoint(prev)
        if not self.needs_run(stage):
            logger.info("[%s] %s: up to date, skipping", self.scene_id, stage)
            return False
        getattr(self, f"_stage_{stage}")()
        self._write_checkpoint(stage)
        logger.info("[%s] %s: done", self.scene_id, stage)
        return True

    def run(self, target: str) -> None:
        """Run one stage or 'all' in pipeline order, owning the output dir."""
        stages = STAGES if target == "all" else (target,)
        with _Lock(self.out):
            for stage in stages:
                self.run_stage(stage)

    def _stage_detect(self) -> None:
        detector = make_detector(self.cfg, self.scene_id)
        llm = make_model_client(self.cfg, "llm")
        tag_sets = []
        detections = []
        for frame in self.scene.frames:
            ts, dets = detection_mod.detect_frame(frame, detector, llm, self.cfg.detection)
            tag_sets.append(tagset_to_dict(ts))
            detections.extend(detection_to_dict(d) for d in dets)
        write_json(self.artifact("detections.json"), {
            "scene_id": self.scene_id,
            "tag_sets": tag_sets,
            "detections": detections,
        })

    def _stage_fuse(self) -> None:
        doc = read_json(self.artifact("detections.json"))
        detections = [detection_from_dict(d) for d in doc["detections"]]
        embedder = make_embedding_backend(
            self.cfg.backends.get("embeddings", {}), space="label")
        candidates = fuse_scene(detections, self.scene, self.cfg.fusion, embedder)
        cloud_dir = self.artifact("candidates")
        cloud_dir.mkdir(parents=True, exist_ok=True)
        for cand in candidates:
            write_ply(cloud_dir / f"{cand.id}.ply", cand.points)
        write_json(self.artifact("candidates.json"), {
            "scene_id": self.scene_id,
            "candidates": [candidate_to_dict(c) for c in candidates],
        })

    def load_candidates(self, with_descriptions: bool = False):
        doc = read_json(self.artifact("candidates.json"))
        candidates = []
        for entry in doc["candidates"]:
            points = read_ply(self.artifact("candidates") / f"{entry['id']}.ply")
            candidates.append(candidate_from_dict(entry, points))
        if with_descriptions:
            desc_doc = read_json(self.artifact("descriptions.json"))
            by_id = desc_doc["descriptions"]
            for cand in candidates:
                if cand.id in by_id:
                    cand.description = description_from_dict(by_id[cand.id])
        return candidates

    def _stage_describe(self) -> None:
        candidates = self.load_candidates()
        vlm = make_model_client(self.cfg, "vlm")
        llm = make_model_client(self.cfg, "llm")
        descriptions = {}
        for cand in sorted(candidates, key=lambda c: c.id):
            desc = description_mod.describe_candidate(
                cand, self.scene, vlm, llm, self.cfg.description)
            descriptions[cand.id] = description_to_dict(desc)
        write_json(self.artifact("descriptions.json"), {
            "scene_id": self.scene_id,
            "descriptions": descriptions,
        })

    def _stage_reason(self) -> None:
        candidates = self.load_candidates(with_descriptions=True)
        objects = [c for c in candidates if c.kind == "object"]
        elements = [c for c in candidates if c.kind == "element"]
        llm = make_model_client(self.cfg, "llm")
        vlm = make_model_client(self.cfg, "vlm")
        result = reasoning_mod.run_reasoning(
            objects, elements, self.scene, llm, vlm, self.cfg.reasoning)
        write_json(self.artifact("edges_local.json"),
                   {"edges": [edge_to_dict(e) for e in result.local_edges]})
        write_json(self.artifact("proposals_remote.json"),
                   {"proposals": [proposal_to_dict(p) for p in result.remote_proposals]})
        write_json(self.artifact("edges.json"),
                   {"edges": [edge_to_dict(e) for e in result.edges]})

    def _stage_graph(self) -> None:
        candidates = self.load_candidates(with_descriptions=True)
        edges = [edge_from_dict(d) for d in read_json(self.artifact("edges.json"))["edges"]]
        local = [e for e in edges if e.kind == "local"]
        remote = [e for e in edges if e.kind == "remote"]
        provenance = {
            "config_digest": self.cfg.digest(),
            "scene_digest": self.scene_digest(),
            "backends": {
                role: self.cfg.backends.get(role, {}).get("kind", "?")
                for role in ("detector", "vlm", "llm", "embeddings")
            },
        }
        g = graph_mod.assemble(candidates, local, remote, self.scene_id, provenance)
        atomic_write_text(self.artifact("graph.json"), graph_mod.to_json(g))


def run(target: str, cfg: PipelineConfig) -> None:
    """Run a stage (or 'all') for every configured scene."""
    if target != "all" and target not in STAGES:
        raise ConfigError(f"unknown stage {target!r}")
    for scene_id in cfg.scene_ids:
        ScenePipeline(cfg, scene_id).run(target)


def evaluate_workspace(cfg: PipelineConfig, gt_dir: Path | None = None) -> dict:
    """Score every scene with a ground-truth file; split-wide vocabularies."""
    gt_dir = gt_dir or (cfg.output_dir / "gt")
    eval_cfg = cfg.eval
    node_ks = tuple(eval_cfg.get("node_ks", [3, 10]))
    triplet_ks = tuple(eval_cfg.get("triplet_ks", [5, 10]))
    per_scene_vocab = bool(eval_cfg.get("per_scene_vocab", False))
    one_to_one = bool(eval_cfg.get("one_to_one", False))
    emb_labels = make_embedding_backend(cfg.backends.get("embeddings", {}), space="label")
    emb_relations = make_embedding_backend(cfg.backends.get("embeddings", {}), space="relation")

    pairs = []
    for scene_id in cfg.scene_ids:
        gt_path = gt_dir / f"{scene_id}.json"
        graph_path = cfg.output_dir / scene_id / "graph.json"
        if not gt_path.is_file():
            logger.warning("no ground truth for %s at %s, skipped", scene_id, gt_path)
            continue
        if not graph_path.is_file():
            raise MissingCheckpoint("graph")
        gt = evaluation_mod.gt_from_dict(read_json(gt_path))
        pred = graph_mod.from_json(graph_path.read_text())
        pairs.append((scene_id, pred, gt))
    if not pairs:
        raise ConfigError(f"no (prediction, ground truth) pairs found under {gt_dir}")

    label_vocab = None
    relation_vocab = None
    if not per_scene_vocab:
        label_vocab = sorted({lab for _, _, gt in pairs for lab in gt.labels()})
        relation_vocab = sorted({rel for _, _, gt in pairs for rel in gt.relation_texts()})

    reports = {}
    for scene_id, pred, gt in pairs:
        reports[scene_id] = evaluation_mod.evaluate(
            pred, gt, emb_labels, emb_relations,
            node_ks=node_ks, triplet_ks=triplet_ks,
            label_vocab=label_vocab, relation_vocab=relation_vocab,
            one_to_one=one_to_one,
        )
    merged = evaluation_mod.merge_counts(list(reports.values()))
    doc = {
        "scenes": {sid: rep.to_dict() for sid, rep in reports.items()},
        "overall": merged.to_dict(),
    }
    write_json(cfg.output_dir / "report.json", doc)
    return {"reports": reports, "overall": merged}
