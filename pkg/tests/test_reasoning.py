"""Edge inference: overlap gating, local argmax, remote confidence flow."""
from __future__ import annotations

import json

import numpy as np
import pytest

from fsgraph.backend import ModelClient
from fsgraph.description import NodeDescription
from fsgraph.errors import UnparsableModelOutput
from fsgraph.reasoning import (
    FunctionalEdge,
    ReasoningConfig,
    RemoteProposal,
    assess_feasibility,
    infer_edges_direct,
    infer_local_edges,
    propose_remote_targets,
    run_reasoning,
    score_remote_edges,
    select_remote_edges,
    spatial_overlap,
)
from fsgraph.scene import SceneSequence
from backends import CountingBackend, ScriptedBackend, last_user_text
from scenarios import random_scenario
from synth import make_camera, make_candidate, make_frame


def described(cand, text):
    cand.description = NodeDescription(summary=text, per_view_captions=(), views_used=(0,))
    return cand


def box_candidate(cand_id, kind, label, lo, hi, n_points=20):
    rng = np.random.default_rng(abs(hash(cand_id)) % 2**32)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    pts = np.vstack([lo, hi, rng.uniform(lo, hi, size=(n_points - 2, 3))])
    return described(make_candidate(cand_id=cand_id, kind=kind, label=label, points=pts),
                     f"a {label}")


class TestSpatialOverlap:
    def test_containment(self):
        obj = box_candidate("obj-000", "object", "door", [0, 0, 0], [1, 2, 0.1])
        elem = box_candidate("elem-000", "element", "handle", [0.4, 0.9, 0.0], [0.5, 1.1, 0.05])
        assert spatial_overlap(obj, elem, margin=0.05) == 1.0

    def test_disjoint(self):
        obj = box_candidate("obj-000", "object", "door", [0, 0, 0], [1, 1, 1])
        elem = box_candidate("elem-000", "element", "button", [2.5, 0, 0], [2.6, 0.1, 0.1])
        assert spatial_overlap(obj, elem, margin=0.05) == 0.0

    def test_half_inside(self):
        obj = box_candidate("obj-000", "object", "door", [0, 0, 0], [1, 1, 1])
        pts = np.array([[0.5, 0.5, 0.5]] * 5 + [[3.0, 3.0, 3.0]] * 5)
        elem = described(make_candidate(cand_id="elem-000", kind="element",
                                        label="knob", points=pts), "a knob")
        assert spatial_overlap(obj, elem, margin=0.0) == 0.5


def local_llm(reply_map):
    def script(request):
        text = last_user_text(request)
        for needle, reply in reply_map.items():
            if needle in text:
                return json.dumps(reply)
        return json.dumps({"feasible": False, "relation": ""})
    return CountingBackend(ScriptedBackend(script))


class TestInferLocalEdges:
    def test_handle_inside_door_becomes_edge(self):
        door = box_candidate("obj-000", "object", "door", [0, 0, 0], [1, 2, 0.1])
        handle = box_candidate("elem-000", "element", "handle",
                               [0.4, 0.9, 0.0], [0.5, 1.1, 0.05])
        backend = local_llm({"door": {"feasible": True, "relation": "opens"}})
        edges, assigned = infer_local_edges([door], [handle], ModelClient(backend),
                                            ReasoningConfig())
        assert edges == [FunctionalEdge(element_id="elem-000", object_id="obj-000",
                                        kind="local", relation="opens", confidence=1.0)]
        assert assigned == {"elem-000"}

    def test_no_overlap_means_no_llm_call(self):
        door = box_candidate("obj-000", "object", "door", [0, 0, 0], [1, 1, 1])
        button = box_candidate("elem-000", "element", "button", [5, 5, 5], [5.1, 5.1, 5.1])
        backend = local_llm({})
        edges, assigned = infer_local_edges([door], [button], ModelClient(backend),
                                            ReasoningConfig())
        assert edges == [] and assigned == set()
        assert backend.calls == 0

    def test_element_keeps_highest_overlap_object(self):
        # knob points along x: 9/10 fall inside cabinet a, 6/10 inside cabinet b
        pts = np.array([[0.05 + 0.1 * i, 0.5, 0.5] for i in range(10)])
        knob = described(make_candidate(cand_id="elem-000", kind="element",
                                        label="knob", points=pts), "a knob")
        cab_a = box_candidate("obj-000", "object", "cabinet", [0, 0, 0], [0.9, 1, 1])
        cab_b = box_candidate("obj-001", "object", "cabinet", [0, 0, 0], [0.55, 1, 1])
        assert spatial_overlap(cab_a, knob, 0.0) == pytest.approx(0.9)
        assert spatial_overlap(cab_b, knob, 0.0) == pytest.approx(0.6)
        backend = local_llm({"cabinet": {"feasible": True, "relation": "opens"}})
        cfg = ReasoningConfig(local_overlap_threshold=0.5, local_margin=0.0)
        edges, _ = infer_local_edges([cab_a, cab_b], [knob], ModelClient(backend), cfg)
        assert len(edges) == 1
        assert edges[0].object_id == "obj-000"
        assert backend.calls == 2  # both overlapping pairs were reasoned about


class TestProposeRemoteTargets:
    def _objects(self):
        return [
            box_candidate("obj-000", "object", "ceiling light", [0, 0, 2], [1, 1, 2.2]),
            box_candidate("obj-001", "object", "table lamp", [2, 2, 0], [2.3, 2.3, 0.5]),
            box_candidate("obj-002", "object", "sofa", [4, 4, 0], [6, 5, 1]),
        ]

    def test_fixture_reply_two_pairs(self):
        switch = box_candidate("elem-000", "element", "light switch", [3, 0, 1], [3.1, 0.1, 1.2])
        backend = ScriptedBackend(
            lambda r: json.dumps({"targets": ["obj-000", "obj-001"]}))
        pairs = propose_remote_targets([switch], self._objects(), ModelClient(backend))
        assert pairs == [("elem-000", "obj-000"), ("elem-000", "obj-001")]

    def test_empty_reply_no_pairs(self):
        switch = box_candidate("elem-000", "element", "switch", [3, 0, 1], [3.1, 0.1, 1.2])
        backend = ScriptedBackend(lambda r: json.dumps({"targets": []}))
        assert propose_remote_targets([switch], self._objects(), ModelClient(backend)) == []

    def test_unknown_id_dropped(self):
        switch = box_candidate("elem-000", "element", "switch", [3, 0, 1], [3.1, 0.1, 1.2])
        backend = ScriptedBackend(
            lambda r: json.dumps({"targets": ["obj-999", "obj-002"]}))
        pairs = propose_remote_targets([switch], self._objects(), ModelClient(backend))
        assert pairs == [("elem-000", "obj-002")]


class TestAssessFeasibility:
    def _scene(self):
        return SceneSequence(scene_id="s", frames=(make_frame(0, make_camera()),))

    def test_text_stored_verbatim(self):
        outlet = box_candidate("elem-000", "element", "outlet", [0, 0, 0], [0.1, 0.1, 0.1])
        kettle = box_candidate("obj-000", "object", "kettle", [0.2, 0, 0], [0.5, 0.3, 0.3])
        backend = ScriptedBackend(lambda r: "the outlet is connected with the kettle")
        text = assess_feasibility(outlet, kettle, self._scene(), ModelClient(backend),
                                  ReasoningConfig())
        assert text == "the outlet is connected with the kettle"

    def test_negative_text_stored_without_judgment(self):
        outlet = box_candidate("elem-000", "element", "outlet", [0, 0, 0], [0.1, 0.1, 0.1])
        tv = box_candidate("obj-000", "object", "television", [3, 3, 0], [4, 4, 1])
        backend = ScriptedBackend(
            lambda r: "the television is not connected to the power outlet")
        text = assess_feasibility(outlet, tv, self._scene(), ModelClient(backend),
                                  ReasoningConfig())
        assert "not connected" in text

    def test_request_carries_two_images(self):
        outlet = box_candidate("elem-000", "element", "outlet", [0, 0, 0], [0.1, 0.1, 0.1])
        kettle = box_candidate("obj-000", "object", "kettle", [0.2, 0, 0], [0.5, 0.3, 0.3])
        backend = ScriptedBackend(lambda r: "ok")
        assess_feasibility(outlet, kettle, self._scene(), ModelClient(backend),
                           ReasoningConfig())
        assert len(backend.requests[0].images) == 2


class TestScoreRemoteEdges:
    def _elements(self):
        switch = box_candidate("elem-000", "element", "switch", [0, 0, 0], [0.1, 0.1, 0.1])
        return {"elem-000": switch}

    def test_paper_confidences(self):
        backend = ScriptedBackend(lambda r: json.dumps({"pairs": [
            {"object_id": "obj-000", "confidence": 0.8, "relation": "turns on"},
            {"object_id": "obj-001", "confidence": 0.3, "relation": "controls"},
        ]}))
        proposals = score_remote_edges(
            {"elem-000": [("obj-000", "text a"), ("obj-001", "text b")]},
            self._elements(), ModelClient(backend))
        assert [(p.object_id, p.confidence) for p in proposals] == \
               [("obj-000", 0.8), ("obj-001", 0.3)]
        assert proposals[0].feasibility_text == "text a"

    def test_singleton_confidence_one(self):
        backend = ScriptedBackend(lambda r: json.dumps({"pairs": [
            {"object_id": "obj-000", "confidence": 1.0, "relation": "controls"},
        ]}))
        proposals = score_remote_edges({"elem-000": [("obj-000", "t")]},
                                       self._elements(), ModelClient(backend))
        assert proposals[0].confidence == 1.0

    def test_out_of_range_clamped(self, caplog):
        backend = ScriptedBackend(lambda r: json.dumps({"pairs": [
            {"object_id": "obj-000", "confidence": 1.4, "relation": "controls"},
        ]}))
        with caplog.at_level("WARNING"):
            proposals = score_remote_edges({"elem-000": [("obj-000", "t")]},
                                           self._elements(), ModelClient(backend))
        assert proposals[0].confidence == 1.0
        assert any("clamping" in r.message for r in caplog.records)


def proposal(elem, obj, conf):
    return RemoteProposal(element_id=elem, object_id=obj,
                          feasibility_text=f"{elem}->{obj}", confidence=conf,
                          relation="controls")


class TestSelectRemoteEdges:
    def test_best_keeps_argmax(self):
        edges = select_remote_edges(
            [proposal("e", "light", 0.8), proposal("e", "lamp", 0.3)], mode="best")
        assert len(edges) == 1
        assert edges[0].object_id == "light"
        assert edges[0].confidence == 0.8
        assert edges[0].kind == "remote"

    def test_all_keeps_every_proposal(self):
        edges = select_remote_edges(
            [proposal("e", "light", 0.8), proposal("e", "lamp", 0.3)], mode="all")
        assert [(e.object_id, e.confidence) for e in edges] == \
               [("lamp", 0.3), ("light", 0.8)]  # sorted by object id

    def test_tie_goes_to_smaller_object_id(self):
        edges = select_remote_edges(
            [proposal("e", "lamp-b", 0.5), proposal("e", "lamp-a", 0.5)], mode="best")
        assert edges[0].object_id == "lamp-a"

    def test_argmax_invariant_under_positive_scaling(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            confs = rng.uniform(0.01, 0.5, size=4)
            props = [proposal("e", f"obj-{i}", float(c)) for i, c in enumerate(confs)]
            base = select_remote_edges(props, mode="best")[0].object_id
            c = float(rng.uniform(0.1, 2.0))
            scaled = [proposal("e", f"obj-{i}", min(float(v * c), 1.0))
                      for i, v in enumerate(confs)]
            if len({min(float(v * c), 1.0) for v in confs}) == len(confs):
                assert select_remote_edges(scaled, mode="best")[0].object_id == base


class TestDirectMode:
    def test_single_call_same_schema(self):
        objects, elements, scene, llm, vlm = random_scenario(1)
        cfg = ReasoningConfig(sequential=False)
        result = run_reasoning(objects, elements, scene, llm, vlm, cfg)
        for edge in result.edges:
            assert edge.kind in ("local", "remote")
            assert 0.0 <= edge.confidence <= 1.0
        assert result.remote_proposals == ()

    def test_invalid_entries_dropped(self):
        objects, elements, scene, _, _ = random_scenario(2)
        backend = ScriptedBackend(lambda r: json.dumps({"edges": [
            {"element_id": "elem-000", "object_id": "obj-000", "kind": "local",
             "relation": "opens", "confidence": 1.0},
            {"element_id": "ghost", "object_id": "obj-000", "kind": "local",
             "relation": "x", "confidence": 1.0},
            {"element_id": "elem-001", "object_id": "obj-001", "kind": "sideways",
             "relation": "x", "confidence": 1.0},
        ]}))
        edges = infer_edges_direct(objects, elements, ModelClient(backend),
                                   ReasoningConfig(sequential=False))
        assert len(edges) == 1
        assert edges[0].element_id == "elem-000"


class TestInvariantsRandomized:
    @pytest.mark.parametrize("seed", range(20))
    def test_structural_invariants(self, seed):
        objects, elements, scene, llm, vlm = random_scenario(seed)
        result = run_reasoning(objects, elements, scene, llm, vlm, ReasoningConfig())
        object_ids = {o.id for o in objects}
        element_ids = {e.id for e in elements}
        sources = [e.element_id for e in result.edges]
        # best mode: at most one edge per element
        assert len(sources) == len(set(sources))
        for edge in result.edges:
            assert edge.element_id in element_ids
            assert edge.object_id in object_ids
        # locally assigned elements never appear in remote proposals
        local_ids = {e.element_id for e in result.local_edges}
        for prop in result.remote_proposals:
            assert prop.element_id not in local_ids


class TestUnparsable:
    def test_local_unparsable_raises_after_retry(self):
        door = box_candidate("obj-000", "object", "door", [0, 0, 0], [1, 2, 0.1])
        handle = box_candidate("elem-000", "element", "handle",
                               [0.4, 0.9, 0.0], [0.5, 1.1, 0.05])
        backend = ScriptedBackend(lambda r: "I think it is feasible!")
        with pytest.raises(UnparsableModelOutput):
            infer_local_edges([door], [handle], ModelClient(backend), ReasoningConfig())
