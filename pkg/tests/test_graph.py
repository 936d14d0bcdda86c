"""Graph assembly, canonical JSON round-trips, and inventory QA."""
from __future__ import annotations

import json

import pytest

from fsgraph.backend import ModelClient, ReplayBackend
from fsgraph.description import NodeDescription
from fsgraph.errors import DanglingEdge, ReplayMiss, SchemaViolation
from fsgraph.graph import (
    FunctionalSceneGraph,
    GraphNode,
    assemble,
    from_json,
    qa_query,
    to_dict,
    to_json,
)
from fsgraph.reasoning import FunctionalEdge
from backends import ScriptedBackend
from synth import make_candidate


def candidates():
    import numpy as np
    door = make_candidate(cand_id="obj-000", kind="object", label="door",
                          points=np.array([[0.0, 0, 0], [1.0, 2, 0.1]]))
    light = make_candidate(cand_id="obj-001", kind="object", label="ceiling light",
                           points=np.array([[2.0, 2, 2], [2.5, 2.5, 2.2]]))
    handle = make_candidate(cand_id="elem-000", kind="element", label="handle",
                            points=np.array([[0.4, 1, 0.0], [0.5, 1.2, 0.05]]))
    switch = make_candidate(cand_id="elem-001", kind="element", label="switch",
                            points=np.array([[3.0, 0, 1], [3.1, 0.1, 1.2]]))
    for cand in (door, light, handle, switch):
        cand.description = NodeDescription(summary=f"a {cand.top_label()}",
                                           per_view_captions=(), views_used=(0,))
    return [door, light, handle, switch]


def edge(elem, obj, kind="local", relation="opens", confidence=1.0):
    return FunctionalEdge(element_id=elem, object_id=obj, kind=kind,
                          relation=relation, confidence=confidence)


class TestAssemble:
    def test_disjoint_union(self):
        g = assemble(candidates(),
                     [edge("elem-000", "obj-000")],
                     [edge("elem-001", "obj-001", kind="remote", relation="turns on",
                           confidence=0.8)],
                     scene_id="s")
        assert len(g.edges) == 2
        kinds = {e.element_id: e.kind for e in g.edges}
        assert kinds == {"elem-000": "local", "elem-001": "remote"}

    def test_duplicate_pair_keeps_local(self):
        g = assemble(candidates(),
                     [edge("elem-000", "obj-000", kind="local")],
                     [edge("elem-000", "obj-000", kind="remote", confidence=0.4)],
                     scene_id="s")
        assert len(g.edges) == 1
        assert g.edges[0].kind == "local"

    def test_dangling_edge_rejected(self):
        with pytest.raises(DanglingEdge):
            assemble(candidates(), [edge("elem-999", "obj-000")], [], scene_id="s")

    def test_isolated_nodes_retained(self):
        g = assemble(candidates(), [], [], scene_id="s")
        assert len(g.objects) == 2 and len(g.elements) == 2
        assert g.edges == ()

    def test_element_as_target_rejected(self):
        bad = edge("elem-000", "elem-001")
        with pytest.raises(DanglingEdge):
            assemble(candidates(), [bad], [], scene_id="s")


class TestJsonRoundTrip:
    def _graph(self):
        return assemble(candidates(),
                        [edge("elem-000", "obj-000")],
                        [edge("elem-001", "obj-001", kind="remote", confidence=0.8,
                              relation="turns on")],
                        scene_id="scene-a", provenance={"config_digest": "abc"})

    def test_byte_roundtrip(self):
        text = to_json(self._graph())
        assert to_json(from_json(text)) == text

    def test_two_assemblies_identical_bytes(self):
        assert to_json(self._graph()) == to_json(self._graph())

    def test_empty_edges_key_present(self):
        g = assemble(candidates(), [], [], scene_id="s")
        doc = json.loads(to_json(g))
        assert doc["edges"] == []

    def test_centroid_position(self):
        import numpy as np
        cand = make_candidate(cand_id="obj-000", kind="object", label="cube",
                              points=np.array([[0.0, 0, 0], [2.0, 2, 2]]))
        g = assemble([cand], [], [], scene_id="s")
        doc = to_dict(g)
        assert doc["nodes"][0]["position"] == [1.0, 1.0, 1.0]

    def test_schema_violation_on_bad_doc(self):
        with pytest.raises(SchemaViolation):
            from_json(json.dumps({"scene_id": "s", "nodes": "oops", "edges": []}))
        with pytest.raises(SchemaViolation):
            from_json("not json at all {")

    def test_dangling_edge_in_doc_rejected(self):
        doc = to_dict(self._graph())
        doc["edges"].append({"source": "elem-404", "target": "obj-000",
                             "kind": "local", "relation": "r", "confidence": 1.0,
                             "evidence": []})
        with pytest.raises(SchemaViolation):
            from_json(json.dumps(doc))

    def test_node_conservation(self):
        g = self._graph()
        assert len(g.elements) >= len({e.element_id for e in g.edges})


class TestGoldenFile:
    def test_committed_golden_roundtrips_byte_for_byte(self):
        from pathlib import Path
        golden = (Path(__file__).parent / "fixtures" / "golden" / "golden"
                  / "graph.json").read_text()
        assert to_json(from_json(golden)) == golden


class TestQaQuery:
    def test_fixture_reply_verbatim(self):
        reply = ("the light switch plate with id 0 has the highest confidence "
                 "level of 0.8")
        llm = ModelClient(ScriptedBackend(lambda r: reply))
        g = assemble(candidates(), [], [], scene_id="s")
        result = qa_query(g, "How can I turn on the ceiling light?", llm)
        assert result.answer == reply
        assert "How can I turn on the ceiling light?" in result.prompt

    def test_empty_graph_still_answers(self):
        llm = ModelClient(ScriptedBackend(lambda r: "the scene is empty"))
        g = FunctionalSceneGraph(scene_id="s", objects=(), elements=(), edges=())
        assert qa_query(g, "anything?", llm).answer == "the scene is empty"

    def test_replay_miss_propagates(self, tmp_path):
        llm = ModelClient(ReplayBackend(tmp_path))
        g = FunctionalSceneGraph(scene_id="s", objects=(), elements=(), edges=())
        with pytest.raises(ReplayMiss):
            qa_query(g, "anything?", llm)
