"""Detection: tag normalization, prompt composition, grounding filters."""
from __future__ import annotations

import json

import numpy as np
import pytest

from fsgraph.backend import ModelClient
from fsgraph.detection import (
    Detection2D,
    DetectionConfig,
    FixtureDetector,
    TagSet,
    compose_prompt,
    detect,
    generate_element_prompts,
    normalize_tags,
    prompt_digest,
    tag_frame,
)
from fsgraph.errors import FixtureMiss, UnparsableModelOutput
from fsgraph.jsonutil import write_json
from fsgraph.rle import decode_mask, encode_mask
from backends import ScriptedBackend
from synth import make_camera, make_frame, rect_mask


@pytest.fixture()
def frame():
    return make_frame(0, make_camera(width=64, height=48), depth=1.0)


def fixture_detector(tmp_path, frame_index: int, prompt: str, detections: list) -> FixtureDetector:
    path = tmp_path / "detections" / str(frame_index) / f"{prompt_digest(prompt)}.json"
    write_json(path, {"prompt": prompt, "detections": detections})
    return FixtureDetector(tmp_path)


def det_entry(label: str, box, mask: np.ndarray, score: float = 0.9) -> dict:
    return {"label": label, "box": list(box), "mask_rle": encode_mask(mask), "score": score}


class TestNormalization:
    def test_duplicates_and_case_collapse(self):
        assert normalize_tags(["Door", "door ", "  DOOR"]) == ["door"]

    def test_internal_whitespace_collapsed(self):
        assert normalize_tags(["light\t switch"]) == ["light switch"]

    def test_empty_stays_empty(self):
        assert normalize_tags([]) == []


class TestTagFrame:
    def test_fixture_echo(self, tmp_path, frame):
        write_json(tmp_path / "tags" / "0.json", {"tags": ["cabinet", "door", "wall"]})
        assert tag_frame(frame, FixtureDetector(tmp_path)) == ["cabinet", "door", "wall"]

    def test_normalizes(self, tmp_path, frame):
        write_json(tmp_path / "tags" / "0.json", {"tags": ["Door", "door "]})
        assert tag_frame(frame, FixtureDetector(tmp_path)) == ["door"]

    def test_missing_fixture(self, tmp_path, frame):
        with pytest.raises(FixtureMiss):
            tag_frame(frame, FixtureDetector(tmp_path))


def element_llm(mapping: dict) -> ModelClient:
    def script(request):
        text = request.messages[-1][1]
        for tag, reply in mapping.items():
            if f'"{tag}"' in text:
                return json.dumps(reply)
        return json.dumps({"interactable": False, "elements": []})
    return ModelClient(ScriptedBackend(script))


class TestGenerateElementPrompts:
    def test_interactable_filtering(self):
        llm = element_llm({
            "door": {"interactable": True, "elements": ["handle", "knob"]},
            "wall": {"interactable": False},
        })
        ts = generate_element_prompts(["door", "wall"], llm)
        assert ts.valid_tags == ("door",)
        assert ts.element_prompt_pairs == (("door", "handle"), ("door", "knob"))

    def test_empty_input(self):
        ts = generate_element_prompts([], element_llm({}))
        assert ts.object_tags == ()
        assert ts.element_prompt_pairs == ()

    def test_single_tag_trace(self):
        llm = element_llm({"cabinet": {"interactable": True, "elements": ["knob"]}})
        ts = generate_element_prompts(["cabinet"], llm)
        assert ts.element_prompt_pairs == (("cabinet", "knob"),)

    def test_unparsable_after_retry_raises(self):
        llm = ModelClient(ScriptedBackend(lambda r: "certainly! here is my thinking..."))
        with pytest.raises(UnparsableModelOutput):
            generate_element_prompts(["door"], llm)

    def test_reformat_retry_recovers(self):
        calls = []

        def script(request):
            calls.append(request)
            if len(calls) == 1:
                return "Sure - {\"interactable\": true, broken"
            return json.dumps({"interactable": True, "elements": ["handle"]})

        ts = generate_element_prompts(["door"], ModelClient(ScriptedBackend(script)))
        assert ts.element_prompt_pairs == (("door", "handle"),)
        assert len(calls) == 2


class TestComposePrompt:
    def test_paper_form(self):
        assert compose_prompt(("door", "handle")) == "door. handle"

    def test_other_tags(self):
        assert compose_prompt(("cabinet", "knob")) == "cabinet. knob"

    def test_multiword(self):
        assert compose_prompt(("tv", "remote control")) == "tv. remote control"

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            compose_prompt(("", "handle"))


class TestDetect:
    def test_element_prompt_keeps_only_element_tag(self, tmp_path, frame):
        h, w = 48, 64
        detector = fixture_detector(tmp_path, 0, "door. handle", [
            det_entry("door", (5, 5, 40, 40), rect_mask(h, w, (5, 5, 40, 40))),
            det_entry("handle", (20, 20, 26, 30), rect_mask(h, w, (20, 20, 26, 30))),
        ])
        out = detect(frame, "door. handle", detector)
        assert len(out) == 1
        assert out[0].kind == "element"
        assert out[0].label == "handle"
        assert out[0].source_prompt == "door. handle"

    def test_object_prompt_passthrough(self, tmp_path, frame):
        detector = fixture_detector(tmp_path, 0, "cabinet", [
            det_entry("cabinet", (2, 2, 30, 30), rect_mask(48, 64, (2, 2, 30, 30))),
        ])
        out = detect(frame, "cabinet", detector)
        assert len(out) == 1
        assert out[0].kind == "object"

    def test_box_clamped_and_mask_intersected(self, tmp_path, frame):
        # box extends past the right edge; mask extends past the box
        detector = fixture_detector(tmp_path, 0, "sofa", [
            det_entry("sofa", (50, 10, 90, 30), rect_mask(48, 64, (40, 5, 64, 40))),
        ])
        out = detect(frame, "sofa", detector)
        assert len(out) == 1
        det = out[0]
        assert det.box == (50.0, 10.0, 64.0, 30.0)
        mask = det.mask()
        ys, xs = np.nonzero(mask)
        assert xs.min() >= 50 and xs.max() < 64
        assert ys.min() >= 10 and ys.max() < 30

    def test_score_threshold(self, tmp_path, frame):
        detector = fixture_detector(tmp_path, 0, "chair", [
            det_entry("chair", (2, 2, 10, 10), rect_mask(48, 64, (2, 2, 10, 10)), score=0.1),
        ])
        assert detect(frame, "chair", detector) == []
        assert len(detect(frame, "chair", detector,
                          DetectionConfig(score_threshold=0.05))) == 1

    def test_fixture_miss(self, tmp_path, frame):
        with pytest.raises(FixtureMiss):
            detect(frame, "unknown prompt", FixtureDetector(tmp_path))

    def test_uncomposed_element_prompt_keeps_schema(self, tmp_path, frame):
        # composition disabled: prompt is the bare element tag
        detector = fixture_detector(tmp_path, 0, "handle", [
            det_entry("handle", (20, 20, 26, 30), rect_mask(48, 64, (20, 20, 26, 30))),
        ])
        out = detect(frame, "handle", detector, element_tag="handle")
        assert len(out) == 1
        assert out[0].kind == "element"
        assert out[0].source_prompt == "handle"


class TestInvariants:
    def test_composed_source_prompt_has_one_separator(self):
        prompt = compose_prompt(("kitchen cabinet", "knob"))
        assert prompt.count(". ") == 1

    def test_masks_inside_boxes(self, tmp_path, frame):
        detector = fixture_detector(tmp_path, 0, "any", [
            det_entry("any", (3, 7, 21, 19), rect_mask(48, 64, (0, 0, 48, 40))),
        ])
        for det in detect(frame, "any", detector):
            x0, y0, x1, y1 = det.box.pixel_bounds()
            mask = det.mask()
            outside = mask.copy()
            outside[y0:y1, x0:x1] = False
            assert not outside.any()

    def test_tagset_validates_subset(self):
        with pytest.raises(ValueError):
            TagSet(frame_index=0, object_tags=("door",), valid_tags=("window",),
                   element_prompt_pairs=())

    def test_detection_validates_score(self):
        mask = rect_mask(4, 4, (0, 0, 2, 2))
        with pytest.raises(ValueError):
            Detection2D(frame_index=0, kind="object", label="x",
                        box=None, mask_rle=encode_mask(mask), score=1.5,
                        source_prompt="x")
