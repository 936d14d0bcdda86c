"""Strict JSON replies from chat models, with one reformat retry."""
from __future__ import annotations

import json
import logging
import re

from .backend import ModelClient, ModelRequest
from .errors import UnparsableModelOutput

logger = logging.getLogger(__name__)

_FENCE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)

REFORMAT_HINT = (
    "Your previous reply could not be parsed. Reply only in JSON, with no "
    "surrounding prose or code fences."
)


def extract_json(text: str):
    """Parse the first JSON object/array found in a model reply."""
    candidates = [text.strip()]
    fenced = _FENCE.search(text)
    if fenced:
        candidates.insert(0, fenced.group(1).strip())
    for opener, closer in (("{", "}"), ("[", "]")):
        start = text.find(opener)
        end = text.rfind(closer)
        if start != -1 and end > start:
            candidates.append(text[start:end + 1])
    for cand in candidates:
        try:
            return json.loads(cand)
        except (json.JSONDecodeError, ValueError):
            continue
    raise ValueError(f"no JSON value found in reply: {text[:200]!r}")


def complete_json(client: ModelClient, request: ModelRequest, required_keys: tuple[str, ...] = ()):
    """Run a request expecting a JSON reply; one reformat retry before failing."""
    reply = client.complete(request).text
    for attempt in range(2):
        try:
            value = extract_json(reply)
            if required_keys and not (
                isinstance(value, dict) and all(k in value for k in required_keys)
            ):
                raise ValueError(f"missing keys {required_keys} in {value!r}")
            return value
        except ValueError as exc:
            if attempt == 1:
                raise UnparsableModelOutput(str(exc)) from exc
            logger.warning("unparsable model reply, retrying with reformat hint")
            retry_messages = request.messages + (("user", REFORMAT_HINT),)
            retry = ModelRequest(
                messages=retry_messages,
                images=request.images,
                model_hint=request.model_hint,
                temperature=request.temperature,
                max_tokens=request.max_tokens,
            )
            reply = client.complete(retry).text
    raise UnparsableModelOutput("unreachable")  # pragma: no cover
