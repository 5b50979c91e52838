"""Wire protocol: length-prefixed JSON text objects, full duplex.

Each frame on the TCP wire is an ASCII decimal byte count, a newline,
then that many bytes of UTF-8 JSON — trivially readable in a stream dump.
Over the WebSocket endpoint the same JSON objects travel as text messages
(the WS framing carries the length). Unknown top-level fields are ignored
everywhere for forward compatibility; unknown input kinds are rejected
without touching the session. docs/protocol.md is the schema document.
"""

from __future__ import annotations

import asyncio
import json
from dataclasses import dataclass

PROTOCOL_VERSION = 1
MAX_FRAME_BYTES = 1_000_000

INPUT_KINDS = (
    "takeover_on",
    "takeover_off",
    "key",
    "reset",
    "save_model",
    "set_config",
)
SET_CONFIG_KEYS = ("min_match_level", "tick_rate")


class ProtocolError(Exception):
    """Message-level violation; the connection survives, the message dies."""


class FramingError(Exception):
    """Byte-level violation of the length-prefix framing; connection-fatal."""


def encode_frame(obj: dict) -> bytes:
    payload = json.dumps(obj, separators=(",", ":")).encode("utf-8")
    return b"%d\n%s" % (len(payload), payload)


async def read_frame(reader: asyncio.StreamReader) -> dict | None:
    """Read one length-prefixed JSON object; None on clean EOF.

    Raises FramingError on a corrupt length prefix and ProtocolError on a
    valid frame whose payload is not a JSON object.
    """
    try:
        line = await reader.readline()
    except (ConnectionResetError, BrokenPipeError):
        return None
    if not line:
        return None
    text = line.strip()
    if not text.isdigit():
        raise FramingError(f"expected a decimal length prefix, got {line[:32]!r}")
    length = int(text)
    if length > MAX_FRAME_BYTES:
        raise FramingError(f"frame of {length} bytes exceeds cap {MAX_FRAME_BYTES}")
    try:
        payload = await reader.readexactly(length)
    except asyncio.IncompleteReadError as exc:
        raise FramingError("connection closed mid-frame") from exc
    return parse_message(payload)


def parse_message(payload: bytes | str) -> dict:
    try:
        obj = json.loads(payload)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ProtocolError(f"payload is not valid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise ProtocolError("payload must be a JSON object")
    return obj


# --------------------------------------------------------------- client inputs


@dataclass(frozen=True)
class InputCommand:
    """Validated client input; ``tick`` is when the server applies it."""

    kind: str
    tick: int | None
    action: int | None = None
    config: dict | None = None


def validate_input(obj: dict) -> InputCommand:
    kind = obj.get("kind")
    if kind not in INPUT_KINDS:
        raise ProtocolError(f"unknown input kind {kind!r}")
    tick = obj.get("tick")
    if tick is not None and (not isinstance(tick, int) or tick < 0):
        raise ProtocolError("input tick must be a non-negative integer")
    action = None
    config = None
    if kind == "key":
        action = obj.get("action")
        if not isinstance(action, int) or action < 0:
            raise ProtocolError("key input needs a non-negative integer 'action'")
    if kind == "set_config":
        config = obj.get("config")
        if not isinstance(config, dict) or not config:
            raise ProtocolError("set_config needs a non-empty 'config' object")
        for key, value in config.items():
            if key not in SET_CONFIG_KEYS:
                raise ProtocolError(f"set_config key {key!r} not in {SET_CONFIG_KEYS}")
            if key == "min_match_level" and (not isinstance(value, int) or value < 0):
                raise ProtocolError("min_match_level must be a non-negative integer")
            if key == "tick_rate" and (
                not isinstance(value, (int, float)) or value <= 0
            ):
                raise ProtocolError("tick_rate must be a positive number")
    return InputCommand(kind=kind, tick=tick, action=action, config=config)


def validate_join(obj: dict) -> dict:
    """Normalize a join message into session parameters."""
    params = {
        "env": obj.get("env"),
        "seed": obj.get("seed", 0),
        "n": obj.get("n", 3),
        "k": obj.get("k", 4),
        "min_match_level": obj.get("min_match_level", 1),
        "baseline_episodes": obj.get("baseline_episodes", 10),
        "teacher_episodes": obj.get("teacher_episodes", 0),
        "episodes": obj.get("episodes"),
        "tick_rate": obj.get("tick_rate"),
        "max_steps": obj.get("max_steps"),
        "ingest_on_release": obj.get("ingest_on_release", True),
    }
    if not isinstance(params["env"], str) or not params["env"]:
        raise ProtocolError("join needs an 'env' id")
    script = obj.get("script", [])
    if not isinstance(script, list):
        raise ProtocolError("join field 'script' must be a list of inputs")
    params["script"] = [validate_input(entry) for entry in script]
    for key in ("seed", "n", "k", "min_match_level", "baseline_episodes",
                "teacher_episodes"):
        if not isinstance(params[key], int) or params[key] < 0:
            raise ProtocolError(f"join field {key!r} must be a non-negative integer")
    for key in ("episodes", "max_steps"):
        if params[key] is not None and (
            not isinstance(params[key], int) or params[key] < 1
        ):
            raise ProtocolError(f"join field {key!r} must be a positive integer")
    if params["tick_rate"] is not None and (
        not isinstance(params["tick_rate"], (int, float)) or params["tick_rate"] <= 0
    ):
        raise ProtocolError("join field 'tick_rate' must be a positive number")
    if not isinstance(params["ingest_on_release"], bool):
        raise ProtocolError("join field 'ingest_on_release' must be a boolean")
    return params


# --------------------------------------------------------------- server frames


def hello_message(env_spec_json: dict, session_params: dict,
                  render_schema_version: int) -> dict:
    return {
        "type": "hello",
        "protocol": PROTOCOL_VERSION,
        "render_schema": render_schema_version,
        "env": env_spec_json,
        "session": session_params,
    }


def error_message(reason: str) -> dict:
    return {"type": "error", "reason": reason}


def provenance_json(decision) -> dict | None:
    if decision is None:
        return None
    if decision.provenance is None:
        return {"matched": False}
    p = decision.provenance
    return {
        "matched": True,
        "demo_index": p.demo_index,
        "order": p.order,
        "level": p.level,
    }
