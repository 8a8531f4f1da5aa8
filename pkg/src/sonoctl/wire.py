"""Wire message schemas for the session service.

One JSON object per message, tagged by "type". Every inbound message is
validated against its schema before it reaches the engine; outbound
messages follow the same registry so clients can validate symmetrically.
"""

from __future__ import annotations

import jsonschema

from .errors import ProtocolViolation

PROTOCOL_VERSION = 1

_number = {"type": ["number", "null"]}

CLIENT_SCHEMAS = {
    "hello": {
        "type": "object",
        "properties": {
            "type": {"const": "hello"},
            "client": {"type": "string"},
            "protocol_version": {"type": "integer"},
        },
        "required": ["type", "protocol_version"],
        "additionalProperties": False,
    },
    "configure_session": {
        "type": "object",
        "properties": {
            "type": {"const": "configure_session"},
            "config": {"type": "object"},
            "clock": {"enum": ["lockstep", "realtime"]},
        },
        "required": ["type", "config"],
        "additionalProperties": False,
    },
    "start_training": {
        "type": "object",
        "properties": {"type": {"const": "start_training"}},
        "required": ["type"],
        "additionalProperties": False,
    },
    "select_motion": {
        "type": "object",
        "properties": {
            "type": {"const": "select_motion"},
            "motion": {"type": "string"},
        },
        "required": ["type", "motion"],
        "additionalProperties": False,
    },
    "start_calibration": {
        "type": "object",
        "properties": {"type": {"const": "start_calibration"}},
        "required": ["type"],
        "additionalProperties": False,
    },
    "start_task": {
        "type": "object",
        "properties": {"type": {"const": "start_task"}},
        "required": ["type"],
        "additionalProperties": False,
    },
    "finish_study": {
        "type": "object",
        "properties": {"type": {"const": "finish_study"}},
        "required": ["type"],
        "additionalProperties": False,
    },
    "activation_input": {
        "type": "object",
        "properties": {
            "type": {"const": "activation_input"},
            "a": {"type": "number", "minimum": 0.0, "maximum": 1.0},
            "motion": {"type": "string"},
        },
        "required": ["type", "a"],
        "additionalProperties": False,
    },
    "abort": {
        "type": "object",
        "properties": {"type": {"const": "abort"}},
        "required": ["type"],
        "additionalProperties": False,
    },
}

SERVER_SCHEMAS = {
    "session_state": {
        "type": "object",
        "properties": {"type": {"const": "session_state"}, "state": {"type": "string"}},
        "required": ["type", "state"],
    },
    "tick": {
        "type": "object",
        "properties": {
            "type": {"const": "tick"},
            "t": {"type": "integer"},
            "time": {"type": "number"},
            "phase": {"type": "string"},
            "a": _number, "activity": _number, "c": _number,
            "l": _number, "u": _number, "p": _number,
            "motion": {"type": ["string", "null"]},
            "rep": {"type": ["integer", "null"]},
            "target": _number, "band_q": _number,
            "trial": {"type": ["integer", "null"]},
            "time_remaining": _number,
            "stalled": {"type": "boolean"},
        },
        "required": ["type", "t", "time", "phase"],
    },
    "trial_result": {
        "type": "object",
        "properties": {
            "type": {"const": "trial_result"},
            "trial": {"type": "integer"},
            "target": {"type": "number"},
            "acquired": {"type": "boolean"},
            "movement_time": _number,
            "position_error": _number,
            "stability_error": _number,
        },
        "required": ["type", "trial", "target", "acquired"],
    },
    "calibration": {
        "type": "object",
        "properties": {
            "type": {"const": "calibration"},
            "lower": {"type": "number"}, "upper": {"type": "number"},
        },
        "required": ["type", "lower", "upper"],
    },
    "training_session": {
        "type": "object",
        "properties": {
            "type": {"const": "training_session"},
            "motion": {"type": "string"}, "entries": {"type": "integer"},
        },
        "required": ["type", "motion"],
    },
    "session_metrics": {
        "type": "object",
        "properties": {
            "type": {"const": "session_metrics"},
            "motion": {"type": "string"},
            "metrics": {"type": "object"},
            "fitts": {"type": ["object", "null"]},
        },
        "required": ["type", "metrics"],
    },
    "study_summary": {
        "type": "object",
        "properties": {
            "type": {"const": "study_summary"},
            "completion_rate": {"type": "number"},
            "fitts": {"type": ["object", "null"]},
        },
        "required": ["type", "completion_rate"],
    },
    "error": {
        "type": "object",
        "properties": {
            "type": {"const": "error"},
            "error": {"type": "string"}, "message": {"type": "string"},
        },
        "required": ["type", "error"],
    },
    "heartbeat": {
        "type": "object",
        "properties": {"type": {"const": "heartbeat"}, "seq": {"type": "integer"}},
        "required": ["type"],
    },
}

_client_validators = {k: jsonschema.Draft7Validator(v) for k, v in CLIENT_SCHEMAS.items()}
_server_validators = {k: jsonschema.Draft7Validator(v) for k, v in SERVER_SCHEMAS.items()}


def validate_client(msg) -> dict:
    """Validate an inbound client message; raises ProtocolViolation."""
    if not isinstance(msg, dict) or "type" not in msg:
        raise ProtocolViolation("message must be an object with a 'type' field")
    mtype = msg["type"]
    validator = _client_validators.get(mtype)
    if validator is None:
        raise ProtocolViolation(f"unknown message type {mtype!r}")
    errors = sorted(validator.iter_errors(msg), key=str)
    if errors:
        raise ProtocolViolation(f"invalid {mtype} message: {errors[0].message}")
    return msg


def validate_server(msg) -> dict:
    """Validate an outbound server message (used by tests and clients)."""
    if not isinstance(msg, dict) or "type" not in msg:
        raise ProtocolViolation("message must be an object with a 'type' field")
    mtype = msg["type"]
    validator = _server_validators.get(mtype)
    if validator is None:
        raise ProtocolViolation(f"unknown server message type {mtype!r}")
    errors = sorted(validator.iter_errors(msg), key=str)
    if errors:
        raise ProtocolViolation(f"invalid {mtype} message: {errors[0].message}")
    return msg
