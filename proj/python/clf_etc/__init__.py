"""Event-triggered control with control Lyapunov functions."""

import json
from dataclasses import dataclass
from typing import Any

import numpy as np

from . import _core
from ._core import (
    AssumptionViolation,
    ConfigError,
    DimensionError,
    DomainError,
    c_bound,
    model_names,
    zeno_first_event_bound,
)

__all__ = [
    "AssumptionViolation",
    "ConfigError",
    "DimensionError",
    "DomainError",
    "Run",
    "c_bound",
    "default_x0",
    "dwell",
    "model_names",
    "simulate",
    "zeno_first_event_bound",
]


@dataclass(frozen=True)
class Run:
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    V: np.ndarray
    W: np.ndarray
    event_flag: np.ndarray
    event_times: np.ndarray
    event_states: np.ndarray
    event_controls: np.ndarray
    event_reasons: list
    termination: str
    diagnostic: str
    stats: dict
    rate_certificate_ok: bool
    notes: dict


def default_x0(name: str, params: dict | None = None) -> np.ndarray:
    return _core.default_x0(name, params or {})


def simulate(config: dict[str, Any]) -> Run:
    """Run one closed loop from a config dict with the same schema as the JSON files."""
    raw = _core.simulate(json.dumps(config))
    return Run(
        t=raw["t"],
        x=raw["x"],
        u=raw["u"],
        V=raw["V"],
        W=raw["W"],
        event_flag=np.asarray(raw["event_flag"], dtype=bool),
        event_times=raw["event_times"],
        event_states=raw["event_states"],
        event_controls=raw["event_controls"],
        event_reasons=list(raw["event_reasons"]),
        termination=raw["termination"],
        diagnostic=raw["diagnostic"],
        stats=json.loads(raw["stats_json"]),
        rate_certificate_ok=bool(raw["rate_certificate_ok"]),
        notes=json.loads(raw["notes_json"]),
    )


def dwell(config: dict[str, Any], force: bool = False) -> dict:
    """Sampled dwell-time bounds over the sublevel set of the config's x0."""
    return json.loads(_core.dwell(json.dumps(config), force))
