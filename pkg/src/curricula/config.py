"""Named configuration keys and their defaults.

Every tunable in the pipeline is addressed by a dotted key so that run
configs and the CLI can override any of them without new plumbing.
"""

from __future__ import annotations

from typing import Any, Mapping

DEFAULTS: dict[str, Any] = {
    # scene
    "scene.next_to_threshold": 0.5,       # footprint gap (m) below which next_to holds
    # placement
    "placement.delta": 0.05,              # incremental step size (m)
    "placement.doorway_min_width": 0.5,   # residual doorway passage must stay above this
    # navigation
    "navigation.resolution": 0.05,        # occupancy cell size (m)
    "navigation.agent_radius": 0.25,      # default agent body radius (m)
    # analysis thresholds
    "analysis.clearance_margin": 0.15,    # margin beyond agent radius considered safe
    "analysis.near_collision_margin": 0.05,
    "analysis.inefficiency_ratio": 1.3,
    "analysis.oscillation_window": 1.0,   # path-length window (m)
    "analysis.oscillation_reversals": 4,
    # generator
    "generator.max_steps": 5,
    "generator.max_revisions_per_step": 2,
    "generator.fallback_units": 5.0,      # grid units moved when no suggestion anchors an edit
    # render
    "render.gradient_start": "#FFD700",
    "render.gradient_end": "#FF8C00",
    "render.scale": 60.0,                 # px per world unit
    # llm client
    "llm.temperature": 0.0,
    "llm.timeout": 30.0,
    "llm.max_inflight": 4,
}


def value(key: str, overrides: Mapping[str, Any] | None = None) -> Any:
    """Resolve a dotted config key against overrides, then defaults."""
    if overrides and key in overrides:
        return overrides[key]
    return DEFAULTS[key]


def merged(overrides: Mapping[str, Any] | None = None) -> dict[str, Any]:
    out = dict(DEFAULTS)
    if overrides:
        unknown = set(overrides) - set(DEFAULTS)
        if unknown:
            raise KeyError(f"unknown config keys: {sorted(unknown)}")
        out.update(overrides)
    return out
