# SPDX-License-Identifier: Apache-2.0
"""Spatial reasoning corpus synthesis and dual-channel attention utilities."""

import json as _json

from ._core import (  # noqa: F401
    ConfigurationError,
    DomainError,
    Error,
    IoError,
    ServiceError,
    __version__,
    admit,
    attn_forward,
    builtin_labels,
    dual_forward,
    grad_check,
    in_band,
    param_overhead,
    parse_rendered,
    proxy_distance,
    random_attention,
    reference_overheads,
    render_depth,
    render_distance,
    trainable_components,
    write_synthetic_manifest,
)
from ._core import synthesize as _synthesize


def synthesize(manifest, config=None):
    """Run the corpus pipeline; returns (records, report) as parsed JSON."""
    lines, report = _synthesize(str(manifest), _json.dumps(config or {}))
    return [_json.loads(line) for line in lines], _json.loads(report)
