"""Spatial tensor-accelerator generator: python surface over the C++ core."""

import json

from ._tessera import (  # noqa: F401
    __version__,
    analyze_json,
    canonical_spec,
    cost_report,
    estimate_performance,
    generate,
    reference_execute,
    simulate,
    validate_spec,
)


def analyze(spec_text: str):
    """Reuse solutions, interconnect adjacency, and banking as a dict."""
    return json.loads(analyze_json(spec_text))
