#!/usr/bin/env python3
"""Regenerate src/bounds.generated.ts from the gateway's parameter schema.

The server's request models and this file both read the same bounds table,
so the UI's input limits and the server's 422 responses cannot drift apart.
Run via ``npm run generate:bounds`` after changing the server-side table.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

from casegpt.config import RetrievalConfig
from casegpt.server import KNOB_BOUNDS

OUT_PATH = Path(__file__).resolve().parent.parent / "src" / "bounds.generated.ts"


def ts_literal(value: object) -> str:
    """Render a value as a TypeScript literal (JSON is a subset)."""
    return json.dumps(value, indent=2, sort_keys=True)


def main() -> int:
    defaults = RetrievalConfig()
    knob_defaults = {
        "k": defaults.k,
        "n": defaults.n,
        "mmr_lambda": defaults.mmr_lambda,
        "w_similarity": defaults.w_similarity,
        "w_recency": defaults.w_recency,
        "w_citation": defaults.w_citation,
        "w_jurisdiction": defaults.w_jurisdiction,
    }
    lines = [
        "// Generated by scripts/generate_bounds.py — do not edit by hand.",
        "// Source of truth: the gateway's parameter bounds table; the same",
        "// values drive server-side 422 validation.",
        "",
        f"export const KNOB_BOUNDS = {ts_literal(KNOB_BOUNDS)} as const;",
        "",
        f"export const KNOB_DEFAULTS = {ts_literal(knob_defaults)} as const;",
        "",
        "export type BoundName = keyof typeof KNOB_BOUNDS;",
        "export type KnobName = keyof typeof KNOB_DEFAULTS;",
        "",
    ]
    OUT_PATH.write_text("\n".join(lines), encoding="utf-8")
    print(f"wrote {OUT_PATH}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
