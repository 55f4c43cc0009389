"""Procedural image generators and an image-matching evaluation harness."""

from __future__ import annotations

import json
from pathlib import Path

from . import _simgen
from ._simgen import (
    SimgenError,
    cosine_similarity,
    decode_png,
    encode_png,
    generate,
    image_id,
    perceptual_features,
    rank_candidates,
    resolve_params,
    to_gray,
    wilson_interval,
)

__all__ = [
    "SimgenError",
    "assemble_trials",
    "build_gallery",
    "cosine_similarity",
    "decode_png",
    "encode_png",
    "evaluate",
    "families",
    "generate",
    "image_id",
    "perceptual_features",
    "rank_candidates",
    "resolve_params",
    "to_gray",
    "wilson_interval",
]

# Library errors read "<Code>: <message>"; expose the code on the exception.
SimgenError.code = property(lambda self: str(self).split(":", 1)[0])


def families() -> list[dict]:
    """Registered families with their parameter schemas."""
    return _simgen.family_table()


def build_gallery(out_dir, per_family=2, seed=0, width=128, height=128, families=(), threads=0) -> dict:
    """Render a gallery into out_dir and return its manifest."""
    text = _simgen.build_gallery(Path(out_dir), per_family, seed, width, height, list(families), threads)
    return json.loads(text)


def assemble_trials(manifest: dict, n: int, mode="color", seed=0, decoys="other") -> tuple[dict, dict]:
    """Return (blinded trials, truths) for a manifest."""
    trials, truths = _simgen.assemble_trials(json.dumps(manifest), n, mode, seed, decoys)
    return json.loads(trials), json.loads(truths)


def evaluate(trials: dict, truths: dict, manifest: dict | None = None, base_dir=".", matcher="perceptual",
             mode="", seed=0) -> dict:
    """Run a matcher over trials and score it against the truths."""
    text = _simgen.evaluate(json.dumps(trials), json.dumps(truths), json.dumps(manifest) if manifest else "",
                            Path(base_dir), matcher, mode, seed)
    return json.loads(text)
