"""Attention-map aggregation and the coarse alpha estimate.

Cross maps are ``(gh, gw, N)`` with each pixel's row over the N prompt
tokens summing to 1; self maps are ``(gh*gw, gh, gw)`` with each source
pixel's map summing to 1. Aggregation averages over every recorded
(timestep, layer, head); traces may instead carry those means directly
(``preaveraged``) when the per-record tensors would be too large to keep.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .imaging import bilinear_resize
from .prompts import NounSpans

__all__ = [
    "AttentionRecord",
    "AttentionTrace",
    "GlobalMaps",
    "adjust_opacity",
    "aggregate",
    "estimate_alpha",
    "foreground_cross_map",
    "fuse_self_attention",
    "minmax_normalize",
]


@dataclass(frozen=True)
class AttentionRecord:
    """Softmax attention maps of one (layer, head) from one estimator call."""

    layer: int
    head: int
    cross: np.ndarray  # (gh, gw, N)
    self_: np.ndarray  # (gh*gw, gh, gw)


@dataclass
class AttentionTrace:
    """Attention records of the text-conditioned subject branch.

    ``records`` is keyed by (timestep, layer, head). In preaveraged mode the
    per-record tensors are dropped and only their means survive.
    """

    token_strings: list[str]
    token_grid: tuple[int, int]
    sigma_schedule: np.ndarray
    steps_recorded: list[int]
    layers: int
    heads: int
    records: dict[tuple[int, int, int], AttentionRecord] = field(default_factory=dict)
    preaveraged: bool = False
    cross_mean: np.ndarray | None = None
    self_mean: np.ndarray | None = None
    prompt: str = ""
    bg_prompt: str = ""


@dataclass(frozen=True)
class GlobalMaps:
    """Attention maps averaged over timesteps, layers, and heads."""

    cross: np.ndarray  # (gh, gw, N)
    self_: np.ndarray  # (gh*gw, gh, gw)


def minmax_normalize(values: np.ndarray) -> np.ndarray:
    """Affinely map to [0, 1]; a constant map has no signal and becomes zeros."""
    values = np.asarray(values, dtype=np.float64)
    lo = values.min()
    hi = values.max()
    if hi == lo:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def aggregate(trace: AttentionTrace) -> GlobalMaps:
    """Arithmetic mean over all recorded (timestep, layer, head) entries."""
    if trace.preaveraged:
        if trace.cross_mean is None or trace.self_mean is None:
            raise ValueError("preaveraged trace is missing its mean tensors")
        return GlobalMaps(cross=trace.cross_mean, self_=trace.self_mean)
    if not trace.records:
        raise ValueError("cannot aggregate an empty attention trace")
    records = list(trace.records.values())
    cross = np.mean([r.cross for r in records], axis=0)
    self_ = np.mean([r.self_ for r in records], axis=0)
    return GlobalMaps(cross=cross, self_=self_)


def foreground_cross_map(
    maps: GlobalMaps, nouns: NounSpans, out_h: int, out_w: int
) -> np.ndarray:
    """Noun-averaged cross-attention map, upsampled and min-max normalized.

    Token channels inside a multi-token span are averaged first, then the
    per-span maps are averaged across spans.
    """
    if not nouns.spans:
        raise ValueError(
            "no subject-noun spans available; pass an explicit noun override "
            "(--nouns) to select the subject tokens"
        )
    n_tokens = maps.cross.shape[2]
    per_span = []
    for start, end, surface in nouns.spans:
        if not (0 <= start < end <= n_tokens):
            raise ValueError(
                f"noun span {surface!r} [{start}:{end}] outside the {n_tokens}-token trace"
            )
        per_span.append(maps.cross[:, :, start:end].mean(axis=2))
    fg = np.mean(per_span, axis=0)
    return minmax_normalize(bilinear_resize(fg, out_h, out_w))


def fuse_self_attention(maps: GlobalMaps, fg: np.ndarray) -> np.ndarray:
    """Weighted average of per-pixel self maps, weights = foreground map.

    The foreground map is brought back to the token grid for weighting, the
    weighted mean over source pixels is computed there, then the result is
    upsampled to the foreground map's resolution and min-max normalized.
    """
    n_src, gh, gw = maps.self_.shape
    if n_src != gh * gw:
        raise ValueError(f"malformed self maps: {maps.self_.shape}")
    weights = bilinear_resize(np.asarray(fg, dtype=np.float64), gh, gw).reshape(-1)
    total = weights.sum()
    if total <= 0:
        raise ValueError("foreground weights are all zero: no foreground evidence")
    fused = np.tensordot(weights, maps.self_.reshape(n_src, -1), axes=(0, 0)) / total
    return minmax_normalize(bilinear_resize(fused.reshape(gh, gw), fg.shape[0], fg.shape[1]))


def estimate_alpha(fg: np.ndarray, ff: np.ndarray) -> np.ndarray:
    """Coarse alpha: min-max normalized sum of the cross and self maps."""
    fg = np.asarray(fg)
    ff = np.asarray(ff)
    if fg.shape != ff.shape:
        raise ValueError(f"shape mismatch: {fg.shape} vs {ff.shape}")
    return minmax_normalize(fg + ff)


def adjust_opacity(alpha: np.ndarray, k: float = 0.5) -> np.ndarray:
    """Opacity control: ``min(1, (1 + k) * alpha)`` elementwise; k >= -1."""
    if k < -1:
        raise ValueError(f"opacity k must be >= -1, got {k}")
    return np.minimum(1.0, (1.0 + k) * np.asarray(alpha, dtype=np.float64))
