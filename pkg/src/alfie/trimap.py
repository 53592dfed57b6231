"""Quantize the foreground cross-attention map into a 4-valued GrabCut seed."""

from __future__ import annotations

import warnings

import numpy as np

__all__ = [
    "PROB_BG",
    "PROB_FG",
    "SURE_BG",
    "SURE_FG",
    "quantize_trimap",
    "trimap_to_gray",
]

SURE_BG = 0
PROB_BG = 1
PROB_FG = 2
SURE_FG = 3

# display coding for debug dumps: black / light gray / white / dark gray
_GRAY_CODES = {SURE_BG: 0, PROB_BG: 192, PROB_FG: 255, SURE_FG: 64}


def _nearest_rank(sorted_values: np.ndarray, q: float) -> float:
    n = sorted_values.size
    idx = max(int(np.ceil(q * n)), 1) - 1
    return float(sorted_values[min(idx, n - 1)])


def quantize_trimap(
    fg: np.ndarray,
    q_sure_fg: float = 0.8,
    q_prob_fg: float = 0.3,
    q_prob_bg: float = 0.1,
    mode: str = "quantile",
) -> np.ndarray:
    """Label each pixel {SURE_BG, PROB_BG, PROB_FG, SURE_FG} by threshold.

    In "quantile" mode (default) the three levels are nearest-rank empirical
    quantiles of the map's own values; in "absolute" mode they are applied
    to the values directly. A constant map carries no signal: it comes back
    all SURE_BG with a warning.
    """
    if not (0.0 <= q_prob_bg < q_prob_fg < q_sure_fg <= 1.0):
        raise ValueError(
            f"need 0 <= prob_bg < prob_fg < sure_fg <= 1, got "
            f"({q_prob_bg}, {q_prob_fg}, {q_sure_fg})"
        )
    if mode not in ("quantile", "absolute"):
        raise ValueError(f"unknown mode {mode!r}")
    fg = np.asarray(fg, dtype=np.float64)

    if fg.min() == fg.max():
        warnings.warn("constant foreground map: trimap degenerates to all SURE_BG",
                      stacklevel=2)
        return np.full(fg.shape, SURE_BG, dtype=np.uint8)

    if mode == "quantile":
        flat = np.sort(fg, axis=None)
        t_sure_fg = _nearest_rank(flat, q_sure_fg)
        t_prob_fg = _nearest_rank(flat, q_prob_fg)
        t_prob_bg = _nearest_rank(flat, q_prob_bg)
    else:
        t_sure_fg, t_prob_fg, t_prob_bg = q_sure_fg, q_prob_fg, q_prob_bg

    out = np.full(fg.shape, SURE_BG, dtype=np.uint8)
    out[fg >= t_prob_bg] = PROB_BG
    out[fg >= t_prob_fg] = PROB_FG
    out[fg >= t_sure_fg] = SURE_FG
    return out


def trimap_to_gray(trimap: np.ndarray) -> np.ndarray:
    """Map labels to display bytes for the debug PNG dump."""
    out = np.zeros(trimap.shape, dtype=np.uint8)
    for label, code in _GRAY_CODES.items():
        out[trimap == label] = code
    return out
