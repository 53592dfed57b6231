"""Empty-border metric and batch reporting.

A border is "empty" when every pixel in its margin strip has all three
channels above the threshold, on the [-1, 1] scale by default (per channel,
the stricter reading). Batch percentages render with two decimals in both an
aligned text table and a key-value form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["BorderFlags", "Report", "batch_report", "empty_border_flags"]


@dataclass(frozen=True)
class BorderFlags:
    left: bool
    right: bool
    top: bool
    bottom: bool
    all_sides: bool


def empty_border_flags(rgb: np.ndarray, margin: int = 4, threshold: float = 0.8) -> BorderFlags:
    """Flag each 4-pixel-margin border strip as empty (uniformly light) or not."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] < 3:
        raise ValueError(f"expected an (h, w, 3) image, got {rgb.shape}")
    h, w = rgb.shape[:2]
    if not (1 <= margin < min(h, w) / 2):
        raise ValueError(f"margin {margin} too large for a {h}x{w} image")
    rgb = rgb[:, :, :3]
    left = bool((rgb[:, :margin] > threshold).all())
    right = bool((rgb[:, w - margin:] > threshold).all())
    top = bool((rgb[:margin, :] > threshold).all())
    bottom = bool((rgb[h - margin:, :] > threshold).all())
    return BorderFlags(left, right, top, bottom, left and right and top and bottom)


@dataclass(frozen=True)
class Report:
    """Batch percentages of empty borders, plus an optional external CLIP-S mean."""

    count: int
    empty_a: float
    empty_l: float
    empty_r: float
    empty_t: float
    empty_b: float
    clip_s: float | None = None

    _COLUMNS = ("empty-a", "empty-l", "empty-r", "empty-t", "empty-b")

    def _values(self) -> list[tuple[str, float]]:
        cells = list(zip(self._COLUMNS,
                         (self.empty_a, self.empty_l, self.empty_r, self.empty_t, self.empty_b)))
        if self.clip_s is not None:
            cells.append(("CLIP-S", self.clip_s))
        return cells

    def render_text(self) -> str:
        cells = self._values()
        header = "  ".join(f"{name:>8s}" for name, _ in cells)
        row = "  ".join(f"{value:8.2f}" for _, value in cells)
        return f"{header}\n{row}\n(n = {self.count})"

    def render_kv(self) -> str:
        lines = [f"count = {self.count}"]
        lines += [f"{name} = {value:.2f}" for name, value in self._values()]
        return "\n".join(lines) + "\n"


def batch_report(flags: list[BorderFlags], clip_scores: list[float] | None = None) -> Report:
    """Aggregate per-image flags into Table-style percentages."""
    if not flags:
        raise ValueError("cannot report on an empty batch")
    if clip_scores is not None and len(clip_scores) != len(flags):
        raise ValueError(
            f"{len(clip_scores)} CLIP scores for {len(flags)} images"
        )
    pct = lambda xs: 100.0 * float(np.mean(xs))  # noqa: E731
    return Report(
        count=len(flags),
        empty_a=pct([f.all_sides for f in flags]),
        empty_l=pct([f.left for f in flags]),
        empty_r=pct([f.right for f in flags]),
        empty_t=pct([f.top for f in flags]),
        empty_b=pct([f.bottom for f in flags]),
        clip_s=None if clip_scores is None else float(np.mean(clip_scores)),
    )
