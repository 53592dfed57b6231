"""Subject-centering denoising loop.

Each step runs four estimator calls in a fixed order -- (null, bg),
(text_bg, bg), (null, fg), (text, fg) -- combines them with CFG, takes one
Euler step per branch, and merges the two branch latents through the center
mask so the border band always follows the background branch. Attention is
recorded only for the text-conditioned subject branch and only over the
last ``keep_last_maps`` steps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .attention import AttentionTrace
from .sampler import build_schedule, cfg_combine, euler_step, scale_model_input
from .toymodel import ToyModel, decode, embed_prompt, estimate_noise

__all__ = [
    "GenerationOutput",
    "GenerationRequest",
    "StepSnapshot",
    "blend_latents",
    "generate",
    "make_center_mask",
]


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    bg_prompt: str = "a white background"
    seed: int = 0
    steps: int = 30
    guidance: float = 4.5
    out_size: tuple[int, int] = (64, 64)
    border_px: int = 64
    keep_last_maps: int = 10

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not (0 <= self.keep_last_maps <= self.steps):
            raise ValueError("keep_last_maps must be in [0, steps]")
        if self.guidance < 0:
            raise ValueError("guidance must be >= 0")
        if self.border_px < 0:
            raise ValueError("border_px must be >= 0")
        if self.out_size[0] < 1 or self.out_size[1] < 1:
            raise ValueError("out_size must be positive")


@dataclass(frozen=True)
class GenerationOutput:
    rgb: np.ndarray  # (h, w, 3) in [-1, 1]
    trace: AttentionTrace
    final_latent: np.ndarray


@dataclass(frozen=True)
class StepSnapshot:
    """Per-step observation handed to generate()'s optional callback."""

    index: int
    timestep: int
    sigma: float
    sigma_next: float
    latent_before: np.ndarray
    latent_after: np.ndarray


def make_center_mask(
    latent_h: int, latent_w: int, border_px: int, downsample_factor: int
) -> np.ndarray:
    """Binary latent-grid mask: 1 on the inner rectangle, 0 on the border band.

    The band width is the pixel border divided by the decoder's downsample
    factor, rounded to the nearest latent cell.
    """
    if downsample_factor < 1:
        raise ValueError("downsample_factor must be >= 1")
    band = int(round(border_px / downsample_factor))
    if latent_h - 2 * band <= 0 or latent_w - 2 * band <= 0:
        raise ValueError(
            f"border of {border_px}px ({band} latent cells) leaves no interior "
            f"in a {latent_h}x{latent_w} latent"
        )
    mask = np.zeros((latent_h, latent_w), dtype=np.float32)
    mask[band:latent_h - band, band:latent_w - band] = 1.0
    return mask


def blend_latents(x_fg: np.ndarray, x_bg: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Merge ``x_fg * m + x_bg * (1 - m)`` with the mask broadcast over channels.

    The mask is binary, so this is a pure per-pixel selection; implemented
    as one to keep the merged latent bitwise equal to its source branches.
    """
    if x_fg.shape != x_bg.shape:
        raise ValueError(f"latent shapes differ: {x_fg.shape} vs {x_bg.shape}")
    if x_fg.shape[-2:] != m.shape:
        raise ValueError(f"mask shape {m.shape} does not match latents {x_fg.shape}")
    return np.where(m.astype(bool)[None, :, :], x_fg, x_bg)


def generate(
    model: ToyModel,
    req: GenerationRequest,
    on_step: Callable[[StepSnapshot], None] | None = None,
) -> GenerationOutput:
    """Run the centered dual-latent denoising loop on the toy backend.

    Both branches restart each step from the merged latent, so there is a
    single canonical chain x_T ... x_0. Deterministic: the same request
    (seed included) produces bitwise-identical output.
    """
    cfg = model.config
    out_h, out_w = req.out_size
    schedule = build_schedule(req.steps)
    sigmas = schedule.sigmas

    factor = max(1, round(out_h / cfg.latent_size))
    mask = make_center_mask(cfg.latent_size, cfg.latent_size, req.border_px, factor)

    e_fg = embed_prompt(req.prompt, cfg.prompt_dim)
    e_bg = embed_prompt(req.bg_prompt, cfg.prompt_dim)
    e_null = embed_prompt("", cfg.prompt_dim)

    rng = np.random.Generator(np.random.Philox(key=req.seed))
    shape = (cfg.latent_channels, cfg.latent_size, cfg.latent_size)
    x = rng.standard_normal(shape, dtype=np.float32) * np.float32(sigmas[0])

    record_from = req.steps - req.keep_last_maps
    records = {}
    steps_recorded: list[int] = []

    for i in range(req.steps):
        t = int(schedule.timesteps[i])
        sigma, sigma_next = float(sigmas[i]), float(sigmas[i + 1])
        recording = i >= record_from
        x_in = scale_model_input(x, sigma)

        eps_bg_null, _ = estimate_noise(model, x_in, e_null, t)
        eps_bg_text, _ = estimate_noise(model, x_in, e_bg, t)
        eps_fg_null, _ = estimate_noise(model, x_in, e_null, t)
        eps_fg_text, recs = estimate_noise(model, x_in, e_fg, t, record=recording)

        eps_bg = cfg_combine(eps_bg_null, eps_bg_text, req.guidance)
        eps_fg = cfg_combine(eps_fg_null, eps_fg_text, req.guidance)
        x_bg = euler_step(x, eps_bg, sigma, sigma_next)
        x_fg = euler_step(x, eps_fg, sigma, sigma_next)
        x_next = blend_latents(x_fg, x_bg, mask)

        if recording:
            steps_recorded.append(t)
            for rec in recs:
                records[(t, rec.layer, rec.head)] = rec
        if on_step is not None:
            on_step(StepSnapshot(
                index=i, timestep=t, sigma=sigma, sigma_next=sigma_next,
                latent_before=x.copy(), latent_after=x_next.copy(),
            ))
        x = x_next

    trace = AttentionTrace(
        token_strings=list(e_fg.token_strings),
        token_grid=(cfg.grid, cfg.grid),
        sigma_schedule=sigmas.copy(),
        steps_recorded=steps_recorded,
        layers=cfg.depth,
        heads=cfg.heads,
        records=records,
        prompt=req.prompt,
        bg_prompt=req.bg_prompt,
    )
    rgb = decode(model, x, out_h, out_w)
    return GenerationOutput(rgb=rgb, trace=trace, final_latent=x)
