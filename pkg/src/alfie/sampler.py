"""Euler-discrete sampling primitives: noise schedule, CFG, denoising step.

Everything here is a pure function over numpy arrays; latents are
``(channels, height, width)`` float arrays and sigmas are plain floats.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "NoiseSchedule",
    "build_schedule",
    "cfg_combine",
    "euler_step",
    "scale_model_input",
]


@dataclass(frozen=True)
class NoiseSchedule:
    """Subsampled sigma schedule for a denoising chain.

    ``sigmas`` has ``num_steps + 1`` entries, strictly decreasing, ending at
    exactly 0. ``timesteps`` holds the matching training-time indices
    (descending), one per denoising step.
    """

    num_steps: int
    sigmas: np.ndarray
    timesteps: np.ndarray


def build_schedule(
    num_steps: int,
    beta_start: float = 1e-4,
    beta_end: float = 0.02,
    num_train_steps: int = 1000,
) -> NoiseSchedule:
    """Build the inference-time sigma schedule from a linear-beta training chain.

    Betas are linearly spaced, sigma(t) = sqrt((1 - abar_t) / abar_t) with
    abar the cumulative product of (1 - beta). The chain is subsampled at
    ``num_steps`` evenly spaced descending training indices (stride
    ``num_train_steps // num_steps``, anchored at the last index) and a
    trailing 0 sigma is appended.
    """
    if num_steps < 1 or num_steps > num_train_steps:
        raise ValueError(f"num_steps must be in [1, {num_train_steps}], got {num_steps}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ValueError(f"need 0 < beta_start <= beta_end < 1, got [{beta_start}, {beta_end}]")

    betas = np.linspace(beta_start, beta_end, num_train_steps, dtype=np.float64)
    alphas_cumprod = np.cumprod(1.0 - betas)
    all_sigmas = np.sqrt((1.0 - alphas_cumprod) / alphas_cumprod)

    stride = num_train_steps // num_steps
    timesteps = num_train_steps - 1 - stride * np.arange(num_steps, dtype=np.int64)
    sigmas = np.concatenate([all_sigmas[timesteps], [0.0]])
    return NoiseSchedule(num_steps=num_steps, sigmas=sigmas, timesteps=timesteps)


def cfg_combine(eps_uncond: np.ndarray, eps_cond: np.ndarray, s: float) -> np.ndarray:
    """Classifier-free guidance: ``eps_uncond + s * (eps_cond - eps_uncond)``."""
    if eps_uncond.shape != eps_cond.shape:
        raise ValueError(f"shape mismatch: {eps_uncond.shape} vs {eps_cond.shape}")
    if s < 0:
        raise ValueError(f"guidance scale must be >= 0, got {s}")
    return eps_uncond + s * (eps_cond - eps_uncond)


def euler_step(x_t: np.ndarray, eps_hat: np.ndarray, sigma_t: float, sigma_next: float) -> np.ndarray:
    """One deterministic Euler step under epsilon prediction.

    The derivative is the noise estimate itself, so
    ``x_next = x_t + (sigma_next - sigma_t) * eps_hat``.
    """
    if x_t.shape != eps_hat.shape:
        raise ValueError(f"shape mismatch: {x_t.shape} vs {eps_hat.shape}")
    if not (sigma_t >= sigma_next >= 0):
        raise ValueError(f"need sigma_t >= sigma_next >= 0, got {sigma_t}, {sigma_next}")
    return x_t + (sigma_next - sigma_t) * eps_hat


def scale_model_input(x_t: np.ndarray, sigma_t: float) -> np.ndarray:
    """Scale the latent by 1/sqrt(sigma^2 + 1) before the noise estimator sees it."""
    if sigma_t < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma_t}")
    return x_t / float(np.sqrt(sigma_t * sigma_t + 1.0))
