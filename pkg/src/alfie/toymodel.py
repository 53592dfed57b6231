"""Deterministic toy diffusion-transformer noise estimator and decoder.

A few pre-norm transformer blocks over patched latent tokens, each with one
self-attention, one cross-attention against the prompt tokens, and a small
MLP. Weights are frozen draws from a counter-based PRNG (Philox) keyed by
the config seed, so the same seed gives bitwise-identical weights on any
platform and nothing ever needs to be serialized. The estimator can hand
back the exact softmax(Q K^T / sqrt(d)) tensors it used, which is the whole
reason this model exists.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .attention import AttentionRecord
from .imaging import bilinear_resize
from .prompts import tokenize

__all__ = [
    "PromptEmbedding",
    "ToyDitConfig",
    "ToyModel",
    "decode",
    "embed_prompt",
    "estimate_noise",
    "init_model",
    "weights_digest",
]


@dataclass(frozen=True)
class ToyDitConfig:
    latent_channels: int = 4
    latent_size: int = 16
    patch_size: int = 2
    depth: int = 4
    heads: int = 4
    model_dim: int = 64
    prompt_dim: int = 64
    seed: int = 0

    def __post_init__(self):
        for name in ("latent_channels", "latent_size", "patch_size", "depth",
                     "heads", "model_dim", "prompt_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.latent_size % self.patch_size != 0:
            raise ValueError("latent_size must be divisible by patch_size")
        if self.model_dim % self.heads != 0:
            raise ValueError("model_dim must be divisible by heads")

    @property
    def grid(self) -> int:
        return self.latent_size // self.patch_size

    @property
    def tokens(self) -> int:
        return self.grid * self.grid


@dataclass(frozen=True)
class PromptEmbedding:
    """Deterministic per-token embeddings; the null prompt is one zero token."""

    tokens: np.ndarray  # (N, prompt_dim)
    token_strings: tuple[str, ...]


@dataclass(frozen=True)
class ToyModel:
    config: ToyDitConfig
    weights: dict[str, np.ndarray]


def _sinusoid(positions: np.ndarray, dim: int) -> np.ndarray:
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / max(half - 1, 1))
    angles = positions[:, None] * freqs[None, :]
    emb = np.concatenate([np.sin(angles), np.cos(angles)], axis=1)
    if emb.shape[1] < dim:
        emb = np.pad(emb, ((0, 0), (0, dim - emb.shape[1])))
    return emb.astype(np.float32)


def embed_prompt(prompt: str, prompt_dim: int = 64) -> PromptEmbedding:
    """Hash-seeded Gaussian embedding per token; "" embeds as one zero token."""
    words = tokenize(prompt)
    if not words:
        return PromptEmbedding(
            tokens=np.zeros((1, prompt_dim), dtype=np.float32), token_strings=("",)
        )
    rows = []
    for word in words:
        key = int.from_bytes(hashlib.sha256(word.encode("utf-8")).digest()[:8], "little")
        rng = np.random.Generator(np.random.Philox(key=key))
        rows.append(rng.standard_normal(prompt_dim, dtype=np.float32))
    return PromptEmbedding(tokens=np.stack(rows), token_strings=tuple(words))


def init_model(config: ToyDitConfig) -> ToyModel:
    """Draw all weights from Philox(config.seed) in a fixed order.

    The draw order below is part of the model's identity: golden tests pin
    output checksums, so reordering or resizing any draw is a breaking change.
    """
    rng = np.random.Generator(np.random.Philox(key=config.seed))
    d = config.model_dim
    patch_dim = config.latent_channels * config.patch_size * config.patch_size

    def draw(rows: int, cols: int) -> np.ndarray:
        w = rng.standard_normal((rows, cols), dtype=np.float32)
        return w * np.float32(1.0 / np.sqrt(rows))

    weights: dict[str, np.ndarray] = {
        "patch_w": draw(patch_dim, d),
        "patch_b": rng.standard_normal(d, dtype=np.float32) * np.float32(0.02),
    }
    for layer in range(config.depth):
        p = f"l{layer}."
        weights[p + "sa_q"] = draw(d, d)
        weights[p + "sa_k"] = draw(d, d)
        weights[p + "sa_v"] = draw(d, d)
        weights[p + "sa_o"] = draw(d, d)
        weights[p + "ca_q"] = draw(d, d)
        weights[p + "ca_k"] = draw(config.prompt_dim, d)
        weights[p + "ca_v"] = draw(config.prompt_dim, d)
        weights[p + "ca_o"] = draw(d, d)
        weights[p + "mlp_w1"] = draw(d, 2 * d)
        weights[p + "mlp_b1"] = np.zeros(2 * d, dtype=np.float32)
        weights[p + "mlp_w2"] = draw(2 * d, d)
        weights[p + "mlp_b2"] = np.zeros(d, dtype=np.float32)
    weights["out_w"] = draw(d, patch_dim)
    weights["out_b"] = np.zeros(patch_dim, dtype=np.float32)
    weights["dec_w"] = rng.standard_normal((3, config.latent_channels), dtype=np.float32)
    weights["dec_b"] = rng.standard_normal(3, dtype=np.float32) * np.float32(0.1)
    return ToyModel(config=config, weights=weights)


def weights_digest(model: ToyModel) -> str:
    """SHA-256 over all weight bytes in key order; pins weight determinism."""
    h = hashlib.sha256()
    for name in sorted(model.weights):
        h.update(name.encode())
        h.update(model.weights[name].tobytes())
    return h.hexdigest()


def _layernorm(x: np.ndarray) -> np.ndarray:
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + np.float32(1e-5))


def _gelu(x: np.ndarray) -> np.ndarray:
    c = np.float32(np.sqrt(2.0 / np.pi))
    return 0.5 * x * (1.0 + np.tanh(c * (x + np.float32(0.044715) * x * x * x)))


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    t, d = x.shape
    return x.reshape(t, heads, d // heads).transpose(1, 0, 2)  # (heads, T, dh)


def estimate_noise(
    model: ToyModel,
    x: np.ndarray,
    e: PromptEmbedding,
    timestep: int,
    record: bool = False,
) -> tuple[np.ndarray, list[AttentionRecord]]:
    """Predict noise for latent ``x``; optionally return every attention map.

    Pure function of (weights, x, e, timestep): repeated calls are bitwise
    identical. With ``record``, one AttentionRecord per (layer, head) holds
    the exact cross and self softmax tensors from the forward pass.
    """
    cfg = model.config
    w = model.weights
    expected = (cfg.latent_channels, cfg.latent_size, cfg.latent_size)
    if x.shape != expected:
        raise ValueError(f"latent shape {x.shape} does not match config {expected}")

    g = cfg.grid
    p = cfg.patch_size
    heads = cfg.heads
    dh = cfg.model_dim // heads
    scale = np.float32(1.0 / np.sqrt(dh))

    # patchify: (c, g*p, g*p) -> (g*g, c*p*p)
    x32 = np.ascontiguousarray(x, dtype=np.float32)
    patches = (
        x32.reshape(cfg.latent_channels, g, p, g, p)
        .transpose(1, 3, 0, 2, 4)
        .reshape(g * g, -1)
    )
    z = patches @ w["patch_w"] + w["patch_b"]
    z = z + _sinusoid(np.arange(g * g, dtype=np.float64), cfg.model_dim)
    z = z + _sinusoid(np.array([float(timestep)]), cfg.model_dim)

    records: list[AttentionRecord] = []
    for layer in range(cfg.depth):
        pre = f"l{layer}."

        h = _layernorm(z)
        q = _split_heads(h @ w[pre + "sa_q"], heads)
        k = _split_heads(h @ w[pre + "sa_k"], heads)
        v = _split_heads(h @ w[pre + "sa_v"], heads)
        attn_self = _softmax(np.matmul(q, k.transpose(0, 2, 1)) * scale)  # (heads, T, T)
        out = np.matmul(attn_self, v).transpose(1, 0, 2).reshape(g * g, -1)
        z = z + out @ w[pre + "sa_o"]

        h = _layernorm(z)
        q = _split_heads(h @ w[pre + "ca_q"], heads)
        k = _split_heads(e.tokens @ w[pre + "ca_k"], heads)
        v = _split_heads(e.tokens @ w[pre + "ca_v"], heads)
        attn_cross = _softmax(np.matmul(q, k.transpose(0, 2, 1)) * scale)  # (heads, T, N)
        out = np.matmul(attn_cross, v).transpose(1, 0, 2).reshape(g * g, -1)
        z = z + out @ w[pre + "ca_o"]

        h = _layernorm(z)
        z = z + _gelu(h @ w[pre + "mlp_w1"] + w[pre + "mlp_b1"]) @ w[pre + "mlp_w2"] + w[pre + "mlp_b2"]

        if record:
            n = e.tokens.shape[0]
            for head in range(heads):
                records.append(AttentionRecord(
                    layer=layer,
                    head=head,
                    cross=attn_cross[head].reshape(g, g, n).copy(),
                    self_=attn_self[head].reshape(g * g, g, g).copy(),
                ))

    eps_tokens = z @ w["out_w"] + w["out_b"]
    eps = (
        eps_tokens.reshape(g, g, cfg.latent_channels, p, p)
        .transpose(2, 0, 3, 1, 4)
        .reshape(cfg.latent_channels, cfg.latent_size, cfg.latent_size)
    )
    return np.ascontiguousarray(eps), records


def decode(model: ToyModel, x0: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Frozen linear 4->3 channel projection + bilinear upsample, clamped to [-1, 1]."""
    cfg = model.config
    expected = (cfg.latent_channels, cfg.latent_size, cfg.latent_size)
    if x0.shape != expected:
        raise ValueError(f"latent shape {x0.shape} does not match config {expected}")
    rgb = np.tensordot(model.weights["dec_w"], x0, axes=(1, 0))  # (3, ls, ls)
    rgb = rgb + model.weights["dec_b"][:, None, None]
    up = bilinear_resize(rgb.transpose(1, 2, 0), out_h, out_w)
    return np.clip(up, -1.0, 1.0).astype(np.float32)
