"""Vision transformer backbone with taps for intermediate facets.

The architecture (patch conv embedding, CLS token, learned position
embeddings, pre-norm blocks) and the parameter naming follow the widely
used self-distilled ViT reference implementation, so published
checkpoints for the small/patch-8 model load with ``strict=True``.
Position embeddings are bicubically resampled for non-default input
sizes, which lets the same weights run at any resolution divisible by
the patch size.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn
import torch.nn.functional as F


class Mlp(nn.Module):
    def __init__(self, dim, hidden):
        super().__init__()
        self.fc1 = nn.Linear(dim, hidden)
        self.act = nn.GELU()
        self.fc2 = nn.Linear(hidden, dim)

    def forward(self, x):
        return self.fc2(self.act(self.fc1(x)))


class Attention(nn.Module):
    def __init__(self, dim, num_heads):
        super().__init__()
        self.num_heads = num_heads
        self.scale = (dim // num_heads) ** -0.5
        self.qkv = nn.Linear(dim, dim * 3, bias=True)
        self.proj = nn.Linear(dim, dim)

    def forward(self, x, need_internals: bool = False):
        b, n, d = x.shape
        qkv = (
            self.qkv(x)
            .reshape(b, n, 3, self.num_heads, d // self.num_heads)
            .permute(2, 0, 3, 1, 4)
        )
        q, k, v = qkv[0], qkv[1], qkv[2]
        attn = (q @ k.transpose(-2, -1)) * self.scale
        attn = attn.softmax(dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, n, d)
        out = self.proj(out)
        if need_internals:
            return out, attn, (q, k, v)
        return out, None, None


class Block(nn.Module):
    def __init__(self, dim, num_heads, mlp_ratio=4.0):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim, eps=1e-6)
        self.attn = Attention(dim, num_heads)
        self.norm2 = nn.LayerNorm(dim, eps=1e-6)
        self.mlp = Mlp(dim, int(dim * mlp_ratio))

    def forward(self, x, need_internals: bool = False):
        attended, attn, qkv = self.attn(self.norm1(x), need_internals)
        x = x + attended
        x = x + self.mlp(self.norm2(x))
        return x, attn, qkv


class PatchEmbed(nn.Module):
    def __init__(self, patch_size, in_chans, embed_dim):
        super().__init__()
        self.patch_size = patch_size
        self.proj = nn.Conv2d(in_chans, embed_dim, kernel_size=patch_size, stride=patch_size)

    def forward(self, x):
        return self.proj(x).flatten(2).transpose(1, 2)


class VisionTransformer(nn.Module):
    """Small pre-norm ViT; default hyperparameters match the S/8 model."""

    def __init__(
        self,
        patch_size: int = 8,
        embed_dim: int = 384,
        depth: int = 12,
        num_heads: int = 6,
        mlp_ratio: float = 4.0,
        img_size: int = 224,
        in_chans: int = 3,
    ):
        super().__init__()
        self.patch_size = patch_size
        self.embed_dim = embed_dim
        self.num_heads = num_heads
        self.patch_embed = PatchEmbed(patch_size, in_chans, embed_dim)
        n_patches = (img_size // patch_size) ** 2
        self.cls_token = nn.Parameter(torch.zeros(1, 1, embed_dim))
        self.pos_embed = nn.Parameter(torch.zeros(1, n_patches + 1, embed_dim))
        self.blocks = nn.ModuleList(
            [Block(embed_dim, num_heads, mlp_ratio) for _ in range(depth)]
        )
        self.norm = nn.LayerNorm(embed_dim, eps=1e-6)
        nn.init.trunc_normal_(self.pos_embed, std=0.02)
        nn.init.trunc_normal_(self.cls_token, std=0.02)

    @property
    def depth(self) -> int:
        return len(self.blocks)

    def _interpolated_pos_embed(self, h_patches: int, w_patches: int) -> torch.Tensor:
        n = self.pos_embed.shape[1] - 1
        if h_patches * w_patches == n and h_patches == w_patches:
            return self.pos_embed
        side = int(math.sqrt(n))
        cls_pos = self.pos_embed[:, :1]
        patch_pos = self.pos_embed[:, 1:].reshape(1, side, side, self.embed_dim)
        patch_pos = patch_pos.permute(0, 3, 1, 2)
        patch_pos = F.interpolate(
            patch_pos, size=(h_patches, w_patches), mode="bicubic", align_corners=False
        )
        patch_pos = patch_pos.permute(0, 2, 3, 1).reshape(1, h_patches * w_patches, -1)
        return torch.cat([cls_pos, patch_pos], dim=1)

    def extract(self, x: torch.Tensor, layer: int, facet: str):
        """Run the backbone and tap one block.

        Returns (features, cls_attention): ``features`` is (B, N, F) over
        the patch tokens only; ``cls_attention`` is the last block's
        CLS -> patch attention averaged over heads, shape (B, N).
        """
        if not 0 <= layer < self.depth:
            raise ValueError(f"layer must be in [0, {self.depth}), got {layer}")
        if facet not in ("keys", "queries", "values", "tokens"):
            raise ValueError(f"unknown facet {facet!r}")
        b, _, h, w = x.shape
        if h % self.patch_size or w % self.patch_size:
            raise ValueError(
                f"input {h}x{w} is not a multiple of the patch size {self.patch_size}"
            )
        hp, wp = h // self.patch_size, w // self.patch_size

        tokens = self.patch_embed(x)
        cls = self.cls_token.expand(b, -1, -1)
        tokens = torch.cat([cls, tokens], dim=1)
        tokens = tokens + self._interpolated_pos_embed(hp, wp)

        features = None
        cls_attention = None
        for i, block in enumerate(self.blocks):
            need = i == layer or i == self.depth - 1
            tokens, attn, qkv = block(tokens, need_internals=need)
            if i == layer:
                if facet == "tokens":
                    features = tokens[:, 1:]
                else:
                    src = {"queries": 0, "keys": 1, "values": 2}[facet]
                    picked = qkv[src]  # (B, heads, N+1, head_dim)
                    picked = picked[:, :, 1:].permute(0, 2, 1, 3)
                    features = picked.reshape(b, hp * wp, -1)
            if i == self.depth - 1:
                cls_attention = attn[:, :, 0, 1:].mean(dim=1)
        return features, cls_attention


def load_pretrained(model: VisionTransformer, path: str) -> None:
    """Load a checkpoint file, tolerating common wrapper layouts."""
    state = torch.load(path, map_location="cpu", weights_only=True)
    if isinstance(state, dict):
        for key in ("state_dict", "model", "teacher", "student"):
            if key in state and isinstance(state[key], dict):
                state = state[key]
                break
    cleaned = {}
    for name, tensor in state.items():
        for prefix in ("module.", "backbone."):
            if name.startswith(prefix):
                name = name[len(prefix):]
        if name == "head.weight" or name == "head.bias":
            continue
        cleaned[name] = tensor
    model.load_state_dict(cleaned, strict=True)
