"""Dense-CRF mean-field refinement of a score map into a binary mask.

The model is a two-label fully connected CRF: the foreground unary energy
is the negated score map, the background unary is a negated constant
energy level, and the pairwise Potts term mixes a spatial Gaussian kernel
with a bilateral (position + colour) kernel.  Mean-field updates are run
synchronously; a pixel ends up foreground when its final marginal beats
the background's.

Two message-passing backends exist.  The exact backend materializes the
pixel-pair kernel and is quadratic in pixel count, so it is reserved for
small images; the fast backend approximates the Gaussian convolutions
(separable filter for the spatial kernel, a splat/blur/slice bilateral
grid for the appearance kernel).  ``mode="auto"`` picks the exact backend
up to ``exact_max_pixels`` and the fast one beyond.  Kernel sums exclude
the pixel itself and are not normalized.
"""

from __future__ import annotations

import hashlib
import itertools
import threading
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ConfigError, DimensionError
from .io import RESOLUTION_IMAGE, BinaryMask

MODE_AUTO = "auto"
MODE_EXACT = "exact"
MODE_FAST = "fast"


@dataclass(frozen=True)
class CrfConfig:
    """Mean-field iteration count, kernel parameters, and unary scaling."""

    iterations: int = 10
    gaussian_sxy: float = 3.0
    gaussian_w: float = 3.0
    bilateral_sxy: float = 80.0
    bilateral_srgb: float = 13.0
    bilateral_w: float = 10.0
    background_energy: float | None = None
    unary_scale: float = 1.0
    mode: str = MODE_AUTO
    exact_max_pixels: int = 4096

    def __post_init__(self):
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if min(self.gaussian_w, self.bilateral_w) < 0.0:
            raise ConfigError("kernel weights must be >= 0")
        if min(self.gaussian_sxy, self.bilateral_sxy, self.bilateral_srgb) <= 0.0:
            raise ConfigError("kernel widths must be positive")
        if self.background_energy is not None and not np.isfinite(self.background_energy):
            raise ConfigError("background energy must be finite")
        if self.unary_scale <= 0.0:
            raise ConfigError("unary scale must be positive")
        if self.mode not in (MODE_AUTO, MODE_EXACT, MODE_FAST):
            raise ConfigError(f"unknown CRF mode {self.mode!r}")


def unaries_from_scores(score_map: np.ndarray, background_energy: float) -> np.ndarray:
    """Build the (2, H, W) unary energies: label 0 background, label 1 foreground.

    Energies are negated values, so without pairwise terms the arg-min
    label is foreground exactly when score > background_energy (ties go
    to background).
    """
    score_map = np.asarray(score_map, dtype=np.float64)
    if not np.isfinite(score_map).all() or not np.isfinite(background_energy):
        raise DimensionError("unaries require finite scores and background energy")
    bg = np.full_like(score_map, -float(background_energy))
    return np.stack([bg, -score_map])


def _label_softmax(neg_energy: np.ndarray) -> np.ndarray:
    shifted = neg_energy - neg_energy.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=0, keepdims=True)


def _exact_kernel(shape: tuple[int, int], rgb: np.ndarray | None, config: CrfConfig) -> np.ndarray:
    """Materialized (N, N) pairwise kernel with a zeroed diagonal."""
    h, w = shape
    ys, xs = np.mgrid[0:h, 0:w]
    pos = np.stack([ys.ravel(), xs.ravel()], axis=1).astype(np.float64)
    d2 = ((pos[:, None, :] - pos[None, :, :]) ** 2).sum(axis=2)
    kernel = np.zeros((h * w, h * w))
    if config.gaussian_w > 0.0:
        kernel += config.gaussian_w * np.exp(-d2 / (2.0 * config.gaussian_sxy**2))
    if config.bilateral_w > 0.0:
        col = rgb.reshape(h * w, -1).astype(np.float64)
        c2 = ((col[:, None, :] - col[None, :, :]) ** 2).sum(axis=2)
        kernel += config.bilateral_w * np.exp(
            -d2 / (2.0 * config.bilateral_sxy**2) - c2 / (2.0 * config.bilateral_srgb**2)
        )
    np.fill_diagonal(kernel, 0.0)
    return kernel


# Exact kernels depend only on geometry, colours, and widths/weights, so
# threshold sweeps and repeated targets can reuse them.
_kernel_cache: OrderedDict = OrderedDict()
_kernel_lock = threading.Lock()
_KERNEL_CACHE_SLOTS = 8


def _exact_kernel_cached(shape, rgb, config: CrfConfig) -> np.ndarray:
    rgb_key = None
    if rgb is not None and config.bilateral_w > 0.0:
        rgb_key = hashlib.sha1(np.ascontiguousarray(rgb).tobytes()).hexdigest()
    key = (
        shape,
        config.gaussian_sxy,
        config.gaussian_w,
        config.bilateral_sxy,
        config.bilateral_srgb,
        config.bilateral_w,
        rgb_key,
    )
    with _kernel_lock:
        if key in _kernel_cache:
            _kernel_cache.move_to_end(key)
            return _kernel_cache[key]
    kernel = _exact_kernel(shape, rgb, config)
    with _kernel_lock:
        _kernel_cache[key] = kernel
        while len(_kernel_cache) > _KERNEL_CACHE_SLOTS:
            _kernel_cache.popitem(last=False)
    return kernel


def _gaussian_sum_filter(q: np.ndarray, sigma: float) -> np.ndarray:
    """Unnormalized Gaussian-weighted sum over the image, zero padded."""
    truncate = 5.0
    radius = int(truncate * sigma + 0.5)
    taps = np.exp(-0.5 * (np.arange(-radius, radius + 1) / sigma) ** 2)
    out = ndimage.gaussian_filter(
        q, sigma=sigma, mode="constant", cval=0.0, truncate=truncate
    )
    return out * taps.sum() ** 2


def _bilateral_grid_filter(
    q_stack: np.ndarray, feats: np.ndarray, max_cells: int = 50_000_000
) -> np.ndarray:
    """Approximate per-label sums of exp(-|f_i - f_j|^2 / 2) * q_j.

    ``feats`` must already be scaled by the per-axis kernel widths.  Uses
    the classic splat / blur / slice scheme on a regular grid with unit
    cell size in feature space.
    """
    n_labels = q_stack.shape[0]
    flat_q = q_stack.reshape(n_labels, -1)
    f = feats.reshape(-1, feats.shape[-1])
    f = f - f.min(axis=0)
    base = np.floor(f).astype(np.int64)
    frac = f - base
    pad = 2
    dims = tuple(int(m) + 2 * pad + 2 for m in base.max(axis=0))
    if np.prod(dims) > max_cells:
        raise ConfigError(
            "bilateral grid too large; increase kernel widths or use exact mode"
        )
    base += pad
    n_axes = f.shape[1]
    grid = np.zeros((n_labels,) + dims)
    corners = list(itertools.product((0, 1), repeat=n_axes))
    weights = []
    indices = []
    for corner in corners:
        wgt = np.ones(f.shape[0])
        coord = base.copy()
        for ax, bit in enumerate(corner):
            wgt *= frac[:, ax] if bit else 1.0 - frac[:, ax]
            coord[:, ax] += bit
        idx = np.ravel_multi_index(tuple(coord.T), dims)
        weights.append(wgt)
        indices.append(idx)
        for l in range(n_labels):
            np.add.at(grid[l].ravel(), idx, wgt * flat_q[l])
    taps = np.exp(-0.5 * np.arange(-2, 3) ** 2)
    for ax in range(n_axes):
        grid = ndimage.correlate1d(grid, taps, axis=1 + ax, mode="constant", cval=0.0)
    out = np.zeros_like(flat_q)
    for wgt, idx in zip(weights, indices):
        for l in range(n_labels):
            out[l] += wgt * grid[l].ravel()[idx]
    return out.reshape(q_stack.shape)


def _messages_fast(q: np.ndarray, rgb: np.ndarray | None, config: CrfConfig) -> np.ndarray:
    msgs = np.zeros_like(q)
    if config.gaussian_w > 0.0:
        for l in range(q.shape[0]):
            msgs[l] += config.gaussian_w * (
                _gaussian_sum_filter(q[l], config.gaussian_sxy) - q[l]
            )
    if config.bilateral_w > 0.0:
        h, w = q.shape[1:]
        ys, xs = np.mgrid[0:h, 0:w]
        feats = np.concatenate(
            [
                (ys / config.bilateral_sxy)[..., None],
                (xs / config.bilateral_sxy)[..., None],
                rgb.astype(np.float64) / config.bilateral_srgb,
            ],
            axis=2,
        )
        msgs += config.bilateral_w * (_bilateral_grid_filter(q, feats) - q)
    return msgs


def mean_field(
    unaries: np.ndarray,
    rgb: np.ndarray | None,
    config: CrfConfig,
    trace: list | None = None,
) -> np.ndarray:
    """Run synchronous mean-field updates; returns the (2, H, W) marginals.

    Passing a list as ``trace`` appends a copy of the marginals after
    every update, which lets tests compare iteration by iteration.
    """
    unaries = np.asarray(unaries, dtype=np.float64)
    if unaries.ndim != 3 or unaries.shape[0] != 2:
        raise DimensionError("unaries must have shape (2, H, W)")
    h, w = unaries.shape[1:]
    if config.bilateral_w > 0.0:
        if rgb is None:
            raise DimensionError("bilateral kernel needs an RGB image")
        rgb = np.asarray(rgb)
        if rgb.shape[:2] != (h, w) or rgb.ndim != 3:
            raise DimensionError(
                f"rgb shape {rgb.shape} does not match unaries {(h, w)}"
            )

    neg_unary = -config.unary_scale * unaries
    q = _label_softmax(neg_unary)
    if config.iterations == 0:
        return q

    exact = config.mode == MODE_EXACT or (
        config.mode == MODE_AUTO and h * w <= config.exact_max_pixels
    )
    kernel = _exact_kernel_cached((h, w), rgb, config) if exact else None

    for _ in range(config.iterations):
        if exact:
            flat = q.reshape(2, -1)
            msgs = (kernel @ flat.T).T.reshape(q.shape)
        else:
            msgs = _messages_fast(q, rgb, config)
        # Potts coupling: each label is penalized by the other label's mass.
        exponent = np.stack(
            [neg_unary[0] - msgs[1], neg_unary[1] - msgs[0]]
        )
        q = _label_softmax(exponent)
        if trace is not None:
            trace.append(q.copy())
    return q


def refine(score_map: np.ndarray, rgb: np.ndarray | None, config: CrfConfig) -> BinaryMask:
    """Produce an image-resolution foreground mask from a score map.

    With ``iterations=0`` the output is the plain threshold
    ``score > background_energy``; otherwise the thresholded unaries are
    smoothed by mean-field inference and the arg-max label wins (scores
    tied with the background energy resolve to background).
    """
    if config.background_energy is None:
        raise ConfigError("CrfConfig.background_energy must be set before refining")
    score_map = np.asarray(score_map, dtype=np.float64)
    if score_map.ndim != 2:
        raise DimensionError("score map must be 2-D")
    if rgb is not None and np.asarray(rgb).shape[:2] != score_map.shape:
        raise DimensionError(
            f"rgb {np.asarray(rgb).shape[:2]} does not match score map {score_map.shape}"
        )
    unaries = unaries_from_scores(score_map, config.background_energy)
    q = mean_field(unaries, rgb, config)
    return BinaryMask(bits=q[1] > q[0], resolution_tag=RESOLUTION_IMAGE)
