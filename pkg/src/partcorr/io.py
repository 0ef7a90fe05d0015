"""Descriptor-grid, mask, and depth-map containers plus their file formats.

The on-disk descriptor format ("AFDG") is a small little-endian binary
container for one dense descriptor grid and an optional per-patch saliency
channel:

    bytes 0-3   magic b"AFDG"
    byte  4     version (currently 1)
    byte  5     flags, bit0 = has_saliency
    7 x u32     height_patches, width_patches, dim, patch_size, stride,
                image_height, image_width
    H*W*D x f32 descriptors, row-major (patch-major, descriptor-minor)
    H*W   x f32 saliency in [0, 1], only when flagged

Masks are 8-bit PNGs (0 = background, 255 = foreground; values >= 128 read
as foreground).  Depth maps are raw little-endian binaries with a
u32 height, u32 width header, the four camera intrinsics (fx, fy, cx, cy)
as f32, then height*width f32 metres with NaN marking invalid pixels.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import DataError, DimensionError, FormatError

AFDG_MAGIC = b"AFDG"
AFDG_VERSION = 1
_HEADER = struct.Struct("<4sBB7I")

RESOLUTION_IMAGE = "image"
RESOLUTION_GRID = "grid"


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class DescriptorGrid:
    """A dense H'xW'xD descriptor field with its spatial metadata.

    ``data[i, j]`` is the D-dimensional descriptor of the patch whose
    receptive cell starts at image pixel ``(i * stride, j * stride)``.
    Instances are immutable after construction and safe to share between
    workers.
    """

    height_patches: int
    width_patches: int
    dim: int
    data: np.ndarray
    patch_size: int
    stride: int
    source_image_size: tuple[int, int]
    saliency: np.ndarray | None = None

    def __post_init__(self):
        if min(self.height_patches, self.width_patches, self.dim) < 1:
            raise DimensionError("grid dimensions must all be >= 1")
        if self.patch_size < 1 or self.stride < 1:
            raise DimensionError("patch_size and stride must be >= 1")
        if min(self.source_image_size) < 1:
            raise DimensionError("source image size must be positive")
        data = np.asarray(self.data, dtype=np.float32)
        shape = (self.height_patches, self.width_patches, self.dim)
        if data.size != np.prod(shape):
            raise DimensionError(
                f"descriptor payload has {data.size} values, expected {np.prod(shape)}"
            )
        data = data.reshape(shape)
        if not np.isfinite(data).all():
            raise DataError("descriptor grid contains non-finite values")
        object.__setattr__(self, "data", _readonly(data))
        if self.saliency is not None:
            sal = np.asarray(self.saliency, dtype=np.float32)
            if sal.size != self.height_patches * self.width_patches:
                raise DimensionError("saliency channel does not match grid shape")
            sal = sal.reshape(self.height_patches, self.width_patches)
            if not np.isfinite(sal).all():
                raise DataError("saliency channel contains non-finite values")
            if sal.min() < 0.0 or sal.max() > 1.0:
                raise DataError("saliency values must lie in [0, 1]")
            object.__setattr__(self, "saliency", _readonly(sal))

    @property
    def n_patches(self) -> int:
        return self.height_patches * self.width_patches

    def flat(self) -> np.ndarray:
        """Descriptors as an (n_patches, dim) view, row-major patch order."""
        return self.data.reshape(self.n_patches, self.dim)


@dataclass(frozen=True)
class BinaryMask:
    """A boolean HxW region at image or patch-grid resolution."""

    bits: np.ndarray
    resolution_tag: str = RESOLUTION_IMAGE

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        if bits.ndim != 2:
            raise DimensionError(f"mask must be 2-D, got shape {bits.shape}")
        if self.resolution_tag not in (RESOLUTION_IMAGE, RESOLUTION_GRID):
            raise DimensionError(f"unknown resolution tag {self.resolution_tag!r}")
        object.__setattr__(self, "bits", _readonly(bits))

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def count(self) -> int:
        return int(self.bits.sum())

    def is_empty(self) -> bool:
        return not self.bits.any()


@dataclass(frozen=True)
class DepthMap:
    """Per-pixel depth in metres; invalid pixels are NaN.

    Intrinsics are the pinhole parameters (fx, fy, cx, cy) in pixels.
    """

    values: np.ndarray
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float32)
        if values.ndim != 2:
            raise DimensionError(f"depth map must be 2-D, got shape {values.shape}")
        finite = values[np.isfinite(values)]
        if np.isinf(values).any():
            raise DataError("depth values must be finite or NaN")
        if finite.size and finite.min() < 0.0:
            raise DataError("valid depth values must be >= 0")
        object.__setattr__(self, "values", _readonly(values))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def valid(self) -> np.ndarray:
        return np.isfinite(self.values)


# ---------------------------------------------------------------------------
# Descriptor files
# ---------------------------------------------------------------------------

def write_descriptor_file(path, grid: DescriptorGrid) -> None:
    """Serialize ``grid`` to ``path`` in the AFDG binary layout."""
    flags = 1 if grid.saliency is not None else 0
    header = _HEADER.pack(
        AFDG_MAGIC,
        AFDG_VERSION,
        flags,
        grid.height_patches,
        grid.width_patches,
        grid.dim,
        grid.patch_size,
        grid.stride,
        grid.source_image_size[0],
        grid.source_image_size[1],
    )
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(grid.data, dtype="<f4").tobytes())
        if grid.saliency is not None:
            f.write(np.ascontiguousarray(grid.saliency, dtype="<f4").tobytes())


def read_descriptor_file(path) -> DescriptorGrid:
    """Load an AFDG file, validating layout and payload.

    Raises FormatError for bad magic/version or truncated payload and
    DataError for non-finite descriptors or out-of-range saliency.
    """
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: file shorter than AFDG header")
    magic, version, flags, hp, wp, dim, patch, stride, img_h, img_w = _HEADER.unpack_from(raw)
    if magic != AFDG_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != AFDG_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if min(hp, wp, dim, patch, stride, img_h, img_w) < 1:
        raise FormatError(f"{path}: header declares a zero-sized field")
    n_desc = hp * wp * dim
    n_sal = hp * wp if flags & 1 else 0
    expected = _HEADER.size + 4 * (n_desc + n_sal)
    if len(raw) != expected:
        raise FormatError(
            f"{path}: payload is {len(raw) - _HEADER.size} bytes, expected {expected - _HEADER.size}"
        )
    body = np.frombuffer(raw, dtype="<f4", count=n_desc, offset=_HEADER.size)
    saliency = None
    if n_sal:
        saliency = np.frombuffer(
            raw, dtype="<f4", count=n_sal, offset=_HEADER.size + 4 * n_desc
        )
    return DescriptorGrid(
        height_patches=hp,
        width_patches=wp,
        dim=dim,
        data=body.copy(),
        patch_size=patch,
        stride=stride,
        source_image_size=(img_h, img_w),
        saliency=None if saliency is None else saliency.copy(),
    )


# ---------------------------------------------------------------------------
# Masks
# ---------------------------------------------------------------------------

def read_mask_png(path, resolution_tag: str = RESOLUTION_IMAGE) -> BinaryMask:
    """Read an 8-bit PNG mask; pixels >= 128 count as foreground."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"))
    return BinaryMask(bits=arr >= 128, resolution_tag=resolution_tag)


def write_mask_png(path, mask: BinaryMask) -> None:
    """Write a mask as an 8-bit PNG with values 0/255."""
    arr = np.where(mask.bits, 255, 0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path, format="PNG")


def downsample_mask(
    mask: BinaryMask, grid: DescriptorGrid, coverage_threshold: float = 0.5
) -> BinaryMask:
    """Map an image-resolution mask onto the patch grid.

    A patch is foreground iff the fraction of true pixels inside its
    stride cell is >= ``coverage_threshold``.  Cells at the right/bottom
    edge are clipped to the image, and their coverage is taken over the
    clipped area.
    """
    if mask.resolution_tag != RESOLUTION_IMAGE:
        raise DimensionError("downsample_mask expects an image-resolution mask")
    if (mask.height, mask.width) != tuple(grid.source_image_size):
        raise DimensionError(
            f"mask is {mask.height}x{mask.width} but grid covers "
            f"{grid.source_image_size[0]}x{grid.source_image_size[1]}"
        )
    s = grid.stride
    out = np.zeros((grid.height_patches, grid.width_patches), dtype=bool)
    for i in range(grid.height_patches):
        y0, y1 = i * s, min((i + 1) * s, mask.height)
        if y0 >= y1:
            continue
        for j in range(grid.width_patches):
            x0, x1 = j * s, min((j + 1) * s, mask.width)
            if x0 >= x1:
                continue
            cell = mask.bits[y0:y1, x0:x1]
            out[i, j] = cell.mean() >= coverage_threshold
    return BinaryMask(bits=out, resolution_tag=RESOLUTION_GRID)


def upsample_mask(mask: BinaryMask, target_size: tuple[int, int], stride: int) -> BinaryMask:
    """Nearest-neighbour expansion of a grid mask to image resolution."""
    if mask.resolution_tag != RESOLUTION_GRID:
        raise DimensionError("upsample_mask expects a grid-resolution mask")
    h, w = target_size
    rows = np.minimum(np.arange(h) // stride, mask.height - 1)
    cols = np.minimum(np.arange(w) // stride, mask.width - 1)
    return BinaryMask(bits=mask.bits[np.ix_(rows, cols)], resolution_tag=RESOLUTION_IMAGE)


def upsample_map(values: np.ndarray, target_size: tuple[int, int], stride: int) -> np.ndarray:
    """Nearest-neighbour expansion of a grid-resolution real map."""
    values = np.asarray(values)
    h, w = target_size
    rows = np.minimum(np.arange(h) // stride, values.shape[0] - 1)
    cols = np.minimum(np.arange(w) // stride, values.shape[1] - 1)
    return values[np.ix_(rows, cols)]


def saliency_mask(grid: DescriptorGrid, threshold: float = 0.5) -> BinaryMask:
    """Threshold the grid's saliency channel into a grid-resolution mask.

    Patches with saliency strictly above ``threshold`` are foreground.
    Raises DataError when the grid carries no saliency channel.
    """
    if grid.saliency is None:
        raise DataError("descriptor grid has no saliency channel")
    return BinaryMask(bits=grid.saliency > threshold, resolution_tag=RESOLUTION_GRID)


# ---------------------------------------------------------------------------
# Depth maps
# ---------------------------------------------------------------------------

def write_depth_file(path, depth: DepthMap) -> None:
    header = struct.pack(
        "<2I4f", depth.height, depth.width, depth.fx, depth.fy, depth.cx, depth.cy
    )
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(depth.values, dtype="<f4").tobytes())


def read_depth_file(path) -> DepthMap:
    head = struct.calcsize("<2I4f")
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < head:
        raise FormatError(f"{path}: file shorter than depth header")
    h, w, fx, fy, cx, cy = struct.unpack_from("<2I4f", raw)
    if len(raw) != head + 4 * h * w:
        raise FormatError(f"{path}: depth payload does not match {h}x{w} header")
    values = np.frombuffer(raw, dtype="<f4", count=h * w, offset=head).reshape(h, w)
    return DepthMap(values=values.copy(), fx=fx, fy=fy, cx=cx, cy=cy)


# ---------------------------------------------------------------------------
# Float map debug export (PFM, the float analogue of PGM)
# ---------------------------------------------------------------------------

def write_score_pfm(path, values: np.ndarray) -> None:
    """Write a real-valued map as a grayscale PFM (little-endian f32).

    PGM itself has no float variant, so debugging score maps use the
    portable float map format: rows are stored bottom-to-top and the
    negative scale marks little-endian data.
    """
    values = np.asarray(values, dtype="<f4")
    if values.ndim != 2:
        raise DimensionError("score map must be 2-D")
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{values.shape[1]} {values.shape[0]}\n".encode())
        f.write(b"-1.0\n")
        f.write(np.ascontiguousarray(values[::-1]).tobytes())


def read_score_pfm(path) -> np.ndarray:
    with open(path, "rb") as f:
        if f.readline().strip() != b"Pf":
            raise FormatError(f"{path}: not a grayscale PFM")
        w, h = (int(t) for t in f.readline().split())
        scale = float(f.readline())
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(f.read(4 * w * h), dtype=dtype).reshape(h, w)
    return data[::-1].astype(np.float32)
