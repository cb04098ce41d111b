"""Scale pyramids, across-scale addition and [0,1] rescaling."""
from __future__ import annotations

import numpy as np
from scipy.ndimage import convolve1d, gaussian_filter

from .core import FeatureMap, Pyramid
from .kernels import resize_bilinear

SQRT2 = float(np.sqrt(2.0))
N_LEVELS = 10
COMMON_SCALE = 8

_BINOMIAL5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


def _lowpass(m: np.ndarray) -> np.ndarray:
    out = convolve1d(m, _BINOMIAL5, axis=0, mode="nearest")
    return convolve1d(out, _BINOMIAL5, axis=1, mode="nearest")


def build_pyramid(fmap, factor: float = SQRT2, levels: int = N_LEVELS):
    """Build the multi-scale stack by repeated low-pass + resample.

    Each level is binomially smoothed then bilinearly resampled so that
    level k+1 dims = ceil(level k dims / factor).
    """
    if factor not in (SQRT2, 2.0) and not np.isclose(factor, SQRT2) and factor != 2:
        raise ValueError("downsample factor must be sqrt(2) or 2")
    if isinstance(fmap, FeatureMap):
        grid, channel, t = fmap.grid, fmap.channel, fmap.t
    else:
        grid, channel, t = np.asarray(fmap, dtype=np.float64), "", 0
    if grid.shape[0] < 2 or grid.shape[1] < 2:
        raise ValueError("pyramid underflow")
    out = [grid]
    cur = grid
    for _ in range(levels - 1):
        nh = int(np.ceil(cur.shape[0] / factor))
        nw = int(np.ceil(cur.shape[1] / factor))
        if nh < 1 or nw < 1:
            raise ValueError("pyramid underflow")
        cur = resize_bilinear(_lowpass(cur), (nh, nw))
        out.append(cur)
    return Pyramid(out, factor=factor, channel=channel, t=t)


def resample_to(m: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Bilinear resample; downsampling proceeds in <=2x steps so that large
    reductions integrate rather than alias."""
    h, w = m.shape
    th, tw = int(shape[0]), int(shape[1])
    while h > 2 * th or w > 2 * tw:
        h = max(th, int(np.ceil(h / 2)))
        w = max(tw, int(np.ceil(w / 2)))
        m = resize_bilinear(m, (h, w))
    if (h, w) != (th, tw):
        m = resize_bilinear(m, (th, tw))
    return m


def across_scale_add(levels, common_k: int = COMMON_SCALE) -> np.ndarray:
    """Across-scale addition: resample every level to the common scale's
    dimensions and sum pixel-wise."""
    if isinstance(levels, Pyramid):
        levels = levels.levels
    if not 1 <= common_k <= len(levels):
        raise ValueError("common scale outside pyramid range")
    target = levels[common_k - 1].shape
    acc = np.zeros(target, dtype=np.float64)
    for lv in levels:
        acc += resample_to(np.asarray(lv, dtype=np.float64), target)
    return acc


def rescale01(m: np.ndarray) -> np.ndarray:
    """Affine rescale to [0, 1]; constant maps rescale to all-zeros so a
    featureless channel cannot inject uniform salience downstream."""
    m = np.asarray(m, dtype=np.float64)
    lo = m.min()
    hi = m.max()
    if hi == lo:
        return np.zeros_like(m)
    return (m - lo) / (hi - lo)


def render_at(m: np.ndarray, base_shape: tuple[int, int],
              smooth_sigma: float = 8.0) -> np.ndarray:
    """Upsample a common-scale map to panorama resolution.

    Gaussian smoothing after bilinear upsampling interpolates peak positions
    between coarse cells; without it argmax snaps to cell centers.
    """
    up = resize_bilinear(m, base_shape)
    if smooth_sigma > 0:
        up = gaussian_filter(up, smooth_sigma, mode="nearest")
    return up
