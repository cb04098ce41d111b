"""Visual feature channels: intensity, color opponency, orientation, motion."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import correlate

from .core import THETAS, FeatureMap, FlowField, INTENSITY, MOTION, ORI_TAGS
from .kernels import hs_iterate, resize_bilinear, warp_bilinear

LOW_LUMINANCE_GATE = 0.1

# Gabor bank defaults; the pyramid supplies scale so one kernel size serves
# every level.
GABOR_WAVELENGTH = 7.0
GABOR_SIGMA = 2.8
GABOR_ASPECT = 0.8


def load_frame(path) -> np.ndarray:
    """Decode an 8- or 16-bit PNG/PPM to an (H, W, 3) float array in [0, 1].

    Channel order is R, G, B.
    """
    img = Image.open(path)
    if img.mode in ("I;16", "I;16B", "I"):
        arr = np.asarray(img, dtype=np.float64)
        arr = arr / 65535.0
        arr = np.stack([arr] * 3, axis=-1)
    else:
        arr = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
    return arr


def intensity_map(frame: np.ndarray, t: int = 0) -> FeatureMap:
    """Per-pixel average of the R, G, B planes."""
    frame = np.asarray(frame, dtype=np.float64)
    grid = frame.mean(axis=2) if frame.ndim == 3 else frame
    return FeatureMap(grid, INTENSITY, scale=1, t=t)


def color_opponency_maps(frame: np.ndarray, t: int = 0,
                         gate: float = LOW_LUMINANCE_GATE):
    """Broadly tuned RG / GR / BY / YB opponency maps.

    Opponency is undefined near black, so pixels below the luminance gate
    are zeroed.
    """
    frame = np.asarray(frame, dtype=np.float64)
    R, G, B = frame[..., 0], frame[..., 1], frame[..., 2]
    lum = (R + G + B) / 3.0
    r = R - (G + B) / 2.0
    g = G - (R + B) / 2.0
    b = B - (R + G) / 2.0
    y = (R + G) / 2.0 - np.abs(R - G) / 2.0 - B
    keep = lum >= gate
    rg = np.where(keep, np.maximum(0.0, r - g), 0.0)
    gr = np.where(keep, np.maximum(0.0, g - r), 0.0)
    by = np.where(keep, np.maximum(0.0, b - y), 0.0)
    yb = np.where(keep, np.maximum(0.0, y - b), 0.0)
    return (FeatureMap(rg, "rg", 1, t), FeatureMap(gr, "gr", 1, t),
            FeatureMap(by, "by", 1, t), FeatureMap(yb, "yb", 1, t))


def gabor_pair(theta: float, wavelength: float = GABOR_WAVELENGTH,
               sigma: float = GABOR_SIGMA, aspect: float = GABOR_ASPECT):
    """Even/odd Gabor kernels tuned to edges oriented along ``theta``.

    The carrier runs perpendicular to the edge direction.  The even kernel is
    made DC-free by subtracting a scaled envelope, so constant inputs give a
    response that is zero to roundoff.
    """
    half = int(np.ceil(3.0 * sigma))
    y, x = np.mgrid[-half:half + 1, -half:half + 1].astype(np.float64)
    psi = theta + np.pi / 2.0
    xp = x * np.cos(psi) + y * np.sin(psi)
    yp = -x * np.sin(psi) + y * np.cos(psi)
    env = np.exp(-(xp ** 2 + (aspect * yp) ** 2) / (2.0 * sigma ** 2))
    even = env * np.cos(2.0 * np.pi * xp / wavelength)
    odd = env * np.sin(2.0 * np.pi * xp / wavelength)
    even -= env * (even.sum() / env.sum())
    return even, odd


def orientation_maps(intensity: FeatureMap, thetas=THETAS):
    """Quadrature (complex-cell) Gabor energy, one map per orientation."""
    from .grouping import conv_bank  # shared FFT convolution path

    grid = intensity.grid if isinstance(intensity, FeatureMap) else np.asarray(intensity)
    out = []
    for tag, th in zip(ORI_TAGS, thetas):
        even, odd = gabor_pair(th)
        ce, co = conv_bank(grid, (even, odd))
        energy = np.hypot(ce, co)
        out.append(FeatureMap(energy, tag, 1,
                              intensity.t if isinstance(intensity, FeatureMap) else 0))
    return tuple(out)


# ---------------------------------------------------------------------------
# optical flow
# ---------------------------------------------------------------------------

_KX = np.array([[-1.0, 1.0], [-1.0, 1.0]]) * 0.25
_KY = np.array([[-1.0, -1.0], [1.0, 1.0]]) * 0.25
_KT = np.ones((2, 2)) * 0.25


class HornSchunckFlow:
    """Coarse-to-fine brightness-constancy + quadratic-smoothness estimator.

    A plain single-scale solver cannot recover displacements beyond the
    linearization range (~1 px), so each pyramid level warps the second frame
    by the upsampled flow before re-solving.
    """

    def __init__(self, alpha: float = 0.5, iterations: int = 100,
                 pyramid_levels: int = 4):
        self.alpha = float(alpha)
        self.iterations = int(iterations)
        self.pyramid_levels = int(pyramid_levels)

    def estimate(self, prev: np.ndarray, nxt: np.ndarray) -> FlowField:
        if prev.shape != nxt.shape:
            raise ValueError("frame size mismatch")
        f1 = np.asarray(prev, dtype=np.float64)
        f2 = np.asarray(nxt, dtype=np.float64)
        pyr1, pyr2 = [f1], [f2]
        for _ in range(self.pyramid_levels - 1):
            if min(pyr1[-1].shape) < 16:
                break
            shape = (int(np.ceil(pyr1[-1].shape[0] / 2)),
                     int(np.ceil(pyr1[-1].shape[1] / 2)))
            pyr1.append(resize_bilinear(pyr1[-1], shape))
            pyr2.append(resize_bilinear(pyr2[-1], shape))
        u = np.zeros_like(pyr1[-1])
        v = np.zeros_like(pyr1[-1])
        for lev in range(len(pyr1) - 1, -1, -1):
            a, b = pyr1[lev], pyr2[lev]
            if u.shape != a.shape:
                sy = a.shape[0] / u.shape[0]
                sx = a.shape[1] / u.shape[1]
                u = resize_bilinear(u, a.shape) * sx
                v = resize_bilinear(v, a.shape) * sy
            b = warp_bilinear(b, u, v)
            fx = correlate(a, _KX, mode="nearest") + correlate(b, _KX, mode="nearest")
            fy = correlate(a, _KY, mode="nearest") + correlate(b, _KY, mode="nearest")
            ft = correlate(b, _KT, mode="nearest") - correlate(a, _KT, mode="nearest")
            du, dv = hs_iterate(np.zeros_like(u), np.zeros_like(v),
                                fx, fy, ft, self.alpha, self.iterations)
            u = u + du
            v = v + dv
        return FlowField(u, v)


def optical_flow(prev: np.ndarray, nxt: np.ndarray, estimator=None, t: int = 0) -> FlowField:
    """Dense flow between consecutive intensity frames.

    The estimator is pluggable; anything with ``estimate(prev, next)`` works.
    """
    est = estimator if estimator is not None else HornSchunckFlow()
    flow = est.estimate(prev, nxt)
    flow.t = t
    return flow


def motion_magnitude(flow: FlowField) -> FeatureMap:
    """Pointwise sqrt(u^2 + v^2)."""
    return FeatureMap(np.hypot(flow.u, flow.v), MOTION, scale=1, t=flow.t)
