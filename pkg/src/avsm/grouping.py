"""Proto-object grouping: center-surround, normalization, border ownership,
and annular grouping cells."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.fft import irfft2, rfft2

from .core import ORI_BY_TAG, ORI_TAGS, THETAS, FeatureMap, Pyramid
from .kernels import translate_bilinear
from .pyramid import N_LEVELS, SQRT2, build_pyramid, render_at, across_scale_add
from .vision import gabor_pair

# Fixed small kernels; multi-scale behaviour comes from the pyramid itself.
DOG_SIGMA_CENTER = 2.0
DOG_SIGMA_SURROUND = 4.0
BO_OFFSET = 3.0
ANNULUS_RADIUS = 6.0
ANNULUS_THICKNESS = 2.0
LOCAL_MAX_THRESH = 0.05
# Levels whose smaller dimension cannot support the kernel footprints produce
# only boundary artifacts; they contribute zero activity.
MIN_LEVEL_DIM = 26
# Feature maps whose peak falls below this are numerical dust, not signal;
# without the floor, rescaling would stretch roundoff into full-range salience.
ACTIVITY_FLOOR = 1e-9


# ---------------------------------------------------------------------------
# FFT convolution with replicate padding and cached kernel transforms
# ---------------------------------------------------------------------------

_fft_cache: dict = {}


def _kernel_ffts(kernels, padded_shape, cache_key):
    key = (cache_key, padded_shape)
    hit = _fft_cache.get(key)
    if hit is not None:
        return hit
    ffts = []
    for k in kernels:
        kh, kw = k.shape
        emb = np.zeros(padded_shape)
        emb[:kh, :kw] = k
        ffts.append(rfft2(emb))
    _fft_cache[key] = ffts
    return ffts


def conv_bank(img: np.ndarray, kernels, cache_key=None):
    """Convolve one image with a bank of odd-sized kernels.

    True convolution (sum of img[p] * kernel[x - p]) with replicate-edge
    padding.  One forward FFT of the padded image serves the whole bank;
    kernel FFTs are cached per (bank, shape) when a cache_key is given.
    """
    from scipy.fft import next_fast_len

    half = max(k.shape[0] // 2 for k in kernels)
    pad = np.pad(img, half, mode="edge")
    # extra zero rows/cols up to an FFT-friendly length are harmless: the
    # kernel support never reaches back into the cropped output region
    ph = next_fast_len(pad.shape[0])
    pw = next_fast_len(pad.shape[1])
    if (ph, pw) != pad.shape:
        padded = np.zeros((ph, pw))
        padded[:pad.shape[0], :pad.shape[1]] = pad
        pad = padded
    F = rfft2(pad)
    if cache_key is not None:
        kf = _kernel_ffts(tuple(kernels), (ph, pw), cache_key)
    else:
        kf = []
        for k in kernels:
            emb = np.zeros((ph, pw))
            emb[:k.shape[0], :k.shape[1]] = k
            kf.append(rfft2(emb))
    outs = []
    h, w = img.shape
    for k, K in zip(kernels, kf):
        kh2 = k.shape[0] // 2
        full = irfft2(F * K, s=(ph, pw))
        # kernel embedded at origin: output pixel p sits at p + half + kh2
        outs.append(full[half + kh2:half + kh2 + h, half + kh2:half + kh2 + w].copy())
    return outs


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

def _gaussian2d(sigma: float, half: int) -> np.ndarray:
    x = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    k = np.outer(g, g)
    return k / k.sum()


def dog_kernel(sigma_center: float = DOG_SIGMA_CENTER,
               sigma_surround: float = DOG_SIGMA_SURROUND) -> np.ndarray:
    """Difference of unit-mass Gaussians; sums to zero."""
    half = int(np.ceil(3.0 * sigma_surround))
    return _gaussian2d(sigma_center, half) - _gaussian2d(sigma_surround, half)


def _edge_normal(theta: float):
    nx = np.cos(theta + np.pi / 2.0)
    ny = np.sin(theta + np.pi / 2.0)
    # snap axis-aligned normals so integer-offset shifts stay integer
    nx = round(nx) if abs(nx - round(nx)) < 1e-12 else nx
    ny = round(ny) if abs(ny - round(ny)) < 1e-12 else ny
    return (nx, ny)


def annulus_kernel(direction, radius: float = ANNULUS_RADIUS,
                   thickness: float = ANNULUS_THICKNESS) -> np.ndarray:
    """Annular receptive field gated to sources whose ownership direction
    points at the kernel center (cosine weight over +-pi/2)."""
    half = int(np.ceil(radius + thickness / 2.0 + 1.0))
    y, x = np.mgrid[-half:half + 1, -half:half + 1].astype(np.float64)
    rho = np.hypot(x, y)
    band = np.clip(1.0 + thickness / 2.0 - np.abs(rho - radius), 0.0, 1.0)
    safe = np.where(rho > 0, rho, 1.0)
    cosw = np.clip((x * direction[0] + y * direction[1]) / safe, 0.0, None)
    return band * cosw


@dataclass
class GroupingParams:
    dog_sigma_center: float = DOG_SIGMA_CENTER
    dog_sigma_surround: float = DOG_SIGMA_SURROUND
    bo_offset: float = BO_OFFSET
    annulus_radius: float = ANNULUS_RADIUS
    annulus_thickness: float = ANNULUS_THICKNESS
    local_max_thresh: float = LOCAL_MAX_THRESH
    norm_peak: float = 1.0
    min_level_dim: int = MIN_LEVEL_DIM
    activity_floor: float = ACTIVITY_FLOOR
    pyramid_factor: float = SQRT2
    levels: int = N_LEVELS
    _banks: dict = field(default_factory=dict, repr=False)

    def dog(self):
        k = self._banks.get("dog")
        if k is None:
            k = dog_kernel(self.dog_sigma_center, self.dog_sigma_surround)
            self._banks["dog"] = k
        return k

    def edge_bank(self):
        b = self._banks.get("edges")
        if b is None:
            b = [gabor_pair(th) for th in THETAS]
            self._banks["edges"] = b
        return b

    def even_gabor(self, theta: float):
        key = ("even", theta)
        k = self._banks.get(key)
        if k is None:
            k = gabor_pair(theta)[0]
            self._banks[key] = k
        return k

    def grouping_bank(self):
        b = self._banks.get("annuli")
        if b is None:
            b = {}
            for th in THETAS:
                n = _edge_normal(th)
                b[(th, +1)] = annulus_kernel((n[0], n[1]), self.annulus_radius,
                                             self.annulus_thickness)
                b[(th, -1)] = annulus_kernel((-n[0], -n[1]), self.annulus_radius,
                                             self.annulus_thickness)
            self._banks["annuli"] = b
        return b


DEFAULT_PARAMS = GroupingParams()


# ---------------------------------------------------------------------------
# pipeline stages
# ---------------------------------------------------------------------------

def normalize_itti(m: np.ndarray, peak: float = 1.0,
                   thresh: float = LOCAL_MAX_THRESH) -> np.ndarray:
    """Promote isolated activity, suppress clustered activity.

    Rescales to [0, peak], finds 3x3 local maxima above ``thresh * peak``,
    and multiplies the map by (peak - mbar)^2 where mbar averages the local
    maxima excluding one instance of the global maximum.  Pixels within
    roundoff of their neighbourhood maximum cluster into one peak, so
    symmetric inputs are suppressed identically to their mirror images.
    """
    from scipy import ndimage

    m = np.asarray(m, dtype=np.float64)
    lo, hi = m.min(), m.max()
    if hi == lo:
        return np.zeros_like(m)
    s = (m - lo) / (hi - lo) * peak
    mf = ndimage.maximum_filter(s, size=3, mode="nearest")
    cand = (mf - s <= 1e-9 * peak) & (s > thresh * peak)
    labels, n = ndimage.label(cand, structure=np.ones((3, 3), dtype=int))
    if n == 0:
        mbar = 0.0
    else:
        vals = np.atleast_1d(ndimage.maximum(s, labels, np.arange(1, n + 1)))
        rest = np.delete(vals, int(np.argmax(vals)))
        mbar = float(rest.mean()) if rest.size else 0.0
    return s * (peak - mbar) ** 2


def center_surround_level(m: np.ndarray, channel: str,
                          params: GroupingParams = DEFAULT_PARAMS):
    """Light (bright-on-dark) and dark (dark-on-bright) contrast maps.

    Orientation channels replace the DoG with the even Gabor at the channel's
    angle, since their feature contrast is oriented rather than symmetric.
    """
    if channel in ORI_TAGS:
        kern = params.even_gabor(ORI_BY_TAG[channel])
        key = ("cs_even", channel)
    else:
        kern = params.dog()
        key = "cs_dog"
    cs = conv_bank(m, (kern,), cache_key=key)[0]
    return np.clip(cs, 0.0, None), np.clip(-cs, 0.0, None)


def center_surround(pyr: Pyramid, params: GroupingParams = DEFAULT_PARAMS):
    """Per-level light/dark CS pyramids for one feature channel."""
    light, dark = [], []
    for lv in pyr:
        l, d = center_surround_level(lv, pyr.channel, params)
        light.append(l)
        dark.append(d)
    return (Pyramid(light, pyr.factor, pyr.channel, pyr.t),
            Pyramid(dark, pyr.factor, pyr.channel, pyr.t))


def border_ownership_level(m: np.ndarray, cs_light: np.ndarray,
                           cs_dark: np.ndarray,
                           params: GroupingParams = DEFAULT_PARAMS):
    """Per-orientation winning BO activity and owned side.

    Edge activity (complex-cell Gabor energy of the feature map) is modulated
    by normalized CS activity sampled at +-bo_offset along the edge normal.
    Light and dark CS are summed for contrast-polarity invariance, then the
    two opposite ownership directions compete pointwise.  Exact ties go to
    the side with greater annulus-integrated activity, then to the +normal
    ("left") side.
    """
    nl = normalize_itti(cs_light, params.norm_peak, params.local_max_thresh)
    nd = normalize_itti(cs_dark, params.norm_peak, params.local_max_thresh)
    csmod = nl + nd
    d = params.bo_offset
    winners = {}
    edge_pairs = conv_bank(m, [k for pair in params.edge_bank() for k in pair],
                           cache_key="edges")
    # tie-break field: annulus-scale integral of the feature activity,
    # compared on the two candidate sides
    side = int(np.ceil(params.annulus_radius)) * 2 + 1
    blur = np.ones((side, side)) / side ** 2
    integ = conv_bank(m, (blur,), cache_key=("tieblur", side))[0]
    for i, th in enumerate(THETAS):
        edge = np.hypot(edge_pairs[2 * i], edge_pairs[2 * i + 1])
        n = _edge_normal(th)
        # sample on each candidate side: content shifted by -offset puts the
        # value at p + offset under p
        cs_p = translate_bilinear(csmod, -d * n[0], -d * n[1])
        cs_m = translate_bilinear(csmod, d * n[0], d * n[1])
        bo_p = edge * (1.0 + cs_p)
        bo_m = edge * (1.0 + cs_m)
        # near-ties are ties: roundoff must not pick ownership sides
        tie = np.abs(bo_p - bo_m) <= 1e-9 * np.maximum(bo_p, bo_m)
        if tie.any():
            ip = translate_bilinear(integ, -d * n[0], -d * n[1])
            im = translate_bilinear(integ, d * n[0], d * n[1])
            p_wins = np.where(tie, ip >= im, bo_p > bo_m)
        else:
            p_wins = bo_p > bo_m
        winners[th] = (np.where(p_wins, bo_p, bo_m), p_wins)
    return winners


def grouping_level(winners, shape, params: GroupingParams = DEFAULT_PARAMS) -> np.ndarray:
    """Fold winning BO activity onto object centers through the annuli."""
    if min(shape) <= params.min_level_dim:
        return np.zeros(shape)
    bank = params.grouping_bank()
    g = np.zeros(shape)
    for th in THETAS:
        activity, p_wins = winners[th]
        wp = np.where(p_wins, activity, 0.0)
        wm = np.where(p_wins, 0.0, activity)
        cp, cm = conv_bank(wp, (bank[(th, +1)],), cache_key=("grp", th, +1))[0], \
                 conv_bank(wm, (bank[(th, -1)],), cache_key=("grp", th, -1))[0]
        g += cp + cm
    return np.clip(g, 0.0, None)


def border_ownership(edge_pyr: Pyramid, cs_light: Pyramid, cs_dark: Pyramid,
                     params: GroupingParams = DEFAULT_PARAMS):
    """Winning BO activity per level for a whole pyramid (module surface;
    the per-level work happens in border_ownership_level)."""
    if not (len(edge_pyr) == len(cs_light) == len(cs_dark)):
        raise ValueError("pyramid geometry mismatch")
    out = []
    for m, l, d in zip(edge_pyr, cs_light, cs_dark):
        if m.shape != l.shape or m.shape != d.shape:
            raise ValueError("pyramid geometry mismatch")
        out.append(border_ownership_level(m, l, d, params))
    return out


def grouping(winners_per_level, shapes, params: GroupingParams = DEFAULT_PARAMS):
    return [grouping_level(w, s, params) for w, s in zip(winners_per_level, shapes)]


def group_channel(fmap, channel: str = "",
                  params: GroupingParams = DEFAULT_PARAMS) -> Pyramid:
    """Full grouping pipeline for one scale-1 feature map.

    build pyramid -> center-surround -> normalize -> border ownership ->
    grouping.  Maps whose activity never rises above the floor yield an
    all-zero pyramid (and skip the filter cascade entirely).
    """
    if isinstance(fmap, FeatureMap):
        grid, channel, t = fmap.grid, fmap.channel, fmap.t
    else:
        grid, t = np.asarray(fmap, dtype=np.float64), 0
    pyr = build_pyramid(FeatureMap(grid, channel, 1, t),
                        factor=params.pyramid_factor, levels=params.levels)
    if grid.max() - grid.min() < params.activity_floor:
        zeros = [np.zeros(lv.shape) for lv in pyr]
        return Pyramid(zeros, pyr.factor, channel, t)
    out = []
    for lv in pyr:
        if min(lv.shape) <= params.min_level_dim:
            out.append(np.zeros(lv.shape))
            continue
        light, dark = center_surround_level(lv, channel, params)
        winners = border_ownership_level(lv, light, dark, params)
        out.append(grouping_level(winners, lv.shape, params))
    return Pyramid(out, pyr.factor, channel, t)


def collapse_grouping(gpyr: Pyramid, base_shape, common_k: int = 8,
                      smooth_sigma: float = 8.0) -> np.ndarray:
    """Across-scale addition of a grouping pyramid rendered at panorama
    resolution; the argmax of this map estimates the proto-object center."""
    return render_at(across_scale_add(gpyr, common_k), base_shape, smooth_sigma)
