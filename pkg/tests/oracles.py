"""Independent reference implementations used to check pipeline outputs.

Everything here is deliberately written without reusing the package's
numeric paths: plain loops and direct definitions, slow but obvious.
"""
import numpy as np

SPEED_OF_SOUND = 343.0


# ---------------------------------------------------------------------------
# resample-and-sum brute force for across-scale addition
# ---------------------------------------------------------------------------

def bilinear_point(img, x, y):
    """Scalar bilinear lookup with edge clamp (loop-free but direct)."""
    h, w = img.shape
    x = min(max(x, 0.0), w - 1.0)
    y = min(max(y, 0.0), h - 1.0)
    x0, y0 = int(x), int(y)
    x1, y1 = min(x0 + 1, w - 1), min(y0 + 1, h - 1)
    fx, fy = x - x0, y - y0
    return (img[y0, x0] * (1 - fy) * (1 - fx) + img[y0, x1] * (1 - fy) * fx
            + img[y1, x0] * fy * (1 - fx) + img[y1, x1] * fy * fx)


def resize_reference(img, shape):
    """Pixel-center bilinear resize, one output pixel at a time."""
    th, tw = shape
    h, w = img.shape
    out = np.empty((th, tw))
    for i in range(th):
        for j in range(tw):
            y = (i + 0.5) * (h / th) - 0.5
            x = (j + 0.5) * (w / tw) - 0.5
            out[i, j] = bilinear_point(img, x, y)
    return out


def resample_reference(img, shape):
    """Downsampling in <=2x stages, same contract as the pipeline resampler."""
    h, w = img.shape
    th, tw = shape
    while h > 2 * th or w > 2 * tw:
        h = max(th, int(np.ceil(h / 2)))
        w = max(tw, int(np.ceil(w / 2)))
        img = resize_reference(img, (h, w))
    if (h, w) != (th, tw):
        img = resize_reference(img, (th, tw))
    return img


def across_scale_add_reference(levels, common_k):
    target = levels[common_k - 1].shape
    acc = np.zeros(target)
    for lv in levels:
        acc += resample_reference(np.asarray(lv, dtype=np.float64), target)
    return acc


# ---------------------------------------------------------------------------
# direct spatial convolution with replicate padding
# ---------------------------------------------------------------------------

def convolve_reference(img, kernel):
    """True convolution sum_p img[p] * kernel[x - p], replicate edges."""
    kh, kw = kernel.shape
    hy, hx = kh // 2, kw // 2
    pad = np.pad(img, ((hy, hy), (hx, hx)), mode="edge")
    win = np.lib.stride_tricks.sliding_window_view(pad, (kh, kw))
    flipped = kernel[::-1, ::-1]
    return np.einsum("ijkl,kl->ij", win, flipped)


# ---------------------------------------------------------------------------
# delay-and-sum beamforming oracle
# ---------------------------------------------------------------------------

def delay_and_sum_map(frame_samples, mic_dirs, radius, grid_az, grid_el,
                      sample_rate=44100, band=(300.0, 6500.0),
                      energy_keep=0.01):
    """Steered delay-and-sum power over the same steering grid.

    Phase-aligns each bin by the free-field arrival advance
    (radius/c) * (mic_dir . steer_dir).  Bins holding less than
    ``energy_keep`` of the strongest bin's energy are skipped; they add only
    a direction-independent floor.
    """
    n = frame_samples.shape[1]
    win = np.hanning(n)
    X = np.fft.rfft(frame_samples * win[None, :], axis=1)
    freqs = np.fft.rfftfreq(n, 1.0 / sample_rate)
    sel = (freqs >= band[0]) & (freqs <= band[1])
    X = X[:, sel]
    freqs = freqs[sel]
    energy = (np.abs(X) ** 2).sum(axis=0)
    keep = np.where(energy >= energy_keep * energy.max())[0]

    az, el = np.meshgrid(grid_az, grid_el, indexing="ij")
    dirs = np.stack([np.sin(el) * np.cos(az), np.sin(el) * np.sin(az),
                     np.cos(el)], axis=-1).reshape(-1, 3)
    geom_proj = dirs @ mic_dirs.T                      # (ndirs, nmics)
    power = np.zeros(geom_proj.shape[0])
    for j in keep:
        steer = np.exp(-2j * np.pi * freqs[j] * (radius / SPEED_OF_SOUND) * geom_proj)
        power += np.abs(steer @ X[:, j]) ** 2
    return power.reshape(len(grid_az), len(grid_el))


def argmax_2d(grid):
    i, j = np.unravel_index(int(np.argmax(grid)), grid.shape)
    return i, j


def azel_bin_distance(a, b, n_az=128):
    """Grid distance with azimuth wraparound, in bins (Chebyshev)."""
    da = abs(a[0] - b[0])
    da = min(da, n_az - da)
    return max(da, abs(a[1] - b[1]))
