"""Hot numeric kernels: numba-compiled loops with vectorized numpy fallbacks.

The numba path is the default.  Set ``AVSM_NUMBA=0`` (or ``false``/``off``/
``no``) in the environment to select the pure-numpy implementations, e.g. on
platforms where numba is unavailable.  Both paths compute the same values to
floating-point roundoff; ``benchmarks/bench_kernels.py`` compares their speed.

All kernels take float64 2-D arrays and use replicate (edge-clamp) boundary
handling.  Resampling uses pixel-center alignment: output pixel ``i`` reads
input coordinate ``(i + 0.5) * in/out - 0.5``.
"""
from __future__ import annotations

import os

import numpy as np

_flag = os.environ.get("AVSM_NUMBA", "1").strip().lower()
NUMBA_REQUESTED = _flag not in ("0", "false", "off", "no")

try:
    if NUMBA_REQUESTED:
        from numba import njit
        NUMBA_ENABLED = True
    else:
        NUMBA_ENABLED = False
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_ENABLED = False

if not NUMBA_ENABLED:
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


# ---------------------------------------------------------------------------
# bilinear resize
# ---------------------------------------------------------------------------

def _resize_bilinear_np(src: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    in_h, in_w = src.shape
    yy = np.clip((np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5, 0.0, in_h - 1.0)
    xx = np.clip((np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5, 0.0, in_w - 1.0)
    y0 = np.minimum(yy.astype(np.int64), in_h - 1)
    x0 = np.minimum(xx.astype(np.int64), in_w - 1)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    fy = (yy - y0)[:, None]
    fx = (xx - x0)[None, :]
    a = src[np.ix_(y0, x0)]
    b = src[np.ix_(y0, x1)]
    c = src[np.ix_(y1, x0)]
    d = src[np.ix_(y1, x1)]
    return (a * (1 - fy) * (1 - fx) + b * (1 - fy) * fx
            + c * fy * (1 - fx) + d * fy * fx)


@njit(cache=True)
def _resize_bilinear_nb(src, out_h, out_w):  # pragma: no cover - jit
    in_h, in_w = src.shape
    out = np.empty((out_h, out_w), dtype=np.float64)
    for i in range(out_h):
        y = (i + 0.5) * (in_h / out_h) - 0.5
        if y < 0.0:
            y = 0.0
        if y > in_h - 1.0:
            y = in_h - 1.0
        y0 = int(y)
        if y0 > in_h - 1:
            y0 = in_h - 1
        y1 = y0 + 1 if y0 + 1 < in_h else in_h - 1
        fy = y - y0
        for j in range(out_w):
            x = (j + 0.5) * (in_w / out_w) - 0.5
            if x < 0.0:
                x = 0.0
            if x > in_w - 1.0:
                x = in_w - 1.0
            x0 = int(x)
            if x0 > in_w - 1:
                x0 = in_w - 1
            x1 = x0 + 1 if x0 + 1 < in_w else in_w - 1
            fx = x - x0
            out[i, j] = (src[y0, x0] * (1 - fy) * (1 - fx)
                         + src[y0, x1] * (1 - fy) * fx
                         + src[y1, x0] * fy * (1 - fx)
                         + src[y1, x1] * fy * fx)
    return out


# ---------------------------------------------------------------------------
# bilinear sampling at arbitrary coordinates (edge clamp)
# ---------------------------------------------------------------------------

def _sample_bilinear_np(src: np.ndarray, xq: np.ndarray, yq: np.ndarray) -> np.ndarray:
    in_h, in_w = src.shape
    x = np.clip(xq, 0.0, in_w - 1.0)
    y = np.clip(yq, 0.0, in_h - 1.0)
    x0 = np.minimum(x.astype(np.int64), in_w - 1)
    y0 = np.minimum(y.astype(np.int64), in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    y1 = np.minimum(y0 + 1, in_h - 1)
    fx = x - x0
    fy = y - y0
    return (src[y0, x0] * (1 - fy) * (1 - fx) + src[y0, x1] * (1 - fy) * fx
            + src[y1, x0] * fy * (1 - fx) + src[y1, x1] * fy * fx)


@njit(cache=True)
def _sample_bilinear_nb(src, xq, yq):  # pragma: no cover - jit
    in_h, in_w = src.shape
    n = xq.size
    xf = xq.ravel()
    yf = yq.ravel()
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        x = xf[i]
        y = yf[i]
        if x < 0.0:
            x = 0.0
        if x > in_w - 1.0:
            x = in_w - 1.0
        if y < 0.0:
            y = 0.0
        if y > in_h - 1.0:
            y = in_h - 1.0
        x0 = int(x)
        y0 = int(y)
        if x0 > in_w - 1:
            x0 = in_w - 1
        if y0 > in_h - 1:
            y0 = in_h - 1
        x1 = x0 + 1 if x0 + 1 < in_w else in_w - 1
        y1 = y0 + 1 if y0 + 1 < in_h else in_h - 1
        fx = x - x0
        fy = y - y0
        out[i] = (src[y0, x0] * (1 - fy) * (1 - fx) + src[y0, x1] * (1 - fy) * fx
                  + src[y1, x0] * fy * (1 - fx) + src[y1, x1] * fy * fx)
    return out.reshape(xq.shape)


# ---------------------------------------------------------------------------
# bilinear sampling with azimuthal wrap in x (for panorama projection)
# ---------------------------------------------------------------------------

def _sample_wrap_np(src: np.ndarray, xq: np.ndarray, yq: np.ndarray) -> np.ndarray:
    in_h, in_w = src.shape
    x = np.mod(xq, in_w)
    y = np.clip(yq, 0.0, in_h - 1.0)
    x0 = x.astype(np.int64) % in_w
    y0 = np.minimum(y.astype(np.int64), in_h - 1)
    x1 = (x0 + 1) % in_w
    y1 = np.minimum(y0 + 1, in_h - 1)
    fx = x - np.floor(x)
    fy = y - y0
    return (src[y0, x0] * (1 - fy) * (1 - fx) + src[y0, x1] * (1 - fy) * fx
            + src[y1, x0] * fy * (1 - fx) + src[y1, x1] * fy * fx)


@njit(cache=True)
def _sample_wrap_nb(src, xq, yq):  # pragma: no cover - jit
    in_h, in_w = src.shape
    n = xq.size
    xf = xq.ravel()
    yf = yq.ravel()
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        x = xf[i] % in_w
        if x < 0.0:
            x += in_w
        y = yf[i]
        if y < 0.0:
            y = 0.0
        if y > in_h - 1.0:
            y = in_h - 1.0
        x0 = int(x) % in_w
        y0 = int(y)
        if y0 > in_h - 1:
            y0 = in_h - 1
        x1 = (x0 + 1) % in_w
        y1 = y0 + 1 if y0 + 1 < in_h else in_h - 1
        fx = x - np.floor(x)
        fy = y - y0
        out[i] = (src[y0, x0] * (1 - fy) * (1 - fx) + src[y0, x1] * (1 - fy) * fx
                  + src[y1, x0] * fy * (1 - fx) + src[y1, x1] * fy * fx)
    return out.reshape(xq.shape)


# ---------------------------------------------------------------------------
# Horn-Schunck iteration loop
# ---------------------------------------------------------------------------
# u <- ubar - fx * (fx*ubar + fy*vbar + ft) / (alpha^2 + fx^2 + fy^2)
# where ubar is the 8-neighbour weighted average (weights 1/6 edge, 1/12
# diagonal) with replicate boundaries.

def _hs_average_np(f: np.ndarray) -> np.ndarray:
    p = np.pad(f, 1, mode="edge")
    return ((p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:]) / 6.0
            + (p[:-2, :-2] + p[:-2, 2:] + p[2:, :-2] + p[2:, 2:]) / 12.0)


def _hs_iterate_np(u, v, fx, fy, ft, alpha2, iters):
    denom = alpha2 + fx * fx + fy * fy
    for _ in range(iters):
        ubar = _hs_average_np(u)
        vbar = _hs_average_np(v)
        der = (fx * ubar + fy * vbar + ft) / denom
        u = ubar - fx * der
        v = vbar - fy * der
    return u, v


@njit(cache=True)
def _hs_iterate_nb(u, v, fx, fy, ft, alpha2, iters):  # pragma: no cover - jit
    h, w = u.shape
    denom = alpha2 + fx * fx + fy * fy
    un = np.empty_like(u)
    vn = np.empty_like(v)
    for _ in range(iters):
        for i in range(h):
            im = i - 1 if i > 0 else 0
            ip = i + 1 if i < h - 1 else h - 1
            for j in range(w):
                jm = j - 1 if j > 0 else 0
                jp = j + 1 if j < w - 1 else w - 1
                ubar = ((u[im, j] + u[ip, j] + u[i, jm] + u[i, jp]) / 6.0
                        + (u[im, jm] + u[im, jp] + u[ip, jm] + u[ip, jp]) / 12.0)
                vbar = ((v[im, j] + v[ip, j] + v[i, jm] + v[i, jp]) / 6.0
                        + (v[im, jm] + v[im, jp] + v[ip, jm] + v[ip, jp]) / 12.0)
                der = (fx[i, j] * ubar + fy[i, j] * vbar + ft[i, j]) / denom[i, j]
                un[i, j] = ubar - fx[i, j] * der
                vn[i, j] = vbar - fy[i, j] * der
        u, un = un, u
        v, vn = vn, v
    return u.copy(), v.copy()


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def _as64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def resize_bilinear(src: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Resize to (height, width) with pixel-center bilinear interpolation."""
    out_h, out_w = int(shape[0]), int(shape[1])
    if (out_h, out_w) == src.shape:
        return np.array(src, dtype=np.float64)
    if NUMBA_ENABLED:
        return _resize_bilinear_nb(_as64(src), out_h, out_w)
    return _resize_bilinear_np(_as64(src), out_h, out_w)


def sample_bilinear(src: np.ndarray, xq: np.ndarray, yq: np.ndarray) -> np.ndarray:
    """Sample src at fractional (x, y) coordinates, clamping at the borders."""
    if NUMBA_ENABLED:
        return _sample_bilinear_nb(_as64(src), _as64(xq), _as64(yq))
    return _sample_bilinear_np(_as64(src), _as64(xq), _as64(yq))


def sample_wrap_bilinear(src: np.ndarray, xq: np.ndarray, yq: np.ndarray) -> np.ndarray:
    """Sample with x wrapping (cyclic azimuth) and y clamped."""
    if NUMBA_ENABLED:
        return _sample_wrap_nb(_as64(src), _as64(xq), _as64(yq))
    return _sample_wrap_np(_as64(src), _as64(xq), _as64(yq))


def translate_bilinear(src: np.ndarray, dx: float, dy: float) -> np.ndarray:
    """Shift image content by (+dx, +dy) pixels; the output at p equals the
    input sampled at p - (dx, dy), with replicate boundaries."""
    h, w = src.shape
    if dx == int(dx) and dy == int(dy):
        idx = np.clip(np.arange(w) - int(dx), 0, w - 1)
        idy = np.clip(np.arange(h) - int(dy), 0, h - 1)
        return np.ascontiguousarray(src[np.ix_(idy, idx)], dtype=np.float64)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    return sample_bilinear(src, xx - dx, yy - dy)


def warp_bilinear(src: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Sample src at (x + u, y + v) per pixel (backward warp for flow)."""
    h, w = src.shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    return sample_bilinear(src, xx + u, yy + v)


def hs_iterate(u, v, fx, fy, ft, alpha: float, iters: int):
    """Run the Horn-Schunck update for a fixed number of iterations."""
    args = (_as64(u), _as64(v), _as64(fx), _as64(fy), _as64(ft),
            float(alpha) ** 2, int(iters))
    if NUMBA_ENABLED:
        return _hs_iterate_nb(*args)
    return _hs_iterate_np(*args)
