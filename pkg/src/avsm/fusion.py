"""Conspicuity maps, saliency fusion, and salient-event extraction."""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
from scipy import ndimage

from .core import (ALL_TAGS, COLOR_TAGS, INTENSITY, MOTION, AUDIO, ORI_TAGS,
                   ConspicuityBundle, DataError, SaliencyMap, SalientEvent)
from .grouping import normalize_itti
from .pyramid import across_scale_add, rescale01

DEFAULT_THRESHOLD = 0.75
VSM_WEIGHTS = (0.25, 0.25, 0.25, 0.25)
AVSM1_WEIGHTS = (0.2, 0.2, 0.2, 0.2, 0.2)

FLOAT_MAP_MAGIC = b"AVSM"


def _collapse(levels_list, common_k):
    """N(.) each level of each sub-channel, sum sub-channels, then add
    across scales."""
    n_levels = len(levels_list[0])
    summed = []
    for k in range(n_levels):
        acc = None
        for levels in levels_list:
            nk = normalize_itti(np.asarray(levels[k]))
            acc = nk if acc is None else acc + nk
        summed.append(acc)
    return across_scale_add(summed, common_k)


def conspicuity(grouping_pyramids: dict, common_k: int = 8, t: int = 0) -> ConspicuityBundle:
    """Collapse the eleven grouping pyramids into the five conspicuity maps.

    Color sums its four opponency sub-channels and orientation its four
    angles inside the across-scale addition; every output is rescaled to
    [0, 1] so channels with more sub-channels cannot dominate the fusion.
    """
    missing = [tag for tag in ALL_TAGS if tag not in grouping_pyramids]
    if missing:
        raise DataError(f"incomplete bundle: missing {', '.join(missing)}")
    g = grouping_pyramids
    intensity = rescale01(_collapse([g[INTENSITY]], common_k))
    color = rescale01(_collapse([g[tag] for tag in COLOR_TAGS], common_k))
    orientation = rescale01(_collapse([g[tag] for tag in ORI_TAGS], common_k))
    motion = rescale01(_collapse([g[MOTION]], common_k))
    audio = rescale01(_collapse([g[AUDIO]], common_k))
    return ConspicuityBundle(intensity, color, orientation, motion, audio, t=t)


def _check_weights(weights, n, must_sum_to_one=False):
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (n,):
        raise ValueError(f"expected {n} weights")
    if (w < 0).any():
        raise ValueError("weights must be nonnegative")
    if must_sum_to_one and abs(w.sum() - 1.0) > 1e-9:
        raise ValueError("weights must sum to 1")
    return w


def vsm(bundle: ConspicuityBundle, weights=VSM_WEIGHTS) -> SaliencyMap:
    """Visual saliency: weighted sum of rescaled I, C, O, M."""
    w = _check_weights(weights, 4)
    grid = (w[0] * rescale01(bundle.intensity) + w[1] * rescale01(bundle.color)
            + w[2] * rescale01(bundle.orientation) + w[3] * rescale01(bundle.motion))
    return SaliencyMap(grid, "vsm", bundle.t)


def asm(bundle: ConspicuityBundle) -> SaliencyMap:
    """Auditory saliency: audio is a single feature channel, so its rescaled
    conspicuity map is already the saliency map."""
    return SaliencyMap(rescale01(bundle.audio), "asm", bundle.t)


def avsm1(bundle: ConspicuityBundle, weights=AVSM1_WEIGHTS) -> SaliencyMap:
    """Early combination: five-way weighted sum, weights summing to 1."""
    w = _check_weights(weights, 5, must_sum_to_one=True)
    grid = (w[0] * rescale01(bundle.intensity) + w[1] * rescale01(bundle.color)
            + w[2] * rescale01(bundle.orientation) + w[3] * rescale01(bundle.motion)
            + w[4] * rescale01(bundle.audio))
    return SaliencyMap(grid, "avsm1", bundle.t)


def avsm2(vsm_map: SaliencyMap, asm_map: SaliencyMap) -> SaliencyMap:
    """Late combination: simple average of the two unisensory maps."""
    if vsm_map.grid.shape != asm_map.grid.shape:
        raise ValueError("saliency map dimension mismatch")
    grid = 0.5 * (rescale01(vsm_map.grid) + rescale01(asm_map.grid))
    return SaliencyMap(grid, "avsm2", vsm_map.t)


def avsm3(vsm_map: SaliencyMap, asm_map: SaliencyMap) -> SaliencyMap:
    """Late combination plus a pointwise product that boosts events salient
    in both modalities; the sum can reach 3 so the result is rescaled back
    to [0, 1] to keep one threshold comparable across map kinds."""
    if vsm_map.grid.shape != asm_map.grid.shape:
        raise ValueError("saliency map dimension mismatch")
    rv = rescale01(vsm_map.grid)
    ra = rescale01(asm_map.grid)
    return SaliencyMap(rescale01(rv + ra + rv * ra), "avsm3", vsm_map.t)


_CONN8 = np.ones((3, 3), dtype=int)


def extract_events(sal, threshold: float = DEFAULT_THRESHOLD,
                   connectivity: int = 8):
    """8-connected components of {pixel > threshold}, one event each."""
    if isinstance(sal, SaliencyMap):
        grid, t, kind = sal.grid, sal.t, sal.kind
    else:
        grid, t, kind = np.asarray(sal), 0, ""
    structure = _CONN8 if connectivity == 8 else None
    labels, n = ndimage.label(grid > threshold, structure=structure)
    events = []
    if n == 0:
        return events
    idx = np.arange(1, n + 1)
    coms = ndimage.center_of_mass(grid > threshold, labels, idx)
    areas = ndimage.sum_labels(np.ones_like(grid), labels, idx)
    peaks = ndimage.maximum(grid, labels, idx)
    for (cy, cx), area, peak in zip(np.atleast_2d(coms), np.atleast_1d(areas),
                                    np.atleast_1d(peaks)):
        events.append(SalientEvent(centroid=(float(cx), float(cy)),
                                   area=int(area), peak_value=float(peak),
                                   t=t, kind=kind))
    return events


# ---------------------------------------------------------------------------
# float-map binary format: 16-byte header (magic, w, h, t) + float32 rows
# ---------------------------------------------------------------------------

def write_float_map(path, grid: np.ndarray, t: int = 0):
    grid = np.asarray(grid, dtype=np.float32)
    h, w = grid.shape
    with open(path, "wb") as f:
        f.write(FLOAT_MAP_MAGIC)
        f.write(struct.pack("<III", w, h, int(t)))
        f.write(grid.astype("<f4").tobytes(order="C"))


def read_float_map(path):
    raw = Path(path).read_bytes()
    if raw[:4] != FLOAT_MAP_MAGIC:
        raise DataError("not a float-map file")
    w, h, t = struct.unpack("<III", raw[4:16])
    grid = np.frombuffer(raw[16:16 + 4 * w * h], dtype="<f4").reshape(h, w)
    return grid.astype(np.float64), int(t)


def append_events_jsonl(path, events):
    with open(path, "a") as f:
        for e in events:
            f.write(json.dumps(e.to_record()) + "\n")
