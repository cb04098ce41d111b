"""Shared datatypes for the saliency pipeline."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Channel tags used throughout the pipeline.
INTENSITY = "intensity"
RG, GR, BY, YB = "rg", "gr", "by", "yb"
ORI_TAGS = ("ori_0", "ori_45", "ori_90", "ori_135")
MOTION = "motion"
AUDIO = "audio"
COLOR_TAGS = (RG, GR, BY, YB)
ALL_TAGS = (INTENSITY,) + COLOR_TAGS + ORI_TAGS + (MOTION, AUDIO)

THETAS = (0.0, np.pi / 4, np.pi / 2, 3 * np.pi / 4)
ORI_BY_TAG = dict(zip(ORI_TAGS, THETAS))


class DataError(Exception):
    """Raised for malformed or inconsistent input data."""


@dataclass
class FeatureMap:
    """A 2-D real-valued grid at a given pyramid scale and frame index."""

    grid: np.ndarray
    channel: str
    scale: int = 1
    t: int = 0

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=np.float64)
        if self.grid.ndim != 2:
            raise ValueError("feature map must be 2-D")

    @property
    def shape(self):
        return self.grid.shape


@dataclass
class FlowField:
    """Dense optical flow: horizontal u and vertical v, pixels/frame."""

    u: np.ndarray
    v: np.ndarray
    t: int = 0

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.float64)
        self.v = np.asarray(self.v, dtype=np.float64)
        if self.u.shape != self.v.shape:
            raise ValueError("u/v shape mismatch")


@dataclass
class Pyramid:
    """Ordered multi-scale stack; level k+1 dims = ceil(level k dims / factor)."""

    levels: list
    factor: float
    channel: str = ""
    t: int = 0

    def __len__(self):
        return len(self.levels)

    def __getitem__(self, k):
        return self.levels[k]

    def __iter__(self):
        return iter(self.levels)


@dataclass
class ConspicuityBundle:
    """The five per-feature conspicuity maps at the common pyramid scale,
    each rescaled to [0, 1]."""

    intensity: np.ndarray
    color: np.ndarray
    orientation: np.ndarray
    motion: np.ndarray
    audio: np.ndarray
    t: int = 0

    def as_dict(self):
        return {"intensity": self.intensity, "color": self.color,
                "orientation": self.orientation, "motion": self.motion,
                "audio": self.audio}


SALIENCY_KINDS = ("vsm", "asm", "avsm1", "avsm2", "avsm3")


@dataclass
class SaliencyMap:
    grid: np.ndarray
    kind: str
    t: int = 0

    def __post_init__(self):
        if self.kind not in SALIENCY_KINDS:
            raise ValueError(f"unknown saliency kind {self.kind!r}")


@dataclass
class SalientEvent:
    """One above-threshold connected component of a saliency map."""

    centroid: tuple  # (x, y) in panorama pixels
    area: int
    peak_value: float
    t: int = 0
    kind: str = ""

    def to_record(self):
        return {"t": self.t, "kind": self.kind,
                "centroid": [round(self.centroid[0], 3), round(self.centroid[1], 3)],
                "area": int(self.area), "peak": round(float(self.peak_value), 6)}


@dataclass
class GroundTruthEvent:
    modality: str            # visual | auditory | audiovisual
    centroid: tuple          # (x, y) panorama pixels
    active: bool = True


@dataclass
class GroundTruth:
    """Per-frame labelled events derived deterministically from a scene script."""

    frames: list = field(default_factory=list)  # list[list[GroundTruthEvent]]

    def active_events(self, t: int):
        return [e for e in self.frames[t] if e.active]
