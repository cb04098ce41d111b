"""Scripted synthetic audiovisual scenes with exact ground truth.

Scenes render deterministically from (script, seed): video frames as
anti-aliased shapes on a flat background, audio as free-field plane waves
with per-microphone fractional delays realized by evaluating each actor's
continuous-time waveform at the exact shifted sample times.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import (FRAME_SAMPLES, SAMPLE_RATE, SPEED_OF_SOUND,
                    MicArrayGeometry, mercator_pixel)
from .core import DataError, GroundTruth, GroundTruthEvent

COLOCATE_RADIUS = 10.0
MOTION_EVENT_THRESH = 0.5      # px/frame
CONTRAST_EVENT_THRESH = 0.15   # max channel offset from background
RAMP_SECONDS = 0.005


def _read_json_source(text_or_path) -> str:
    s = str(text_or_path)
    if s.lstrip().startswith("{"):
        return s
    return Path(s).read_text()


# ---------------------------------------------------------------------------
# script model
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    kind: str                  # static | linear
    position: tuple = (0.0, 0.0)
    velocity: tuple = (0.0, 0.0)   # px/frame

    def at(self, frame: int):
        if self.kind == "static":
            return (float(self.position[0]), float(self.position[1]))
        if self.kind == "linear":
            return (self.position[0] + self.velocity[0] * frame,
                    self.position[1] + self.velocity[1] * frame)
        raise DataError(f"unknown trajectory kind {self.kind!r}")

    def speed(self):
        return 0.0 if self.kind == "static" else float(np.hypot(*self.velocity))

    @classmethod
    def from_dict(cls, d):
        if d["kind"] == "static":
            return cls("static", tuple(d["position"]))
        return cls("linear", tuple(d["start"]), tuple(d["velocity"]))

    def to_dict(self):
        if self.kind == "static":
            return {"kind": "static", "position": list(self.position)}
        return {"kind": "linear", "start": list(self.position),
                "velocity": list(self.velocity)}


@dataclass
class VisualActor:
    shape: str                 # square | disk | bar
    color: tuple
    size: float                # side / diameter / length (bars are 2:1)
    trajectory: Trajectory

    @classmethod
    def from_dict(cls, d):
        return cls(d["shape"], tuple(d["color"]), float(d["size"]),
                   Trajectory.from_dict(d["trajectory"]))

    def to_dict(self):
        return {"shape": self.shape, "color": list(self.color),
                "size": self.size, "trajectory": self.trajectory.to_dict()}


@dataclass
class AudioActor:
    waveform: dict             # {"kind": tone|chirp|noise_burst, ...}
    azimuth: float
    elevation: float
    onset: float
    offset: float
    amplitude: float = 0.5

    @classmethod
    def from_dict(cls, d):
        direc = d["direction"]
        return cls(dict(d["waveform"]), float(direc["azimuth"]),
                   float(direc["elevation"]), float(d["onset"]),
                   float(d["offset"]), float(d.get("amplitude", 0.5)))

    def to_dict(self):
        return {"waveform": self.waveform,
                "direction": {"kind": "static", "azimuth": self.azimuth,
                              "elevation": self.elevation},
                "onset": self.onset, "offset": self.offset,
                "amplitude": self.amplitude}

    def direction_vector(self):
        return np.array([np.sin(self.elevation) * np.cos(self.azimuth),
                         np.sin(self.elevation) * np.sin(self.azimuth),
                         np.cos(self.elevation)])


@dataclass
class SceneScript:
    duration: float
    panorama: tuple = (512, 256)        # (width, height)
    fps: int = 10
    background: tuple = (0.3, 0.3, 0.3)
    seed: int = 0
    noise_snr_db: float | None = None
    visual_actors: list = field(default_factory=list)
    audio_actors: list = field(default_factory=list)

    @property
    def n_frames(self):
        return int(round(self.duration * self.fps))

    def validate(self):
        w, h = self.panorama
        for a in self.visual_actors:
            half = a.size / 2.0 + 1.0
            for t in range(self.n_frames):
                x, y = a.trajectory.at(t)
                if not (half <= x <= w - half and half <= y <= h - half):
                    raise DataError(f"trajectory leaves panorama at frame {t}")
        for a in self.audio_actors:
            if not (0.0 <= a.onset < a.offset <= self.duration + 1e-9):
                raise DataError("audio onset/offset outside scene duration")

    @classmethod
    def from_json(cls, text_or_path):
        raw = _read_json_source(text_or_path)
        d = json.loads(raw)
        return cls(duration=float(d["duration"]),
                   panorama=tuple(d.get("panorama", (512, 256))),
                   fps=int(d.get("fps", 10)),
                   background=tuple(d.get("background", (0.3, 0.3, 0.3))),
                   seed=int(d.get("seed", 0)),
                   noise_snr_db=d.get("noise_snr_db"),
                   visual_actors=[VisualActor.from_dict(v)
                                  for v in d.get("visual_actors", [])],
                   audio_actors=[AudioActor.from_dict(a)
                                 for a in d.get("audio_actors", [])])

    def to_json(self):
        return json.dumps({
            "duration": self.duration, "panorama": list(self.panorama),
            "fps": self.fps, "background": list(self.background),
            "seed": self.seed, "noise_snr_db": self.noise_snr_db,
            "visual_actors": [v.to_dict() for v in self.visual_actors],
            "audio_actors": [a.to_dict() for a in self.audio_actors]}, indent=2)


# ---------------------------------------------------------------------------
# video rendering
# ---------------------------------------------------------------------------

def _coverage_1d(n, lo, hi):
    """Per-pixel overlap of [lo, hi] with unit pixels centered at 0..n-1."""
    centers = np.arange(n, dtype=np.float64)
    return np.clip(np.minimum(centers + 0.5, hi) - np.maximum(centers - 0.5, lo),
                   0.0, 1.0)


def _shape_coverage(shape, w, h, cx, cy, size):
    if shape == "square":
        half_w = half_h = size / 2.0
    elif shape == "bar":
        half_w, half_h = size / 2.0, size / 4.0
    elif shape == "disk":
        yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
        d = np.hypot(xx - cx, yy - cy)
        return np.clip(size / 2.0 + 0.5 - d, 0.0, 1.0)
    else:
        raise DataError(f"unknown shape {shape!r}")
    covx = _coverage_1d(w, cx - half_w, cx + half_w)
    covy = _coverage_1d(h, cy - half_h, cy + half_h)
    return covy[:, None] * covx[None, :]


def render_frame(script: SceneScript, t: int) -> np.ndarray:
    """One (H, W, 3) frame in [0, 1]; shapes are anti-aliased by exact or
    near-exact pixel coverage, composited over the background."""
    w, h = script.panorama
    frame = np.empty((h, w, 3), dtype=np.float64)
    frame[:] = np.asarray(script.background)
    for actor in script.visual_actors:
        cx, cy = actor.trajectory.at(t)
        cov = _shape_coverage(actor.shape, w, h, cx, cy, actor.size)
        color = np.asarray(actor.color, dtype=np.float64)
        frame = frame * (1.0 - cov[..., None]) + color[None, None, :] * cov[..., None]
    return frame


def render_video(script: SceneScript):
    """Deterministic frame sequence at the script's frame rate."""
    script.validate()
    return [render_frame(script, t) for t in range(script.n_frames)]


# ---------------------------------------------------------------------------
# audio rendering
# ---------------------------------------------------------------------------

def _waveform_fn(actor: AudioActor, seed: int):
    kind = actor.waveform["kind"]
    if kind == "tone":
        freq = float(actor.waveform["freq"])
        phase = float(actor.waveform.get("phase", 0.0))

        def f(tau):
            return np.sin(2.0 * np.pi * freq * tau + phase)
        return f
    if kind == "chirp":
        f0 = float(actor.waveform["f0"])
        f1 = float(actor.waveform["f1"])
        span = max(actor.offset - actor.onset, 1e-9)

        def f(tau):
            rate = (f1 - f0) / span
            rel = tau - actor.onset
            return np.sin(2.0 * np.pi * (f0 * rel + 0.5 * rate * rel ** 2))
        return f
    if kind == "noise_burst":
        lo, hi = actor.waveform.get("band", (300.0, 6500.0))
        n_comp = int(actor.waveform.get("components", 64))
        rng = np.random.default_rng(seed)
        freqs = rng.uniform(lo, hi, n_comp)
        phases = rng.uniform(0.0, 2.0 * np.pi, n_comp)
        amp = 1.0 / np.sqrt(n_comp)  # RMS matches a unit-amplitude tone

        def f(tau):
            arg = 2.0 * np.pi * freqs[:, None] * tau[None, :] + phases[:, None]
            return amp * np.sin(arg).sum(axis=0)
        return f
    raise DataError(f"unknown waveform kind {kind!r}")


def _envelope(tau, onset, offset, ramp=RAMP_SECONDS):
    up = np.clip((tau - onset) / ramp, 0.0, 1.0)
    down = np.clip((offset - tau) / ramp, 0.0, 1.0)
    gate = ((tau >= onset) & (tau < offset)).astype(np.float64)
    smooth = 0.5 - 0.5 * np.cos(np.pi * np.minimum(up, down))
    return gate * smooth


def render_audio(script: SceneScript, geom: MicArrayGeometry) -> np.ndarray:
    """(64, n_samples) free-field mixture of the scripted plane waves.

    Each actor reaches microphone m advanced by (r/c) * (mic_dir . source_dir);
    the continuous waveform evaluated at the shifted times realizes exact
    fractional delays.  Rigid-sphere scattering is deliberately absent so the
    renderer stays independent of the beamformer's array model.
    """
    script.validate()
    n = script.n_frames * FRAME_SAMPLES
    t_axis = np.arange(n, dtype=np.float64) / SAMPLE_RATE
    out = np.zeros((64, n), dtype=np.float64)
    for i, actor in enumerate(sorted(script.audio_actors, key=lambda a: a.onset)):
        wave = _waveform_fn(actor, seed=script.seed * 1009 + i)
        tau_adv = (geom.radius / SPEED_OF_SOUND) * (geom.directions
                                                    @ actor.direction_vector())
        for m in range(64):
            tt = t_axis + tau_adv[m]
            out[m] += actor.amplitude * _envelope(tt, actor.onset, actor.offset) * wave(tt)
    if script.noise_snr_db is not None:
        rng = np.random.default_rng(script.seed + 777)
        sig_rms = np.sqrt(np.mean(out ** 2)) or 1.0
        noise_rms = sig_rms / (10.0 ** (script.noise_snr_db / 20.0))
        out = out + rng.normal(0.0, noise_rms, out.shape)
    peak = np.abs(out).max()
    if peak > 1.0:
        raise DataError("rendered audio clips; lower actor amplitudes")
    return out


# ---------------------------------------------------------------------------
# ground truth
# ---------------------------------------------------------------------------

def ground_truth(script: SceneScript,
                 colocate_radius: float = COLOCATE_RADIUS) -> GroundTruth:
    """Per-frame labelled events.

    Visual events come from moving or high-contrast actors; auditory events
    from active sound directions projected through the same Mercator mapping
    the audio pipeline uses; co-located pairs merge into one audiovisual
    event at the visual centroid.
    """
    script.validate()
    w, h = script.panorama
    bg = np.asarray(script.background)
    frames = []
    for t in range(script.n_frames):
        vis = []
        for a in script.visual_actors:
            contrast = float(np.max(np.abs(np.asarray(a.color) - bg)))
            qualifies = (a.trajectory.speed() >= MOTION_EVENT_THRESH
                         or contrast >= CONTRAST_EVENT_THRESH)
            vis.append((a.trajectory.at(t), qualifies))
        aud = []
        now = t / script.fps
        for a in script.audio_actors:
            active = a.onset <= now < a.offset
            col, row = mercator_pixel(a.azimuth, a.elevation, (h, w))
            aud.append(((float(col), float(row)), active))
        events = []
        used_aud = set()
        for (vpos, vok) in vis:
            if not vok:
                events.append(GroundTruthEvent("visual", vpos, active=False))
                continue
            partner = None
            for j, (apos, aok) in enumerate(aud):
                if j in used_aud or not aok:
                    continue
                if np.hypot(vpos[0] - apos[0], vpos[1] - apos[1]) <= colocate_radius:
                    partner = j
                    break
            if partner is not None:
                used_aud.add(partner)
                events.append(GroundTruthEvent("audiovisual", vpos, active=True))
            else:
                events.append(GroundTruthEvent("visual", vpos, active=True))
        for j, (apos, aok) in enumerate(aud):
            if j not in used_aud:
                events.append(GroundTruthEvent("auditory", apos, active=aok))
        frames.append(events)
    return GroundTruth(frames)


def ground_truth_to_json(gt: GroundTruth) -> str:
    return json.dumps({"frames": [[{"modality": e.modality,
                                    "centroid": [e.centroid[0], e.centroid[1]],
                                    "active": e.active} for e in fr]
                                  for fr in gt.frames]}, indent=2)


def ground_truth_from_json(text_or_path) -> GroundTruth:
    d = json.loads(_read_json_source(text_or_path))
    frames = [[GroundTruthEvent(e["modality"], tuple(e["centroid"]), e["active"])
               for e in fr] for fr in d["frames"]]
    return GroundTruth(frames)
