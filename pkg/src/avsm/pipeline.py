"""Dataset ingestion, configuration, orchestration and result emission."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from . import fusion, vision
from .audio import (FRAME_SAMPLES, Beamformer, MicArrayGeometry, SteeringGrid,
                    frame_audio, project_to_panorama, read_wav)
from .core import (ALL_TAGS, AUDIO, COLOR_TAGS, DataError, INTENSITY, MOTION,
                   ORI_TAGS, SALIENCY_KINDS, FeatureMap, SaliencyMap)
from .grouping import GroupingParams, group_channel
from .pyramid import SQRT2, render_at, rescale01
from .vision import HornSchunckFlow


@dataclass
class DatasetManifest:
    """Locations and alignment contract for one recorded dataset."""

    frames_dir: str
    pattern: str = "frame_{t:06d}.png"
    audio_wav: str = ""
    geometry: str = ""
    fps: int = 10

    @classmethod
    def from_file(cls, path):
        vals = _parse_kv(path)
        try:
            return cls(frames_dir=vals["frames_dir"],
                       pattern=vals.get("pattern", cls.pattern),
                       audio_wav=vals.get("audio_wav", ""),
                       geometry=vals.get("geometry", ""),
                       fps=int(vals.get("fps", 10)))
        except KeyError as exc:
            raise DataError(f"manifest missing key {exc}") from exc

    def to_file(self, path):
        lines = [f"frames_dir = {self.frames_dir}",
                 f"pattern = {self.pattern}",
                 f"audio_wav = {self.audio_wav}",
                 f"geometry = {self.geometry}",
                 f"fps = {self.fps}"]
        Path(path).write_text("\n".join(lines) + "\n")

    def frame_paths(self):
        base = Path(self.frames_dir)
        if not base.is_dir():
            raise DataError(f"frames directory not found: {base}")
        paths = []
        t = 0
        while True:
            p = base / self.pattern.format(t=t)
            if not p.exists():
                break
            paths.append(p)
            t += 1
        if not paths:
            raise DataError(f"no frames matching {self.pattern!r} in {base}")
        return paths


def _parse_kv(path):
    """Flat `key = value` config text; '#' starts a comment."""
    vals = {}
    p = Path(path)
    if not p.exists():
        raise DataError(f"file not found: {p}")
    for line in p.read_text().splitlines():
        line = line.split("#")[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"bad config line: {line!r}")
        key, val = line.split("=", 1)
        vals[key.strip()] = val.strip()
    return vals


@dataclass
class PipelineConfig:
    """Every tunable of the pipeline, file- and flag-overridable."""

    maps: tuple = SALIENCY_KINDS
    threshold: float = fusion.DEFAULT_THRESHOLD
    w_i: float = 0.25
    w_c: float = 0.25
    w_o: float = 0.25
    w_m: float = 0.25
    wa_i: float = 0.2
    wa_c: float = 0.2
    wa_o: float = 0.2
    wa_m: float = 0.2
    wa_a: float = 0.2
    pyramid_factor: float = SQRT2
    common_scale: int = 8
    flow_alpha: float = 0.5
    flow_iterations: int = 100
    flow_pyramid_levels: int = 4
    gabor_wavelength: float = vision.GABOR_WAVELENGTH
    gabor_sigma: float = vision.GABOR_SIGMA
    gabor_aspect: float = vision.GABOR_ASPECT
    dog_sigma_center: float = 2.0
    dog_sigma_surround: float = 4.0
    bo_offset: float = 3.0
    annulus_radius: float = 6.0
    annulus_thickness: float = 2.0
    local_max_thresh: float = 0.05
    activity_floor: float = 1e-9
    render_smooth_sigma: float = 8.0
    shb_order: int = 6
    shb_model: str = "rigid"
    shb_reg: float = 1e-2
    band_lo: float = 300.0
    band_hi: float = 6500.0

    _FLOATS = {"threshold", "w_i", "w_c", "w_o", "w_m", "wa_i", "wa_c", "wa_o",
               "wa_m", "wa_a", "pyramid_factor", "flow_alpha",
               "gabor_wavelength", "gabor_sigma", "gabor_aspect",
               "dog_sigma_center", "dog_sigma_surround", "bo_offset",
               "annulus_radius", "annulus_thickness", "local_max_thresh",
               "activity_floor", "render_smooth_sigma", "shb_reg",
               "band_lo", "band_hi"}
    _INTS = {"common_scale", "flow_iterations", "flow_pyramid_levels", "shb_order"}

    @classmethod
    def from_file(cls, path):
        cfg = cls()
        cfg.update(_parse_kv(path))
        return cfg

    def update(self, values: dict):
        for key, val in values.items():
            if val is None:
                continue
            if key == "maps":
                if isinstance(val, str):
                    val = tuple(s.strip() for s in val.split(",") if s.strip())
                bad = [m for m in val if m not in SALIENCY_KINDS]
                if bad:
                    raise DataError(f"unknown map kinds: {bad}")
                self.maps = tuple(val)
            elif key in self._FLOATS:
                setattr(self, key, float(val))
            elif key in self._INTS:
                setattr(self, key, int(val))
            elif key == "shb_model":
                self.shb_model = str(val)
            else:
                raise DataError(f"unknown config key {key!r}")
        return self

    def to_file(self, path):
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if f.name == "maps":
                v = ",".join(v)
            lines.append(f"{f.name} = {v}")
        Path(path).write_text("\n".join(lines) + "\n")

    def grouping_params(self):
        return GroupingParams(
            dog_sigma_center=self.dog_sigma_center,
            dog_sigma_surround=self.dog_sigma_surround,
            bo_offset=self.bo_offset,
            annulus_radius=self.annulus_radius,
            annulus_thickness=self.annulus_thickness,
            local_max_thresh=self.local_max_thresh,
            activity_floor=self.activity_floor,
            pyramid_factor=self.pyramid_factor)

    def flow_estimator(self):
        return HornSchunckFlow(self.flow_alpha, self.flow_iterations,
                               self.flow_pyramid_levels)


# ---------------------------------------------------------------------------
# single-frame computation
# ---------------------------------------------------------------------------

def frame_channels(frame_rgb, next_rgb, audio_panorama, t, config, flow_est=None):
    """The eleven scale-1 feature maps for one timestamp."""
    inten = vision.intensity_map(frame_rgb, t)
    rg, gr, by, yb = vision.color_opponency_maps(frame_rgb, t)
    oris = vision.orientation_maps(inten)
    if next_rgb is not None:
        est = flow_est or HornSchunckFlow(config.flow_alpha, config.flow_iterations,
                                          config.flow_pyramid_levels)
        nxt_int = vision.intensity_map(next_rgb, t + 1)
        flow = vision.optical_flow(inten.grid, nxt_int.grid, est, t)
        motion = vision.motion_magnitude(flow)
    else:
        motion = FeatureMap(np.zeros(inten.shape), MOTION, 1, t)
    channels = {INTENSITY: inten, "rg": rg, "gr": gr, "by": by, "yb": yb,
                MOTION: motion, AUDIO: audio_panorama}
    for tag, m in zip(ORI_TAGS, oris):
        channels[tag] = m
    return channels


def frame_bundle(channels, config):
    params = config.grouping_params()
    pyramids = {tag: group_channel(channels[tag], tag, params) for tag in ALL_TAGS}
    return fusion.conspicuity(pyramids, config.common_scale,
                              t=channels[INTENSITY].t)


def fuse_maps(bundle, config):
    out = {}
    vsm_map = fusion.vsm(bundle, (config.w_i, config.w_c, config.w_o, config.w_m))
    asm_map = fusion.asm(bundle)
    if "vsm" in config.maps:
        out["vsm"] = vsm_map
    if "asm" in config.maps:
        out["asm"] = asm_map
    if "avsm1" in config.maps:
        out["avsm1"] = fusion.avsm1(bundle, (config.wa_i, config.wa_c, config.wa_o,
                                             config.wa_m, config.wa_a))
    if "avsm2" in config.maps:
        out["avsm2"] = fusion.avsm2(vsm_map, asm_map)
    if "avsm3" in config.maps:
        out["avsm3"] = fusion.avsm3(vsm_map, asm_map)
    return out


def render_saliency(sal: SaliencyMap, base_shape, config) -> SaliencyMap:
    """Upsample a common-scale map to panorama resolution and restore the
    full [0, 1] range so one threshold serves every map kind."""
    grid = rescale01(render_at(sal.grid, base_shape, config.render_smooth_sigma))
    return SaliencyMap(grid, sal.kind, sal.t)


# ---------------------------------------------------------------------------
# isocontour overlay (marching squares)
# ---------------------------------------------------------------------------

def marching_squares(grid: np.ndarray, level: float):
    """Subpixel isocontour segments of grid == level.

    Returns a list of ((x0, y0), (x1, y1)) segments whose endpoints
    linearly interpolate the crossing, so sampling the map at an endpoint
    returns the level value up to interpolation error.
    """
    g = np.asarray(grid, dtype=np.float64)
    segs = []
    inside = g > level

    def interp(pa, va, pb, vb):
        f = (level - va) / (vb - va)
        return (pa[0] + f * (pb[0] - pa[0]), pa[1] + f * (pb[1] - pa[1]))

    cases = (inside[:-1, :-1].astype(np.uint8) << 3
             | inside[:-1, 1:].astype(np.uint8) << 2
             | inside[1:, 1:].astype(np.uint8) << 1
             | inside[1:, :-1].astype(np.uint8))
    for i, j in np.argwhere((cases != 0) & (cases != 15)):
        tl, tr = g[i, j], g[i, j + 1]
        bl, br = g[i + 1, j], g[i + 1, j + 1]
        case = int(cases[i, j])
        pts = {}
        if inside[i, j] != inside[i, j + 1]:
            pts["top"] = interp((j, i), tl, (j + 1, i), tr)
        if inside[i, j + 1] != inside[i + 1, j + 1]:
            pts["right"] = interp((j + 1, i), tr, (j + 1, i + 1), br)
        if inside[i + 1, j] != inside[i + 1, j + 1]:
            pts["bottom"] = interp((j, i + 1), bl, (j + 1, i + 1), br)
        if inside[i, j] != inside[i + 1, j]:
            pts["left"] = interp((j, i), tl, (j, i + 1), bl)
        edges = {
            1: ("bottom", "left"), 2: ("right", "bottom"), 3: ("right", "left"),
            4: ("top", "right"), 6: ("top", "bottom"), 7: ("top", "left"),
            8: ("left", "top"), 9: ("bottom", "top"), 11: ("right", "top"),
            12: ("left", "right"), 13: ("bottom", "right"),
            14: ("left", "bottom"),
            5: ("left", "top", "right", "bottom"),
            10: ("top", "right", "bottom", "left"),
        }[case]
        for a, b in zip(edges[::2], edges[1::2]):
            segs.append((pts[a], pts[b]))
    return segs


def overlay_isocontours(frame_rgb: np.ndarray, sal_grid: np.ndarray,
                        threshold: float = fusion.DEFAULT_THRESHOLD) -> Image.Image:
    """Red threshold isocontours over the input frame."""
    img = Image.fromarray((np.clip(frame_rgb, 0, 1) * 255).astype(np.uint8))
    draw = ImageDraw.Draw(img)
    for (x0, y0), (x1, y1) in marching_squares(sal_grid, threshold):
        draw.line([(x0, y0), (x1, y1)], fill=(255, 0, 0), width=1)
    return img


# ---------------------------------------------------------------------------
# full runs and evaluation
# ---------------------------------------------------------------------------

def run_pipeline(manifest: DatasetManifest, config: PipelineConfig, out_dir,
                 write_overlays: bool = True) -> dict:
    """Process every frame of a dataset: saliency maps, overlays, events.

    Outputs per frame and map kind: <kind>_<t:06d>.bin float maps (and .png
    overlays), plus events.jsonl and run_summary.json.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = manifest.frame_paths()
    frames = [vision.load_frame(p) for p in paths]
    base_shape = frames[0].shape[:2]
    for i, f in enumerate(frames):
        if f.shape[:2] != base_shape:
            raise DataError(f"frame {i} size differs from frame 0")

    if manifest.audio_wav:
        stream, rate = read_wav(manifest.audio_wav)
        if stream.shape[0] != 64:
            raise DataError(f"expected 64 audio channels, got {stream.shape[0]}")
        if rate * len(frames) > stream.shape[1] * manifest.fps:
            raise DataError("alignment error: audio shorter than video")
        geom = (MicArrayGeometry.from_file(manifest.geometry)
                if manifest.geometry else MicArrayGeometry.default())
        beamformer = Beamformer(geom, SteeringGrid(), order=config.shb_order,
                                band_hz=(config.band_lo, config.band_hi),
                                reg_eps=config.shb_reg, model=config.shb_model)
    else:
        stream, beamformer, geom = None, None, None

    flow_est = config.flow_estimator()
    events_path = out / "events.jsonl"
    events_path.write_text("")
    summary = {"frames": len(frames), "maps": list(config.maps),
               "threshold": config.threshold, "events": {k: 0 for k in config.maps}}

    for t in range(len(frames)):
        if beamformer is not None:
            power = beamformer.map(frame_audio(stream, t))
            audio_pan = project_to_panorama(power, base_shape, beamformer.grid, t=t)
        else:
            audio_pan = FeatureMap(np.zeros(base_shape), AUDIO, 1, t)
        nxt = frames[t + 1] if t + 1 < len(frames) else None
        channels = frame_channels(frames[t], nxt, audio_pan, t, config, flow_est)
        bundle = frame_bundle(channels, config)
        for kind, sal in fuse_maps(bundle, config).items():
            sal = render_saliency(sal, base_shape, config)
            fusion.write_float_map(out / f"{kind}_{t:06d}.bin", sal.grid, t)
            events = fusion.extract_events(sal, config.threshold)
            summary["events"][kind] += len(events)
            fusion.append_events_jsonl(events_path, events)
            if write_overlays:
                overlay_isocontours(frames[t], sal.grid, config.threshold).save(
                    out / f"{kind}_{t:06d}.png")

    (out / "run_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary


def eval_recall(events, truth, radius: float = 10.0) -> dict:
    """Greedy centroid matching of detections against ground truth.

    ``events``: list of SalientEvent (or dict records) for one map kind.
    ``truth``: GroundTruth.  Returns per-modality recall plus counts.
    """
    by_frame: dict = {}
    for e in events:
        rec = e.to_record() if hasattr(e, "to_record") else e
        by_frame.setdefault(int(rec["t"]), []).append(
            (float(rec["centroid"][0]), float(rec["centroid"][1])))
    matched = {"visual": 0, "auditory": 0, "audiovisual": 0}
    totals = {"visual": 0, "auditory": 0, "audiovisual": 0}
    false_pos = 0
    for t, frame_events in enumerate(truth.frames):
        dets = list(by_frame.get(t, []))
        used = [False] * len(dets)
        for ev in frame_events:
            if not ev.active:
                continue
            totals[ev.modality] += 1
            best, best_d = -1, radius
            for i, (dx, dy) in enumerate(dets):
                if used[i]:
                    continue
                d = np.hypot(dx - ev.centroid[0], dy - ev.centroid[1])
                if d <= best_d:
                    best, best_d = i, d
            if best >= 0:
                used[best] = True
                matched[ev.modality] += 1
        false_pos += used.count(False)
    recall = {m: (matched[m] / totals[m] if totals[m] else None)
              for m in totals}
    total_m = sum(matched.values())
    total_t = sum(totals.values())
    return {"recall": recall,
            "overall_recall": (total_m / total_t) if total_t else None,
            "matched": matched, "totals": totals, "false_positives": false_pos}
