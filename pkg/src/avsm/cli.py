"""Command-line interface: synth, saliency, beamform, eval, overlay.

Exit codes: 0 success, 1 usage error, 2 data error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from . import fusion
from .audio import (Beamformer, MicArrayGeometry, SteeringGrid, frame_audio,
                    n_frames, project_to_panorama, read_wav, write_wav)
from .core import DataError
from .pipeline import (DatasetManifest, PipelineConfig, eval_recall,
                       overlay_isocontours, run_pipeline)
from .scene import (SceneScript, ground_truth, ground_truth_from_json,
                    ground_truth_to_json, render_audio, render_video)
from .vision import load_frame


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(1)


def _build_parser():
    p = _Parser(prog="avsm",
                description="Proto-object audiovisual saliency pipeline")
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--config", help="flat key=value config file")
        sp.add_argument("--maps", help="comma list: vsm,asm,avsm1,avsm2,avsm3")
        sp.add_argument("--threshold", type=float, help="salient-event threshold")
        sp.add_argument("--out-dir", required=True)

    sp = sub.add_parser("saliency", help="run the full pipeline on a dataset")
    sp.add_argument("--manifest", required=True)
    add_common(sp)
    sp.add_argument("--no-overlays", action="store_true")

    sp = sub.add_parser("beamform", help="audio map only")
    sp.add_argument("--manifest")
    sp.add_argument("--wav")
    sp.add_argument("--geometry")
    sp.add_argument("--config")
    sp.add_argument("--out-dir", required=True)

    sp = sub.add_parser("synth", help="generate a synthetic scene dataset")
    sp.add_argument("--script", required=True, help="scene JSON")
    sp.add_argument("--seed", type=int, help="override the script seed")
    sp.add_argument("--out-dir", required=True)

    sp = sub.add_parser("eval", help="recall report against ground truth")
    sp.add_argument("--events", required=True, help="events.jsonl from saliency")
    sp.add_argument("--truth", required=True, help="ground_truth.json from synth")
    sp.add_argument("--kind", default="avsm1")
    sp.add_argument("--match-radius", type=float, default=10.0)
    sp.add_argument("--out", help="write report JSON here (default stdout)")

    sp = sub.add_parser("overlay", help="draw threshold isocontours on a frame")
    sp.add_argument("--frame", required=True)
    sp.add_argument("--map", dest="map_path", required=True)
    sp.add_argument("--threshold", type=float, default=fusion.DEFAULT_THRESHOLD)
    sp.add_argument("--out", required=True)
    return p


def _load_config(args) -> PipelineConfig:
    cfg = PipelineConfig.from_file(args.config) if getattr(args, "config", None) \
        else PipelineConfig()
    overrides = {}
    if getattr(args, "maps", None):
        overrides["maps"] = args.maps
    if getattr(args, "threshold", None) is not None:
        overrides["threshold"] = args.threshold
    cfg.update(overrides)
    return cfg


def _cmd_saliency(args):
    manifest = DatasetManifest.from_file(args.manifest)
    cfg = _load_config(args)
    summary = run_pipeline(manifest, cfg, args.out_dir,
                           write_overlays=not args.no_overlays)
    print(json.dumps(summary, indent=2))


def _cmd_beamform(args):
    cfg = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    if args.manifest:
        mf = DatasetManifest.from_file(args.manifest)
        wav_path, geo_path = mf.audio_wav, mf.geometry
    else:
        wav_path, geo_path = args.wav, args.geometry
    if not wav_path:
        raise DataError("beamform needs --wav or a manifest with audio_wav")
    stream, _rate = read_wav(wav_path)
    if stream.shape[0] != 64:
        raise DataError(f"expected 64 audio channels, got {stream.shape[0]}")
    geom = MicArrayGeometry.from_file(geo_path) if geo_path \
        else MicArrayGeometry.default()
    bf = Beamformer(geom, SteeringGrid(), order=cfg.shb_order,
                    band_hz=(cfg.band_lo, cfg.band_hi), reg_eps=cfg.shb_reg,
                    model=cfg.shb_model)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for t in range(n_frames(stream)):
        power = bf.map(frame_audio(stream, t))
        pano = project_to_panorama(power, (256, 512), bf.grid, t=t)
        fusion.write_float_map(out / f"audio_{t:06d}.bin", pano.grid, t)
    print(f"wrote {n_frames(stream)} audio maps to {out}")


def _cmd_synth(args):
    script = SceneScript.from_json(Path(args.script).read_text())
    if args.seed is not None:
        script.seed = args.seed
    out = Path(args.out_dir)
    (out / "frames").mkdir(parents=True, exist_ok=True)
    frames = render_video(script)
    for t, fr in enumerate(frames):
        Image.fromarray((np.clip(fr, 0, 1) * 255).astype(np.uint8)).save(
            out / "frames" / f"frame_{t:06d}.png")
    geom = MicArrayGeometry.default()
    geom.to_file(out / "geometry.txt")
    write_wav(out / "audio.wav", render_audio(script, geom))
    (out / "ground_truth.json").write_text(ground_truth_to_json(ground_truth(script)))
    (out / "scene.json").write_text(script.to_json())
    DatasetManifest(frames_dir=str(out / "frames"), audio_wav=str(out / "audio.wav"),
                    geometry=str(out / "geometry.txt"),
                    fps=script.fps).to_file(out / "manifest.txt")
    print(f"synthesized {len(frames)} frames to {out}")


def _cmd_eval(args):
    events = []
    for line in Path(args.events).read_text().splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        if rec.get("kind", "") == args.kind:
            events.append(rec)
    truth = ground_truth_from_json(Path(args.truth).read_text())
    report = eval_recall(events, truth, radius=args.match_radius)
    report["kind"] = args.kind
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)


def _cmd_overlay(args):
    frame = load_frame(args.frame)
    grid, _t = fusion.read_float_map(args.map_path)
    if grid.shape != frame.shape[:2]:
        raise DataError("map and frame dimensions differ")
    overlay_isocontours(frame, grid, args.threshold).save(args.out)
    print(f"wrote {args.out}")


_COMMANDS = {"saliency": _cmd_saliency, "beamform": _cmd_beamform,
             "synth": _cmd_synth, "eval": _cmd_eval, "overlay": _cmd_overlay}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
