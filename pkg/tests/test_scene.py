import json

import numpy as np
import pytest

from avsm.audio import mercator_pixel
from avsm.core import DataError
from avsm.scene import (AudioActor, SceneScript, Trajectory, VisualActor,
                        ground_truth, ground_truth_from_json,
                        ground_truth_to_json, render_audio, render_frame,
                        render_video)


def static_square(pos=(100, 128), color=(0.9, 0.0, 0.0), size=24):
    return VisualActor("square", color, size, Trajectory("static", pos))


def moving_square(start=(200, 120), vel=(2.0, 0.0), color=(0.0, 0.9, 0.0)):
    return VisualActor("square", color, 24, Trajectory("linear", start, vel))


def tone_actor(az=1.0, el=1.5, onset=0.0, offset=1.0, amp=0.4, freq=1000.0):
    return AudioActor({"kind": "tone", "freq": freq}, az, el, onset, offset, amp)


class TestRenderVideo:
    def test_static_scene_frames_identical(self):
        script = SceneScript(duration=0.5, visual_actors=[static_square()])
        frames = render_video(script)
        assert len(frames) == 5
        for f in frames[1:]:
            np.testing.assert_array_equal(f, frames[0])

    def test_motion_moves_centroid_exactly(self):
        script = SceneScript(duration=0.3, visual_actors=[moving_square()])
        frames = render_video(script)
        cents = []
        for f in frames:
            g = f[..., 1] - 0.3  # green square on gray
            w = np.clip(g, 0, None)
            yy, xx = np.mgrid[0:w.shape[0], 0:w.shape[1]]
            cents.append((np.sum(xx * w) / w.sum(), np.sum(yy * w) / w.sum()))
        for a, b in zip(cents, cents[1:]):
            assert b[0] - a[0] == pytest.approx(2.0, abs=1e-6)
            assert b[1] - a[1] == pytest.approx(0.0, abs=1e-6)

    def test_empty_script_background(self):
        frames = render_video(SceneScript(duration=0.2, background=(0, 0, 0)))
        for f in frames:
            np.testing.assert_array_equal(f, 0.0)

    def test_out_of_bounds_rejected(self):
        script = SceneScript(duration=1.0, visual_actors=[
            moving_square(start=(480, 120), vel=(10.0, 0.0))])
        with pytest.raises(DataError, match="trajectory"):
            render_video(script)

    def test_determinism_bitwise(self):
        script = SceneScript(duration=0.3, seed=9,
                             visual_actors=[static_square(), moving_square()])
        a = render_video(script)
        b = render_video(script)
        for f1, f2 in zip(a, b):
            np.testing.assert_array_equal(f1, f2)

    def test_antialiasing_preserves_isoluminance(self):
        # blending an iso-luminant color into an equal-luminance background
        # must keep the intensity plane exactly constant
        script = SceneScript(duration=0.1, background=(0.3, 0.3, 0.3),
                             visual_actors=[VisualActor(
                                 "square", (0.9, 0.0, 0.0), 24,
                                 Trajectory("static", (100.5, 127.3)))])
        f = render_frame(script, 0)
        intensity = f.mean(axis=2)
        np.testing.assert_allclose(intensity, 0.3, atol=1e-12)


class TestRenderAudio:
    def test_silence(self, geom):
        pcm = render_audio(SceneScript(duration=0.2), geom)
        np.testing.assert_array_equal(pcm, 0.0)

    def test_amplitude_linearity(self, geom):
        s1 = SceneScript(duration=0.1, audio_actors=[tone_actor(amp=0.2, offset=0.1)])
        s2 = SceneScript(duration=0.1, audio_actors=[tone_actor(amp=0.4, offset=0.1)])
        p1 = render_audio(s1, geom)
        p2 = render_audio(s2, geom)
        np.testing.assert_allclose(p2, 2.0 * p1, atol=1e-12)

    def test_determinism_bitwise(self, geom):
        script = SceneScript(duration=0.2, seed=11, noise_snr_db=25.0,
                             audio_actors=[tone_actor(offset=0.2, amp=0.3),
                                           AudioActor({"kind": "noise_burst"},
                                                      2.0, 1.2, 0.0, 0.2, 0.2)])
        a = render_audio(script, geom)
        b = render_audio(script, geom)
        np.testing.assert_array_equal(a, b)

    def test_onset_offset_gating(self, geom):
        script = SceneScript(duration=0.3, audio_actors=[
            tone_actor(onset=0.1, offset=0.2)])
        pcm = render_audio(script, geom)
        assert np.abs(pcm[:, :4000]).max() == 0.0
        assert np.abs(pcm[:, 5000:8000]).max() > 0.01
        assert np.abs(pcm[:, 9500:]).max() == 0.0

    def test_chirp_and_noise_waveforms(self, geom):
        script = SceneScript(duration=0.1, seed=2, audio_actors=[
            AudioActor({"kind": "chirp", "f0": 500.0, "f1": 2000.0},
                       1.0, 1.5, 0.0, 0.1, 0.25),
            AudioActor({"kind": "noise_burst", "band": [400, 3000]},
                       4.0, 1.7, 0.0, 0.1, 0.15)])
        pcm = render_audio(script, geom)
        assert np.isfinite(pcm).all()
        assert np.abs(pcm).max() <= 1.0

    def test_clipping_rejected(self, geom):
        script = SceneScript(duration=0.1, audio_actors=[
            tone_actor(amp=0.9, offset=0.1), tone_actor(amp=0.9, offset=0.1)])
        with pytest.raises(DataError, match="clips"):
            render_audio(script, geom)


class TestGroundTruth:
    def test_moving_silent_square_visual_only(self):
        script = SceneScript(duration=0.3, visual_actors=[moving_square()])
        gt = ground_truth(script)
        for fr in gt.frames:
            active = [e for e in fr if e.active]
            assert len(active) == 1
            assert active[0].modality == "visual"

    def test_static_tone_auditory_only(self):
        script = SceneScript(duration=0.3, audio_actors=[tone_actor(offset=0.3)])
        gt = ground_truth(script)
        for fr in gt.frames:
            active = [e for e in fr if e.active]
            assert len(active) == 1
            assert active[0].modality == "auditory"

    def test_talking_mover_audiovisual(self):
        w, h = 512, 256
        az = 300 / 512 * 2 * np.pi
        col, row = mercator_pixel(az, np.pi / 2, (h, w))
        script = SceneScript(duration=0.2, visual_actors=[
            static_square(pos=(col, row))],
            audio_actors=[tone_actor(az=az, el=np.pi / 2, offset=0.2)])
        gt = ground_truth(script)
        active = gt.active_events(0)
        assert len(active) == 1
        assert active[0].modality == "audiovisual"

    def test_projection_consistency_shared_path(self):
        # the auditory ground-truth centroid must equal mercator_pixel exactly
        az, el = 2.2, 1.3
        script = SceneScript(duration=0.1, audio_actors=[
            tone_actor(az=az, el=el, offset=0.1)])
        gt = ground_truth(script)
        ev = gt.active_events(0)[0]
        col, row = mercator_pixel(az, el, (256, 512))
        assert ev.centroid == (float(col), float(row))

    def test_inactive_before_onset(self):
        script = SceneScript(duration=0.3, audio_actors=[
            tone_actor(onset=0.2, offset=0.3)])
        gt = ground_truth(script)
        assert not gt.active_events(0)
        assert gt.active_events(2)

    def test_json_roundtrip(self):
        script = SceneScript(duration=0.2, visual_actors=[moving_square()],
                             audio_actors=[tone_actor(offset=0.2)])
        gt = ground_truth(script)
        back = ground_truth_from_json(ground_truth_to_json(gt))
        assert len(back.frames) == len(gt.frames)
        assert back.frames[0][0].modality == gt.frames[0][0].modality


class TestScriptJson:
    def test_roundtrip(self):
        script = SceneScript(duration=1.5, seed=3, noise_snr_db=30.0,
                             visual_actors=[static_square(), moving_square()],
                             audio_actors=[tone_actor()])
        back = SceneScript.from_json(script.to_json())
        assert back.duration == script.duration
        assert back.seed == 3
        assert len(back.visual_actors) == 2
        assert back.visual_actors[1].trajectory.kind == "linear"
        assert back.audio_actors[0].waveform["kind"] == "tone"

    def test_schema_fields(self):
        d = json.loads(SceneScript(duration=1.0).to_json())
        assert set(d) == {"duration", "panorama", "fps", "background", "seed",
                          "noise_snr_db", "visual_actors", "audio_actors"}
