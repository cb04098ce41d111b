import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from avsm.core import ALL_TAGS, ConspicuityBundle, DataError, SaliencyMap
from avsm.fusion import (asm, avsm1, avsm2, avsm3, conspicuity, extract_events,
                         read_float_map, vsm, write_float_map)
from avsm.grouping import group_channel
from avsm.pyramid import rescale01


def bundle_from(maps=None, shape=(24, 47), t=0):
    zeros = np.zeros(shape)
    m = {k: zeros for k in ("intensity", "color", "orientation", "motion", "audio")}
    if maps:
        m.update(maps)
    return ConspicuityBundle(m["intensity"], m["color"], m["orientation"],
                             m["motion"], m["audio"], t=t)


def peak_map(x, y, shape=(24, 47), value=1.0):
    m = np.zeros(shape)
    m[y, x] = value
    return m


class TestConspicuity:
    def test_all_zero_channels(self):
        pyramids = {tag: group_channel(np.zeros((64, 96)), tag) for tag in ALL_TAGS}
        b = conspicuity(pyramids)
        for m in b.as_dict().values():
            np.testing.assert_array_equal(m, 0.0)

    def test_missing_channel_rejected(self):
        pyramids = {tag: group_channel(np.zeros((64, 96)), tag)
                    for tag in ALL_TAGS if tag != "motion"}
        with pytest.raises(DataError, match="incomplete bundle"):
            conspicuity(pyramids)

    def test_channel_independence(self):
        img = np.zeros((128, 256))
        img[52:76, 120:144] = 1.0
        pyramids = {tag: group_channel(np.zeros((128, 256)), tag) for tag in ALL_TAGS}
        pyramids["intensity"] = group_channel(img, "intensity")
        b = conspicuity(pyramids)
        assert b.intensity.max() == 1.0
        for name in ("color", "orientation", "motion", "audio"):
            np.testing.assert_array_equal(b.as_dict()[name], 0.0)

    def test_red_square_peaks_in_color(self):
        frame = np.full((128, 256, 3), 0.3)
        frame[52:76, 120:144, 0] = 0.9
        frame[52:76, 120:144, 1:] = 0.0
        from avsm.pipeline import PipelineConfig, frame_channels
        from avsm.core import FeatureMap
        audio = FeatureMap(np.zeros((128, 256)), "audio")
        channels = frame_channels(frame, None, audio, 0, PipelineConfig())
        from avsm.pipeline import frame_bundle
        b = frame_bundle(channels, PipelineConfig())
        from avsm.pyramid import render_at
        base = render_at(b.color, (128, 256))
        iy, ix = np.unravel_index(np.argmax(base), base.shape)
        assert np.hypot(ix - 132, iy - 64) <= 4.0

    def test_outputs_in_unit_range(self):
        img = np.zeros((64, 128))
        img[20:40, 40:70] = 0.8
        pyramids = {tag: group_channel(img if tag == "intensity" else
                                       np.zeros((64, 128)), tag) for tag in ALL_TAGS}
        b = conspicuity(pyramids)
        for m in b.as_dict().values():
            assert m.min() >= 0.0 and m.max() <= 1.0


class TestVsm:
    def test_equal_maps_pass_through(self, rng):
        m = rng.uniform(0, 1, (10, 20))
        m = rescale01(m)
        b = bundle_from({k: m for k in ("intensity", "color", "orientation",
                                        "motion")}, shape=m.shape)
        np.testing.assert_allclose(vsm(b).grid, m, atol=1e-12)

    def test_motion_only(self):
        m = rescale01(peak_map(5, 5))
        out = vsm(bundle_from({"motion": m}))
        np.testing.assert_allclose(out.grid, 0.25 * m, atol=1e-12)

    def test_degenerate_weights(self, rng):
        m = rescale01(rng.uniform(0, 1, (10, 20)))
        b = bundle_from({"intensity": m}, shape=m.shape)
        out = vsm(b, weights=(1, 0, 0, 0))
        np.testing.assert_array_equal(out.grid, m)

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError, match="nonnegative"):
            vsm(bundle_from(), weights=(-0.1, 0.4, 0.4, 0.3))


class TestAvsm1:
    def test_five_equal_maps_identity(self, rng):
        m = rescale01(rng.uniform(0, 1, (12, 18)))
        b = bundle_from({k: m for k in ("intensity", "color", "orientation",
                                        "motion", "audio")}, shape=m.shape)
        np.testing.assert_allclose(avsm1(b).grid, m, atol=1e-12)

    def test_audio_only(self):
        m = rescale01(peak_map(3, 7))
        out = avsm1(bundle_from({"audio": m}))
        np.testing.assert_allclose(out.grid, 0.2 * m, atol=1e-12)

    def test_two_disjoint_peaks_equal(self):
        b = bundle_from({"intensity": peak_map(3, 3), "audio": peak_map(30, 12)})
        out = avsm1(b).grid
        assert out[3, 3] == pytest.approx(0.2, abs=1e-9)
        assert out[12, 30] == pytest.approx(0.2, abs=1e-9)
        assert abs(out[3, 3] - out[12, 30]) < 1e-9

    def test_weight_sum_enforced(self):
        with pytest.raises(ValueError, match="sum to 1"):
            avsm1(bundle_from(), weights=(0.3, 0.3, 0.3, 0.3, 0.3))

    def test_monotone_in_channels(self, rng):
        base = rescale01(rng.uniform(0, 1, (10, 10)))
        b1 = bundle_from({"audio": base}, shape=base.shape)
        bumped = np.clip(base + 0.2, 0, 1)
        b2 = bundle_from({"audio": bumped}, shape=base.shape)
        assert (avsm1(b2).grid >= avsm1(b1).grid - 1e-12).all()


class TestAvsm23:
    def test_avsm2_identical_maps(self, rng):
        m = rescale01(rng.uniform(0, 1, (9, 13)))
        v = SaliencyMap(m, "vsm")
        a = SaliencyMap(m, "asm")
        np.testing.assert_allclose(avsm2(v, a).grid, m, atol=1e-12)

    def test_avsm2_zero_audio(self, rng):
        m = rescale01(rng.uniform(0, 1, (9, 13)))
        out = avsm2(SaliencyMap(m, "vsm"), SaliencyMap(np.zeros_like(m), "asm"))
        np.testing.assert_allclose(out.grid, m / 2.0, atol=1e-12)

    def test_avsm2_disjoint_peaks_half(self):
        v = SaliencyMap(peak_map(2, 2), "vsm")
        a = SaliencyMap(peak_map(40, 20), "asm")
        out = avsm2(v, a).grid
        assert out[2, 2] == pytest.approx(0.5)
        assert out[20, 40] == pytest.approx(0.5)

    def test_avsm2_dim_mismatch(self):
        with pytest.raises(ValueError):
            avsm2(SaliencyMap(np.zeros((4, 4)), "vsm"),
                  SaliencyMap(np.zeros((5, 4)), "asm"))

    def test_avsm3_coincident_beats_disjoint(self):
        # raw score algebra: coincident unit peaks give 1+1+1 = 3,
        # disjoint ones give 1 each
        v = peak_map(2, 2)
        a_co = peak_map(2, 2)
        a_dis = peak_map(40, 20)
        raw_co = v + a_co + v * a_co
        raw_dis = v + a_dis + v * a_dis
        assert raw_co[2, 2] == 3.0
        assert raw_dis[2, 2] == 1.0 and raw_dis[20, 40] == 1.0
        out_co = avsm3(SaliencyMap(v, "vsm"), SaliencyMap(a_co, "asm")).grid
        out_dis = avsm3(SaliencyMap(v, "vsm"), SaliencyMap(a_dis, "asm")).grid
        assert out_co[2, 2] == 1.0                  # rescaled back to [0,1]
        assert out_dis[2, 2] == pytest.approx(1.0)  # max of its own map
        assert out_co.max() <= 1.0

    def test_avsm3_zero_audio_proportional_to_vsm(self, rng):
        m = rescale01(rng.uniform(0, 1, (9, 13)))
        out = avsm3(SaliencyMap(m, "vsm"), SaliencyMap(np.zeros_like(m), "asm"))
        np.testing.assert_allclose(out.grid, m, atol=1e-12)

    def test_avsm3_argmax_preserved(self, rng):
        m = rescale01(rng.uniform(0, 1, (9, 13)))
        out = avsm3(SaliencyMap(m, "vsm"), SaliencyMap(m, "asm"))
        assert np.argmax(out.grid) == np.argmax(m)

    def test_asm_is_rescaled_audio(self, rng):
        m = rng.uniform(0, 2, (6, 6))
        b = bundle_from({"audio": m}, shape=m.shape)
        np.testing.assert_allclose(asm(b).grid, rescale01(m), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_fusion_outputs_unit_range(a, b):
    m1 = rescale01(peak_map(2, 2, value=max(a, 1e-6)))
    m2 = rescale01(peak_map(10, 5, value=max(b, 1e-6)))
    bun = bundle_from({"intensity": m1, "audio": m2})
    for sal in (vsm(bun), avsm1(bun), asm(bun)):
        assert sal.grid.min() >= -1e-12
        assert sal.grid.max() <= 1.0 + 1e-12


class TestEvents:
    def test_empty_map(self):
        assert extract_events(np.zeros((20, 20))) == []

    def test_single_block(self):
        m = np.zeros((20, 20))
        m[5:10, 7:12] = 0.9
        events = extract_events(m, threshold=0.75)
        assert len(events) == 1
        ev = events[0]
        assert ev.area == 25
        assert ev.centroid == (9.0, 7.0)
        assert ev.peak_value == pytest.approx(0.9)

    def test_two_blocks(self):
        m = np.zeros((20, 40))
        m[2:5, 2:5] = 0.8
        m[10:13, 30:33] = 0.95
        assert len(extract_events(m)) == 2

    def test_threshold_strictly_greater(self):
        m = np.full((4, 4), 0.75)
        assert extract_events(m, 0.75) == []

    def test_diagonal_connectivity(self):
        m = np.zeros((6, 6))
        m[1, 1] = m[2, 2] = 0.9
        assert len(extract_events(m, connectivity=8)) == 1


class TestFloatMapIO:
    def test_roundtrip(self, tmp_path, rng):
        grid = rng.uniform(0, 1, (37, 53))
        p = tmp_path / "m.bin"
        write_float_map(p, grid, t=42)
        loaded, t = read_float_map(p)
        assert t == 42
        assert loaded.shape == (37, 53)
        np.testing.assert_allclose(loaded, grid, atol=1e-7)

    def test_header_layout(self, tmp_path):
        p = tmp_path / "m.bin"
        write_float_map(p, np.zeros((2, 3)), t=7)
        raw = p.read_bytes()
        assert raw[:4] == b"AVSM"
        assert len(raw) == 16 + 4 * 6
        import struct
        w, h, t = struct.unpack("<III", raw[4:16])
        assert (w, h, t) == (3, 2, 7)

    def test_magic_checked(self, tmp_path):
        p = tmp_path / "bad.bin"
        p.write_bytes(b"JUNK" + b"\0" * 20)
        with pytest.raises(DataError):
            read_float_map(p)
