import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gelpins import actuation as act
from gelpins import scenarios
from gelpins.actuation import (
    CommandRangeError,
    PinDisplayModel,
    SamplingGrid,
    decode_command,
    encode_all,
    encode_command,
    encode_multi_command,
    sample,
    step_display,
    to_targets,
)
from gelpins.core import DepthMap
from gelpins.synthgel import press_scene


class TestSample:
    def test_flat_map_zero(self):
        grid = SamplingGrid()
        out = sample(DepthMap(z=np.zeros((240, 320))), grid)
        assert out.shape == (24,)
        assert np.all(out == 0.0)

    def test_bilinear_oracle(self):
        rng = np.random.default_rng(2)
        z = rng.uniform(0, 2, (240, 320))
        grid = SamplingGrid(center_px=(160.5, 120.25), spacing_px=17.0, rotation_deg=33.0)
        got = sample(DepthMap(z=z), grid)
        for k, (x, y) in enumerate(grid.points()):
            x0, y0 = int(np.floor(x)), int(np.floor(y))
            fx, fy = x - x0, y - y0
            expect = (
                z[y0, x0] * (1 - fx) * (1 - fy)
                + z[y0, x0 + 1] * fx * (1 - fy)
                + z[y0 + 1, x0] * (1 - fx) * fy
                + z[y0 + 1, x0 + 1] * fx * fy
            )
            assert got[k] == pytest.approx(expect, abs=1e-9)

    def test_rotation_90_transposes_lattice(self):
        rng = np.random.default_rng(4)
        z = rng.uniform(0, 2, (240, 320))
        depth = DepthMap(z=z)
        grid = SamplingGrid(spacing_px=20.0, rotation_deg=90.0)
        got = sample(depth, grid).reshape(4, 6)
        # the rotated lattice equals the unrotated offsets mapped (x,y)->(-y,x)
        base = SamplingGrid(spacing_px=20.0, rotation_deg=0.0)
        pts = base.points()
        c = np.asarray(base.center_px)
        offs = pts - c
        rotated = np.stack([-offs[:, 1], offs[:, 0]], axis=1) + c
        from scipy.ndimage import map_coordinates

        expect = map_coordinates(z, [rotated[:, 1], rotated[:, 0]], order=1).reshape(4, 6)
        assert np.allclose(got, expect, atol=1e-9)

    def test_grid_outside_frame_errors_before_sampling(self):
        grid = SamplingGrid(center_px=(10.0, 10.0), spacing_px=45.0)
        with pytest.raises(ValueError, match="outside frame"):
            sample(DepthMap(z=np.zeros((240, 320))), grid)

    def test_concentric_spacing_regimes(self):
        # coarse grids miss the inter-circle gap; the 15 px grid resolves it
        depth = press_scene(scenarios.concentric_shapes())
        ridge = depth.peak()
        results = {}
        for spacing in (45.0, 30.0, 15.0):
            grid = SamplingGrid(spacing_px=spacing)
            depths = sample(depth, grid)
            n_gap, min_gap = scenarios.ring_gap_metric(
                depths, grid.points(), (160.0, 120.0)
            )
            results[spacing] = (n_gap, min_gap)
        assert results[45.0][0] == 0  # no sample lands in the gap band
        assert results[15.0][0] > 0
        assert results[15.0][1] < 0.5 * ridge


class TestToTargets:
    def test_zero_depth(self):
        t = to_targets(np.zeros(24))
        assert np.all(t.extension_mm == 0.0)
        assert np.all(t.pulse_qus == 4000)

    def test_midpoint(self):
        t = to_targets(np.full(24, 1.5), gain=1.0)
        assert np.all(t.extension_mm == 1.5)
        assert np.all(t.pulse_qus == 6000)

    def test_gain_clamp(self):
        t = to_targets(np.full(24, 2.0), gain=2.0)
        assert np.all(t.extension_mm == 3.0)
        assert np.all(t.pulse_qus == 8000)

    @settings(max_examples=50, deadline=None)
    @given(
        d1=st.floats(0, 3), d2=st.floats(0, 3), gain=st.floats(0.1, 5.0)
    )
    def test_monotone_in_depth(self, d1, d2, gain):
        lo, hi = sorted((d1, d2))
        t_lo = to_targets(np.full(24, lo), gain)
        t_hi = to_targets(np.full(24, hi), gain)
        assert np.all(t_hi.pulse_qus >= t_lo.pulse_qus)

    def test_quantization_below_paper_resolution(self):
        # 0.25 us steps over a 1000 us span: 3 mm / 4000 = 0.75 um <= 1.5 um
        quantum_mm = act.MAX_EXTENSION_MM / 4000.0
        assert quantum_mm == pytest.approx(0.00075)
        assert quantum_mm <= 0.0015


class TestEncode:
    def test_golden_frames(self):
        assert encode_command(0, 6000) == bytes([0x84, 0x00, 0x70, 0x2E])
        assert encode_command(23, 4000) == bytes([0x84, 0x17, 0x20, 0x1F])

    def test_channel_range(self):
        with pytest.raises(CommandRangeError):
            encode_command(24, 4000)
        with pytest.raises(CommandRangeError):
            encode_command(-1, 4000)

    def test_pulse_safety_bounds(self):
        with pytest.raises(CommandRangeError):
            encode_command(0, 1999)
        with pytest.raises(CommandRangeError):
            encode_command(0, 10001)
        assert len(encode_command(0, 2000)) == 4
        assert len(encode_command(0, 10000)) == 4

    @given(channel=st.integers(0, 23), pulse=st.integers(2000, 10000))
    def test_round_trip(self, channel, pulse):
        assert decode_command(encode_command(channel, pulse)) == (channel, pulse)

    def test_multi_target_layout(self):
        frame = encode_multi_command(4, [6000, 4000])
        assert frame == bytes([0x9F, 2, 4, 0x70, 0x2E, 0x20, 0x1F])

    def test_multi_target_validation(self):
        with pytest.raises(CommandRangeError):
            encode_multi_command(0, [6000])
        with pytest.raises(CommandRangeError):
            encode_multi_command(23, [6000, 6000])

    def test_encode_all_deterministic(self):
        t = to_targets(np.linspace(0, 3, 24))
        assert encode_all(t) == encode_all(t)
        assert len(encode_all(t)) == 24 * 4


class TestDisplayModel:
    def test_at_target_unchanged(self):
        model = PinDisplayModel(extension_mm=np.full(24, 1.0))
        targets = to_targets(np.full(24, 1.0))
        new, settled = step_display(model, targets, 0.05)
        assert np.array_equal(new.extension_mm, model.extension_mm)
        assert settled.all()

    def test_full_stroke_in_200ms(self):
        # 3 mm at 15 mm/s completes in 0.2 s
        model = PinDisplayModel()
        targets = to_targets(np.full(24, 3.0))
        dt, t = 0.01, 0.0
        while not step_display(model, targets, dt)[1].all():
            model, _ = step_display(model, targets, dt)
            t += dt
            assert t < 1.0
        assert t == pytest.approx(0.2, abs=dt)

    def test_slew_limit_exact(self):
        model = PinDisplayModel()
        targets = to_targets(np.full(24, 3.0))
        new, settled = step_display(model, targets, 0.05)
        assert np.all(new.extension_mm == pytest.approx(0.75))
        assert not settled.any()

    def test_never_exceeds_range(self):
        rng = np.random.default_rng(6)
        model = PinDisplayModel()
        for _ in range(50):
            targets = to_targets(rng.uniform(0, 5, 24), gain=rng.uniform(0.5, 3))
            model, _ = step_display(model, targets, 0.1)
            assert np.all(model.extension_mm >= 0.0)
            assert np.all(model.extension_mm <= 3.0)

    def test_dt_positive(self):
        with pytest.raises(ValueError):
            step_display(PinDisplayModel(), to_targets(np.zeros(24)), 0.0)
