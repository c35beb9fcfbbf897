"""Synthetic scenario generators used by the demo CLI and test fixtures."""
from __future__ import annotations

import numpy as np

from .core import GelFrame, SensorGeometry
from .synthgel import (
    ContactShape,
    MarkerField,
    apply_shear,
    make_marker_field,
    press_scene,
    press_shape,
    render_frame,
)

# Fig. 8 stimulus set: seven simple shapes
STIMULUS_SHAPES: dict[str, ContactShape] = {
    "horizontal_bar": ContactShape("bar", (2.0, 12.0), 1.0, orientation="horizontal"),
    "vertical_bar": ContactShape("bar", (2.0, 12.0), 1.0, orientation="vertical"),
    "double_horizontal_bar": ContactShape(
        "bar", (2.0, 12.0), 1.0, orientation="double_horizontal", spacing_mm=6.0
    ),
    "diagonal_bar": ContactShape("bar", (2.0, 12.0), 1.0, orientation="diagonal"),
    "two_dots": ContactShape("dot_pair", 2.0, 1.0, spacing_mm=6.0),
    "three_dots": ContactShape("dot_triple", 2.0, 1.0, spacing_mm=6.0),
    "four_dots": ContactShape("dot_quad", 2.0, 1.0, spacing_mm=6.0),
}

# concentric-circles object: central disk plus an outer ring, with an
# annular gap between radii 1.5 and 2.25 mm (20..30 px)
CONCENTRIC_GAP_BAND_PX = (20.0, 30.0)


def concentric_shapes(center_px=(160.0, 120.0), press_depth_mm=1.0):
    return [
        ContactShape("ring", (0.075, 1.5), press_depth_mm, center_px=center_px),
        ContactShape("ring", (2.25, 4.5), press_depth_mm, center_px=center_px),
    ]


def ring_gap_metric(
    depths: np.ndarray,
    points: np.ndarray,
    center_px: tuple[float, float],
    band_px: tuple[float, float] = CONCENTRIC_GAP_BAND_PX,
) -> tuple[int, float]:
    """(number of sample points inside the gap band, min depth among them)."""
    r = np.linalg.norm(points - np.asarray(center_px), axis=1)
    in_gap = (r >= band_px[0]) & (r <= band_px[1])
    if not in_gap.any():
        return 0, float("nan")
    return int(in_gap.sum()), float(depths[in_gap].min())


def _frames_for_press(
    markers: MarkerField,
    depth,
    record: dict,
    n: int,
    geometry: SensorGeometry,
) -> list[tuple[GelFrame, dict]]:
    return [(render_frame(depth, markers, geometry=geometry), dict(record)) for _ in range(n)]


def generate(
    name: str,
    frames: int = 20,
    geometry: SensorGeometry = SensorGeometry(),
    marker_rows: int = 8,
    marker_cols: int = 10,
) -> list[tuple[GelFrame, dict]]:
    """Build a named frame sequence; frame 0 always shows the rest state."""
    markers = make_marker_field(marker_rows, marker_cols, geometry)
    rest_depth = press_shape(
        ContactShape("sphere", 4.0, 0.0), geometry
    )
    rest = (render_frame(rest_depth, markers, geometry=geometry), {"scenario": name, "phase": "rest"})

    if name == "calibration":
        # marker-free sphere presses with truth depth, for LUT building
        out = []
        for radius in (3.0, 4.0, 5.0):
            for depth_mm in (0.25, 0.5, 1.0, 1.5, 2.0):
                for center in ((160.0, 120.0), (120.0, 90.0), (200.0, 150.0)):
                    shape = ContactShape("sphere", radius, depth_mm, center_px=center)
                    d = press_shape(shape, geometry)
                    out.append(
                        (render_frame(d, None, geometry=geometry), {"shape": shape.to_record()})
                    )
        return out

    if name == "sphere_press":
        shape = ContactShape("sphere", 4.0, 1.0)
        d = press_shape(shape, geometry)
        return [rest] + _frames_for_press(
            markers, d, {"scenario": name, "shape": shape.to_record()}, frames - 1, geometry
        )

    if name == "sphere_shear":
        # press a 1 mm sphere, ramp shear to (+5 px, 0) and +5 deg rotation
        shape = ContactShape("sphere", 4.0, 1.0)
        d = press_shape(shape, geometry)
        out = [rest]
        n = max(frames - 1, 1)
        for k in range(1, n + 1):
            frac = k / n
            sheared = apply_shear(markers, 5.0 * frac, 0.0, 5.0 * frac, geometry=geometry)
            out.append(
                (
                    render_frame(d, sheared, geometry=geometry),
                    {"scenario": name, "shape": shape.to_record()},
                )
            )
        return out

    if name == "concentric":
        d = press_scene(concentric_shapes(), geometry)
        return [rest] + _frames_for_press(
            markers, d, {"scenario": name, "object": "concentric"}, frames - 1, geometry
        )

    if name == "stimulus_set":
        per = max(frames // len(STIMULUS_SHAPES), 2)
        out = [rest]
        for shape_name, shape in STIMULUS_SHAPES.items():
            d = press_shape(shape, geometry)
            out += _frames_for_press(
                markers,
                d,
                {"scenario": name, "stimulus": shape_name, "shape": shape.to_record()},
                per,
                geometry,
            )
        return out

    if name == "tracking_stress":
        # slowly oscillating shear on a light press; used for throughput runs
        shape = ContactShape("sphere", 4.0, 0.5)
        d = press_shape(shape, geometry)
        out = [rest]
        for k in range(1, frames):
            t = k / 30.0
            sheared = apply_shear(
                markers,
                4.0 * np.sin(t),
                3.0 * np.cos(t),
                3.0 * np.sin(t / 2.0),
                geometry=geometry,
            )
            out.append(
                (render_frame(d, sheared, geometry=geometry), {"scenario": name})
            )
        return out

    raise ValueError(f"unknown scenario {name!r}")


SCENARIOS = (
    "calibration",
    "sphere_press",
    "sphere_shear",
    "concentric",
    "stimulus_set",
    "tracking_stress",
)
