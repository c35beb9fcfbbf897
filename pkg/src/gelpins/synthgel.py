"""Synthetic vision-based tactile sensor.

Presses parametric shapes into a virtual elastomer, shades the surface with
three directional lights and overlays a displaceable marker grid.  Frames carry
their own ground truth, so downstream modules can be tested without hardware.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict, replace
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter

from .core import DepthMap, FrameTruth, GelFrame, SensorGeometry

SHAPE_KINDS = (
    "sphere",
    "cube",
    "cylinder",
    "dot_pair",
    "dot_triple",
    "dot_quad",
    "bar",
    "ring",
)
BAR_ORIENTATIONS = ("horizontal", "vertical", "diagonal", "double_horizontal")


@dataclass(frozen=True)
class ContactShape:
    """Rigid indenter pressed into the gel.

    size_mm meaning per kind: sphere/dot_* -> radius; cube -> edge length;
    cylinder -> (radius, length); bar -> (width, length); ring -> (inner
    radius, outer radius) of a flat annular stamp.
    """

    kind: str
    size_mm: float | tuple[float, ...]
    press_depth_mm: float
    center_px: tuple[float, float] = (160.0, 120.0)  # (x, y)
    orientation: str = "horizontal"  # bar only
    spacing_mm: float = 4.0  # dot groups: centre-to-centre spacing

    def __post_init__(self):
        if self.kind not in SHAPE_KINDS:
            raise ValueError(f"unknown shape kind {self.kind!r}")
        sizes = np.atleast_1d(np.asarray(self.size_mm, dtype=float))
        if np.any(sizes <= 0):
            raise ValueError(f"size parameters must be positive, got {self.size_mm}")
        if self.press_depth_mm < 0:
            raise ValueError("press depth must be >= 0")
        if self.kind == "bar" and self.orientation not in BAR_ORIENTATIONS:
            raise ValueError(f"unknown bar orientation {self.orientation!r}")

    def sizes(self) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.size_mm, dtype=float))

    def to_record(self) -> dict:
        d = asdict(self)
        d["size_mm"] = list(self.sizes())
        return d

    @classmethod
    def from_record(cls, d: dict) -> "ContactShape":
        d = dict(d)
        size = d["size_mm"]
        d["size_mm"] = size[0] if len(size) == 1 else tuple(size)
        d["center_px"] = tuple(d["center_px"])
        return cls(**d)


@dataclass
class MarkerField:
    """Regular marker grid with per-marker displacement in px."""

    rows: int
    cols: int
    rest_positions: np.ndarray  # (N, 2) (x, y)
    radius_px: float = 4.0
    displacement: np.ndarray = None  # (N, 2)
    intensity: float = 0.05
    shear: tuple[float, float, float] | None = None  # truth (dx, dy, dphi_deg)

    def __post_init__(self):
        self.rest_positions = np.asarray(self.rest_positions, dtype=float)
        if self.displacement is None:
            self.displacement = np.zeros_like(self.rest_positions)
        else:
            self.displacement = np.asarray(self.displacement, dtype=float)
        if self.displacement.shape != self.rest_positions.shape:
            raise ValueError("displacement shape must match rest positions")

    @property
    def n(self) -> int:
        return len(self.rest_positions)

    @property
    def positions(self) -> np.ndarray:
        return self.rest_positions + self.displacement


def make_marker_field(
    rows: int = 8,
    cols: int = 10,
    geometry: SensorGeometry = SensorGeometry(),
    radius_px: float = 4.0,
    margin_px: float = 20.0,
) -> MarkerField:
    """Regular marker grid strictly inside the frame."""
    h, w = geometry.shape
    xs = np.linspace(margin_px, w - 1 - margin_px, cols)
    ys = np.linspace(margin_px, h - 1 - margin_px, rows)
    gx, gy = np.meshgrid(xs, ys)
    rest = np.stack([gx.ravel(), gy.ravel()], axis=1)
    return MarkerField(rows=rows, cols=cols, rest_positions=rest, radius_px=radius_px)


@dataclass(frozen=True)
class Illumination:
    """Three directional lights 120 degrees apart, slightly elevated."""

    base: float = 0.35
    gain: float = 0.5
    azimuths_deg: tuple[float, float, float] = (0.0, 120.0, 240.0)
    elevation_deg: float = 30.0


def _indenter_clearance(shape: ContactShape, geometry: SensorGeometry) -> np.ndarray:
    """Height of the indenter surface above its lowest point, mm (inf = no part)."""
    h, w = geometry.shape
    s = geometry.mm_per_px
    yy, xx = np.mgrid[0:h, 0:w].astype(float)
    cx, cy = shape.center_px
    x_mm = (xx - cx) * s
    y_mm = (yy - cy) * s
    sizes = shape.sizes()
    inf = np.full((h, w), np.inf)

    def sphere_clear(dx, dy, radius):
        r2 = dx**2 + dy**2
        inside = r2 < radius**2
        out = np.full_like(dx, np.inf)
        out[inside] = radius - np.sqrt(radius**2 - r2[inside])
        return out

    if shape.kind == "sphere":
        return sphere_clear(x_mm, y_mm, sizes[0])
    if shape.kind == "cube":
        half = sizes[0] / 2.0
        inside = (np.abs(x_mm) <= half) & (np.abs(y_mm) <= half)
        return np.where(inside, 0.0, np.inf)
    if shape.kind == "cylinder":
        radius, length = sizes if len(sizes) == 2 else (sizes[0], sizes[0] * 3)
        d = np.abs(y_mm)  # axis along x
        inside = (d < radius) & (np.abs(x_mm) <= length / 2.0)
        out = inf.copy()
        out[inside] = radius - np.sqrt(radius**2 - d[inside] ** 2)
        return out
    if shape.kind in ("dot_pair", "dot_triple", "dot_quad"):
        radius = sizes[0]
        n = {"dot_pair": 2, "dot_triple": 3, "dot_quad": 4}[shape.kind]
        half = shape.spacing_mm / 2.0
        if n == 2:
            centers = [(-half, 0.0), (half, 0.0)]
        elif n == 3:
            # equilateral triangle around the centre
            rr = shape.spacing_mm / np.sqrt(3.0)
            centers = [
                (rr * np.cos(a), rr * np.sin(a))
                for a in np.deg2rad([90.0, 210.0, 330.0])
            ]
        else:
            centers = [(-half, -half), (half, -half), (-half, half), (half, half)]
        out = inf.copy()
        for ox, oy in centers:
            out = np.minimum(out, sphere_clear(x_mm - ox, y_mm - oy, radius))
        return out
    if shape.kind == "bar":
        width, length = sizes if len(sizes) == 2 else (sizes[0], sizes[0] * 4)
        if shape.orientation == "diagonal":
            c, sn = np.cos(np.deg2rad(45.0)), np.sin(np.deg2rad(45.0))
            u, v = c * x_mm + sn * y_mm, -sn * x_mm + c * y_mm
        elif shape.orientation == "vertical":
            u, v = y_mm, x_mm
        else:
            u, v = x_mm, y_mm
        inside = (np.abs(u) <= length / 2.0) & (np.abs(v) <= width / 2.0)
        if shape.orientation == "double_horizontal":
            gap = shape.spacing_mm
            inside = (np.abs(u) <= length / 2.0) & (
                np.abs(np.abs(v) - gap / 2.0) <= width / 2.0
            )
        return np.where(inside, 0.0, np.inf)
    if shape.kind == "ring":
        inner, outer = sizes
        r = np.sqrt(x_mm**2 + y_mm**2)
        inside = (r >= inner) & (r <= outer)
        return np.where(inside, 0.0, np.inf)
    raise AssertionError(f"unhandled kind {shape.kind}")


def press_shape(
    shape: ContactShape,
    geometry: SensorGeometry = SensorGeometry(),
    smooth: bool = True,
) -> DepthMap:
    """Depth field of a rigid indenter pressed into the gel.

    z = max(0, press_depth - clearance), then a Gaussian membrane low-pass.
    """
    if shape.press_depth_mm > geometry.thickness_mm:
        raise ValueError(
            f"press depth {shape.press_depth_mm} mm exceeds gel thickness "
            f"{geometry.thickness_mm} mm"
        )
    clearance = _indenter_clearance(shape, geometry)
    z = np.maximum(0.0, shape.press_depth_mm - clearance)
    if smooth and geometry.smoothing_sigma_px > 0:
        z = gaussian_filter(z, sigma=geometry.smoothing_sigma_px)
    return DepthMap(z=z, mm_per_px=geometry.mm_per_px)


def press_scene(
    shapes: list[ContactShape],
    geometry: SensorGeometry = SensorGeometry(),
    smooth: bool = True,
) -> DepthMap:
    """Composite press: pointwise max over several indenters."""
    z = np.zeros(geometry.shape)
    for shape in shapes:
        z = np.maximum(z, press_shape(shape, geometry, smooth=False).z)
    if smooth and geometry.smoothing_sigma_px > 0:
        z = gaussian_filter(z, sigma=geometry.smoothing_sigma_px)
    return DepthMap(z=z, mm_per_px=geometry.mm_per_px)


def shade(depth: DepthMap, lights: Illumination = Illumination()) -> np.ndarray:
    """Tri-directional Lambertian-style shading of the height field.

    A flat surface renders at exactly the base level; positive gradient along a
    light's in-plane direction brightens that channel.
    """
    gy, gx = np.gradient(depth.z, depth.mm_per_px)
    norm = np.sqrt(1.0 + gx**2 + gy**2)
    nx, ny, nz = -gx / norm, -gy / norm, 1.0 / norm
    elev = np.deg2rad(lights.elevation_deg)
    out = np.empty(depth.z.shape + (3,))
    for c, az_deg in enumerate(lights.azimuths_deg):
        az = np.deg2rad(az_deg)
        lx, ly, lz = np.cos(az) * np.cos(elev), np.sin(az) * np.cos(elev), np.sin(elev)
        ndotl = nx * lx + ny * ly + nz * lz
        out[..., c] = lights.base + lights.gain * (ndotl - np.sin(elev))
    return np.clip(out, 0.0, 1.0)


def render_frame(
    depth: DepthMap,
    markers: MarkerField | None = None,
    lights: Illumination = Illumination(),
    geometry: SensorGeometry = SensorGeometry(),
    noise_sigma: float = 0.0,
    rng: np.random.Generator | None = None,
) -> GelFrame:
    """Render an RGB frame from a depth field plus marker overlay."""
    if depth.shape != geometry.shape:
        raise ValueError(f"depth shape {depth.shape} != frame shape {geometry.shape}")
    pixels = shade(depth, lights)
    truth = FrameTruth(depth=depth)
    if markers is not None:
        _draw_markers(pixels, markers)
        truth.shear = markers.shear
        truth.marker_rest = markers.rest_positions.copy()
        truth.marker_pos = markers.positions.copy()
    if noise_sigma > 0:
        rng = rng or np.random.default_rng(0)
        pixels = pixels + rng.normal(0.0, noise_sigma, pixels.shape)
    pixels = np.clip(pixels, 0.0, 1.0)
    return GelFrame(pixels=pixels, mm_per_px=geometry.mm_per_px, truth=truth)


def _draw_markers(pixels: np.ndarray, markers: MarkerField) -> None:
    """Blend dark disks at displaced marker positions (soft 1 px rim)."""
    h, w = pixels.shape[:2]
    r = markers.radius_px
    pad = int(np.ceil(r)) + 2
    for x, y in markers.positions:
        x0, x1 = max(0, int(x) - pad), min(w, int(x) + pad + 1)
        y0, y1 = max(0, int(y) - pad), min(h, int(y) + pad + 1)
        yy, xx = np.mgrid[y0:y1, x0:x1].astype(float)
        d = np.sqrt((xx - x) ** 2 + (yy - y) ** 2)
        wgt = np.clip(r + 0.5 - d, 0.0, 1.0)[..., None]
        pixels[y0:y1, x0:x1] = (
            pixels[y0:y1, x0:x1] * (1 - wgt) + markers.intensity * wgt
        )


def apply_shear(
    markers: MarkerField,
    dx_px: float,
    dy_px: float,
    dphi_deg: float,
    pivot: tuple[float, float] | None = None,
    geometry: SensorGeometry = SensorGeometry(),
) -> MarkerField:
    """Rigidly displace the marker field: rotate about pivot, then translate."""
    rest = markers.rest_positions
    if pivot is None:
        pivot = tuple(rest.mean(axis=0))
    phi = np.deg2rad(dphi_deg)
    c, s = np.cos(phi), np.sin(phi)
    rot = np.array([[c, -s], [s, c]])
    moved = (rest - pivot) @ rot.T + pivot + np.array([dx_px, dy_px])
    disp = moved - rest
    h, w = geometry.shape
    margin = markers.radius_px
    bad = np.where(
        (moved[:, 0] < margin)
        | (moved[:, 0] > w - 1 - margin)
        | (moved[:, 1] < margin)
        | (moved[:, 1] > h - 1 - margin)
    )[0]
    if len(bad):
        raise ValueError(f"markers would leave frame bounds: indices {bad.tolist()}")
    return replace(
        markers,
        rest_positions=rest.copy(),
        displacement=disp,
        shear=(dx_px, dy_px, dphi_deg),
    )


# ---------------------------------------------------------------------------
# Sequence persistence: numbered PNGs + JSON-lines sidecar


def save_sequence(
    out_dir: str | Path,
    frames: list[tuple[GelFrame, dict]],
) -> Path:
    """Write frames as PNGs, truth depths as .npy, one JSONL record per frame."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sidecar = out / "frames.jsonl"
    with sidecar.open("w") as fh:
        for i, (frame, record) in enumerate(frames):
            png = f"frame_{i:04d}.png"
            img = Image.fromarray((frame.pixels * 255).round().astype(np.uint8))
            img.save(out / png)
            rec = {"frame": i, "png": png}
            rec.update(record)
            if frame.truth is not None and frame.truth.shear is not None:
                rec["shear"] = list(frame.truth.shear)
            if frame.truth is not None and frame.truth.depth is not None:
                depth_file = f"depth_{i:04d}.npy"
                np.save(out / depth_file, frame.truth.depth.z)
                rec["depth_npy"] = depth_file
            fh.write(json.dumps(rec) + "\n")
    return sidecar


def load_sequence(seq_dir: str | Path) -> list[tuple[GelFrame, dict]]:
    """Load a saved sequence; truth depth and shear are reattached."""
    seq = Path(seq_dir)
    sidecar = seq / "frames.jsonl"
    if not sidecar.exists():
        raise FileNotFoundError(f"no frames.jsonl in {seq}")
    frames = []
    for line_no, line in enumerate(sidecar.read_text().splitlines()):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            img = Image.open(seq / rec["png"])
            pixels = np.asarray(img, dtype=float) / 255.0
        except Exception as exc:
            raise ValueError(f"malformed sequence at frame record {line_no}: {exc}")
        truth = FrameTruth()
        if "shear" in rec:
            truth.shear = tuple(rec["shear"])
        if "depth_npy" in rec:
            truth.depth = DepthMap(z=np.load(seq / rec["depth_npy"]))
        frames.append((GelFrame(pixels=pixels, truth=truth), rec))
    return frames
