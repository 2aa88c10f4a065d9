"""Procedural class-conditional generator with exact ground truth.

Stands in for a real generative model in end-to-end tests. Every output is
a pure function of (class spec, latent, seed): shape parameters are a
clamped affine map of the latent coordinates, the ground-truth mask is the
exact rasterization of the shape at pixel centers, and a 16-head ensemble
disagrees only inside a 3-pixel boundary band by an injectable amount.
Inside the band each head slides from the true one-hot label toward its own
fixed probability target (targets are spread evenly over (0, 1)), displaced
by the disagreement level, so the per-pixel divergence across heads grows
strictly with the level and the per-sample uncertainty score carries no
sampling noise. Classifier confidence decreases with the injected
disagreement plus a small seeded jitter, so rejection filtering has a
meaningful signal.

Per-sample randomness comes from independent substreams keyed by
(seed, role), so generation is order-independent and can run in parallel
without changing results.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .formats import ClassTaxonomy, Image, Mask
from .sampling import EnsemblePrediction

FAMILIES = ("ellipse", "rectangle", "star", "crescent")
VALID_RESOLUTIONS = (64, 128, 256)
NUM_HEADS = 16

_CONFIDENCE_STREAM = 50
_DISAGREEMENT_STREAM = 60
_TEXTURE_STREAM = 70

# per-family size multipliers equalizing boundary-band length across families
_SIZE_SCALE = {"ellipse": 1.0, "rectangle": 0.78, "star": 1.0, "crescent": 0.85}


def substream(seed: int, *path: int) -> np.random.Generator:
    """Independent deterministic generator for (seed, path)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(path)))


@dataclass(frozen=True)
class ToyClassSpec:
    """Shape family and parameter ranges for one synthetic class."""

    class_id: int
    shape_family: str
    size_range: tuple[float, float]
    aspect_range: tuple[float, float]
    rotation_range: tuple[float, float]
    color_low: tuple[int, int, int]
    color_high: tuple[int, int, int]
    background_texture: int

    def __post_init__(self):
        if self.shape_family not in FAMILIES:
            raise ValueError(f"unknown shape family {self.shape_family!r}")
        lo, hi = self.size_range
        if not 0.0 < lo <= hi <= 0.9:
            raise ValueError(f"size range {self.size_range} outside (0, 0.9]")


@dataclass(frozen=True)
class ToyOutput:
    image: Image
    gt_mask: Mask
    ensemble: EnsemblePrediction | None
    confidence: float
    disagreement: float


def toy_taxonomy(num_classes: int, seed: int = 0) -> tuple[ClassTaxonomy, list[ToyClassSpec]]:
    """Deterministic taxonomy with the four shape families cycled across classes.

    Includes a "family" task grouping classes by shape family (labels 1..4)
    and a binary "fgbg" task mapping every class to label 1.
    """
    if num_classes < 4:
        raise ValueError("need at least 4 classes, one per shape family")
    rng = substream(seed, 10)
    classes: dict[int, str] = {}
    family_group: dict[int, int] = {}
    specs: list[ToyClassSpec] = []
    for index in range(num_classes):
        class_id = index + 1
        family = FAMILIES[index % len(FAMILIES)]
        classes[class_id] = f"{family}_{class_id:03d}"
        family_group[class_id] = index % len(FAMILIES) + 1
        scale = _SIZE_SCALE[family]
        size_lo = rng.uniform(0.48, 0.54) * scale
        size_hi = size_lo + rng.uniform(0.06, 0.10) * scale
        aspect_lo = rng.uniform(0.70, 0.85)
        aspect_hi = aspect_lo + rng.uniform(0.08, 0.15)
        rot_hi = rng.uniform(math.pi / 2, math.pi)
        color_lo = tuple(int(v) for v in rng.integers(30, 170, size=3))
        color_hi = tuple(min(v + 70, 255) for v in color_lo)
        specs.append(
            ToyClassSpec(
                class_id=class_id,
                shape_family=family,
                size_range=(size_lo, size_hi),
                aspect_range=(aspect_lo, min(aspect_hi, 1.0)),
                rotation_range=(0.0, rot_hi),
                color_low=color_lo,
                color_high=color_hi,
                background_texture=int(rng.integers(0, 4)),
            )
        )
    taxonomy = ClassTaxonomy(
        classes=classes,
        groups={"family": family_group, "fgbg": {cid: 1 for cid in classes}},
    )
    return taxonomy, specs


def injected_disagreement(seed: int) -> float:
    """Default disagreement level toy_generate draws for a sample seed."""
    return float(substream(seed, _DISAGREEMENT_STREAM).random())


def _param(z_value: float, lo: float, hi: float) -> float:
    """Clamped affine map of a roughly standard-normal coordinate into [lo, hi]."""
    u = min(max((z_value + 3.0) / 6.0, 0.0), 1.0)
    return lo + u * (hi - lo)


def _points_in_polygon(px: np.ndarray, py: np.ndarray, verts: np.ndarray) -> np.ndarray:
    inside = np.zeros(px.shape, dtype=bool)
    x1, y1 = verts[-1]
    for x2, y2 in verts:
        crosses = (y1 > py) != (y2 > py)
        denom = (y2 - y1) if y2 != y1 else 1.0
        x_cross = (x2 - x1) * (py - y1) / denom + x1
        inside ^= crosses & (px < x_cross)
        x1, y1 = x2, y2
    return inside


def _rasterize(family: str, res: int, cx: float, cy: float, a: float, b: float,
               rot: float) -> np.ndarray:
    """Exact pixel-center rasterization of one shape; a/b are semi-extents in pixels."""
    ys, xs = np.mgrid[0:res, 0:res]
    px = xs + 0.5 - cx
    py = ys + 0.5 - cy
    cos_r, sin_r = math.cos(rot), math.sin(rot)
    xr = cos_r * px + sin_r * py
    yr = -sin_r * px + cos_r * py
    if family == "ellipse":
        return (xr / a) ** 2 + (yr / b) ** 2 <= 1.0
    if family == "rectangle":
        return (np.abs(xr) <= a) & (np.abs(yr) <= b)
    if family == "star":
        angles = np.arange(10) * math.pi / 5 - math.pi / 2
        radii = np.where(np.arange(10) % 2 == 0, a, 0.45 * a)
        verts = np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=1)
        return _points_in_polygon(xr, yr / b * a, verts)
    if family == "crescent":
        body = xr**2 + yr**2 <= a**2
        cutout = (xr - 0.55 * a) ** 2 + yr**2 <= (0.8 * a) ** 2
        return body & ~cutout
    raise ValueError(f"unknown shape family {family!r}")


def _background(res: int, texture: int, rng: np.random.Generator) -> np.ndarray:
    base = rng.integers(40, 120, size=3).astype(np.float64)
    ramp = np.linspace(0.0, 80.0, res)
    canvas = np.zeros((res, res, 3))
    if texture == 0:
        canvas[:] = base
    elif texture == 1:
        canvas[:] = base + ramp[None, :, None]
    elif texture == 2:
        canvas[:] = base + ramp[:, None, None]
    else:
        ys, xs = np.mgrid[0:res, 0:res]
        checker = ((ys // 8 + xs // 8) % 2) * 40.0
        canvas[:] = base + checker[:, :, None]
    return np.clip(canvas, 0, 255)


def toy_generate(spec: ToyClassSpec, z: np.ndarray, seed: int, res: int = 64,
                 disagreement: float | None = None, with_ensemble: bool = True) -> ToyOutput:
    """Render one labeled sample; deterministic in (spec, z, seed, res).

    ``disagreement`` in [0, 1] sets how far the ensemble heads slide from the
    true label toward their fixed fan of probability targets inside the
    boundary band; when None it is drawn uniformly from a seed-keyed
    substream. ``with_ensemble=False`` skips the head construction (image,
    mask and confidence are unaffected, they use separate substreams).
    """
    if res not in VALID_RESOLUTIONS:
        raise ValueError(f"resolution {res} not in {VALID_RESOLUTIONS}")
    z = np.asarray(z, dtype=np.float64).ravel()
    if z.size < 1 or not np.isfinite(z).all():
        raise ValueError("latent vector must be nonempty and finite")
    if disagreement is None:
        disagreement = injected_disagreement(seed)
    if not 0.0 <= disagreement <= 1.0:
        raise ValueError("disagreement must be in [0, 1]")
    zc = np.resize(z, 8)

    size = _param(zc[0], *spec.size_range)
    aspect = _param(zc[1], *spec.aspect_range)
    rot = _param(zc[2], *spec.rotation_range)
    # circumradius keeps rotated shapes fully inside the frame
    if spec.shape_family == "rectangle":
        reach = size / 2 * math.sqrt(1.0 + aspect**2)
    else:
        reach = size / 2
    margin = reach + 1.0 / res
    cx = _param(zc[3], margin, 1.0 - margin) * res
    cy = _param(zc[4], margin, 1.0 - margin) * res
    a = size * res / 2
    b = aspect * a

    fg = _rasterize(spec.shape_family, res, cx, cy, a, b, rot)
    gt = np.where(fg, np.uint8(spec.class_id), np.uint8(0))

    color = np.array(
        [_param(zc[5 + c], spec.color_low[c], spec.color_high[c]) for c in range(3)]
    )
    canvas = _background(res, spec.background_texture, substream(seed, _TEXTURE_STREAM))
    canvas[fg] = color
    image = Image(np.clip(canvas, 0, 255).astype(np.uint8))

    ensemble = None
    if with_ensemble:
        structure = np.ones((3, 3), dtype=bool)
        band = ndimage.binary_dilation(fg, structure) & ~ndimage.binary_erosion(
            fg, structure, iterations=2
        )
        fg_prob = fg.astype(np.float64)
        targets = (2.0 * np.arange(NUM_HEADS) + 1.0) / (2.0 * NUM_HEADS)
        head_fg = np.repeat(fg_prob[None], NUM_HEADS, axis=0)
        head_fg[:, band] = (
            (1.0 - disagreement) * fg_prob[band][None, :]
            + disagreement * targets[:, None]
        )
        heads = np.stack([1.0 - head_fg, head_fg], axis=-1)
        ensemble = EnsemblePrediction(heads)

    jitter = float(substream(seed, _CONFIDENCE_STREAM).normal(0.0, 0.05))
    confidence = min(max(1.0 - 0.8 * disagreement + jitter, 0.0), 1.0)
    return ToyOutput(
        image=image,
        gt_mask=Mask(gt),
        ensemble=ensemble,
        confidence=confidence,
        disagreement=disagreement,
    )
