"""Dataset layout loading and synthetic benchmark generation.

The directory convention is the industrial-inspection standard:

    <root>/<category>/train/good/*.pgm
    <root>/<category>/test/<defect-type>/*.pgm
    <root>/<category>/ground_truth/<defect-type>/*.pgm

"good" test images carry implicit all-zero masks.  The synthetic generator
emits this exact tree: phase-jittered high-contrast gratings (a deliberately
hard, wiring-like background) as normals, plus defect images with one injected
dent (smooth local darkening), particle (bright compact blob), or scratch
(thin anti-aliased dark line), each with its exact injected support as the
binary ground-truth mask.  Generation is a pure function of (spec, seed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .codec import read_header, write_image
from .errors import ConfigurationError, LayoutError
from .image import Image
from .rng import RandomStream

DEFECT_TYPES = ("dent", "particle", "scratch")
_IMAGE_SUFFIXES = (".pgm", ".ppm", ".png")
_SCRATCH_WIDTH = 1.2  # px


@dataclass(frozen=True)
class DefectRecipe:
    """Size is the defect's controlling dimension: gaussian sigma for dents,
    disk radius for particles, segment length for scratches (all pixels)."""

    size_range: tuple[float, float]
    amplitude_range: tuple[float, float]


@dataclass(frozen=True)
class SyntheticSpec:
    height: int = 64
    width: int = 64
    channels: int = 1
    category: str = "grating"
    stripe_period: float = 8.0
    stripe_angle_deg: float = 0.0
    stripe_low: float = 0.25
    stripe_high: float = 0.75
    edge_softness: float = 1.0  # ramp width of the stripe edges, px
    brightness_jitter: float = 0.03
    dent: DefectRecipe = field(default_factory=lambda: DefectRecipe((1.6, 2.6), (0.25, 0.45)))
    particle: DefectRecipe = field(default_factory=lambda: DefectRecipe((1.6, 3.0), (0.30, 0.50)))
    scratch: DefectRecipe = field(default_factory=lambda: DefectRecipe((8.0, 14.0), (0.30, 0.50)))
    train_count: int = 256
    test_count: int = 20  # per defect type
    seed: int = 7

    def validate(self) -> None:
        if self.height < 8 or self.width < 8:
            raise ConfigurationError(f"geometry must be at least 8x8, got {self.height}x{self.width}")
        if self.channels not in (1, 3):
            raise ConfigurationError(f"channels must be 1 or 3, got {self.channels}")
        if self.train_count < 1 or self.test_count < 1:
            raise ConfigurationError("train and per-defect test counts must be >= 1")
        if self.stripe_period <= 0:
            raise ConfigurationError(f"stripe period must be > 0, got {self.stripe_period}")
        if not 0 <= self.stripe_low < self.stripe_high <= 1:
            raise ConfigurationError("stripe intensities must satisfy 0 <= low < high <= 1")
        side_limit = min(self.height, self.width) / 4.0
        for name in DEFECT_TYPES:
            recipe: DefectRecipe = getattr(self, name)
            lo, hi = recipe.size_range
            if not 1.0 <= lo <= hi <= side_limit:
                raise ConfigurationError(
                    f"{name} size range {recipe.size_range} must lie in [1, {side_limit}]")
            alo, ahi = recipe.amplitude_range
            if not 0.0 <= alo <= ahi <= 1.0:
                raise ConfigurationError(f"{name} amplitude range must lie in [0, 1]")


@dataclass(frozen=True)
class TestSample:
    image: Path
    mask: Optional[Path]  # None means an implicit all-zero mask


@dataclass
class DatasetManifest:
    category: str
    root: Path
    train: list[Path]
    test: dict[str, list[TestSample]]
    geometry: tuple[int, int, int]

    def to_json_dict(self) -> dict:
        rel = lambda p: str(Path(p).relative_to(self.root))
        return {
            "category": self.category,
            "geometry": list(self.geometry),
            "counts": {"train": len(self.train),
                       "test": {t: len(s) for t, s in self.test.items()}},
            "train": [rel(p) for p in self.train],
            "test": {t: [{"image": rel(s.image),
                          "mask": rel(s.mask) if s.mask else None} for s in samples]
                     for t, samples in self.test.items()},
        }


# ---------------------------------------------------------------------------
# rendering

def render_normal(spec: SyntheticSpec, gen: np.random.Generator) -> np.ndarray:
    """One phase-jittered grating with a soft square-wave profile, (H, W, C)."""
    phase = gen.uniform(0.0, spec.stripe_period)
    brightness = gen.uniform(-spec.brightness_jitter, spec.brightness_jitter)
    theta = np.deg2rad(spec.stripe_angle_deg)
    ys, xs = np.mgrid[0 : spec.height, 0 : spec.width].astype(np.float64)
    along = xs * np.cos(theta) + ys * np.sin(theta)
    frac = np.mod(along + phase, spec.stripe_period) / spec.stripe_period
    ramp = max(spec.edge_softness / spec.stripe_period, 1e-9)
    dist = np.abs(frac - 0.25)
    dist = np.minimum(dist, 1.0 - dist)  # circular distance to the high-plateau centre
    profile = np.clip((0.25 - dist) / ramp + 0.5, 0.0, 1.0)
    values = spec.stripe_low + (spec.stripe_high - spec.stripe_low) * profile + brightness
    values = np.clip(values, 0.0, 1.0)
    return np.repeat(values[:, :, None], spec.channels, axis=2)


def render_defect(spec: SyntheticSpec, defect_type: str,
                  gen: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Signed intensity delta (H, W) and its exact boolean support mask.

    The delta is identically zero outside the mask, so the mask never
    under-covers; anti-aliasing keeps any over-cover within one pixel.
    """
    if defect_type not in DEFECT_TYPES:
        raise ConfigurationError(f"unknown defect type {defect_type!r}")
    recipe: DefectRecipe = getattr(spec, defect_type)
    size = gen.uniform(*recipe.size_range)
    amplitude = gen.uniform(*recipe.amplitude_range)
    h, w = spec.height, spec.width
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)

    if defect_type == "dent":
        reach = float(np.ceil(3.0 * size))
        cx = gen.uniform(reach, w - 1 - reach)
        cy = gen.uniform(reach, h - 1 - reach)
        dist = np.hypot(xs - cx, ys - cy)
        mask = dist <= reach
        delta = np.where(mask, -amplitude * np.exp(-(dist ** 2) / (2.0 * size ** 2)), 0.0)
    elif defect_type == "particle":
        margin = size + 1.5
        cx = gen.uniform(margin, w - 1 - margin)
        cy = gen.uniform(margin, h - 1 - margin)
        dist = np.hypot(xs - cx, ys - cy)
        coverage = np.clip(size + 0.5 - dist, 0.0, 1.0)
        mask = coverage > 0
        delta = amplitude * coverage
    else:  # scratch
        margin = size / 2.0 + _SCRATCH_WIDTH + 1.5
        cx = gen.uniform(margin, w - 1 - margin)
        cy = gen.uniform(margin, h - 1 - margin)
        angle = gen.uniform(0.0, np.pi)
        dx, dy = 0.5 * size * np.cos(angle), 0.5 * size * np.sin(angle)
        p0 = np.array([cx - dx, cy - dy])
        seg = np.array([2 * dx, 2 * dy])
        rel_x, rel_y = xs - p0[0], ys - p0[1]
        t = np.clip((rel_x * seg[0] + rel_y * seg[1]) / (seg @ seg), 0.0, 1.0)
        dist = np.hypot(rel_x - t * seg[0], rel_y - t * seg[1])
        coverage = np.clip(_SCRATCH_WIDTH / 2.0 + 0.5 - dist, 0.0, 1.0)
        mask = coverage > 0
        delta = -amplitude * coverage
    return delta, mask


# ---------------------------------------------------------------------------
# generation and loading

def generate_synthetic(spec: SyntheticSpec, out_root: str | Path) -> DatasetManifest:
    """Write the full dataset tree under ``out_root``; deterministic from the seed."""
    spec.validate()
    out_root = Path(out_root)
    category_dir = out_root / spec.category
    stream = RandomStream(spec.seed).child("synth")
    try:
        (category_dir / "train" / "good").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create dataset tree under {out_root}: {exc}") from exc

    train_paths = []
    for i in range(spec.train_count):
        base = render_normal(spec, stream.child("train", i).generator())
        path = category_dir / "train" / "good" / f"{i:03d}.pgm"
        write_image(Image(base), path, bit_depth=16)
        train_paths.append(path)

    test: dict[str, list[TestSample]] = {}
    for defect_type in DEFECT_TYPES:
        (category_dir / "test" / defect_type).mkdir(parents=True, exist_ok=True)
        (category_dir / "ground_truth" / defect_type).mkdir(parents=True, exist_ok=True)
        samples = []
        for i in range(spec.test_count):
            base = render_normal(spec, stream.child("test", defect_type, i).generator())
            delta, mask = render_defect(spec, defect_type,
                                        stream.child("defect", defect_type, i).generator())
            defect_img = np.clip(base + delta[:, :, None], 0.0, 1.0)
            img_path = category_dir / "test" / defect_type / f"{i:03d}.pgm"
            mask_path = category_dir / "ground_truth" / defect_type / f"{i:03d}.pgm"
            write_image(Image(defect_img), img_path, bit_depth=16)
            write_image(Image(mask.astype(np.float64)[:, :, None]), mask_path, bit_depth=8)
            samples.append(TestSample(img_path, mask_path))
        test[defect_type] = samples

    manifest = DatasetManifest(
        category=spec.category,
        root=category_dir,
        train=train_paths,
        test=test,
        geometry=(spec.height, spec.width, spec.channels),
    )
    doc = manifest.to_json_dict()
    doc["seed"] = spec.seed
    (out_root / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True))
    return manifest


def _find_category_dir(root: Path, category: Optional[str]) -> Path:
    if category is not None:
        candidate = root / category
        if not (candidate / "train" / "good").is_dir():
            raise LayoutError(f"no train/good directory under {candidate}")
        return candidate
    if (root / "train" / "good").is_dir():
        return root
    candidates = sorted(
        d for d in root.iterdir() if d.is_dir() and (d / "train" / "good").is_dir()
    ) if root.is_dir() else []
    if len(candidates) == 1:
        return candidates[0]
    if not candidates:
        raise LayoutError(f"no <category>/train/good directory found under {root}")
    names = ", ".join(d.name for d in candidates)
    raise LayoutError(f"multiple categories under {root} ({names}); pass one explicitly")


def _list_images(directory: Path) -> list[Path]:
    return sorted(p for p in directory.iterdir()
                  if p.is_file() and p.suffix.lower() in _IMAGE_SUFFIXES)


def _mask_for(category_dir: Path, defect_type: str, image_path: Path) -> Path:
    gt_dir = category_dir / "ground_truth" / defect_type
    exact = gt_dir / image_path.name
    if exact.is_file():
        return exact
    for suffix in _IMAGE_SUFFIXES:  # the common <stem>_mask convention
        candidate = gt_dir / f"{image_path.stem}_mask{suffix}"
        if candidate.is_file():
            return candidate
    raise LayoutError(f"missing ground-truth mask for {image_path}")


def load_dataset(root: str | Path, category: Optional[str] = None) -> DatasetManifest:
    """Walk the directory convention and verify geometry consistency."""
    root = Path(root)
    if not root.is_dir():
        raise LayoutError(f"dataset root {root} is not a directory")
    category_dir = _find_category_dir(root, category)

    train = _list_images(category_dir / "train" / "good")
    if not train:
        raise LayoutError(f"empty training set in {category_dir / 'train' / 'good'}")

    test_dir = category_dir / "test"
    if not test_dir.is_dir():
        raise LayoutError(f"no test directory under {category_dir}")
    test: dict[str, list[TestSample]] = {}
    for type_dir in sorted(d for d in test_dir.iterdir() if d.is_dir()):
        images = _list_images(type_dir)
        if not images:
            continue
        if type_dir.name == "good":
            test[type_dir.name] = [TestSample(p, None) for p in images]
        else:
            test[type_dir.name] = [
                TestSample(p, _mask_for(category_dir, type_dir.name, p)) for p in images]
    if not test:
        raise LayoutError(f"no test images under {test_dir}")

    geometry = read_header(train[0])
    for path in train:
        if read_header(path) != geometry:
            raise LayoutError(f"geometry mismatch: {path} is not {geometry}")
    for samples in test.values():
        for sample in samples:
            if read_header(sample.image) != geometry:
                raise LayoutError(f"geometry mismatch: {sample.image} is not {geometry}")
            if sample.mask is not None:
                mh, mw, mc = read_header(sample.mask)
                if (mh, mw) != geometry[:2] or mc != 1:
                    raise LayoutError(
                        f"mask geometry mismatch: {sample.mask} is {(mh, mw, mc)}, "
                        f"image is {geometry}")

    return DatasetManifest(
        category=category_dir.name,
        root=category_dir,
        train=train,
        test=test,
        geometry=geometry,
    )
