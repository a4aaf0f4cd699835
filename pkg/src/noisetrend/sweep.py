"""The degradation sweep: noise schedule, corruption, and per-pixel stacks.

For each level in the schedule the input is corrupted with fresh additive
Gaussian noise (standard deviation equal to the level), reconstructed in one
shot by the denoiser, and the input-gradient map is evaluated at that
reconstruction.  The per-pixel intensity and uncertainty sequences across the
sweep feed the trend analysis.  Note the sequence heads differ on purpose:
the intensity sequence starts with the raw input image, while the uncertainty
sequence starts with the gradient at the level-0 reconstruction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .image import Image, require_finite, require_pipeline_geometry
from .model import DenoiserModel, input_gradient_batch, predict_x0_batch
from .rng import RandomStream

MIN_LEVELS = 4


@dataclass(frozen=True)
class NoiseSchedule:
    """Strictly increasing noise levels [0, ..., beta_max]."""

    levels: tuple[float, ...]

    def __post_init__(self):
        levels = tuple(float(v) for v in self.levels)
        object.__setattr__(self, "levels", levels)
        if len(levels) < MIN_LEVELS:
            raise ConfigurationError(
                f"a trend needs at least {MIN_LEVELS} levels, got {len(levels)}")
        if levels[0] != 0.0:
            raise ConfigurationError(f"first level must be exactly 0, got {levels[0]}")
        if any(b >= a for b, a in zip(levels, levels[1:])):
            raise ConfigurationError("levels must be strictly increasing")
        if not all(np.isfinite(levels)):
            raise ConfigurationError("levels must be finite")

    @property
    def beta_max(self) -> float:
        return self.levels[-1]

    def __len__(self) -> int:
        return len(self.levels)


def make_schedule(beta_max: float, level_count: int) -> NoiseSchedule:
    """Linearly spaced schedule from 0 to ``beta_max`` inclusive."""
    if not (np.isfinite(beta_max) and beta_max > 0):
        raise ConfigurationError(f"beta_max must be > 0, got {beta_max}")
    if level_count < MIN_LEVELS:
        raise ConfigurationError(
            f"level_count must be >= {MIN_LEVELS}, got {level_count}")
    return NoiseSchedule(tuple(np.linspace(0.0, beta_max, level_count)))


def corrupt_batch(clean: np.ndarray, levels: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    """Additive Gaussian corruption with per-image standard deviations."""
    noise = gen.standard_normal(clean.shape)
    return clean + noise.astype(clean.dtype) * np.asarray(levels, dtype=clean.dtype).reshape(
        -1, *([1] * (clean.ndim - 1)))


def corrupt(image: Image, noise_level: float, rng: np.random.Generator) -> Image:
    """Add i.i.d. Gaussian noise with standard deviation exactly ``noise_level``.

    A level of 0 returns the input bit-identically and draws nothing.
    """
    if not np.isfinite(noise_level) or noise_level < 0:
        raise ConfigurationError(f"noise level must be finite and >= 0, got {noise_level}")
    if noise_level == 0:
        return Image(image.data.copy())
    return Image(image.data + rng.standard_normal(image.data.shape) * noise_level)


@dataclass(frozen=True)
class TrendStack:
    """Per-pixel sequences across the sweep, shape (levels, H, W, C)."""

    levels: tuple[float, ...]
    intensity: np.ndarray
    uncertainty: np.ndarray

    def __post_init__(self):
        if self.intensity.shape != self.uncertainty.shape:
            raise ConfigurationError(
                f"sequence shapes differ: {self.intensity.shape} vs {self.uncertainty.shape}")
        if self.intensity.shape[0] != len(self.levels):
            raise ConfigurationError(
                f"{self.intensity.shape[0]} sequence entries for {len(self.levels)} levels")
        require_finite(self.intensity, "intensity sequence")
        require_finite(self.uncertainty, "uncertainty sequence")

    @property
    def geometry(self) -> tuple[int, int, int]:
        return self.intensity.shape[1:]


def sweep(model: DenoiserModel, image: Image, schedule: NoiseSchedule,
          stream: RandomStream) -> TrendStack:
    """Corrupt, reconstruct, and measure uncertainty at every schedule level.

    Each level draws from its own child stream of ``stream``, so levels are
    reproducible independently of evaluation order.
    """
    require_pipeline_geometry(image.geometry)
    if image.channels != model.arch.channels:
        raise ConfigurationError(
            f"model expects {model.arch.channels} channels, image has {image.channels}")
    levels = np.asarray(schedule.levels)
    noisy = np.empty((len(levels),) + image.geometry)
    noisy[0] = image.data
    for k in range(1, len(levels)):
        gen = stream.child("level", k).generator()
        noisy[k] = image.data + gen.standard_normal(image.geometry) * levels[k]
    recons = predict_x0_batch(model, noisy, levels)
    uncertainty = input_gradient_batch(model, recons, levels)
    intensity = np.concatenate([image.data[None], recons[1:]], axis=0)
    return TrendStack(tuple(levels), intensity, uncertainty)


def dump_stack(stack: TrendStack, out_dir: str | Path) -> Path:
    """Debug dump: one 16-bit graymap per (level, kind) plus a JSON index.

    Each frame is min-max scaled to use the full sample range; the index
    records the (lo, hi) pair per file so values remain recoverable.
    """
    from .codec import write_image

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    index = {"levels": list(stack.levels), "files": []}
    for kind in ("intensity", "uncertainty"):
        frames = getattr(stack, kind)
        for k in range(frames.shape[0]):
            frame = frames[k].mean(axis=2)
            lo, hi = float(frame.min()), float(frame.max())
            scaled = np.zeros_like(frame) if hi == lo else (frame - lo) / (hi - lo)
            name = f"{kind}_{k:02d}.pgm"
            write_image(Image(scaled), out_dir / name, bit_depth=16)
            index["files"].append(
                {"file": name, "kind": kind, "level": stack.levels[k], "lo": lo, "hi": hi})
    index_path = out_dir / "index.json"
    index_path.write_text(json.dumps(index, indent=2))
    return index_path
