"""Trend analysis: from per-pixel sweep sequences to anomaly score maps.

The trend of interest is slow and directional, so each pixel's sequence is
reduced to the magnitude of its lowest nonzero-frequency DFT bin (index 1;
index 0 is the discarded DC term).  Anomalous pixels drift in one direction
as the noise level grows and light up this bin; normal fluctuations have no
direction and mostly cancel.  The intensity and uncertainty trend maps are
min-max normalized per image and fused multiplicatively, with an exponent
weight on the uncertainty side.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .image import Image, require_finite
from .model import DenoiserModel, predict_x0
from .rng import RandomStream
from .sweep import MIN_LEVELS, NoiseSchedule, TrendStack, corrupt, sweep

TREND_KINDS = ("intensity", "uncertainty")
SCORE_PROVENANCES = ("proposed", "baseline", "intensity-only", "uncertainty-only")


def _first_bin_weights(n: int) -> np.ndarray:
    return np.exp(-2j * np.pi * np.arange(n) / n)


def second_fourier_magnitude(seq) -> float:
    """|X_1| of a real sequence: the lowest nonzero-frequency DFT bin."""
    arr = np.asarray(seq, dtype=np.float64).reshape(-1)
    if arr.size < MIN_LEVELS:
        raise ConfigurationError(f"sequence needs at least {MIN_LEVELS} entries, got {arr.size}")
    require_finite(arr, "trend sequence")
    return float(np.abs(_first_bin_weights(arr.size) @ arr))


@dataclass(frozen=True)
class TrendMap:
    """H x W map of nonnegative trend magnitudes, averaged over channels."""

    values: np.ndarray
    kind: str

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ConfigurationError(f"trend map must be 2-D, got shape {arr.shape}")
        if self.kind not in TREND_KINDS:
            raise ConfigurationError(f"kind must be one of {TREND_KINDS}, got {self.kind!r}")
        require_finite(arr, "trend map")
        if np.any(arr < 0):
            raise ConfigurationError("trend map values must be >= 0")
        object.__setattr__(self, "values", arr)


@dataclass(frozen=True)
class ScoreMap:
    """H x W anomaly scores in [0, 1] with a provenance tag."""

    values: np.ndarray
    provenance: str

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ConfigurationError(f"score map must be 2-D, got shape {arr.shape}")
        if self.provenance not in SCORE_PROVENANCES:
            raise ConfigurationError(
                f"provenance must be one of {SCORE_PROVENANCES}, got {self.provenance!r}")
        require_finite(arr, "score map")
        if np.any(arr < 0) or np.any(arr > 1):
            raise ConfigurationError("score map values must lie in [0, 1]")
        object.__setattr__(self, "values", arr)


def trend_map(stack: TrendStack, kind: str) -> TrendMap:
    """First-bin DFT magnitude per pixel and channel, then channel-averaged."""
    if kind not in TREND_KINDS:
        raise ConfigurationError(f"kind must be one of {TREND_KINDS}, got {kind!r}")
    frames = getattr(stack, kind)
    weights = _first_bin_weights(frames.shape[0])
    spectrum = np.tensordot(weights, frames.astype(np.float64), axes=1)
    return TrendMap(np.abs(spectrum).mean(axis=2), kind)


def minmax01(values: np.ndarray) -> np.ndarray:
    """(v - min) / (max - min); a constant input maps to all zeros."""
    lo = float(values.min())
    hi = float(values.max())
    if hi == lo:
        return np.zeros_like(values, dtype=np.float64)
    return (values - lo) / (hi - lo)


def normalize01(tmap: TrendMap) -> TrendMap:
    return TrendMap(minmax01(tmap.values), tmap.kind)


def fuse(trend_x_norm: TrendMap, trend_u_norm: TrendMap, weight: float) -> ScoreMap:
    """score = intensity_trend * uncertainty_trend ** weight, pixel-wise.

    ``weight=1`` is the plain product; ``weight=0`` degenerates to the
    intensity-only score.
    """
    if trend_x_norm.values.shape != trend_u_norm.values.shape:
        raise ConfigurationError(
            f"geometry mismatch: {trend_x_norm.values.shape} vs {trend_u_norm.values.shape}")
    if not (np.isfinite(weight) and weight >= 0):
        raise ConfigurationError(f"uncertainty weight must be >= 0, got {weight}")
    for tmap in (trend_x_norm, trend_u_norm):
        if tmap.values.max(initial=0.0) > 1.0:
            raise ConfigurationError("fuse expects maps normalized to [0, 1]")
    return ScoreMap(trend_x_norm.values * trend_u_norm.values ** weight, "proposed")


@dataclass(frozen=True)
class DetectionResult:
    proposed: ScoreMap
    intensity_only: ScoreMap
    uncertainty_only: ScoreMap
    trend_intensity: TrendMap  # raw, un-normalized
    trend_uncertainty: TrendMap


def detect(model: DenoiserModel, image: Image, schedule: NoiseSchedule,
           stream: RandomStream, weight: float = 1.0) -> DetectionResult:
    """Full per-image analysis: sweep, trend maps, normalization, fusion.

    Returns the fused score map plus the two single-signal maps (the
    normalized intensity and uncertainty trends on their own) and the raw
    trend maps, which stay comparable across images.
    """
    stack = sweep(model, image, schedule, stream)
    raw_x = trend_map(stack, "intensity")
    raw_u = trend_map(stack, "uncertainty")
    norm_x = normalize01(raw_x)
    norm_u = normalize01(raw_u)
    return DetectionResult(
        proposed=fuse(norm_x, norm_u, weight),
        intensity_only=ScoreMap(norm_x.values, "intensity-only"),
        uncertainty_only=ScoreMap(norm_u.values, "uncertainty-only"),
        trend_intensity=raw_x,
        trend_uncertainty=raw_u,
    )


def baseline_score(model: DenoiserModel, image: Image, beta_star: float,
                   stream: RandomStream) -> ScoreMap:
    """Single-noise-level reconstruction error, channel-averaged and normalized."""
    if not (np.isfinite(beta_star) and beta_star > 0):
        raise ConfigurationError(f"baseline noise level must be > 0, got {beta_star}")
    noisy = corrupt(image, beta_star, stream.generator())
    recon = predict_x0(model, noisy, beta_star)
    err = np.abs(image.data - recon.data).mean(axis=2)
    return ScoreMap(minmax01(err), "baseline")


def save_score_map(score: ScoreMap, path: str | Path, sidecar: dict | None = None) -> None:
    """Export as a 16-bit graymap (values scaled by 65535) plus a JSON sidecar."""
    from .codec import write_image

    path = Path(path)
    write_image(Image(score.values[:, :, None]), path, bit_depth=16)
    meta = {"provenance": score.provenance}
    if sidecar:
        meta.update(sidecar)
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True))
