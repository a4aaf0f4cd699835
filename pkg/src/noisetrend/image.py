"""The universal pixel container.

An :class:`Image` holds an H x W x C float64 buffer in row-major order.
Nominal intensity range is [0, 1]; noisy and gradient buffers are allowed
to leave that range.  The denoiser and the sweep additionally require a
minimum side length of 8 pixels, enforced at their entry points via
:func:`require_pipeline_geometry` (tiny images remain representable so the
codec can round-trip small fixtures).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

MIN_PIPELINE_SIDE = 8


@dataclass(frozen=True)
class Image:
    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ConfigurationError(f"image data must be HxW or HxWxC, got shape {arr.shape}")
        if arr.shape[2] not in (1, 3):
            raise ConfigurationError(f"channel count must be 1 or 3, got {arr.shape[2]}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ConfigurationError(f"degenerate image geometry {arr.shape}")
        object.__setattr__(self, "data", np.ascontiguousarray(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def geometry(self) -> tuple[int, int, int]:
        return self.data.shape  # type: ignore[return-value]

    @classmethod
    def constant(cls, height: int, width: int, channels: int = 1, value: float = 0.0) -> "Image":
        return cls(np.full((height, width, channels), float(value)))


def require_pipeline_geometry(geometry: tuple[int, int, int]) -> None:
    """Reject images too small for the denoiser and the trend sweep."""
    h, w, _ = geometry
    if h < MIN_PIPELINE_SIDE or w < MIN_PIPELINE_SIDE:
        raise ConfigurationError(
            f"pipeline images must be at least {MIN_PIPELINE_SIDE}x{MIN_PIPELINE_SIDE}, got {h}x{w}"
        )


def require_finite(arr: np.ndarray, what: str) -> None:
    from .errors import NumericError

    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{what} contains non-finite values")
